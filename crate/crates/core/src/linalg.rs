//! Dense kernels shared by the solvers.
//!
//! The symmetric rank-k update dominates every interior-point iteration, so
//! it ships in a sequential and a tile-parallel variant. Both accumulate each
//! output entry over columns in the same fixed order, which keeps the two
//! paths bit-identical and runs reproducible.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{DesignError, Result};

/// `a * a^T` for a rectangular `a` (rows x cols), returned as a full
/// symmetric matrix.
pub fn outer_gram(a: &DMatrix<f64>) -> DMatrix<f64> {
    #[cfg(feature = "parallel")]
    {
        outer_gram_par(a)
    }
    #[cfg(not(feature = "parallel"))]
    {
        outer_gram_seq(a)
    }
}

/// Sequential `a * a^T`.
pub fn outer_gram_seq(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = DMatrix::zeros(n, n);
    outer_gram_block(a, 0, n, &mut out);
    mirror_lower(&mut out);
    out
}

/// Tile-parallel `a * a^T`; each thread owns a block of output columns.
#[cfg(feature = "parallel")]
pub fn outer_gram_par(a: &DMatrix<f64>) -> DMatrix<f64> {
    use rayon::prelude::*;

    let n = a.nrows();
    let mut out = DMatrix::zeros(n, n);
    let tile = 64.max(n / (4 * rayon::current_num_threads().max(1))).min(n.max(1));
    // Split the output into disjoint column bands; each band sums over the
    // full column range of `a` in ascending order, exactly as the sequential
    // kernel does.
    let bands: Vec<(usize, usize)> =
        (0..n).step_by(tile).map(|j0| (j0, (j0 + tile).min(n))).collect();
    let band_results: Vec<(usize, DMatrix<f64>)> = bands
        .par_iter()
        .map(|&(j0, j1)| {
            let mut block = DMatrix::zeros(n, j1 - j0);
            outer_gram_band(a, j0, j1, &mut block);
            (j0, block)
        })
        .collect();
    for (j0, block) in band_results {
        out.view_mut((0, j0), (n, block.ncols())).copy_from(&block);
    }
    mirror_lower(&mut out);
    out
}

/// Accumulates the lower-triangular part of `a a^T` for output columns
/// `[j0, j1)` directly into `out` (full-size output buffer).
fn outer_gram_block(a: &DMatrix<f64>, j0: usize, j1: usize, out: &mut DMatrix<f64>) {
    let n = a.nrows();
    for k in 0..a.ncols() {
        let col = a.column(k);
        for j in j0..j1 {
            let cjk = col[j];
            if cjk == 0.0 {
                continue;
            }
            let mut outcol = out.column_mut(j);
            for i in j..n {
                outcol[i] += col[i] * cjk;
            }
        }
    }
}

/// Same accumulation into a band-local buffer whose column 0 is global `j0`.
#[cfg(feature = "parallel")]
fn outer_gram_band(a: &DMatrix<f64>, j0: usize, j1: usize, out: &mut DMatrix<f64>) {
    let n = a.nrows();
    for k in 0..a.ncols() {
        let col = a.column(k);
        for j in j0..j1 {
            let cjk = col[j];
            if cjk == 0.0 {
                continue;
            }
            let mut outcol = out.column_mut(j - j0);
            for i in j..n {
                outcol[i] += col[i] * cjk;
            }
        }
    }
}

fn mirror_lower(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            m[(j, i)] = m[(i, j)];
        }
    }
}

/// Cholesky factorization with a jittered retry for nearly singular
/// matrices. The jitter grows from `1e-14 * mean(diag)` by factors of 100.
pub fn cholesky_spd(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if let Some(chol) = Cholesky::new(m.clone()) {
        return Ok(chol);
    }
    let n = m.nrows();
    let scale = m.diagonal().iter().map(|d| d.abs()).sum::<f64>() / n.max(1) as f64;
    let mut jitter = 1e-14 * scale.max(1e-300);
    for _ in 0..4 {
        let mut jittered = m.clone();
        for i in 0..n {
            jittered[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(jittered) {
            return Ok(chol);
        }
        jitter *= 100.0;
    }
    Err(DesignError::SingularSystem(
        "Cholesky factorization failed after jittered retries".into(),
    ))
}

/// Solves `m x = b` for symmetric positive definite `m`.
pub fn solve_spd(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(cholesky_spd(m)?.solve(b))
}
