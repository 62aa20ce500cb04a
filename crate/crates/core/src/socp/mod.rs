//! Group-sparse second-order cone programming.
//!
//! Solves `min c_hat' w_hat` subject to `||p_r_hat - S_hat w_hat||_2 <= alpha`
//! and `||w_m||_2 <= q_m` per group with a primal-dual Mehrotra
//! predictor-corrector method under Nesterov-Todd scaling.

mod cone;
mod kkt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::Orientation;
use crate::problem::LiftedProblem;
use cone::{jprod, jsolve, max_step, Scaling};
use kkt::{KktFactor, KktStrategy};

/// Solver tolerances and limits.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Primal/dual feasibility tolerance.
    pub feastol: f64,
    /// Absolute duality-gap tolerance.
    pub abstol: f64,
    /// Relative duality-gap tolerance.
    pub reltol: f64,
    pub max_iterations: usize,
    /// Relative group-norm threshold below which a group counts as inactive.
    pub zero_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            feastol: 1e-8,
            abstol: 1e-8,
            reltol: 1e-8,
            max_iterations: 200,
            zero_threshold: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

/// Result of one cone-program solve.
#[derive(Debug, Clone)]
pub struct SocpSolution {
    /// Lifted primal point, length 9M.
    pub w_hat: DVector<f64>,
    /// Stored-convention complex weights reconstructed per group.
    pub complex_weights: Vec<Complex64>,
    pub objective: f64,
    pub status: SolveStatus,
    /// `||p_r_hat - S_hat w_hat||_2` at the returned point.
    pub residual: f64,
    /// Cone dual variable, usable as an optimality certificate.
    pub dual: DVector<f64>,
    /// `s' z` at the returned point.
    pub duality_gap: f64,
    pub relative_gap: f64,
    pub iterations: usize,
}

/// Reusable per-problem data: the paired real/imaginary columns and their
/// lazily computed Gram matrix.
pub struct SocpWorkspace {
    a: DMatrix<f64>,
    gram_ab: std::sync::OnceLock<DMatrix<f64>>,
    prefer_direct: bool,
}

impl SocpWorkspace {
    pub fn new(lp: &LiftedProblem) -> Self {
        let ng = lp.num_groups();
        let l2 = lp.s_hat.nrows();
        let mut a = DMatrix::zeros(l2, 2 * ng);
        for (m, g) in lp.groups.iter().enumerate() {
            a.column_mut(2 * m).copy_from(&lp.s_hat.column(g[1]));
            a.column_mut(2 * m + 1).copy_from(&lp.s_hat.column(g[2]));
        }
        // Going through the sample space wins once the paired columns
        // outnumber the stacked samples.
        let prefer_direct = l2 + 1 > 2 * ng;
        Self { a, gram_ab: std::sync::OnceLock::new(), prefer_direct }
    }

    fn gram_ab(&self) -> &DMatrix<f64> {
        self.gram_ab.get_or_init(|| self.a.transpose() * &self.a)
    }

    #[cfg(test)]
    fn with_strategy(lp: &LiftedProblem, direct: bool) -> Self {
        let mut ws = Self::new(lp);
        ws.prefer_direct = direct;
        ws
    }
}

/// Solves the lifted cone program.
pub fn solve(lp: &LiftedProblem, cfg: &SolverConfig) -> Result<SocpSolution> {
    let ws = SocpWorkspace::new(lp);
    solve_with_workspace(lp, &ws, cfg)
}

/// Solves reusing a workspace built for the same `S_hat`.
pub fn solve_with_workspace(
    lp: &LiftedProblem,
    ws: &SocpWorkspace,
    cfg: &SolverConfig,
) -> Result<SocpSolution> {
    let n = lp.num_vars();
    let ng = lp.num_groups();
    let l2 = lp.p_r_hat.len();
    let big = l2 + 1;
    let mrows = big + 3 * ng;

    // The zero point is feasible whenever alpha covers the reference norm,
    // and with positive reweights its objective 0 is a lower bound.
    let pnorm = lp.p_r_hat.norm();
    if pnorm <= lp.alpha {
        return Ok(SocpSolution {
            w_hat: DVector::zeros(n),
            complex_weights: vec![Complex64::new(0.0, 0.0); ng],
            objective: 0.0,
            status: SolveStatus::Optimal,
            residual: pnorm,
            dual: DVector::zeros(mrows),
            duality_gap: 0.0,
            relative_gap: 0.0,
            iterations: 0,
        });
    }

    let gather_ab = |x: &DVector<f64>| -> DVector<f64> {
        let mut out = DVector::zeros(2 * ng);
        for m in 0..ng {
            out[2 * m] = x[3 * m + 1];
            out[2 * m + 1] = x[3 * m + 2];
        }
        out
    };
    let apply_g = |x: &DVector<f64>| -> DVector<f64> {
        let mut out = DVector::zeros(mrows);
        let ax = &ws.a * gather_ab(x);
        out.rows_mut(1, l2).copy_from(&ax);
        for m in 0..ng {
            for j in 0..3 {
                out[big + 3 * m + j] = -x[3 * m + j];
            }
        }
        out
    };
    let apply_gt = |y: &DVector<f64>| -> DVector<f64> {
        let mut out = DVector::zeros(n);
        let at = ws.a.transpose() * y.rows(1, l2);
        for m in 0..ng {
            out[3 * m + 1] = at[2 * m];
            out[3 * m + 2] = at[2 * m + 1];
            for j in 0..3 {
                out[3 * m + j] -= y[big + 3 * m + j];
            }
        }
        out
    };

    let mut h = DVector::zeros(mrows);
    h[0] = lp.alpha;
    h.rows_mut(1, l2).copy_from(&lp.p_r_hat);
    let hnorm = h.norm();
    let c = &lp.c_hat;
    let cnorm = c.norm();

    // Interior start: x = 0 with bumped cone heads; z heads mirror the
    // objective so the dual residual vanishes initially.
    let mut x = DVector::zeros(n);
    let mut s = DVector::zeros(mrows);
    s[0] = lp.alpha.max(1.1 * pnorm + 0.1);
    s.rows_mut(1, l2).copy_from(&lp.p_r_hat);
    for m in 0..ng {
        s[big + 3 * m] = 1.0;
    }
    let mut z = DVector::zeros(mrows);
    z[0] = 1.0;
    for m in 0..ng {
        z[big + 3 * m] = c[3 * m].max(1e-8);
    }

    let ncones = 1 + ng;
    let cone_offsets: Vec<(usize, usize)> = std::iter::once((0usize, big))
        .chain((0..ng).map(|m| (big + 3 * m, 3usize)))
        .collect();

    let mut best: Option<(f64, SocpSolution)> = None;
    let finish = |x: &DVector<f64>,
                  z: &DVector<f64>,
                  status: SolveStatus,
                  iterations: usize,
                  gap: f64,
                  relgap: f64| {
        let complex_weights = lp.reconstruct_complex(x);
        SocpSolution {
            w_hat: x.clone(),
            complex_weights,
            objective: c.dot(x),
            status,
            residual: lp.residual_norm(x),
            dual: z.clone(),
            duality_gap: gap,
            relative_gap: relgap,
            iterations,
        }
    };

    for it in 0..=cfg.max_iterations {
        let r_p = apply_g(&x) + &s - &h;
        let r_d = apply_gt(&z) + c;
        let gap = s.dot(&z);
        let pres = r_p.norm() / hnorm.max(1.0);
        let dres = r_d.norm() / cnorm.max(1.0);
        let pobj = c.dot(&x);
        let relgap = gap / pobj.abs().max(1.0);

        if std::env::var("SOCP_TRACE").is_ok() {
            eprintln!(
                "it {it}: pres {pres:.3e} dres {dres:.3e} gap {gap:.3e} relgap {relgap:.3e} pobj {pobj:.6e}"
            );
        }
        let score = pres.max(dres).max(relgap);
        if best.as_ref().map_or(true, |(b, _)| score < *b) {
            best = Some((score, finish(&x, &z, SolveStatus::MaxIterations, it, gap, relgap)));
        }

        if pres <= cfg.feastol
            && dres <= cfg.feastol
            && (gap <= cfg.abstol || relgap <= cfg.reltol)
        {
            return Ok(finish(&x, &z, SolveStatus::Optimal, it, gap, relgap));
        }

        // Primal infeasibility certificate: z in the cone with G'z ~ 0 and
        // h'z < 0 proves the residual ball is unreachable.
        let hz = h.dot(&z);
        if it > 2 && hz < 0.0 {
            let cert = apply_gt(&z).norm() / (-hz);
            if cert <= cfg.feastol.max(1e-9) {
                log::debug!("primal infeasibility certificate at iteration {it}");
                return Ok(finish(&x, &z, SolveStatus::Infeasible, it, gap, relgap));
            }
        }

        if it == cfg.max_iterations {
            break;
        }

        let mut scalings = Vec::with_capacity(ncones);
        let mut scaling_failed = false;
        for &(off, dim) in &cone_offsets {
            match Scaling::compute(
                &s.as_slice()[off..off + dim],
                &z.as_slice()[off..off + dim],
            ) {
                Some(sc) => scalings.push(sc),
                None => {
                    scaling_failed = true;
                    break;
                }
            }
        }
        if scaling_failed {
            log::debug!("cone scaling broke down at iteration {it}");
            if std::env::var("SOCP_TRACE").is_ok() { eprintln!("  BREAK: scaling at it {it}"); }
            break;
        }

        let factor = match KktFactor::factor(&ws.a, ws.gram_ab.as_ref(), &scalings, ws.strategy)
        {
            Ok(f) => f,
            Err(e) => {
                log::debug!("KKT factorization failed at iteration {it}: {e}");
                if std::env::var("SOCP_TRACE").is_ok() { eprintln!("  BREAK: factor at it {it}: {e}"); }
                break;
            }
        };
        let mu = gap / ncones as f64;

        let winv2_rows = |v: &DVector<f64>| -> DVector<f64> {
            let mut out = DVector::zeros(mrows);
            for (sc, &(off, dim)) in scalings.iter().zip(&cone_offsets) {
                let r = sc.apply_winv2(&v.as_slice()[off..off + dim]);
                out.rows_mut(off, dim).copy_from_slice(&r);
            }
            out
        };
        let w2_rows = |v: &DVector<f64>| -> DVector<f64> {
            let mut out = DVector::zeros(mrows);
            for (sc, &(off, dim)) in scalings.iter().zip(&cone_offsets) {
                let r = sc.apply_w(&sc.apply_w(&v.as_slice()[off..off + dim]));
                out.rows_mut(off, dim).copy_from_slice(&r);
            }
            out
        };

        // Solves the block system G' dz = bx, G dx - W^2 dz = bz with
        // refinement against the exact operators; the scalings are too
        // ill-conditioned near convergence for a single pass. Returns the
        // achieved relative residual so the caller can reject bad steps.
        let solve_kkt = |bx: &DVector<f64>, bz: &DVector<f64>| {
            let base = |bx: &DVector<f64>, bz: &DVector<f64>| {
                let rhs = bx + apply_gt(&winv2_rows(bz));
                let dx = factor.solve(&ws.a, &rhs);
                let dz = winv2_rows(&(apply_g(&dx) - bz));
                (dx, dz)
            };
            let scale = bx.norm().max(bz.norm()).max(1.0);
            let target = 1e-2 * cfg.feastol * scale;
            let (mut dx, mut dz) = base(bx, bz);
            let mut best: Option<(f64, DVector<f64>, DVector<f64>)> = None;
            for _ in 0..10 {
                let e_x = bx - apply_gt(&dz);
                let e_z = bz - (apply_g(&dx) - w2_rows(&dz));
                let e = e_x.norm().max(e_z.norm());
                if std::env::var("SOCP_TRACE").is_ok() {
                    eprintln!("  refine: e {e:.3e} (scale {scale:.3e})");
                }
                let improved = best.as_ref().map_or(true, |(b, _, _)| e < *b);
                if improved {
                    best = Some((e, dx.clone(), dz.clone()));
                }
                if e <= target || !improved {
                    break;
                }
                let (cx, cz) = base(&e_x, &e_z);
                dx += cx;
                dz += cz;
            }
            let (err, dx, dz) = best.expect("refinement records at least one iterate");
            (dx, dz, err / scale)
        };

        // Affine direction: W d_c = -s.
        let bz_aff = -&r_p + &s;
        let (dx_aff, dz_aff, _) = solve_kkt(&(-&r_d), &bz_aff);
        let gdx_aff = apply_g(&dx_aff);
        let ds_aff = -&r_p - &gdx_aff;

        let mut step_aff = 1.0f64;
        for &(off, dim) in &cone_offsets {
            step_aff = step_aff
                .min(max_step(&s.as_slice()[off..off + dim], &ds_aff.as_slice()[off..off + dim]))
                .min(max_step(&z.as_slice()[off..off + dim], &dz_aff.as_slice()[off..off + dim]));
        }
        let gap_aff = (&s + step_aff * &ds_aff).dot(&(&z + step_aff * &dz_aff));
        let sigma = (gap_aff / gap).clamp(0.0, 1.0).powi(3);

        // Combined corrector: d_c = lambda \ (sigma mu e - lambda o lambda
        // - (W^{-1} ds_aff) o (W dz_aff)).
        let mut wdc = DVector::zeros(mrows);
        for (sc, &(off, dim)) in scalings.iter().zip(&cone_offsets) {
            let ds_t = sc.apply_winv(&ds_aff.as_slice()[off..off + dim]);
            let dz_t = sc.apply_w(&dz_aff.as_slice()[off..off + dim]);
            let mut corr = vec![0.0; dim];
            jprod(&ds_t, &dz_t, &mut corr);
            let mut rhs = vec![0.0; dim];
            jprod(&sc.lambda, &sc.lambda, &mut rhs);
            for i in 0..dim {
                rhs[i] = -rhs[i] - corr[i];
            }
            rhs[0] += sigma * mu;
            let mut dc = vec![0.0; dim];
            jsolve(&sc.lambda, &rhs, &mut dc);
            let w_dc = sc.apply_w(&dc);
            wdc.rows_mut(off, dim).copy_from_slice(&w_dc);
        }

        let bz = -&r_p - &wdc;
        let (dx, dz, kkt_err) = solve_kkt(&(-&r_d), &bz);
        if kkt_err > 1e-3 {
            log::debug!("KKT refinement floor {kkt_err:.2e} at iteration {it}");
            if std::env::var("SOCP_TRACE").is_ok() { eprintln!("  BREAK: kkt_err {kkt_err:.2e} at it {it}"); }
            break;
        }
        let gdx = apply_g(&dx);
        let ds = -&r_p - &gdx;

        let mut step = 1.0f64 / 0.99;
        for &(off, dim) in &cone_offsets {
            step = step
                .min(max_step(&s.as_slice()[off..off + dim], &ds.as_slice()[off..off + dim]))
                .min(max_step(&z.as_slice()[off..off + dim], &dz.as_slice()[off..off + dim]));
        }
        let step = (0.99 * step).min(1.0);
        if !(step > 0.0) || !step.is_finite() {
            log::debug!("stalled step length at iteration {it}");
            if std::env::var("SOCP_TRACE").is_ok() { eprintln!("  BREAK: step {step:.2e} at it {it}"); }
            break;
        }

        x += step * &dx;
        s += step * &ds;
        z += step * &dz;
    }

    let (_, mut sol) = best.expect("at least one iterate recorded");
    sol.status = SolveStatus::MaxIterations;
    Ok(sol)
}

/// Groups whose norm exceeds `zero_threshold` times the largest group norm,
/// mapped back to `(location index, orientation)`.
pub fn active_groups(
    sol: &SocpSolution,
    zero_threshold: f64,
) -> Vec<(usize, Orientation)> {
    active_groups_of_weights(&sol.complex_weights, zero_threshold)
}

/// Same scan over a bare weight vector.
pub fn active_groups_of_weights(
    weights: &[Complex64],
    zero_threshold: f64,
) -> Vec<(usize, Orientation)> {
    let max = weights.iter().map(|w| w.norm()).fold(0.0f64, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    weights
        .iter()
        .enumerate()
        .filter(|(_, w)| w.norm() > zero_threshold * max)
        .map(|(m, _)| (m / 3, Orientation::from_index(m % 3)))
        .collect()
}
