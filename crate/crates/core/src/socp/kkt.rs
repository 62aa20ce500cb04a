//! Reduced KKT solves for the cone program's normal equations.
//!
//! The Newton system reduces to `H dx = r` with
//! `H = S'_ab Omega S_ab + blockdiag(B_m)` after folding the big residual
//! cone into the 2L-dimensional sample space (`Omega` is identity plus a
//! rank-one term) and the per-group 3x3 scaling blocks `B_m` onto the
//! variable triples. Eliminating each group's `q_m` leaves a system over the
//! paired real/imaginary columns that is solved either
//!
//! * through the sample space (Woodbury; one Cholesky of size 2L), or
//! * densely over the 2 x #groups columns,
//!
//! whichever is smaller. Both routes produce the same direction and are
//! cross-checked in tests.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{DesignError, Result};
use crate::linalg;
use crate::socp::cone::Scaling;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum KktStrategy {
    /// Woodbury through the 2L-dimensional sample space.
    LowRank,
    /// Dense Cholesky over the paired columns.
    Direct,
}

pub(crate) struct KktFactor {
    strategy: KktStrategy,
    beta: Vec<f64>,
    g_row: Vec<[f64; 2]>,
    /// Symmetric 2x2 inverses of the q-eliminated blocks as (p, q, r).
    d_inv: Vec<[f64; 3]>,
    /// The blocks themselves, for residual refinement.
    d_block: Vec<[f64; 3]>,
    eta2: f64,
    kappa: f64,
    vt: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    /// Jacobi equilibration of the factored matrix; the scalings grade its
    /// entries over many decades near convergence.
    equil: DVector<f64>,
}

impl KktFactor {
    /// Factors the reduced system for the current scalings. `scalings[0]` is
    /// the residual cone, the rest are the per-group cones in order.
    pub fn factor(
        a: &DMatrix<f64>,
        gram_ab: Option<&DMatrix<f64>>,
        scalings: &[Scaling],
        strategy: KktStrategy,
    ) -> Result<KktFactor> {
        let ng = scalings.len() - 1;
        let l2 = a.nrows();

        let big = &scalings[0];
        let eta2 = big.eta * big.eta;
        let hnorm2: f64 = big.hh.iter().map(|x| x * x).sum();
        let kappa = 4.0 * hnorm2 + 4.0;
        // Only v_t v_t' enters, so the sign of v = J hh is immaterial.
        let vt = DVector::from_iterator(l2, big.hh[1..].iter().copied());

        // Closed forms for the q-eliminated 3-dimensional cones. With the
        // unit-hyperbolic Householder vector (a; v1, v2) and t = v1^2 + v2^2
        // = a^2 - 1:
        //   beta = W^{-2}[0,0]        = (1 + 8 a^2 t) / eta^2
        //   g    = W^{-2}[0, 1..]     = -4 (2a^2 - 1) a (v1, v2) / eta^2
        //   D^{-1} (Schur inverse)    = eta^2 (I + 8 a^2 vv')
        // The last identity is exact, so the reduced blocks can never lose
        // definiteness to rounding.
        let mut beta = Vec::with_capacity(ng);
        let mut g_row = Vec::with_capacity(ng);
        let mut d_inv = Vec::with_capacity(ng);
        let mut d_blocks = Vec::with_capacity(ng);
        for sc in &scalings[1..] {
            let e2 = sc.eta * sc.eta;
            let a = sc.hh[0];
            let (v1, v2) = (sc.hh[1], sc.hh[2]);
            let t = v1 * v1 + v2 * v2;
            let a2 = a * a;
            let q4 = 1.0 + 8.0 * a2 * t;
            if !(e2 > 0.0) || !(q4 > 0.0) {
                return Err(DesignError::SolverFailure("degenerate cone scaling".into()));
            }
            let s2 = 2.0 * a2 - 1.0;
            beta.push(q4 / e2);
            g_row.push([-4.0 * s2 * a * v1 / e2, -4.0 * s2 * a * v2 / e2]);
            d_inv.push([
                e2 * (1.0 + 8.0 * a2 * v1 * v1),
                e2 * 8.0 * a2 * v1 * v2,
                e2 * (1.0 + 8.0 * a2 * v2 * v2),
            ]);
            let cv = 8.0 * a2 / q4;
            d_blocks.push([
                (1.0 - cv * v1 * v1) / e2,
                -cv * v1 * v2 / e2,
                (1.0 - cv * v2 * v2) / e2,
            ]);
        }

        let (chol, equil) = match strategy {
            KktStrategy::LowRank => {
                // C = A * blockdiag(L_m) with L_m L_m' = D_m^{-1}.
                let mut c = a.clone();
                for (m, di) in d_inv.iter().enumerate() {
                    let (p, q, r) = (di[0], di[1], di[2]);
                    let l11 = p.sqrt();
                    let l21 = q / l11;
                    let l22sq = r - l21 * l21;
                    if !(l11 > 0.0) || !(l22sq > 0.0) {
                        return Err(DesignError::SolverFailure(
                            "reduced block lost definiteness".into(),
                        ));
                    }
                    let l22 = l22sq.sqrt();
                    for i in 0..l2 {
                        let a1 = a[(i, 2 * m)];
                        let a2 = a[(i, 2 * m + 1)];
                        c[(i, 2 * m)] = l11 * a1 + l21 * a2;
                        c[(i, 2 * m + 1)] = l22 * a2;
                    }
                }
                let mut k = linalg::outer_gram(&c);
                // K = C C' + Omega^{-1}, Omega^{-1} = eta2 (I - kt vt vt').
                let kt = kappa / (1.0 + kappa * vt.norm_squared());
                for j in 0..l2 {
                    for i in 0..l2 {
                        k[(i, j)] -= eta2 * kt * vt[i] * vt[j];
                    }
                    k[(j, j)] += eta2;
                }
                let equil = equilibrate(&mut k);
                (linalg::cholesky_spd(&k)?, equil)
            }
            KktStrategy::Direct => {
                let gram = gram_ab.ok_or_else(|| {
                    DesignError::SolverFailure("direct strategy needs the column Gram".into())
                })?;
                let mut h = gram / eta2;
                let g_big = a.transpose() * &vt;
                let scale = kappa / eta2;
                for j in 0..2 * ng {
                    for i in 0..2 * ng {
                        h[(i, j)] += scale * g_big[i] * g_big[j];
                    }
                }
                for (m, d) in d_blocks.iter().enumerate() {
                    h[(2 * m, 2 * m)] += d[0];
                    h[(2 * m, 2 * m + 1)] += d[1];
                    h[(2 * m + 1, 2 * m)] += d[1];
                    h[(2 * m + 1, 2 * m + 1)] += d[2];
                }
                let equil = equilibrate(&mut h);
                (linalg::cholesky_spd(&h)?, equil)
            }
        };

        Ok(KktFactor { strategy, beta, g_row, d_inv, d_block: d_blocks, eta2, kappa, vt, chol, equil })
    }

    fn equil_solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let scaled = rhs.component_mul(&self.equil);
        self.chol.solve(&scaled).component_mul(&self.equil)
    }

    fn dinv_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for (m, di) in self.d_inv.iter().enumerate() {
            out[2 * m] = di[0] * v[2 * m] + di[1] * v[2 * m + 1];
            out[2 * m + 1] = di[1] * v[2 * m] + di[2] * v[2 * m + 1];
        }
        out
    }

    /// Applies the q-eliminated operator `D + A' Omega A`.
    fn reduced_apply(&self, a: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
        let ay = a * y;
        let vz = self.vt.dot(&ay);
        let omega_ay = (&ay + self.kappa * vz * &self.vt) / self.eta2;
        let mut out = a.transpose() * omega_ay;
        for (m, d) in self.d_block.iter().enumerate() {
            out[2 * m] += d[0] * y[2 * m] + d[1] * y[2 * m + 1];
            out[2 * m + 1] += d[1] * y[2 * m] + d[2] * y[2 * m + 1];
        }
        out
    }

    fn reduced_solve(&self, a: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
        match self.strategy {
            KktStrategy::LowRank => {
                let u = self.dinv_apply(rhs);
                let t = a * &u;
                let t = self.equil_solve(&t);
                let t = a.transpose() * t;
                &u - self.dinv_apply(&t)
            }
            KktStrategy::Direct => self.equil_solve(rhs),
        }
    }

    /// Solves `H dx = r` over the full variable vector (q's included).
    pub fn solve(&self, a: &DMatrix<f64>, r: &DVector<f64>) -> DVector<f64> {
        let ng = self.beta.len();
        let mut rt = DVector::zeros(2 * ng);
        for m in 0..ng {
            let rq = r[3 * m];
            rt[2 * m] = r[3 * m + 1] - self.g_row[m][0] * rq / self.beta[m];
            rt[2 * m + 1] = r[3 * m + 2] - self.g_row[m][1] * rq / self.beta[m];
        }

        let mut y = self.reduced_solve(a, &rt);
        // One round of residual refinement counters the late-iteration
        // ill-conditioning of the scalings.
        let resid = &rt - self.reduced_apply(a, &y);
        y += self.reduced_solve(a, &resid);

        let mut dx = DVector::zeros(3 * ng);
        for m in 0..ng {
            let ya = y[2 * m];
            let yb = y[2 * m + 1];
            dx[3 * m] =
                (r[3 * m] - self.g_row[m][0] * ya - self.g_row[m][1] * yb) / self.beta[m];
            dx[3 * m + 1] = ya;
            dx[3 * m + 2] = yb;
        }
        dx
    }

}

/// Symmetric Jacobi scaling in place: `m <- E m E` with
/// `E = diag(1/sqrt(m_ii))`; returns the diagonal of `E`.
fn equilibrate(m: &mut DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    let e = DVector::from_fn(n, |i, _| {
        let d = m[(i, i)];
        if d > 0.0 {
            1.0 / d.sqrt()
        } else {
            1.0
        }
    });
    for j in 0..n {
        for i in 0..n {
            m[(i, j)] *= e[i] * e[j];
        }
    }
    e
}
