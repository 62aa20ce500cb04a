//! Second-order cone algebra: Jordan products, Nesterov-Todd scalings and
//! step-to-boundary computations on contiguous cone slices.

/// `u0^2 - ||u_tail||^2`, the quadratic form defining the cone.
pub fn jnorm2(u: &[f64]) -> f64 {
    let tail: f64 = u[1..].iter().map(|x| x * x).sum();
    u[0] * u[0] - tail
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jordan product `u o v = (u'v; u0 v_t + v0 u_t)`.
pub fn jprod(u: &[f64], v: &[f64], out: &mut [f64]) {
    out[0] = dot(u, v);
    for i in 1..u.len() {
        out[i] = u[0] * v[i] + v[0] * u[i];
    }
}

/// Solves `lambda o x = w` for `x`.
pub fn jsolve(lambda: &[f64], w: &[f64], out: &mut [f64]) {
    let a = jnorm2(lambda);
    let lt_wt = dot(&lambda[1..], &w[1..]);
    let x0 = (lambda[0] * w[0] - lt_wt) / a;
    out[0] = x0;
    for i in 1..w.len() {
        out[i] = (w[i] - x0 * lambda[i]) / lambda[0];
    }
}

/// Nesterov-Todd scaling of one second-order cone.
///
/// The scaling point `wbar = (sbar + J zbar)/(2 gamma)` satisfies
/// `H(wbar) zbar = sbar` for the hyperbolic Householder `H(u) = 2uu' - J`;
/// the scaling matrix is its square root `W = eta H(hh)` built from the
/// half-point `hh = (wbar + e)/sqrt(2(1 + wbar_0))`, so that
/// `lambda = W z = W^{-1} s`.
#[derive(Debug, Clone)]
pub struct Scaling {
    pub eta: f64,
    /// Unit-hyperbolic Householder vector defining `W`.
    pub hh: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl Scaling {
    pub fn compute(s: &[f64], z: &[f64]) -> Option<Scaling> {
        let rs2 = jnorm2(s);
        let rz2 = jnorm2(z);
        if !(rs2 > 0.0) || !(rz2 > 0.0) || s[0] <= 0.0 || z[0] <= 0.0 {
            return None;
        }
        let rs = rs2.sqrt();
        let rz = rz2.sqrt();
        let k = s.len();
        let sbar: Vec<f64> = s.iter().map(|v| v / rs).collect();
        let zbar: Vec<f64> = z.iter().map(|v| v / rz).collect();
        let gamma = ((1.0 + dot(&sbar, &zbar)) / 2.0).sqrt();
        if !(gamma > 0.0) {
            return None;
        }
        let mut wbar = vec![0.0; k];
        wbar[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
        for i in 1..k {
            wbar[i] = (sbar[i] - zbar[i]) / (2.0 * gamma);
        }
        let scale = (2.0 * (1.0 + wbar[0])).sqrt();
        let mut hh = wbar;
        hh[0] += 1.0;
        for v in hh.iter_mut() {
            *v /= scale;
        }
        let eta = (rs / rz).sqrt();
        let mut scaling = Scaling { eta, hh, lambda: vec![0.0; k] };
        let lambda = scaling.apply_w(z);
        scaling.lambda = lambda;
        Some(scaling)
    }

    /// `W u = eta (2 hh (hh'u) - J u)`.
    pub fn apply_w(&self, u: &[f64]) -> Vec<f64> {
        let c = 2.0 * dot(&self.hh, u);
        let mut out = vec![0.0; u.len()];
        out[0] = self.eta * (c * self.hh[0] - u[0]);
        for i in 1..u.len() {
            out[i] = self.eta * (c * self.hh[i] + u[i]);
        }
        out
    }

    /// `W^{-1} u = (2 v (v'u) - J u) / eta` with `v = J hh`.
    pub fn apply_winv(&self, u: &[f64]) -> Vec<f64> {
        // v'u = hh0 u0 - hh_t'u_t
        let vu = self.hh[0] * u[0] - dot(&self.hh[1..], &u[1..]);
        let mut out = vec![0.0; u.len()];
        out[0] = (2.0 * vu * self.hh[0] - u[0]) / self.eta;
        for i in 1..u.len() {
            out[i] = (-2.0 * vu * self.hh[i] + u[i]) / self.eta;
        }
        out
    }

    /// Single-pass `W^{-2} u`; with `v = J hh`,
    /// `W^{-2} = (I + 4||v||^2 vv' - 2v(Jv)' - 2(Jv)v') / eta^2`.
    pub fn apply_winv2(&self, u: &[f64]) -> Vec<f64> {
        let hh = &self.hh;
        let vnorm2: f64 = hh.iter().map(|x| x * x).sum();
        let vu = hh[0] * u[0] - dot(&hh[1..], &u[1..]);
        let hu = dot(hh, u);
        let cv = 4.0 * vnorm2 * vu - 2.0 * hu;
        let ch = -2.0 * vu;
        let e2 = self.eta * self.eta;
        let mut out = vec![0.0; u.len()];
        out[0] = (u[0] + cv * hh[0] + ch * hh[0]) / e2;
        for i in 1..u.len() {
            out[i] = (u[i] - cv * hh[i] + ch * hh[i]) / e2;
        }
        out
    }

    /// Single-pass `W^2 u = eta^2 (I + 4||hh||^2 hh hh' - 2 hh (J hh)'
    /// - 2 (J hh) hh') u`.
    pub fn apply_w2(&self, u: &[f64]) -> Vec<f64> {
        let hh = &self.hh;
        let hnorm2: f64 = hh.iter().map(|x| x * x).sum();
        let hu = dot(hh, u);
        let jhu = hh[0] * u[0] - dot(&hh[1..], &u[1..]);
        let ch = 4.0 * hnorm2 * hu - 2.0 * jhu;
        let cj = -2.0 * hu;
        let e2 = self.eta * self.eta;
        let mut out = vec![0.0; u.len()];
        out[0] = e2 * (u[0] + ch * hh[0] + cj * hh[0]);
        for i in 1..u.len() {
            out[i] = e2 * (u[i] + ch * hh[i] - cj * hh[i]);
        }
        out
    }

    /// Dense `W^{-2}` for small cones.
    pub fn winv2_dense(&self) -> Vec<Vec<f64>> {
        let k = self.hh.len();
        let mut out = vec![vec![0.0; k]; k];
        let mut e = vec![0.0; k];
        for j in 0..k {
            e[j] = 1.0;
            let col = self.apply_winv2(&e);
            for i in 0..k {
                out[i][j] = col[i];
            }
            e[j] = 0.0;
        }
        out
    }
}

/// Largest step `t >= 0` with `u + t du` still inside the cone; `f64::MAX`
/// when the ray never leaves it.
pub fn max_step(u: &[f64], du: &[f64]) -> f64 {
    let c = jnorm2(u);
    if c <= 0.0 || u[0] <= 0.0 {
        return 0.0;
    }
    let dt: f64 = du[1..].iter().map(|x| x * x).sum();
    let a = du[0] * du[0] - dt;
    let b = 2.0 * (u[0] * du[0] - dot(&u[1..], &du[1..]));

    let head = if du[0] < 0.0 { -u[0] / du[0] } else { f64::MAX };

    let quad = if a.abs() < 1e-300 {
        if b < 0.0 {
            -c / b
        } else {
            f64::MAX
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            // No real crossing; cone membership persists on this branch.
            f64::MAX
        } else {
            let sq = disc.sqrt();
            let (r1, r2) = if a > 0.0 {
                ((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a))
            } else {
                ((-b + sq) / (2.0 * a), (-b - sq) / (2.0 * a))
            };
            let mut best = f64::MAX;
            for r in [r1, r2] {
                if r > 0.0 && r < best {
                    best = r;
                }
            }
            best
        }
    };
    head.min(quad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsolve_inverts_jprod() {
        let lambda = [2.0, 0.3, -0.5, 0.1];
        let w = [1.1, -0.2, 0.4, 0.9];
        let mut prod = [0.0; 4];
        jprod(&lambda, &w, &mut prod);
        let mut back = [0.0; 4];
        jsolve(&lambda, &prod, &mut back);
        for (a, b) in back.iter().zip(w) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn scaling_maps_both_points_to_lambda() {
        let s = [3.0, 1.0, -0.5];
        let z = [2.0, -0.7, 0.3];
        let sc = Scaling::compute(&s, &z).unwrap();
        let ws_z = sc.apply_w(&z);
        let winv_s = sc.apply_winv(&s);
        for i in 0..3 {
            assert!((ws_z[i] - winv_s[i]).abs() < 1e-12, "lambda mismatch at {i}");
            assert!((ws_z[i] - sc.lambda[i]).abs() < 1e-12);
        }
        // W^{-1} W = I
        let u = [0.4, 1.3, -2.0];
        let round = sc.apply_winv(&sc.apply_w(&u));
        for i in 0..3 {
            assert!((round[i] - u[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn max_step_hits_boundary() {
        let u = [1.0, 0.0, 0.0];
        let du = [0.0, 1.0, 0.0];
        let t = max_step(&u, &du);
        // boundary at |t| = 1
        assert!((t - 1.0).abs() < 1e-12);

        let du_in = [1.0, 0.0, 0.0];
        assert_eq!(max_step(&u, &du_in), f64::MAX);

        let du_down = [-1.0, 0.0, 0.0];
        let t = max_step(&u, &du_down);
        assert!((t - 1.0).abs() < 1e-12);
    }
}
