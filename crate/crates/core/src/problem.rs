//! Design scenario sampling and the real-valued lifted problem data.
//!
//! A scenario names one mainlobe direction and a set of sidelobe regions; the
//! sampled problem holds the ideal reference response (one at the mainlobe,
//! zero elsewhere) and the complex steering matrix over a uniform grid. The
//! lifted problem rewrites the complex group-sparse program over the reals:
//! each grid/orientation group owns the triple `(q_m, R(w_m), -I(w_m))` and
//! `S_hat * w_hat` stacks the real and imaginary parts of the achieved
//! response `S conj(w)` (stored weights are applied conjugated throughout).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DesignError, Result};
use crate::model::{full_steering, PolarizationConvention, SamplingGrid, SourceState};

/// A contiguous sidelobe region on one phi branch, sampled every `step_deg`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularRegion {
    pub phi_deg: f64,
    pub theta_start_deg: f64,
    pub theta_end_deg: f64,
    pub step_deg: f64,
}

impl AngularRegion {
    pub fn validate(&self) -> Result<()> {
        if self.step_deg <= 0.0 {
            return Err(DesignError::InvalidScenario(format!(
                "region step {} must be positive",
                self.step_deg
            )));
        }
        if self.theta_start_deg > self.theta_end_deg {
            return Err(DesignError::InvalidScenario(format!(
                "region start {} exceeds end {}",
                self.theta_start_deg, self.theta_end_deg
            )));
        }
        if self.theta_start_deg < 0.0 || self.theta_end_deg > 90.0 {
            return Err(DesignError::InvalidScenario(
                "region must lie within [0, 90] degrees".into(),
            ));
        }
        Ok(())
    }

    /// Sampled theta values, `start, start+step, ...` up to `end` inclusive.
    pub fn thetas(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0usize;
        loop {
            let theta = self.theta_start_deg + k as f64 * self.step_deg;
            if theta > self.theta_end_deg + 1e-9 {
                break;
            }
            out.push(theta.min(90.0));
            k += 1;
        }
        out
    }

    pub fn contains(&self, theta_deg: f64, phi_deg: f64) -> bool {
        (self.phi_deg - phi_deg).abs() < 1e-9
            && theta_deg >= self.theta_start_deg - 1e-9
            && theta_deg <= self.theta_end_deg + 1e-9
    }
}

/// Full description of one design task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignScenario {
    pub mainlobe_theta_deg: f64,
    pub mainlobe_phi_deg: f64,
    pub sidelobe_regions: Vec<AngularRegion>,
    /// Shared auxiliary polarization angle, degrees.
    pub gamma_deg: f64,
    /// Shared polarization phase difference, degrees.
    pub eta_deg: f64,
    /// Maximum aperture, wavelengths.
    pub aperture: f64,
    /// Number of grid points per sampling pass.
    pub grid_count: usize,
    /// Allowed l2 difference between reference and achieved responses.
    pub alpha: f64,
    /// Size constraint d_a: minimum adjacent dipole separation, wavelengths.
    pub min_separation: f64,
    #[serde(default)]
    pub convention: PolarizationConvention,
}

impl DesignScenario {
    pub fn mainlobe(&self) -> SourceState {
        SourceState::new(
            self.mainlobe_theta_deg,
            self.mainlobe_phi_deg,
            self.gamma_deg,
            self.eta_deg,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.mainlobe().validate()?;
        if self.sidelobe_regions.is_empty() {
            return Err(DesignError::InvalidScenario(
                "at least one sidelobe region is required".into(),
            ));
        }
        for r in &self.sidelobe_regions {
            r.validate()?;
            if r.contains(self.mainlobe_theta_deg, self.mainlobe_phi_deg) {
                return Err(DesignError::InvalidScenario(format!(
                    "mainlobe theta {} lies inside sidelobe region [{}, {}] at phi {}",
                    self.mainlobe_theta_deg, r.theta_start_deg, r.theta_end_deg, r.phi_deg
                )));
            }
        }
        if self.aperture <= 0.0 {
            return Err(DesignError::InvalidScenario("aperture must be positive".into()));
        }
        if self.grid_count < 2 {
            return Err(DesignError::InvalidScenario("grid count must be at least 2".into()));
        }
        // The ideal reference has unit norm, so alpha above it is never useful.
        if self.alpha < 0.0 || self.alpha > 1.0 {
            return Err(DesignError::InvalidScenario(format!(
                "alpha {} outside [0, ||p_r|| = 1]",
                self.alpha
            )));
        }
        if self.min_separation <= 0.0 {
            return Err(DesignError::InvalidScenario(
                "minimum separation must be positive".into(),
            ));
        }
        Ok(())
    }

    /// The initial full-aperture sampling grid.
    pub fn initial_grid(&self) -> SamplingGrid {
        SamplingGrid::over_span(0.0, self.aperture, self.grid_count)
            .expect("validated scenario produces a valid grid")
    }
}

/// Sampled reference, sources and steering matrix for one grid.
#[derive(Debug, Clone)]
pub struct SampledProblem {
    /// Mainlobe first, then every sidelobe sample.
    pub sources: Vec<SourceState>,
    /// Ideal reference response: 1 at the mainlobe sample, 0 elsewhere.
    pub reference: DVector<Complex64>,
    /// L x 3M steering matrix; row l is the full steering vector at source l.
    pub steering: DMatrix<Complex64>,
    pub grid: SamplingGrid,
    pub convention: PolarizationConvention,
}

impl SampledProblem {
    pub fn num_samples(&self) -> usize {
        self.sources.len()
    }

    pub fn num_groups(&self) -> usize {
        self.steering.ncols()
    }

    /// Rebuilds the steering matrix and reference for a different grid,
    /// keeping the same sources (used by the iterative placement search).
    pub fn with_grid(&self, grid: SamplingGrid, reference: DVector<Complex64>) -> SampledProblem {
        SampledProblem {
            sources: self.sources.clone(),
            reference,
            steering: steering_matrix(&self.sources, &grid, self.convention),
            grid,
            convention: self.convention,
        }
    }
}

fn sample_key(theta: f64, phi: f64) -> (i64, i64) {
    ((theta * 1e9).round() as i64, (phi * 1e9).round() as i64)
}

/// Enumerates the mainlobe sample followed by every sidelobe sample.
///
/// Overlapping regions would duplicate samples; duplicates are dropped with a
/// warning since the reference regions are expected to be disjoint.
pub fn sample_scenario(scenario: &DesignScenario) -> Result<SampledProblem> {
    scenario.validate()?;

    let mut sources = vec![scenario.mainlobe()];
    let mut seen = std::collections::BTreeSet::new();
    seen.insert(sample_key(scenario.mainlobe_theta_deg, scenario.mainlobe_phi_deg));
    for region in &scenario.sidelobe_regions {
        for theta in region.thetas() {
            if !seen.insert(sample_key(theta, region.phi_deg)) {
                log::warn!(
                    "dropping duplicate sample theta={theta} phi={} from overlapping regions",
                    region.phi_deg
                );
                continue;
            }
            sources.push(SourceState::new(
                theta,
                region.phi_deg,
                scenario.gamma_deg,
                scenario.eta_deg,
            ));
        }
    }

    let mut reference = DVector::from_element(sources.len(), Complex64::new(0.0, 0.0));
    reference[0] = Complex64::new(1.0, 0.0);
    let grid = scenario.initial_grid();
    let steering = steering_matrix(&sources, &grid, scenario.convention);
    Ok(SampledProblem { sources, reference, steering, grid, convention: scenario.convention })
}

fn steering_row(
    src: &SourceState,
    grid: &SamplingGrid,
    convention: PolarizationConvention,
) -> Vec<Complex64> {
    full_steering(grid, src, convention)
}

/// Builds the L x 3M steering matrix for the given sources and grid.
pub fn steering_matrix(
    sources: &[SourceState],
    grid: &SamplingGrid,
    convention: PolarizationConvention,
) -> DMatrix<Complex64> {
    #[cfg(feature = "parallel")]
    {
        steering_matrix_par(sources, grid, convention)
    }
    #[cfg(not(feature = "parallel"))]
    {
        steering_matrix_seq(sources, grid, convention)
    }
}

/// Sequential steering-matrix construction.
pub fn steering_matrix_seq(
    sources: &[SourceState],
    grid: &SamplingGrid,
    convention: PolarizationConvention,
) -> DMatrix<Complex64> {
    let rows: Vec<Vec<Complex64>> =
        sources.iter().map(|s| steering_row(s, grid, convention)).collect();
    rows_to_matrix(sources.len(), 3 * grid.count, rows)
}

/// Row-parallel steering-matrix construction; bit-identical to the
/// sequential path because each row is computed independently.
#[cfg(feature = "parallel")]
pub fn steering_matrix_par(
    sources: &[SourceState],
    grid: &SamplingGrid,
    convention: PolarizationConvention,
) -> DMatrix<Complex64> {
    use rayon::prelude::*;
    let rows: Vec<Vec<Complex64>> =
        sources.par_iter().map(|s| steering_row(s, grid, convention)).collect();
    rows_to_matrix(sources.len(), 3 * grid.count, rows)
}

fn rows_to_matrix(nrows: usize, ncols: usize, rows: Vec<Vec<Complex64>>) -> DMatrix<Complex64> {
    let mut out = DMatrix::from_element(nrows, ncols, Complex64::new(0.0, 0.0));
    for (l, row) in rows.into_iter().enumerate() {
        for (c, v) in row.into_iter().enumerate() {
            out[(l, c)] = v;
        }
    }
    out
}

/// Achieved response for stored weights: `S * conj(w)`.
pub fn achieved_response(
    steering: &DMatrix<Complex64>,
    stored: &DVector<Complex64>,
) -> DVector<Complex64> {
    steering * stored.map(|w| w.conj())
}

/// Real-valued lifted data for the group-sparse second-order cone program.
#[derive(Debug, Clone)]
pub struct LiftedProblem {
    /// Objective vector, length 9M: `[d_1, 0, 0, d_2, 0, 0, ...]`.
    pub c_hat: DVector<f64>,
    /// 2L x 9M real matrix; q-columns are zero, each group carries the
    /// 2x2 real/imaginary block of its steering column.
    pub s_hat: DMatrix<f64>,
    /// `[R(p_r); I(p_r)]`.
    pub p_r_hat: DVector<f64>,
    pub alpha: f64,
    /// Column triples `(q_m, R(w_m), -I(w_m))` per group.
    pub groups: Vec<[usize; 3]>,
    pub grid: SamplingGrid,
}

impl LiftedProblem {
    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_vars(&self) -> usize {
        self.c_hat.len()
    }

    /// Replaces the group reweights in the objective.
    pub fn set_reweights(&mut self, delta: &[f64]) -> Result<()> {
        if delta.len() != self.groups.len() {
            return Err(DesignError::DimensionMismatch(format!(
                "{} reweights for {} groups",
                delta.len(),
                self.groups.len()
            )));
        }
        for (g, &d) in self.groups.iter().zip(delta) {
            if d <= 0.0 {
                return Err(DesignError::InvalidScenario(
                    "reweights must be strictly positive".into(),
                ));
            }
            self.c_hat[g[0]] = d;
        }
        Ok(())
    }

    /// Lifts stored complex weights into `w_hat` with `q_m = |w_m|`.
    pub fn lift_weights(&self, stored: &[Complex64]) -> Result<DVector<f64>> {
        if stored.len() != self.groups.len() {
            return Err(DesignError::DimensionMismatch(format!(
                "{} weights for {} groups",
                stored.len(),
                self.groups.len()
            )));
        }
        let mut w_hat = DVector::zeros(self.num_vars());
        for (g, w) in self.groups.iter().zip(stored) {
            w_hat[g[0]] = w.norm();
            w_hat[g[1]] = w.re;
            w_hat[g[2]] = -w.im;
        }
        Ok(w_hat)
    }

    /// Recovers stored complex weights from a lifted vector.
    pub fn reconstruct_complex(&self, w_hat: &DVector<f64>) -> Vec<Complex64> {
        self.groups
            .iter()
            .map(|g| Complex64::new(w_hat[g[1]], -w_hat[g[2]]))
            .collect()
    }

    /// `||w_m||_2` per group of a lifted vector.
    pub fn group_norms(&self, w_hat: &DVector<f64>) -> Vec<f64> {
        self.groups
            .iter()
            .map(|g| (w_hat[g[1]].powi(2) + w_hat[g[2]].powi(2)).sqrt())
            .collect()
    }

    pub fn residual_norm(&self, w_hat: &DVector<f64>) -> f64 {
        (&self.p_r_hat - &self.s_hat * w_hat).norm()
    }
}

/// Builds the lifted problem. `delta` supplies group reweights; absent means
/// unit weights.
pub fn lift(
    problem: &SampledProblem,
    alpha: f64,
    delta: Option<&[f64]>,
) -> Result<LiftedProblem> {
    let l = problem.num_samples();
    let n_groups = problem.num_groups();
    if let Some(d) = delta {
        if d.len() != n_groups {
            return Err(DesignError::DimensionMismatch(format!(
                "{} reweights for {} groups",
                d.len(),
                n_groups
            )));
        }
        if d.iter().any(|&x| x <= 0.0) {
            return Err(DesignError::InvalidScenario(
                "reweights must be strictly positive".into(),
            ));
        }
    }
    if alpha < 0.0 {
        return Err(DesignError::InvalidScenario("alpha must be non-negative".into()));
    }

    let mut c_hat = DVector::zeros(9 * n_groups / 3);
    let mut s_hat = DMatrix::zeros(2 * l, 3 * n_groups);
    let mut groups = Vec::with_capacity(n_groups);
    for m in 0..n_groups {
        let cols = [3 * m, 3 * m + 1, 3 * m + 2];
        c_hat[cols[0]] = delta.map_or(1.0, |d| d[m]);
        for row in 0..l {
            let s = problem.steering[(row, m)];
            // q-column stays zero; the pair encodes S * conj(w).
            s_hat[(row, cols[1])] = s.re;
            s_hat[(l + row, cols[1])] = s.im;
            s_hat[(row, cols[2])] = -s.im;
            s_hat[(l + row, cols[2])] = s.re;
        }
        groups.push(cols);
    }

    let mut p_r_hat = DVector::zeros(2 * l);
    for row in 0..l {
        p_r_hat[row] = problem.reference[row].re;
        p_r_hat[l + row] = problem.reference[row].im;
    }

    Ok(LiftedProblem { c_hat, s_hat, p_r_hat, alpha, groups, grid: problem.grid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Orientation;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn broadside() -> DesignScenario {
        DesignScenario {
            mainlobe_theta_deg: 0.0,
            mainlobe_phi_deg: 90.0,
            sidelobe_regions: vec![
                AngularRegion {
                    phi_deg: 90.0,
                    theta_start_deg: 10.0,
                    theta_end_deg: 90.0,
                    step_deg: 1.0,
                },
                AngularRegion {
                    phi_deg: -90.0,
                    theta_start_deg: 10.0,
                    theta_end_deg: 90.0,
                    step_deg: 1.0,
                },
            ],
            gamma_deg: 45.0,
            eta_deg: 100.0,
            aperture: 10.0,
            grid_count: 21,
            alpha: 0.5,
            min_separation: 0.8,
            convention: PolarizationConvention::AsPrinted,
        }
    }

    #[test]
    fn broadside_sample_count() {
        let p = sample_scenario(&broadside()).unwrap();
        assert_eq!(p.num_samples(), 1 + 81 + 81);
        assert_eq!(p.reference[0], Complex64::new(1.0, 0.0));
        assert_eq!(p.reference.iter().filter(|v| v.norm() > 0.0).count(), 1);
    }

    #[test]
    fn degenerate_region_gives_one_sample() {
        let mut scn = broadside();
        scn.sidelobe_regions = vec![AngularRegion {
            phi_deg: -90.0,
            theta_start_deg: 0.0,
            theta_end_deg: 0.0,
            step_deg: 1.0,
        }];
        let p = sample_scenario(&scn).unwrap();
        assert_eq!(p.num_samples(), 2);
    }

    #[test]
    fn off_broadside_example_one_count() {
        let scn = DesignScenario {
            mainlobe_theta_deg: 60.0,
            mainlobe_phi_deg: 90.0,
            sidelobe_regions: vec![
                AngularRegion {
                    phi_deg: 90.0,
                    theta_start_deg: 0.0,
                    theta_end_deg: 50.0,
                    step_deg: 1.0,
                },
                AngularRegion {
                    phi_deg: 90.0,
                    theta_start_deg: 70.0,
                    theta_end_deg: 90.0,
                    step_deg: 1.0,
                },
                AngularRegion {
                    phi_deg: -90.0,
                    theta_start_deg: 0.0,
                    theta_end_deg: 90.0,
                    step_deg: 1.0,
                },
            ],
            gamma_deg: 55.0,
            eta_deg: 100.0,
            aperture: 10.0,
            grid_count: 21,
            alpha: 0.75,
            min_separation: 0.8,
            convention: PolarizationConvention::AsPrinted,
        };
        let p = sample_scenario(&scn).unwrap();
        assert_eq!(p.num_samples(), 1 + 51 + 21 + 91);
    }

    #[test]
    fn rejects_empty_regions_and_covered_mainlobe() {
        let mut scn = broadside();
        scn.sidelobe_regions.clear();
        assert!(sample_scenario(&scn).is_err());

        let mut scn = broadside();
        scn.sidelobe_regions[0].theta_start_deg = 0.0;
        assert!(sample_scenario(&scn).is_err());
    }

    #[test]
    fn steering_rows_match_full_steering() {
        let p = sample_scenario(&broadside()).unwrap();
        let row = 37;
        let want = full_steering(&p.grid, &p.sources[row], p.convention);
        for (c, w) in want.iter().enumerate() {
            assert_abs_diff_eq!((p.steering[(row, c)] - w).norm(), 0.0, epsilon = 1e-14);
        }
    }

    fn tiny_problem(m: usize, l: usize, seed: u64) -> SampledProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sources: Vec<SourceState> = (0..l)
            .map(|_| {
                SourceState::new(
                    rng.gen_range(0.0..90.0),
                    if rng.gen_bool(0.5) { 90.0 } else { -90.0 },
                    rng.gen_range(0.0..90.0),
                    rng.gen_range(-180.0..180.0),
                )
            })
            .collect();
        let grid = SamplingGrid::new(0.0, 0.5, m).unwrap();
        let steering = steering_matrix(&sources, &grid, PolarizationConvention::AsPrinted);
        let mut reference = DVector::from_element(l, Complex64::new(0.0, 0.0));
        reference[0] = Complex64::new(1.0, 0.0);
        SampledProblem {
            sources,
            reference,
            steering,
            grid,
            convention: PolarizationConvention::AsPrinted,
        }
    }

    #[test]
    fn lift_structure_single_location() {
        let p = tiny_problem(1, 1, 7);
        let lp = lift(&p, 0.3, None).unwrap();
        assert_eq!(lp.c_hat.as_slice(), &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(lp.s_hat.nrows(), 2);
        assert_eq!(lp.s_hat.ncols(), 9);
        for m in 0..3 {
            assert_eq!(lp.s_hat.column(3 * m).norm(), 0.0);
        }
    }

    #[test]
    fn lift_uniform_reweights() {
        let p = tiny_problem(2, 3, 8);
        let lp = lift(&p, 0.3, Some(&[2.0; 6])).unwrap();
        for g in &lp.groups {
            assert_eq!(lp.c_hat[g[0]], 2.0);
        }
    }

    #[test]
    fn lifted_product_matches_conjugated_complex_arithmetic() {
        let p = tiny_problem(3, 4, 9);
        let lp = lift(&p, 0.2, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let stored: Vec<Complex64> = (0..9)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let w_hat = lp.lift_weights(&stored).unwrap();
        let achieved = achieved_response(&p.steering, &DVector::from_vec(stored.clone()));
        let product = &lp.s_hat * &w_hat;
        let l = p.num_samples();
        for row in 0..l {
            assert_abs_diff_eq!(product[row], achieved[row].re, epsilon = 1e-12);
            assert_abs_diff_eq!(product[l + row], achieved[row].im, epsilon = 1e-12);
        }
    }

    #[test]
    fn lifting_preserves_residual_norm() {
        for seed in 0..20 {
            let p = tiny_problem(2, 5, 100 + seed);
            let lp = lift(&p, 0.2, None).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
            let stored: Vec<Complex64> = (0..6)
                .map(|_| Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
                .collect();
            let w_hat = lp.lift_weights(&stored).unwrap();
            let lifted = lp.residual_norm(&w_hat);
            let complex = (&p.reference
                - achieved_response(&p.steering, &DVector::from_vec(stored)))
            .norm();
            assert_abs_diff_eq!(lifted, complex, epsilon = 1e-12);
        }
    }

    #[test]
    fn reconstruct_round_trips_and_group_norms_match_magnitudes() {
        let p = tiny_problem(2, 3, 5);
        let lp = lift(&p, 0.2, None).unwrap();
        let stored: Vec<Complex64> = vec![
            Complex64::new(0.3, -0.7),
            Complex64::new(-1.2, 0.0),
            Complex64::new(0.0, 0.9),
            Complex64::new(0.0, 0.0),
            Complex64::new(2.0, 2.0),
            Complex64::new(-0.1, -0.1),
        ];
        let w_hat = lp.lift_weights(&stored).unwrap();
        let back = lp.reconstruct_complex(&w_hat);
        for (a, b) in stored.iter().zip(&back) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 0.0);
        }
        for (n, w) in lp.group_norms(&w_hat).iter().zip(&stored) {
            assert_abs_diff_eq!(*n, w.norm(), epsilon = 1e-15);
        }
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn steering_matrix_par_is_bit_identical_to_seq() {
        let p = tiny_problem(4, 9, 42);
        let seq = steering_matrix_seq(&p.sources, &p.grid, p.convention);
        let par = steering_matrix_par(&p.sources, &p.grid, p.convention);
        assert_eq!(seq, par);
    }

    #[test]
    fn grid_helpers() {
        let g = SamplingGrid::over_span(0.0, 10.0, 101).unwrap();
        assert_abs_diff_eq!(g.spacing, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(g.aperture(), 10.0, epsilon = 1e-12);
        let _ = Orientation::ALL;
    }
}
