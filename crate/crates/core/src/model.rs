//! Array model: directions, polarization, dipole geometry and steering.
//!
//! All lengths are in wavelength units (lambda = 1) and all angles cross the
//! API boundary in degrees. A linear array lies along the y-axis; every grid
//! location can host one dipole parallel to the x, y or z axis.
//!
//! Weight convention: the weight stored in a [`DipolePlacement`] enters the
//! array response conjugated, i.e. `response = sum_k s_k * conj(w_k)`. Every
//! module in this crate uses the same convention.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DesignError, Result};

/// Sign convention for the y-component of the polarization vector.
///
/// `AsPrinted` keeps the minus sign on the `cos(gamma)*cos(phi)` term;
/// `Textbook` flips it to a plus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolarizationConvention {
    #[default]
    AsPrinted,
    Textbook,
}

/// Dipole orientation axis. Ordering X < Y < Z is fixed and used for indexing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    X,
    Y,
    Z,
}

impl Orientation {
    pub const ALL: [Orientation; 3] = [Orientation::X, Orientation::Y, Orientation::Z];

    pub fn index(self) -> usize {
        match self {
            Orientation::X => 0,
            Orientation::Y => 1,
            Orientation::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Orientation {
        Self::ALL[i]
    }

    pub fn label(self) -> &'static str {
        match self {
            Orientation::X => "x",
            Orientation::Y => "y",
            Orientation::Z => "z",
        }
    }
}

/// A direction/polarization 4-tuple at which responses are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceState {
    /// Elevation angle in degrees, `[0, 90]`.
    pub theta_deg: f64,
    /// Azimuth angle in degrees; the linear-array convention uses +-90.
    pub phi_deg: f64,
    /// Auxiliary polarization angle in degrees, `[0, 90]`.
    pub gamma_deg: f64,
    /// Polarization phase difference in degrees, `[-180, 180)`.
    pub eta_deg: f64,
}

impl SourceState {
    pub fn new(theta_deg: f64, phi_deg: f64, gamma_deg: f64, eta_deg: f64) -> Self {
        Self { theta_deg, phi_deg, gamma_deg, eta_deg }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=90.0).contains(&self.theta_deg) {
            return Err(DesignError::InvalidScenario(format!(
                "theta {} outside [0, 90]",
                self.theta_deg
            )));
        }
        if !(0.0..=90.0).contains(&self.gamma_deg) {
            return Err(DesignError::InvalidScenario(format!(
                "gamma {} outside [0, 90]",
                self.gamma_deg
            )));
        }
        if !(-180.0..180.0).contains(&self.eta_deg) {
            return Err(DesignError::InvalidScenario(format!(
                "eta {} outside [-180, 180)",
                self.eta_deg
            )));
        }
        Ok(())
    }
}

/// Uniformly spaced candidate dipole locations along the y-axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingGrid {
    /// Position of the first grid point, wavelengths.
    pub origin: f64,
    /// Adjacent separation, wavelengths, > 0.
    pub spacing: f64,
    /// Number of grid points.
    pub count: usize,
}

impl SamplingGrid {
    pub fn new(origin: f64, spacing: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(DesignError::InvalidScenario("grid count must be positive".into()));
        }
        if count > 1 && spacing <= 0.0 {
            return Err(DesignError::InvalidScenario(format!(
                "grid spacing {} must be positive",
                spacing
            )));
        }
        Ok(Self { origin, spacing, count })
    }

    /// Grid spanning `[start, end]` with `count` points (inclusive endpoints).
    pub fn over_span(start: f64, end: f64, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(DesignError::InvalidScenario(
                "span grid needs at least two points".into(),
            ));
        }
        if end <= start {
            return Err(DesignError::InvalidScenario(format!(
                "empty span [{start}, {end}]"
            )));
        }
        Self::new(start, (end - start) / (count - 1) as f64, count)
    }

    pub fn position(&self, m: usize) -> f64 {
        self.origin + m as f64 * self.spacing
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(move |m| self.position(m))
    }

    /// Distance between the outermost grid points.
    pub fn aperture(&self) -> f64 {
        (self.count - 1) as f64 * self.spacing
    }
}

/// A committed dipole: position, orientation axis and complex weight.
///
/// Within one array positions are strictly increasing and unique: a spatially
/// stretched tripole array hosts one dipole per location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipolePlacement {
    /// Position along the y-axis, wavelengths.
    pub position: f64,
    pub orientation: Orientation,
    /// Stored weight; applied conjugated in the response.
    pub weight: Complex64,
}

fn deg(x: f64) -> f64 {
    x.to_radians()
}

/// Spatial phase factor of a single location for the given source.
pub fn spatial_phase(position: f64, src: &SourceState) -> Complex64 {
    let arg = -2.0 * std::f64::consts::PI * position * deg(src.theta_deg).sin()
        * deg(src.phi_deg).sin();
    Complex64::from_polar(1.0, arg)
}

/// Spatial steering vector of the grid: element m is
/// `exp(-j 2 pi (origin + m d) sin(theta) sin(phi))`.
pub fn spatial_steering(grid: &SamplingGrid, src: &SourceState) -> Vec<Complex64> {
    grid.positions().map(|p| spatial_phase(p, src)).collect()
}

/// Spatial-polarization coherent vector `(s_px, s_py, s_pz)`.
pub fn polarization_vector(
    src: &SourceState,
    convention: PolarizationConvention,
) -> [Complex64; 3] {
    let (theta, phi, gamma, eta) =
        (deg(src.theta_deg), deg(src.phi_deg), deg(src.gamma_deg), deg(src.eta_deg));
    let e = Complex64::from_polar(1.0, eta);
    let y_sign = match convention {
        PolarizationConvention::AsPrinted => -1.0,
        PolarizationConvention::Textbook => 1.0,
    };
    [
        gamma.sin() * theta.cos() * phi.cos() * e - gamma.cos() * phi.sin(),
        gamma.sin() * theta.cos() * phi.sin() * e + y_sign * gamma.cos() * phi.cos(),
        -gamma.sin() * theta.sin() * e,
    ]
}

/// Steering component of one dipole (position + orientation) for a source.
pub fn steering_component(
    position: f64,
    orientation: Orientation,
    src: &SourceState,
    convention: PolarizationConvention,
) -> Complex64 {
    polarization_vector(src, convention)[orientation.index()] * spatial_phase(position, src)
}

/// Full steering vector of the grid, interleaved per location as
/// `[s_x1, s_y1, s_z1, ..., s_xM, s_yM, s_zM]`.
pub fn full_steering(
    grid: &SamplingGrid,
    src: &SourceState,
    convention: PolarizationConvention,
) -> Vec<Complex64> {
    let pol = polarization_vector(src, convention);
    let mut out = Vec::with_capacity(3 * grid.count);
    for p in grid.positions() {
        let phase = spatial_phase(p, src);
        for s in pol {
            out.push(s * phase);
        }
    }
    out
}

/// Array response `p = sum_k s_k conj(w_k)` over the placements.
pub fn response(
    placements: &[DipolePlacement],
    src: &SourceState,
    convention: PolarizationConvention,
) -> Complex64 {
    let pol = polarization_vector(src, convention);
    placements
        .iter()
        .map(|d| pol[d.orientation.index()] * spatial_phase(d.position, src) * d.weight.conj())
        .sum()
}

/// Checks the one-dipole-per-location property with strictly increasing
/// positions.
pub fn validate_placements(placements: &[DipolePlacement]) -> Result<()> {
    for pair in placements.windows(2) {
        if pair[1].position <= pair[0].position {
            return Err(DesignError::InvalidScenario(format!(
                "placements not strictly increasing: {} then {}",
                pair[0].position, pair[1].position
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const CONV: PolarizationConvention = PolarizationConvention::AsPrinted;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn spatial_steering_broadside_is_all_ones() {
        let grid = SamplingGrid::new(0.0, 0.5, 4).unwrap();
        let src = SourceState::new(0.0, 37.0, 45.0, 100.0);
        for v in spatial_steering(&grid, &src) {
            assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn spatial_steering_single_element() {
        let grid = SamplingGrid::new(0.0, 0.5, 1).unwrap();
        let src = SourceState::new(63.0, 90.0, 10.0, 0.0);
        let s = spatial_steering(&grid, &src);
        assert_eq!(s.len(), 1);
        assert_abs_diff_eq!(s[0].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn spatial_steering_half_wavelength_endfire() {
        // d = 0.5, theta = phi = 90 deg: exponent -j pi, so [1, -1].
        let grid = SamplingGrid::new(0.0, 0.5, 2).unwrap();
        let src = SourceState::new(90.0, 90.0, 45.0, 0.0);
        let s = spatial_steering(&grid, &src);
        assert_abs_diff_eq!(s[0].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1].re, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1].im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn polarization_vector_gamma_zero() {
        let src = SourceState::new(27.0, 90.0, 0.0, 55.0);
        let p = polarization_vector(&src, CONV);
        assert_abs_diff_eq!((p[0] - c(-1.0, 0.0)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1].norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[2].norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn polarization_vector_gamma_ninety_endfire() {
        let src = SourceState::new(90.0, 90.0, 90.0, 0.0);
        let p = polarization_vector(&src, CONV);
        assert_abs_diff_eq!(p[0].norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1].norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((p[2] - c(-1.0, 0.0)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn polarization_vector_forty_five() {
        let src = SourceState::new(0.0, 0.0, 45.0, 0.0);
        let p = polarization_vector(&src, CONV);
        let r = 0.5f64.sqrt();
        assert_abs_diff_eq!((p[0] - c(r, 0.0)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((p[1] - c(-r, 0.0)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[2].norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn textbook_convention_flips_y_term() {
        let src = SourceState::new(0.0, 0.0, 45.0, 0.0);
        let p = polarization_vector(&src, PolarizationConvention::Textbook);
        let r = 0.5f64.sqrt();
        assert_abs_diff_eq!((p[1] - c(r, 0.0)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn full_steering_broadside_two_elements() {
        let grid = SamplingGrid::new(0.0, 0.5, 2).unwrap();
        let src = SourceState::new(0.0, 90.0, 0.0, 0.0);
        let s = full_steering(&grid, &src, CONV);
        let expect = [-1.0, 0.0, 0.0, -1.0, 0.0, 0.0];
        for (v, e) in s.iter().zip(expect) {
            assert_abs_diff_eq!(v.re, e, epsilon = 1e-15);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn full_steering_single_location_equals_polarization() {
        let grid = SamplingGrid::new(0.0, 0.5, 1).unwrap();
        let src = SourceState::new(33.0, -90.0, 61.0, -45.0);
        let s = full_steering(&grid, &src, CONV);
        let p = polarization_vector(&src, CONV);
        for (a, b) in s.iter().zip(p) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-15);
        }
    }

    // Independent oracle: evaluate Eqs. (1)-(3) per orientation without
    // interleaving, then reshuffle.
    fn full_steering_oracle(grid: &SamplingGrid, src: &SourceState) -> Vec<Complex64> {
        let pol = polarization_vector(src, CONV);
        let spatial = spatial_steering(grid, src);
        let per_orientation: Vec<Vec<Complex64>> = (0..3)
            .map(|f| spatial.iter().map(|s| pol[f] * s).collect())
            .collect();
        let mut out = Vec::new();
        for m in 0..grid.count {
            for f in 0..3 {
                out.push(per_orientation[f][m]);
            }
        }
        out
    }

    #[test]
    fn full_steering_matches_unshuffled_oracle() {
        let grid = SamplingGrid::new(0.3, 0.21, 3).unwrap();
        let src = SourceState::new(41.5, 90.0, 23.0, 77.0);
        let got = full_steering(&grid, &src, CONV);
        let want = full_steering_oracle(&grid, &src);
        for (a, b) in got.iter().zip(want) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn response_empty_is_zero() {
        let src = SourceState::new(10.0, 90.0, 45.0, 100.0);
        assert_eq!(response(&[], &src, CONV), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn response_single_dipole_unit_weight() {
        let src = SourceState::new(48.0, 90.0, 30.0, -20.0);
        let d = DipolePlacement {
            position: 1.7,
            orientation: Orientation::Y,
            weight: Complex64::new(1.0, 0.0),
        };
        let got = response(&[d], &src, CONV);
        let want = steering_component(1.7, Orientation::Y, &src, CONV);
        assert_abs_diff_eq!((got - want).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn response_matches_bruteforce_sum() {
        // Fixed pseudo-random placements; oracle is the direct term-by-term sum.
        let placements = [
            (0.13, Orientation::X, 0.4, -1.1),
            (0.92, Orientation::Z, -0.3, 0.7),
            (1.55, Orientation::Y, 2.0, 0.1),
            (2.31, Orientation::X, -0.8, -0.5),
            (3.02, Orientation::Z, 0.05, 1.9),
        ]
        .map(|(p, o, re, im)| DipolePlacement { position: p, orientation: o, weight: c(re, im) });
        let src = SourceState::new(37.0, -90.0, 52.0, 141.0);

        let mut oracle = Complex64::new(0.0, 0.0);
        for d in &placements {
            let s = polarization_vector(&src, CONV)[d.orientation.index()]
                * spatial_phase(d.position, &src);
            oracle += s * d.weight.conj();
        }
        let got = response(&placements, &src, CONV);
        assert_abs_diff_eq!((got - oracle).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn steering_is_unit_modulus() {
        let grid = SamplingGrid::new(0.0, 0.07, 11).unwrap();
        for &(theta, phi) in &[(0.0, 90.0), (45.0, -90.0), (90.0, 90.0), (13.7, 90.0)] {
            let src = SourceState::new(theta, phi, 45.0, 100.0);
            for v in spatial_steering(&grid, &src) {
                assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn translation_leaves_response_magnitude_invariant() {
        let src = SourceState::new(62.0, 90.0, 21.0, -140.0);
        let base = [
            DipolePlacement { position: 0.2, orientation: Orientation::X, weight: c(1.0, -0.4) },
            DipolePlacement { position: 1.1, orientation: Orientation::Z, weight: c(-0.6, 0.9) },
        ];
        let shifted: Vec<DipolePlacement> = base
            .iter()
            .map(|d| DipolePlacement { position: d.position + 2.7, ..*d })
            .collect();
        let a = response(&base, &src, CONV).norm();
        let b = response(&shifted, &src, CONV).norm();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn grid_shift_scales_full_steering_by_common_phase() {
        let src = SourceState::new(58.0, 90.0, 45.0, 100.0);
        let g0 = SamplingGrid::new(0.0, 0.4, 3).unwrap();
        let g1 = SamplingGrid::new(1.3, 0.4, 3).unwrap();
        let s0 = full_steering(&g0, &src, CONV);
        let s1 = full_steering(&g1, &src, CONV);
        let factor = spatial_phase(1.3, &src);
        for (a, b) in s0.iter().zip(&s1) {
            assert_abs_diff_eq!((a * factor - b).norm(), 0.0, epsilon = 1e-13);
        }
    }
}
