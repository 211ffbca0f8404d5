//! Pairwise collective coefficients and the standing-wave drive.
//!
//! Separations enter only through the dimensionless `kr = ω r / c`. All rates
//! are in the units of `gamma` (the single-atom half decay rate), which is
//! carried explicitly so callers may work in physical units.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry of one atom pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairGeometry {
    /// Dimensionless separation `k r`.
    pub kr: f64,
    /// Angle between the common dipole direction and the separation vector, radians.
    pub xi: f64,
}

impl PairGeometry {
    pub fn new(kr: f64, xi: f64) -> Result<Self> {
        let g = Self { kr, xi };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kr > 0.0) || !self.kr.is_finite() {
            return Err(Error::NonPositiveSeparation(self.kr));
        }
        if !self.xi.is_finite() {
            return Err(Error::InvalidParameter(format!("xi must be finite, got {}", self.xi)));
        }
        Ok(())
    }

    fn cos2(&self) -> f64 {
        let c = self.xi.cos();
        c * c
    }
}

/// Physical configuration of a small ensemble in the standing wave.
///
/// `rabi`, `detuning` and `dipole_shift` are in the same units as `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleParams {
    pub n_atoms: u32,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub rabi: f64,
    pub detuning: f64,
    pub dipole_shift: f64,
    #[serde(default = "default_photons")]
    pub n_photons: u32,
}

fn default_gamma() -> f64 {
    1.0
}

fn default_photons() -> u32 {
    1
}

impl EnsembleParams {
    /// Parameters with `gamma = 1` and single-photon drive.
    pub fn new(n_atoms: u32, rabi: f64, detuning: f64, dipole_shift: f64) -> Self {
        Self {
            n_atoms,
            gamma: 1.0,
            rabi,
            detuning,
            dipole_shift,
            n_photons: 1,
        }
    }

    pub fn with_photons(mut self, n_photons: u32) -> Self {
        self.n_photons = n_photons;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(Error::InvalidParameter("n_atoms must be at least 1".into()));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.n_photons == 0 {
            return Err(Error::InvalidParameter("n_photons must be at least 1".into()));
        }
        if !(self.rabi >= 0.0) || !self.rabi.is_finite() {
            return Err(Error::InvalidParameter(format!("rabi must be finite and >= 0, got {}", self.rabi)));
        }
        if !self.detuning.is_finite() || !self.dipole_shift.is_finite() {
            return Err(Error::InvalidParameter("detuning and dipole_shift must be finite".into()));
        }
        Ok(())
    }

    /// Collective-shifted detuning `Δ + Ω_d`.
    pub fn shifted_detuning(&self) -> f64 {
        self.detuning + self.dipole_shift
    }

    /// Period of the intensity profile in `kx`, `π / n`.
    pub fn intensity_period(&self) -> f64 {
        PI / f64::from(self.n_photons)
    }

    /// Period of the drive field in `kx`, `2π / n`.
    pub fn field_period(&self) -> f64 {
        2.0 * PI / f64::from(self.n_photons)
    }

    /// First node of the drive, `π / (2n)`.
    pub fn first_node(&self) -> f64 {
        FRAC_PI_2 / f64::from(self.n_photons)
    }

    /// `N²`, the normalization used for plotted intensities.
    pub fn n_squared(&self) -> f64 {
        let n = f64::from(self.n_atoms);
        n * n
    }
}

/// `(x cos x − sin x) / x³`, stable through x → 0.
fn near_field_bracket(x: f64) -> f64 {
    if x < 0.5 {
        // Σ_{k≥1} (−1)^k 2k x^{2k−2} / (2k+1)!
        let x2 = x * x;
        let mut term = -1.0 / 3.0;
        let mut sum = term;
        for k in 2..12 {
            let k = k as f64;
            // ratio of consecutive terms
            term *= -x2 * k / ((k - 1.0) * (2.0 * k) * (2.0 * k + 1.0));
            sum += term;
        }
        sum
    } else {
        let (s, c) = x.sin_cos();
        c / (x * x) - s / (x * x * x)
    }
}

/// Collective cross-decay rate `χ` of a pair.
pub fn chi_pair(g: PairGeometry, gamma: f64) -> Result<f64> {
    g.validate()?;
    let x = g.kr;
    let c2 = g.cos2();
    let sinc = x.sin() / x;
    Ok(1.5 * gamma * ((1.0 - c2) * sinc + (1.0 - 3.0 * c2) * near_field_bracket(x)))
}

/// Coherent pair coupling `Ω_jl` (dipole-dipole shift including retardation terms).
pub fn omega_pair(g: PairGeometry, gamma: f64) -> Result<f64> {
    g.validate()?;
    let x = g.kr;
    let c2 = g.cos2();
    let (s, c) = x.sin_cos();
    Ok(0.75 * gamma * ((c2 - 1.0) * c / x + (1.0 - 3.0 * c2) * (s / (x * x) + c / (x * x * x))))
}

/// Second-order small-separation form of [`chi_pair`].
pub fn chi_pair_expanded(g: PairGeometry, gamma: f64) -> Result<f64> {
    g.validate()?;
    let x = g.kr;
    Ok(gamma * (1.0 - 0.2 * x * x * (1.0 - 0.5 * g.cos2())))
}

/// Small-separation Laurent form of [`omega_pair`].
pub fn omega_pair_expanded(g: PairGeometry, gamma: f64) -> Result<f64> {
    g.validate()?;
    let x = g.kr;
    let c2 = g.cos2();
    let far = (c2 - 1.0) * (2.0 / x - x);
    let near = (1.0 - 3.0 * c2) * (1.0 / x - x / 4.0 + 2.0 / (x * x * x));
    Ok(3.0 * gamma * (far + near) / 8.0)
}

/// Static dipole-dipole potential `3γ(1 − 3cos²ξ) / (4 (kr)³)`.
pub fn static_dd(g: PairGeometry, gamma: f64) -> Result<f64> {
    g.validate()?;
    let x = g.kr;
    Ok(3.0 * gamma * (1.0 - 3.0 * g.cos2()) / (4.0 * x * x * x))
}

/// Orientation-averaged dipole-dipole shift `−γ / (2 kr)`.
pub fn averaged_dd(kr: f64, gamma: f64) -> Result<f64> {
    if !(kr > 0.0) || !kr.is_finite() {
        return Err(Error::NonPositiveSeparation(kr));
    }
    Ok(-gamma / (2.0 * kr))
}

/// `cos(phase)`, returning exactly zero when `phase` is a node of the cosine
/// up to rounding of the phase itself.
pub(crate) fn standing_wave_cos(phase: f64) -> f64 {
    let r = phase.rem_euclid(PI);
    if (r - FRAC_PI_2).abs() <= 4.0 * f64::EPSILON * phase.abs().max(1.0) {
        0.0
    } else {
        phase.cos()
    }
}

/// Local Rabi frequency `Ω cos(n kx)` at standing-wave phase `kx`.
pub fn rabi_at(p: &EnsembleParams, kx: f64) -> f64 {
    p.rabi * standing_wave_cos(f64::from(p.n_photons) * kx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_3;

    fn geo(kr: f64, xi: f64) -> PairGeometry {
        PairGeometry::new(kr, xi).unwrap()
    }

    #[test]
    fn chi_tends_to_gamma() {
        for xi in [0.0, 0.4, 1.0, FRAC_PI_2, 3.0] {
            let chi = chi_pair(geo(1e-6, xi), 1.0).unwrap();
            assert!((chi - 1.0).abs() < 1e-6, "xi={xi}: {chi}");
        }
    }

    #[test]
    fn chi_direct_substitution() {
        // kr = 2π, ξ = π/2: cos²ξ ≈ 0, sin(2π) ≈ 0, cos(2π) = 1
        let x = 2.0 * PI;
        let c2 = FRAC_PI_2.cos().powi(2);
        let want = 1.5 * ((1.0 - c2) * x.sin() / x + (1.0 - 3.0 * c2) * (x.cos() / (x * x) - x.sin() / x.powi(3)));
        let got = chi_pair(geo(x, FRAC_PI_2), 1.0).unwrap();
        assert!((got - want).abs() < 1e-15);
        assert!((got - 1.5 / (x * x)).abs() < 1e-12);
    }

    #[test]
    fn omega_direct_substitution() {
        // kr = π/10, ξ = 0 → cos²ξ = 1, first bracket vanishes
        let x = PI / 10.0;
        let want = 0.75 * (-2.0) * (x.sin() / (x * x) + x.cos() / x.powi(3));
        let got = omega_pair(geo(x, 0.0), 1.0).unwrap();
        assert!((got - want).abs() < 1e-12 * want.abs());
    }

    #[test]
    fn bracket_series_joins_closed_form() {
        for x in [0.45, 0.5, 0.55] {
            let (s, c) = f64::sin_cos(x);
            let direct = c / (x * x) - s / (x * x * x);
            assert!((near_field_bracket(x) - direct).abs() < 1e-13);
        }
        let x: f64 = 0.499_999;
        let (s, c) = x.sin_cos();
        let direct = c / (x * x) - s / (x * x * x);
        assert!((near_field_bracket(x) - direct).abs() < 1e-13);
    }

    #[test]
    fn expansions_track_full_forms() {
        for kr in [0.01, 0.1, 1.0] {
            let g = geo(kr, FRAC_PI_3);
            let full = chi_pair(g, 1.0).unwrap();
            let exp = chi_pair_expanded(g, 1.0).unwrap();
            // next term of the series is (kr)^4 / 280 scale; 0.01 bounds it generously
            assert!((full - exp).abs() <= 0.01 * kr.powi(4), "kr={kr}: {full} vs {exp}");
        }
        let g = geo(0.05, FRAC_PI_3);
        let (wf, we) = (omega_pair(g, 1.0).unwrap(), omega_pair_expanded(g, 1.0).unwrap());
        assert!((wf - we).abs() < 1e-3 * wf.abs());
        let (cf, ce) = (chi_pair(g, 1.0).unwrap(), chi_pair_expanded(g, 1.0).unwrap());
        assert!((cf - ce).abs() < 1e-3 * cf.abs());
    }

    #[test]
    fn omega_tends_to_static_potential() {
        let g = geo(1e-3, 0.3);
        let full = omega_pair(g, 1.0).unwrap();
        let stat = static_dd(g, 1.0).unwrap();
        assert!((full - stat).abs() < 1e-5 * stat.abs());
    }

    #[test]
    fn magic_angle_leaves_long_range_term() {
        let xi = (1.0f64 / 3.0).sqrt().acos();
        for kr in [1e-3, 1e-2] {
            let g = geo(kr, xi);
            let w = omega_pair_expanded(g, 1.0).unwrap();
            let avg = averaged_dd(kr, 1.0).unwrap();
            // −γ/(2kr) + γ kr / 4
            assert!((w - (avg + kr / 4.0)).abs() < 1e-9 * avg.abs());
            assert!(static_dd(g, 1.0).unwrap().abs() < 1e-6);
        }
    }

    #[test]
    fn static_and_averaged_values() {
        assert!((static_dd(geo(1.0, FRAC_PI_2), 1.0).unwrap() - 0.75).abs() < 1e-15);
        assert!((averaged_dd(PI / 10.0, 1.0).unwrap() + 5.0 / PI).abs() < 1e-15);
        assert_eq!(averaged_dd(1.0, 1.0).unwrap(), -0.5);
        assert!(averaged_dd(123.0, 2.0).unwrap() < 0.0);
    }

    #[test]
    fn non_positive_separation_is_rejected() {
        for kr in [0.0, -1.0, f64::NAN] {
            let g = PairGeometry { kr, xi: 0.0 };
            assert!(matches!(chi_pair(g, 1.0), Err(Error::NonPositiveSeparation(_))));
            assert!(omega_pair(g, 1.0).is_err());
            assert!(chi_pair_expanded(g, 1.0).is_err());
            assert!(omega_pair_expanded(g, 1.0).is_err());
            assert!(static_dd(g, 1.0).is_err());
            assert!(averaged_dd(kr, 1.0).is_err());
        }
    }

    #[test]
    fn rabi_nodes_and_antinodes() {
        let p = EnsembleParams::new(3, 2.5, 0.0, 0.0);
        assert_eq!(rabi_at(&p, FRAC_PI_2), 0.0);
        assert_eq!(rabi_at(&p, 3.0 * FRAC_PI_2), 0.0);
        assert_eq!(rabi_at(&p, 0.0), 2.5);
        for n in 1..=4 {
            let q = p.with_photons(n);
            assert_eq!(rabi_at(&q, 0.0), 2.5);
            assert_eq!(rabi_at(&q, q.first_node()), 0.0);
            let kx = 0.123;
            assert_eq!(rabi_at(&q, kx), rabi_at(&p, f64::from(n) * kx));
        }
    }

    #[test]
    fn params_validation() {
        assert!(EnsembleParams::new(0, 1.0, 0.0, 0.0).validate().is_err());
        assert!(EnsembleParams::new(1, 1.0, 0.0, 0.0).with_gamma(0.0).validate().is_err());
        assert!(EnsembleParams::new(1, 1.0, 0.0, 0.0).with_photons(0).validate().is_err());
        assert!(EnsembleParams::new(1, -1.0, 0.0, 0.0).validate().is_err());
        assert!(EnsembleParams::new(1, 1.0, f64::NAN, 0.0).validate().is_err());
        assert!(EnsembleParams::new(4, 1.0, -3.0, 2.0).validate().is_ok());
    }
}
