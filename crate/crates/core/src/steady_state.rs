//! Analytic steady-state fluorescence of the driven symmetric ensemble.
//!
//! The steady state of the collective master equation is a polynomial in the
//! ladder operators,
//!
//! ```text
//! ρ ∝ Σ_{n,m} (−1)^{n+m} α^{−n} (α*)^{−m} a_nm (S⁻)^n (S⁺)^m,
//! a_nm = Γ(1+n+β) Γ(1+m+β*) / (n! m! Γ(1+β) Γ(1+β*)),
//! α = iΩ(x) / (γ + iΩ_d),   β = i(Δ + Ω_d) / (γ + iΩ_d).
//! ```
//!
//! Only the diagonal `n = m` terms survive the trace over the Dicke manifold,
//! where `Tr[(S⁻)^n (S⁺)^n] = (N+n+1)! (n!)² / ((N−n)! (2n+1)!)`. The
//! observable is `I = ⟨S⁺S⁻⟩`, a ratio of two positive series. At `N = 100`
//! the weights overflow `f64` near `n ≈ 60` and `|α|^{−2n}` diverges close to
//! a node, so both series are summed in log space behind a common shift.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::collective::{rabi_at, EnsembleParams};
use crate::error::{Error, Result};
use crate::special::{complex_ln_gamma, ln_factorial, max_log_magnitude, sum_shifted, LogTerm};

/// Drive coefficients at one position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveCoefficients {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub delta_tilde: f64,
}

pub fn drive_coeffs(p: &EnsembleParams, kx: f64) -> DriveCoefficients {
    let denom = Complex64::new(p.gamma, p.dipole_shift);
    let delta_tilde = p.shifted_detuning();
    DriveCoefficients {
        alpha: Complex64::new(0.0, rabi_at(p, kx)) / denom,
        beta: Complex64::new(0.0, delta_tilde) / denom,
        delta_tilde,
    }
}

/// `β`, which does not depend on position.
fn beta_of(p: &EnsembleParams) -> Complex64 {
    Complex64::new(0.0, p.shifted_detuning()) / Complex64::new(p.gamma, p.dipole_shift)
}

/// `ln a_nn = 2 Re[ln Γ(1+n+β) − ln Γ(1+β)] − 2 ln n!`.
pub fn log_diag_coeff(n: u32, beta: Complex64) -> Result<f64> {
    let top = complex_ln_gamma(beta + 1.0 + f64::from(n))?;
    let bottom = complex_ln_gamma(beta + 1.0)?;
    Ok(2.0 * (top.re - bottom.re) - 2.0 * ln_factorial(n))
}

/// `ln Tr[(S⁻)^n (S⁺)^n]` on the `N`-atom symmetric manifold.
pub fn log_weight(n_atoms: u32, n: u32) -> Result<f64> {
    if n > n_atoms {
        return Err(Error::IndexOutOfRange { index: n, max: n_atoms });
    }
    Ok(ln_factorial(n_atoms + n + 1) + 2.0 * ln_factorial(n) - ln_factorial(n_atoms - n) - ln_factorial(2 * n + 1))
}

/// Position-independent part of the series for one parameter set.
///
/// Build once per [`EnsembleParams`] and evaluate at many positions; each
/// evaluation is `O(N)`.
#[derive(Debug, Clone)]
pub struct SteadyStateSeries {
    params: EnsembleParams,
    /// `ln a_nn`, n = 0..=N
    log_a: Vec<f64>,
    /// `ln w_n`, n = 0..=N
    log_w: Vec<f64>,
    /// `ln |γ + iΩ_d|`
    log_denom: f64,
}

impl SteadyStateSeries {
    pub fn new(p: &EnsembleParams) -> Result<Self> {
        p.validate()?;
        let beta = beta_of(p);
        let n_atoms = p.n_atoms;
        let log_a = (0..=n_atoms).map(|n| log_diag_coeff(n, beta)).collect::<Result<Vec<_>>>()?;
        let log_w = (0..=n_atoms).map(|n| log_weight(n_atoms, n)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params: *p,
            log_a,
            log_w,
            log_denom: Complex64::new(p.gamma, p.dipole_shift).norm().ln(),
        })
    }

    pub fn params(&self) -> &EnsembleParams {
        &self.params
    }

    /// `⟨S⁺S⁻⟩` at standing-wave phase `kx`.
    pub fn intensity(&self, kx: f64) -> f64 {
        let rabi = rabi_at(&self.params, kx);
        if rabi == 0.0 {
            return 0.0;
        }
        self.intensity_for_log_alpha(rabi.abs().ln() - self.log_denom)
    }

    /// `⟨S⁺S⁻⟩` as a function of `ln|α|` directly.
    pub fn intensity_for_log_alpha(&self, log_abs_alpha: f64) -> f64 {
        let (num, den) = self.log_terms(log_abs_alpha);
        let shift = max_log_magnitude([num.as_slice(), den.as_slice()]);
        let ratio = sum_shifted(&num, shift) / sum_shifted(&den, shift);
        ratio.max(0.0)
    }

    /// Numerator (`k = 1..=N`) and denominator (`n = 0..=N`) series terms.
    pub fn log_terms(&self, log_abs_alpha: f64) -> (Vec<LogTerm>, Vec<LogTerm>) {
        let base: Vec<f64> = self
            .log_a
            .iter()
            .enumerate()
            .map(|(n, la)| la - 2.0 * n as f64 * log_abs_alpha)
            .collect();
        let den = base.iter().zip(&self.log_w).map(|(b, lw)| LogTerm::positive(b + lw)).collect();
        let num = base.iter().zip(self.log_w.iter().skip(1)).map(|(b, lw)| LogTerm::positive(b + lw)).collect();
        (num, den)
    }
}

/// Steady-state collective fluorescence `I = ⟨S⁺S⁻⟩` at phase `kx`.
///
/// Exactly zero at nodes of the drive. Plotted intensities are `I / N²`.
pub fn intensity(p: &EnsembleParams, kx: f64) -> Result<f64> {
    Ok(SteadyStateSeries::new(p)?.intensity(kx))
}
