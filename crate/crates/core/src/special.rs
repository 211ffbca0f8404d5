//! Special functions used by the steady-state series.
//!
//! Log-gamma is evaluated with a Lanczos approximation (Godfrey's
//! g = 607/128, 15-term set) on the half plane `Re z >= 1/2` and the
//! reflection formula elsewhere. On that half plane the Lanczos sum keeps
//! `|arg A(z)| < 1.9`, so its principal log never jumps. The complex version
//! returns the branch of log Γ obtained by analytic continuation from the
//! positive real axis (the convention of `scipy.special.loggamma` and
//! `mpmath.loggamma`); callers that only need `Re log Γ` are unaffected by it.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 607.0 / 128.0;

const LANCZOS_C: [f64; 15] = [
    0.999_999_999_999_997_1,
    57.156_235_665_862_92,
    -59.597_960_355_475_49,
    14.136_097_974_741_747,
    -0.491_913_816_097_620_2,
    0.339_946_499_848_118_9e-4,
    0.465_236_289_270_485_8e-4,
    -0.983_744_753_048_795_6e-4,
    0.158_088_703_224_912_5e-3,
    -0.210_264_441_724_104_9e-3,
    0.217_439_618_115_212_6e-3,
    -0.164_318_106_536_763_9e-3,
    0.844_182_239_838_527_4e-4,
    -0.261_908_384_015_814_1e-4,
    0.368_991_826_595_316_2e-5,
];

/// ln(2π) / 2
const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

const LN_PI: f64 = 1.144_729_885_849_400_2;

/// Natural log of Γ(x) for real `x > 0`, or ln|Γ(x)| for negative non-integers.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // ln|Γ(x)| = ln π − ln|sin πx| − ln Γ(1 − x)
        return LN_PI - sin_pi_real(x).abs().ln() - ln_gamma(1.0 - x);
    }
    let a = LANCZOS_C
        .iter()
        .enumerate()
        .skip(1)
        .fold(LANCZOS_C[0], |acc, (k, &c)| acc + c / (x + k as f64 - 1.0));
    let t = x + LANCZOS_G - 0.5;
    HALF_LN_TWO_PI + (x - 0.5) * t.ln() - t + a.ln()
}

/// ln(n!) through the real log-gamma path.
pub fn ln_factorial(n: u32) -> f64 {
    ln_gamma(f64::from(n) + 1.0)
}

/// Complex log-gamma.
///
/// Poles at `z = 0, -1, -2, ...` are reported as [`Error::GammaPole`].
pub fn complex_ln_gamma(z: Complex64) -> Result<Complex64> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Numerical(format!("non-finite log-gamma argument {z}")));
    }
    if z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0 {
        return Err(Error::GammaPole { re: z.re, im: z.im });
    }
    if z.re < 0.5 {
        // Branch fix-up keeps the result continuous with the Re z >= 1/2 half plane.
        let sign = if z.im.is_sign_negative() { -1.0 } else { 1.0 };
        let turns = (0.5 * z.re + 0.25).floor();
        let correction = Complex64::new(LN_PI, sign * 2.0 * PI * turns);
        let reflected = lanczos_ln_gamma(Complex64::new(1.0 - z.re, -z.im));
        return Ok(correction - ln_sin_pi(z) - reflected);
    }
    Ok(lanczos_ln_gamma(z))
}

fn lanczos_ln_gamma(z: Complex64) -> Complex64 {
    let a = LANCZOS_C
        .iter()
        .enumerate()
        .skip(1)
        .fold(Complex64::new(LANCZOS_C[0], 0.0), |acc, (k, &c)| acc + c / (z + (k as f64 - 1.0)));
    let t = z + (LANCZOS_G - 0.5);
    HALF_LN_TWO_PI + (z - 0.5) * t.ln() - t + a.ln()
}

/// sin(πx) with exact argument reduction.
fn sin_pi_real(x: f64) -> f64 {
    let r = x - 2.0 * (0.5 * x).round();
    (PI * r).sin()
}

/// Principal log of sin(πz).
fn ln_sin_pi(z: Complex64) -> Complex64 {
    let xr = z.re - 2.0 * (0.5 * z.re).round();
    let (s, c) = (PI * xr).sin_cos();
    let py = PI * z.im;
    if py.abs() < 700.0 {
        Complex64::new(s * py.cosh(), c * py.sinh()).ln()
    } else {
        // |sin| ~ e^{π|y|}/2 and the phase is that of (sin πx + i sgn(y) cos πx)
        let re = py.abs() - std::f64::consts::LN_2;
        let im = (py.signum() * c).atan2(s);
        Complex64::new(re, im)
    }
}

/// A series term stored as `sign * exp(log_magnitude)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogTerm {
    pub log_magnitude: f64,
    pub sign: f64,
}

impl LogTerm {
    pub fn positive(log_magnitude: f64) -> Self {
        Self { log_magnitude, sign: 1.0 }
    }

    pub fn value(&self) -> f64 {
        self.sign * self.log_magnitude.exp()
    }
}

/// Largest log-magnitude across several term sets (`-inf` if all are empty).
pub fn max_log_magnitude<'a>(sets: impl IntoIterator<Item = &'a [LogTerm]>) -> f64 {
    sets.into_iter()
        .flat_map(|s| s.iter())
        .map(|t| t.log_magnitude)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `sum(sign * exp(log_magnitude - shift))`.
///
/// Sharing one `shift` between numerator and denominator series keeps their
/// ratio exact while every exponent stays `<= 0`.
pub fn sum_shifted(terms: &[LogTerm], shift: f64) -> f64 {
    terms.iter().map(|t| t.sign * (t.log_magnitude - shift).exp()).sum()
}

/// Numerically stable `ln(sum(exp(x_i)))`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
