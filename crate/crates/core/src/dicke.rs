//! Brute-force steady state on the symmetric Dicke manifold.
//!
//! The master equation is vectorized by column stacking,
//! `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`, and the null vector of the Liouvillian is
//! found by a dense direct solve with one population equation replaced by
//! `Tr ρ = 1`. This is a reference path for the analytic series, not a fast one.
//!
//! Generator:
//!
//! ```text
//! dρ/dt = −i[H, ρ] + γ (2 S⁻ρS⁺ − S⁺S⁻ρ − ρS⁺S⁻)
//! H     = Δ̃ S_z + Ω(x) (S⁺ + S⁻) + Ω_d S⁺S⁻,   Δ̃ = Δ + Ω_d
//! ```
//!
//! With this sign of the `Ω_d S⁺S⁻` term the coherent shift and the decay
//! combine into the complex rate `γ + iΩ_d` that appears in the analytic
//! coefficients.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::collective::{rabi_at, EnsembleParams};
use crate::error::{Error, Result};
use crate::steady_state::SteadyStateSeries;

/// Largest atom number the dense oracle accepts (a 441 × 441 system).
pub const ORACLE_MAX_ATOMS: u32 = 20;

pub type CMatrix = DMatrix<Complex64>;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Collective operators on the `N + 1` symmetric states `|s, l⟩`, `l = −s..=s`.
///
/// Basis index `j` corresponds to `l = −s + j`.
#[derive(Debug, Clone)]
pub struct DickeOperators {
    pub dim: usize,
    pub s: f64,
    pub splus: CMatrix,
    pub sminus: CMatrix,
    pub sz: CMatrix,
}

impl DickeOperators {
    pub fn new(n_atoms: u32) -> Result<Self> {
        build_operators(n_atoms)
    }

    /// `S⁺S⁻`
    pub fn emission(&self) -> CMatrix {
        &self.splus * &self.sminus
    }
}

pub fn build_operators(n_atoms: u32) -> Result<DickeOperators> {
    if n_atoms == 0 {
        return Err(Error::InvalidParameter("n_atoms must be at least 1".into()));
    }
    if n_atoms > ORACLE_MAX_ATOMS {
        return Err(Error::OracleCapExceeded { requested: n_atoms, cap: ORACLE_MAX_ATOMS });
    }
    let dim = n_atoms as usize + 1;
    let s = f64::from(n_atoms) / 2.0;
    let mut splus = CMatrix::zeros(dim, dim);
    let mut sz = CMatrix::zeros(dim, dim);
    for j in 0..dim {
        let l = -s + j as f64;
        sz[(j, j)] = Complex64::new(l, 0.0);
        if j + 1 < dim {
            // S⁺|s,l⟩ = √((s−l)(s+l+1)) |s,l+1⟩
            splus[(j + 1, j)] = Complex64::new(((s - l) * (s + l + 1.0)).sqrt(), 0.0);
        }
    }
    let sminus = splus.adjoint();
    Ok(DickeOperators { dim, s, splus, sminus, sz })
}

/// Superoperator acting on column-stacked density matrices.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    pub dim: usize,
    pub matrix: CMatrix,
}

impl Liouvillian {
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let v = &self.matrix * vectorize(rho);
        unvectorize(&v, self.dim)
    }
}

fn vectorize(rho: &CMatrix) -> CMatrix {
    CMatrix::from_column_slice(rho.len(), 1, rho.as_slice())
}

fn unvectorize(v: &CMatrix, dim: usize) -> CMatrix {
    CMatrix::from_column_slice(dim, dim, v.as_slice())
}

/// Collective Hamiltonian at phase `kx` (rotating frame).
pub fn hamiltonian(ops: &DickeOperators, p: &EnsembleParams, kx: f64) -> CMatrix {
    let rabi = rabi_at(p, kx);
    let drive = (&ops.splus + &ops.sminus) * Complex64::from(rabi);
    &ops.sz * Complex64::from(p.shifted_detuning()) + drive + ops.emission() * Complex64::from(p.dipole_shift)
}

pub fn build_liouvillian(p: &EnsembleParams, kx: f64) -> Result<Liouvillian> {
    p.validate()?;
    let ops = build_operators(p.n_atoms)?;
    let d = ops.dim;
    let id = CMatrix::identity(d, d);
    let h = hamiltonian(&ops, p, kx);
    let emission = ops.emission();
    let gamma = Complex64::from(p.gamma);

    let coherent = (id.kronecker(&h) - h.transpose().kronecker(&id)) * (-I);
    let jump = ops.splus.transpose().kronecker(&ops.sminus) * Complex64::from(2.0);
    let anti = id.kronecker(&emission) + emission.transpose().kronecker(&id);
    let matrix = coherent + (jump - anti) * gamma;
    Ok(Liouvillian { dim: d, matrix })
}

/// Result of the constrained null-space solve.
#[derive(Debug, Clone)]
pub struct SteadyStateSolution {
    pub rho: CMatrix,
    /// `‖L vec(ρ)‖₂`
    pub residual_norm: f64,
}

impl SteadyStateSolution {
    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    /// Largest elementwise `|ρ − ρ†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        (&self.rho - self.rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Eigenvalues of the Hermitian part of `ρ`, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.rho + self.rho.adjoint()) * Complex64::from(0.5);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// `Tr(ρ A)`
    pub fn expectation(&self, op: &CMatrix) -> Complex64 {
        (&self.rho * op).trace()
    }
}

/// Solves `L ρ = 0` with the first population equation replaced by `Tr ρ = 1`.
pub fn steady_state(l: &Liouvillian) -> Result<SteadyStateSolution> {
    let d = l.dim;
    let n = d * d;
    if l.matrix.nrows() != n || l.matrix.ncols() != n {
        return Err(Error::InvalidParameter(format!(
            "Liouvillian is {}x{}, expected {n}x{n}",
            l.matrix.nrows(),
            l.matrix.ncols()
        )));
    }
    // the population rows of a trace-preserving L are linearly dependent
    let mut a = l.matrix.clone();
    a.row_mut(0).fill(Complex64::from(0.0));
    for j in 0..d {
        a[(0, j * d + j)] = Complex64::from(1.0);
    }
    let mut b = CMatrix::zeros(n, 1);
    b[(0, 0)] = Complex64::from(1.0);

    let x = a.lu().solve(&b).ok_or(Error::SingularSystem)?;
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::SingularSystem);
    }
    let residual_norm = (&l.matrix * &x).norm();
    Ok(SteadyStateSolution { rho: unvectorize(&x, d), residual_norm })
}

/// `Tr(ρ_s S⁺S⁻)` from the dense steady state.
pub fn intensity_oracle(p: &EnsembleParams, kx: f64) -> Result<f64> {
    let l = build_liouvillian(p, kx)?;
    let sol = steady_state(&l)?;
    let ops = build_operators(p.n_atoms)?;
    let v = sol.expectation(&ops.emission());
    if v.im.abs() > 1e-10 {
        return Err(Error::Numerical(format!("imaginary part {} in ⟨S⁺S⁻⟩", v.im)));
    }
    Ok(v.re)
}

/// `|candidate − reference| / max(|reference|, 10⁻³⁰)`.
pub fn relative_deviation(reference: f64, candidate: f64) -> f64 {
    (candidate - reference).abs() / reference.abs().max(1e-30)
}

/// Analytic and dense intensities at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleComparison {
    pub params: EnsembleParams,
    pub kx: f64,
    pub analytic: f64,
    pub oracle: f64,
    pub rel_deviation: f64,
}

pub fn compare_at(series: &SteadyStateSeries, kx: f64) -> Result<OracleComparison> {
    let p = *series.params();
    let analytic = series.intensity(kx);
    let oracle = intensity_oracle(&p, kx)?;
    Ok(OracleComparison { params: p, kx, analytic, oracle, rel_deviation: relative_deviation(analytic, oracle) })
}

/// Random `(Ω, Δ, Ω_d, kx)` tuples for `n_atoms`, reproducible from `seed`.
///
/// Ranges: `Ω ∈ [0.5, 20]`, `Δ ∈ [−20, 20]`, `Ω_d ∈ [−10, 10]`,
/// `kx ∈ [0, π)`, all in units of `γ = 1`.
pub fn random_draws(n_atoms: u32, draws: usize, seed: u64) -> Vec<(EnsembleParams, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (u64::from(n_atoms) << 32));
    (0..draws)
        .map(|_| {
            let p = EnsembleParams::new(
                n_atoms,
                rng.random_range(0.5..=20.0),
                rng.random_range(-20.0..=20.0),
                rng.random_range(-10.0..=10.0),
            );
            (p, rng.random_range(0.0..PI))
        })
        .collect()
}

/// Compares the analytic series with the dense steady state on `random_draws`.
pub fn random_equivalence(n_atoms: u32, draws: usize, seed: u64) -> Result<Vec<OracleComparison>> {
    random_draws(n_atoms, draws, seed)
        .into_iter()
        .map(|(p, kx)| compare_at(&SteadyStateSeries::new(&p)?, kx))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn relative_deviation_conventions() {
        assert_eq!(relative_deviation(0.0, 0.0), 0.0);
        assert_eq!(relative_deviation(1.0, 0.0), 1.0);
        assert_eq!(relative_deviation(2.0, 1.0), 0.5);
    }

    #[test]
    fn random_suite_agrees() {
        for n in 1..=3 {
            let rows = random_equivalence(n, 10, 0).unwrap();
            assert!(rows.iter().all(|r| r.rel_deviation <= 1e-10), "N={n}");
        }
        assert_eq!(random_draws(3, 5, 7), random_draws(3, 5, 7));
    }

    #[test]
    fn node_is_dark_in_both_paths() {
        let p = EnsembleParams::new(2, 100.0, 10.0, -5.0);
        let c = compare_at(&SteadyStateSeries::new(&p).unwrap(), FRAC_PI_2).unwrap();
        assert_eq!((c.analytic, c.oracle), (0.0, 0.0));
    }

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn spin_half_ladder() {
        let ops = build_operators(1).unwrap();
        assert_eq!(ops.dim, 2);
        assert_eq!(ops.splus[(1, 0)], Complex64::from(1.0));
        assert_eq!(ops.splus.iter().filter(|z| z.norm() != 0.0).count(), 1);
    }

    #[test]
    fn two_atom_ladder_elements() {
        let ops = build_operators(2).unwrap();
        let r2 = 2f64.sqrt();
        assert!((ops.splus[(1, 0)].re - r2).abs() < 1e-15);
        assert!((ops.splus[(2, 1)].re - r2).abs() < 1e-15);
        assert_eq!(ops.sz[(0, 0)].re, -1.0);
        assert_eq!(ops.sz[(2, 2)].re, 1.0);
    }

    #[test]
    fn su2_algebra_for_seven_atoms() {
        let ops = build_operators(7).unwrap();
        let (p, m, z) = (&ops.splus, &ops.sminus, &ops.sz);
        let c1 = p * m - m * p - z * Complex64::from(2.0);
        let c2 = z * p - p * z - p;
        let c3 = z * m - m * z + m;
        assert!(max_abs(&c1) < 1e-12);
        assert!(max_abs(&c2) < 1e-12);
        assert!(max_abs(&c3) < 1e-12);
        assert!(max_abs(&(m - p.adjoint())) == 0.0);
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(build_operators(21), Err(Error::OracleCapExceeded { requested: 21, cap: 20 })));
        assert!(build_operators(0).is_err());
    }

    #[test]
    fn pure_decay_relaxes_to_ground_state() {
        let p = EnsembleParams::new(4, 3.0, 2.0, -1.5);
        let l = build_liouvillian(&p, FRAC_PI_2).unwrap();
        let sol = steady_state(&l).unwrap();
        let mut ground = CMatrix::zeros(5, 5);
        ground[(0, 0)] = Complex64::from(1.0);
        assert!(max_abs(&(&sol.rho - ground)) < 1e-12);
        assert!(intensity_oracle(&p, FRAC_PI_2).unwrap().abs() < 1e-14);
    }

    #[test]
    fn single_atom_bloch_generator() {
        // hand-written two-level Lindbladian in the basis (g, e), σ_z/2 convention
        let (rabi, det, kx) = (1.3, -0.7, 0.4);
        let p = EnsembleParams::new(1, rabi, det, 0.8);
        let l = build_liouvillian(&p, kx).unwrap();
        let o = rabi_at(&p, kx);
        // for one atom S⁺S⁻ = S_z + 1/2, so Ω_d only shifts the detuning: Δ̃ + Ω_d
        let eff = det + 2.0 * 0.8;
        let rho = CMatrix::from_row_slice(2, 2, &[
            Complex64::new(0.6, 0.0), Complex64::new(0.1, 0.2),
            Complex64::new(0.1, -0.2), Complex64::new(0.4, 0.0),
        ]);
        let (gg, ge, eg, ee) = (rho[(0, 0)], rho[(0, 1)], rho[(1, 0)], rho[(1, 1)]);
        let mut want = CMatrix::zeros(2, 2);
        // dρ_ee/dt = −iΩ(ρ_ge − ρ_eg) − 2γ ρ_ee
        want[(1, 1)] = -I * o * (ge - eg) - ee * 2.0;
        want[(0, 0)] = -want[(1, 1)];
        // dρ_eg/dt = −i eff ρ_eg − iΩ(ρ_gg − ρ_ee) − γ ρ_eg
        want[(1, 0)] = -I * eff * eg - I * o * (gg - ee) - eg;
        want[(0, 1)] = want[(1, 0)].conj();
        assert!(max_abs(&(l.apply(&rho) - want)) < 1e-14);
    }

    #[test]
    fn single_atom_saturation() {
        let p = EnsembleParams::new(1, 1.0, 0.0, 0.0);
        let sol = steady_state(&build_liouvillian(&p, 0.0).unwrap()).unwrap();
        assert!((sol.rho[(1, 1)].re - 1.0 / 3.0).abs() < 1e-14);
        assert!(sol.residual_norm < 1e-12);
    }

    #[test]
    fn trace_is_preserved() {
        let p = EnsembleParams::new(5, 4.0, -2.0, 3.0);
        let l = build_liouvillian(&p, 0.7).unwrap();
        let mut rho = CMatrix::zeros(6, 6);
        for i in 0..6 {
            for j in 0..6 {
                rho[(i, j)] = Complex64::new((i * 7 + j * 3) as f64 % 5.0, (i as f64 - j as f64) * 0.3);
            }
        }
        let out = l.apply(&rho);
        assert!(out.trace().norm() < 1e-12 * rho.norm());
    }

    #[test]
    fn non_square_liouvillian_rejected() {
        let l = Liouvillian { dim: 3, matrix: CMatrix::zeros(4, 4) };
        assert!(steady_state(&l).is_err());
    }
}
