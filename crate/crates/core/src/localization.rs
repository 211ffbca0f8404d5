//! Localization protocols built on the fluorescence dip.
//!
//! * Scanning dip: the sample is fixed and the standing-wave phase is swept;
//!   the measured intensity is the profile translated by the unknown position.
//! * Single pass: one absolute intensity reading is intersected with the
//!   known profile, leaving a few candidate position intervals.
//!
//! Positions are reported modulo the intensity period `π/n`, the resolution
//! limit of any intensity-only measurement. Synthetic traces use a
//! multiplicative Gaussian detector-noise model clamped at zero; traces of two
//! ensembles are modeled as the sum of two independent single-ensemble
//! intensities.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::collective::EnsembleParams;
use crate::error::{Error, Result};
use crate::export::fmt_float;
use crate::profile::{analyze_dip, refine_minimum, width_map, IntensityProfile, WidthAxis, WidthSample};
use crate::steady_state::SteadyStateSeries;

/// A dip must be deeper than this many noise standard deviations (relative
/// to the plateau) to count as resolved.
pub const DIP_DETECTION_SIGMAS: f64 = 3.0;

/// Single-pass `τ_f / τ_s` ratio required for a pass.
pub const TIMESCALE_RATIO_REQUIRED: f64 = 100.0;

const FLAT_TOLERANCE: f64 = 1e-12;

/// Measured intensity as a function of standing-wave phase offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanTrace {
    pub phases: Vec<f64>,
    pub intensities: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl ScanTrace {
    /// CSV with header `phase,intensity`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "phase,intensity")?;
        for (ph, v) in self.phases.iter().zip(&self.intensities) {
            writeln!(w, "{},{}", fmt_float(*ph), fmt_float(*v))?;
        }
        Ok(())
    }

    fn validate(&self, p: &EnsembleParams) -> Result<f64> {
        let n = self.phases.len();
        if n != self.intensities.len() {
            return Err(Error::InvalidParameter("trace phases and intensities differ in length".into()));
        }
        if n < 5 {
            return Err(Error::InvalidParameter("trace needs at least 5 samples".into()));
        }
        let span = self.phases[n - 1] - self.phases[0];
        let spacing = span / (n - 1) as f64;
        if span + 0.5 * spacing < p.field_period() {
            return Err(Error::InvalidParameter(format!(
                "trace spans {span:.6} rad, less than one field period {:.6}",
                p.field_period()
            )));
        }
        Ok(spacing)
    }
}

/// Uniform phase offsets over one field period `[0, 2π/n]`.
pub fn scan_phases(p: &EnsembleParams, points: usize) -> Vec<f64> {
    crate::profile::profile_grid(p, points)
}

fn noisy(values: Vec<f64>, noise_sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("noise_sigma must be >= 0, got {noise_sigma}")));
    }
    if noise_sigma == 0.0 {
        return Ok(values);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise_sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(values.into_iter().map(|v| (v * (1.0 + normal.sample(&mut rng))).max(0.0)).collect())
}

/// Scan of one ensemble at `true_kx`: `I(true_kx + φ)` per offset `φ`.
pub fn synthesize_scan(p: &EnsembleParams, true_kx: f64, phases: &[f64], noise_sigma: f64, seed: u64) -> Result<ScanTrace> {
    synthesize_multi_scan(p, &[true_kx], phases, noise_sigma, seed)
}

/// Scan of several identical, mutually independent ensembles.
pub fn synthesize_multi_scan(p: &EnsembleParams, positions: &[f64], phases: &[f64], noise_sigma: f64, seed: u64) -> Result<ScanTrace> {
    let series = SteadyStateSeries::new(p)?;
    let clean = phases
        .iter()
        .map(|&ph| positions.iter().map(|&x| series.intensity(x + ph)).sum())
        .collect();
    Ok(ScanTrace {
        phases: phases.to_vec(),
        intensities: noisy(clean, noise_sigma, seed)?,
        noise_sigma,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionEstimate {
    /// Estimated position in `[0, π/n)`.
    pub kx_hat: f64,
    pub uncertainty: f64,
    /// Half-depth width of the dip seen in the trace.
    pub width: f64,
    /// Derived quantity (atom number, sample size) when an estimator provides one.
    pub auxiliary: Option<f64>,
}

fn detection_floor(noise_sigma: f64, plateau: f64) -> f64 {
    (DIP_DETECTION_SIGMAS * noise_sigma * plateau).max(FLAT_TOLERANCE * plateau)
}

/// Position from the phase at which the scanned intensity bottoms out.
///
/// The uncertainty is the heuristic `max(spacing, width / √SNR)` with
/// `SNR = depth / (σ · plateau)`; noiseless traces report the phase spacing.
pub fn scan_dip_estimate(trace: &ScanTrace, p: &EnsembleParams) -> Result<PositionEstimate> {
    let spacing = trace.validate(p)?;
    let v = &trace.intensities;
    let n = v.len();
    // interior minimum; the trace covers every dip at least once away from its ends
    let center = (2..n - 2)
        .min_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)))
        .ok_or(Error::NoDip)?;
    let plateau = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let depth = plateau - v[center];
    if !(plateau > 0.0) || depth <= detection_floor(trace.noise_sigma, plateau) {
        return Err(Error::NoDip);
    }
    let feature = analyze_dip(&trace.phases, v, center)?;
    let phase_min = refine_minimum(&trace.phases, v, center);
    let kx_hat = (p.first_node() - phase_min).rem_euclid(p.intensity_period());

    let uncertainty = if trace.noise_sigma == 0.0 {
        spacing
    } else {
        let snr = depth / (trace.noise_sigma * plateau);
        spacing.max(feature.width / snr.sqrt())
    };
    Ok(PositionEstimate { kx_hat, uncertainty, width: feature.width, auxiliary: None })
}

/// A resolved dip in a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceDip {
    pub phase: f64,
    pub depth: f64,
}

/// All resolved dips, with repeats across periods folded together.
///
/// Dips are runs below the half-depth level with a hysteresis of
/// `3σ · plateau` on the way out, so noise on a flank does not split a dip.
/// Runs cut by either end of the trace are skipped; their repeat one period
/// away is inside the trace.
pub fn find_dips(trace: &ScanTrace, p: &EnsembleParams) -> Result<Vec<TraceDip>> {
    let spacing = trace.validate(p)?;
    let v = &trace.intensities;
    let plateau = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor_value = v.iter().copied().fold(f64::INFINITY, f64::min);
    let threshold = detection_floor(trace.noise_sigma, plateau);
    if !(plateau > 0.0) || plateau - floor_value <= threshold {
        return Ok(Vec::new());
    }
    let level = 0.5 * (plateau + floor_value);
    let hysteresis = DIP_DETECTION_SIGMAS * trace.noise_sigma * plateau;

    let mut runs = Vec::new();
    let mut start = None;
    for (i, &x) in v.iter().enumerate() {
        match start {
            None if x < level => start = Some(i),
            Some(s) if x > level + hysteresis => {
                runs.push((s, i));
                start = None;
            }
            _ => {}
        }
    }

    let period = p.intensity_period();
    let mut dips: Vec<TraceDip> = Vec::new();
    for (s, e) in runs {
        if s == 0 {
            continue;
        }
        let c = (s..e).min_by(|&a, &b| v[a].total_cmp(&v[b])).expect("non-empty run");
        let depth = plateau - v[c];
        if depth <= threshold {
            continue;
        }
        let phase = refine_minimum(&trace.phases, v, c).rem_euclid(period);
        let merge_tol = 3.0 * spacing;
        let seen = dips.iter().any(|d| {
            let gap = (d.phase - phase).rem_euclid(period);
            gap.min(period - gap) <= merge_tol
        });
        if !seen {
            dips.push(TraceDip { phase, depth });
        }
    }
    dips.sort_by(|a, b| a.phase.total_cmp(&b.phase));
    Ok(dips)
}

/// Separation of two ensembles from the phase gap between their dips.
///
/// The gap is only defined modulo `π/n`; the shorter representative in
/// `[0, π/(2n)]` is returned.
pub fn two_sample_distance(trace: &ScanTrace, p: &EnsembleParams) -> Result<f64> {
    let dips = find_dips(trace, p)?;
    if dips.len() != 2 {
        return Err(Error::DipCount(dips.len()));
    }
    let period = p.intensity_period();
    let gap = (dips[1].phase - dips[0].phase).rem_euclid(period);
    Ok(gap.min(period - gap))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomNumberEstimate {
    pub n_atoms: u32,
    pub table: Vec<WidthSample>,
}

/// Atom number whose predicted dip width is nearest `measured_width`.
///
/// `p_known` supplies every parameter except the atom number, with `Ω` and
/// `Δ` unscaled. Ties go to the smaller candidate.
pub fn infer_atom_number(measured_width: f64, p_known: &EnsembleParams, candidates: &[u32], grid_points: usize) -> Result<AtomNumberEstimate> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("candidate atom numbers must not be empty".into()));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let samples: Vec<f64> = sorted.iter().map(|&n| f64::from(n)).collect();
    let table = width_map(p_known, WidthAxis::Atoms, &samples, grid_points)?;
    let mut best: Option<(u32, f64)> = None;
    for (n, row) in sorted.iter().zip(&table) {
        if let Some(w) = row.width {
            let err = (w - measured_width).abs();
            if best.is_none_or(|(_, b)| err < b) {
                best = Some((*n, err));
            }
        }
    }
    let (n_atoms, _) = best.ok_or(Error::NoDip)?;
    Ok(AtomNumberEstimate { n_atoms, table })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateInterval {
    pub kx_low: f64,
    pub kx_high: f64,
    /// Steepest profile slope inside the interval.
    pub local_slope: f64,
    /// `sigma / local_slope`, the position spread implied by the reading
    /// uncertainty; `None` on a flat stretch.
    pub position_sigma: Option<f64>,
}

/// Positions compatible with one intensity reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub intensity: f64,
    pub sigma: f64,
    pub intervals: Vec<CandidateInterval>,
}

impl CandidateSet {
    /// Total length of all candidate intervals.
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|c| c.kx_high - c.kx_low).sum()
    }

    pub fn contains(&self, kx: f64) -> bool {
        self.intervals.iter().any(|c| c.kx_low <= kx && kx <= c.kx_high)
    }

    /// CSV with header `kx_low,kx_high,local_slope`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "kx_low,kx_high,local_slope")?;
        for c in &self.intervals {
            writeln!(w, "{},{},{}", fmt_float(c.kx_low), fmt_float(c.kx_high), fmt_float(c.local_slope))?;
        }
        Ok(())
    }
}

/// Intervals of `[0, π/n]` where the linearly interpolated profile lies in
/// `[i_measured − sigma_i, i_measured + sigma_i]`.
///
/// Intensities are in the profile's absolute units (`⟨S⁺S⁻⟩`). A band that
/// misses the profile yields an empty set.
pub fn single_pass_candidates(i_measured: f64, sigma_i: f64, profile: &IntensityProfile) -> Result<CandidateSet> {
    if !(i_measured >= 0.0) || !(sigma_i >= 0.0) || !i_measured.is_finite() || !sigma_i.is_finite() {
        return Err(Error::InvalidParameter("intensity and sigma must be finite and >= 0".into()));
    }
    let (lo, hi) = (i_measured - sigma_i, i_measured + sigma_i);
    let period = profile.params.intensity_period();
    let x = &profile.kx_grid;
    let v = &profile.values;

    let mut intervals: Vec<CandidateInterval> = Vec::new();
    for j in 0..x.len().saturating_sub(1) {
        let (x0, v0) = (x[j], v[j]);
        if x0 > period {
            break;
        }
        let (mut x1, mut v1) = (x[j + 1], v[j + 1]);
        if x1 > period {
            v1 = v0 + (v1 - v0) * (period - x0) / (x1 - x0);
            x1 = period;
        }
        let Some((a, b)) = band_overlap(v0, v1, lo, hi) else {
            continue;
        };
        let (xa, xb) = (x0 + a * (x1 - x0), x0 + b * (x1 - x0));
        let slope = if x1 > x0 { ((v1 - v0) / (x1 - x0)).abs() } else { 0.0 };
        match intervals.last_mut() {
            Some(last) if last.kx_high >= xa => {
                last.kx_high = last.kx_high.max(xb);
                last.local_slope = last.local_slope.max(slope);
            }
            _ => intervals.push(CandidateInterval { kx_low: xa, kx_high: xb, local_slope: slope, position_sigma: None }),
        }
    }
    for c in &mut intervals {
        c.position_sigma = (c.local_slope > 0.0).then(|| sigma_i / c.local_slope);
    }
    Ok(CandidateSet { intensity: i_measured, sigma: sigma_i, intervals })
}

/// Sub-range `[a, b] ⊂ [0, 1]` of `t` with `lo <= v0 + t (v1 − v0) <= hi`.
fn band_overlap(v0: f64, v1: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    let dv = v1 - v0;
    if dv == 0.0 {
        return (lo <= v0 && v0 <= hi).then_some((0.0, 1.0));
    }
    let (mut a, mut b) = ((lo - v0) / dv, (hi - v0) / dv);
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    // endpoints decide exactly, independent of the division rounding
    if (lo..=hi).contains(&v0) {
        a = a.min(0.0);
    }
    if (lo..=hi).contains(&v1) {
        b = b.max(1.0);
    }
    let (a, b) = (a.max(0.0), b.min(1.0));
    (a <= b).then_some((a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimescaleCheck {
    /// `τ_s = 1 / (N γ)`, seconds.
    pub tau_steady: f64,
    pub flight_time: f64,
    /// `τ_f / τ_s`
    pub ratio: f64,
    pub pass: bool,
}

/// Whether a sample crossing the field reaches steady state in flight.
///
/// `p.gamma` must be the decay rate in s⁻¹ for this check.
pub fn timescale_check(p: &EnsembleParams, flight_time: f64) -> Result<TimescaleCheck> {
    if !(flight_time > 0.0) || !flight_time.is_finite() {
        return Err(Error::InvalidParameter(format!("flight time must be positive, got {flight_time}")));
    }
    p.validate()?;
    let tau_steady = 1.0 / (f64::from(p.n_atoms) * p.gamma);
    let ratio = flight_time / tau_steady;
    Ok(TimescaleCheck { tau_steady, flight_time, ratio, pass: ratio >= TIMESCALE_RATIO_REQUIRED })
}
