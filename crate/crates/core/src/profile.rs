//! Intensity profiles over one standing-wave period and their dip geometry.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::collective::EnsembleParams;
use crate::error::{Error, Result};
use crate::export::fmt_float;
use crate::steady_state::SteadyStateSeries;

/// Grid points per period used when callers do not choose one.
pub const DEFAULT_GRID_POINTS: usize = 2001;

/// Relative flatness below which a profile is treated as having no dip.
const FLAT_TOLERANCE: f64 = 1e-12;

/// `I(kx)` sampled on a uniform grid over `[0, 2π/n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityProfile {
    pub params: EnsembleParams,
    pub kx_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub normalized_values: Vec<f64>,
}

impl IntensityProfile {
    pub fn len(&self) -> usize {
        self.kx_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kx_grid.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.kx_grid[1] - self.kx_grid[0]
    }

    /// CSV with header `kx,intensity,intensity_per_n2`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "kx,intensity,intensity_per_n2")?;
        for ((kx, v), nv) in self.kx_grid.iter().zip(&self.values).zip(&self.normalized_values) {
            writeln!(w, "{},{},{}", fmt_float(*kx), fmt_float(*v), fmt_float(*nv))?;
        }
        Ok(())
    }
}

/// Geometry of the intensity minimum around a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipFeature {
    /// Phase of the minimum, refined by a 5-point quadratic fit.
    pub center: f64,
    /// Full width at the level halfway between plateau and minimum.
    pub width: f64,
    pub depth: f64,
    /// Largest sampled value.
    pub plateau: f64,
    pub minimum: f64,
    /// Largest `|dI/dkx|` between the two half-depth crossings.
    pub slope_max: f64,
}

/// Uniform grid over one field period `[0, 2π/n]`.
///
/// With `(grid_points − 1)` divisible by 4 the nodes `π/(2n)` and `3π/(2n)`
/// are grid points, bit-identical to `π/(2n)` as computed by callers.
pub fn profile_grid(p: &EnsembleParams, grid_points: usize) -> Vec<f64> {
    let span = p.field_period();
    let last = (grid_points - 1) as f64;
    (0..grid_points).map(|i| span * (i as f64 / last)).collect()
}

pub fn evaluate_profile(p: &EnsembleParams, grid_points: usize) -> Result<IntensityProfile> {
    if grid_points < 3 {
        return Err(Error::InvalidParameter(format!("grid_points must be at least 3, got {grid_points}")));
    }
    let series = SteadyStateSeries::new(p)?;
    let kx_grid = profile_grid(p, grid_points);
    let values: Vec<f64> = kx_grid.iter().map(|&kx| series.intensity(kx)).collect();
    let n2 = p.n_squared();
    let normalized_values = values.iter().map(|v| v / n2).collect();
    Ok(IntensityProfile { params: *p, kx_grid, values, normalized_values })
}

pub fn dip_feature(profile: &IntensityProfile) -> Result<DipFeature> {
    let center = argmin(&profile.values).ok_or(Error::NoDip)?;
    if center == 0 || center + 1 == profile.len() {
        return Err(Error::NoDip);
    }
    analyze_dip(&profile.kx_grid, &profile.values, center)
}

pub(crate) fn argmin(v: &[f64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &x)| match best {
            Some((_, b)) if b <= x => best,
            _ => Some((i, x)),
        })
        .map(|(i, _)| i)
}

/// Half-depth geometry of the dip whose lowest sample is `center`.
pub(crate) fn analyze_dip(x: &[f64], v: &[f64], center: usize) -> Result<DipFeature> {
    let plateau = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let minimum = v[center];
    let depth = plateau - minimum;
    if !(plateau > 0.0) || depth <= FLAT_TOLERANCE * plateau {
        return Err(Error::NoDip);
    }
    let level = 0.5 * (plateau + minimum);

    let left = (0..center).rev().find(|&j| v[j] >= level).ok_or(Error::NoDip)?;
    let right = (center + 1..v.len()).find(|&j| v[j] >= level).ok_or(Error::NoDip)?;
    let x_left = crossing(x[left], v[left], x[left + 1], v[left + 1], level);
    let x_right = crossing(x[right - 1], v[right - 1], x[right], v[right], level);

    let slope_max = (left..right)
        .map(|k| ((v[k + 1] - v[k]) / (x[k + 1] - x[k])).abs())
        .fold(0.0, f64::max);

    Ok(DipFeature {
        center: refine_minimum(x, v, center),
        width: x_right - x_left,
        depth,
        plateau,
        minimum,
        slope_max,
    })
}

fn crossing(x0: f64, v0: f64, x1: f64, v1: f64, level: f64) -> f64 {
    if v1 == v0 {
        return 0.5 * (x0 + x1);
    }
    x0 + (level - v0) * (x1 - x0) / (v1 - v0)
}

/// Vertex of the least-squares parabola through the five samples around `c`.
///
/// Falls back to the grid point when the fit is not convex or its vertex
/// leaves the neighbouring cells.
pub(crate) fn refine_minimum(x: &[f64], v: &[f64], c: usize) -> f64 {
    if c < 2 || c + 2 >= v.len() {
        return x[c];
    }
    let h = (x[c + 2] - x[c - 2]) / 4.0;
    // orthogonal basis 1, u, u² − 2 on u = −2..=2
    let (mut b, mut a) = (0.0, 0.0);
    for (k, u) in (-2i32..=2).enumerate() {
        let u = f64::from(u);
        let y = v[c - 2 + k];
        b += u * y;
        a += (u * u - 2.0) * y;
    }
    let (b, a) = (b / 10.0, a / 14.0);
    if !(a > 0.0) {
        return x[c];
    }
    let u_star = -b / (2.0 * a);
    if u_star.abs() > 1.0 {
        return x[c];
    }
    x[c] + u_star * h
}

/// Parameter swept by [`width_map`].
///
/// Detuning and Rabi samples are in the figures' scaled units `Δ/(Nγ)` and
/// `Ω/(Nγ)`; atom-number samples keep the unscaled `Ω` and `Δ` of the base
/// parameters fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WidthAxis {
    Detuning,
    Atoms,
    Rabi,
}

impl WidthAxis {
    pub fn name(&self) -> &'static str {
        match self {
            WidthAxis::Detuning => "detuning",
            WidthAxis::Atoms => "atoms",
            WidthAxis::Rabi => "rabi",
        }
    }

    /// Column label for the swept quantity in tables.
    pub fn column(&self) -> &'static str {
        match self {
            WidthAxis::Detuning => "detuning_per_n_gamma",
            WidthAxis::Atoms => "atoms",
            WidthAxis::Rabi => "rabi_per_n_gamma",
        }
    }

    /// Base parameters with one swept value applied.
    pub fn apply(&self, base: &EnsembleParams, sample: f64) -> Result<EnsembleParams> {
        let mut p = *base;
        let n_gamma = f64::from(base.n_atoms) * base.gamma;
        match self {
            WidthAxis::Detuning => p.detuning = sample * n_gamma,
            WidthAxis::Rabi => p.rabi = sample * n_gamma,
            WidthAxis::Atoms => {
                if !(sample >= 1.0) || sample.fract() != 0.0 || sample > f64::from(u32::MAX) {
                    return Err(Error::InvalidParameter(format!("atom number must be a positive integer, got {sample}")));
                }
                p.n_atoms = sample as u32;
            }
        }
        p.validate()?;
        Ok(p)
    }
}

impl std::str::FromStr for WidthAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "detuning" => Ok(WidthAxis::Detuning),
            "atoms" => Ok(WidthAxis::Atoms),
            "rabi" => Ok(WidthAxis::Rabi),
            other => Err(Error::InvalidParameter(format!("unknown sweep axis '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthSample {
    pub sample: f64,
    /// `None` when the profile at this sample has no resolvable dip.
    pub width: Option<f64>,
}

/// Dip width across a swept parameter, all other parameters frozen.
pub fn width_map(p_base: &EnsembleParams, axis: WidthAxis, samples: &[f64], grid_points: usize) -> Result<Vec<WidthSample>> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("width_map needs at least one sample".into()));
    }
    samples
        .iter()
        .map(|&sample| {
            let p = axis.apply(p_base, sample)?;
            let profile = evaluate_profile(&p, grid_points)?;
            let width = match dip_feature(&profile) {
                Ok(f) => Some(f.width),
                Err(Error::NoDip) => None,
                Err(e) => return Err(e),
            };
            Ok(WidthSample { sample, width })
        })
        .collect()
}

/// One profile per swept sample, for 2D `(kx, sample) → I/N²` tables.
pub fn sweep_profiles(p_base: &EnsembleParams, axis: WidthAxis, samples: &[f64], grid_points: usize) -> Result<Vec<IntensityProfile>> {
    samples.iter().map(|&s| evaluate_profile(&axis.apply(p_base, s)?, grid_points)).collect()
}

/// Row-major CSV `kx,<axis column>,intensity_per_n2` over all sweep samples.
pub fn write_sweep_csv<W: Write>(mut w: W, axis: WidthAxis, samples: &[f64], profiles: &[IntensityProfile]) -> io::Result<()> {
    writeln!(w, "kx,{},intensity_per_n2", axis.column())?;
    for (sample, profile) in samples.iter().zip(profiles) {
        for (kx, nv) in profile.kx_grid.iter().zip(&profile.normalized_values) {
            writeln!(w, "{},{},{}", fmt_float(*kx), fmt_float(*sample), fmt_float(*nv))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collective::rabi_at;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn grid_hits_nodes_exactly() {
        let p = EnsembleParams::new(3, 5.0, 1.0, 0.0);
        let g = profile_grid(&p, 2001);
        assert_eq!(g[500], FRAC_PI_2);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[2000], 2.0 * PI);
        let q = p.with_photons(3);
        assert_eq!(profile_grid(&q, 101)[25], FRAC_PI_2 / 3.0);
    }

    #[test]
    fn too_few_points_rejected() {
        let p = EnsembleParams::new(1, 1.0, 0.0, 0.0);
        assert!(evaluate_profile(&p, 2).is_err());
    }

    #[test]
    fn single_atom_profile_is_closed_form() {
        let p = EnsembleParams::new(1, 1.0, 0.0, 0.0);
        let prof = evaluate_profile(&p, 5).unwrap();
        for (kx, v) in prof.kx_grid.iter().zip(&prof.values) {
            let o = rabi_at(&p, *kx);
            assert!((v - o * o / (2.0 * o * o + 1.0)).abs() < 1e-15);
        }
        assert_eq!(prof.values[1], 0.0);
        assert_eq!(prof.values[3], 0.0);
    }

    #[test]
    fn profile_mirror_symmetry() {
        let p = EnsembleParams::new(4, 30.0, 10.0, -5.0);
        let prof = evaluate_profile(&p, 401).unwrap();
        // kx_i ↔ π − kx_i is index i ↔ 200 − i on this grid
        for i in 0..=200 {
            let (a, b) = (prof.values[i], prof.values[200 - i]);
            assert!((a - b).abs() <= 1e-12 * a.max(b), "i={i}: {a} vs {b}");
        }
    }

    #[test]
    fn synthetic_v_profile() {
        let x: Vec<f64> = (0..101).map(|i| i as f64 * 0.01).collect();
        let v: Vec<f64> = x.iter().map(|&xi| (xi - 0.5).abs().min(0.2)).collect();
        let f = analyze_dip(&x, &v, argmin(&v).unwrap()).unwrap();
        assert!((f.center - 0.5).abs() < 1e-12);
        // level 0.1 is crossed at 0.4 and 0.6
        assert!((f.width - 0.2).abs() < 1e-12);
        assert!((f.depth - 0.2).abs() < 1e-12);
        assert!((f.plateau - 0.2).abs() < 1e-12);
        assert!((f.slope_max - 1.0).abs() < 1e-9);
    }

    #[test]
    fn quadratic_refinement_finds_off_grid_vertex() {
        let x: Vec<f64> = (0..21).map(|i| i as f64 * 0.1).collect();
        let v: Vec<f64> = x.iter().map(|&xi| (xi - 1.03).powi(2)).collect();
        let c = argmin(&v).unwrap();
        assert!((refine_minimum(&x, &v, c) - 1.03).abs() < 1e-12);
    }

    #[test]
    fn flat_profile_has_no_dip() {
        let x: Vec<f64> = (0..50).map(f64::from).collect();
        let v = vec![2.0; 50];
        assert_eq!(analyze_dip(&x, &v, 10), Err(Error::NoDip));
        let z = vec![0.0; 50];
        assert_eq!(analyze_dip(&x, &z, 10), Err(Error::NoDip));
    }

    #[test]
    fn axis_application() {
        let base = EnsembleParams::new(4, 1.0, 2.0, -5.0);
        assert_eq!(WidthAxis::Detuning.apply(&base, 2.5).unwrap().detuning, 10.0);
        assert_eq!(WidthAxis::Rabi.apply(&base, 25.0).unwrap().rabi, 100.0);
        let q = WidthAxis::Atoms.apply(&base, 8.0).unwrap();
        assert_eq!((q.n_atoms, q.rabi, q.detuning), (8, 1.0, 2.0));
        assert!(WidthAxis::Atoms.apply(&base, 2.5).is_err());
        assert!(WidthAxis::Atoms.apply(&base, 0.0).is_err());
        assert!("width".parse::<WidthAxis>().is_err());
    }

    #[test]
    fn single_sample_map_matches_dip_feature() {
        let base = EnsembleParams::new(2, 100.0, 10.0, -5.0);
        let map = width_map(&base, WidthAxis::Atoms, &[2.0], 801).unwrap();
        let f = dip_feature(&evaluate_profile(&base, 801).unwrap()).unwrap();
        assert_eq!(map[0].width, Some(f.width));
        assert!(width_map(&base, WidthAxis::Atoms, &[], 801).is_err());
    }

    #[test]
    fn csv_layout() {
        let p = EnsembleParams::new(1, 1.0, 0.0, 0.0);
        let prof = evaluate_profile(&p, 5).unwrap();
        let mut buf = Vec::new();
        prof.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "kx,intensity,intensity_per_n2");
        assert_eq!(lines.len(), 6);
        let row: Vec<f64> = lines[1].split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(row, vec![0.0, 1.0 / 3.0, 1.0 / 3.0]);
    }
}
