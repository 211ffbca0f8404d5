//! C ABI over `sfloc`.
//!
//! Every fallible function returns an [`SflocStatus`]; on failure the message
//! is kept per thread and read with [`sfloc_last_error_message`]. Handles are
//! opaque and must be released with their `_free` function. Output pointers
//! are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sfloc::collective::{self, PairGeometry};
use sfloc::localization::{self, CandidateSet};
use sfloc::{dicke, profile, EnsembleParams, Error, SteadyStateSeries};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SflocStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    NonPositiveSeparation = 3,
    GammaPole = 4,
    IndexOutOfRange = 5,
    OracleCapExceeded = 6,
    SingularSystem = 7,
    Numerical = 8,
    NoDip = 9,
    DipCount = 10,
    Panic = 11,
}

impl From<&Error> for SflocStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidParameter(_) => SflocStatus::InvalidParameter,
            Error::NonPositiveSeparation(_) => SflocStatus::NonPositiveSeparation,
            Error::GammaPole { .. } => SflocStatus::GammaPole,
            Error::IndexOutOfRange { .. } => SflocStatus::IndexOutOfRange,
            Error::OracleCapExceeded { .. } => SflocStatus::OracleCapExceeded,
            Error::SingularSystem => SflocStatus::SingularSystem,
            Error::Numerical(_) => SflocStatus::Numerical,
            Error::NoDip => SflocStatus::NoDip,
            Error::DipCount(_) => SflocStatus::DipCount,
        }
    }
}

/// Ensemble parameters; rates share the units of `gamma`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SflocParams {
    pub n_atoms: u32,
    pub n_photons: u32,
    pub gamma: f64,
    pub rabi: f64,
    pub detuning: f64,
    pub dipole_shift: f64,
}

impl From<SflocParams> for EnsembleParams {
    fn from(p: SflocParams) -> Self {
        EnsembleParams::new(p.n_atoms, p.rabi, p.detuning, p.dipole_shift)
            .with_photons(p.n_photons)
            .with_gamma(p.gamma)
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SflocDipFeature {
    pub center: f64,
    pub width: f64,
    pub depth: f64,
    pub plateau: f64,
    pub minimum: f64,
    pub slope_max: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SflocPairCoefficients {
    pub chi: f64,
    pub omega: f64,
    pub chi_expanded: f64,
    pub omega_expanded: f64,
    pub static_dd: f64,
    pub averaged_dd: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SflocInterval {
    pub kx_low: f64,
    pub kx_high: f64,
    pub local_slope: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SflocPositionEstimate {
    pub kx_hat: f64,
    pub uncertainty: f64,
    pub width: f64,
}

/// Analytic intensity model for one parameter set.
pub struct SflocModel {
    series: SteadyStateSeries,
}

/// Single-pass candidate intervals.
pub struct SflocCandidates {
    set: CandidateSet,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_last_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut buf = e.borrow_mut();
        buf.clear();
        buf.extend(msg.bytes().filter(|&b| b != 0));
    });
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SflocStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            SflocStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_last_error(&format!("null pointer: {what}"));
            SflocStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(&e.to_string());
            SflocStatus::from(&e)
        }
        Err(_) => {
            set_last_error("internal panic");
            SflocStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

/// Parameters with `gamma = 1` and a single-photon drive.
#[no_mangle]
pub extern "C" fn sfloc_params_default(n_atoms: u32, rabi: f64, detuning: f64, dipole_shift: f64) -> SflocParams {
    SflocParams { n_atoms, n_photons: 1, gamma: 1.0, rabi, detuning, dipole_shift }
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `len` bytes. Returns the full message length plus one.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn sfloc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len() + 1
    })
}

/// Static, NUL-terminated library version.
#[no_mangle]
pub extern "C" fn sfloc_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version contains NUL"),
    };
    VERSION.as_ptr()
}

/// # Safety
/// `params` must point to a valid `SflocParams`; `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn sfloc_model_new(params: *const SflocParams, out: *mut *mut SflocModel) -> SflocStatus {
    guard(|| {
        let p = EnsembleParams::from(*deref(params, "params")?);
        let out = deref_mut(out, "out")?;
        let series = SteadyStateSeries::new(&p)?;
        *out = Box::into_raw(Box::new(SflocModel { series }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from `sfloc_model_new`, freed once.
#[no_mangle]
pub unsafe extern "C" fn sfloc_model_free(model: *mut SflocModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// `⟨S⁺S⁻⟩` at standing-wave phase `kx`.
///
/// # Safety
/// `model` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sfloc_model_intensity(model: *const SflocModel, kx: f64, out: *mut f64) -> SflocStatus {
    guard(|| {
        let m = deref(model, "model")?;
        *deref_mut(out, "out")? = m.series.intensity(kx);
        Ok(())
    })
}

/// Samples `grid_points` phases over one field period.
///
/// # Safety
/// `kx_out` and `values_out` must each hold `grid_points` doubles.
#[no_mangle]
pub unsafe extern "C" fn sfloc_model_profile(
    model: *const SflocModel,
    grid_points: usize,
    kx_out: *mut f64,
    values_out: *mut f64,
) -> SflocStatus {
    guard(|| {
        let m = deref(model, "model")?;
        if kx_out.is_null() || values_out.is_null() {
            return Err(Failure::Null("output buffer"));
        }
        let prof = profile::evaluate_profile(m.series.params(), grid_points)?;
        ptr::copy_nonoverlapping(prof.kx_grid.as_ptr(), kx_out, grid_points);
        ptr::copy_nonoverlapping(prof.values.as_ptr(), values_out, grid_points);
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sfloc_model_dip_feature(
    model: *const SflocModel,
    grid_points: usize,
    out: *mut SflocDipFeature,
) -> SflocStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let out = deref_mut(out, "out")?;
        let f = profile::dip_feature(&profile::evaluate_profile(m.series.params(), grid_points)?)?;
        *out = SflocDipFeature {
            center: f.center,
            width: f.width,
            depth: f.depth,
            plateau: f.plateau,
            minimum: f.minimum,
            slope_max: f.slope_max,
        };
        Ok(())
    })
}

/// Intensity from the dense steady state; limited to small ensembles.
///
/// # Safety
/// `params` must be valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sfloc_oracle_intensity(params: *const SflocParams, kx: f64, out: *mut f64) -> SflocStatus {
    guard(|| {
        let p = EnsembleParams::from(*deref(params, "params")?);
        let out = deref_mut(out, "out")?;
        *out = dicke::intensity_oracle(&p, kx)?;
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfloc_pair_coefficients(
    kr: f64,
    xi: f64,
    gamma: f64,
    out: *mut SflocPairCoefficients,
) -> SflocStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let g = PairGeometry::new(kr, xi)?;
        *out = SflocPairCoefficients {
            chi: collective::chi_pair(g, gamma)?,
            omega: collective::omega_pair(g, gamma)?,
            chi_expanded: collective::chi_pair_expanded(g, gamma)?,
            omega_expanded: collective::omega_pair_expanded(g, gamma)?,
            static_dd: collective::static_dd(g, gamma)?,
            averaged_dd: collective::averaged_dd(kr, gamma)?,
        };
        Ok(())
    })
}

/// Synthesizes a scan of one ensemble at `true_kx` over `points` phase
/// offsets and estimates its position.
///
/// # Safety
/// `params` must be valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sfloc_scan_estimate(
    params: *const SflocParams,
    true_kx: f64,
    points: usize,
    noise_sigma: f64,
    seed: u64,
    out: *mut SflocPositionEstimate,
) -> SflocStatus {
    guard(|| {
        let p = EnsembleParams::from(*deref(params, "params")?);
        let out = deref_mut(out, "out")?;
        p.validate()?;
        let phases = localization::scan_phases(&p, points);
        let trace = localization::synthesize_scan(&p, true_kx, &phases, noise_sigma, seed)?;
        let e = localization::scan_dip_estimate(&trace, &p)?;
        *out = SflocPositionEstimate { kx_hat: e.kx_hat, uncertainty: e.uncertainty, width: e.width };
        Ok(())
    })
}

/// Candidate positions in `[0, π/n]` for a reading `intensity ± sigma`.
///
/// # Safety
/// `model` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sfloc_candidates_new(
    model: *const SflocModel,
    grid_points: usize,
    intensity: f64,
    sigma: f64,
    out: *mut *mut SflocCandidates,
) -> SflocStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let out = deref_mut(out, "out")?;
        let prof = profile::evaluate_profile(m.series.params(), grid_points)?;
        let set = localization::single_pass_candidates(intensity, sigma, &prof)?;
        *out = Box::into_raw(Box::new(SflocCandidates { set }));
        Ok(())
    })
}

/// Number of intervals; 0 for a null handle.
///
/// # Safety
/// `c` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sfloc_candidates_len(c: *const SflocCandidates) -> usize {
    c.as_ref().map_or(0, |c| c.set.intervals.len())
}

/// # Safety
/// `c` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sfloc_candidates_get(c: *const SflocCandidates, index: usize, out: *mut SflocInterval) -> SflocStatus {
    guard(|| {
        let c = deref(c, "candidates")?;
        let out = deref_mut(out, "out")?;
        let iv = c.set.intervals.get(index).ok_or(Error::IndexOutOfRange {
            index: u32::try_from(index).unwrap_or(u32::MAX),
            max: u32::try_from(c.set.intervals.len()).unwrap_or(u32::MAX).saturating_sub(1),
        })?;
        *out = SflocInterval { kx_low: iv.kx_low, kx_high: iv.kx_high, local_slope: iv.local_slope };
        Ok(())
    })
}

/// # Safety
/// `c` must be null or a handle from `sfloc_candidates_new`, freed once.
#[no_mangle]
pub unsafe extern "C" fn sfloc_candidates_free(c: *mut SflocCandidates) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}
