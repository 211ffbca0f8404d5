//! Command-line front end of the `sfloc` binary.
//!
//! Rates are in units of `γ = 1`, positions (`--true-pos`, `--second-pos`) in
//! units of π. Exit codes: 0 ok, 1 validation breach, 2 config error,
//! 3 numerical failure, 4 estimator failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::collective::{self, EnsembleParams, PairGeometry};
use crate::dicke::{self, OracleComparison, ORACLE_MAX_ATOMS};
use crate::error::Error;
use crate::export::fmt_float;
use crate::localization::{self, PositionEstimate};
use crate::profile::{self, WidthAxis, DEFAULT_GRID_POINTS};
use crate::steady_state::SteadyStateSeries;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_ESTIMATOR: i32 = 4;

/// Largest oracle deviation accepted by `oracle`.
pub const ORACLE_TOLERANCE: f64 = 1e-8;

const ORACLE_SUITE_ATOMS: std::ops::RangeInclusive<u32> = 1..=6;
const ORACLE_SUITE_DRAWS: usize = 50;
const ORACLE_GRID_POINTS: usize = 101;

#[derive(Debug, Parser)]
#[command(name = "sfloc", version, about = "Collective fluorescence profiles and dip-based localization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Intensity profile over one field period, or a sweep of profiles/widths.
    Profile(RunConfig),
    /// Analytic intensity against the dense steady state.
    Oracle(RunConfig),
    /// Synthetic scanning-dip measurement and position estimate.
    Scan(RunConfig),
    /// Single-pass candidate positions for one intensity reading.
    Locate(RunConfig),
    /// Pairwise collective coefficients.
    Coeffs(RunConfig),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Profile(_) => "profile",
            Command::Oracle(_) => "oracle",
            Command::Scan(_) => "scan",
            Command::Locate(_) => "locate",
            Command::Coeffs(_) => "coeffs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Flags shared by all subcommands. A `--config` JSON file may supply any of
/// them under the same (kebab-case) names; flags given on the command line win.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    #[arg(long, value_name = "PATH")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Subcommand the config file was written for; checked, not dispatched on.
    #[arg(skip)]
    pub subcommand: Option<String>,

    #[arg(long)]
    pub atoms: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    pub rabi: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub detuning: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub dipole: Option<f64>,
    #[arg(long)]
    pub photons: Option<u32>,
    /// Grid points per field period (profile, oracle table, scan offsets).
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    #[arg(long)]
    pub seed: Option<u64>,
    /// Relative detector noise of synthetic scans.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub true_pos: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub second_pos: Option<f64>,
    /// Also write the synthetic scan trace as CSV.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
    /// Atom numbers to match the scanned dip width against.
    #[arg(long, value_delimiter = ',')]
    pub candidates: Option<Vec<u32>>,

    /// Measured intensity `⟨S⁺S⁻⟩` for `locate`.
    #[arg(long, allow_negative_numbers = true)]
    pub intensity: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    /// Time of flight through the field, seconds.
    #[arg(long)]
    pub flight_time: Option<f64>,
    /// Decay rate in s⁻¹, used only with `--flight-time`.
    #[arg(long)]
    pub gamma_si: Option<f64>,

    #[arg(long, allow_negative_numbers = true)]
    pub kr: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub xi: Option<f64>,

    #[arg(long)]
    pub sweep: Option<WidthAxis>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub samples: Option<Vec<f64>>,
    /// With `--sweep`, print the dip width per sample instead of the full table.
    #[arg(long)]
    #[serde(default)]
    pub widths: bool,
}

macro_rules! overlay {
    ($flags:ident, $file:ident; $($field:ident),* $(,)?) => {
        $( if $flags.$field.is_none() { $flags.$field = $file.$field; } )*
    };
}

impl RunConfig {
    /// Fills unset flags from the `--config` file, if any.
    pub fn resolve(mut self, subcommand: &str) -> Result<Self, Failure> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
        let file: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Failure::config(format!("invalid config {}: {e}", path.display())))?;
        if let Some(sc) = &file.subcommand {
            if sc != subcommand {
                return Err(Failure::config(format!("config is for '{sc}', not '{subcommand}'")));
            }
        }
        overlay!(self, file;
            subcommand, atoms, rabi, detuning, dipole, photons, grid, format, out, seed, noise,
            true_pos, second_pos, trace, candidates, intensity, sigma, flight_time, gamma_si,
            kr, xi, sweep, samples);
        self.widths |= file.widths;
        Ok(self)
    }

    pub fn params(&self) -> Result<EnsembleParams, Failure> {
        let p = EnsembleParams::new(
            required("atoms", self.atoms)?,
            required("rabi", self.rabi)?,
            required("detuning", self.detuning)?,
            required("dipole", self.dipole)?,
        )
        .with_photons(self.photons.unwrap_or(1));
        p.validate()?;
        Ok(p)
    }

    fn grid_or(&self, default: usize) -> usize {
        self.grid.unwrap_or(default)
    }
}

fn required<T>(name: &str, v: Option<T>) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::config(format!("missing required --{name}")))
}

/// A non-zero exit with its diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_)
            | Error::NonPositiveSeparation(_)
            | Error::OracleCapExceeded { .. }
            | Error::IndexOutOfRange { .. } => EXIT_CONFIG,
            Error::GammaPole { .. } | Error::SingularSystem | Error::Numerical(_) => EXIT_NUMERICAL,
            Error::NoDip | Error::DipCount(_) => EXIT_ESTIMATOR,
        };
        Self { code, message: e.to_string() }
    }
}

/// Subcommand output plus the exit code to report after writing it.
struct Outcome {
    body: String,
    code: i32,
    note: Option<String>,
}

impl Outcome {
    fn ok(body: String) -> Self {
        Self { body, code: EXIT_OK, note: None }
    }
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                EXIT_CONFIG
            } else {
                let _ = write!(stdout, "{text}");
                EXIT_OK
            };
        }
    };
    match dispatch(cli.command) {
        Ok((outcome, out)) => {
            if let Some(note) = &outcome.note {
                let _ = writeln!(stderr, "{note}");
            }
            if let Err(e) = emit(&outcome.body, out.as_deref(), stdout) {
                let _ = writeln!(stderr, "error: {e}");
                return EXIT_CONFIG;
            }
            outcome.code
        }
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn emit(body: &str, out: Option<&Path>, stdout: &mut dyn Write) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, body).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))),
        None => stdout.write_all(body.as_bytes()),
    }
}

fn dispatch(command: Command) -> Result<(Outcome, Option<PathBuf>), Failure> {
    let name = command.name();
    let (Command::Profile(c) | Command::Oracle(c) | Command::Scan(c) | Command::Locate(c) | Command::Coeffs(c)) = &command;
    let cfg = c.clone().resolve(name)?;
    let outcome = match command {
        Command::Profile(_) => cmd_profile(&cfg)?,
        Command::Oracle(_) => cmd_oracle(&cfg)?,
        Command::Scan(_) => cmd_scan(&cfg)?,
        Command::Locate(_) => cmd_locate(&cfg)?,
        Command::Coeffs(_) => cmd_coeffs(&cfg)?,
    };
    Ok((outcome, cfg.out))
}

fn to_json<T: Serialize>(v: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(v)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Failure { code: EXIT_NUMERICAL, message: format!("JSON encoding failed: {e}") })
}

fn csv_buffer(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> String {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is ASCII")
}

fn opt_float(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

fn cmd_profile(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let p = cfg.params()?;
    let grid = cfg.grid_or(DEFAULT_GRID_POINTS);
    let format = cfg.format.unwrap_or(Format::Csv);

    let Some(axis) = cfg.sweep else {
        let prof = profile::evaluate_profile(&p, grid)?;
        return Ok(Outcome::ok(match format {
            Format::Csv => csv_buffer(|w| prof.write_csv(w)),
            Format::Json => {
                let dip = profile::dip_feature(&prof).ok();
                to_json(&json!({ "profile": prof, "dip": dip }))?
            }
        }));
    };

    let samples = required("samples", cfg.samples.clone())?;
    if cfg.widths {
        let table = profile::width_map(&p, axis, &samples, grid)?;
        return Ok(Outcome::ok(match format {
            Format::Csv => {
                let mut s = format!("{},width\n", axis.column());
                for row in &table {
                    let _ = writeln!(s, "{},{}", fmt_float(row.sample), opt_float(row.width));
                }
                s
            }
            Format::Json => to_json(&json!({ "axis": axis, "widths": table }))?,
        }));
    }
    let profiles = profile::sweep_profiles(&p, axis, &samples, grid)?;
    Ok(Outcome::ok(match format {
        Format::Csv => csv_buffer(|w| profile::write_sweep_csv(w, axis, &samples, &profiles)),
        Format::Json => to_json(&json!({ "axis": axis, "samples": samples, "profiles": profiles }))?,
    }))
}

#[derive(Debug, Serialize)]
struct SuiteRow {
    n_atoms: u32,
    draws: usize,
    max_rel_deviation: f64,
}

fn cmd_oracle(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let format = cfg.format.unwrap_or(Format::Csv);
    let rows: Vec<OracleComparison>;
    let body;
    if let Some(n) = cfg.atoms {
        if n > ORACLE_MAX_ATOMS {
            return Err(Error::OracleCapExceeded { requested: n, cap: ORACLE_MAX_ATOMS }.into());
        }
        let p = cfg.params()?;
        let series = SteadyStateSeries::new(&p)?;
        rows = profile::profile_grid(&p, cfg.grid_or(ORACLE_GRID_POINTS))
            .into_iter()
            .map(|kx| dicke::compare_at(&series, kx))
            .collect::<Result<_, _>>()?;
        body = match format {
            Format::Csv => {
                let mut s = String::from("kx,analytic,oracle,rel_deviation\n");
                for r in &rows {
                    let _ = writeln!(s, "{},{},{},{}", fmt_float(r.kx), fmt_float(r.analytic), fmt_float(r.oracle), fmt_float(r.rel_deviation));
                }
                s
            }
            Format::Json => to_json(&rows)?,
        };
    } else {
        let seed = cfg.seed.unwrap_or(0);
        let mut all = Vec::new();
        let mut summary = Vec::new();
        for n in ORACLE_SUITE_ATOMS {
            let batch = dicke::random_equivalence(n, ORACLE_SUITE_DRAWS, seed)?;
            let max_rel_deviation = batch.iter().map(|r| r.rel_deviation).fold(0.0, f64::max);
            summary.push(SuiteRow { n_atoms: n, draws: batch.len(), max_rel_deviation });
            all.extend(batch);
        }
        body = match format {
            Format::Csv => {
                let mut s = String::from("n_atoms,draws,max_rel_deviation\n");
                for r in &summary {
                    let _ = writeln!(s, "{},{},{}", r.n_atoms, r.draws, fmt_float(r.max_rel_deviation));
                }
                s
            }
            Format::Json => to_json(&json!({ "seed": seed, "tolerance": ORACLE_TOLERANCE, "suite": summary }))?,
        };
        rows = all;
    }

    let worst = rows.iter().max_by(|a, b| a.rel_deviation.total_cmp(&b.rel_deviation));
    let max_dev = worst.map_or(0.0, |w| w.rel_deviation);
    let mut outcome = Outcome::ok(body);
    outcome.note = Some(format!("max relative deviation {max_dev:e} (tolerance {ORACLE_TOLERANCE:e})"));
    if let Some(w) = worst.filter(|w| !(w.rel_deviation <= ORACLE_TOLERANCE)) {
        let p = w.params;
        outcome.code = EXIT_VALIDATION;
        outcome.note = Some(format!(
            "deviation {:e} exceeds {ORACLE_TOLERANCE:e} at atoms={} rabi={} detuning={} dipole={} kx={} (analytic {}, oracle {})",
            w.rel_deviation, p.n_atoms, p.rabi, p.detuning, p.dipole_shift, w.kx, w.analytic, w.oracle
        ));
    }
    Ok(outcome)
}

fn cmd_scan(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let p = cfg.params()?;
    let format = cfg.format.unwrap_or(Format::Json);
    let true_pos = required("true-pos", cfg.true_pos)?;
    let noise = cfg.noise.unwrap_or(0.0);
    let seed = cfg.seed.unwrap_or(0);
    let phases = localization::scan_phases(&p, cfg.grid_or(DEFAULT_GRID_POINTS));
    let pi = std::f64::consts::PI;

    let mut positions = vec![true_pos * pi];
    positions.extend(cfg.second_pos.map(|x| x * pi));
    let trace = localization::synthesize_multi_scan(&p, &positions, &phases, noise, seed)?;
    if let Some(path) = &cfg.trace {
        emit(&csv_buffer(|w| trace.write_csv(w)), Some(path), &mut std::io::sink())
            .map_err(|e| Failure::config(e.to_string()))?;
    }

    if cfg.second_pos.is_some() {
        let distance = localization::two_sample_distance(&trace, &p)?;
        return Ok(Outcome::ok(match format {
            Format::Csv => format!("distance,distance_over_pi\n{},{}\n", fmt_float(distance), fmt_float(distance / pi)),
            Format::Json => to_json(&json!({ "distance": distance, "distance_over_pi": distance / pi }))?,
        }));
    }

    let mut est: PositionEstimate = localization::scan_dip_estimate(&trace, &p)?;
    let mut table = None;
    if let Some(candidates) = &cfg.candidates {
        let inferred = localization::infer_atom_number(est.width, &p, candidates, DEFAULT_GRID_POINTS)?;
        est.auxiliary = Some(f64::from(inferred.n_atoms));
        table = Some(inferred.table);
    }
    Ok(Outcome::ok(match format {
        Format::Csv => format!(
            "kx_hat,kx_hat_over_pi,uncertainty,width,auxiliary\n{},{},{},{},{}\n",
            fmt_float(est.kx_hat),
            fmt_float(est.kx_hat / pi),
            fmt_float(est.uncertainty),
            fmt_float(est.width),
            opt_float(est.auxiliary)
        ),
        Format::Json => to_json(&json!({
            "estimate": est,
            "kx_hat_over_pi": est.kx_hat / pi,
            "width_table": table,
        }))?,
    }))
}

fn cmd_locate(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let p = cfg.params()?;
    let format = cfg.format.unwrap_or(Format::Json);
    let i_measured = required("intensity", cfg.intensity)?;
    let sigma = required("sigma", cfg.sigma)?;
    let prof = profile::evaluate_profile(&p, cfg.grid_or(DEFAULT_GRID_POINTS))?;
    let set = localization::single_pass_candidates(i_measured, sigma, &prof)?;

    let timescale = match cfg.flight_time {
        Some(t) => {
            let gamma = required("gamma-si", cfg.gamma_si)?;
            Some(localization::timescale_check(&p.with_gamma(gamma), t)?)
        }
        None => None,
    };
    let mut outcome = Outcome::ok(match format {
        Format::Csv => csv_buffer(|w| set.write_csv(w)),
        Format::Json => to_json(&json!({ "candidates": set, "measure": set.measure(), "timescale": timescale }))?,
    });
    outcome.note = timescale.map(|t| {
        format!("steady-state time {:e} s, flight/steady ratio {:.3e}: {}", t.tau_steady, t.ratio, if t.pass { "pass" } else { "fail" })
    });
    Ok(outcome)
}

fn cmd_coeffs(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let format = cfg.format.unwrap_or(Format::Csv);
    let g = PairGeometry::new(required("kr", cfg.kr)?, cfg.xi.unwrap_or(0.0))?;
    let gamma = 1.0;
    let rows = [
        ("chi", collective::chi_pair(g, gamma)?),
        ("omega", collective::omega_pair(g, gamma)?),
        ("chi_expanded", collective::chi_pair_expanded(g, gamma)?),
        ("omega_expanded", collective::omega_pair_expanded(g, gamma)?),
        ("static_dd", collective::static_dd(g, gamma)?),
        ("averaged_dd", collective::averaged_dd(g.kr, gamma)?),
    ];
    Ok(Outcome::ok(match format {
        Format::Csv => {
            let mut s = String::from("quantity,value\n");
            for (k, v) in rows {
                let _ = writeln!(s, "{k},{}", fmt_float(v));
            }
            s
        }
        Format::Json => {
            let mut map = serde_json::Map::new();
            map.insert("kr".into(), json!(g.kr));
            map.insert("xi".into(), json!(g.xi));
            for (k, v) in rows {
                map.insert(k.into(), json!(v));
            }
            to_json(&map)?
        }
    }))
}
