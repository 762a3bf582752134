//! Command-line front end.
//!
//! Every command evaluates a sweep over `σ_y × h`, computes the sweep
//! points in parallel and writes the artifacts afterwards in sweep order,
//! so output files and `index.json` are byte-identical across runs.
//!
//! Exit codes: 0 success, 2 input error, 3 verification failure.

mod model;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

pub use model::{ControllerDescriptor, ControllerSpec, Model};

use crate::error::{Error, Result};
use crate::glycolysis::{
    asymptotic_regimes, closed_form_tfs, lb_at_rhp_zero, GlycolysisParams, GlycolysisTFs, RegimeReport,
};
use crate::limits::{analyze_limits, peak_bound, weighted_rhs, LimitOptions, LimitReport};
use crate::looptf::{analyze_plant, frequency_response, log_grid, DEFAULT_CANCEL_TOL, MIN_POINTS_PER_DECADE};
use crate::numfmt::g15;
use crate::plantmodel::{is_internally_stable, realize_closed_loop, Channel};
use crate::ratcalc::{RationalTF, DEFAULT_AXIS_TOL};
use crate::simkit::{default_timing, step_response};
use crate::verify::{glycolysis_oracle_gap, run_all, VerifyConfig, VerifySummary};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_VERIFY: u8 = 3;
/// Environment variable holding the comparison tolerance.
pub const TOL_ENV: &str = "BUFFERLOOP_TOL";
const ORACLE_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(
    name = "bufferloop",
    version,
    about = "Frequency-domain analysis of buffer-feedback regulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-loop Bode data per sweep point.
    Bode(RunArgs),
    /// Step-response traces per sweep point.
    Step(RunArgs),
    /// Fundamental-limit report per sweep point.
    Limits(RunArgs),
    /// Case-study summary: closed forms, regimes and bounds.
    Glycolysis(RunArgs),
    /// Run the acceptance suite.
    Verify(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON model descriptor.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated σ_y values.
    #[arg(long = "sweep-sy", value_delimiter = ',', allow_hyphen_values = true)]
    pub sweep_sy: Option<Vec<f64>>,
    /// Comma-separated controller gains.
    #[arg(long = "sweep-h", value_delimiter = ',', allow_hyphen_values = true)]
    pub sweep_h: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1e-3)]
    pub wmin: f64,
    #[arg(long, default_value_t = 1e3)]
    pub wmax: f64,
    /// Points per decade.
    #[arg(long, default_value_t = 60)]
    pub ppd: usize,
    /// Simulation step; chosen from the spectrum when absent.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Simulation horizon; chosen from the spectrum when absent.
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    /// Disturbance channel: dy, dz (or dzK), dx, db.
    #[arg(long, default_value = "dy")]
    pub channel: String,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub step: f64,
}

/// Resolved settings shared by all commands.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: Model,
    pub out: Option<PathBuf>,
    pub sweep_sy: Vec<f64>,
    pub sweep_h: Vec<f64>,
    pub grid: Vec<f64>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub channel: Channel,
    pub step: f64,
    pub limits: LimitOptions,
    pub verify: VerifyConfig,
}

fn tolerance_from_env() -> Result<Option<f64>> {
    match std::env::var(TOL_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<f64>() {
            Ok(t) if t > 0.0 && t.is_finite() => Ok(Some(t)),
            _ => Err(Error::InvalidParameter(format!(
                "{TOL_ENV} must be a positive number (got '{v}')"
            ))),
        },
    }
}

/// Drops repeated values, keeping first occurrences, so that every sweep
/// point names a distinct file.
fn dedup(values: Vec<f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(values.len());
    for v in values {
        if !out.iter().any(|&u| g15(u) == g15(v)) {
            out.push(v);
        }
    }
    out
}

impl RunConfig {
    pub fn from_args(a: &RunArgs, default_model: bool) -> Result<Self> {
        let model = match (&a.model, default_model) {
            (Some(path), _) => Model::load(path)?,
            (None, true) => Model::glycolysis(GlycolysisParams::default(), None)?,
            (None, false) => return Err(Error::InvalidParameter("--model is required".into())),
        };
        if a.ppd < MIN_POINTS_PER_DECADE as usize {
            return Err(Error::InvalidParameter(format!(
                "--ppd must be at least {MIN_POINTS_PER_DECADE} (got {})",
                a.ppd
            )));
        }
        let grid = log_grid(a.wmin, a.wmax, a.ppd)?;
        for (name, v) in [("--dt", a.dt), ("--T", a.horizon)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidParameter(format!("{name} must be positive (got {v})")));
                }
            }
        }
        if !a.step.is_finite() {
            return Err(Error::InvalidParameter("--step must be finite".into()));
        }
        let channel: Channel = a.channel.parse()?;
        if let Channel::Dz(k) = channel {
            if k >= model.plant.n_intermediates() {
                return Err(Error::InvalidParameter(format!("model has no channel {channel}")));
            }
        }
        let sweep_sy = dedup(a.sweep_sy.clone().unwrap_or_else(|| vec![model.sigma_y()]));
        let sweep_h = dedup(a.sweep_h.clone().unwrap_or_else(|| vec![model.controller.nominal_h()]));
        if sweep_sy.is_empty() || sweep_h.is_empty() {
            return Err(Error::InvalidParameter("sweep lists must not be empty".into()));
        }
        if sweep_sy.iter().chain(&sweep_h).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("sweep values must be finite".into()));
        }
        if sweep_sy.iter().any(|&s| s < 0.0) {
            return Err(Error::InvalidParameter("sigma_y must be non-negative".into()));
        }
        let (limits, verify) = match tolerance_from_env()? {
            Some(t) => {
                let verify = VerifyConfig::with_tolerance(t)?;
                let limits = LimitOptions {
                    compare_tol: t,
                    quad_tol: verify.quad_tol,
                    ..LimitOptions::default()
                };
                (limits, verify)
            }
            None => (LimitOptions::default(), VerifyConfig::default()),
        };
        Ok(RunConfig {
            model,
            out: a.out.clone(),
            sweep_sy,
            sweep_h,
            grid,
            dt: a.dt,
            horizon: a.horizon,
            channel,
            step: a.step,
            limits,
            verify,
        })
    }

    /// Sweep points in output order: `σ_y` outer, `h` inner.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.sweep_sy
            .iter()
            .flat_map(|&sy| self.sweep_h.iter().map(move |&h| (sy, h)))
            .collect()
    }

    fn out_dir(&self) -> Result<&Path> {
        let dir = self
            .out
            .as_deref()
            .ok_or_else(|| Error::InvalidParameter("--out is required".into()))?;
        fs::create_dir_all(dir)
            .map_err(|e| Error::InvalidParameter(format!("cannot create {}: {e}", dir.display())))?;
        Ok(dir)
    }
}

fn point_name(prefix: &str, sy: f64, h: f64, ext: &str) -> String {
    format!("{prefix}_sy{}_h{}.{ext}", g15(sy), g15(h))
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::NumericalFailure(format!("JSON encoding: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Writes `(name, contents)` pairs and then `index.json`.
fn write_outputs<T: Serialize>(dir: &Path, files: &[(String, String)], index: &T) -> Result<()> {
    let io = |path: &Path, e: std::io::Error| Error::InvalidParameter(format!("cannot write {}: {e}", path.display()));
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| io(&path, e))?;
    }
    let path = dir.join("index.json");
    fs::write(&path, to_json(index)?).map_err(|e| io(&path, e))
}

fn stable(p: &crate::plantmodel::LinearPlant, c_h: &RationalTF) -> Result<bool> {
    Ok(is_internally_stable(&realize_closed_loop(p, c_h)?, DEFAULT_AXIS_TOL)?.0)
}

#[derive(Clone, Debug, Serialize)]
pub struct Index<E> {
    pub command: &'static str,
    pub files: Vec<E>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BodeEntry {
    pub file: String,
    pub sigma_y: f64,
    pub h: f64,
    pub channel: String,
    pub stable: bool,
    pub peak_magnitude: f64,
    pub peak_mag_db: f64,
    pub peak_omega: f64,
}

pub fn cmd_bode(cfg: &RunConfig) -> Result<u8> {
    let dir = cfg.out_dir()?;
    let results: Vec<Result<(String, BodeEntry)>> = cfg
        .points()
        .par_iter()
        .map(|&(sy, h)| {
            let (p, c_h) = cfg.model.at(sy, h)?;
            let (_, _, loops) = analyze_plant(&p, &c_h, DEFAULT_CANCEL_TOL)?;
            let fr = frequency_response(loops.closed_loop(cfg.channel)?, &cfg.grid)?;
            let mut csv = String::from("omega,mag_db,phase_deg\n");
            for r in &fr.rows {
                csv.push_str(&format!("{},{},{}\n", g15(r.omega), g15(r.mag_db), g15(r.phase_deg)));
            }
            let peak = fr.peak().expect("grid is never empty");
            let entry = BodeEntry {
                file: point_name("bode", sy, h, "csv"),
                sigma_y: sy,
                h,
                channel: cfg.channel.to_string(),
                stable: stable(&p, &c_h)?,
                peak_magnitude: 10f64.powf(peak.mag_db / 20.0),
                peak_mag_db: peak.mag_db,
                peak_omega: peak.omega,
            };
            Ok((csv, entry))
        })
        .collect();
    let mut files = Vec::new();
    let mut entries = Vec::new();
    for r in results {
        let (csv, e) = r?;
        files.push((e.file.clone(), csv));
        entries.push(e);
    }
    write_outputs(
        dir,
        &files,
        &Index {
            command: "bode",
            files: entries,
        },
    )?;
    Ok(EXIT_OK)
}

#[derive(Clone, Debug, Serialize)]
pub struct StepEntry {
    pub file: String,
    pub sigma_y: f64,
    pub h: f64,
    pub channel: String,
    pub step: f64,
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub stable: bool,
    pub truncated: bool,
    pub final_value: f64,
    pub peak_to_peak_after_1: f64,
}

pub fn cmd_step(cfg: &RunConfig) -> Result<u8> {
    let dir = cfg.out_dir()?;
    let results: Vec<Result<(String, StepEntry)>> = cfg
        .points()
        .par_iter()
        .map(|&(sy, h)| {
            let (p, c_h) = cfg.model.at(sy, h)?;
            let ss = realize_closed_loop(&p, &c_h)?;
            let (dt0, t0) = default_timing(&ss)?;
            let dt = cfg.dt.unwrap_or(dt0);
            let horizon = cfg.horizon.unwrap_or(t0);
            let trace = step_response(&ss, cfg.channel, cfg.step, dt, horizon)?;
            let mut csv = Vec::new();
            trace
                .write_csv(&mut csv)
                .map_err(|e| Error::NumericalFailure(format!("CSV encoding: {e}")))?;
            let entry = StepEntry {
                file: point_name("step", sy, h, "csv"),
                sigma_y: sy,
                h,
                channel: cfg.channel.to_string(),
                step: cfg.step,
                dt,
                horizon,
                stable: is_internally_stable(&ss, DEFAULT_AXIS_TOL)?.0,
                truncated: trace.truncated,
                final_value: trace.final_value(),
                peak_to_peak_after_1: trace.peak_to_peak_after(1.0),
            };
            Ok((String::from_utf8(csv).expect("ASCII output"), entry))
        })
        .collect();
    let mut files = Vec::new();
    let mut entries = Vec::new();
    for r in results {
        let (csv, e) = r?;
        files.push((e.file.clone(), csv));
        entries.push(e);
    }
    write_outputs(
        dir,
        &files,
        &Index {
            command: "step",
            files: entries,
        },
    )?;
    Ok(EXIT_OK)
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitsFile {
    pub sigma_y: f64,
    pub h: f64,
    pub controller: RationalTF,
    pub all_passed: bool,
    pub report: LimitReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitsEntry {
    pub file: String,
    pub sigma_y: f64,
    pub h: f64,
    pub stable: bool,
    pub all_passed: bool,
}

pub fn cmd_limits(cfg: &RunConfig) -> Result<u8> {
    let dir = cfg.out_dir()?;
    let results: Vec<Result<(String, LimitsEntry)>> = cfg
        .points()
        .par_iter()
        .map(|&(sy, h)| {
            let (p, c_h) = cfg.model.at(sy, h)?;
            let report = analyze_limits(&p, &c_h, &RationalTF::one(), &cfg.limits)?;
            let all_passed = report.all_passed();
            let entry = LimitsEntry {
                file: point_name("limits", sy, h, "json"),
                sigma_y: sy,
                h,
                stable: report.hypothesis_flags.closed_loop_stable,
                all_passed,
            };
            let body = to_json(&LimitsFile {
                sigma_y: sy,
                h,
                controller: c_h,
                all_passed,
                report,
            })?;
            Ok((body, entry))
        })
        .collect();
    let mut files = Vec::new();
    let mut entries = Vec::new();
    for r in results {
        let (body, e) = r?;
        files.push((e.file.clone(), body));
        entries.push(e);
    }
    let passed = entries.iter().all(|e| e.all_passed);
    for e in entries.iter().filter(|e| !e.all_passed) {
        eprintln!("limit comparison failed: {}", e.file);
    }
    write_outputs(
        dir,
        &files,
        &Index {
            command: "limits",
            files: entries,
        },
    )?;
    Ok(if passed { EXIT_OK } else { EXIT_VERIFY })
}

#[derive(Clone, Debug, Serialize)]
pub struct GlycolysisPoint {
    pub sigma_y: f64,
    pub h: f64,
    pub stable: bool,
    pub lb_at_z: f64,
    pub weighted_rhs: f64,
    pub peak_bound: f64,
    /// Largest relative gap between closed forms and the generic assembly.
    pub oracle_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GlycolysisSummary {
    pub params: GlycolysisParams,
    pub z_rhp: f64,
    pub transfer_functions: GlycolysisTFs,
    pub regimes: RegimeReport,
    pub points: Vec<GlycolysisPoint>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FileEntry {
    pub file: String,
}

pub fn cmd_glycolysis(cfg: &RunConfig) -> Result<u8> {
    let dir = cfg.out_dir()?;
    let base = cfg
        .model
        .glycolysis
        .ok_or_else(|| Error::InvalidParameter("the glycolysis command needs a glycolysis model".into()))?;
    let points: Vec<Result<GlycolysisPoint>> = cfg
        .points()
        .par_iter()
        .map(|&(sy, h)| {
            let gp = base.with_sigma_y(sy).with_h(h);
            let (p, c_h) = cfg.model.at(sy, h)?;
            let (_, _, loops) = analyze_plant(&p, &c_h, DEFAULT_CANCEL_TOL)?;
            let poles = loops.l.poles()?.rhp();
            let z = gp.z_rhp();
            Ok(GlycolysisPoint {
                sigma_y: sy,
                h,
                stable: stable(&p, &c_h)?,
                lb_at_z: lb_at_rhp_zero(&gp)?,
                weighted_rhs: weighted_rhs(&loops.lb, z, &poles)?,
                peak_bound: peak_bound(&RationalTF::one(), &loops.lb, z, &poles)?,
                oracle_gap: if matches!(cfg.model.controller, ControllerSpec::Proportional(_)) {
                    glycolysis_oracle_gap(&gp)?
                } else {
                    0.0
                },
            })
        })
        .collect();
    let points = points.into_iter().collect::<Result<Vec<_>>>()?;
    let ok = points.iter().all(|p| p.oracle_gap <= ORACLE_TOL);
    let summary = GlycolysisSummary {
        params: base,
        z_rhp: base.z_rhp(),
        transfer_functions: closed_form_tfs(&base)?,
        regimes: asymptotic_regimes(&base),
        points,
    };
    let name = "glycolysis.json".to_string();
    write_outputs(
        dir,
        &[(name.clone(), to_json(&summary)?)],
        &Index {
            command: "glycolysis",
            files: vec![FileEntry { file: name }],
        },
    )?;
    Ok(if ok { EXIT_OK } else { EXIT_VERIFY })
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<VerifySummary> {
    let summary = run_all(&cfg.verify);
    if let Some(dir) = cfg.out.as_deref() {
        fs::create_dir_all(dir)
            .map_err(|e| Error::InvalidParameter(format!("cannot create {}: {e}", dir.display())))?;
        let name = "verify.json".to_string();
        write_outputs(
            dir,
            &[(name.clone(), to_json(&summary)?)],
            &Index {
                command: "verify",
                files: vec![FileEntry { file: name }],
            },
        )?;
    }
    Ok(summary)
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let (args, default_model) = match &cli.command {
        Command::Glycolysis(a) | Command::Verify(a) => (a, true),
        Command::Bode(a) | Command::Step(a) | Command::Limits(a) => (a, false),
    };
    let cfg = match RunConfig::from_args(args, default_model) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
    };
    let outcome = match cli.command {
        Command::Bode(_) => cmd_bode(&cfg),
        Command::Step(_) => cmd_step(&cfg),
        Command::Limits(_) => cmd_limits(&cfg),
        Command::Glycolysis(_) => cmd_glycolysis(&cfg),
        Command::Verify(_) => cmd_verify(&cfg).map(|s| {
            for c in &s.criteria {
                println!("{}", c.line());
            }
            if s.passed {
                EXIT_OK
            } else {
                EXIT_VERIFY
            }
        }),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

pub fn main_exit() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_names_use_short_numbers() {
        assert_eq!(point_name("step", 4.0, 0.8, "csv"), "step_sy4_h0.8.csv");
        assert_eq!(point_name("bode", 0.0, 1.5, "csv"), "bode_sy0_h1.5.csv");
    }

    #[test]
    fn sweep_order_is_sigma_major() {
        let args = RunArgs {
            model: None,
            out: None,
            sweep_sy: Some(vec![0.0, 4.0]),
            sweep_h: Some(vec![0.5, 1.0]),
            wmin: 1e-3,
            wmax: 1e3,
            ppd: 60,
            dt: None,
            horizon: None,
            channel: "dy".into(),
            step: 1.0,
        };
        let cfg = RunConfig::from_args(&args, true).unwrap();
        assert_eq!(cfg.points(), vec![(0.0, 0.5), (0.0, 1.0), (4.0, 0.5), (4.0, 1.0)]);
        assert_eq!(cfg.grid.len(), 361);
        let bad = RunArgs {
            ppd: 10,
            ..args.clone()
        };
        assert!(RunConfig::from_args(&bad, true).is_err());
        let bad = RunArgs {
            channel: "dz2".into(),
            ..args.clone()
        };
        assert!(RunConfig::from_args(&bad, true).is_err());
        assert!(RunConfig::from_args(&args, false).is_err());
    }
}
