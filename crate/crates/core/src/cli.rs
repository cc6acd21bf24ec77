//! The `smilewa` command line.
//!
//! Every failure prints one line `code=<name> <message>` on stderr and exits
//! with the code of its kind; see [`ExitKind`].

use crate::calibration::{calibrate_l_interp, calibrate_wa_fit, CalibrationConfig, FitFamily, PillarSet};
use crate::delta_map::{check_sigma_delta_to_k, check_sigma_wa, l_eval, tilde_delta, to_strike, MembershipReport};
use crate::diagnostics::{durrleman_check, fukasawa_check, wing_report, DurrlemanReport, FukasawaReport, WingReport};
use crate::error::Error;
use crate::smile::{DeltaSmile, GridSpec, StrikeSmile};
use crate::svi::{ssvi_r, ssvi_tilde, svi_rejected_root, svi_to_delta, tilde_delta_of, SviModel};
use crate::wa_param::ParamsFile;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Delta-space implied volatility smiles: conversion, checks, calibration.
#[derive(Debug, Parser)]
#[command(name = "smilewa", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Write the `delta,k,sigma_total` grid of a smile.
    Convert(CliConfig),
    /// Run the arbitrage diagnostics and write a JSON report.
    Check(CliConfig),
    /// Calibrate pillars from a CSV file and write the grid and a report.
    Calibrate(CliConfig),
    /// Switch point and wing slopes of an SVI or SSVI model.
    Svi(CliConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct CliConfig {
    /// Parameter JSON, SVI JSON or pillar CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Defaults to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Maturity in years, used to scale pillar volatilities.
    #[arg(long, default_value_t = 1.0)]
    pub maturity: f64,
    #[arg(long, default_value_t = 401)]
    pub grid_n: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Distance of the wing probes from 0 and 1 in delta.
    #[arg(long, default_value_t = 1e-6)]
    pub probe_eps: f64,
    /// `l_interp` or a family to fit: flat, bounded_skew, w_shape, spline_params.
    #[arg(long, default_value = "l_interp")]
    pub family: String,
    /// Require weak-arbitrage freedom, not just convertibility.
    #[arg(long)]
    pub wa_strict: bool,
}

impl CliConfig {
    fn check(&self) -> Result<(), Failure> {
        if self.grid_n < 3 {
            return Err(Failure::new(ExitKind::Usage, format!("--grid-n must be at least 3, got {}", self.grid_n)));
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return Err(Failure::new(ExitKind::Usage, format!("--maturity must be positive, got {}", self.maturity)));
        }
        if !(self.probe_eps > 0.0 && self.probe_eps < 0.5) {
            return Err(Failure::new(ExitKind::Usage, format!("--probe-eps must lie in (0, 1/2), got {}", self.probe_eps)));
        }
        Ok(())
    }

    fn calibration(&self) -> CalibrationConfig {
        CalibrationConfig { seed: self.seed, wa_strict: self.wa_strict, ..Default::default() }
    }
}

/// Failure kinds and their exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    /// Not convertible / not weak-arbitrage-free, or a failed check.
    Membership,
    Io,
    Parse,
    Validation,
    Domain,
    Data,
    Constraint,
    Optimization,
    NoSolution,
    Numerical,
    PriceBounds,
    SingularExpansion,
    Usage,
}

impl ExitKind {
    pub fn code(self) -> i32 {
        match self {
            ExitKind::Membership => 2,
            ExitKind::Io | ExitKind::Parse => 3,
            ExitKind::Validation => 4,
            ExitKind::Domain => 5,
            ExitKind::Data => 6,
            ExitKind::Constraint => 7,
            ExitKind::Optimization => 8,
            ExitKind::NoSolution => 9,
            ExitKind::Numerical => 10,
            ExitKind::PriceBounds => 11,
            ExitKind::SingularExpansion => 12,
            ExitKind::Usage => 64,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ExitKind::Membership => "membership",
            ExitKind::Io => "io",
            ExitKind::Parse => "parse",
            ExitKind::Validation => "validation",
            ExitKind::Domain => "domain",
            ExitKind::Data => "data",
            ExitKind::Constraint => "constraint",
            ExitKind::Optimization => "optimization",
            ExitKind::NoSolution => "no_solution",
            ExitKind::Numerical => "numerical",
            ExitKind::PriceBounds => "price_bounds",
            ExitKind::SingularExpansion => "singular_expansion",
            ExitKind::Usage => "usage",
        }
    }
}

#[derive(Debug)]
struct Failure {
    kind: ExitKind,
    message: String,
}

impl Failure {
    fn new(kind: ExitKind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }

    fn parse(path: &Path, e: Error) -> Self {
        let msg = match e {
            Error::Data(m) => m,
            other => other.to_string(),
        };
        Self::new(ExitKind::Parse, format!("{}: {msg}", path.display()))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::Membership(_) => ExitKind::Membership,
            Error::Validation(_) => ExitKind::Validation,
            Error::Domain(_) => ExitKind::Domain,
            Error::Data(_) => ExitKind::Data,
            Error::ConstraintViolation(_) => ExitKind::Constraint,
            Error::OptimizationFailure(_) => ExitKind::Optimization,
            Error::NoSolution(_) | Error::NonPositiveVol(_) => ExitKind::NoSolution,
            Error::Convergence(_) | Error::Quadrature(_) => ExitKind::Numerical,
            Error::PriceOutOfBounds { .. } => ExitKind::PriceBounds,
            Error::SingularExpansion(_) => ExitKind::SingularExpansion,
        };
        Self::new(kind, e.to_string())
    }
}

/// What an input file holds.
enum Source {
    Params(ParamsFile),
    Svi(SviModel),
    Pillars(PillarSet),
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::new(ExitKind::Io, format!("{}: {e}", path.display())))
}

fn load(cfg: &CliConfig) -> Result<Source, Failure> {
    let text = read(&cfg.input)?;
    let trimmed = text.trim_start();
    if !trimmed.starts_with('{') {
        return PillarSet::from_csv(&text, cfg.maturity).map(Source::Pillars).map_err(|e| Failure::parse(&cfg.input, e));
    }
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Failure::new(ExitKind::Parse, format!("{}: {e}", cfg.input.display())))?;
    if value.get("svi").is_some() || value.get("ssvi").is_some() {
        SviModel::from_json(&text).map(Source::Svi).map_err(|e| Failure::parse(&cfg.input, e))
    } else {
        ParamsFile::from_json(&text).map(Source::Params).map_err(|e| Failure::parse(&cfg.input, e))
    }
}

fn delta_smile(source: &Source, cfg: &CliConfig) -> Result<DeltaSmile, Failure> {
    Ok(match source {
        Source::Params(f) => f.build()?.smile()?,
        Source::Svi(m) => svi_to_delta(m, &GridSpec::strike_check())?,
        Source::Pillars(p) => calibrate_l_interp(p, &cfg.calibration())?.smile,
    })
}

fn membership(smile: &DeltaSmile, cfg: &CliConfig) -> MembershipReport {
    let grid = GridSpec::delta_check(smile.domain_eps());
    if cfg.wa_strict {
        check_sigma_wa(smile, &grid)
    } else {
        check_sigma_delta_to_k(smile, &grid)
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::new(ExitKind::Io, format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports always serialize");
    s.push('\n');
    s
}

/// `delta,k,sigma_total` on `n` uniform deltas in `[1e-4, 1 − 1e-4]`.
#[derive(Debug, Serialize)]
struct Grid {
    delta: Vec<f64>,
    k: Vec<f64>,
    sigma_total: Vec<f64>,
}

fn grid(smile: &DeltaSmile, n: usize) -> Result<Grid, Failure> {
    let delta = GridSpec::uniform(n, 1e-4, 1.0 - 1e-4).points();
    let mut k = Vec::with_capacity(n);
    let mut sigma_total = Vec::with_capacity(n);
    for &d in &delta {
        let v = smile.eval(d);
        if !(v > 0.0 && v.is_finite()) {
            return Err(Failure::new(ExitKind::NoSolution, format!("no volatility at delta={d}")));
        }
        k.push(-l_eval(smile, d)?);
        sigma_total.push(v);
    }
    Ok(Grid { delta, k, sigma_total })
}

fn render_grid(g: &Grid, format: Format) -> String {
    match format {
        Format::Json => to_json(g),
        Format::Csv => {
            let mut s = String::from("delta,k,sigma_total\n");
            for i in 0..g.delta.len() {
                let _ = writeln!(s, "{},{},{}", g.delta[i], g.k[i], g.sigma_total[i]);
            }
            s
        }
    }
}

fn convert(cfg: &CliConfig) -> Result<(), Failure> {
    let source = load(cfg)?;
    let smile = delta_smile(&source, cfg)?;
    membership(&smile, cfg).into_result()?;
    let g = grid(&smile, cfg.grid_n)?;
    write_out(cfg.output.as_deref(), &render_grid(&g, cfg.format))
}

#[derive(Debug, Serialize)]
struct CheckReport {
    passed: bool,
    tilde_delta: Option<f64>,
    membership: Option<MembershipReport>,
    fukasawa: Option<FukasawaReport>,
    durrleman: Option<DurrlemanReport>,
    /// Left (δ → 1) then right (δ → 0) wing.
    wings: Option<(WingReport, WingReport)>,
    errors: Vec<String>,
}

fn check(cfg: &CliConfig) -> Result<(), Failure> {
    let source = load(cfg)?;
    let mut r = CheckReport {
        passed: false,
        tilde_delta: None,
        membership: None,
        fukasawa: None,
        durrleman: None,
        wings: None,
        errors: Vec::new(),
    };
    let strike_grid = GridSpec::strike_check();
    let mut strike: Option<StrikeSmile> = match &source {
        Source::Svi(m) => Some(m.strike_smile()),
        _ => None,
    };
    match delta_smile(&source, cfg) {
        Ok(smile) => {
            let m = membership(&smile, cfg);
            r.tilde_delta = tilde_delta(&smile).ok();
            if m.passed && strike.is_none() {
                match to_strike(&smile) {
                    Ok(s) => strike = Some(s),
                    Err(e) => r.errors.push(e.to_string()),
                }
            }
            match wing_report(&smile, cfg.probe_eps) {
                Ok(w) => r.wings = Some(w),
                Err(e) => r.errors.push(e.to_string()),
            }
            r.membership = Some(m);
        }
        Err(f) if f.kind == ExitKind::Membership => r.errors.push(f.message),
        Err(f) => return Err(f),
    }
    if let Source::Svi(m) = &source {
        r.tilde_delta = r.tilde_delta.or(tilde_delta_of(m).ok());
    }
    if let Some(s) = &strike {
        r.fukasawa = Some(fukasawa_check(s, &strike_grid));
        r.durrleman = Some(durrleman_check(s, &strike_grid));
    }
    r.passed = r.errors.is_empty()
        && r.membership.as_ref().is_some_and(|m| m.passed)
        && r.fukasawa.as_ref().is_some_and(|f| f.passed);
    write_out(cfg.output.as_deref(), &to_json(&r))?;
    if r.passed {
        Ok(())
    } else {
        Err(Failure::new(ExitKind::Membership, "weak arbitrage check failed; see the report"))
    }
}

#[derive(Debug, Serialize)]
struct CalibrationOutput<'a> {
    grid: &'a Grid,
    report: crate::calibration::CalibrationSummary,
}

fn calibrate(cfg: &CliConfig) -> Result<(), Failure> {
    let Source::Pillars(p) = load(cfg)? else {
        return Err(Failure::new(ExitKind::Usage, "calibrate needs a pillar CSV"));
    };
    let ccfg = cfg.calibration();
    let result = if cfg.family == "l_interp" {
        calibrate_l_interp(&p, &ccfg)?
    } else {
        let family: FitFamily = cfg.family.parse().map_err(|e: Error| Failure::new(ExitKind::Usage, e.to_string()))?;
        calibrate_wa_fit(&p, family, &ccfg)?
    };
    log::info!("calibrated {} pillars, rms residual {:.3e}", result.residuals.len(), result.rms());
    let g = grid(&result.smile, cfg.grid_n)?;
    let summary = result.summary();
    match (cfg.format, &cfg.output) {
        (Format::Json, out) => write_out(out.as_deref(), &to_json(&CalibrationOutput { grid: &g, report: summary })),
        (Format::Csv, Some(out)) => {
            write_out(Some(out), &render_grid(&g, Format::Csv))?;
            write_out(Some(&report_path(out)), &to_json(&summary))
        }
        (Format::Csv, None) => {
            log::warn!("no --output given; the calibration report is only written next to an output file");
            write_out(None, &render_grid(&g, Format::Csv))
        }
    }
}

/// `out.csv` → `out.report.json`.
pub fn report_path(out: &Path) -> PathBuf {
    out.with_extension("report.json")
}

#[derive(Debug, Serialize)]
struct SviSummary {
    tilde_k: f64,
    tilde_delta: f64,
    /// `b(1 − ρ)` and `b(1 + ρ)`.
    wing_slopes: (f64, f64),
    #[serde(skip_serializing_if = "Option::is_none")]
    rejected_root: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ssvi_r: Option<f64>,
}

fn svi(cfg: &CliConfig) -> Result<(), Failure> {
    let Source::Svi(model) = load(cfg)? else {
        return Err(Failure::new(ExitKind::Usage, "svi needs an SVI or SSVI JSON file"));
    };
    model.check()?;
    let svi = model.as_svi();
    let (tilde_k, tilde_delta, r) = match &model {
        SviModel::Ssvi(p) => {
            let (k, d) = ssvi_tilde(p)?;
            (k, d, Some(ssvi_r(p)))
        }
        SviModel::Svi(_) => (model.tilde_k()?, tilde_delta_of(&model)?, None),
    };
    let out = SviSummary { tilde_k, tilde_delta, wing_slopes: svi.wing_slopes(), rejected_root: svi_rejected_root(&svi), ssvi_r: r };
    write_out(cfg.output.as_deref(), &to_json(&out))
}

fn run_command(cmd: &Command) -> Result<(), Failure> {
    let (cfg, f): (&CliConfig, fn(&CliConfig) -> Result<(), Failure>) = match cmd {
        Command::Convert(c) => (c, convert),
        Command::Check(c) => (c, check),
        Command::Calibrate(c) => (c, calibrate),
        Command::Svi(c) => (c, svi),
    };
    cfg.check()?;
    f(cfg)
}

fn finish(r: Result<(), Failure>) -> i32 {
    match r {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("code={} {}", f.kind.name(), f.message);
            f.kind.code()
        }
    }
}

pub fn cmd_convert(cfg: &CliConfig) -> i32 {
    finish(cfg.check().and_then(|_| convert(cfg)))
}

pub fn cmd_check(cfg: &CliConfig) -> i32 {
    finish(cfg.check().and_then(|_| check(cfg)))
}

pub fn cmd_calibrate(cfg: &CliConfig) -> i32 {
    finish(cfg.check().and_then(|_| calibrate(cfg)))
}

pub fn cmd_svi(cfg: &CliConfig) -> i32 {
    finish(cfg.check().and_then(|_| svi(cfg)))
}

/// Parses `args`, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            // clap's own exit code 2 would collide with a failed check
            eprintln!("code=usage {}", e.to_string().trim_end());
            return ExitKind::Usage.code();
        }
    };
    finish(run_command(&cli.command))
}

/// Entry point of the binary; logging follows `SMILEWA_LOG`.
pub fn main_entry() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("SMILEWA_LOG", "warn")).try_init();
    run(std::env::args_os())
}
