//! Batch experiment runner behind the `pe-growth` binary.
//!
//! Every subcommand reads an [`ExperimentConfig`] (JSON, `"schema": "1"`),
//! writes `summary.json` plus one CSV file into the output directory and
//! returns an [`ExitStatus`]. Floats in CSV files are printed with 17
//! significant digits. Outputs depend only on the config bytes and the seed,
//! never on `--jobs`.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::control::{
    acc_certificate, coefficient_inequalities, AccCertificate, CoefficientReport, TraceShift,
};
use crate::error::Error;
use crate::lie::{
    check_larc, check_larc0, check_plarc, inclusion_chain_audit, ChainReport, RankCertificate,
    DEFAULT_PLARC_SAMPLES,
};
use crate::matcore::{opnorm, Matrix, MatrixJson};
use crate::projective::{
    audit_forward_invariance, invariant_control_set_d2, steering_trials, ControlSetOutcome,
    InvarianceAudit, SteeringSummary, DEFAULT_RESOLUTION,
};
use crate::rates::{
    delta_quantities, duality_check, grid_duality, monodromy, rc_estimate, rd_estimate,
    search_estimate, DeltaReport, FeedbackSystem, KGrid, Objective, RateEstimate, SearchBudget,
    SignalFamily, DUALITY_TOL,
};
use crate::signals::{validate_pe, PESignal, SignalClass};
use crate::spinchk::{
    bordered_decomposition, charpoly_even_decomp, random_spin91, spin91_residual,
    symmetry_residual, MEMBERSHIP_TOL,
};

pub const SCHEMA: &str = "1";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "pe-growth",
    version,
    about = "Rank certificates, growth rates and duality checks for persistently excited linear systems"
)]
pub struct Args {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed from the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (0 picks the machine default).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Signal JSON (one object or an array) replacing the generated family.
    #[arg(long, global = true)]
    pub signal_file: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// LARC, LARC0 and PLARC certificates and the inclusion chain.
    #[command(name = "lie-check")]
    LieCheck,
    /// Companion-form certificate for a single-input pair.
    #[command(name = "acc-cert")]
    AccCert,
    /// Searched worst-case rates of convergence and divergence.
    #[command(name = "rates")]
    Rates,
    /// Time-reversal duality on a signal family.
    #[command(name = "duality")]
    Duality,
    /// Invariant control set of a planar system.
    #[command(name = "invariant-set")]
    InvariantSet,
    /// Seeded spin(9,1) membership and spectral audit.
    #[command(name = "spin-audit")]
    SpinAudit {
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Per-gain duality of the worst-case rates over a grid of gains.
    #[command(name = "theorem5p1-grid")]
    Theorem5p1Grid,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::LieCheck => "lie-check",
            Command::AccCert => "acc-cert",
            Command::Rates => "rates",
            Command::Duality => "duality",
            Command::InvariantSet => "invariant-set",
            Command::SpinAudit { .. } => "spin-audit",
            Command::Theorem5p1Grid => "theorem5p1-grid",
        }
    }
}

/// Contents of the `--config` file. Relative paths are resolved against the
/// directory holding the config.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    /// When present, must name the subcommand being run.
    pub subcommand: Option<String>,
    #[serde(rename = "A")]
    pub a: Option<MatrixJson>,
    #[serde(rename = "B")]
    pub b: Option<MatrixJson>,
    #[serde(rename = "K")]
    pub k: Option<MatrixJson>,
    /// JSON file holding `{"A": …, "B": …}`.
    pub pair_file: Option<PathBuf>,
    /// JSON file holding a single matrix.
    pub k_file: Option<PathBuf>,
    pub k_grid: Option<KGrid>,
    #[serde(rename = "T")]
    pub t: Option<f64>,
    pub mu: Option<f64>,
    pub family: Option<SearchBudget>,
    pub signal_file: Option<PathBuf>,
    pub seed: Option<u64>,
    pub lambda: Option<f64>,
    pub plarc_samples: Option<usize>,
    pub trace_shift: Option<TraceShift>,
    pub resolution: Option<usize>,
    pub audit_points: Option<usize>,
    pub audit_signals: Option<usize>,
    pub audit_horizon: Option<f64>,
    pub steer_targets: Option<usize>,
    pub steer_dt: Option<f64>,
    pub seeds: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairJson {
    #[serde(rename = "A")]
    a: MatrixJson,
    #[serde(rename = "B")]
    b: MatrixJson,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SignalFileJson {
    One(PESignal),
    Many(Vec<PESignal>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    ConfigError,
    Numerical,
    Violation,
}

impl ExitStatus {
    pub fn code(self) -> u8 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::ConfigError => 2,
            ExitStatus::Numerical => 3,
            ExitStatus::Violation => 4,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical diagnostic: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn status(&self) -> ExitStatus {
        match self {
            CliError::Config(_) => ExitStatus::ConfigError,
            CliError::Numerical(_) => ExitStatus::Numerical,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Shape(_)
            | Error::InvalidInput(_)
            | Error::Precondition(_)
            | Error::NotControllable { .. }
            | Error::Json(_)
            | Error::Io(_) => CliError::Config(e.to_string()),
            Error::EigenFailure(_)
            | Error::SvdFailure
            | Error::ClosureNotStabilized { .. }
            | Error::ConstructionNotAdmissible { .. }
            | Error::Steering(_)
            | Error::EmptyFamily
            | Error::Numerical(_) => CliError::Numerical(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn main_from_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&args) {
        Ok(status) => status.code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.status().code()
        }
    }
}

/// Provenance line shared by every summary.
#[derive(Clone, Debug, Serialize)]
pub struct RunInfo {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub config_sha256: String,
    pub seed: u64,
}

struct Context {
    cfg: ExperimentConfig,
    base: PathBuf,
    out: PathBuf,
    seed: u64,
    signal_file: Option<PathBuf>,
    info: RunInfo,
}

/// Runs the parsed command line. Artifacts are written even when a property
/// violation is reported.
pub fn run(args: &Args) -> CliResult<ExitStatus> {
    let (bytes, base) = match &args.config {
        Some(p) => (
            fs::read(p).map_err(|e| config_err(format!("{}: {e}", p.display())))?,
            p.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None => (Vec::new(), PathBuf::new()),
    };
    let cfg: ExperimentConfig = if args.config.is_some() {
        serde_json::from_slice(&bytes).map_err(config_err)?
    } else {
        ExperimentConfig {
            schema: SCHEMA.into(),
            ..Default::default()
        }
    };
    if cfg.schema != SCHEMA {
        return Err(config_err(format!(
            "unsupported schema {:?}, expected {SCHEMA:?}",
            cfg.schema
        )));
    }
    let name = args.command.name();
    if let Some(s) = &cfg.subcommand {
        if s != name {
            return Err(config_err(format!(
                "config is for {s:?} but {name:?} was requested"
            )));
        }
    }
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let info = RunInfo {
        tool: "pe-growth",
        version: VERSION,
        subcommand: name,
        config_sha256: hex::encode(Sha256::digest(&bytes)),
        seed,
    };
    eprintln!(
        "pe-growth {} {} config_sha256={} seed={}",
        info.version, name, info.config_sha256, seed
    );
    let signal_file = args
        .signal_file
        .clone()
        .or_else(|| cfg.signal_file.as_ref().map(|p| base.join(p)));
    let ctx = Context {
        cfg,
        base,
        out: args.out.clone(),
        seed,
        signal_file,
        info,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| config_err(format!("thread pool: {e}")))?;
    let command = args.command;
    pool.install(|| {
        fs::create_dir_all(&ctx.out)
            .map_err(|e| config_err(format!("{}: {e}", ctx.out.display())))?;
        match command {
            Command::LieCheck => lie_check(&ctx),
            Command::AccCert => acc_cert(&ctx),
            Command::Rates => rates(&ctx),
            Command::Duality => duality(&ctx),
            Command::InvariantSet => invariant_set(&ctx),
            Command::SpinAudit { seeds } => spin_audit(&ctx, seeds),
            Command::Theorem5p1Grid => gain_grid(&ctx),
        }
    })
}

impl Context {
    fn read_json<T: serde::de::DeserializeOwned>(&self, p: &Path) -> CliResult<T> {
        let path = self.base.join(p);
        let text = fs::read(&path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        serde_json::from_slice(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
    }

    fn pair(&self) -> CliResult<(Matrix, Matrix)> {
        let (a, b) = match (&self.cfg.pair_file, &self.cfg.a, &self.cfg.b) {
            (Some(p), None, None) => {
                let pair: PairJson = self.read_json(p)?;
                (pair.a, pair.b)
            }
            (None, Some(a), Some(b)) => (a.clone(), b.clone()),
            (Some(_), _, _) => return Err(config_err("give either pair_file or A and B")),
            _ => return Err(config_err("missing A and B")),
        };
        let a = Matrix::try_from(a)?;
        let b = Matrix::try_from(b)?;
        if a.nrows() != a.ncols() || b.nrows() != a.nrows() {
            return Err(config_err(format!(
                "A {:?} and B {:?} are inconsistent",
                a.shape(),
                b.shape()
            )));
        }
        Ok((a, b))
    }

    fn gain(&self, a: &Matrix, b: &Matrix) -> CliResult<Matrix> {
        let k = match (&self.cfg.k_file, &self.cfg.k) {
            (Some(p), None) => self.read_json::<MatrixJson>(p)?,
            (None, Some(k)) => k.clone(),
            (Some(_), Some(_)) => return Err(config_err("give either k_file or K")),
            (None, None) => return Err(config_err("missing K")),
        };
        let k = Matrix::try_from(k)?;
        if k.shape() != (b.ncols(), a.nrows()) {
            return Err(config_err(format!(
                "K must be {}x{}, got {:?}",
                b.ncols(),
                a.nrows(),
                k.shape()
            )));
        }
        Ok(k)
    }

    fn class(&self) -> CliResult<SignalClass> {
        match (self.cfg.t, self.cfg.mu) {
            (Some(t), Some(mu)) => Ok(SignalClass::new(t, mu)?),
            _ => Err(config_err("missing T or mu")),
        }
    }

    fn budget(&self) -> SearchBudget {
        SearchBudget {
            seed: self.seed,
            ..self.cfg.family.unwrap_or_default()
        }
    }

    fn explicit_family(&self, cls: &SignalClass) -> CliResult<Option<SignalFamily>> {
        let Some(p) = &self.signal_file else {
            return Ok(None);
        };
        let text = fs::read(p).map_err(|e| config_err(format!("{}: {e}", p.display())))?;
        let signals = match serde_json::from_slice(&text)
            .map_err(|e| config_err(format!("{}: {e}", p.display())))?
        {
            SignalFileJson::One(s) => vec![s],
            SignalFileJson::Many(v) => v,
        };
        if signals.is_empty() {
            return Err(config_err("signal file holds no signals"));
        }
        for (i, s) in signals.iter().enumerate() {
            if !s.is_periodic() || !validate_pe(s, cls, None)?.valid {
                return Err(config_err(format!(
                    "signal {i} is not a periodic (T, mu) signal"
                )));
            }
        }
        Ok(Some(SignalFamily::new(signals)))
    }

    fn family(&self, cls: &SignalClass) -> CliResult<SignalFamily> {
        match self.explicit_family(cls)? {
            Some(f) => Ok(f),
            None => Ok(SignalFamily::bang_bang(cls, &self.budget())?),
        }
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(config_err)?;
        text.push('\n');
        let path = self.out.join(name);
        fs::write(&path, text).map_err(|e| config_err(format!("{}: {e}", path.display())))
    }

    fn write_csv(&self, name: &str, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
        let path = self.out.join(name);
        let io = |e: csv::Error| config_err(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(&path).map_err(io)?;
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush()
            .map_err(|e| config_err(format!("{}: {e}", path.display())))
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

fn status_of(violated: bool) -> ExitStatus {
    if violated {
        ExitStatus::Violation
    } else {
        ExitStatus::Success
    }
}

#[derive(Serialize)]
struct LieSummary<'a> {
    run: &'a RunInfo,
    certificates: [&'a RankCertificate; 3],
    plarc_samples: usize,
    chain: &'a ChainReport,
}

fn lie_check(ctx: &Context) -> CliResult<ExitStatus> {
    let (a, b) = ctx.pair()?;
    let k = ctx.gain(&a, &b)?;
    let samples = ctx.cfg.plarc_samples.unwrap_or(DEFAULT_PLARC_SAMPLES);
    let larc = check_larc(&a, &b, &k)?;
    let larc0 = check_larc0(&a, &b, &k)?;
    let plarc = check_plarc(&a, &b, &k, samples, ctx.seed)?;
    let chain = inclusion_chain_audit(&a, &b, &k, ctx.cfg.lambda.unwrap_or(0.0))?;
    let rows: Vec<Vec<String>> = [&larc, &larc0, &plarc]
        .iter()
        .map(|c| {
            vec![
                serde_json::to_value(c.kind)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_owned))
                    .unwrap_or_default(),
                c.verdict.to_string(),
                c.dim.to_string(),
                c.failing_samples.len().to_string(),
                fmt_f64(c.tol),
            ]
        })
        .collect();
    ctx.write_csv(
        "certificates.csv",
        &header(&["kind", "verdict", "dim", "failing_samples", "tol"]),
        &rows,
    )?;
    ctx.write_json("certificates.json", &[&larc, &larc0, &plarc])?;
    ctx.write_json(
        "summary.json",
        &LieSummary {
            run: &ctx.info,
            certificates: [&larc, &larc0, &plarc],
            plarc_samples: samples,
            chain: &chain,
        },
    )?;
    for v in &chain.violations {
        eprintln!("violation: {v}");
    }
    Ok(status_of(!chain.violations.is_empty()))
}

#[derive(Serialize)]
struct AccSummary<'a> {
    run: &'a RunInfo,
    certificate: &'a AccCertificate,
    companion_inequalities: Option<&'a CoefficientReport>,
}

fn acc_cert(ctx: &Context) -> CliResult<ExitStatus> {
    let (a, b) = ctx.pair()?;
    let k = ctx.gain(&a, &b)?;
    let cert = acc_certificate(&a, &b, &k, ctx.cfg.trace_shift.unwrap_or_default())?;
    let ineq = match coefficient_inequalities(&k) {
        Ok(r) => Some(r),
        Err(Error::Precondition(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let d = k.ncols();
    let mut cols = vec!["j".to_string(), "r_j".to_string()];
    cols.extend((0..d).map(|i| format!("k_j_{i}")));
    let rows: Vec<Vec<String>> = cert
        .kseq
        .iter()
        .zip(&cert.r)
        .enumerate()
        .map(|(j, (kj, rj))| {
            let mut row = vec![j.to_string(), fmt_f64(*rj)];
            row.extend(kj.iter().map(|&x| fmt_f64(x)));
            row
        })
        .collect();
    ctx.write_csv("acc_certificate.csv", &cols, &rows)?;
    ctx.write_json("acc_certificate.json", &cert)?;
    ctx.write_json(
        "summary.json",
        &AccSummary {
            run: &ctx.info,
            certificate: &cert,
            companion_inequalities: ineq.as_ref(),
        },
    )?;
    Ok(status_of(ineq.is_some_and(|r| !r.verdict)))
}

#[derive(Serialize)]
struct RatesSummary<'a> {
    run: &'a RunInfo,
    signals: usize,
    rc: &'a RateEstimate,
    rd: &'a RateEstimate,
    delta: &'a DeltaReport,
    max_inversion_residual: f64,
}

fn rates(ctx: &Context) -> CliResult<ExitStatus> {
    let (a, b) = ctx.pair()?;
    let k = ctx.gain(&a, &b)?;
    let cls = ctx.class()?;
    let sys = FeedbackSystem::new(&a, &b, &k)?;
    let (rc, rd, family) = match ctx.explicit_family(&cls)? {
        Some(f) => (
            rc_estimate(&sys, &cls, &f)?,
            rd_estimate(&sys, &cls, &f)?,
            f,
        ),
        None => {
            let budget = ctx.budget();
            let (rc, mut fam) = search_estimate(&sys, &cls, &budget, Objective::Convergence)?;
            let (rd, fam_rd) = search_estimate(&sys, &cls, &budget, Objective::Divergence)?;
            for s in fam_rd.signals {
                if !fam.signals.contains(&s) {
                    fam.signals.push(s);
                }
            }
            (rc, rd, fam)
        }
    };
    let d = sys.dim();
    let rows: Vec<(f64, f64, f64, f64)> = family
        .signals
        .par_iter()
        .map(|s| {
            let m = monodromy(&sys, s)?;
            let res = opnorm(&(&m.r * &m.r_inv - Matrix::identity(d, d)));
            Ok((m.tau, m.top_rate, m.bottom_rate, res))
        })
        .collect::<crate::Result<_>>()?;
    let delta = delta_quantities(&sys, &cls, &family)?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(i, &(p, top, bottom, res))| {
            vec![
                i.to_string(),
                fmt_f64(p),
                fmt_f64(top),
                fmt_f64(bottom),
                fmt_f64(res),
            ]
        })
        .collect();
    ctx.write_csv(
        "rates.csv",
        &header(&[
            "signal_id",
            "period",
            "top_rate",
            "bottom_rate",
            "inversion_residual",
        ]),
        &csv_rows,
    )?;
    let max_res = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    ctx.write_json(
        "summary.json",
        &RatesSummary {
            run: &ctx.info,
            signals: family.len(),
            rc: &rc,
            rd: &rd,
            delta: &delta,
            max_inversion_residual: max_res,
        },
    )?;
    if !rows.iter().all(|r| r.1.is_finite() && r.2.is_finite()) {
        return Err(CliError::Numerical("non-finite rate".into()));
    }
    Ok(ExitStatus::Success)
}

#[derive(Serialize)]
struct DualitySummary<'a> {
    run: &'a RunInfo,
    signals: usize,
    tolerance: f64,
    max_residual: f64,
    rc: &'a RateEstimate,
    rd_dual: &'a RateEstimate,
    aggregate_equal: bool,
    violations: &'a [usize],
}

fn duality(ctx: &Context) -> CliResult<ExitStatus> {
    let (a, b) = ctx.pair()?;
    let k = ctx.gain(&a, &b)?;
    let cls = ctx.class()?;
    let sys = FeedbackSystem::new(&a, &b, &k)?;
    let family = ctx.family(&cls)?;
    let rep = duality_check(&sys, &cls, &family)?;
    let rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .map(|r| {
            vec![
                r.signal_id.to_string(),
                fmt_f64(r.period),
                fmt_f64(r.top_rate),
                fmt_f64(r.bottom_rate),
                fmt_f64(r.dual_bottom_rate),
                fmt_f64(r.inversion_residual),
                r.negation_exact.to_string(),
            ]
        })
        .collect();
    ctx.write_csv(
        "duality.csv",
        &header(&[
            "signal_id",
            "period",
            "top_rate",
            "bottom_rate",
            "dual_bottom_rate",
            "inversion_residual",
            "negation_exact",
        ]),
        &rows,
    )?;
    ctx.write_json(
        "summary.json",
        &DualitySummary {
            run: &ctx.info,
            signals: family.len(),
            tolerance: DUALITY_TOL,
            max_residual: rep.max_residual,
            rc: &rep.rc,
            rd_dual: &rep.rd_dual,
            aggregate_equal: rep.aggregate_equal,
            violations: &rep.violations,
        },
    )?;
    Ok(status_of(
        !rep.violations.is_empty() || !rep.aggregate_equal,
    ))
}

#[derive(Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
enum SetJson<'a> {
    Computed {
        arcs: &'a [(f64, f64)],
        measure: f64,
        components: usize,
        resolution: usize,
        control_range: (f64, f64),
    },
    NotApplicable {
        reason: &'a str,
    },
}

#[derive(Serialize)]
struct SetSummary<'a> {
    run: &'a RunInfo,
    set: SetJson<'a>,
    audit: Option<&'a InvarianceAudit>,
    steering: Option<&'a SteeringSummary>,
}

fn invariant_set(ctx: &Context) -> CliResult<ExitStatus> {
    let (a, b) = ctx.pair()?;
    let k = ctx.gain(&a, &b)?;
    let cls = ctx.class()?;
    if a.nrows() != 2 {
        return Err(config_err("invariant-set needs a planar system (d = 2)"));
    }
    let range = (cls.floor_value(), 1.0);
    let resolution = ctx.cfg.resolution.unwrap_or(DEFAULT_RESOLUTION);
    let outcome = invariant_control_set_d2(&a, &b, &k, range, resolution)?;
    let cs = match &outcome {
        ControlSetOutcome::NotApplicable { reason } => {
            ctx.write_csv(
                "indicator.csv",
                &header(&["cell", "theta_lo", "theta_hi", "inside"]),
                &[],
            )?;
            ctx.write_json(
                "summary.json",
                &SetSummary {
                    run: &ctx.info,
                    set: SetJson::NotApplicable { reason },
                    audit: None,
                    steering: None,
                },
            )?;
            return Ok(ExitStatus::Success);
        }
        ControlSetOutcome::Computed(cs) => cs,
    };
    let h = PI / cs.resolution as f64;
    let rows: Vec<Vec<String>> = cs
        .indicator
        .iter()
        .enumerate()
        .map(|(c, &inside)| {
            vec![
                c.to_string(),
                fmt_f64(c as f64 * h),
                fmt_f64((c + 1) as f64 * h),
                u8::from(inside).to_string(),
            ]
        })
        .collect();
    ctx.write_csv(
        "indicator.csv",
        &header(&["cell", "theta_lo", "theta_hi", "inside"]),
        &rows,
    )?;
    let set = SetJson::Computed {
        arcs: &cs.set.arcs,
        measure: cs.set.measure(),
        components: cs.components,
        resolution: cs.resolution,
        control_range: cs.control_range,
    };
    ctx.write_json("invariant_set.json", &set)?;
    let sys = FeedbackSystem::new(&a, &b, &k)?;
    let points = ctx.cfg.audit_points.unwrap_or(100);
    let signals = ctx.cfg.audit_signals.unwrap_or(50);
    let horizon = ctx.cfg.audit_horizon.unwrap_or(4.0 * cls.t);
    let audit = if points > 0 && signals > 0 {
        Some(audit_forward_invariance(
            &sys, cs, points, signals, horizon, ctx.seed,
        )?)
    } else {
        None
    };
    let targets = ctx.cfg.steer_targets.unwrap_or(50);
    let steering = if targets > 0 {
        let dt = ctx.cfg.steer_dt.unwrap_or(1.0 / 256.0);
        Some(steering_trials(&sys, cs, targets, dt, ctx.seed)?)
    } else {
        None
    };
    ctx.write_json(
        "summary.json",
        &SetSummary {
            run: &ctx.info,
            set,
            audit: audit.as_ref(),
            steering: steering.as_ref(),
        },
    )?;
    let violated = audit.as_ref().is_some_and(|a| !a.passed)
        || steering
            .as_ref()
            .is_some_and(|s| s.reached < s.targets || s.within_bound < s.targets);
    Ok(status_of(violated))
}

/// Residuals of one seeded `spin(9,1)` draw.
#[derive(Clone, Debug, Serialize)]
pub struct SpinRow {
    pub seed: u64,
    pub membership_residual: f64,
    pub symmetry_residual: f64,
    pub odd_residual: f64,
    pub odd_bound: f64,
    pub border_defect: f64,
    pub passed: bool,
}

pub const SYMMETRY_TOL: f64 = 1e-6;

pub fn spin_row(seed: u64) -> crate::Result<SpinRow> {
    let m = random_spin91(seed);
    let membership_residual = spin91_residual(&m)?;
    let symmetry_residual = symmetry_residual(&m)?;
    let poly = charpoly_even_decomp(&m)?;
    let odd_bound = 1e-6 * (1.0 + opnorm(&m).powi(10));
    let border_defect = bordered_decomposition(&m)?.max_defect();
    Ok(SpinRow {
        seed,
        passed: membership_residual <= MEMBERSHIP_TOL
            && symmetry_residual <= SYMMETRY_TOL
            && poly.odd_residual <= odd_bound
            && border_defect <= 1e-9,
        membership_residual,
        symmetry_residual,
        odd_residual: poly.odd_residual,
        odd_bound,
        border_defect,
    })
}

#[derive(Serialize)]
struct SpinSummary<'a> {
    run: &'a RunInfo,
    seeds: usize,
    passed: usize,
    max_membership_residual: f64,
    max_symmetry_residual: f64,
}

fn spin_audit(ctx: &Context, seeds: Option<usize>) -> CliResult<ExitStatus> {
    let n = seeds.or(ctx.cfg.seeds).unwrap_or(200);
    let rows: Vec<SpinRow> = (0..n as u64)
        .map(|i| spin_row(ctx.seed.wrapping_add(i)))
        .collect::<crate::Result<_>>()?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.seed.to_string(),
                fmt_f64(r.membership_residual),
                fmt_f64(r.symmetry_residual),
                fmt_f64(r.odd_residual),
                fmt_f64(r.odd_bound),
                fmt_f64(r.border_defect),
                r.passed.to_string(),
            ]
        })
        .collect();
    ctx.write_csv(
        "spin_audit.csv",
        &header(&[
            "seed",
            "membership_residual",
            "symmetry_residual",
            "odd_residual",
            "odd_bound",
            "border_defect",
            "passed",
        ]),
        &csv_rows,
    )?;
    let passed = rows.iter().filter(|r| r.passed).count();
    ctx.write_json(
        "summary.json",
        &SpinSummary {
            run: &ctx.info,
            seeds: n,
            passed,
            max_membership_residual: rows
                .iter()
                .map(|r| r.membership_residual)
                .fold(0.0, f64::max),
            max_symmetry_residual: rows.iter().map(|r| r.symmetry_residual).fold(0.0, f64::max),
        },
    )?;
    Ok(status_of(passed < n))
}

#[derive(Serialize)]
struct GridSummary<'a> {
    run: &'a RunInfo,
    gains: usize,
    signals: usize,
    sup_rc: f64,
    sup_rd_dual: f64,
    all_equal: bool,
    suprema_equal: bool,
}

fn gain_grid(ctx: &Context) -> CliResult<ExitStatus> {
    let (a, b) = ctx.pair()?;
    let cls = ctx.class()?;
    let ks = match ctx.cfg.k_grid {
        Some(g) => g.points(b.ncols(), a.nrows())?,
        None => vec![ctx.gain(&a, &b)?],
    };
    let family = ctx.family(&cls)?;
    let rep = grid_duality(&a, &b, &ks, &cls, &family)?;
    let n = a.nrows() * b.ncols();
    let mut cols = vec!["k_index".to_string()];
    cols.extend((0..n).map(|i| format!("k_{i}")));
    cols.extend(header(&["rc", "rd_dual", "equal"]));
    let rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = vec![i.to_string()];
            row.extend(r.k.iter().map(|&x| fmt_f64(x)));
            row.extend([fmt_f64(r.rc), fmt_f64(r.rd_dual), r.equal.to_string()]);
            row
        })
        .collect();
    ctx.write_csv("grid.csv", &cols, &rows)?;
    ctx.write_json(
        "summary.json",
        &GridSummary {
            run: &ctx.info,
            gains: ks.len(),
            signals: family.len(),
            sup_rc: rep.sup_rc,
            sup_rd_dual: rep.sup_rd_dual,
            all_equal: rep.all_equal,
            suprema_equal: rep.suprema_equal,
        },
    )?;
    Ok(status_of(!rep.all_equal || !rep.suprema_equal))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(-0.1), "-1.0000000000000001e-1");
        let x = 0.1 + 0.2;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn subcommand_names() {
        for (argv, name) in [
            ("lie-check", "lie-check"),
            ("acc-cert", "acc-cert"),
            ("rates", "rates"),
            ("duality", "duality"),
            ("invariant-set", "invariant-set"),
            ("spin-audit", "spin-audit"),
            ("theorem5p1-grid", "theorem5p1-grid"),
        ] {
            let a = Args::try_parse_from(["pe-growth", argv]).unwrap();
            assert_eq!(a.command.name(), name);
        }
        let a = Args::try_parse_from(["pe-growth", "spin-audit", "--seeds", "7", "--jobs", "2"])
            .unwrap();
        assert_eq!(a.command, Command::SpinAudit { seeds: Some(7) });
        assert_eq!(a.jobs, 2);
    }

    #[test]
    fn library_errors_map_to_exit_codes() {
        let cfg: CliError = Error::InvalidInput("x".into()).into();
        assert_eq!(cfg.status().code(), 2);
        let num: CliError = Error::SvdFailure.into();
        assert_eq!(num.status().code(), 3);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let r: std::result::Result<ExperimentConfig, _> =
            serde_json::from_str(r#"{"schema":"1","typo":1}"#);
        assert!(r.is_err());
    }

    #[test]
    fn spin_rows_pass() {
        for s in 0..3 {
            assert!(spin_row(s).unwrap().passed);
        }
    }
}
