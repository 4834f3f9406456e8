//! The `bellpv` command line.
//!
//! Exit codes: 0 success, 1 a check reported FAIL, 2 bad configuration,
//! 3 strategy cap exceeded, 4 solver failures, 130 interrupted.

mod expr;
mod output;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    appendix_lemma_check, fit_exponential, gme_witness, multiplicativity_check, oracle_check, scan_alpha_with,
    ScanFamily, XDefinition,
};
use crate::error::{Error, Result};
use crate::estimator::{trial_settings, Estimator, RunOutcome, ViolationEstimate};
use crate::local::{build_lp, DEFAULT_TOLERANCE};
use crate::measurement::{behavior, SamplingMode};
use crate::state::{load_density_matrix, parse_settings, QuantumState, Scenario};

pub use expr::{parse_state_expr, Defaults, StateExpr};
pub use output::{emit, format_percent, read_records, write_rows, Format, ResultRecord};

pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CAP: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;
pub const EXIT_INTERRUPTED: i32 = 130;

const DEFAULT_TRIALS: u64 = 10_000;

#[derive(Parser, Debug)]
#[command(name = "bellpv", version, about = "Probability of violation of local realism under random measurements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Estimate the probability of violation for one state and scenario.
    Estimate(RunArgs),
    /// Estimate along a one-parameter family of states.
    ScanAlpha(ScanArgs),
    /// Fit 1 − a·exp(−b·x) to results with a growing number of settings.
    Fit(FitArgs),
    /// Tripartite entanglement test on three-qubit 2x2x2 results.
    Witness(WitnessArgs),
    /// Compare (1 − p_a)(1 − p_b) with 1 − p_ab.
    Multiplicativity(MultiplicativityArgs),
    /// Random checks of the CHSH(α) identities and the maximal-violation property.
    VerifyAppendix(AppendixArgs),
    /// Compare the solver with the CHSH and vertex-enumeration tests.
    OracleCheck(RunArgs),
    /// Continue an interrupted estimate from its checkpoint.
    Resume(ResumeArgs),
    /// Write the feasibility program of one trial.
    DumpLp(DumpArgs),
}

/// Options shared by every command that samples trials.
#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// Flat JSON file with any of the options below; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// State expression, e.g. `ghz(3)`, `w(3)`, `psi3(20)`, `cluster4`, `ghz(2)*zero(1)`.
    #[arg(long)]
    pub state: Option<String>,
    /// Density matrix file.
    #[arg(long)]
    pub state_file: Option<PathBuf>,
    /// GHZ angle in degrees.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// ψ₃ angle in degrees.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Local dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Settings per party, e.g. `3x2x2`. Defaults to two per party.
    #[arg(long)]
    pub settings: Option<String>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `independent` or `identical`.
    #[arg(long)]
    pub mode: Option<String>,
    /// Phase-one optimum above which a trial counts as a violation.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Checkpoint file, resumed if it exists.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(untagged)]
enum SettingsField {
    #[default]
    Missing,
    Text(String),
    List(Vec<usize>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    state: Option<String>,
    state_file: Option<PathBuf>,
    alpha: Option<f64>,
    theta: Option<f64>,
    dim: Option<usize>,
    #[serde(default)]
    settings: SettingsField,
    trials: Option<u64>,
    seed: Option<u64>,
    mode: Option<String>,
    #[serde(alias = "tolerance")]
    tol: Option<f64>,
    workers: Option<usize>,
    #[serde(alias = "output")]
    out: Option<PathBuf>,
    format: Option<String>,
    checkpoint: Option<PathBuf>,
}

/// How to rebuild the state; stored in checkpoints.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settings: Option<Vec<usize>>,
}

impl StateSpec {
    /// The state and its row label.
    pub fn build(&self) -> Result<(QuantumState, String)> {
        match (&self.state, &self.state_file) {
            (Some(_), Some(_)) => Err(Error::Argument("give either --state or --state-file, not both".into())),
            (None, None) => Err(Error::Argument("no state given (--state or --state-file)".into())),
            (None, Some(path)) => {
                let rho = load_density_matrix(path)?;
                let label = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into());
                Ok((QuantumState::Mixed(rho), label))
            }
            (Some(text), None) => {
                let defaults = Defaults {
                    parties: self.settings.as_ref().map(Vec::len),
                    dim: self.dim,
                    alpha: self.alpha,
                    theta: self.theta,
                };
                let e = parse_state_expr(text)?.resolve(&defaults)?;
                Ok((e.build(self.dim)?, e.to_string()))
            }
        }
    }
}

/// Fully resolved run options.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub spec: StateSpec,
    pub state: QuantumState,
    pub label: String,
    pub scenario: Scenario,
    pub trials: u64,
    pub seed: u64,
    pub mode: SamplingMode,
    pub tol: f64,
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub checkpoint: Option<PathBuf>,
}

fn absolute(p: PathBuf) -> Result<PathBuf> {
    if !p.exists() {
        return Err(Error::Argument(format!("{} does not exist", p.display())));
    }
    Ok(std::fs::canonicalize(p)?)
}

impl RunArgs {
    fn merged(&self) -> Result<(RunArgs, Option<Vec<usize>>)> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Argument(format!("config {}: {e}", path.display())))?;
                serde_json::from_str::<ConfigFile>(&text)
                    .map_err(|e| Error::Argument(format!("config {}: {e}", path.display())))?
            }
            None => ConfigFile::default(),
        };
        let settings = match (&self.settings, file.settings) {
            (Some(s), _) => Some(parse_settings(s)?),
            (None, SettingsField::Text(s)) => Some(parse_settings(&s)?),
            (None, SettingsField::List(v)) => Some(v),
            (None, SettingsField::Missing) => None,
        };
        let format = match (&self.format, &file.format) {
            (Some(f), _) => Some(*f),
            (None, Some(f)) => Some(f.parse()?),
            (None, None) => None,
        };
        let merged = RunArgs {
            config: None,
            state: self.state.clone().or(file.state),
            state_file: self.state_file.clone().or(file.state_file),
            alpha: self.alpha.or(file.alpha),
            theta: self.theta.or(file.theta),
            dim: self.dim.or(file.dim),
            settings: None,
            trials: self.trials.or(file.trials),
            seed: self.seed.or(file.seed),
            mode: self.mode.clone().or(file.mode),
            tol: self.tol.or(file.tol),
            workers: self.workers.or(file.workers),
            out: self.out.clone().or(file.out),
            format,
            checkpoint: self.checkpoint.clone().or(file.checkpoint),
        };
        Ok((merged, settings))
    }

    /// Merges flags over the config file and builds the state and scenario.
    pub fn resolve(&self) -> Result<RunConfig> {
        let (a, settings) = self.merged()?;
        let spec = StateSpec {
            state: a.state.clone(),
            state_file: a.state_file.map(absolute).transpose()?,
            dim: a.dim,
            alpha: a.alpha,
            theta: a.theta,
            settings: settings.clone(),
        };
        let (state, label) = spec.build()?;
        if let Some(d) = a.dim {
            if d != state.dim() {
                return Err(Error::Dimension(format!("--dim {d} but the state has local dimension {}", state.dim())));
            }
        }
        let settings = settings.unwrap_or_else(|| vec![2; state.parties()]);
        if settings.len() != state.parties() {
            return Err(Error::Dimension(format!(
                "{} settings entries for a state of {} parties",
                settings.len(),
                state.parties()
            )));
        }
        let scenario = Scenario::new(state.dim(), settings)?;
        let trials = a.trials.unwrap_or(DEFAULT_TRIALS);
        if trials == 0 {
            return Err(Error::Argument("--trials must be at least 1".into()));
        }
        let tol = a.tol.unwrap_or(DEFAULT_TOLERANCE);
        if !(tol > 0.0) {
            return Err(Error::Argument(format!("--tol must be positive, got {tol}")));
        }
        Ok(RunConfig {
            spec,
            state,
            label,
            scenario,
            trials,
            seed: a.seed.unwrap_or(0),
            mode: a.mode.as_deref().map_or(Ok(SamplingMode::Independent), str::parse)?,
            tol,
            workers: a.workers.unwrap_or(0),
            out: a.out,
            format: a.format.unwrap_or_default(),
            checkpoint: a.checkpoint,
        })
    }
}

/// Trials per chunk: smaller for large programs so that interrupts and
/// checkpoints stay frequent.
fn chunk_for(scenario: &Scenario) -> u64 {
    match scenario.num_strategies() {
        0..=64 => 4096,
        65..=1024 => 512,
        _ => 32,
    }
}

impl RunConfig {
    pub fn estimator(&self, cancel: Option<Arc<AtomicBool>>) -> Result<Estimator> {
        let mut e = Estimator::new(self.scenario.clone(), self.trials, self.seed)
            .label(self.label.clone())
            .mode(self.mode)
            .tolerance(self.tol)
            .workers(self.workers)
            .chunk(chunk_for(&self.scenario))
            .extra(serde_json::to_value(&self.spec)?);
        if let Some(p) = &self.checkpoint {
            e = e.checkpoint(p);
        }
        if let Some(flag) = cancel {
            e = e.cancel_flag(flag);
        }
        Ok(e)
    }
}

#[derive(Args, Debug)]
pub struct ScanArgs {
    /// `qubit_ghz`, `qutrit_ghz` or `psi3_theta`.
    #[arg(long)]
    pub family: String,
    /// Angles in degrees: `start:stop:step` (inclusive) or a comma list.
    #[arg(long)]
    pub grid: String,
    #[command(flatten)]
    pub run: RunArgs,
}

/// Parses `start:stop:step` or `a,b,c` (degrees) into radians.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Argument(format!("bad grid {s:?}"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    let degrees: Vec<f64> = if s.contains(':') {
        let parts: Vec<f64> = s.split(':').map(num).collect::<Result<_>>()?;
        let [start, stop, step] = parts[..] else { return Err(bad()) };
        if !(step > 0.0) || stop < start {
            return Err(bad());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| start + i as f64 * step).collect()
    } else {
        s.split(',').map(num).collect::<Result<_>>()?
    };
    if degrees.is_empty() {
        return Err(bad());
    }
    Ok(degrees.into_iter().map(f64::to_radians).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum XChoice {
    OneParty,
    Product,
    Both,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Result rows (CSV or JSON lines).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub x: XChoice,
    /// Party whose setting count is `x` for `one-party`, counted from 1.
    #[arg(long, default_value_t = 1)]
    pub party: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct WitnessArgs {
    /// Result rows to test instead of running an estimate.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug)]
pub struct MultiplicativityArgs {
    /// Three result rows in the order: first factor, second factor, product.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Args, Debug)]
pub struct AppendixArgs {
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct ResumeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct DumpArgs {
    /// Trial whose settings are used.
    #[arg(long, default_value_t = 0)]
    pub index: u64,
    #[command(flatten)]
    pub run: RunArgs,
}

/// Exit status for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::CapExceeded { .. } => EXIT_CAP,
        Error::ExcessiveFailures { .. } | Error::Solver(_) => EXIT_SOLVER,
        _ => EXIT_CONFIG,
    }
}

enum Finished {
    Ok,
    CheckFailed,
    Interrupted,
}

fn finish_run(outcome: RunOutcome, out: Option<&Path>, format: Format) -> Result<Finished> {
    match outcome {
        RunOutcome::Complete(e) => {
            emit(out, format, &[ResultRecord::from_estimate(&e)])?;
            Ok(Finished::Ok)
        }
        RunOutcome::Interrupted(c) => {
            eprintln!("interrupted after {} of {} trials", c.next_index, c.run.trials);
            Ok(Finished::Interrupted)
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn estimates_from(path: &Path) -> Result<Vec<ViolationEstimate>> {
    read_records(path)?.iter().map(ResultRecord::to_estimate).collect()
}

#[derive(Serialize)]
struct FitRow {
    x_definition: XDefinition,
    a: f64,
    b: f64,
    residual_rms: f64,
    points: usize,
}

#[derive(Serialize)]
struct WitnessRow {
    state: String,
    p_v_percent: String,
    ci_low: f64,
    bound: f64,
    z_score: f64,
    verdict: crate::analysis::WitnessVerdict,
}

fn run_fit(args: &FitArgs) -> Result<Finished> {
    let estimates = estimates_from(&args.input)?;
    let party = args.party.checked_sub(1).ok_or_else(|| Error::Argument("--party counts from 1".into()))?;
    let definitions = match args.x {
        XChoice::OneParty => vec![XDefinition::SettingsOfOneParty],
        XChoice::Product => vec![XDefinition::ProductOfSettings],
        XChoice::Both => vec![XDefinition::SettingsOfOneParty, XDefinition::ProductOfSettings],
    };
    let mut rows = Vec::new();
    for def in definitions {
        let mut points = Vec::new();
        for e in &estimates {
            let s = e.scenario.settings();
            if party >= s.len() {
                return Err(Error::Argument(format!("--party {} but a row has {} parties", args.party, s.len())));
            }
            points.push((def.x_of(s, party), e.p_hat));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let fit = fit_exponential(&points, def)?;
        rows.push(FitRow { x_definition: def, a: fit.a, b: fit.b, residual_rms: fit.residual_rms, points: fit.points_used });
    }
    emit(args.out.as_deref(), args.format, &rows)?;
    Ok(Finished::Ok)
}

fn run_witness(args: &WitnessArgs, cancel: Arc<AtomicBool>) -> Result<Finished> {
    let (estimates, out, format) = match &args.input {
        Some(path) => {
            let (a, _) = args.run.merged()?;
            (estimates_from(path)?, a.out, a.format.unwrap_or_default())
        }
        None => {
            let cfg = args.run.resolve()?;
            match cfg.estimator(Some(cancel))?.run(&cfg.state)? {
                RunOutcome::Complete(e) => (vec![e], cfg.out, cfg.format),
                other => return finish_run(other, None, cfg.format),
            }
        }
    };
    let mut rows = Vec::new();
    for e in &estimates {
        let w = gme_witness(e)?;
        rows.push(WitnessRow {
            state: e.label.clone(),
            p_v_percent: format_percent(e.violations, e.effective_trials()),
            ci_low: e.ci_low,
            bound: w.bound,
            z_score: w.z_score,
            verdict: w.verdict,
        });
    }
    emit(out.as_deref(), format, &rows)?;
    Ok(Finished::Ok)
}

fn run_resume(args: &ResumeArgs, cancel: Arc<AtomicBool>) -> Result<Finished> {
    let mut estimator = Estimator::from_checkpoint(&args.checkpoint)?.cancel_flag(cancel);
    let spec: StateSpec = serde_json::from_value(estimator.identity().extra.clone())
        .map_err(|e| Error::Checkpoint(format!("no state description in checkpoint ({e})")))?;
    let (state, _) = spec.build()?;
    let chunk = chunk_for(&estimator.identity().scenario);
    estimator = estimator.chunk(chunk);
    if let Some(w) = args.workers {
        estimator = estimator.workers(w);
    }
    finish_run(estimator.run(&state)?, args.out.as_deref(), args.format)
}

fn run_dump(args: &DumpArgs) -> Result<Finished> {
    let cfg = args.run.resolve()?;
    if args.index >= cfg.trials {
        return Err(Error::Argument(format!("--index {} is not below --trials {}", args.index, cfg.trials)));
    }
    let settings = trial_settings(&cfg.scenario, cfg.seed, args.index, cfg.mode)?;
    let lp = build_lp(&cfg.scenario, &behavior(&cfg.state, &cfg.scenario, &settings)?)?;
    match &cfg.out {
        Some(p) => lp.dump(std::io::BufWriter::new(std::fs::File::create(p)?))?,
        None => lp.dump(std::io::stdout().lock())?,
    }
    Ok(Finished::Ok)
}

fn dispatch(cli: Cli, cancel: Arc<AtomicBool>) -> Result<Finished> {
    match cli.command {
        Command::Estimate(args) => {
            let cfg = args.resolve()?;
            let outcome = cfg.estimator(Some(cancel))?.run(&cfg.state)?;
            finish_run(outcome, cfg.out.as_deref(), cfg.format)
        }
        Command::ScanAlpha(args) => {
            let family: ScanFamily = args.family.parse()?;
            let grid = parse_grid(&args.grid)?;
            let mut run = args.run.clone();
            if run.checkpoint.is_some() {
                return Err(Error::Argument("scan-alpha does not take --checkpoint".into()));
            }
            // any member fixes the party count and dimension
            let default_state = match family {
                ScanFamily::QubitGhz => "ghz",
                ScanFamily::QutritGhz => "ghz",
                ScanFamily::Psi3Theta => "psi3",
            };
            run.state.get_or_insert_with(|| default_state.into());
            if family == ScanFamily::QutritGhz {
                run.dim.get_or_insert(3);
            }
            run.alpha = run.alpha.or(Some(grid[0].to_degrees()));
            run.theta = run.theta.or(Some(grid[0].to_degrees()));
            let cfg = run.resolve()?;
            let base = cfg.estimator(Some(cancel.clone()))?;
            let curve = scan_alpha_with(family, &grid, &base)?;
            if cancel.load(Ordering::SeqCst) {
                return Ok(Finished::Interrupted);
            }
            let rows: Vec<ResultRecord> = curve.iter().map(|p| ResultRecord::from_estimate(&p.estimate)).collect();
            emit(cfg.out.as_deref(), cfg.format, &rows)?;
            Ok(Finished::Ok)
        }
        Command::Fit(args) => run_fit(&args),
        Command::Witness(args) => run_witness(&args, cancel),
        Command::Multiplicativity(args) => {
            let e = estimates_from(&args.input)?;
            let [a, b, ab] = &e[..] else {
                return Err(Error::Argument(format!("expected 3 rows, found {}", e.len())));
            };
            let r = multiplicativity_check(a, b, ab);
            print_json(&r)?;
            Ok(if r.pass { Finished::Ok } else { Finished::CheckFailed })
        }
        Command::VerifyAppendix(args) => {
            let r = appendix_lemma_check(args.samples, args.seed)?;
            print_json(&r)?;
            Ok(if r.pass { Finished::Ok } else { Finished::CheckFailed })
        }
        Command::OracleCheck(mut args) => {
            args.state.get_or_insert_with(|| "ghz(2)".into());
            args.trials.get_or_insert(1000);
            let cfg = args.resolve()?;
            let r = oracle_check(&cfg.state, &cfg.scenario, cfg.trials, cfg.seed, cfg.mode, cfg.tol)?;
            print_json(&r)?;
            Ok(if r.pass() { Finished::Ok } else { Finished::CheckFailed })
        }
        Command::Resume(args) => run_resume(&args, cancel),
        Command::DumpLp(args) => run_dump(&args),
    }
}

/// Runs the command line and returns the process exit status.
pub fn run_cli<I, T>(args: I, cancel: Arc<AtomicBool>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match dispatch(cli, cancel) {
        Ok(Finished::Ok) => 0,
        Ok(Finished::CheckFailed) => {
            eprintln!("check FAILED");
            EXIT_CHECK_FAILED
        }
        Ok(Finished::Interrupted) => EXIT_INTERRUPTED,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Entry point of the binary: logging, Ctrl-C handling, then [`run_cli`].
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cancel = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&cancel);
    let installed = ctrlc::set_handler(move || {
        if flag.swap(true, Ordering::SeqCst) {
            std::process::exit(EXIT_INTERRUPTED);
        }
        eprintln!("stopping after the current chunk; press Ctrl-C again to quit now");
    });
    if let Err(e) = installed {
        log::warn!("cannot install the interrupt handler: {e}");
    }
    run_cli(std::env::args_os(), cancel)
}
