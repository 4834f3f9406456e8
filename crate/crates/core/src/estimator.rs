//! Monte Carlo estimation of the probability of violation.
//!
//! Trial `i` draws its settings from a ChaCha8 stream keyed by `(seed, i)`,
//! so the counts depend only on the seed and the trial budget, never on the
//! number of workers or on where a run was interrupted. Trials are processed
//! in chunks; after each chunk the running counts can be written to a
//! checkpoint file.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::local::{build_lp_with, FeasibilitySolver, LpStructure, VerdictKind, DEFAULT_TOLERANCE};
use crate::measurement::{behavior, sample_settings, SamplingMode, SettingsAssignment};
use crate::state::{QuantumState, Scenario};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959964;
/// Runs whose failure fraction reaches this level are rejected.
pub const MAX_FAILURE_FRACTION: f64 = 1e-4;
pub const CHECKPOINT_VERSION: u32 = 1;
const DEFAULT_CHUNK: u64 = 4096;

/// Result of a completed run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationEstimate {
    pub label: String,
    pub scenario: Scenario,
    pub mode: SamplingMode,
    pub seed: u64,
    pub trials: u64,
    pub violations: u64,
    pub solver_failures: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub wall_time: f64,
}

impl ViolationEstimate {
    /// Builds an estimate from raw counts. Failed trials are left out of
    /// both the numerator and the denominator.
    pub fn from_counts(
        label: impl Into<String>,
        scenario: Scenario,
        mode: SamplingMode,
        seed: u64,
        trials: u64,
        violations: u64,
        solver_failures: u64,
    ) -> Result<Self> {
        if violations + solver_failures > trials {
            return Err(Error::Argument(format!(
                "{violations} violations and {solver_failures} failures exceed {trials} trials"
            )));
        }
        let effective = trials - solver_failures;
        if effective == 0 {
            return Err(Error::ExcessiveFailures { failures: solver_failures, trials });
        }
        let (ci_low, ci_high) = wilson_ci(violations, effective, Z_95)?;
        Ok(Self {
            label: label.into(),
            scenario,
            mode,
            seed,
            trials,
            violations,
            solver_failures,
            p_hat: violations as f64 / effective as f64,
            ci_low,
            ci_high,
            wall_time: 0.0,
        })
    }

    /// Trials that produced a verdict.
    pub fn effective_trials(&self) -> u64 {
        self.trials - self.solver_failures
    }

    pub fn failure_fraction(&self) -> f64 {
        self.solver_failures as f64 / self.trials as f64
    }

    /// Whether the run stays under the failure budget.
    pub fn is_valid(&self) -> bool {
        self.failure_fraction() < MAX_FAILURE_FRACTION
    }

    /// Half-width of the confidence interval's larger side.
    pub fn half_width(&self) -> f64 {
        (self.p_hat - self.ci_low).max(self.ci_high - self.p_hat)
    }
}

/// Wilson score interval for `violations` successes out of `trials`.
pub fn wilson_ci(violations: u64, trials: u64, z: f64) -> Result<(f64, f64)> {
    if trials == 0 || violations > trials {
        return Err(Error::Argument(format!(
            "Wilson interval needs 0 ≤ k ≤ n and n ≥ 1, got k={violations}, n={trials}"
        )));
    }
    let n = trials as f64;
    let p = violations as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let low = if violations == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let high = if violations == trials { 1.0 } else { (center + half).clamp(p, 1.0) };
    Ok((low, high))
}

/// Verdict of a single trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrialOutcome {
    Local,
    Nonlocal,
    Failure,
}

/// The RNG stream of trial `index`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Settings drawn for trial `index`.
pub fn trial_settings(scenario: &Scenario, seed: u64, index: u64, mode: SamplingMode) -> Result<SettingsAssignment> {
    sample_settings(scenario, &mut trial_rng(seed, index), mode)
}

fn run_trial(
    state: &QuantumState,
    structure: &Arc<LpStructure>,
    solver: &mut FeasibilitySolver,
    seed: u64,
    index: u64,
    mode: SamplingMode,
) -> TrialOutcome {
    let scenario = structure.scenario();
    let verdict = trial_settings(scenario, seed, index, mode)
        .and_then(|settings| behavior(state, scenario, &settings))
        .and_then(|b| build_lp_with(Arc::clone(structure), &b))
        .and_then(|lp| solver.solve(&lp));
    match verdict {
        Ok(v) if v.kind == VerdictKind::Nonlocal => TrialOutcome::Nonlocal,
        Ok(_) => TrialOutcome::Local,
        Err(e) => {
            log::debug!("trial {index} failed: {e}");
            TrialOutcome::Failure
        }
    }
}

/// Estimates the probability of violation with default options.
pub fn estimate_pv(
    state: &QuantumState,
    scenario: &Scenario,
    trials: u64,
    seed: u64,
    mode: SamplingMode,
) -> Result<ViolationEstimate> {
    Estimator::new(scenario.clone(), trials, seed)
        .mode(mode)
        .run(state)?
        .into_estimate()
}

/// Run parameters that a checkpoint must match to be resumed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunIdentity {
    pub label: String,
    pub scenario: Scenario,
    pub mode: SamplingMode,
    pub tolerance: f64,
    pub seed: u64,
    pub trials: u64,
    /// Free-form data for the caller, e.g. how to rebuild the state.
    #[serde(default)]
    pub extra: serde_json::Value,
}

/// Counts persisted between chunks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub run: RunIdentity,
    pub next_index: u64,
    pub violations: u64,
    pub failures: u64,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    checkpoint: Checkpoint,
    sha256: String,
}

fn digest_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl Checkpoint {
    /// Writes the checkpoint through a temporary file and a rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string(self)?;
        let file = CheckpointFile { checkpoint: self.clone(), sha256: digest_hex(&body) };
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(&file)?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Reads a checkpoint, rejecting unknown versions and bad checksums.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: CheckpointFile = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("{}: unreadable ({e})", path.display())))?;
        let body = serde_json::to_string(&file.checkpoint)?;
        if digest_hex(&body) != file.sha256 {
            return Err(Error::Checkpoint(format!("{}: checksum mismatch", path.display())));
        }
        let c = file.checkpoint;
        if c.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", c.version)));
        }
        if c.next_index > c.run.trials || c.violations + c.failures > c.next_index {
            return Err(Error::Checkpoint("inconsistent counts".into()));
        }
        Ok(c)
    }
}

/// How a run ended.
#[derive(Clone, Debug, PartialEq)]
pub enum RunOutcome {
    Complete(ViolationEstimate),
    /// Stopped early; the counts so far are in the checkpoint.
    Interrupted(Checkpoint),
}

impl RunOutcome {
    pub fn into_estimate(self) -> Result<ViolationEstimate> {
        match self {
            RunOutcome::Complete(e) => Ok(e),
            RunOutcome::Interrupted(c) => Err(Error::Checkpoint(format!(
                "run stopped after {} of {} trials",
                c.next_index, c.run.trials
            ))),
        }
    }
}

/// Configurable estimator.
#[derive(Clone, Debug)]
pub struct Estimator {
    run: RunIdentity,
    workers: usize,
    chunk: u64,
    checkpoint: Option<PathBuf>,
    stop_after: Option<u64>,
    cancel: Option<Arc<AtomicBool>>,
    strategy_cap: u64,
}

impl Estimator {
    pub fn new(scenario: Scenario, trials: u64, seed: u64) -> Self {
        Self {
            run: RunIdentity {
                label: String::new(),
                scenario,
                mode: SamplingMode::Independent,
                tolerance: DEFAULT_TOLERANCE,
                seed,
                trials,
                extra: serde_json::Value::Null,
            },
            workers: 0,
            chunk: DEFAULT_CHUNK,
            checkpoint: None,
            stop_after: None,
            cancel: None,
            strategy_cap: crate::state::DEFAULT_STRATEGY_CAP,
        }
    }

    pub fn label(mut self, label: impl Into<String>) -> Self {
        self.run.label = label.into();
        self
    }

    pub fn mode(mut self, mode: SamplingMode) -> Self {
        self.run.mode = mode;
        self
    }

    pub fn tolerance(mut self, tol: f64) -> Self {
        self.run.tolerance = tol;
        self
    }

    /// Attaches caller data stored in checkpoints.
    pub fn extra(mut self, extra: serde_json::Value) -> Self {
        self.run.extra = extra;
        self
    }

    /// Worker threads; 0 uses the global pool.
    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    /// Trials between checkpoints and cancellation checks.
    pub fn chunk(mut self, chunk: u64) -> Self {
        self.chunk = chunk.max(1);
        self
    }

    /// Persists progress to `path`; an existing file there is resumed.
    pub fn checkpoint(mut self, path: impl Into<PathBuf>) -> Self {
        self.checkpoint = Some(path.into());
        self
    }

    /// Stops once at least `n` trials are done.
    pub fn stop_after(mut self, n: u64) -> Self {
        self.stop_after = Some(n);
        self
    }

    /// Stops at the next chunk boundary once `flag` is set.
    pub fn cancel_flag(mut self, flag: Arc<AtomicBool>) -> Self {
        self.cancel = Some(flag);
        self
    }

    pub fn strategy_cap(mut self, cap: u64) -> Self {
        self.strategy_cap = cap;
        self
    }

    pub fn identity(&self) -> &RunIdentity {
        &self.run
    }

    /// Builds an estimator that continues the run stored at `path`.
    pub fn from_checkpoint(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let c = Checkpoint::load(&path)?;
        let mut e = Estimator::new(c.run.scenario.clone(), c.run.trials, c.run.seed);
        e.run = c.run;
        e.checkpoint = Some(path);
        Ok(e)
    }

    pub fn run(&self, state: &QuantumState) -> Result<RunOutcome> {
        let started = Instant::now();
        let run = &self.run;
        if run.trials == 0 {
            return Err(Error::Argument("at least one trial is required".into()));
        }
        if !(run.tolerance > 0.0) {
            return Err(Error::Argument(format!("tolerance must be positive, got {}", run.tolerance)));
        }
        if state.parties() != run.scenario.num_parties() || state.dim() != run.scenario.local_dim() {
            return Err(Error::Dimension(format!(
                "state has {} parties of dimension {}, scenario {} expects {} of dimension {}",
                state.parties(),
                state.dim(),
                run.scenario,
                run.scenario.num_parties(),
                run.scenario.local_dim()
            )));
        }
        let structure = Arc::new(LpStructure::with_cap(&run.scenario, self.strategy_cap)?);

        let mut progress = Checkpoint {
            version: CHECKPOINT_VERSION,
            run: run.clone(),
            next_index: 0,
            violations: 0,
            failures: 0,
        };
        if let Some(path) = &self.checkpoint {
            if path.exists() {
                let saved = Checkpoint::load(path)?;
                if saved.run != *run {
                    return Err(Error::Checkpoint(format!(
                        "{} belongs to a different run (label {:?}, seed {}, trials {})",
                        path.display(),
                        saved.run.label,
                        saved.run.seed,
                        saved.run.trials
                    )));
                }
                log::info!("resuming at trial {} of {}", saved.next_index, run.trials);
                progress = saved;
            }
        }

        let pool = if self.workers > 0 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(self.workers)
                    .build()
                    .map_err(|e| Error::Argument(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };

        while progress.next_index < run.trials {
            let stopped = self.stop_after.is_some_and(|n| progress.next_index >= n)
                || self.cancel.as_ref().is_some_and(|f| f.load(Ordering::SeqCst));
            if stopped {
                if let Some(path) = &self.checkpoint {
                    progress.save(path)?;
                }
                return Ok(RunOutcome::Interrupted(progress));
            }
            let start = progress.next_index;
            let mut end = (start + self.chunk).min(run.trials);
            if let Some(n) = self.stop_after {
                if start < n {
                    end = end.min(n);
                }
            }
            let work = || self.count_chunk(state, &structure, start, end);
            let (violations, failures) = match &pool {
                Some(p) => p.install(work),
                None => work(),
            };
            progress.violations += violations;
            progress.failures += failures;
            progress.next_index = end;
            if let Some(path) = &self.checkpoint {
                progress.save(path)?;
            }
        }

        let mut estimate = ViolationEstimate::from_counts(
            run.label.clone(),
            run.scenario.clone(),
            run.mode,
            run.seed,
            run.trials,
            progress.violations,
            progress.failures,
        )?;
        estimate.wall_time = started.elapsed().as_secs_f64();
        if !estimate.is_valid() {
            return Err(Error::ExcessiveFailures { failures: estimate.solver_failures, trials: estimate.trials });
        }
        Ok(RunOutcome::Complete(estimate))
    }

    fn count_chunk(&self, state: &QuantumState, structure: &Arc<LpStructure>, start: u64, end: u64) -> (u64, u64) {
        let run = &self.run;
        (start..end)
            .into_par_iter()
            .map_init(
                || FeasibilitySolver::new(run.tolerance),
                |solver, i| match run_trial(state, structure, solver, run.seed, i, run.mode) {
                    TrialOutcome::Nonlocal => (1, 0),
                    TrialOutcome::Local => (0, 0),
                    TrialOutcome::Failure => (0, 1),
                },
            )
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
    }
}

/// Classifies a single trial; used by cross-checks that replay a run.
pub fn classify_trial(
    state: &QuantumState,
    scenario: &Scenario,
    seed: u64,
    index: u64,
    mode: SamplingMode,
    tol: f64,
) -> Result<TrialOutcome> {
    let structure = Arc::new(LpStructure::new(scenario)?);
    let mut solver = FeasibilitySolver::new(tol);
    Ok(run_trial(state, &structure, &mut solver, seed, index, mode))
}
