//! The four search strategies (rand, rand-walk, and the two constraint-aware
//! Bayesian methods plus a plain-EI variant) sharing one budgeted loop:
//! propose, feasibility gate, evaluate with optional early termination,
//! update. The loop is strictly sequential and deterministic given its seed;
//! per-trial random streams make resumption from a journal prefix exact.

use serde::{Deserialize, Serialize};

use crate::acquisition::{
    maximize_acquisition, AcquisitionChoice, AcquisitionContext, AcquisitionKind, Incumbent,
    NO_INCUMBENT_ERROR,
};
use crate::error::{Error, Result};
use crate::gp::{gp_fit, optimize_hypers};
use crate::hw::{Budget, HwLinearModel};
use crate::rng::stream_for;
use crate::sim::{LearningCurve, SimScenario};
use crate::space::{DesignPoint, SearchSpace, StructuralVector};

/// Simulated-time cost of rejecting a proposal at the feasibility gate
/// (a model evaluation, vastly cheaper than an epoch of training).
pub const SKIP_OVERHEAD: f64 = 1e-3;

/// Hard cap on consecutive gate rejections, so an effectively empty feasible
/// region under a fixed-evaluation budget cannot spin forever.
const MAX_CONSECUTIVE_SKIPS: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rand,
    RandWalk,
    BoEi,
    HwCwei,
    HwIeci,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Rand => "rand",
            Method::RandWalk => "rand-walk",
            Method::BoEi => "bo-ei",
            Method::HwCwei => "hw-cwei",
            Method::HwIeci => "hw-ieci",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "rand" => Ok(Method::Rand),
            "rand-walk" => Ok(Method::RandWalk),
            "bo-ei" => Ok(Method::BoEi),
            "hw-cwei" => Ok(Method::HwCwei),
            "hw-ieci" => Ok(Method::HwIeci),
            other => Err(Error::config("method", format!("unknown method `{other}`"))),
        }
    }

    pub fn is_bayesian(&self) -> bool {
        matches!(self, Method::BoEi | Method::HwCwei | Method::HwIeci)
    }

    /// Acquisition used by the constraint-aware configuration of the method.
    pub fn acquisition(&self) -> Option<AcquisitionKind> {
        match self {
            Method::BoEi => Some(AcquisitionKind::Ei),
            Method::HwCwei => Some(AcquisitionKind::HwCwei),
            Method::HwIeci => Some(AcquisitionKind::HwIeci),
            _ => None,
        }
    }
}

/// Early-termination policy: probe the validation accuracy after a few
/// epochs and abandon runs that sit at or below the floor. A floor of zero
/// disables the policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyTermPolicy {
    pub probe_epochs: u32,
    pub accuracy_floor: f64,
    pub penalty_error: f64,
}

impl Default for EarlyTermPolicy {
    fn default() -> Self {
        EarlyTermPolicy {
            probe_epochs: 2,
            accuracy_floor: 0.10,
            penalty_error: 0.9,
        }
    }
}

impl EarlyTermPolicy {
    pub fn validate(&self, total_epochs: u32) -> Result<()> {
        if self.probe_epochs == 0 || self.probe_epochs >= total_epochs {
            return Err(Error::config(
                "early_term.probe_epochs",
                format!("must be in 1..{total_epochs}"),
            ));
        }
        if !(0.0..1.0).contains(&self.accuracy_floor) {
            return Err(Error::config(
                "early_term.accuracy_floor",
                "must be in [0, 1); zero disables the policy",
            ));
        }
        if !(self.penalty_error > 0.0 && self.penalty_error <= 1.0) {
            return Err(Error::config("early_term.penalty_error", "must be in (0, 1]"));
        }
        if self.accuracy_floor > 0.0 && self.penalty_error < 1.0 - self.accuracy_floor {
            return Err(Error::config(
                "early_term.penalty_error",
                "must be at least the error implied by the accuracy floor",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Completed,
    EarlyTerminated,
    SkippedInfeasible,
}

/// One journal entry: everything observed about a single proposal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: u64,
    pub status: TrialStatus,
    pub x: Vec<f64>,
    pub z: Vec<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub objective: Option<f64>,
    pub epochs_run: u32,
    pub predicted_power: f64,
    pub predicted_memory: f64,
    pub true_power: f64,
    pub true_memory: f64,
    pub time_start: f64,
    pub time_end: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl TrialRecord {
    pub fn evaluated(&self) -> bool {
        self.status != TrialStatus::SkippedInfeasible
    }
}

/// How the time budget is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockMode {
    /// Deterministic simulated clock (epoch costs plus gate overheads).
    Simulated,
    /// Host wall clock, for live use; journals remain in simulated time.
    Host,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    /// Acquisition actually used when the method is Bayesian; lets the
    /// constraint-unaware twin of a hardware-aware method fall back to EI.
    pub acquisition: AcquisitionKind,
    pub max_evals: Option<u32>,
    pub time_budget: Option<f64>,
    pub walk_sigma: f64,
    pub candidate_count: usize,
    pub gating: bool,
    pub early_term: EarlyTermPolicy,
    pub early_term_enabled: bool,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(method: Method, seed: u64) -> Self {
        SolverConfig {
            method,
            acquisition: method.acquisition().unwrap_or(AcquisitionKind::Ei),
            max_evals: None,
            time_budget: None,
            walk_sigma: 0.1,
            candidate_count: 10_000,
            gating: true,
            early_term: EarlyTermPolicy::default(),
            early_term_enabled: true,
            seed,
        }
    }

    pub fn validate(&self, total_epochs: u32) -> Result<()> {
        if self.max_evals.is_none() && self.time_budget.is_none() {
            return Err(Error::config(
                "max_evals",
                "need at least one of max_evals / time_budget",
            ));
        }
        if let Some(n) = self.max_evals {
            if n == 0 {
                return Err(Error::config("max_evals", "must be positive"));
            }
        }
        if let Some(t) = self.time_budget {
            if !(t > 0.0) {
                return Err(Error::config("time_budget", "must be positive"));
            }
        }
        if !(self.walk_sigma > 0.0 && self.walk_sigma <= 1.0) {
            return Err(Error::config("walk_sigma", "must be in (0, 1]"));
        }
        if self.candidate_count == 0 {
            return Err(Error::config("candidate_count", "must be positive"));
        }
        self.early_term.validate(total_epochs)
    }
}

/// Evaluation backend seen by the solver loop.
pub trait Objective {
    fn learning_curve(&self, x: &DesignPoint) -> Result<LearningCurve>;
    fn epoch_cost(&self, x: &DesignPoint) -> f64;
    fn true_metrics(&self, z: &StructuralVector) -> Result<(f64, f64)>;
    fn total_epochs(&self) -> u32;
}

impl Objective for SimScenario {
    fn learning_curve(&self, x: &DesignPoint) -> Result<LearningCurve> {
        self.simulate_curve(x)
    }

    fn epoch_cost(&self, x: &DesignPoint) -> f64 {
        SimScenario::epoch_cost(self, x)
    }

    fn true_metrics(&self, z: &StructuralVector) -> Result<(f64, f64)> {
        SimScenario::true_metrics(self, z)
    }

    fn total_epochs(&self) -> u32 {
        self.params.total_epochs
    }
}

/// Everything the loop needs besides its own configuration.
pub struct SolverEnv<'a> {
    pub space: &'a SearchSpace,
    pub objective: &'a dyn Objective,
    pub power_model: &'a HwLinearModel,
    pub memory_model: &'a HwLinearModel,
    pub budget: &'a Budget,
}

/// Best completed trial (the incumbent). Early-terminated penalties never
/// become the incumbent; in gated runs every completed trial is
/// model-feasible by construction.
pub fn incumbent(records: &[TrialRecord]) -> Option<&TrialRecord> {
    records
        .iter()
        .filter(|r| r.status == TrialStatus::Completed)
        .min_by(|a, b| {
            a.objective
                .partial_cmp(&b.objective)
                .unwrap_or(std::cmp::Ordering::Equal)
        })
}

/// The incumbent as (best error, location), the pair the acquisition and the
/// random walk condition on.
pub fn incumbent_state(records: &[TrialRecord]) -> Option<Incumbent> {
    incumbent(records).map(|r| Incumbent {
        best_error: r.objective.expect("completed trials carry an objective"),
        point: DesignPoint {
            values: r.x.clone(),
        },
    })
}

/// Run the configured strategy until its budget is exhausted, starting from
/// an existing journal prefix (empty for a fresh run). Returns the full
/// record list; the caller persists the suffix. An in-flight evaluation at
/// time-budget expiry completes: the budget only gates the start of trials.
pub fn run_solver(
    env: &SolverEnv,
    config: &SolverConfig,
    existing: &[TrialRecord],
    clock_mode: ClockMode,
) -> Result<Vec<TrialRecord>> {
    config.validate(env.objective.total_epochs())?;
    let mut records = existing.to_vec();
    let mut clock = records.last().map(|r| r.time_end).unwrap_or(0.0);
    let mut evals = records.iter().filter(|r| r.evaluated()).count() as u32;
    let mut consecutive_skips = 0u64;
    let started = std::time::Instant::now();

    loop {
        if let Some(n) = config.max_evals {
            if evals >= n {
                break;
            }
        }
        if let Some(tb) = config.time_budget {
            let elapsed = match clock_mode {
                ClockMode::Simulated => clock,
                ClockMode::Host => started.elapsed().as_secs_f64(),
            };
            if elapsed >= tb {
                break;
            }
        }

        let index = records.len() as u64;
        let (x, note) = propose(env, config, &records, index)?;
        let z = env.space.extract_structural(&x);
        let predicted_power = env.power_model.predict(&z)?;
        let predicted_memory = env.memory_model.predict(&z)?;
        let (true_power, true_memory) = env.objective.true_metrics(&z)?;
        let time_start = clock;

        if config.gating && !env.budget.allows(predicted_power, predicted_memory) {
            clock += SKIP_OVERHEAD;
            records.push(TrialRecord {
                index,
                status: TrialStatus::SkippedInfeasible,
                x: x.values,
                z: z.values,
                objective: None,
                epochs_run: 0,
                predicted_power,
                predicted_memory,
                true_power,
                true_memory,
                time_start,
                time_end: clock,
                note,
            });
            consecutive_skips += 1;
            if consecutive_skips >= MAX_CONSECUTIVE_SKIPS {
                return Err(Error::EmptyFeasible(format!(
                    "{MAX_CONSECUTIVE_SKIPS} consecutive proposals rejected by the feasibility gate"
                )));
            }
            continue;
        }
        consecutive_skips = 0;

        let (status, objective_value, epochs_run, mut eval_note) =
            match env.objective.learning_curve(&x) {
                Ok(curve) => {
                    let (s, o, e) = judge_curve(&curve, config, env.objective.total_epochs());
                    (s, o, e, None)
                }
                Err(err) => (
                    TrialStatus::EarlyTerminated,
                    config.early_term.penalty_error,
                    0,
                    Some(format!("objective failed: {err}")),
                ),
            };
        if eval_note.is_none() {
            eval_note = note;
        }
        clock += epochs_run as f64 * env.objective.epoch_cost(&x);
        records.push(TrialRecord {
            index,
            status,
            x: x.values,
            z: z.values,
            objective: Some(objective_value),
            epochs_run,
            predicted_power,
            predicted_memory,
            true_power,
            true_memory,
            time_start,
            time_end: clock,
            note: eval_note,
        });
        evals += 1;
    }
    Ok(records)
}

/// Apply the early-termination policy to a finished curve.
fn judge_curve(
    curve: &LearningCurve,
    config: &SolverConfig,
    total_epochs: u32,
) -> (TrialStatus, f64, u32) {
    if config.early_term_enabled && config.early_term.accuracy_floor > 0.0 {
        let probe = config.early_term.probe_epochs.min(total_epochs);
        let acc = curve.accuracies[probe as usize - 1];
        if acc <= config.early_term.accuracy_floor {
            return (
                TrialStatus::EarlyTerminated,
                config.early_term.penalty_error,
                probe,
            );
        }
    }
    (TrialStatus::Completed, curve.final_error, total_epochs)
}

fn propose(
    env: &SolverEnv,
    config: &SolverConfig,
    records: &[TrialRecord],
    index: u64,
) -> Result<(DesignPoint, Option<String>)> {
    let mut rng = stream_for(config.seed, "propose", index);
    match config.method {
        Method::Rand => Ok((env.space.sample_uniform(&mut rng), None)),
        Method::RandWalk => {
            let Some(best) = incumbent_state(records) else {
                return Ok((env.space.sample_uniform(&mut rng), None));
            };
            let center = env.space.normalize(&best.point)?;
            let unit: Vec<f64> = center
                .iter()
                .map(|c| c + config.walk_sigma * rng.standard_normal())
                .collect();
            let raw = env.space.denormalize_raw(&unit)?;
            Ok((env.space.clip_round(&raw)?, None))
        }
        Method::BoEi | Method::HwCwei | Method::HwIeci => propose_bo(env, config, records, index),
    }
}

/// Refit the surrogate on all evaluated trials (penalty values included) and
/// maximize the configured acquisition. Falls back to a uniform draw until
/// two completed trials exist or when the fit fails.
fn propose_bo(
    env: &SolverEnv,
    config: &SolverConfig,
    records: &[TrialRecord],
    index: u64,
) -> Result<(DesignPoint, Option<String>)> {
    let completed = records
        .iter()
        .filter(|r| r.status == TrialStatus::Completed)
        .count();
    let mut uniform_rng = stream_for(config.seed, "propose", index);
    if completed < 2 {
        return Ok((env.space.sample_uniform(&mut uniform_rng), None));
    }

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in records.iter().filter(|r| r.evaluated()) {
        xs.push(env.space.normalize(&DesignPoint {
            values: r.x.clone(),
        })?);
        ys.push(r.objective.expect("evaluated trials carry an objective"));
    }

    let mut hyper_rng = stream_for(config.seed, "gp-hyper", index);
    let gp = optimize_hypers(&xs, &ys, &mut hyper_rng)
        .and_then(|hyper| gp_fit(xs, ys, hyper));
    let gp = match gp {
        Ok(gp) => gp,
        Err(err) => {
            return Ok((
                env.space.sample_uniform(&mut uniform_rng),
                Some(format!("gp fit failed, uniform fallback: {err}")),
            ));
        }
    };

    let incumbent_error = incumbent_state(records)
        .map(|i| i.best_error)
        .unwrap_or(NO_INCUMBENT_ERROR);
    let ctx = AcquisitionContext {
        gp: &gp,
        power_model: env.power_model,
        memory_model: env.memory_model,
        budget: env.budget,
        incumbent_error,
    };
    let choice = AcquisitionChoice {
        kind: config.acquisition,
        candidate_count: config.candidate_count,
    };
    let mut cand_rng = stream_for(config.seed, "candidates", index);
    let (x, _) = maximize_acquisition(env.space, &choice, &ctx, &mut cand_rng)?;
    Ok((x, None))
}
