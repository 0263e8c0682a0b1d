//! Experiment configuration: one human-editable TOML file declaring the
//! search space (one `[[param]]` block per parameter), the simulator
//! constants, budgets, and the run matrix. Built-in scenarios can be pulled
//! in by name and selectively overridden.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hw::Budget;
use crate::sim::{builtin, SimParams, SimScenario};
use crate::solver::{EarlyTermPolicy, Method, SolverConfig};
use crate::space::{ParamSpec, SearchSpace};

pub const CONFIG_SCHEMA: &str = "experiment-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    FixedEvals,
    FixedTime,
}

/// Which side of a paired comparison a journal belongs to: `gated` runs use
/// the constraint-aware acquisition, feasibility gating, and early
/// termination as configured; `default` runs are the exhaustive
/// constraint-unaware twins (plain EI for Bayesian methods, no gating, no
/// early termination).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Gated,
    Default,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Gated => "gated",
            Variant::Default => "default",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScenarioSection {
    name: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunSection {
    methods: Vec<String>,
    seeds: Vec<u64>,
    mode: RunMode,
    #[serde(default)]
    max_evals: Option<u32>,
    #[serde(default)]
    time_budget: Option<f64>,
    #[serde(default = "default_true")]
    gating: bool,
    #[serde(default = "default_true")]
    early_termination: bool,
    #[serde(default)]
    include_default: bool,
    #[serde(default = "default_candidates")]
    candidate_count: usize,
    #[serde(default = "default_walk_sigma")]
    walk_sigma: f64,
}

fn default_true() -> bool {
    true
}

fn default_candidates() -> usize {
    10_000
}

fn default_walk_sigma() -> f64 {
    0.1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfilingSection {
    #[serde(default = "default_profile_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Load an existing profiling dataset instead of generating one.
    #[serde(default)]
    pub file: Option<PathBuf>,
}

fn default_profile_samples() -> usize {
    200
}

impl Default for ProfilingSection {
    fn default() -> Self {
        ProfilingSection {
            samples: default_profile_samples(),
            seed: 0,
            file: None,
        }
    }
}

/// Raw file shape, deserialized before semantic validation.
#[derive(Debug, Clone, Deserialize)]
struct ConfigFile {
    schema: Option<String>,
    scenario: ScenarioSection,
    #[serde(default)]
    param: Vec<ParamSpec>,
    #[serde(default)]
    sim: Option<SimParams>,
    #[serde(default)]
    budget: Budget,
    run: RunSection,
    #[serde(default)]
    early_term: Option<EarlyTermPolicy>,
    #[serde(default)]
    profiling: ProfilingSection,
}

/// Fully validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scenario: SimScenario,
    pub budget: Budget,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub mode: RunMode,
    pub max_evals: Option<u32>,
    pub time_budget: Option<f64>,
    pub gating: bool,
    pub early_termination: bool,
    pub include_default: bool,
    pub candidate_count: usize,
    pub walk_sigma: f64,
    pub early_term: EarlyTermPolicy,
    pub profiling: ProfilingSection,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text)
            .map_err(|e| Error::config("<config>", format!("parse error: {e}")))?;
        if let Some(schema) = &file.schema {
            if schema != CONFIG_SCHEMA {
                return Err(Error::config(
                    "schema",
                    format!("unsupported schema `{schema}` (expected `{CONFIG_SCHEMA}`)"),
                ));
            }
        }

        let scenario = match (&file.param[..], &file.sim) {
            ([], None) => builtin(&file.scenario.name).ok_or_else(|| {
                Error::config(
                    "scenario.name",
                    format!(
                        "unknown built-in scenario `{}`; declare [[param]] and [sim] sections for a custom one",
                        file.scenario.name
                    ),
                )
            })?,
            (params, Some(sim)) if !params.is_empty() => {
                let space = SearchSpace::new(params.to_vec())?;
                SimScenario::new(file.scenario.name.clone(), space, sim.clone())?
            }
            _ => {
                return Err(Error::config(
                    "scenario",
                    "custom scenarios need both [[param]] blocks and a [sim] section",
                ))
            }
        };

        file.budget.validate()?;

        if file.run.methods.is_empty() {
            return Err(Error::config("run.methods", "need at least one method"));
        }
        if file.run.seeds.is_empty() {
            return Err(Error::config("run.seeds", "need at least one seed"));
        }
        let methods = file
            .run
            .methods
            .iter()
            .map(|m| Method::parse(m))
            .collect::<Result<Vec<_>>>()?;

        match file.run.mode {
            RunMode::FixedEvals if file.run.max_evals.is_none() => {
                return Err(Error::config("run.max_evals", "required in fixed-evals mode"));
            }
            RunMode::FixedTime if file.run.time_budget.is_none() => {
                return Err(Error::config("run.time_budget", "required in fixed-time mode"));
            }
            _ => {}
        }
        if file.run.include_default && !(file.run.gating || file.run.early_termination) {
            return Err(Error::config(
                "run.include_default",
                "the main runs are already constraint-unaware; nothing to compare against",
            ));
        }
        if file.profiling.samples == 0 {
            return Err(Error::config("profiling.samples", "must be positive"));
        }

        let config = ExperimentConfig {
            scenario,
            budget: file.budget,
            methods,
            seeds: file.run.seeds,
            mode: file.run.mode,
            max_evals: file.run.max_evals,
            time_budget: file.run.time_budget,
            gating: file.run.gating,
            early_termination: file.run.early_termination,
            include_default: file.run.include_default,
            candidate_count: file.run.candidate_count,
            walk_sigma: file.run.walk_sigma,
            early_term: file.early_term.unwrap_or_default(),
            profiling: file.profiling,
        };
        // Surface solver-level misconfiguration (walk sigma, early-term
        // policy, budgets present) before any run starts.
        config
            .solver_config(config.methods[0], config.seeds[0], Variant::Gated)
            .validate(config.scenario.params.total_epochs)?;
        Ok(config)
    }

    pub fn variants(&self) -> Vec<Variant> {
        if self.include_default {
            vec![Variant::Gated, Variant::Default]
        } else {
            vec![Variant::Gated]
        }
    }

    /// Concrete solver configuration for one (method, seed, variant) run.
    pub fn solver_config(&self, method: Method, seed: u64, variant: Variant) -> SolverConfig {
        let mut sc = SolverConfig::new(method, seed);
        sc.max_evals = match self.mode {
            RunMode::FixedEvals => self.max_evals,
            RunMode::FixedTime => None,
        };
        sc.time_budget = match self.mode {
            RunMode::FixedTime => self.time_budget,
            RunMode::FixedEvals => None,
        };
        sc.walk_sigma = self.walk_sigma;
        sc.candidate_count = self.candidate_count;
        sc.early_term = self.early_term;
        match variant {
            Variant::Gated => {
                sc.gating = self.gating;
                sc.early_term_enabled = self.early_termination;
            }
            Variant::Default => {
                sc.gating = false;
                sc.early_term_enabled = false;
                sc.acquisition = crate::acquisition::AcquisitionKind::Ei;
            }
        }
        sc
    }

    /// Stable fingerprint of everything that determines journal contents,
    /// used to reject resumes and reports against a different setup.
    pub fn digest(&self) -> String {
        let mut parts = String::new();
        parts.push_str(&self.scenario.name);
        for p in self.scenario.space.params() {
            parts.push_str(&format!(
                "|{}:{:?}:{}:{}:{}",
                p.name, p.kind, p.lower, p.upper, p.structural
            ));
        }
        parts.push_str(&format!("|{:?}", self.scenario.params));
        parts.push_str(&format!(
            "|budget:{:?}:{:?}|mode:{:?}:{:?}:{:?}|flags:{}:{}:{}:{}",
            self.budget.power,
            self.budget.memory,
            self.mode,
            self.max_evals,
            self.time_budget,
            self.gating,
            self.early_termination,
            self.candidate_count,
            self.walk_sigma,
        ));
        parts.push_str(&format!(
            "|et:{}:{}:{}|prof:{}:{}:{:?}",
            self.early_term.probe_epochs,
            self.early_term.accuracy_floor,
            self.early_term.penalty_error,
            self.profiling.samples,
            self.profiling.seed,
            self.profiling.file,
        ));
        hex_digest(parts.as_bytes())
    }
}

/// 128-bit splitmix-folded digest rendered as hex.
pub fn hex_digest(bytes: &[u8]) -> String {
    let mut a: u64 = 0x243F_6A88_85A3_08D3;
    let mut b: u64 = 0x1319_8A2E_0370_7344;
    for (i, &byte) in bytes.iter().enumerate() {
        a = (a ^ ((byte as u64) << (8 * (i % 8)))).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        a ^= a >> 29;
        b = b.rotate_left(13) ^ a;
    }
    format!("{a:016x}{b:016x}")
}
