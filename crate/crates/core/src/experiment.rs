//! Experiment orchestration: profile (or load a profiling dataset), fit the
//! hardware models, run every (method, variant, seed) combination through
//! the solver loop with journal persistence and resume, then aggregate the
//! report bundle. Everything is deterministic given the config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, RunMode, Variant};
use crate::error::{Error, Result};
use crate::hw::{cross_validate, fit_linear_named, HwLinearModel, Metric, ProfileSample};
use crate::journal::{self, Journal, JournalHeader, JOURNAL_SCHEMA};
use crate::report::{aggregate, emit, ReportBundle};
use crate::rng::stream_for;
use crate::solver::{run_solver, ClockMode, Method, SolverConfig, SolverEnv, TrialRecord};
use crate::space::StructuralVector;

pub const MODELS_SCHEMA: &str = "hw-models-v1";

/// CV RMSPE (percent) above which model fitting refuses without an override.
pub const RMSPE_REFUSAL_PERCENT: f64 = 10.0;

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Continue partial journals instead of failing on them.
    pub resume: bool,
    /// Measure the time budget on the host clock instead of the simulated
    /// clock (journals still record simulated time).
    pub real_clock: bool,
}

/// Serialized form of the fitted predictors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelsFile {
    pub schema: String,
    pub power: HwLinearModel,
    pub memory: HwLinearModel,
}

pub fn write_models(path: &Path, power: &HwLinearModel, memory: &HwLinearModel) -> Result<()> {
    let file = ModelsFile {
        schema: MODELS_SCHEMA.into(),
        power: power.clone(),
        memory: memory.clone(),
    };
    let text = toml::to_string(&file)
        .map_err(|e| Error::Data(format!("model file encode: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_models(path: &Path) -> Result<(HwLinearModel, HwLinearModel)> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelsFile =
        toml::from_str(&text).map_err(|e| Error::Data(format!("model file parse: {e}")))?;
    if file.schema != MODELS_SCHEMA {
        return Err(Error::Data(format!(
            "unknown model file schema `{}` (expected `{MODELS_SCHEMA}`)",
            file.schema
        )));
    }
    Ok((file.power, file.memory))
}

/// Write a profiling dataset: header row with the structural names, then one
/// row per sample with the structural values, power, and memory.
pub fn write_profile_csv(path: &Path, names: &[&str], samples: &[ProfileSample]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&names.join(","));
    out.push_str(",power,memory\n");
    for s in samples {
        for v in &s.z.values {
            out.push_str(&v.to_string());
            out.push(',');
        }
        out.push_str(&format!("{},{}\n", s.power, s.memory));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parse a profiling dataset; malformed rows are reported with their line
/// number.
pub fn read_profile_csv(path: &Path) -> Result<(Vec<String>, Vec<ProfileSample>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{}: empty profile file", path.display())))?;
    let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
    if columns.len() < 3 || columns[columns.len() - 2] != "power" || columns[columns.len() - 1] != "memory"
    {
        return Err(Error::Data(format!(
            "{}: header must end with `power,memory`",
            path.display()
        )));
    }
    let names: Vec<String> = columns[..columns.len() - 2].to_vec();
    let j = names.len();
    let mut samples = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != j + 2 {
            return Err(Error::Data(format!(
                "{}:{}: expected {} fields, found {}",
                path.display(),
                lineno + 1,
                j + 2,
                fields.len()
            )));
        }
        let mut z = Vec::with_capacity(j);
        for (c, f) in fields[..j].iter().enumerate() {
            let v: u32 = f.trim().parse().map_err(|_| {
                Error::Data(format!(
                    "{}:{}: column `{}` is not a nonnegative integer: `{}`",
                    path.display(),
                    lineno + 1,
                    names[c],
                    f
                ))
            })?;
            z.push(v);
        }
        let parse_f = |f: &str, what: &str| -> Result<f64> {
            f.trim().parse().map_err(|_| {
                Error::Data(format!(
                    "{}:{}: bad {what} value `{}`",
                    path.display(),
                    lineno + 1,
                    f
                ))
            })
        };
        let power = parse_f(fields[j], "power")?;
        let memory = parse_f(fields[j + 1], "memory")?;
        if !(power > 0.0) || !(memory > 0.0) {
            return Err(Error::Data(format!(
                "{}:{}: power and memory must be positive",
                path.display(),
                lineno + 1
            )));
        }
        samples.push(ProfileSample {
            z: StructuralVector { values: z },
            power,
            memory,
        });
    }
    Ok((names, samples))
}

/// Fit both hardware models with 10-fold cross-validated RMSPE attached.
pub fn fit_hw_models(
    samples: &[ProfileSample],
    names: &[&str],
    cv_seed: u64,
) -> Result<(HwLinearModel, HwLinearModel)> {
    let mut out = Vec::with_capacity(2);
    for metric in [Metric::Power, Metric::Memory] {
        let mut model = fit_linear_named(samples, metric, Some(names))?;
        let mut rng = stream_for(cv_seed, metric.name(), 0);
        model.rmspe = cross_validate(samples, metric, 10, &mut rng)?;
        out.push(model);
    }
    let memory = out.pop().expect("two models fitted");
    let power = out.pop().expect("two models fitted");
    Ok((power, memory))
}

/// Fit models from a profiling file and persist them, refusing inaccurate
/// fits unless forced.
pub fn fit_hw_to_file(profile: &Path, out: &Path, cv_seed: u64, force: bool) -> Result<(HwLinearModel, HwLinearModel)> {
    let (names, samples) = read_profile_csv(profile)?;
    let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let (power, memory) = fit_hw_models(&samples, &name_refs, cv_seed)?;
    for m in [&power, &memory] {
        if m.rmspe > RMSPE_REFUSAL_PERCENT && !force {
            return Err(Error::Data(format!(
                "{} model CV RMSPE {:.2}% exceeds {RMSPE_REFUSAL_PERCENT}%; rerun with --force to accept",
                m.metric.name(),
                m.rmspe
            )));
        }
    }
    write_models(out, &power, &memory)?;
    Ok((power, memory))
}

pub fn journal_path(out_dir: &Path, method: Method, variant: Variant, seed: u64) -> PathBuf {
    out_dir
        .join("journals")
        .join(format!("{}_{}_seed{}.jsonl", method.name(), variant.name(), seed))
}

fn make_header(config: &ExperimentConfig, method: Method, variant: Variant, seed: u64) -> JournalHeader {
    JournalHeader {
        schema: JOURNAL_SCHEMA.into(),
        scenario: config.scenario.name.clone(),
        method: method.name().into(),
        variant: variant.name().into(),
        seed,
        mode: match config.mode {
            RunMode::FixedEvals => "fixed-evals".into(),
            RunMode::FixedTime => "fixed-time".into(),
        },
        max_evals: config.max_evals,
        time_budget: config.time_budget,
        power_budget: config.budget.power,
        memory_budget: config.budget.memory,
        config_digest: config.digest(),
    }
}

fn run_is_complete(records: &[TrialRecord], sc: &SolverConfig) -> bool {
    if let Some(n) = sc.max_evals {
        let evals = records.iter().filter(|r| r.evaluated()).count() as u32;
        if evals >= n {
            return true;
        }
    }
    if let Some(tb) = sc.time_budget {
        if records.last().map(|r| r.time_end).unwrap_or(0.0) >= tb {
            return true;
        }
    }
    false
}

/// Resolve the profiling dataset for an experiment: load the configured file
/// or generate one deterministically and persist it next to the journals.
pub fn profiling_samples(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<ProfileSample>> {
    if let Some(file) = &config.profiling.file {
        let (names, samples) = read_profile_csv(file)?;
        let expected = config.scenario.space.structural_names();
        if names != expected {
            return Err(Error::Data(format!(
                "{}: structural columns {:?} do not match the scenario ({:?})",
                file.display(),
                names,
                expected
            )));
        }
        Ok(samples)
    } else {
        let mut rng = stream_for(config.profiling.seed, "profile", 0);
        let samples = config
            .scenario
            .profile_offline(config.profiling.samples, &mut rng)?;
        write_profile_csv(
            &out_dir.join("profile.csv"),
            &config.scenario.space.structural_names(),
            &samples,
        )?;
        Ok(samples)
    }
}

/// Run the full experiment matrix and emit reports. Existing complete
/// journals are reused untouched; partial ones are resumed when requested.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<ReportBundle> {
    std::fs::create_dir_all(out_dir.join("journals"))?;

    let samples = profiling_samples(config, out_dir)?;
    let names = config.scenario.space.structural_names();
    let (power_model, memory_model) = fit_hw_models(&samples, &names, config.profiling.seed)?;
    write_models(&out_dir.join("models.toml"), &power_model, &memory_model)?;

    let clock_mode = if opts.real_clock {
        ClockMode::Host
    } else {
        ClockMode::Simulated
    };

    for &method in &config.methods {
        for variant in config.variants() {
            for &seed in &config.seeds {
                let sc = config.solver_config(method, seed, variant);
                let path = journal_path(out_dir, method, variant, seed);
                let header = make_header(config, method, variant, seed);
                let env = SolverEnv {
                    space: &config.scenario.space,
                    objective: &config.scenario,
                    power_model: &power_model,
                    memory_model: &memory_model,
                    budget: &config.budget,
                };
                if path.exists() {
                    let existing = journal::load(&path, true)?;
                    if existing.header != header {
                        return Err(Error::Journal(format!(
                            "{}: journal belongs to a different configuration; \
                             move it aside or use a fresh output directory",
                            path.display()
                        )));
                    }
                    if run_is_complete(&existing.records, &sc) {
                        continue;
                    }
                    if !opts.resume {
                        return Err(Error::Journal(format!(
                            "{}: partial journal exists; pass --resume to continue it",
                            path.display()
                        )));
                    }
                    let full = run_solver(&env, &sc, &existing.records, clock_mode)?;
                    journal::append(&path, &full[existing.records.len()..])?;
                } else {
                    let records = run_solver(&env, &sc, &[], clock_mode)?;
                    journal::write(
                        &path,
                        &Journal {
                            header,
                            records,
                        },
                    )?;
                }
            }
        }
    }

    let bundle = report_from_dir(config, out_dir)?;
    emit(&bundle, &out_dir.join("reports"))?;
    Ok(bundle)
}

/// Load every journal belonging to the experiment and aggregate it.
pub fn report_from_dir(config: &ExperimentConfig, out_dir: &Path) -> Result<ReportBundle> {
    let mut journals = Vec::new();
    for &method in &config.methods {
        for variant in config.variants() {
            for &seed in &config.seeds {
                let path = journal_path(out_dir, method, variant, seed);
                if path.exists() {
                    journals.push(journal::load(&path, false)?);
                }
            }
        }
    }
    aggregate(&journals)
}

/// Aggregate whatever journals are present in a directory, without a config
/// (used by the standalone report subcommand).
pub fn report_from_journals_dir(dir: &Path) -> Result<ReportBundle> {
    let journals_dir = dir.join("journals");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&journals_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Journal(format!(
            "no journals found under {}",
            journals_dir.display()
        )));
    }
    let journals = paths
        .iter()
        .map(|p| journal::load(p, false))
        .collect::<Result<Vec<_>>>()?;
    aggregate(&journals)
}
