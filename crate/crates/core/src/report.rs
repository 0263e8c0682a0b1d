//! Report aggregation: every table and series is a pure function of the
//! persisted journals, so re-running the aggregation on the same files
//! reproduces the outputs byte for byte.
//!
//! Emitted files: best-error-vs-evaluations and -vs-time series, cumulative
//! constraint-violation counts, a per-trial scatter, and a summary with
//! per-method statistics plus paired gated-vs-default speedups (geometric
//! mean across seeds, paired by seed).

use std::path::Path;

use crate::error::{Error, Result};
use crate::hw::Budget;
use crate::journal::Journal;
use crate::solver::{TrialRecord, TrialStatus};
use crate::stats;

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub method: String,
    pub variant: String,
    pub seed: u64,
    pub eval: u32,
    pub best_feasible_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationRow {
    pub method: String,
    pub variant: String,
    pub seed: u64,
    pub eval: u32,
    pub predicted_violations: u32,
    pub true_violations: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRow {
    pub method: String,
    pub variant: String,
    pub seed: u64,
    pub eval: u32,
    pub objective: f64,
    pub true_power: f64,
    pub true_memory: f64,
    pub status: TrialStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeRow {
    pub method: String,
    pub variant: String,
    pub seed: u64,
    pub time: f64,
    pub best_feasible_error: Option<f64>,
}

/// Per (method, variant) statistics across seeds. A run without any feasible
/// completed trial contributes the worst representable error (1.0).
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub variant: String,
    pub seeds: u32,
    pub mean_best_error: f64,
    pub std_best_error: f64,
    pub mean_evaluations: f64,
    pub predicted_violations: u32,
    pub true_violations: u32,
    /// Evaluated trials whose model-predicted feasibility disagrees with the
    /// ground-truth metrics.
    pub feasibility_disagreements: u32,
}

/// Paired gated-vs-default comparisons for one method, geometric means over
/// the seeds where the quantity is defined.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpeedup {
    pub method: String,
    pub pairs: u32,
    pub evals_increase: Option<f64>,
    /// Default total time divided by gated time to reach the default-run
    /// evaluation count.
    pub time_to_match_evals_speedup: Option<f64>,
    /// Default time to its own best error divided by gated time to reach
    /// that same error.
    pub time_to_match_error_speedup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub best_vs_evals: Vec<SeriesRow>,
    pub violations: Vec<ViolationRow>,
    pub scatter: Vec<ScatterRow>,
    pub best_vs_time: Vec<TimeRow>,
    pub summaries: Vec<MethodSummary>,
    pub speedups: Vec<MethodSpeedup>,
}

fn journal_budget(j: &Journal) -> Budget {
    Budget {
        power: j.header.power_budget,
        memory: j.header.memory_budget,
    }
}

fn truly_feasible(r: &TrialRecord, budget: &Budget) -> bool {
    budget.allows(r.true_power, r.true_memory)
}

fn predicted_feasible(r: &TrialRecord, budget: &Budget) -> bool {
    budget.allows(r.predicted_power, r.predicted_memory)
}

/// Best feasible (ground-truth metrics) completed error in a journal.
pub fn best_feasible_error(j: &Journal) -> Option<f64> {
    let budget = journal_budget(j);
    j.records
        .iter()
        .filter(|r| r.status == TrialStatus::Completed && truly_feasible(r, &budget))
        .filter_map(|r| r.objective)
        .fold(None, |acc: Option<f64>, v| {
            Some(acc.map_or(v, |a| a.min(v)))
        })
}

fn evaluated_count(j: &Journal) -> u32 {
    j.records.iter().filter(|r| r.evaluated()).count() as u32
}

/// Aggregate loaded journals into the full report bundle. All journals must
/// come from the same experiment configuration.
pub fn aggregate(journals: &[Journal]) -> Result<ReportBundle> {
    if journals.is_empty() {
        return Err(Error::Journal("no journals to aggregate".into()));
    }
    let digest = &journals[0].header.config_digest;
    let scenario = &journals[0].header.scenario;
    for j in journals {
        if &j.header.config_digest != digest || &j.header.scenario != scenario {
            return Err(Error::Journal(format!(
                "journal for {}/{}/seed{} comes from a different configuration",
                j.header.method, j.header.variant, j.header.seed
            )));
        }
    }

    let mut sorted: Vec<&Journal> = journals.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.header.method, &a.header.variant, a.header.seed).cmp(&(
            &b.header.method,
            &b.header.variant,
            b.header.seed,
        ))
    });

    let mut best_vs_evals = Vec::new();
    let mut violations = Vec::new();
    let mut scatter = Vec::new();
    let mut best_vs_time = Vec::new();

    for j in &sorted {
        let budget = journal_budget(j);
        let mut eval = 0u32;
        let mut best: Option<f64> = None;
        let mut pred_viol = 0u32;
        let mut true_viol = 0u32;
        for r in &j.records {
            if !r.evaluated() {
                continue;
            }
            eval += 1;
            if r.status == TrialStatus::Completed && truly_feasible(r, &budget) {
                let o = r.objective.expect("completed trials carry an objective");
                best = Some(best.map_or(o, |b: f64| b.min(o)));
            }
            if !predicted_feasible(r, &budget) {
                pred_viol += 1;
            }
            if !truly_feasible(r, &budget) {
                true_viol += 1;
            }
            best_vs_evals.push(SeriesRow {
                method: j.header.method.clone(),
                variant: j.header.variant.clone(),
                seed: j.header.seed,
                eval,
                best_feasible_error: best,
            });
            violations.push(ViolationRow {
                method: j.header.method.clone(),
                variant: j.header.variant.clone(),
                seed: j.header.seed,
                eval,
                predicted_violations: pred_viol,
                true_violations: true_viol,
            });
            scatter.push(ScatterRow {
                method: j.header.method.clone(),
                variant: j.header.variant.clone(),
                seed: j.header.seed,
                eval,
                objective: r.objective.unwrap_or(f64::NAN),
                true_power: r.true_power,
                true_memory: r.true_memory,
                status: r.status,
            });
            best_vs_time.push(TimeRow {
                method: j.header.method.clone(),
                variant: j.header.variant.clone(),
                seed: j.header.seed,
                time: r.time_end,
                best_feasible_error: best,
            });
        }
    }

    // Group journals per (method, variant) for the summary table.
    let mut summaries: Vec<MethodSummary> = Vec::new();
    {
        let mut keys: Vec<(String, String)> = sorted
            .iter()
            .map(|j| (j.header.method.clone(), j.header.variant.clone()))
            .collect();
        keys.dedup();
        for (method, variant) in keys {
            let group: Vec<&&Journal> = sorted
                .iter()
                .filter(|j| j.header.method == method && j.header.variant == variant)
                .collect();
            let best_errors: Vec<f64> = group
                .iter()
                .map(|j| best_feasible_error(j).unwrap_or(1.0))
                .collect();
            let evals: Vec<f64> = group.iter().map(|j| evaluated_count(j) as f64).collect();
            let mut pred_viol = 0u32;
            let mut true_viol = 0u32;
            let mut disagreements = 0u32;
            for j in &group {
                let budget = journal_budget(j);
                for r in j.records.iter().filter(|r| r.evaluated()) {
                    let pf = predicted_feasible(r, &budget);
                    let tf = truly_feasible(r, &budget);
                    pred_viol += u32::from(!pf);
                    true_viol += u32::from(!tf);
                    disagreements += u32::from(pf != tf);
                }
            }
            summaries.push(MethodSummary {
                method,
                variant,
                seeds: group.len() as u32,
                mean_best_error: stats::mean(&best_errors),
                std_best_error: stats::sample_std(&best_errors),
                mean_evaluations: stats::mean(&evals),
                predicted_violations: pred_viol,
                true_violations: true_viol,
                feasibility_disagreements: disagreements,
            });
        }
    }

    // Seed-paired gated-vs-default speedups.
    let mut speedups: Vec<MethodSpeedup> = Vec::new();
    {
        let mut methods: Vec<String> = sorted.iter().map(|j| j.header.method.clone()).collect();
        methods.sort();
        methods.dedup();
        for method in methods {
            let gated: Vec<&&Journal> = sorted
                .iter()
                .filter(|j| j.header.method == method && j.header.variant == "gated")
                .collect();
            let default: Vec<&&Journal> = sorted
                .iter()
                .filter(|j| j.header.method == method && j.header.variant == "default")
                .collect();
            if gated.is_empty() || default.is_empty() {
                continue;
            }
            let mut increases = Vec::new();
            let mut evals_speedups = Vec::new();
            let mut error_speedups = Vec::new();
            let mut pairs = 0u32;
            for d in &default {
                let Some(g) = gated.iter().find(|g| g.header.seed == d.header.seed) else {
                    continue;
                };
                pairs += 1;
                let n_def = evaluated_count(d);
                let n_gated = evaluated_count(g);
                let t_def_total = d.records.last().map(|r| r.time_end).unwrap_or(0.0);
                if n_def > 0 {
                    increases.push(n_gated as f64 / n_def as f64);
                    if let Some(t) = time_of_nth_evaluation(g, n_def) {
                        if t > 0.0 && t_def_total > 0.0 {
                            evals_speedups.push(t_def_total / t);
                        }
                    }
                }
                if let Some(best_def) = best_feasible_error(d) {
                    let t_def = time_error_reached(d, best_def);
                    let t_gated = time_error_reached(g, best_def);
                    if let (Some(td), Some(tg)) = (t_def, t_gated) {
                        if td > 0.0 && tg > 0.0 {
                            error_speedups.push(td / tg);
                        }
                    }
                }
            }
            speedups.push(MethodSpeedup {
                method,
                pairs,
                evals_increase: geometric_mean(&increases),
                time_to_match_evals_speedup: geometric_mean(&evals_speedups),
                time_to_match_error_speedup: geometric_mean(&error_speedups),
            });
        }
    }

    Ok(ReportBundle {
        best_vs_evals,
        violations,
        scatter,
        best_vs_time,
        summaries,
        speedups,
    })
}

/// Simulated time at which the journal finished its n-th evaluated trial.
pub fn time_of_nth_evaluation(j: &Journal, n: u32) -> Option<f64> {
    let mut seen = 0u32;
    for r in &j.records {
        if r.evaluated() {
            seen += 1;
            if seen == n {
                return Some(r.time_end);
            }
        }
    }
    None
}

/// Simulated time at which the best feasible error first reached `target`.
pub fn time_error_reached(j: &Journal, target: f64) -> Option<f64> {
    let budget = journal_budget(j);
    for r in &j.records {
        if r.status == TrialStatus::Completed
            && truly_feasible(r, &budget)
            && r.objective.is_some_and(|o| o <= target)
        {
            return Some(r.time_end);
        }
    }
    None
}

fn geometric_mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    Some((xs.iter().map(|x| x.ln()).sum::<f64>() / xs.len() as f64).exp())
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn render_best_vs_evals(b: &ReportBundle) -> String {
    let mut s = String::from("method,variant,seed,eval,best_feasible_error\n");
    for r in &b.best_vs_evals {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.method,
            r.variant,
            r.seed,
            r.eval,
            opt_cell(r.best_feasible_error)
        ));
    }
    s
}

pub fn render_violations(b: &ReportBundle) -> String {
    let mut s = String::from("method,variant,seed,eval,predicted_violations,true_violations\n");
    for r in &b.violations {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.method, r.variant, r.seed, r.eval, r.predicted_violations, r.true_violations
        ));
    }
    s
}

pub fn render_scatter(b: &ReportBundle) -> String {
    let mut s = String::from("method,variant,seed,eval,objective,true_power,true_memory,status\n");
    for r in &b.scatter {
        let status = match r.status {
            TrialStatus::Completed => "completed",
            TrialStatus::EarlyTerminated => "early_terminated",
            TrialStatus::SkippedInfeasible => "skipped_infeasible",
        };
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.method, r.variant, r.seed, r.eval, r.objective, r.true_power, r.true_memory, status
        ));
    }
    s
}

pub fn render_best_vs_time(b: &ReportBundle) -> String {
    let mut s = String::from("method,variant,seed,time,best_feasible_error\n");
    for r in &b.best_vs_time {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.method,
            r.variant,
            r.seed,
            r.time,
            opt_cell(r.best_feasible_error)
        ));
    }
    s
}

pub fn render_summary_csv(b: &ReportBundle) -> String {
    let mut s = String::from("section,method,variant,key,value\n");
    for m in &b.summaries {
        for (key, value) in [
            ("seeds", m.seeds as f64),
            ("mean_best_error", m.mean_best_error),
            ("std_best_error", m.std_best_error),
            ("mean_evaluations", m.mean_evaluations),
            ("predicted_violations", m.predicted_violations as f64),
            ("true_violations", m.true_violations as f64),
            ("feasibility_disagreements", m.feasibility_disagreements as f64),
        ] {
            s.push_str(&format!(
                "summary,{},{},{},{}\n",
                m.method, m.variant, key, value
            ));
        }
    }
    for sp in &b.speedups {
        s.push_str(&format!(
            "speedup,{},gated,pairs,{}\n",
            sp.method, sp.pairs
        ));
        for (key, value) in [
            ("evals_increase", sp.evals_increase),
            ("time_to_match_evals_speedup", sp.time_to_match_evals_speedup),
            ("time_to_match_error_speedup", sp.time_to_match_error_speedup),
        ] {
            s.push_str(&format!(
                "speedup,{},gated,{},{}\n",
                sp.method,
                key,
                opt_cell(value)
            ));
        }
    }
    s
}

pub fn render_summary_text(b: &ReportBundle) -> String {
    let mut s = String::new();
    s.push_str("== per-method summary ==\n");
    for m in &b.summaries {
        s.push_str(&format!(
            "{:>9} [{:>7}] seeds={} best error mean={:.4} (std {:.4}) evals/run={:.1} \
             predicted-violations={} true-violations={} disagreements={}\n",
            m.method,
            m.variant,
            m.seeds,
            m.mean_best_error,
            m.std_best_error,
            m.mean_evaluations,
            m.predicted_violations,
            m.true_violations,
            m.feasibility_disagreements
        ));
    }
    if !b.speedups.is_empty() {
        s.push_str("\n== gated vs default (geometric mean, seed-paired) ==\n");
        for sp in &b.speedups {
            let fmt = |v: Option<f64>| match v {
                Some(x) => format!("{x:.2}x"),
                None => "--".to_string(),
            };
            s.push_str(&format!(
                "{:>9} pairs={} evals-increase={} time-to-match-evals={} time-to-match-error={}\n",
                sp.method,
                sp.pairs,
                fmt(sp.evals_increase),
                fmt(sp.time_to_match_evals_speedup),
                fmt(sp.time_to_match_error_speedup)
            ));
        }
    }
    s
}

/// Write every report file into `dir`.
pub fn emit(bundle: &ReportBundle, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("best_error_vs_evals.csv"), render_best_vs_evals(bundle))?;
    std::fs::write(dir.join("violations_vs_evals.csv"), render_violations(bundle))?;
    std::fs::write(dir.join("trial_scatter.csv"), render_scatter(bundle))?;
    std::fs::write(dir.join("best_error_vs_time.csv"), render_best_vs_time(bundle))?;
    std::fs::write(dir.join("summary.csv"), render_summary_csv(bundle))?;
    std::fs::write(dir.join("summary.txt"), render_summary_text(bundle))?;
    Ok(())
}
