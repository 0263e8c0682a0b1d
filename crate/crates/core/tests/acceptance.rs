//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with its measured runtime (visible under `-- --nocapture`).
//! Tolerances and thresholds are pinned in code.

mod common;

use std::time::Instant;

use common::{quadrature_ei, DenseGpOracle, OracleRng};
use hwopt_core::acquisition::{expected_improvement, score, AcquisitionContext, AcquisitionKind};
use hwopt_core::config::{ExperimentConfig, Variant};
use hwopt_core::experiment::{journal_path, run_experiment, RunOptions};
use hwopt_core::gp::{gp_fit, KernelHyper};
use hwopt_core::hw::{cross_validate, fit_linear, Budget, HwLinearModel, Metric};
use hwopt_core::journal::{self, Journal, JournalHeader};
use hwopt_core::report::best_feasible_error;
use hwopt_core::rng::stream_for;
use hwopt_core::sim::{cifar_like, mnist_like, SimScenario};
use hwopt_core::solver::{
    incumbent, run_solver, ClockMode, Method, SolverConfig, SolverEnv, TrialStatus,
};

fn fitted_models(scenario: &SimScenario, profile_seed: u64) -> (HwLinearModel, HwLinearModel) {
    let mut rng = stream_for(profile_seed, "profile", 0);
    let samples = scenario.profile_offline(200, &mut rng).unwrap();
    (
        fit_linear(&samples, Metric::Power).unwrap(),
        fit_linear(&samples, Metric::Memory).unwrap(),
    )
}

fn journal_of(records: Vec<hwopt_core::solver::TrialRecord>, budget: &Budget) -> Journal {
    Journal {
        header: JournalHeader {
            schema: "journal-v1".into(),
            scenario: "inline".into(),
            method: "inline".into(),
            variant: "inline".into(),
            seed: 0,
            mode: "inline".into(),
            max_evals: None,
            time_budget: None,
            power_budget: budget.power,
            memory_budget: budget.memory,
            config_digest: "inline".into(),
        },
        records,
    }
}

fn pass(criterion: u32, started: Instant, bound_secs: f64, detail: &str) {
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        elapsed < bound_secs,
        "criterion {criterion} took {elapsed:.2}s (bound {bound_secs}s)"
    );
    println!("[PASS] criterion {criterion} ({elapsed:.2}s): {detail}");
}

#[test]
fn criterion_1_ei_closed_form_matches_quadrature() {
    let started = Instant::now();
    let best = 0.4;
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let mu = -1.0 + 2.0 * i as f64 / 19.0;
        for j in 0..20 {
            let s = 0.01 + 0.99 * j as f64 / 19.0;
            let closed = expected_improvement(mu, s * s, best);
            let quad = quadrature_ei(mu, s, best, 40_001);
            worst = worst.max((closed - quad).abs());
        }
    }
    assert!(worst < 1e-6, "worst closed-form/quadrature gap {worst}");
    pass(1, started, 1.0, &format!("20x20 grid, worst gap {worst:.2e} < 1e-6"));
}

#[test]
fn criterion_2_gp_posterior_matches_dense_oracle() {
    let started = Instant::now();
    let mut rng = OracleRng::new(4242);
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let n = 1 + (case % 10);
        let dim = 1 + (case % 3);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.uniform()).collect())
            .collect();
        let y: Vec<f64> = (0..n).map(|_| rng.uniform_in(0.0, 1.0)).collect();
        let amp2 = rng.uniform_in(0.3, 1.5);
        let ls: Vec<f64> = (0..dim).map(|_| rng.uniform_in(0.3, 1.2)).collect();
        let noise = rng.uniform_in(1e-6, 0.05);
        let state = gp_fit(
            x.clone(),
            y.clone(),
            KernelHyper {
                amplitude2: amp2,
                lengthscales: ls.clone(),
                noise,
            },
        )
        .unwrap();
        let oracle = DenseGpOracle {
            x,
            y,
            amp2,
            ls,
            noise,
        };
        for _ in 0..20 {
            let q: Vec<f64> = (0..dim).map(|_| rng.uniform()).collect();
            let (mu, var) = state.posterior(&q).unwrap();
            let (mu_o, var_o) = oracle.posterior(&q);
            worst = worst.max((mu - mu_o).abs()).max((var - var_o.max(0.0)).abs());
        }
    }
    assert!(worst < 1e-8, "worst dense-oracle gap {worst}");

    // noiseless interpolation
    let mut interp_worst: f64 = 0.0;
    for case in 0..5 {
        let n = 3 + case;
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..2).map(|_| rng.uniform()).collect())
            .collect();
        let y: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let state = gp_fit(
            x.clone(),
            y.clone(),
            KernelHyper {
                amplitude2: 1.0,
                lengthscales: vec![0.5, 0.5],
                noise: 1e-10,
            },
        )
        .unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            let (mu, _) = state.posterior(xi).unwrap();
            interp_worst = interp_worst.max((mu - yi).abs());
        }
    }
    assert!(interp_worst <= 1e-6, "interpolation error {interp_worst}");
    pass(
        2,
        started,
        5.0,
        &format!("20 datasets, worst gap {worst:.2e} < 1e-8; interpolation {interp_worst:.2e} <= 1e-6"),
    );
}

#[test]
fn criterion_3_gated_ieci_never_evaluates_predicted_violations() {
    let started = Instant::now();
    let scenario = cifar_like();
    let budget = Budget {
        power: Some(55.0),
        memory: Some(4.0),
    };
    let (pm, mm) = fitted_models(&scenario, 0);
    let mut total_evaluated = 0usize;
    for seed in 1..=5u64 {
        let mut config = SolverConfig::new(Method::HwIeci, seed);
        config.max_evals = Some(50);
        config.candidate_count = 2500;
        let env = SolverEnv {
            space: &scenario.space,
            objective: &scenario,
            power_model: &pm,
            memory_model: &mm,
            budget: &budget,
        };
        let records = run_solver(&env, &config, &[], ClockMode::Simulated).unwrap();
        let mut violations = 0;
        for r in records.iter().filter(|r| r.evaluated()) {
            total_evaluated += 1;
            if !budget.allows(r.predicted_power, r.predicted_memory) {
                violations += 1;
            }
        }
        assert_eq!(violations, 0, "seed {seed} evaluated a predicted violation");
    }
    pass(
        3,
        started,
        30.0,
        &format!("5 seeds x 50 evaluations, {total_evaluated} evaluated trials, 0 predicted violations"),
    );
}

#[test]
fn criterion_4_hardware_model_envelope() {
    let started = Instant::now();
    let scenario = cifar_like();
    let mut seeds_ok = 0;
    for seed in 0..10u64 {
        let mut rng = stream_for(seed, "profile", 0);
        let samples = scenario.profile_offline(200, &mut rng).unwrap();
        let p = cross_validate(&samples, Metric::Power, 10, &mut stream_for(seed, "cvp", 0)).unwrap();
        let m = cross_validate(&samples, Metric::Memory, 10, &mut stream_for(seed, "cvm", 0)).unwrap();
        if p < 7.0 && m < 7.0 {
            seeds_ok += 1;
        }
    }
    assert!(seeds_ok >= 9, "only {seeds_ok}/10 seeds under the 7% envelope");

    // noiseless profiling recovers the generating weights
    let mut clean = mnist_like();
    clean.params.power_noise = 0.0;
    clean.params.memory_noise = 0.0;
    let mut rng = stream_for(3, "profile", 0);
    let samples = clean.profile_offline(80, &mut rng).unwrap();
    let power = fit_linear(&samples, Metric::Power).unwrap();
    let memory = fit_linear(&samples, Metric::Memory).unwrap();
    let mut worst: f64 = 0.0;
    for (w, t) in power
        .weights
        .iter()
        .zip(&clean.params.true_power_weights)
        .chain(memory.weights.iter().zip(&clean.params.true_memory_weights))
    {
        worst = worst.max((w - t).abs());
    }
    assert!(worst < 1e-10, "noiseless recovery error {worst}");
    pass(
        4,
        started,
        5.0,
        &format!("{seeds_ok}/10 seeds < 7% CV RMSPE; noiseless recovery {worst:.2e} < 1e-10"),
    );
}

#[test]
fn criterion_5_bo_closes_oracle_gap_and_random_does_not() {
    let started = Instant::now();
    let scenario = mnist_like();
    let budget = Budget {
        power: Some(62.0),
        memory: Some(1.15),
    };
    // 5 * 4 * 5 * 5 * 2 * 2 = 2000 grid points
    let levels = [5usize, 4, 5, 5, 2, 2];
    let (_, err_star) = scenario.brute_force_optimum(&budget, &levels).unwrap();
    let target = err_star + 0.02;

    let (pm, mm) = fitted_models(&scenario, 7);
    let mut ieci_hits = 0;
    let mut rand_hits = 0;
    for seed in 1..=5u64 {
        for (method, hits) in [(Method::HwIeci, &mut ieci_hits), (Method::Rand, &mut rand_hits)] {
            let mut config = SolverConfig::new(method, seed);
            config.max_evals = Some(30);
            config.candidate_count = 3000;
            let env = SolverEnv {
                space: &scenario.space,
                objective: &scenario,
                power_model: &pm,
                memory_model: &mm,
                budget: &budget,
            };
            let records = run_solver(&env, &config, &[], ClockMode::Simulated).unwrap();
            let best = best_feasible_error(&journal_of(records, &budget)).unwrap_or(1.0);
            if best <= target {
                *hits += 1;
            }
        }
    }
    assert!(ieci_hits >= 4, "hw-ieci reached the oracle gap in only {ieci_hits}/5 seeds");
    assert!(rand_hits <= 2, "rand reached the oracle gap in {rand_hits}/5 seeds");
    pass(
        5,
        started,
        60.0,
        &format!(
            "grid optimum {err_star:.4}; hw-ieci {ieci_hits}/5 within +0.02, rand {rand_hits}/5"
        ),
    );
}

#[test]
fn criterion_6_time_budget_throughput() {
    let started = Instant::now();
    let scenario = cifar_like();
    // tight budget: the expensive large-structure region is excluded
    let budget = Budget {
        power: Some(10.0),
        memory: Some(4.0),
    };
    let (pm, mm) = fitted_models(&scenario, 7);
    for seed in 1..=3u64 {
        let env = SolverEnv {
            space: &scenario.space,
            objective: &scenario,
            power_model: &pm,
            memory_model: &mm,
            budget: &budget,
        };
        let mut gated = SolverConfig::new(Method::HwIeci, seed);
        gated.max_evals = None;
        gated.time_budget = Some(1200.0);
        gated.candidate_count = 10_000;
        let g = run_solver(&env, &gated, &[], ClockMode::Simulated).unwrap();
        let mut default = gated.clone();
        default.gating = false;
        default.early_term_enabled = false;
        default.acquisition = AcquisitionKind::Ei;
        let d = run_solver(&env, &default, &[], ClockMode::Simulated).unwrap();
        let n_gated = g.iter().filter(|r| r.evaluated()).count();
        let n_default = d.iter().filter(|r| r.evaluated()).count().max(1);
        let ratio = n_gated as f64 / n_default as f64;
        assert!(
            ratio >= 5.0,
            "seed {seed}: gated completed {n_gated} vs default {n_default} ({ratio:.2}x < 5x)"
        );
        println!("  criterion 6 seed {seed}: {n_gated} vs {n_default} evaluations ({ratio:.2}x)");
    }
    pass(6, started, 60.0, "gated hw-ieci completed >= 5x the default evaluations per seed");
}

#[test]
fn criterion_7_gated_random_beats_default_random_under_time_budget() {
    let started = Instant::now();
    let scenario = cifar_like();
    let budget = Budget {
        power: Some(55.0),
        memory: Some(4.0),
    };
    // the budget must mark at least half of the space infeasible
    let mut rng = stream_for(424242, "mc", 0);
    let mut infeasible = 0;
    let n_mc = 50_000;
    for _ in 0..n_mc {
        let x = scenario.space.sample_uniform(&mut rng);
        let z = scenario.space.extract_structural(&x);
        let (p, m) = scenario.true_metrics(&z).unwrap();
        if !budget.allows(p, m) {
            infeasible += 1;
        }
    }
    let infeasible_fraction = infeasible as f64 / n_mc as f64;
    assert!(
        infeasible_fraction >= 0.5,
        "budget only marks {infeasible_fraction:.2} of the space infeasible"
    );

    let (pm, mm) = fitted_models(&scenario, 7);
    let mut gated_best = Vec::new();
    let mut default_best = Vec::new();
    for seed in 1..=5u64 {
        let env = SolverEnv {
            space: &scenario.space,
            objective: &scenario,
            power_model: &pm,
            memory_model: &mm,
            budget: &budget,
        };
        let mut gated = SolverConfig::new(Method::Rand, seed);
        gated.max_evals = None;
        gated.time_budget = Some(1200.0);
        let g = run_solver(&env, &gated, &[], ClockMode::Simulated).unwrap();
        let mut default = gated.clone();
        default.gating = false;
        default.early_term_enabled = false;
        let d = run_solver(&env, &default, &[], ClockMode::Simulated).unwrap();
        gated_best.push(best_feasible_error(&journal_of(g, &budget)).unwrap_or(1.0));
        default_best.push(best_feasible_error(&journal_of(d, &budget)).unwrap_or(1.0));
    }
    let mean_gated = gated_best.iter().sum::<f64>() / 5.0;
    let mean_default = default_best.iter().sum::<f64>() / 5.0;
    assert!(
        mean_gated < mean_default,
        "gated rand mean {mean_gated:.4} not strictly below default {mean_default:.4}"
    );
    pass(
        7,
        started,
        60.0,
        &format!(
            "{:.0}% infeasible; gated rand mean {mean_gated:.4} < default {mean_default:.4}",
            100.0 * infeasible_fraction
        ),
    );
}

#[test]
fn criterion_8_determinism_and_resume() {
    let started = Instant::now();
    let text = r#"
schema = "experiment-v1"

[scenario]
name = "mnist-like"

[budget]
power = 62.0
memory = 1.15

[run]
methods = ["hw-ieci", "rand"]
seeds = [11]
mode = "fixed-evals"
max_evals = 6
candidate_count = 500
"#;
    let cfg = ExperimentConfig::from_toml_str(text).unwrap();
    let base = std::env::temp_dir().join(format!(
        "hwopt-acceptance-{}-{}",
        std::process::id(),
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .unwrap()
            .as_nanos()
    ));
    let dir_a = base.join("a");
    let dir_b = base.join("b");
    let dir_c = base.join("c");
    for d in [&dir_a, &dir_b, &dir_c] {
        std::fs::create_dir_all(d).unwrap();
    }

    run_experiment(&cfg, &dir_a, &RunOptions::default()).unwrap();
    run_experiment(&cfg, &dir_b, &RunOptions::default()).unwrap();
    let read = |dir: &std::path::Path, m: Method| {
        std::fs::read(journal_path(dir, m, Variant::Gated, 11)).unwrap()
    };
    for m in [Method::HwIeci, Method::Rand] {
        assert_eq!(read(&dir_a, m), read(&dir_b, m), "{m:?} journals differ across reruns");
    }

    // interrupt after 3 records and resume
    std::fs::create_dir_all(dir_c.join("journals")).unwrap();
    let full = journal::load(&journal_path(&dir_a, Method::HwIeci, Variant::Gated, 11), false).unwrap();
    journal::write(
        &journal_path(&dir_c, Method::HwIeci, Variant::Gated, 11),
        &Journal {
            header: full.header.clone(),
            records: full.records[..3].to_vec(),
        },
    )
    .unwrap();
    run_experiment(
        &cfg,
        &dir_c,
        &RunOptions {
            resume: true,
            real_clock: false,
        },
    )
    .unwrap();
    for m in [Method::HwIeci, Method::Rand] {
        assert_eq!(read(&dir_a, m), read(&dir_c, m), "{m:?} resumed journal differs");
    }
    std::fs::remove_dir_all(&base).ok();
    pass(8, started, 30.0, "byte-identical reruns; interrupted run resumed to identical bytes");
}

#[test]
fn criterion_9_property_batteries() {
    let started = Instant::now();

    // EI nonnegativity and monotonicity in the spread (1600 grid cases)
    for i in 0..40 {
        let mu = -1.0 + 2.0 * i as f64 / 39.0;
        let mut prev = -1.0;
        for j in 1..=40 {
            let s = j as f64 * 0.025;
            let ei = expected_improvement(mu, s * s, 0.4);
            assert!(ei >= 0.0);
            if mu < 0.4 {
                assert!(ei + 1e-12 >= prev);
            }
            prev = ei;
        }
    }

    // masked scores never exceed plain EI; variance never negative (10^4)
    let scenario = mnist_like();
    let (pm, mm) = fitted_models(&scenario, 5);
    let budget = Budget {
        power: Some(50.0),
        memory: Some(1.0),
    };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut rng = stream_for(31337, "gp-data", 0);
    for _ in 0..25 {
        let x = scenario.space.sample_uniform(&mut rng);
        ys.push(scenario.simulate_curve(&x).unwrap().final_error);
        xs.push(scenario.space.normalize(&x).unwrap());
    }
    let gp = gp_fit(
        xs,
        ys,
        KernelHyper {
            amplitude2: 0.5,
            lengthscales: vec![0.5; scenario.space.dim()],
            noise: 1e-6,
        },
    )
    .unwrap();
    let ctx = AcquisitionContext {
        gp: &gp,
        power_model: &pm,
        memory_model: &mm,
        budget: &budget,
        incumbent_error: 0.4,
    };
    let mut masked_seen = 0;
    for _ in 0..10_000 {
        let x = scenario.space.sample_uniform(&mut rng);
        let unit = scenario.space.normalize(&x).unwrap();
        let (_, var) = gp.posterior(&unit).unwrap();
        assert!(var >= 0.0);
        let ei = score(&scenario.space, &x, AcquisitionKind::Ei, &ctx).unwrap();
        let ieci = score(&scenario.space, &x, AcquisitionKind::HwIeci, &ctx).unwrap();
        let cwei = score(&scenario.space, &x, AcquisitionKind::HwCwei, &ctx).unwrap();
        assert!(ieci <= ei + 1e-15 && cwei <= ei + 1e-15);
        if ieci == 0.0 && ei > 0.0 {
            masked_seen += 1;
        }
    }
    assert!(masked_seen > 100, "mask should be active somewhere");

    // linearity of predict (10^3 cases)
    let model = HwLinearModel {
        metric: Metric::Power,
        weights: vec![0.4, 1.7, 0.02],
        residual_std: 0.0,
        rmspe: 0.0,
    };
    for _ in 0..1000 {
        let z1: Vec<u32> = (0..3).map(|_| rng.uniform_int(0, 40) as u32).collect();
        let z2: Vec<u32> = (0..3).map(|_| rng.uniform_int(0, 40) as u32).collect();
        let (a, b) = (rng.uniform_int(0, 3) as u32, rng.uniform_int(0, 3) as u32);
        let combo: Vec<u32> = z1.iter().zip(&z2).map(|(&u, &v)| a * u + b * v).collect();
        let lhs = model
            .predict(&hwopt_core::space::StructuralVector { values: combo })
            .unwrap();
        let rhs = a as f64
            * model
                .predict(&hwopt_core::space::StructuralVector { values: z1 })
                .unwrap()
            + b as f64
                * model
                    .predict(&hwopt_core::space::StructuralVector { values: z2 })
                    .unwrap();
        assert!((lhs - rhs).abs() < 1e-9);
    }

    // clip_round idempotence (10^3 cases)
    for _ in 0..1000 {
        let raw: Vec<f64> = (0..scenario.space.dim())
            .map(|_| rng.uniform_in(-500.0, 1500.0))
            .collect();
        let once = scenario.space.clip_round(&raw).unwrap();
        let twice = scenario.space.clip_round(&once.values).unwrap();
        assert_eq!(once, twice);
    }

    // best-so-far monotonicity over a long random run
    let mut config = SolverConfig::new(Method::Rand, 2718);
    config.max_evals = Some(1000);
    config.gating = false;
    let env = SolverEnv {
        space: &scenario.space,
        objective: &scenario,
        power_model: &pm,
        memory_model: &mm,
        budget: &budget,
    };
    let records = run_solver(&env, &config, &[], ClockMode::Simulated).unwrap();
    let mut best = f64::INFINITY;
    for i in 0..records.len() {
        let now = incumbent(&records[..=i]).and_then(|r| r.objective).unwrap_or(f64::INFINITY);
        assert!(now <= best + 1e-15, "best-so-far increased");
        best = best.min(now);
        if records[i].status == TrialStatus::Completed {
            assert!(records[i].objective.unwrap() >= now);
        }
    }

    pass(9, started, 120.0, "EI, masking, variance, linearity, idempotence, monotonicity batteries");
}
