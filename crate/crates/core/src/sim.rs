//! Deterministic training simulator.
//!
//! Stands in for real network training and measurement: a parametric
//! learning-curve objective with a divergence regime, ground-truth linear
//! power/memory surfaces with multiplicative measurement noise for offline
//! profiling, per-epoch simulated cost, and a brute-force grid optimizer used
//! as an oracle. Every operation is a pure function of the design point, so
//! repeated evaluation of the same configuration is always consistent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hw::{Budget, ProfileSample};
use crate::rng::Stream;
use crate::space::{DesignPoint, ParamKind, ParamSpec, SearchSpace, StructuralVector};

/// Scenario constants for the simulated objective and metric surfaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Ground-truth power weights, one per structural parameter.
    pub true_power_weights: Vec<f64>,
    /// Ground-truth memory weights, one per structural parameter.
    pub true_memory_weights: Vec<f64>,
    /// Multiplicative measurement noise fractions used by offline profiling.
    pub power_noise: f64,
    pub memory_noise: f64,
    /// Lowest achievable test error, at the scenario optimum.
    pub base_error: f64,
    /// Cap on the error floor; keeps probe-epoch accuracy of converging
    /// configurations above the early-termination threshold.
    pub max_error_floor: f64,
    /// Quadratic sensitivity per parameter, in normalized coordinates.
    pub sensitivity: Vec<f64>,
    /// Normalized coordinates of the error optimum.
    pub optimum: Vec<f64>,
    /// Name of the learning-rate parameter driving divergence and curve speed.
    pub lr_param: String,
    /// Critical learning rate at zero structural mass.
    pub divergence_base: f64,
    /// How fast the critical learning rate shrinks with structural size.
    pub divergence_coupling: f64,
    /// Simulated-time cost per epoch: fixed + per_unit * sum(z).
    pub epoch_cost_fixed: f64,
    pub epoch_cost_per_unit: f64,
    pub total_epochs: u32,
    pub num_classes: u32,
    /// Epochs-to-convergence scale at the fast (high) and slow (low) ends of
    /// the learning-rate range.
    pub tau_fast: f64,
    pub tau_slow: f64,
    /// Amplitude of the deterministic per-epoch accuracy jitter.
    pub jitter_amplitude: f64,
}

/// A search space paired with the simulator constants that define its
/// objective and hardware surfaces.
#[derive(Debug, Clone)]
pub struct SimScenario {
    pub name: String,
    pub space: SearchSpace,
    pub params: SimParams,
    lr_index: usize,
}

/// Per-epoch validation accuracies plus the final test error.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub accuracies: Vec<f64>,
    pub final_error: f64,
    pub diverged: bool,
}

impl SimScenario {
    pub fn new(name: impl Into<String>, space: SearchSpace, params: SimParams) -> Result<Self> {
        let name = name.into();
        let j = space.structural_count();
        let dim = space.dim();
        if params.true_power_weights.len() != j || params.true_memory_weights.len() != j {
            return Err(Error::config(
                "sim.true_power_weights",
                format!("need one weight per structural parameter (J = {j})"),
            ));
        }
        if params
            .true_power_weights
            .iter()
            .chain(&params.true_memory_weights)
            .any(|&w| !(w > 0.0))
        {
            return Err(Error::config(
                "sim.true_power_weights",
                "ground-truth weights must be strictly positive",
            ));
        }
        for (field, v) in [
            ("sim.power_noise", params.power_noise),
            ("sim.memory_noise", params.memory_noise),
        ] {
            if !(0.0..0.2).contains(&v) {
                return Err(Error::config(field, "noise fraction must be in [0, 0.2)"));
            }
        }
        if !(params.base_error > 0.0 && params.base_error < 1.0) {
            return Err(Error::config("sim.base_error", "must be in (0, 1)"));
        }
        if !(params.max_error_floor > params.base_error && params.max_error_floor < 1.0) {
            return Err(Error::config(
                "sim.max_error_floor",
                "must be in (base_error, 1)",
            ));
        }
        if params.sensitivity.len() != dim || params.optimum.len() != dim {
            return Err(Error::config(
                "sim.sensitivity",
                format!("sensitivity and optimum need one entry per parameter ({dim})"),
            ));
        }
        if params.total_epochs < 2 {
            return Err(Error::config("sim.total_epochs", "need at least 2 epochs"));
        }
        if params.num_classes < 2 {
            return Err(Error::config("sim.num_classes", "need at least 2 classes"));
        }
        if !(params.epoch_cost_fixed > 0.0) || !(params.epoch_cost_per_unit > 0.0) {
            return Err(Error::config(
                "sim.epoch_cost_fixed",
                "epoch cost coefficients must be positive",
            ));
        }
        if !(params.tau_fast > 0.0 && params.tau_slow >= params.tau_fast) {
            return Err(Error::config("sim.tau_fast", "need 0 < tau_fast <= tau_slow"));
        }
        let lr_index = space
            .index_of(&params.lr_param)
            .ok_or_else(|| Error::config("sim.lr_param", format!("unknown parameter `{}`", params.lr_param)))?;
        Ok(SimScenario {
            name,
            space,
            params,
            lr_index,
        })
    }

    /// Chance-level accuracy of a diverged run.
    pub fn chance_accuracy(&self) -> f64 {
        1.0 / self.params.num_classes as f64
    }

    fn mean_structural_norm(&self, unit: &[f64]) -> f64 {
        let mut sum = 0.0;
        let mut count = 0;
        for (p, u) in self.space.params().iter().zip(unit) {
            if p.structural {
                sum += u;
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }

    /// Critical learning rate; shrinks exponentially with structural size.
    pub fn critical_lr(&self, x: &DesignPoint) -> Result<f64> {
        let unit = self.space.normalize(x)?;
        Ok(self.params.divergence_base
            * (-self.params.divergence_coupling * self.mean_structural_norm(&unit)).exp())
    }

    /// Pure divergence predicate: learning rate above the critical value.
    pub fn diverges(&self, x: &DesignPoint) -> Result<bool> {
        Ok(x.values[self.lr_index] > self.critical_lr(x)?)
    }

    /// Asymptotic error floor: base error plus sensitivity-weighted squared
    /// distance from the scenario optimum, capped.
    pub fn error_floor(&self, x: &DesignPoint) -> Result<f64> {
        let unit = self.space.normalize(x)?;
        let mut floor = self.params.base_error;
        for ((u, o), s) in unit
            .iter()
            .zip(&self.params.optimum)
            .zip(&self.params.sensitivity)
        {
            let d = u - o;
            floor += s * d * d;
        }
        Ok(floor.min(self.params.max_error_floor))
    }

    fn tau(&self, x: &DesignPoint) -> Result<f64> {
        let unit = self.space.normalize(x)?;
        let lr_norm = unit[self.lr_index];
        Ok(self.params.tau_slow - (self.params.tau_slow - self.params.tau_fast) * lr_norm)
    }

    /// Deterministic learning curve for a design point.
    pub fn simulate_curve(&self, x: &DesignPoint) -> Result<LearningCurve> {
        let t_total = self.params.total_epochs;
        if self.diverges(x)? {
            let chance = self.chance_accuracy();
            return Ok(LearningCurve {
                accuracies: vec![chance; t_total as usize],
                final_error: 1.0 - chance,
                diverged: true,
            });
        }
        let floor = self.error_floor(x)?;
        let tau = self.tau(x)?;
        let mut jitter = self.jitter_stream(x);
        let accuracies = (1..=t_total)
            .map(|t| {
                let j = self.params.jitter_amplitude * (2.0 * jitter.uniform() - 1.0);
                ((1.0 - floor) * (1.0 - (-(t as f64) / tau).exp()) + j).clamp(0.0, 1.0)
            })
            .collect();
        let final_error = floor + (1.0 - floor) * (-(t_total as f64) / tau).exp();
        Ok(LearningCurve {
            accuracies,
            final_error,
            diverged: false,
        })
    }

    /// Jitter stream keyed by the design point itself, not the run seed:
    /// the objective must be a deterministic function of x alone.
    fn jitter_stream(&self, x: &DesignPoint) -> Stream {
        let mut acc: u64 = 0x5EED_0FAC_C00D_0017;
        for v in &x.values {
            acc = acc.rotate_left(17).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ v.to_bits();
        }
        Stream::new(acc)
    }

    /// Ground-truth hardware metrics for a structural vector.
    pub fn true_metrics(&self, z: &StructuralVector) -> Result<(f64, f64)> {
        let j = self.params.true_power_weights.len();
        if z.len() != j {
            return Err(Error::DimensionMismatch {
                expected: j,
                got: z.len(),
            });
        }
        let mut power = 0.0;
        let mut memory = 0.0;
        for ((&zv, wp), wm) in z
            .values
            .iter()
            .zip(&self.params.true_power_weights)
            .zip(&self.params.true_memory_weights)
        {
            power += wp * zv as f64;
            memory += wm * zv as f64;
        }
        Ok((power, memory))
    }

    /// Offline profiling: uniform structural draws with multiplicative
    /// Gaussian measurement noise on the true metrics.
    pub fn profile_offline(&self, l: usize, rng: &mut Stream) -> Result<Vec<ProfileSample>> {
        if l == 0 {
            return Err(Error::Data("need at least one profiling sample".into()));
        }
        let structural: Vec<&ParamSpec> = self
            .space
            .params()
            .iter()
            .filter(|p| p.structural)
            .collect();
        let mut out = Vec::with_capacity(l);
        for _ in 0..l {
            let values: Vec<u32> = structural
                .iter()
                .map(|p| rng.uniform_int(p.lower as i64, p.upper as i64) as u32)
                .collect();
            let z = StructuralVector { values };
            let (p_true, m_true) = self.true_metrics(&z)?;
            let power =
                (p_true * (1.0 + self.params.power_noise * rng.standard_normal())).max(1e-9);
            let memory =
                (m_true * (1.0 + self.params.memory_noise * rng.standard_normal())).max(1e-9);
            out.push(ProfileSample { z, power, memory });
        }
        Ok(out)
    }

    /// Simulated-time cost of one training epoch at x.
    pub fn epoch_cost(&self, x: &DesignPoint) -> f64 {
        let z = self.space.extract_structural(x);
        let sum: f64 = z.values.iter().map(|&v| v as f64).sum();
        self.params.epoch_cost_fixed + self.params.epoch_cost_per_unit * sum
    }

    /// Grid values for each parameter under a declared level count.
    fn grid_values(&self, levels: &[usize]) -> Result<Vec<Vec<f64>>> {
        if levels.len() != self.space.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.space.dim(),
                got: levels.len(),
            });
        }
        let mut out = Vec::with_capacity(levels.len());
        for (p, &k) in self.space.params().iter().zip(levels) {
            if k == 0 {
                return Err(Error::Data("grid levels must be >= 1".into()));
            }
            let vals: Vec<f64> = if k == 1 {
                vec![match p.kind {
                    ParamKind::Integer => ((p.lower + p.upper) / 2.0).round(),
                    ParamKind::Continuous => (p.lower + p.upper) / 2.0,
                    ParamKind::LogContinuous => ((p.lower.ln() + p.upper.ln()) / 2.0).exp(),
                }]
            } else {
                let mut vs: Vec<f64> = (0..k)
                    .map(|i| {
                        let u = i as f64 / (k - 1) as f64;
                        let v = match p.kind {
                            ParamKind::Integer => (p.lower + u * (p.upper - p.lower)).round(),
                            ParamKind::Continuous => p.lower + u * (p.upper - p.lower),
                            ParamKind::LogContinuous => {
                                (p.lower.ln() + u * (p.upper.ln() - p.lower.ln())).exp()
                            }
                        };
                        v.clamp(p.lower, p.upper)
                    })
                    .collect();
                vs.dedup();
                vs
            };
            out.push(vals);
        }
        Ok(out)
    }

    /// Enumerate the declared grid in lexicographic (canonical) order, skip
    /// true-metric budget violations, and return the feasible point with the
    /// lowest fully-trained error. Ties keep the first (lexicographically
    /// lowest) point.
    pub fn brute_force_optimum(
        &self,
        budget: &Budget,
        levels: &[usize],
    ) -> Result<(DesignPoint, f64)> {
        let grids = self.grid_values(levels)?;
        let total: usize = grids.iter().map(|g| g.len()).product();
        if total == 0 || total > 1_000_000 {
            return Err(Error::Data(format!(
                "grid of {total} points outside supported range (1..=1e6)"
            )));
        }
        let mut idx = vec![0usize; grids.len()];
        let mut best: Option<(DesignPoint, f64)> = None;
        'outer: loop {
            let values: Vec<f64> = idx.iter().zip(&grids).map(|(&i, g)| g[i]).collect();
            let x = self.space.point(values)?;
            let z = self.space.extract_structural(&x);
            let (p, m) = self.true_metrics(&z)?;
            if budget.allows(p, m) {
                let err = self.simulate_curve(&x)?.final_error;
                if best.as_ref().is_none_or(|(_, b)| err < *b) {
                    best = Some((x, err));
                }
            }
            // odometer increment, last coordinate fastest
            for pos in (0..idx.len()).rev() {
                idx[pos] += 1;
                if idx[pos] < grids[pos].len() {
                    continue 'outer;
                }
                idx[pos] = 0;
                if pos == 0 {
                    break 'outer;
                }
            }
        }
        best.ok_or_else(|| {
            Error::EmptyFeasible("no grid point satisfies the budget under true metrics".into())
        })
    }
}

/// Six-parameter scenario with three structural knobs, in the spirit of a
/// small convolutional classifier.
pub fn mnist_like() -> SimScenario {
    let space = SearchSpace::new(vec![
        param("conv_features", ParamKind::Integer, 20.0, 80.0, true),
        param("conv_kernel", ParamKind::Integer, 2.0, 5.0, true),
        param("fc_units", ParamKind::Integer, 200.0, 700.0, true),
        param("learning_rate", ParamKind::LogContinuous, 0.001, 0.1, false),
        param("momentum", ParamKind::Continuous, 0.8, 0.95, false),
        param("weight_decay", ParamKind::LogContinuous, 0.0001, 0.01, false),
    ])
    .unwrap();
    let params = SimParams {
        true_power_weights: vec![0.55, 4.5, 0.022],
        true_memory_weights: vec![0.004, 0.010, 0.0016],
        power_noise: 0.05,
        memory_noise: 0.05,
        base_error: 0.03,
        max_error_floor: 0.65,
        sensitivity: vec![1.4, 0.9, 1.4, 2.4, 0.02, 0.02],
        optimum: vec![0.5, 1.0 / 3.0, 0.5, 0.5, 0.5, 0.5],
        lr_param: "learning_rate".into(),
        divergence_base: 0.09,
        divergence_coupling: 0.8,
        epoch_cost_fixed: 0.05,
        epoch_cost_per_unit: 0.004,
        total_epochs: 20,
        num_classes: 10,
        tau_fast: 1.5,
        tau_slow: 4.5,
        jitter_amplitude: 0.002,
    };
    SimScenario::new("mnist-like", space, params).unwrap()
}

/// Thirteen-parameter scenario with eight structural knobs, in the spirit of
/// a deeper convolutional classifier.
pub fn cifar_like() -> SimScenario {
    let space = SearchSpace::new(vec![
        param("conv1_features", ParamKind::Integer, 20.0, 80.0, true),
        param("conv2_features", ParamKind::Integer, 20.0, 80.0, true),
        param("conv3_features", ParamKind::Integer, 20.0, 80.0, true),
        param("conv1_kernel", ParamKind::Integer, 2.0, 5.0, true),
        param("conv2_kernel", ParamKind::Integer, 2.0, 5.0, true),
        param("pool_kernel", ParamKind::Integer, 1.0, 3.0, true),
        param("fc1_units", ParamKind::Integer, 20.0, 1600.0, true),
        param("fc2_units", ParamKind::Integer, 20.0, 1600.0, true),
        param("learning_rate", ParamKind::LogContinuous, 0.001, 0.1, false),
        param("momentum", ParamKind::Continuous, 0.8, 0.95, false),
        param("weight_decay", ParamKind::LogContinuous, 0.0001, 0.01, false),
        param("dropout1", ParamKind::Continuous, 0.2, 0.7, false),
        param("dropout2", ParamKind::Continuous, 0.2, 0.7, false),
    ])
    .unwrap();
    let params = SimParams {
        true_power_weights: vec![0.04; 8],
        true_memory_weights: vec![0.002, 0.002, 0.002, 0.005, 0.005, 0.003, 0.0018, 0.0018],
        power_noise: 0.05,
        memory_noise: 0.05,
        base_error: 0.03,
        max_error_floor: 0.68,
        sensitivity: vec![
            0.16, 0.16, 0.16, 0.06, 0.06, 0.02, 0.16, 0.16, 0.5, 0.05, 0.05, 0.2, 0.2,
        ],
        optimum: vec![
            0.92, 0.92, 0.92, 0.75, 0.75, 0.5, 0.92, 0.92, 0.45, 0.5, 0.5, 0.4, 0.4,
        ],
        lr_param: "learning_rate".into(),
        divergence_base: 0.07,
        divergence_coupling: 0.5,
        epoch_cost_fixed: 0.02,
        epoch_cost_per_unit: 0.005,
        total_epochs: 20,
        num_classes: 10,
        tau_fast: 1.5,
        tau_slow: 4.2,
        jitter_amplitude: 0.002,
    };
    SimScenario::new("cifar-like", space, params).unwrap()
}

fn param(name: &str, kind: ParamKind, lower: f64, upper: f64, structural: bool) -> ParamSpec {
    ParamSpec {
        name: name.into(),
        kind,
        lower,
        upper,
        structural,
    }
}

/// Scenario builders available by name in experiment configs.
pub fn builtin(name: &str) -> Option<SimScenario> {
    match name {
        "mnist-like" => Some(mnist_like()),
        "cifar-like" => Some(cifar_like()),
        _ => None,
    }
}
