//! Linear power and memory predictors over the structural hyper-parameters,
//! with k-fold cross-validated RMSPE and the residual statistics used by the
//! probability-weighted acquisition.
//!
//! The models are pure weighted sums (no intercept): metric(z) = sum_j w_j z_j.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::space::StructuralVector;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Power,
    Memory,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Power => "power",
            Metric::Memory => "memory",
        }
    }
}

/// One offline profiling measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSample {
    pub z: StructuralVector,
    pub power: f64,
    pub memory: f64,
}

impl ProfileSample {
    pub fn metric(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Power => self.power,
            Metric::Memory => self.memory,
        }
    }
}

/// Fitted linear predictor for one hardware metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HwLinearModel {
    pub metric: Metric,
    pub weights: Vec<f64>,
    /// Standard deviation of the training residuals (actual - predicted).
    pub residual_std: f64,
    /// Cross-validated RMSPE in percent, when computed.
    pub rmspe: f64,
}

impl HwLinearModel {
    /// Weighted sum of the structural coordinates.
    pub fn predict(&self, z: &StructuralVector) -> Result<f64> {
        if z.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: z.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(&z.values)
            .map(|(w, &z)| w * z as f64)
            .sum())
    }
}

/// Hardware budget; absent components never constrain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Budget {
    pub power: Option<f64>,
    pub memory: Option<f64>,
}

impl Budget {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("power", self.power), ("memory", self.memory)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(Error::config(name, "budget must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Boundary equality counts as feasible.
    pub fn allows(&self, power_pred: f64, memory_pred: f64) -> bool {
        self.power.is_none_or(|pb| power_pred <= pb)
            && self.memory.is_none_or(|mb| memory_pred <= mb)
    }
}

/// Feasibility of a structural vector under fitted models and a budget.
pub fn check_budget(
    power_model: &HwLinearModel,
    memory_model: &HwLinearModel,
    z: &StructuralVector,
    budget: &Budget,
) -> Result<(bool, f64, f64)> {
    let p = power_model.predict(z)?;
    let m = memory_model.predict(z)?;
    Ok((budget.allows(p, m), p, m))
}

/// Ordinary least squares without intercept. Requires at least as many
/// samples as structural dimensions and a full-rank design matrix.
pub fn fit_linear(samples: &[ProfileSample], metric: Metric) -> Result<HwLinearModel> {
    fit_linear_named(samples, metric, None)
}

/// As [`fit_linear`], with column names used in rank-deficiency reports.
pub fn fit_linear_named(
    samples: &[ProfileSample],
    metric: Metric,
    column_names: Option<&[&str]>,
) -> Result<HwLinearModel> {
    let l = samples.len();
    if l == 0 {
        return Err(Error::Data("no profiling samples".into()));
    }
    let j = samples[0].z.len();
    if samples.iter().any(|s| s.z.len() != j) {
        return Err(Error::Data("inconsistent structural vector lengths".into()));
    }
    if l < j {
        return Err(Error::Data(format!(
            "need at least as many samples ({l}) as structural dimensions ({j})"
        )));
    }

    // Normal equations: (Z^T Z) w = Z^T y, solved by Cholesky with a
    // pivot-based rank check.
    let mut ztz = vec![0.0; j * j];
    let mut zty = vec![0.0; j];
    for s in samples {
        let zf = s.z.as_f64();
        let y = s.metric(metric);
        for a in 0..j {
            zty[a] += zf[a] * y;
            for b in 0..=a {
                ztz[a * j + b] += zf[a] * zf[b];
            }
        }
    }
    for a in 0..j {
        for b in (a + 1)..j {
            ztz[a * j + b] = ztz[b * j + a];
        }
    }

    let max_diag = (0..j).map(|a| ztz[a * j + a]).fold(0.0f64, f64::max);
    let tol = 1e-10 * max_diag.max(1e-300);
    let mut chol = ztz.clone();
    for i in 0..j {
        for k in 0..=i {
            let mut sum = chol[i * j + k];
            for m in 0..k {
                sum -= chol[i * j + m] * chol[k * j + m];
            }
            if i == k {
                if sum <= tol {
                    let name = column_names
                        .and_then(|ns| ns.get(i))
                        .map(|s| s.to_string())
                        .unwrap_or_else(|| format!("z[{i}]"));
                    return Err(Error::RankDeficient { column: i, name });
                }
                chol[i * j + i] = sum.sqrt();
            } else {
                chol[i * j + k] = sum / chol[k * j + k];
            }
        }
    }

    // Forward + back substitution.
    let mut w = zty.clone();
    for i in 0..j {
        for k in 0..i {
            let t = chol[i * j + k] * w[k];
            w[i] -= t;
        }
        w[i] /= chol[i * j + i];
    }
    for i in (0..j).rev() {
        for k in (i + 1)..j {
            let t = chol[k * j + i] * w[k];
            w[i] -= t;
        }
        w[i] /= chol[i * j + i];
    }

    let residuals: Vec<f64> = samples
        .iter()
        .map(|s| {
            let pred: f64 = w.iter().zip(&s.z.values).map(|(w, &z)| w * z as f64).sum();
            s.metric(metric) - pred
        })
        .collect();

    Ok(HwLinearModel {
        metric,
        weights: w,
        residual_std: stats::population_std(&residuals),
        rmspe: 0.0,
    })
}

/// Root mean square percentage error: 100 * sqrt(mean ((pred-actual)/actual)^2).
pub fn rmspe(preds: &[f64], actuals: &[f64]) -> Result<f64> {
    if preds.len() != actuals.len() || preds.is_empty() {
        return Err(Error::Data(format!(
            "rmspe needs equal nonempty lengths (got {} and {})",
            preds.len(),
            actuals.len()
        )));
    }
    let mut acc = 0.0;
    for (p, a) in preds.iter().zip(actuals) {
        if *a == 0.0 {
            return Err(Error::Data("rmspe undefined for zero actual value".into()));
        }
        let rel = (p - a) / a;
        acc += rel * rel;
    }
    Ok(100.0 * (acc / preds.len() as f64).sqrt())
}

/// k-fold cross validation: seeded shuffle, contiguous folds with sizes
/// differing by at most one, RMSPE pooled over all held-out predictions.
pub fn cross_validate(
    samples: &[ProfileSample],
    metric: Metric,
    k: usize,
    rng: &mut Stream,
) -> Result<f64> {
    let l = samples.len();
    if k < 2 || l < k {
        return Err(Error::Data(format!(
            "cross validation needs 2 <= k <= L (k = {k}, L = {l})"
        )));
    }
    let mut order: Vec<usize> = (0..l).collect();
    rng.shuffle(&mut order);

    let base = l / k;
    let extra = l % k;
    let mut preds = Vec::with_capacity(l);
    let mut actuals = Vec::with_capacity(l);
    let mut start = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        let held: &[usize] = &order[start..start + size];
        let train: Vec<ProfileSample> = order[..start]
            .iter()
            .chain(&order[start + size..])
            .map(|&i| samples[i].clone())
            .collect();
        let model = fit_linear(&train, metric)?;
        for &i in held {
            preds.push(model.predict(&samples[i].z)?);
            actuals.push(samples[i].metric(metric));
        }
        start += size;
    }
    debug_assert_eq!(preds.len(), l);
    rmspe(&preds, &actuals)
}
