//! Acquisition functions for the minimization loop: closed-form Expected
//! Improvement, the indicator-masked variant that annihilates predicted
//! budget violations, and the probability-weighted variant that softens the
//! indicators with the hardware models' residual spread.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gp::GpState;
use crate::hw::{Budget, HwLinearModel};
use crate::rng::Stream;
use crate::space::{DesignPoint, SearchSpace};
use crate::stats::{normal_cdf, normal_pdf};

/// Objective value standing in for the incumbent before any feasible
/// completed trial exists (errors live in [0, 1]).
pub const NO_INCUMBENT_ERROR: f64 = 1.0;

/// Extra candidate batches drawn when every score in a batch is zero.
const FALLBACK_BATCHES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AcquisitionKind {
    Ei,
    HwIeci,
    HwCwei,
}

#[derive(Debug, Clone, Copy)]
pub struct AcquisitionChoice {
    pub kind: AcquisitionKind,
    pub candidate_count: usize,
}

/// Best feasible observed objective and where it was seen.
#[derive(Debug, Clone)]
pub struct Incumbent {
    pub best_error: f64,
    pub point: DesignPoint,
}

/// Everything a single acquisition evaluation needs.
pub struct AcquisitionContext<'a> {
    pub gp: &'a GpState,
    pub power_model: &'a HwLinearModel,
    pub memory_model: &'a HwLinearModel,
    pub budget: &'a Budget,
    /// y+ in the improvement term; [`NO_INCUMBENT_ERROR`] when undefined.
    pub incumbent_error: f64,
}

/// Closed-form Expected Improvement for minimization.
///
/// With s = sqrt(variance) > 0 and gamma = (best - mu)/s this is
/// s * (gamma * Phi(gamma) + phi(gamma)); at s = 0 it degenerates to
/// max(best - mu, 0). Never negative.
pub fn expected_improvement(mu: f64, variance: f64, best: f64) -> f64 {
    let s = variance.max(0.0).sqrt();
    if s == 0.0 {
        return (best - mu).max(0.0);
    }
    let gamma = (best - mu) / s;
    (s * (gamma * normal_cdf(gamma) + normal_pdf(gamma))).max(0.0)
}

fn ei_at(space: &SearchSpace, x: &DesignPoint, ctx: &AcquisitionContext) -> Result<f64> {
    let unit = space.normalize(x)?;
    let (mu, var) = ctx.gp.posterior(&unit)?;
    Ok(expected_improvement(mu, var, ctx.incumbent_error))
}

/// Indicator-masked EI: exactly zero wherever a predicted metric exceeds its
/// budget, bit-for-bit plain EI where both constraints hold.
pub fn hw_ieci(space: &SearchSpace, x: &DesignPoint, ctx: &AcquisitionContext) -> Result<f64> {
    let z = space.extract_structural(x);
    let p = ctx.power_model.predict(&z)?;
    let m = ctx.memory_model.predict(&z)?;
    if !ctx.budget.allows(p, m) {
        return Ok(0.0);
    }
    ei_at(space, x, ctx)
}

/// Probability-weighted EI: each present budget contributes
/// Phi((budget - prediction) / residual_std); a zero residual spread
/// degenerates to the hard indicator.
pub fn hw_cwei(space: &SearchSpace, x: &DesignPoint, ctx: &AcquisitionContext) -> Result<f64> {
    let z = space.extract_structural(x);
    let mut weight = 1.0;
    for (model, bound) in [
        (ctx.power_model, ctx.budget.power),
        (ctx.memory_model, ctx.budget.memory),
    ] {
        let Some(bound) = bound else { continue };
        let pred = model.predict(&z)?;
        weight *= if model.residual_std == 0.0 {
            if pred <= bound {
                1.0
            } else {
                0.0
            }
        } else {
            normal_cdf((bound - pred) / model.residual_std)
        };
    }
    if weight == 0.0 {
        return Ok(0.0);
    }
    Ok(ei_at(space, x, ctx)? * weight)
}

pub fn score(
    space: &SearchSpace,
    x: &DesignPoint,
    kind: AcquisitionKind,
    ctx: &AcquisitionContext,
) -> Result<f64> {
    match kind {
        AcquisitionKind::Ei => ei_at(space, x, ctx),
        AcquisitionKind::HwIeci => hw_ieci(space, x, ctx),
        AcquisitionKind::HwCwei => hw_cwei(space, x, ctx),
    }
}

/// Score a batch of uniform candidates and return the argmax, ties broken by
/// the lowest candidate index. When a whole batch scores zero (everything
/// masked), up to ten fresh batches are drawn; if all of those are zero as
/// well, the candidate of the final batch minimizing the total normalized
/// predicted budget excess is returned so the loop always has a proposal.
pub fn maximize_acquisition(
    space: &SearchSpace,
    choice: &AcquisitionChoice,
    ctx: &AcquisitionContext,
    rng: &mut Stream,
) -> Result<(DesignPoint, f64)> {
    assert!(choice.candidate_count >= 1);
    let mut last_batch: Vec<DesignPoint> = Vec::new();
    for _round in 0..=FALLBACK_BATCHES {
        let batch: Vec<DesignPoint> = (0..choice.candidate_count)
            .map(|_| space.sample_uniform(rng))
            .collect();
        let mut best: Option<(usize, f64)> = None;
        for (i, cand) in batch.iter().enumerate() {
            let s = score(space, cand, choice.kind, ctx)?;
            if s > 0.0 && best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        if let Some((i, s)) = best {
            return Ok((batch[i].clone(), s));
        }
        last_batch = batch;
    }

    // Everything scored zero everywhere: least-infeasible candidate wins.
    let mut best_idx = 0;
    let mut best_excess = f64::INFINITY;
    for (i, cand) in last_batch.iter().enumerate() {
        let z = space.extract_structural(cand);
        let mut excess = 0.0;
        if let Some(pb) = ctx.budget.power {
            excess += (ctx.power_model.predict(&z)? - pb).max(0.0) / pb;
        }
        if let Some(mb) = ctx.budget.memory {
            excess += (ctx.memory_model.predict(&z)? - mb).max(0.0) / mb;
        }
        if excess < best_excess {
            best_excess = excess;
            best_idx = i;
        }
    }
    Ok((last_batch[best_idx].clone(), 0.0))
}
