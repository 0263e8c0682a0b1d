//! Hyper-parameter search space: parameter declarations, uniform sampling,
//! unit-cube normalization for the surrogate, and extraction of the
//! structural subvector that drives the hardware models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamKind {
    Integer,
    Continuous,
    LogContinuous,
}

/// One tunable parameter. `structural` parameters are the discrete
/// architecture knobs that determine power and memory; they must be integer
/// valued with a nonnegative range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub structural: bool,
}

impl ParamSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lower < self.upper) {
            return Err(Error::Space(format!(
                "`{}`: lower ({}) must be < upper ({})",
                self.name, self.lower, self.upper
            )));
        }
        if self.kind == ParamKind::Integer
            && (self.lower.fract() != 0.0 || self.upper.fract() != 0.0)
        {
            return Err(Error::Space(format!(
                "`{}`: integer parameter needs integer bounds",
                self.name
            )));
        }
        if self.kind == ParamKind::LogContinuous && self.lower <= 0.0 {
            return Err(Error::Space(format!(
                "`{}`: log-continuous parameter needs lower > 0",
                self.name
            )));
        }
        if self.structural {
            if self.kind != ParamKind::Integer {
                return Err(Error::Space(format!(
                    "`{}`: structural parameters must be integer",
                    self.name
                )));
            }
            if self.lower < 0.0 {
                return Err(Error::Space(format!(
                    "`{}`: structural parameters must be nonnegative",
                    self.name
                )));
            }
        }
        Ok(())
    }

    fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper && (self.kind != ParamKind::Integer || v.fract() == 0.0)
    }
}

/// Ordered parameter list; declaration order is the canonical vector layout
/// for every encoding in the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    params: Vec<ParamSpec>,
}

/// One full assignment of the search space, aligned with the canonical
/// order. Integer coordinates are stored as whole-valued reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub values: Vec<f64>,
}

/// The structural subvector `z`: nonnegative integers, canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralVector {
    pub values: Vec<u32>,
}

impl StructuralVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }
}

impl SearchSpace {
    pub fn new(params: Vec<ParamSpec>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::Space("no parameters declared".into()));
        }
        for p in &params {
            p.validate()?;
        }
        for (i, p) in params.iter().enumerate() {
            if params[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::Space(format!("duplicate parameter name `{}`", p.name)));
            }
        }
        Ok(SearchSpace { params })
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn structural_count(&self) -> usize {
        self.params.iter().filter(|p| p.structural).count()
    }

    pub fn structural_names(&self) -> Vec<&str> {
        self.params
            .iter()
            .filter(|p| p.structural)
            .map(|p| p.name.as_str())
            .collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    /// Validate a raw value vector as an in-bounds design point.
    pub fn point(&self, values: Vec<f64>) -> Result<DesignPoint> {
        self.check_len(values.len())?;
        for (p, &v) in self.params.iter().zip(&values) {
            if !p.contains(v) {
                return Err(Error::OutOfBounds(format!(
                    "`{}` = {} outside [{}, {}]",
                    p.name, v, p.lower, p.upper
                )));
            }
        }
        Ok(DesignPoint { values })
    }

    /// Independent uniform draw per coordinate: integer ranges inclusive,
    /// continuous ranges uniform, log-continuous ranges uniform in log space.
    pub fn sample_uniform(&self, rng: &mut Stream) -> DesignPoint {
        let values = self
            .params
            .iter()
            .map(|p| match p.kind {
                ParamKind::Integer => rng.uniform_int(p.lower as i64, p.upper as i64) as f64,
                ParamKind::Continuous => rng.uniform_in(p.lower, p.upper),
                // exp(ln(bound)) can overshoot the bound by an ulp
                ParamKind::LogContinuous => rng
                    .uniform_in(p.lower.ln(), p.upper.ln())
                    .exp()
                    .clamp(p.lower, p.upper),
            })
            .collect();
        DesignPoint { values }
    }

    /// Map an in-bounds point onto the unit cube (affine per coordinate,
    /// affine in log space for log-continuous parameters).
    pub fn normalize(&self, x: &DesignPoint) -> Result<Vec<f64>> {
        self.check_len(x.values.len())?;
        self.params
            .iter()
            .zip(&x.values)
            .map(|(p, &v)| {
                if v < p.lower || v > p.upper {
                    return Err(Error::OutOfBounds(format!(
                        "`{}` = {} outside [{}, {}]",
                        p.name, v, p.lower, p.upper
                    )));
                }
                Ok(match p.kind {
                    ParamKind::LogContinuous => {
                        (v.ln() - p.lower.ln()) / (p.upper.ln() - p.lower.ln())
                    }
                    _ => (v - p.lower) / (p.upper - p.lower),
                })
            })
            .collect()
    }

    /// Inverse of [`normalize`](Self::normalize) before any integer rounding.
    /// Accepts coordinates outside `[0, 1]` (affine extrapolation) so random
    /// walk proposals can be mapped back and then clipped.
    pub fn denormalize_raw(&self, unit: &[f64]) -> Result<Vec<f64>> {
        self.check_len(unit.len())?;
        Ok(self
            .params
            .iter()
            .zip(unit)
            .map(|(p, &u)| match p.kind {
                ParamKind::LogContinuous => {
                    (p.lower.ln() + u * (p.upper.ln() - p.lower.ln())).exp()
                }
                _ => p.lower + u * (p.upper - p.lower),
            })
            .collect())
    }

    /// Clip each coordinate into bounds, then round integer kinds to the
    /// nearest whole value. Always yields a valid design point.
    pub fn clip_round(&self, raw: &[f64]) -> Result<DesignPoint> {
        self.check_len(raw.len())?;
        let values = self
            .params
            .iter()
            .zip(raw)
            .map(|(p, &v)| {
                let clipped = v.clamp(p.lower, p.upper);
                match p.kind {
                    ParamKind::Integer => clipped.round(),
                    _ => clipped,
                }
            })
            .collect();
        Ok(DesignPoint { values })
    }

    /// Structural coordinates in canonical order, cast to integers.
    pub fn extract_structural(&self, x: &DesignPoint) -> StructuralVector {
        let values = self
            .params
            .iter()
            .zip(&x.values)
            .filter(|(p, _)| p.structural)
            .map(|(_, &v)| v.round().max(0.0) as u32)
            .collect();
        StructuralVector { values }
    }
}
