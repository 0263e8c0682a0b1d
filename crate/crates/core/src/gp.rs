//! Gaussian-process regression surrogate on the normalized unit cube.
//!
//! Matern 5/2 kernel with per-dimension lengthscales, constant mean equal to
//! the sample mean of the targets, Cholesky factorization with jitter
//! escalation, and a seeded multi-start random search with coordinate
//! refinement for kernel hyper-parameter selection.

use crate::error::{Error, Result};
use crate::rng::Stream;

const SQRT5: f64 = 2.23606797749979;

/// Jitter escalation ladder for near-singular covariance matrices.
const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;

/// Box bounds for hyper-parameter search, scale-free because inputs are
/// normalized to [0, 1].
pub const AMPLITUDE2_BOUNDS: (f64, f64) = (1e-4, 1e2);
pub const LENGTHSCALE_BOUNDS: (f64, f64) = (1e-2, 1e1);
pub const NOISE_BOUNDS: (f64, f64) = (1e-8, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct KernelHyper {
    pub amplitude2: f64,
    pub lengthscales: Vec<f64>,
    pub noise: f64,
}

impl KernelHyper {
    pub fn unit(dim: usize) -> Self {
        KernelHyper {
            amplitude2: 1.0,
            lengthscales: vec![1.0; dim],
            noise: 1e-4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude2 > 0.0) {
            return Err(Error::GpFit("amplitude^2 must be positive".into()));
        }
        if self.lengthscales.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::GpFit("lengthscales must be positive".into()));
        }
        if self.noise < 0.0 {
            return Err(Error::GpFit("noise variance must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Matern 5/2 covariance between two points of the unit cube.
pub fn kernel_eval(x1: &[f64], x2: &[f64], hyper: &KernelHyper) -> Result<f64> {
    if x1.len() != hyper.lengthscales.len() || x2.len() != hyper.lengthscales.len() {
        return Err(Error::DimensionMismatch {
            expected: hyper.lengthscales.len(),
            got: x1.len().max(x2.len()),
        });
    }
    let mut r2 = 0.0;
    for ((a, b), l) in x1.iter().zip(x2).zip(&hyper.lengthscales) {
        let d = (a - b) / l;
        r2 += d * d;
    }
    let r = r2.sqrt();
    Ok(hyper.amplitude2 * (1.0 + SQRT5 * r + 5.0 * r2 / 3.0) * (-SQRT5 * r).exp())
}

/// Fitted surrogate state. Immutable after construction; posterior queries
/// are pure.
#[derive(Debug, Clone)]
pub struct GpState {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub hyper: KernelHyper,
    /// Lower-triangular factor of K + (noise + jitter) I, row-major n x n.
    chol: Vec<f64>,
    /// (K + noise I)^-1 (y - mean)
    alpha: Vec<f64>,
    pub mean: f64,
    /// Jitter actually applied on top of the declared noise.
    pub jitter: f64,
}

fn cholesky_in_place(a: &mut [f64], n: usize) -> std::result::Result<(), usize> {
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= a[i * n + k] * a[j * n + k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(i);
                }
                a[i * n + i] = sum.sqrt();
            } else {
                a[i * n + j] = sum / a[j * n + j];
            }
        }
        for j in (i + 1)..n {
            a[i * n + j] = 0.0;
        }
    }
    Ok(())
}

fn solve_lower(chol: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in 0..n {
        let mut sum = x[i];
        for k in 0..i {
            sum -= chol[i * n + k] * x[k];
        }
        x[i] = sum / chol[i * n + i];
    }
    x
}

fn solve_lower_transpose(chol: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let mut sum = x[i];
        for k in (i + 1)..n {
            sum -= chol[k * n + i] * x[k];
        }
        x[i] = sum / chol[i * n + i];
    }
    x
}

/// Fit the GP: build the covariance, factorize with jitter escalation, and
/// solve for the alpha vector. The mean is the sample mean of `y`.
pub fn gp_fit(x: Vec<Vec<f64>>, y: Vec<f64>, hyper: KernelHyper) -> Result<GpState> {
    hyper.validate()?;
    let n = x.len();
    if n == 0 || y.len() != n {
        return Err(Error::GpFit(format!(
            "need n >= 1 with matching targets (n = {}, targets = {})",
            n,
            y.len()
        )));
    }
    let dim = hyper.lengthscales.len();
    for row in &x {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: row.len(),
            });
        }
    }

    let mean = y.iter().sum::<f64>() / n as f64;
    let mut base = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let k = kernel_eval(&x[i], &x[j], &hyper)?;
            base[i * n + j] = k;
            base[j * n + i] = k;
        }
    }

    let mut jitter = 0.0;
    loop {
        let mut a = base.clone();
        for i in 0..n {
            a[i * n + i] += hyper.noise + jitter;
        }
        if cholesky_in_place(&mut a, n).is_ok() {
            let centered: Vec<f64> = y.iter().map(|v| v - mean).collect();
            let tmp = solve_lower(&a, n, &centered);
            let alpha = solve_lower_transpose(&a, n, &tmp);
            return Ok(GpState {
                x,
                y,
                hyper,
                chol: a,
                alpha,
                mean,
                jitter,
            });
        }
        jitter = if jitter == 0.0 { JITTER_START } else { jitter * 10.0 };
        if jitter > JITTER_MAX {
            return Err(Error::GpFit(format!(
                "covariance not positive definite after jitter up to {JITTER_MAX}"
            )));
        }
    }
}

impl GpState {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn chol(&self) -> &[f64] {
        &self.chol
    }

    /// Posterior mean and variance at a query point. The variance is clamped
    /// at zero to absorb round-off.
    pub fn posterior(&self, x_star: &[f64]) -> Result<(f64, f64)> {
        let n = self.len();
        let mut k_star = vec![0.0; n];
        for (i, row) in self.x.iter().enumerate() {
            k_star[i] = kernel_eval(row, x_star, &self.hyper)?;
        }
        let mu = self.mean + dot(&k_star, &self.alpha);
        let v = solve_lower(&self.chol, n, &k_star);
        let k_ss = kernel_eval(x_star, x_star, &self.hyper)?;
        let var = (k_ss - dot(&v, &v)).max(0.0);
        Ok((mu, var))
    }

    /// Log marginal likelihood of the fitted state.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.len();
        let data_term: f64 = self
            .y
            .iter()
            .zip(&self.alpha)
            .map(|(y, a)| (y - self.mean) * a)
            .sum();
        let log_det: f64 = (0..n).map(|i| self.chol[i * n + i].ln()).sum();
        -0.5 * data_term - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn fit_lml(x: &[Vec<f64>], y: &[f64], hyper: &KernelHyper) -> Option<f64> {
    gp_fit(x.to_vec(), y.to_vec(), hyper.clone())
        .ok()
        .map(|s| s.log_marginal_likelihood())
}

/// Select kernel hyper-parameters by maximizing the log marginal likelihood:
/// 8 random log-space starts, each refined by a fixed schedule of coordinate
/// steps. Deterministic given the stream.
pub fn optimize_hypers(x: &[Vec<f64>], y: &[f64], rng: &mut Stream) -> Result<KernelHyper> {
    let n = x.len();
    if n < 2 {
        return Err(Error::GpFit("hyper-parameter search needs n >= 2".into()));
    }
    let dim = x[0].len();

    let y_var = {
        let m = y.iter().sum::<f64>() / n as f64;
        (y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64).max(1e-12)
    };

    let mut starts: Vec<KernelHyper> = Vec::with_capacity(8);
    starts.push(KernelHyper {
        amplitude2: y_var.clamp(AMPLITUDE2_BOUNDS.0, AMPLITUDE2_BOUNDS.1),
        lengthscales: vec![0.5; dim],
        noise: (1e-3 * y_var).clamp(NOISE_BOUNDS.0, NOISE_BOUNDS.1),
    });
    for _ in 1..8 {
        let amplitude2 = log_uniform(rng, AMPLITUDE2_BOUNDS);
        let lengthscales = (0..dim).map(|_| log_uniform(rng, LENGTHSCALE_BOUNDS)).collect();
        let noise = log_uniform(rng, NOISE_BOUNDS);
        starts.push(KernelHyper {
            amplitude2,
            lengthscales,
            noise,
        });
    }

    let mut best: Option<(f64, KernelHyper)> = None;
    for start in &starts {
        let Some(score0) = fit_lml(x, y, start) else {
            continue;
        };
        let (score, refined) = refine(x, y, start.clone(), score0);
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, refined));
        }
    }

    match best {
        Some((_, hyper)) => Ok(hyper),
        None => Ok(KernelHyper::unit(dim)),
    }
}

fn log_uniform(rng: &mut Stream, bounds: (f64, f64)) -> f64 {
    rng.uniform_in(bounds.0.ln(), bounds.1.ln()).exp()
}

/// Coordinate descent in log space with a shrinking step schedule. Only
/// accepts improvements, so the result is never worse than the start.
fn refine(x: &[Vec<f64>], y: &[f64], mut hyper: KernelHyper, mut score: f64) -> (f64, KernelHyper) {
    let dim = hyper.lengthscales.len();
    let n_coords = dim + 2;
    let mut step = 1.2;
    for _sweep in 0..9 {
        for c in 0..n_coords {
            // Walk in the improving direction while it keeps paying off.
            for &dir in &[1.0f64, -1.0] {
                let mut moved = false;
                for _ in 0..5 {
                    let mut cand = hyper.clone();
                    nudge(&mut cand, c, dir * step);
                    match fit_lml(x, y, &cand) {
                        Some(s) if s > score => {
                            hyper = cand;
                            score = s;
                            moved = true;
                        }
                        _ => break,
                    }
                }
                if moved {
                    break;
                }
            }
        }
        step *= 0.6;
    }
    (score, hyper)
}

fn nudge(hyper: &mut KernelHyper, coord: usize, log_delta: f64) {
    let dim = hyper.lengthscales.len();
    let f = log_delta.exp();
    if coord == 0 {
        hyper.amplitude2 = (hyper.amplitude2 * f).clamp(AMPLITUDE2_BOUNDS.0, AMPLITUDE2_BOUNDS.1);
    } else if coord <= dim {
        let l = &mut hyper.lengthscales[coord - 1];
        *l = (*l * f).clamp(LENGTHSCALE_BOUNDS.0, LENGTHSCALE_BOUNDS.1);
    } else {
        hyper.noise = (hyper.noise * f).clamp(NOISE_BOUNDS.0, NOISE_BOUNDS.1);
    }
}
