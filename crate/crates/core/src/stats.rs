//! Scalar statistics helpers: error function, normal density/CDF, moments.

use std::f64::consts::{FRAC_2_SQRT_PI, PI, SQRT_2};

/// Error function, accurate to roughly 1e-14 over the full range.
///
/// Taylor series for small arguments, Lentz continued fraction for the
/// complementary function elsewhere.
pub fn erf(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 2.5 {
        erf_series(x)
    } else if x > 0.0 {
        1.0 - erfc_cf(ax)
    } else {
        erfc_cf(ax) - 1.0
    }
}

fn erf_series(x: f64) -> f64 {
    // erf(x) = 2/sqrt(pi) * sum_n (-1)^n x^(2n+1) / (n! (2n+1))
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 1.0;
    loop {
        term *= -x2 / n;
        let delta = term / (2.0 * n + 1.0);
        sum += delta;
        if delta.abs() < 1e-18 * sum.abs().max(1e-300) || n > 200.0 {
            break;
        }
        n += 1.0;
    }
    FRAC_2_SQRT_PI * sum
}

/// erfc(x) for x > 0 via the standard continued fraction (modified Lentz).
fn erfc_cf(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut f = tiny;
    let mut c = f;
    let mut d = 0.0;
    // K = 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + 2/(x + ...)))))
    for k in 0..200 {
        let (a, b) = if k == 0 {
            (1.0, x)
        } else {
            (k as f64 / 2.0, x)
        };
        d = b + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / PI.sqrt() * f
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / SQRT_2))
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (divides by n).
pub fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Sample standard deviation (divides by n-1); 0 for fewer than two points.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}
