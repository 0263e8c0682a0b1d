//! Independent oracles shared by the integration suites. Everything here is
//! written from scratch against the mathematical definitions and must not
//! call into the implementation paths it checks.

// Index-style loops are deliberate here: the oracles stay close to the
// textbook formulas instead of the library's idioms.
#![allow(dead_code, clippy::needless_range_loop)]

/// Matern 5/2 with per-dimension lengthscales, written independently of the
/// library (loop accumulation, explicit constants).
pub fn oracle_kernel(a: &[f64], b: &[f64], amp2: f64, ls: &[f64]) -> f64 {
    let mut r2 = 0.0;
    for i in 0..a.len() {
        let d = (a[i] - b[i]) / ls[i];
        r2 += d * d;
    }
    let r = r2.sqrt();
    let s5 = 5.0_f64.sqrt();
    amp2 * (1.0 + s5 * r + 5.0 / 3.0 * r2) * (-s5 * r).exp()
}

/// Gauss-Jordan inverse with partial pivoting; returns None when singular.
pub fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            m[i][col]
                .abs()
                .partial_cmp(&m[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for row in 0..n {
            if row != col {
                let f = m[row][col];
                if f != 0.0 {
                    for k in 0..2 * n {
                        let t = m[col][k];
                        m[row][k] -= f * t;
                    }
                }
            }
        }
    }
    Some(m.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// log(det) via LU decomposition with partial pivoting (Doolittle).
pub fn log_det_lu(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut log_det = 0.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                m[i][col]
                    .abs()
                    .partial_cmp(&m[j][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        if pivot != col {
            m.swap(col, pivot);
            // determinant sign flips do not matter: covariances have
            // positive determinants
        }
        log_det += m[col][col].abs().ln();
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                let t = m[col][k];
                m[row][k] -= f * t;
            }
        }
    }
    log_det
}

/// Full dense GP posterior: mean, variance, and log marginal likelihood,
/// computed with explicit inverses and determinants.
pub struct DenseGpOracle {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub amp2: f64,
    pub ls: Vec<f64>,
    pub noise: f64,
}

impl DenseGpOracle {
    fn covariance(&self) -> Vec<Vec<f64>> {
        let n = self.x.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let mut k = oracle_kernel(&self.x[i], &self.x[j], self.amp2, &self.ls);
                        if i == j {
                            k += self.noise;
                        }
                        k
                    })
                    .collect()
            })
            .collect()
    }

    pub fn mean(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.y.len() as f64
    }

    pub fn posterior(&self, x_star: &[f64]) -> (f64, f64) {
        let n = self.x.len();
        let inv = gauss_jordan_inverse(&self.covariance()).expect("oracle covariance invertible");
        let m = self.mean();
        let k_star: Vec<f64> = (0..n)
            .map(|i| oracle_kernel(&self.x[i], x_star, self.amp2, &self.ls))
            .collect();
        let mut mu = m;
        for i in 0..n {
            for j in 0..n {
                mu += k_star[i] * inv[i][j] * (self.y[j] - m);
            }
        }
        let k_ss = oracle_kernel(x_star, x_star, self.amp2, &self.ls);
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += k_star[i] * inv[i][j] * k_star[j];
            }
        }
        (mu, k_ss - quad)
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.x.len();
        let cov = self.covariance();
        let inv = gauss_jordan_inverse(&cov).expect("oracle covariance invertible");
        let m = self.mean();
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += (self.y[i] - m) * inv[i][j] * (self.y[j] - m);
            }
        }
        -0.5 * quad - 0.5 * log_det_lu(&cov) - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }
}

/// Trapezoidal quadrature of the improvement integral
/// int max(best - y, 0) N(y; mu, s^2) dy over [mu - 8s, min(mu + 8s, best)].
pub fn quadrature_ei(mu: f64, s: f64, best: f64, points: usize) -> f64 {
    if s <= 0.0 {
        return (best - mu).max(0.0);
    }
    let lo = mu - 8.0 * s;
    let hi = (mu + 8.0 * s).min(best);
    if hi <= lo {
        return 0.0;
    }
    let h = (hi - lo) / (points - 1) as f64;
    let density = |y: f64| {
        let z = (y - mu) / s;
        (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
    };
    let f = |y: f64| (best - y).max(0.0) * density(y);
    let mut sum = 0.5 * (f(lo) + f(hi));
    for i in 1..points - 1 {
        sum += f(lo + i as f64 * h);
    }
    sum * h
}

/// Standard normal CDF via a plain error-function Taylor series.
pub fn series_normal_cdf(x: f64) -> f64 {
    let z = x / 2.0_f64.sqrt();
    // erf(z) = 2/sqrt(pi) sum (-1)^n z^(2n+1) / (n! (2n+1))
    let mut term = z;
    let mut sum = z;
    let mut n = 1.0;
    while term.abs() > 1e-18 && n < 300.0 {
        term *= -z * z / n;
        sum += term / (2.0 * n + 1.0);
        n += 1.0;
    }
    let erf = 2.0 / std::f64::consts::PI.sqrt() * sum;
    0.5 * (1.0 + erf)
}

/// Simple deterministic generator for oracle-side test data, independent of
/// the library's stream implementation.
pub struct OracleRng(u64);

impl OracleRng {
    pub fn new(seed: u64) -> Self {
        OracleRng(seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493))
    }

    pub fn next_u64(&mut self) -> u64 {
        // xorshift64*
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545F4914F6CDD1D)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }
}
