//! Order-independent summaries and interval estimates for Monte Carlo output.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Pairwise (cascade) summation of `values` after sorting, so the result does
/// not depend on the order in which trials finished.
pub fn stable_sum(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    pairwise(&v)
}

fn pairwise(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise(&v[..mid]) + pairwise(&v[mid..])
}

/// Sample mean with a normal-approximation confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSummary {
    pub count: usize,
    pub mean: f64,
    pub std_dev: f64,
    /// `Z95 · s / √n`; zero for fewer than two values.
    pub half_width: f64,
}

impl MeanSummary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { count: 0, mean: f64::NAN, std_dev: f64::NAN, half_width: f64::NAN };
        }
        let mean = stable_sum(values) / n as f64;
        if n < 2 {
            return Self { count: n, mean, std_dev: 0.0, half_width: 0.0 };
        }
        let sq: Vec<f64> = values.iter().map(|x| (x - mean) * (x - mean)).collect();
        let std_dev = (stable_sum(&sq) / (n - 1) as f64).sqrt();
        Self { count: n, mean, std_dev, half_width: Z95 * std_dev / (n as f64).sqrt() }
    }

    pub fn ci_low(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn ci_high(&self) -> f64 {
        self.mean + self.half_width
    }
}

/// Binomial proportion with a Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Proportion {
    pub fn new(successes: u64, trials: u64) -> Self {
        if trials == 0 {
            return Self { successes, trials, p_hat: f64::NAN, ci_low: 0.0, ci_high: 1.0 };
        }
        let n = trials as f64;
        let p = successes as f64 / n;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / n;
        let centre = (p + z2 / (2.0 * n)) / denom;
        let spread = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        Self {
            successes,
            trials,
            p_hat: p,
            ci_low: if successes == 0 { 0.0 } else { (centre - spread).max(0.0) },
            ci_high: if successes == trials { 1.0 } else { (centre + spread).min(1.0) },
        }
    }
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return KsResult { statistic: 0.0, p_value: 1.0 };
    }
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    KsResult { statistic: d, p_value: kolmogorov_tail((en + 0.12 + 0.11 / en) * d) }
}

/// `P(K > λ)` for the Kolmogorov distribution.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * (k as f64 * lambda).powi(2)).exp();
        sum += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
}

pub fn least_squares(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = xs.iter().zip(ys).map(|(x, y)| y - (intercept + slope * x)).collect();
    Some(LinearFit { slope, intercept, residuals })
}
