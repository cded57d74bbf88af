//! Estimators and weighted-sample statistics shared across modules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::StreamKey;
use rand::Rng;

/// Which route produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Direct,
    Annealed,
    LowerBound,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Annealed => "annealed",
            Method::LowerBound => "lower_bound",
        }
    }
}

/// A value with its standard error, sample count and method tag.
/// Deterministic bounds carry `std_err = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
    pub n: u64,
    pub method: Method,
}

impl Estimate {
    pub fn new(value: f64, std_err: f64, n: u64, method: Method) -> Self {
        Estimate {
            value,
            std_err,
            n,
            method,
        }
    }

    /// |self - other| within `k` combined standard errors.
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        let se = (self.std_err * self.std_err + other.std_err * other.std_err).sqrt();
        (self.value - other.value).abs() <= k * se
    }
}

/// Welford online mean/variance accumulator.
#[derive(Debug, Clone, Default)]
pub struct RunningMoments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.count > 1 {
            self.m2 / (self.count - 1) as f64
        } else {
            0.0
        }
    }

    pub fn std_err(&self) -> f64 {
        if self.count > 0 {
            (self.variance() / self.count as f64).sqrt()
        } else {
            0.0
        }
    }
}

/// Mean and standard error of a slice.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let mut acc = RunningMoments::new();
    for &x in xs {
        acc.push(x);
    }
    (acc.mean(), acc.std_err())
}

/// Binomial standard error `sqrt(p(1-p)/n)`.
pub fn binomial_se(p: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Effective sample size `(sum w)^2 / sum w^2` of a weight vector.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if s2 == 0.0 {
        0.0
    } else {
        s * s / s2
    }
}

/// Weighted quantiles by the left-continuous inverse of the weighted CDF.
/// Returns one value per requested `q`, using a single sort of the input.
pub fn weighted_quantiles(samples: &[(f64, f64)], qs: &[f64]) -> Vec<f64> {
    assert!(!samples.is_empty());
    let mut sorted: Vec<(f64, f64)> = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = sorted.iter().map(|(_, w)| w).sum();
    qs.iter()
        .map(|&q| {
            let target = q.clamp(0.0, 1.0) * total;
            let mut cum = 0.0;
            for &(v, w) in &sorted {
                cum += w;
                if cum >= target {
                    return v;
                }
            }
            sorted.last().unwrap().0
        })
        .collect()
}

/// Weighted median.
pub fn weighted_median(samples: &[(f64, f64)]) -> f64 {
    weighted_quantiles(samples, &[0.5])[0]
}

/// Self-normalized weighted mean of `z` with the ratio-estimator (delta
/// method) standard error: `m = sum(w z)/sum(w)`,
/// `se^2 = sum(w^2 (z - m)^2) / (sum w)^2`.
pub fn weighted_mean_se(samples: &[(f64, f64)]) -> (f64, f64) {
    let sw: f64 = samples.iter().map(|(_, w)| w).sum();
    if sw == 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let m: f64 = samples.iter().map(|(z, w)| z * w).sum::<f64>() / sw;
    let var: f64 = samples
        .iter()
        .map(|(z, w)| {
            let d = z - m;
            w * w * d * d
        })
        .sum::<f64>()
        / (sw * sw);
    (m, var.sqrt())
}

/// Kendall rank correlation of y against x over all pairs (no tie
/// correction; exact-tie pairs contribute zero).
pub fn kendall_tau(points: &[(f64, f64)]) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let mut s = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = points[j].0 - points[i].0;
            let dy = points[j].1 - points[i].1;
            let prod = dx * dy;
            if prod > 0.0 {
                s += 1;
            } else if prod < 0.0 {
                s -= 1;
            }
        }
    }
    s as f64 / (n * (n - 1) / 2) as f64
}

/// Ordinary least squares fit `y = intercept + slope * x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidInput(
            "need at least two (x, y) points".into(),
        ));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("x values are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Draw `n` bootstrap indices (sampling with replacement) from `0..n`.
pub fn bootstrap_indices(n: usize, key: &StreamKey) -> Vec<usize> {
    let mut rng = key.rng();
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

/// Percentile of a slice (interpolated), for bootstrap interval ends.
pub fn percentile(xs: &[f64], p: f64) -> f64 {
    assert!(!xs.is_empty());
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let h = (s.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        s[lo]
    } else {
        s[lo] + (s[hi] - s[lo]) * (h - lo as f64)
    }
}
