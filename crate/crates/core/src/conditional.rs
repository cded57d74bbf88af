//! Conditional-on-survival statistics via exact importance weights
//! `exp(-lambda Delta(X))`, the traversal/occupation and block-range event
//! detectors, and scaling-exponent fits.
//!
//! Conditioning is self-normalized: the X-independent factor
//! `exp(-lambda (E|R_t| + 2a))` cancels in every ratio, so weights are the
//! conditional part only. Everything here treats one sampled `X` path plus
//! its Delta estimate as the unit of work.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::{
    interval_range, occupation_time, path_extrema, sample_brownian_path, PathGrid, StreamKey,
};
use crate::sausage::{conditional_weight, debias_factor, delta_functional, SupMode};
use crate::stats::{
    effective_sample_size, kendall_tau, linear_fit, weighted_mean_se, weighted_median,
    weighted_quantiles,
};
use crate::trapfield::SimParams;

/// Parameters of the traversal/occupation event: the particle either
/// crosses `(kappa ||X||, ||X||)` at least diffusively fast (time gap at
/// most `k ((1-kappa)||X||)^2`) or occupies that band for total time
/// `epsilon t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventParamsA {
    pub kappa: f64,
    pub epsilon: f64,
    pub k_diff: f64,
}

impl EventParamsA {
    pub fn new(kappa: f64, epsilon: f64, k_diff: f64) -> Result<Self> {
        if !(0.0 < kappa && kappa < 1.0) {
            return Err(Error::invalid_param("kappa must be in (0,1)"));
        }
        if !(0.0 < epsilon && epsilon <= 1.0) {
            return Err(Error::invalid_param("epsilon must be in (0,1]"));
        }
        if !(k_diff > 0.0) {
            return Err(Error::invalid_param("k_diff must be > 0"));
        }
        Ok(EventParamsA {
            kappa,
            epsilon,
            k_diff,
        })
    }
}

/// Parameters of the block-range event: at least `eps t^{1/3}/f(t)` disjoint
/// intervals of length `t^{2/3} f(t)` each with range at least
/// `k t^{1/3} sqrt(f(t))`, where `f(t) = t^{f_exponent}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventParamsB {
    pub epsilon: f64,
    pub k_diff: f64,
    pub f_exponent: f64,
}

impl EventParamsB {
    pub fn new(epsilon: f64, k_diff: f64, f_exponent: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::invalid_param("epsilon must be > 0"));
        }
        if !(k_diff > 0.0) {
            return Err(Error::invalid_param("k_diff must be > 0"));
        }
        if !(0.0 < f_exponent && f_exponent < 1.0 / 3.0) {
            return Err(Error::invalid_param("f_exponent must be in (0, 1/3)"));
        }
        Ok(EventParamsB {
            epsilon,
            k_diff,
            f_exponent,
        })
    }

    pub fn f(&self, t: f64) -> f64 {
        t.powf(self.f_exponent)
    }

    pub fn block_len(&self, t: f64) -> f64 {
        t.powf(2.0 / 3.0) * self.f(t)
    }

    pub fn range_threshold(&self, t: f64) -> f64 {
        self.k_diff * t.powf(1.0 / 3.0) * self.f(t).sqrt()
    }

    pub fn required_count(&self, t: f64) -> usize {
        (self.epsilon * t.powf(1.0 / 3.0) / self.f(t)).ceil() as usize
    }
}

/// Which branch detected the traversal/occupation event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Via {
    Traversal,
    Occupation,
    None,
}

/// Grid times at which the path attains `level` (steps whose endpoints
/// bracket it). The list is increasing by construction.
fn attainment_times(values: &[f64], dt: f64, level: f64) -> Vec<f64> {
    let mut times = Vec::new();
    for i in 0..values.len() - 1 {
        let d0 = values[i] - level;
        let d1 = values[i + 1] - level;
        if d0 == 0.0 || (d0 > 0.0) != (d1 > 0.0) || d1 == 0.0 {
            times.push(i as f64 * dt);
        }
    }
    times
}

/// Smallest |a - b| over pairs from two sorted lists (two-pointer sweep).
fn min_gap(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let mut best = f64::INFINITY;
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() && j < b.len() {
        best = best.min((a[i] - b[j]).abs());
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    // Tail of whichever list remains against the last element of the other.
    while i < a.len() {
        best = best.min((a[i] - b[b.len() - 1]).abs());
        i += 1;
    }
    while j < b.len() {
        best = best.min((a[a.len() - 1] - b[j]).abs());
        j += 1;
    }
    Some(best)
}

/// Detect the traversal/occupation event on the side achieving the maximal
/// displacement; the path is mirrored first when that side is negative.
pub fn event_a_indicator(p: &PathGrid, params: &EventParamsA) -> (bool, Via) {
    let e = path_extrema(p);
    let norm = e.max_displacement();
    if norm <= 0.0 {
        return (false, Via::None);
    }
    let mirrored;
    let path: &PathGrid = if -e.min > e.max {
        mirrored = p.negated();
        &mirrored
    } else {
        p
    };
    let dt = p.dt();
    let l1 = params.kappa * norm;
    let l2 = norm;

    let t1 = attainment_times(&path.values, dt, l1);
    let t2 = attainment_times(&path.values, dt, l2);
    if let Some(gap) = min_gap(&t1, &t2) {
        let budget = params.k_diff * ((1.0 - params.kappa) * norm).powi(2);
        if gap <= budget {
            return (true, Via::Traversal);
        }
    }

    if occupation_time(path, l1, l2) >= params.epsilon * p.t_end {
        return (true, Via::Occupation);
    }
    (false, Via::None)
}

/// Count blocks of length `t^{2/3} f(t)` whose path range clears the
/// threshold; the flag holds when the count reaches `eps t^{1/3}/f(t)`.
///
/// The default partition starts at 0 and drops the last partial block; the
/// greedy variant also tries quarter-block offsets and keeps the best
/// count (the fixed partition is a conservative detector).
pub fn event_b_indicator(p: &PathGrid, params: &EventParamsB, greedy: bool) -> (bool, usize) {
    let t = p.t_end;
    let block = params.block_len(t);
    if block > t {
        return (false, 0);
    }
    let thr = params.range_threshold(t);
    let required = params.required_count(t).max(1);
    let offsets: &[f64] = if greedy {
        &[0.0, 0.25, 0.5, 0.75]
    } else {
        &[0.0]
    };
    let mut best = 0usize;
    for &frac in offsets {
        let mut count = 0usize;
        let mut start = frac * block;
        while start + block <= t * (1.0 + 1e-12) {
            let end = (start + block).min(t);
            match interval_range(p, start, end) {
                Ok(r) if r >= thr => count += 1,
                _ => {}
            }
            start += block;
        }
        best = best.max(count);
    }
    (best >= required, best)
}

/// Functionals of one sampled path with its conditional weight.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WeightedSample {
    /// Maximal displacement from the origin.
    pub max_disp: f64,
    pub running_max: f64,
    pub argmax_time: f64,
    /// Conditional weight `exp(-lambda Delta_hat)` (times the jackknife
    /// factor if debiasing is on).
    pub weight: f64,
    pub delta_se: f64,
    pub event_a: bool,
    pub event_a_via: Via,
    pub event_b: bool,
    pub event_b_count: u32,
}

/// Estimator options for the conditional pipeline.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConditionalOptions {
    /// Grid sups by default: the constant part of the grid bias cancels in
    /// self-normalized ratios. Corrected sups matter only for absolute
    /// (annealed) levels.
    pub sup_mode: SupMode,
    pub debias: bool,
    pub greedy_b: bool,
}

impl Default for ConditionalOptions {
    fn default() -> Self {
        ConditionalOptions {
            sup_mode: SupMode::Grid,
            debias: false,
            greedy_b: false,
        }
    }
}

pub const QUANTILE_PROBS: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

/// Weighted summary of one conditional run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionalSummary {
    pub t_end: f64,
    pub lambda: f64,
    pub n_outer: usize,
    pub m_inner: usize,
    /// Weighted quantiles of the maximal displacement at
    /// q in {0.1, 0.25, 0.5, 0.75, 0.9}.
    pub quantiles: Vec<(f64, f64)>,
    pub unweighted_median: f64,
    /// Weighted event probabilities with delta-method standard errors.
    pub event_a_prob: (f64, f64),
    pub event_b_prob: (f64, f64),
    pub event_a_uncond: (f64, f64),
    pub event_b_uncond: (f64, f64),
    pub n_eff: f64,
    /// Set when `n_eff < 50`; the weighted summary is then unreliable.
    pub degenerate_weights: bool,
}

/// A full conditional run: summary plus the per-path samples that feed
/// exponent fits and trend reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionalRun {
    pub summary: ConditionalSummary,
    pub samples: Vec<WeightedSample>,
}

/// Sample `n_outer` paths, weight them by `exp(-lambda Delta_hat)`, and
/// summarize displacement quantiles and event probabilities.
pub fn conditional_statistics(
    params: &SimParams,
    n_outer: usize,
    m_inner: usize,
    event_a: &EventParamsA,
    event_b: &EventParamsB,
    key: &StreamKey,
    opts: &ConditionalOptions,
) -> Result<ConditionalRun> {
    params.validate()?;
    if n_outer < 100 {
        return Err(Error::invalid_param("n_outer must be >= 100"));
    }
    if m_inner < 2 {
        return Err(Error::invalid_param("m_inner must be >= 2"));
    }
    let samples: Vec<WeightedSample> = (0..n_outer)
        .into_par_iter()
        .map(|i| {
            let rep = key.child(i as u64);
            let x = sample_brownian_path(params.t_end, params.n_steps, &rep.child(0))
                .expect("validated params");
            let delta = delta_functional(&x, m_inner, &rep.child(1), opts.sup_mode)
                .expect("m_inner validated");
            let mut weight = conditional_weight(delta.value, params.lambda);
            if opts.debias {
                weight *= debias_factor(&delta, params.lambda);
            }
            let e = path_extrema(&x);
            let (a_flag, a_via) = event_a_indicator(&x, event_a);
            let (b_flag, b_count) = event_b_indicator(&x, event_b, opts.greedy_b);
            WeightedSample {
                max_disp: e.max_displacement(),
                running_max: e.max,
                argmax_time: e.argmax_time,
                weight,
                delta_se: delta.std_err,
                event_a: a_flag,
                event_a_via: a_via,
                event_b: b_flag,
                event_b_count: b_count as u32,
            }
        })
        .collect();

    let disp: Vec<(f64, f64)> = samples.iter().map(|s| (s.max_disp, s.weight)).collect();
    let qs = weighted_quantiles(&disp, &QUANTILE_PROBS);
    let quantiles = QUANTILE_PROBS.iter().copied().zip(qs).collect();
    let unweighted: Vec<(f64, f64)> = samples.iter().map(|s| (s.max_disp, 1.0)).collect();
    let unweighted_median = weighted_median(&unweighted);

    let ind = |flag: bool| if flag { 1.0 } else { 0.0 };
    let a_w: Vec<(f64, f64)> = samples.iter().map(|s| (ind(s.event_a), s.weight)).collect();
    let b_w: Vec<(f64, f64)> = samples.iter().map(|s| (ind(s.event_b), s.weight)).collect();
    let a_u: Vec<(f64, f64)> = samples.iter().map(|s| (ind(s.event_a), 1.0)).collect();
    let b_u: Vec<(f64, f64)> = samples.iter().map(|s| (ind(s.event_b), 1.0)).collect();

    let weights: Vec<f64> = samples.iter().map(|s| s.weight).collect();
    let n_eff = effective_sample_size(&weights);

    let summary = ConditionalSummary {
        t_end: params.t_end,
        lambda: params.lambda,
        n_outer,
        m_inner,
        quantiles,
        unweighted_median,
        event_a_prob: weighted_mean_se(&a_w),
        event_b_prob: weighted_mean_se(&b_w),
        event_a_uncond: weighted_mean_se(&a_u),
        event_b_uncond: weighted_mean_se(&b_u),
        n_eff,
        degenerate_weights: n_eff < 50.0,
    };
    Ok(ConditionalRun { summary, samples })
}

/// Power-law fit of weighted medians against t.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    /// Half the width of the central 95% bootstrap interval.
    pub ci_halfwidth: f64,
    pub slope_lo: f64,
    pub slope_hi: f64,
    pub t_grid: Vec<f64>,
}

/// Weighted median over a batch pre-sorted by value, given per-index
/// bootstrap multiplicities.
fn weighted_median_with_counts(sorted: &[(f64, f64)], counts: &[u32]) -> f64 {
    let total: f64 = sorted
        .iter()
        .zip(counts)
        .map(|((_, w), &c)| w * c as f64)
        .sum();
    let target = 0.5 * total;
    let mut cum = 0.0;
    for ((v, w), &c) in sorted.iter().zip(counts) {
        if c == 0 {
            continue;
        }
        cum += w * c as f64;
        if cum >= target {
            return *v;
        }
    }
    sorted.last().map(|(v, _)| *v).unwrap_or(f64::NAN)
}

/// Least-squares slope of `log(weighted median)` on `log t`, with a
/// bootstrap confidence interval from resampling each per-t batch.
///
/// `batches` holds, per time point, the (value, weight) replicate samples
/// the median is computed from.
pub fn exponent_fit(
    batches: &[(f64, Vec<(f64, f64)>)],
    n_boot: usize,
    key: &StreamKey,
) -> Result<ExponentFit> {
    if batches.len() < 3 {
        return Err(Error::InvalidInput("need at least 3 time points".into()));
    }
    for w in batches.windows(2) {
        if !(w[0].0 < w[1].0) {
            return Err(Error::InvalidInput("t grid must be increasing".into()));
        }
    }
    let t_grid: Vec<f64> = batches.iter().map(|(t, _)| *t).collect();
    let log_t: Vec<f64> = t_grid.iter().map(|t| t.ln()).collect();

    let medians: Vec<f64> = batches
        .iter()
        .map(|(_, samples)| weighted_median(samples))
        .collect();
    if medians.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::InvalidInput(
            "medians must be positive for the log fit".into(),
        ));
    }
    let log_m: Vec<f64> = medians.iter().map(|m| m.ln()).collect();
    let (slope, intercept) = linear_fit(&log_t, &log_m)?;

    // Pre-sort batches once; bootstrap replicates only redraw counts.
    let sorted: Vec<Vec<(f64, f64)>> = batches
        .iter()
        .map(|(_, samples)| {
            let mut s = samples.clone();
            s.sort_by(|a, b| a.0.total_cmp(&b.0));
            s
        })
        .collect();
    let slopes: Vec<f64> = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let bkey = key.child(b as u64);
            let logs: Vec<f64> = sorted
                .iter()
                .enumerate()
                .map(|(bi, batch)| {
                    let mut rng = bkey.child(bi as u64).rng();
                    let n = batch.len();
                    let mut counts = vec![0u32; n];
                    for _ in 0..n {
                        counts[rand::Rng::gen_range(&mut rng, 0..n)] += 1;
                    }
                    weighted_median_with_counts(batch, &counts).ln()
                })
                .collect();
            linear_fit(&log_t, &logs).map(|(s, _)| s).unwrap_or(slope)
        })
        .collect();
    let lo = crate::stats::percentile(&slopes, 0.025);
    let hi = crate::stats::percentile(&slopes, 0.975);

    Ok(ExponentFit {
        slope,
        intercept,
        ci_halfwidth: 0.5 * (hi - lo),
        slope_lo: lo,
        slope_hi: hi,
        t_grid,
    })
}

/// Paired bootstrap estimate of (weighted median - unweighted median) with
/// its standard error; both medians are recomputed from the same resample,
/// so shared noise cancels in the gap.
pub fn median_gap_bootstrap(
    samples: &[WeightedSample],
    n_boot: usize,
    key: &StreamKey,
) -> (f64, f64) {
    let pairs: Vec<(f64, f64)> = samples.iter().map(|s| (s.max_disp, s.weight)).collect();
    let unit: Vec<(f64, f64)> = samples.iter().map(|s| (s.max_disp, 1.0)).collect();
    let gap = weighted_median(&pairs) - weighted_median(&unit);
    let mut sorted_idx: Vec<usize> = (0..samples.len()).collect();
    sorted_idx.sort_by(|&a, &b| samples[a].max_disp.total_cmp(&samples[b].max_disp));
    let sorted_w: Vec<(f64, f64)> = sorted_idx.iter().map(|&i| pairs[i]).collect();
    let sorted_u: Vec<(f64, f64)> = sorted_idx.iter().map(|&i| unit[i]).collect();
    let n = samples.len();
    let gaps: Vec<f64> = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let mut rng = key.child(b as u64).rng();
            let mut counts = vec![0u32; n];
            for _ in 0..n {
                counts[rand::Rng::gen_range(&mut rng, 0..n)] += 1;
            }
            weighted_median_with_counts(&sorted_w, &counts)
                - weighted_median_with_counts(&sorted_u, &counts)
        })
        .collect();
    let (_, se) = {
        let mean = gaps.iter().sum::<f64>() / n_boot as f64;
        let var = gaps.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>()
            / (n_boot as f64 - 1.0);
        (mean, var.sqrt())
    };
    (gap, se)
}

/// One conditional-vs-unconditional probability row of the trend report.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrendRow {
    pub t: f64,
    pub c3: f64,
    pub cond: (f64, f64),
    pub uncond: (f64, f64),
}

/// Trend of the event probabilities across the time grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrendReport {
    /// Rows for the thresholded traversal event, per (t, c3).
    pub a_rows: Vec<TrendRow>,
    /// Rows for the block-range event, per t (c3 unused, set to 0).
    pub b_rows: Vec<TrendRow>,
    pub default_c3: f64,
    /// Kendall tau of the conditional probabilities against t.
    pub kendall_a: f64,
    pub kendall_b: f64,
    /// Pairwise non-increase within 3 combined standard errors,
    /// at the default c3.
    pub a_nonincreasing: bool,
    pub b_nonincreasing: bool,
}

fn thresholded_a_prob(run: &ConditionalRun, c3: f64, weighted: bool) -> (f64, f64) {
    let t = run.summary.t_end;
    let thr = c3 * t.powf(4.0 / 9.0);
    let pairs: Vec<(f64, f64)> = run
        .samples
        .iter()
        .map(|s| {
            let z = if s.event_a && s.max_disp >= thr { 1.0 } else { 0.0 };
            (z, if weighted { s.weight } else { 1.0 })
        })
        .collect();
    weighted_mean_se(&pairs)
}

fn pairwise_nonincreasing(points: &[(f64, f64)]) -> bool {
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let se = (points[i].1 * points[i].1 + points[j].1 * points[j].1).sqrt();
            if points[j].0 > points[i].0 + 3.0 * se {
                return false;
            }
        }
    }
    true
}

/// Conditional probabilities of the thresholded traversal event and the
/// block-range event across a sweep of conditional runs (increasing t).
pub fn event_trend_report(
    runs: &[&ConditionalRun],
    c3_grid: &[f64],
    default_c3: f64,
) -> Result<TrendReport> {
    if runs.len() < 3 {
        return Err(Error::InvalidInput("need at least 3 time points".into()));
    }
    let mut a_rows = Vec::new();
    let mut b_rows = Vec::new();
    for run in runs {
        let t = run.summary.t_end;
        for &c3 in c3_grid {
            a_rows.push(TrendRow {
                t,
                c3,
                cond: thresholded_a_prob(run, c3, true),
                uncond: thresholded_a_prob(run, c3, false),
            });
        }
        b_rows.push(TrendRow {
            t,
            c3: 0.0,
            cond: run.summary.event_b_prob,
            uncond: run.summary.event_b_uncond,
        });
    }
    let a_default: Vec<(f64, f64)> = runs
        .iter()
        .map(|r| (r.summary.t_end, thresholded_a_prob(r, default_c3, true).0))
        .collect();
    let b_default: Vec<(f64, f64)> = runs
        .iter()
        .map(|r| (r.summary.t_end, r.summary.event_b_prob.0))
        .collect();
    let kendall_a = kendall_tau(&a_default);
    let kendall_b = kendall_tau(&b_default);

    let a_points: Vec<(f64, f64)> = runs
        .iter()
        .map(|r| thresholded_a_prob(r, default_c3, true))
        .collect();
    let b_points: Vec<(f64, f64)> = runs.iter().map(|r| r.summary.event_b_prob).collect();

    Ok(TrendReport {
        a_rows,
        b_rows,
        default_c3,
        kendall_a,
        kendall_b,
        a_nonincreasing: pairwise_nonincreasing(&a_points),
        b_nonincreasing: pairwise_nonincreasing(&b_points),
    })
}
