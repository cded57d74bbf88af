//! Wiener-sausage volume and the annealed survival weight.
//!
//! In one dimension the sausage volume of a drifted path decomposes as
//! `|W_X(t)| = |R_t(Y+X)| + 2a`, and integrating out the Poisson field
//! turns survival into the exact conditional weight
//! `P(T > t | X) = exp(-lambda (E|R_t| + Delta(X) + 2a))`, where
//! `Delta(X) = E_Y[sup(Y+X) + sup(Y-X) - 2 sup Y]` is the excess expected
//! range caused by the drift path. All three suprema are evaluated on the
//! same `Y` per inner sample; that coupling is what makes the estimator
//! usable (the terms share their dominant fluctuation).

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::expected_range;
use crate::error::{Error, Result};
use crate::paths::{PathGrid, StreamKey};
use crate::quad::erfcx;
use crate::stats::{Estimate, Method, RunningMoments};
use crate::trapfield::SimParams;

/// How path suprema are read off the grid inside the Delta estimator.
///
/// `Grid` uses the raw grid extrema. `BridgeCorrected` adds the expected
/// Brownian-bridge excess per step with the variance rates of the continuum
/// fill-in (2 for `Y +/- X`, 1 for `Y`); it models `X` as a Brownian sample
/// on the same grid, which holds in the annealed and conditional pipelines
/// but not for synthetic deterministic paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupMode {
    Grid,
    BridgeCorrected,
}

/// Monte Carlo estimate of `Delta(X)` for one fixed path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaEstimate {
    pub value: f64,
    pub std_err: f64,
    pub inner_count: u64,
}

/// Sausage volume given both driving paths: range of `Y + X` plus `2a`.
pub fn sausage_volume_given_paths(x_path: &PathGrid, y_path: &PathGrid, a: f64) -> Result<f64> {
    let sum = x_path.sum_with(y_path)?;
    let e = crate::paths::path_extrema(&sum);
    Ok(e.max - e.min + 2.0 * a)
}

/// Single-`Y` evaluation of `sup(Y+X) + sup(Y-X) - 2 sup Y` on the grid.
///
/// May be negative for an individual `Y`; only the `Y`-expectation is
/// guaranteed non-negative.
pub fn delta_sample(x_path: &PathGrid, y_path: &PathGrid) -> Result<f64> {
    if !x_path.same_grid(y_path) {
        return Err(Error::GridMismatch(format!(
            "({}, {}) vs ({}, {})",
            x_path.t_end, x_path.n_steps, y_path.t_end, y_path.n_steps
        )));
    }
    let mut sup_p = f64::NEG_INFINITY;
    let mut sup_m = f64::NEG_INFINITY;
    let mut sup_y = f64::NEG_INFINITY;
    for (&x, &y) in x_path.values.iter().zip(&y_path.values) {
        sup_p = sup_p.max(y + x);
        sup_m = sup_m.max(y - x);
        sup_y = sup_y.max(y);
    }
    Ok(sup_p + sup_m - 2.0 * sup_y)
}

/// One streamed inner sample of Delta for a fresh Brownian `Y`, without
/// materializing the `Y` path.
fn delta_sample_streamed<R: Rng>(
    x: &[f64],
    dt: f64,
    rng: &mut R,
    mode: SupMode,
) -> f64 {
    let sqrt_dt = dt.sqrt();
    match mode {
        SupMode::Grid => {
            let mut y = 0.0f64;
            let mut sup_p = x[0]; // = 0
            let mut sup_m = -x[0];
            let mut sup_y = 0.0f64;
            for &xk in &x[1..] {
                y += sqrt_dt * rng.sample::<f64, _>(StandardNormal);
                sup_p = sup_p.max(y + xk);
                sup_m = sup_m.max(y - xk);
                sup_y = sup_y.max(y);
            }
            sup_p + sup_m - 2.0 * sup_y
        }
        SupMode::BridgeCorrected => {
            // Per-step expected bridge excess sqrt(pi v/8) erfcx(|b|/sqrt(2v))
            // with v = 2 dt for Y +/- X and v = dt for Y. Since erfcx <= 1,
            // a step whose endpoint max plus the full prefactor cannot beat
            // the running sup is skipped without evaluating erfcx.
            let pref2 = (std::f64::consts::PI * 2.0 * dt / 8.0).sqrt();
            let pref1 = (std::f64::consts::PI * dt / 8.0).sqrt();
            let inv2 = 1.0 / (4.0 * dt).sqrt();
            let inv1 = 1.0 / (2.0 * dt).sqrt();
            let mut y = 0.0f64;
            let mut zp = x[0];
            let mut zm = -x[0];
            let mut sup_p = f64::NEG_INFINITY;
            let mut sup_m = f64::NEG_INFINITY;
            let mut sup_y = f64::NEG_INFINITY;
            for &xk in &x[1..] {
                let dy = sqrt_dt * rng.sample::<f64, _>(StandardNormal);
                let (zp0, zm0, y0) = (zp, zm, y);
                y += dy;
                zp = y + xk;
                zm = y - xk;
                let top_p = zp0.max(zp);
                if top_p + pref2 > sup_p {
                    sup_p = sup_p.max(top_p + pref2 * erfcx((zp - zp0).abs() * inv2));
                }
                let top_m = zm0.max(zm);
                if top_m + pref2 > sup_m {
                    sup_m = sup_m.max(top_m + pref2 * erfcx((zm - zm0).abs() * inv2));
                }
                let top_y = y0.max(y);
                if top_y + pref1 > sup_y {
                    sup_y = sup_y.max(top_y + pref1 * erfcx(dy.abs() * inv1));
                }
            }
            sup_p + sup_m - 2.0 * sup_y
        }
    }
}

/// Mean and standard error of [`delta_sample`] over `m_inner` independent
/// `Y` paths drawn from `key`.
pub fn delta_functional(
    x_path: &PathGrid,
    m_inner: usize,
    key: &StreamKey,
    mode: SupMode,
) -> Result<DeltaEstimate> {
    if m_inner < 2 {
        return Err(Error::invalid_param("m_inner must be >= 2"));
    }
    let dt = x_path.dt();
    let mut rng = key.rng();
    let mut acc = RunningMoments::new();
    for _ in 0..m_inner {
        acc.push(delta_sample_streamed(&x_path.values, dt, &mut rng, mode));
    }
    Ok(DeltaEstimate {
        value: acc.mean(),
        std_err: acc.std_err(),
        inner_count: m_inner as u64,
    })
}

/// Full annealed survival weight
/// `exp(-lambda (E|R_t| + Delta + 2a))`; the `E|R_t| + 2a` part is exact
/// (analytic), only `Delta` comes from Monte Carlo.
pub fn survival_weight(delta: &DeltaEstimate, params: &SimParams) -> f64 {
    let er = expected_range(params.t_end).expect("t_end > 0");
    (-params.lambda * (er + delta.value + 2.0 * params.a)).exp()
}

/// The X-dependent factor `exp(-lambda Delta)` alone; the rest cancels in
/// self-normalized conditional expectations.
pub fn conditional_weight(delta_value: f64, lambda: f64) -> f64 {
    (-lambda * delta_value).exp()
}

/// First-order jackknife factor `1 - lambda^2 se^2 / 2` removing the
/// convexity bias that inner-loop noise pushes into `exp(-lambda Delta)`.
pub fn debias_factor(delta: &DeltaEstimate, lambda: f64) -> f64 {
    (1.0 - 0.5 * lambda * lambda * delta.std_err * delta.std_err).max(0.0)
}

/// Annealed survival estimate with its convexity-bias diagnostic.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AnnealedSurvival {
    pub estimate: Estimate,
    /// Plug-in relative bias `lambda^2 mean(se_Delta^2) / 2` caused by
    /// inner-loop noise under the convex exponential.
    pub convexity_bias: f64,
    /// Set when the absolute bias exceeds a third of the standard error.
    pub bias_warning: bool,
}

/// Mean over `n_outer` Brownian `X` paths of the annealed survival weight.
pub fn annealed_survival_estimate(
    params: &SimParams,
    n_outer: usize,
    m_inner: usize,
    key: &StreamKey,
    mode: SupMode,
    debias: bool,
) -> Result<AnnealedSurvival> {
    params.validate()?;
    if n_outer < 2 {
        return Err(Error::invalid_param("n_outer must be >= 2"));
    }
    if m_inner < 2 {
        return Err(Error::invalid_param("m_inner must be >= 2"));
    }
    let per_path: Vec<(f64, f64)> = (0..n_outer)
        .into_par_iter()
        .map(|i| {
            let rep = key.child(i as u64);
            let x = crate::paths::sample_brownian_path(params.t_end, params.n_steps, &rep.child(0))
                .expect("validated params");
            let delta = delta_functional(&x, m_inner, &rep.child(1), mode)
                .expect("m_inner validated");
            let mut w = conditional_weight(delta.value, params.lambda);
            if debias {
                w *= debias_factor(&delta, params.lambda);
            }
            (w, delta.std_err * delta.std_err)
        })
        .collect();

    let det = {
        let er = expected_range(params.t_end)?;
        (-params.lambda * (er + 2.0 * params.a)).exp()
    };
    let mut acc = RunningMoments::new();
    let mut se2_sum = 0.0;
    for &(w, se2) in &per_path {
        acc.push(w);
        se2_sum += se2;
    }
    let value = det * acc.mean();
    let std_err = det * acc.std_err();
    let convexity_bias = 0.5 * params.lambda * params.lambda * se2_sum / n_outer as f64;
    let bias_warning = convexity_bias * value > std_err / 3.0;
    Ok(AnnealedSurvival {
        estimate: Estimate::new(value, std_err, n_outer as u64, Method::Annealed),
        convexity_bias,
        bias_warning,
    })
}
