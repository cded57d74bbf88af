//! The moving Poissonian trap environment and direct hard-kill simulation.
//!
//! Trap points start as a Poisson process of intensity `lambda` on a
//! truncation window `[-L, L]` and each moves under its own Brownian motion.
//! The particle dies the first time it sits within `a` of a trap center.
//! The difference process between the particle and any one trap center
//! diffuses at variance rate 2, which sets both the truncation window and
//! the bridge-mode crossing correction.

use rand::Rng;
use rand_distr::{Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::{sample_brownian_path, PathGrid, StreamKey};
use crate::stats::{binomial_se, Estimate, Method};

/// Physical and numerical parameters of one simulation setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Trap intensity (points per unit length). Zero means a trap-free
    /// environment (useful as a degenerate control).
    pub lambda: f64,
    /// Trap radius.
    pub a: f64,
    /// Time horizon.
    pub t_end: f64,
    /// Grid steps over `[0, t_end]`.
    pub n_steps: usize,
    /// Truncation half-width for initial trap points.
    pub window_halfwidth: f64,
    /// Safety multiplier for the default window.
    pub buffer_mult: f64,
}

impl SimParams {
    /// Build params with the default grid and window rules:
    /// `dt <= min(a^2/8, t/1024)` (kill-detection accuracy is governed by
    /// `a^2/dt` through the bridge formula) and
    /// `L = m sqrt(2 t) + a + sqrt(pi t / 2)` (difference-process spread at
    /// rate 2 plus the particle's own expected maximal displacement).
    pub fn new(lambda: f64, a: f64, t_end: f64) -> Result<Self> {
        let mut p = SimParams {
            lambda,
            a,
            t_end,
            n_steps: 0,
            window_halfwidth: 0.0,
            buffer_mult: 6.0,
        };
        p.n_steps = p.default_n_steps_kill();
        p.window_halfwidth = p.default_window();
        p.validate()?;
        Ok(p)
    }

    /// Grid rule for kill detection: `dt <= min(a^2/8, t/1024)`.
    pub fn default_n_steps_kill(&self) -> usize {
        let dt_max = (self.a * self.a / 8.0).min(self.t_end / 1024.0);
        (self.t_end / dt_max).ceil() as usize
    }

    /// Grid rule for weight-only pipelines, where the trap radius plays no
    /// role: `dt <= t/1024`.
    pub fn default_n_steps_paths(&self) -> usize {
        1024
    }

    pub fn default_window(&self) -> f64 {
        self.buffer_mult * (2.0 * self.t_end).sqrt()
            + self.a
            + (std::f64::consts::PI * self.t_end / 2.0).sqrt()
    }

    pub fn with_n_steps(mut self, n_steps: usize) -> Self {
        self.n_steps = n_steps;
        self
    }

    pub fn with_window(mut self, halfwidth: f64) -> Self {
        self.window_halfwidth = halfwidth;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid_param("lambda must be >= 0"));
        }
        if !(self.a > 0.0) {
            return Err(Error::invalid_param("a must be > 0"));
        }
        if !(self.t_end > 0.0) {
            return Err(Error::invalid_param("t_end must be > 0"));
        }
        if self.n_steps == 0 {
            return Err(Error::invalid_param("n_steps must be >= 1"));
        }
        if !(self.buffer_mult > 0.0) {
            return Err(Error::invalid_param("buffer_mult must be > 0"));
        }
        let min_window = self.buffer_mult * (2.0 * self.t_end).sqrt() + self.a;
        if self.window_halfwidth < min_window {
            return Err(Error::invalid_param(format!(
                "window_halfwidth {} below m*sqrt(2t)+a = {min_window}",
                self.window_halfwidth
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }
}

/// Grid-point-only kill checks, or with the per-step Brownian-bridge
/// crossing correction of the difference process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KillMode {
    Naive,
    Bridge,
}

/// One sampled initial trap configuration with per-trap motion streams.
///
/// Motions are not materialized here; each trap's path is generated step by
/// step from its key during the kill scan, so an early kill leaves the rest
/// of every motion stream untouched.
#[derive(Debug, Clone)]
pub struct TrapRealization {
    pub initial_points: Vec<f64>,
    pub motion_keys: Vec<StreamKey>,
    /// Stream for the stochastic sub-grid kill decisions in bridge mode.
    bridge_key: StreamKey,
}

/// The outcome of scanning one (path, field) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KillOutcome {
    Killed(f64),
    Survived,
}

impl KillOutcome {
    pub fn survived(&self) -> bool {
        matches!(self, KillOutcome::Survived)
    }
}

/// Sample the initial Poisson configuration on `[-L, L]`:
/// Poisson(2 lambda L) many points, i.i.d. uniform.
pub fn sample_initial_points(params: &SimParams, key: &StreamKey) -> TrapRealization {
    let l = params.window_halfwidth;
    let mean = 2.0 * params.lambda * l;
    let mut rng = key.child(0).rng();
    let count = if mean > 0.0 {
        let pois = Poisson::new(mean).expect("validated mean");
        rng.sample(pois) as usize
    } else {
        0
    };
    let initial_points: Vec<f64> = (0..count).map(|_| rng.gen_range(-l..=l)).collect();
    let motion_root = key.child(1);
    let motion_keys = (0..count as u64).map(|i| motion_root.child(i)).collect();
    TrapRealization {
        initial_points,
        motion_keys,
        bridge_key: key.child(2),
    }
}

/// Earliest grid-resolution time at which the particle path sits within `a`
/// of any moving trap center, if any.
///
/// Bridge mode additionally kills between grid points with the crossing
/// probability of the rate-2 difference process against the levels
/// `+/- a`; a step whose endpoints straddle the trap band kills surely.
/// Sub-grid kills are reported at the step midpoint.
pub fn simulate_kill_time(
    x_path: &PathGrid,
    field: &TrapRealization,
    params: &SimParams,
    mode: KillMode,
) -> Result<KillOutcome> {
    if x_path.n_steps != params.n_steps || x_path.t_end != params.t_end {
        return Err(Error::GridMismatch(format!(
            "path ({}, {}) vs params ({}, {})",
            x_path.t_end, x_path.n_steps, params.t_end, params.n_steps
        )));
    }
    let a = params.a;
    let dt = params.dt();
    let n_traps = field.initial_points.len();

    // Instant kill if the origin starts inside a trap.
    for &x_i in &field.initial_points {
        if x_i.abs() <= a {
            return Ok(KillOutcome::Killed(0.0));
        }
    }
    if n_traps == 0 {
        return Ok(KillOutcome::Survived);
    }

    let mut rngs: Vec<_> = field.motion_keys.iter().map(|k| k.rng()).collect();
    let mut bridge_rng = field.bridge_key.rng();
    // Track the difference process d_i = X - (x_i + Y^i) per trap.
    let mut diffs: Vec<f64> = field.initial_points.iter().map(|x_i| -x_i).collect();
    let sqrt_dt = dt.sqrt();
    // exp(-40) < 1e-17: skip the crossing draw below this.
    let log_cutoff = -40.0 * 2.0 * dt;

    for step in 0..params.n_steps {
        let dx = x_path.values[step + 1] - x_path.values[step];
        for i in 0..n_traps {
            let dy = sqrt_dt * rngs[i].sample::<f64, _>(StandardNormal);
            let d0 = diffs[i];
            let d1 = d0 + dx - dy;
            diffs[i] = d1;
            if d1.abs() <= a {
                return Ok(KillOutcome::Killed((step + 1) as f64 * dt));
            }
            if mode == KillMode::Bridge {
                // Endpoints are outside the band here (|d0| > a from the
                // previous step, |d1| > a from the check above).
                if (d0 > a) != (d1 > a) {
                    // Straddles the whole band: crossed for sure.
                    return Ok(KillOutcome::Killed((step as f64 + 0.5) * dt));
                }
                let (g0, g1) = if d0 > a {
                    (d0 - a, d1 - a)
                } else {
                    (-a - d0, -a - d1)
                };
                // p = exp(-2 g0 g1 / (2 dt)); var rate 2 for the difference.
                let log_p_num = -2.0 * g0 * g1;
                if log_p_num > log_cutoff {
                    let p = (log_p_num / (2.0 * dt)).exp();
                    let u: f64 = bridge_rng.gen();
                    if u < p {
                        return Ok(KillOutcome::Killed((step as f64 + 0.5) * dt));
                    }
                }
            }
        }
    }
    Ok(KillOutcome::Survived)
}

/// Fraction of independent (path, field) realizations that survive to
/// `t_end`, with binomial standard error.
pub fn direct_survival_estimate(
    params: &SimParams,
    n_paths: usize,
    key: &StreamKey,
    mode: KillMode,
) -> Result<Estimate> {
    params.validate()?;
    if n_paths == 0 {
        return Err(Error::invalid_param("n_paths must be >= 1"));
    }
    let survived: Vec<bool> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let rep = key.child(i as u64);
            let x = sample_brownian_path(params.t_end, params.n_steps, &rep.child(0))
                .expect("validated params");
            let field = sample_initial_points(params, &rep.child(1));
            simulate_kill_time(&x, &field, params, mode)
                .expect("grids match by construction")
                .survived()
        })
        .collect();
    let hits = survived.iter().filter(|&&s| s).count();
    let p = hits as f64 / n_paths as f64;
    Ok(Estimate::new(
        p,
        binomial_se(p, n_paths as u64),
        n_paths as u64,
        Method::Direct,
    ))
}
