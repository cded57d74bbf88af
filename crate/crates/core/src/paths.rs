//! Splittable random streams and Brownian paths on a uniform time grid.
//!
//! Streams are derived from a [`StreamKey`]: a 64-bit seed plus a lineage of
//! indices. The same (seed, lineage) always yields the same generator, and
//! distinct lineages yield independent streams, so replicate / path / inner
//! loops can be parallelized with order-free reproducibility.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// splitmix64 finalizer; the standard 64-bit mixing function.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Identifier for a deterministic random stream.
///
/// The lineage is a path through a tree of streams, e.g.
/// `[replicate, path_index, inner_index]`. Child streams are derived with
/// [`StreamKey::child`]; the derivation hashes each lineage element into the
/// seed state, so sibling streams are decorrelated regardless of how many
/// draws each one consumes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub seed: u64,
    pub lineage: Vec<u64>,
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        StreamKey {
            seed,
            lineage: Vec::new(),
        }
    }

    /// Derive the child stream at index `ix`.
    pub fn child(&self, ix: u64) -> Self {
        let mut lineage = Vec::with_capacity(self.lineage.len() + 1);
        lineage.extend_from_slice(&self.lineage);
        lineage.push(ix);
        StreamKey {
            seed: self.seed,
            lineage,
        }
    }

    /// Collapse (seed, lineage) to a single 64-bit state.
    fn state(&self) -> u64 {
        let mut h = mix64(self.seed ^ 0x6a09_e667_f3bc_c908);
        for &e in &self.lineage {
            // Feed the element, then re-mix; the add keeps element 0 active.
            h = mix64(h ^ e.wrapping_add(0x9e37_79b9_7f4a_7c15));
        }
        h
    }

    /// Instantiate the generator for this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut h = self.state();
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_mut(8) {
            h = mix64(h);
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}

/// A discretized continuous path on a uniform time grid over `[0, t_end]`.
///
/// `values` has length `n_steps + 1` and `values[0] == 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathGrid {
    pub t_end: f64,
    pub n_steps: usize,
    pub values: Vec<f64>,
}

impl PathGrid {
    /// Build a path from raw grid values, validating the invariants.
    pub fn new(t_end: f64, values: Vec<f64>) -> Result<Self> {
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(Error::invalid_param("t_end must be positive and finite"));
        }
        if values.len() < 2 {
            return Err(Error::invalid_param("need at least one step"));
        }
        if values[0] != 0.0 {
            return Err(Error::invalid_param("path must start at 0"));
        }
        Ok(PathGrid {
            t_end,
            n_steps: values.len() - 1,
            values,
        })
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    /// Time of grid point `i`.
    #[inline]
    pub fn time_at(&self, i: usize) -> f64 {
        i as f64 * self.dt()
    }

    pub fn same_grid(&self, other: &PathGrid) -> bool {
        self.n_steps == other.n_steps && self.t_end == other.t_end
    }

    /// Pointwise sum of two paths on the same grid.
    pub fn sum_with(&self, other: &PathGrid) -> Result<PathGrid> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch(format!(
                "({}, {}) vs ({}, {})",
                self.t_end, self.n_steps, other.t_end, other.n_steps
            )));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(PathGrid {
            t_end: self.t_end,
            n_steps: self.n_steps,
            values,
        })
    }

    /// The path reflected through the origin.
    pub fn negated(&self) -> PathGrid {
        PathGrid {
            t_end: self.t_end,
            n_steps: self.n_steps,
            values: self.values.iter().map(|v| -v).collect(),
        }
    }
}

/// Sample a standard Brownian path on `n_steps` uniform steps of `[0, t_end]`.
pub fn sample_brownian_path(t_end: f64, n_steps: usize, key: &StreamKey) -> Result<PathGrid> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::invalid_param("t_end must be positive and finite"));
    }
    if n_steps == 0 {
        return Err(Error::invalid_param("n_steps must be >= 1"));
    }
    let dt = t_end / n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let mut rng = key.rng();
    let mut values = Vec::with_capacity(n_steps + 1);
    let mut x = 0.0;
    values.push(x);
    for _ in 0..n_steps {
        let z: f64 = rng.sample(StandardNormal);
        x += sqrt_dt * z;
        values.push(x);
    }
    Ok(PathGrid {
        t_end,
        n_steps,
        values,
    })
}

/// Refine a path by Brownian-bridge midpoint insertion, doubling `n_steps`.
///
/// The refined path agrees with the input at the original knots, so paired
/// comparisons across resolutions share their coarse-scale randomness.
pub fn refine_path(p: &PathGrid, key: &StreamKey) -> PathGrid {
    let dt = p.dt();
    // Midpoint of a Brownian bridge over dt: mean (a+b)/2, variance dt/4.
    let sd = (dt / 4.0).sqrt();
    let mut rng = key.rng();
    let mut values = Vec::with_capacity(2 * p.n_steps + 1);
    for i in 0..p.n_steps {
        let a = p.values[i];
        let b = p.values[i + 1];
        let z: f64 = rng.sample(StandardNormal);
        values.push(a);
        values.push(0.5 * (a + b) + sd * z);
    }
    values.push(p.values[p.n_steps]);
    PathGrid {
        t_end: p.t_end,
        n_steps: 2 * p.n_steps,
        values,
    }
}

/// Probability that a Brownian bridge between `(x0, x1)` over time `dt`
/// touches `level`, for a driving process with variance rate `var_rate`
/// (2 for the difference of two independent unit-rate motions).
///
/// Returns 1 when either endpoint is at or beyond the level.
pub fn bridge_hit_prob(x0: f64, x1: f64, dt: f64, level: f64, var_rate: f64) -> f64 {
    debug_assert!(dt > 0.0 && var_rate > 0.0);
    let d0 = x0 - level;
    let d1 = x1 - level;
    if d0 == 0.0 || d1 == 0.0 || (d0 > 0.0) != (d1 > 0.0) {
        return 1.0;
    }
    let expo = -2.0 * d0 * d1 / (var_rate * dt);
    expo.exp()
}

/// Expected excess of the bridge maximum above `max(x0, x1)` over one step.
///
/// For a bridge with endpoint gap `b = |x1 - x0|` and endpoint variance
/// `v = var_rate * dt`, the excess is `sqrt(pi v / 8) * erfcx(b / sqrt(2 v))`.
pub fn bridge_max_excess(b: f64, var_rate: f64, dt: f64) -> f64 {
    let v = var_rate * dt;
    (std::f64::consts::PI * v / 8.0).sqrt() * crate::quad::erfcx(b.abs() / (2.0 * v).sqrt())
}

/// Grid extrema of a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathExtrema {
    pub max: f64,
    pub min: f64,
    /// Time of the first grid index attaining the maximum.
    pub argmax_time: f64,
}

impl PathExtrema {
    /// Maximal displacement from the origin, `max(max, -min)`.
    #[inline]
    pub fn max_displacement(&self) -> f64 {
        self.max.max(-self.min)
    }
}

/// Running max/min and first-argmax time over the grid.
pub fn path_extrema(p: &PathGrid) -> PathExtrema {
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    let mut argmax = 0usize;
    for (i, &v) in p.values.iter().enumerate() {
        if v > max {
            max = v;
            argmax = i;
        }
        if v < min {
            min = v;
        }
    }
    PathExtrema {
        max,
        min,
        argmax_time: p.time_at(argmax),
    }
}

/// Grid maximum with the per-step expected bridge excess added, for
/// refinement studies; `var_rate` is the variance rate of the sub-grid
/// fill-in being modeled.
pub fn corrected_max(p: &PathGrid, var_rate: f64) -> f64 {
    let dt = p.dt();
    let mut best = f64::NEG_INFINITY;
    for i in 0..p.n_steps {
        let a = p.values[i];
        let b = p.values[i + 1];
        let m = a.max(b) + bridge_max_excess(b - a, var_rate, dt);
        if m > best {
            best = m;
        }
    }
    best
}

/// Max minus min of the path over `[s0, s1]`, endpoints snapped to the
/// nearest grid points.
pub fn interval_range(p: &PathGrid, s0: f64, s1: f64) -> Result<f64> {
    if !(0.0 <= s0 && s0 < s1 && s1 <= p.t_end + 1e-12 * p.t_end) {
        return Err(Error::invalid_param(format!(
            "need 0 <= s0 < s1 <= t_end, got ({s0}, {s1})"
        )));
    }
    let dt = p.dt();
    let i0 = ((s0 / dt).round() as usize).min(p.n_steps);
    let i1 = ((s1 / dt).round() as usize).min(p.n_steps);
    if i0 >= i1 {
        return Err(Error::invalid_param(format!(
            "window ({s0}, {s1}) is empty after snapping to the grid"
        )));
    }
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    for &v in &p.values[i0..=i1] {
        if v > max {
            max = v;
        }
        if v < min {
            min = v;
        }
    }
    Ok(max - min)
}

/// Time the path spends strictly inside `(lo, hi)`, by the left-endpoint
/// rule: `dt` times the number of step left-endpoints in the band.
pub fn occupation_time(p: &PathGrid, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo < hi);
    let count = p.values[..p.n_steps]
        .iter()
        .filter(|&&v| lo < v && v < hi)
        .count();
    count as f64 * p.dt()
}
