//! Closed-form Brownian expectations, densities and tail formulas.
//!
//! These are the exact references every Monte Carlo estimator in the crate
//! is checked against: expected range, the range lower-tail asymptotic, the
//! joint (running max, argmax) density, the arcsine law, first-passage and
//! stay-positive formulas, the two-sided confinement series, and box masses
//! of the joint density.

use crate::error::{Error, Result};
use crate::quad;

use std::f64::consts::PI;

/// Expected range `E|R_t|` of standard Brownian motion: `sqrt(8 t / pi)`.
pub fn expected_range(t: f64) -> Result<f64> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::invalid_param("t must be non-negative"));
    }
    Ok((8.0 * t / PI).sqrt())
}

/// Leading-order lower-tail asymptotic for the range:
/// `P0(|R_t| < a) ~ 8 pi^2 (t/a^2) exp(-(pi^2/2)(t/a^2))`.
///
/// Valid as `t/a^2 -> infinity`; this is the asymptotic form only, not an
/// exact probability, and it exceeds 1 for small `t/a^2`.
pub fn range_tail_asymptotic(t: f64, a_len: f64) -> f64 {
    debug_assert!(t > 0.0 && a_len > 0.0);
    let u = t / (a_len * a_len);
    8.0 * PI * PI * u * (-0.5 * PI * PI * u).exp()
}

/// Joint density of the running maximum `m` and its argmax time `u` for
/// Brownian motion on `[0, t]`:
/// `(m/pi) u^{-3/2} (t-u)^{-1/2} exp(-m^2/(2u))` on `m >= 0`, `0 < u < t`.
pub fn max_argmax_density(m: f64, u: f64, t: f64) -> f64 {
    debug_assert!(t > 0.0);
    if m < 0.0 || u <= 0.0 || u >= t {
        return 0.0;
    }
    m / PI * u.powf(-1.5) / (t - u).sqrt() * (-m * m / (2.0 * u)).exp()
}

/// Arcsine density of the argmax time: `1 / (pi sqrt(u (t - u)))` on `(0, t)`.
pub fn argmax_density(u: f64, t: f64) -> f64 {
    debug_assert!(t > 0.0);
    if u <= 0.0 || u >= t {
        return 0.0;
    }
    1.0 / (PI * (u * (t - u)).sqrt())
}

/// Arcsine CDF: `P(argmax <= u) = (2/pi) asin(sqrt(u/t))`.
pub fn argmax_cdf(u: f64, t: f64) -> f64 {
    debug_assert!(t > 0.0);
    if u <= 0.0 {
        return 0.0;
    }
    if u >= t {
        return 1.0;
    }
    2.0 / PI * (u / t).sqrt().asin()
}

/// Density of the first hitting time of zero from `x > 0`:
/// `x exp(-x^2/(2u)) / sqrt(2 pi u^3)`.
pub fn first_passage_density(x: f64, u: f64) -> f64 {
    debug_assert!(x > 0.0);
    if u <= 0.0 {
        return 0.0;
    }
    x * (-x * x / (2.0 * u)).exp() / (2.0 * PI * u * u * u).sqrt()
}

/// `P_x(tau_0 > t) = erf(x / sqrt(2 t))`, the survival function of the first
/// hitting time of zero from `x > 0`.
pub fn stay_positive_prob(x: f64, t: f64) -> f64 {
    debug_assert!(x > 0.0 && t > 0.0);
    quad::erf(x / (2.0 * t).sqrt())
}

/// Transition density at time `s` of Brownian motion started at `x > 0` and
/// conditioned to stay positive up to time `t > s`:
/// `(2 pi s)^{-1/2} [e^{-(x-y)^2/2s} - e^{-(x+y)^2/2s}] P_y(tau_0 > t-s) / P_x(tau_0 > t)`.
pub fn conditioned_positive_transition(x: f64, y: f64, s: f64, t: f64) -> f64 {
    debug_assert!(x > 0.0 && s > 0.0 && s < t);
    if y <= 0.0 {
        return 0.0;
    }
    let killed_kernel = ((-(x - y) * (x - y) / (2.0 * s)).exp()
        - (-(x + y) * (x + y) / (2.0 * s)).exp())
        / (2.0 * PI * s).sqrt();
    killed_kernel * stay_positive_prob(y, t - s) / stay_positive_prob(x, t)
}

/// Two-sided confinement probability `P(sup_{s<=t} |B_s| < r)` via the
/// Dirichlet eigenfunction series
/// `(4/pi) sum_k ((-1)^k / (2k+1)) exp(-(2k+1)^2 pi^2 t / (8 r^2))`,
/// truncated once a term drops below 1e-14. The leading decay rate
/// `pi^2/8` is the principal Dirichlet eigenvalue of the unit interval.
pub fn confinement_prob(r: f64, t: f64) -> f64 {
    debug_assert!(r > 0.0 && t >= 0.0);
    if t == 0.0 {
        return 1.0;
    }
    let beta = PI * PI * t / (8.0 * r * r);
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut k = 0u64;
    loop {
        let n = 2 * k + 1;
        let term = (-(n as f64) * (n as f64) * beta).exp() / n as f64;
        if term < 1e-14 {
            break;
        }
        sum += sign * term;
        sign = -sign;
        k += 1;
        // beta > 0 guarantees termination, but cap the slow small-beta case.
        if k > 20_000_000 {
            break;
        }
    }
    (4.0 / PI * sum).clamp(0.0, 1.0)
}

/// Mass of the joint (max, argmax) density over the box
/// `[0, m_hi] x [u_lo, u_hi]`.
///
/// The inner integral over `m` is closed-form,
/// `int_0^{m_hi} m e^{-m^2/(2u)} dm = u (1 - e^{-m_hi^2/(2u)})`,
/// which leaves `int (1 - e^{-m_hi^2/(2u)}) / (pi sqrt(u(t-u))) du`; the
/// substitution `u = t sin^2(theta)` removes both endpoint singularities.
pub fn box_mass_max_argmax(t: f64, m_hi: f64, u_lo: f64, u_hi: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::invalid_param("t must be positive"));
    }
    if !(0.0 <= u_lo && u_lo < u_hi && u_hi <= t) {
        return Err(Error::invalid_param("need 0 <= u_lo < u_hi <= t"));
    }
    if m_hi < 0.0 {
        return Err(Error::invalid_param("m_hi must be >= 0"));
    }
    if m_hi == 0.0 {
        return Ok(0.0);
    }
    let theta_lo = (u_lo / t).sqrt().min(1.0).asin();
    let theta_hi = (u_hi / t).sqrt().min(1.0).asin();
    let m2 = m_hi * m_hi;
    let f = |theta: f64| {
        let s = theta.sin();
        let u = t * s * s;
        if u == 0.0 {
            1.0
        } else {
            1.0 - (-m2 / (2.0 * u)).exp()
        }
    };
    Ok(2.0 / PI * quad::integrate(f, theta_lo, theta_hi, 1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{bridge_hit_prob, sample_brownian_path, StreamKey};
    use crate::quad::integrate_to_infinity;

    #[test]
    fn expected_range_values() {
        assert_eq!(expected_range(0.0).unwrap(), 0.0);
        assert!((expected_range(1.0).unwrap() - 1.5957691216057308).abs() < 1e-12);
        // Brownian scaling: doubling sqrt(t).
        assert!(
            (expected_range(4.0).unwrap() - 2.0 * expected_range(1.0).unwrap()).abs() < 1e-12
        );
        assert!(expected_range(-1.0).is_err());
    }

    #[test]
    fn expected_range_matches_mc() {
        // Plain grid extrema at 4096 steps under-read the range by
        // 2 * 0.583 * sqrt(dt) ~ 1.1% of sqrt(t), which is why the
        // bridge-excess correction exists; the corrected estimator sits
        // well inside the 1% band.
        let key = StreamKey::new(17);
        let n = 200_000usize;
        let mut sum = 0.0;
        for i in 0..n {
            let p = sample_brownian_path(1.0, 4096, &key.child(i as u64)).unwrap();
            sum += crate::paths::corrected_max(&p, 1.0)
                + crate::paths::corrected_max(&p.negated(), 1.0);
        }
        let mc = sum / n as f64;
        let exact = expected_range(1.0).unwrap();
        assert!((mc - exact).abs() / exact < 0.01, "mc {mc} vs {exact}");
    }

    #[test]
    fn range_tail_values() {
        // t/a^2 = 4: 32 pi^2 e^{-2 pi^2}.
        let v = range_tail_asymptotic(4.0, 1.0);
        let want = 32.0 * PI * PI * (-2.0 * PI * PI).exp();
        assert!(((v - want) / want).abs() < 1e-13);
        // Ratio identity between consecutive integer ratios u and u+1.
        let u = 6.0;
        let ratio = range_tail_asymptotic(u + 1.0, 1.0) / range_tail_asymptotic(u, 1.0);
        let want = (-PI * PI / 2.0).exp() * (u + 1.0) / u;
        assert!(((ratio - want) / want).abs() < 1e-12);
        // At a = c t^{1/3} the exponent is -(pi^2/(2 c^2)) t^{1/3}.
        let c: f64 = 1.3;
        let t: f64 = 70.0;
        let v = range_tail_asymptotic(t, c * t.powf(1.0 / 3.0));
        let exponent = -(PI * PI / (2.0 * c * c)) * t.powf(1.0 / 3.0);
        let prefactor = 8.0 * PI * PI / (c * c) * t.powf(1.0 / 3.0);
        assert!(((v - prefactor * exponent.exp()) / v).abs() < 1e-12);
    }

    #[test]
    fn joint_density_support_and_marginal() {
        assert_eq!(max_argmax_density(-1.0, 0.5, 1.0), 0.0);
        assert_eq!(max_argmax_density(1.0, 1.5, 1.0), 0.0);
        // m-integral recovers the arcsine density, abs tol 1e-8.
        let t = 1.0;
        for u in [0.1, 0.25, 0.5, 0.8] {
            let marginal = integrate_to_infinity(|m| max_argmax_density(m, u, t), 0.0, 1e-10);
            let want = argmax_density(u, t);
            assert!((marginal - want).abs() < 1e-8, "u={u}: {marginal} vs {want}");
        }
    }

    #[test]
    fn joint_density_total_mass() {
        let t = 1.0;
        let mass = box_mass_max_argmax(t, 1e6, 0.0, t).unwrap();
        assert!((mass - 1.0).abs() < 1e-6, "{mass}");
    }

    #[test]
    fn box_mass_edges_and_mc() {
        let t = 1.0;
        assert_eq!(box_mass_max_argmax(t, 0.0, 0.0, t).unwrap(), 0.0);
        // MC of (max, argmax) over 1e6 paths vs the box integral, 3 SE.
        let (m_hi, u_lo, u_hi) = (0.5, 0.25, 0.75);
        let want = box_mass_max_argmax(t, m_hi, u_lo, u_hi).unwrap();
        let key = StreamKey::new(23);
        let n = 1_000_000usize;
        let n_steps = 2048usize;
        let mut hits = 0usize;
        for i in 0..n {
            let p = sample_brownian_path(t, n_steps, &key.child(i as u64)).unwrap();
            let e = crate::paths::path_extrema(&p);
            if e.max <= m_hi && (u_lo..=u_hi).contains(&e.argmax_time) {
                hits += 1;
            }
        }
        let p_hat = hits as f64 / n as f64;
        let se = (p_hat * (1.0 - p_hat) / n as f64).sqrt();
        // Grid max is biased low by ~0.58 sqrt(dt), inflating the box mass
        // through the density at the m_hi face; allow that much drift.
        let face_density = 0.9; // rough bound on d(mass)/d(m_hi) near 0.5
        let slack = face_density * 0.6 * (t / n_steps as f64).sqrt();
        assert!(
            (p_hat - want).abs() <= 3.0 * se + slack,
            "mc {p_hat} vs quad {want} (se {se})"
        );
    }

    #[test]
    fn argmax_density_values() {
        let t = 1.0;
        assert!((argmax_density(0.5, t) - 2.0 / PI).abs() < 1e-14);
        assert!((argmax_density(0.3, t) - argmax_density(0.7, t)).abs() < 1e-14);
        assert!((argmax_cdf(0.5, t) - 0.5).abs() < 1e-14);
        // Minimum of the density over (0, t) is 2/(pi t) at u = t/2.
        let t = 3.0;
        for u in [0.3, 1.0, 2.0, 2.9] {
            assert!(argmax_density(u, t) >= 2.0 / (PI * t) - 1e-14);
        }
    }

    #[test]
    fn first_passage_normalization_and_mode() {
        let total = integrate_to_infinity(|u| first_passage_density(1.0, u), 0.0, 1e-8);
        assert!((total - 1.0).abs() < 1e-6, "{total}");
        // Mode at u = x^2/3.
        let x = 1.7;
        let mode = x * x / 3.0;
        let f0 = first_passage_density(x, mode);
        for du in [-1e-4, 1e-4] {
            assert!(first_passage_density(x, mode + du) < f0);
        }
        // Tail consistency with stay_positive_prob.
        let t = 0.8;
        let tail = integrate_to_infinity(|u| first_passage_density(1.0, u), t, 1e-8);
        assert!((tail - stay_positive_prob(1.0, t)).abs() < 1e-6);
    }

    #[test]
    fn stay_positive_values() {
        assert!((stay_positive_prob(1.0, 1.0) - 0.6826894921370859).abs() < 1e-12);
        assert!(stay_positive_prob(1.0, 1e-12) > 1.0 - 1e-12);
        // Monotone: decreasing in t, increasing in x.
        assert!(stay_positive_prob(1.0, 2.0) < stay_positive_prob(1.0, 1.0));
        assert!(stay_positive_prob(2.0, 1.0) > stay_positive_prob(1.0, 1.0));
    }

    #[test]
    fn stay_positive_matches_absorption_mc() {
        // MC with per-step bridge absorption at level 0, started at 1.
        let key = StreamKey::new(29);
        let n = 100_000usize;
        let n_steps = 512usize;
        let t = 1.0;
        let dt = t / n_steps as f64;
        let mut surv_sum = 0.0;
        for i in 0..n {
            let p = sample_brownian_path(t, n_steps, &key.child(i as u64)).unwrap();
            let mut alive = 1.0;
            for j in 0..n_steps {
                let x0 = 1.0 + p.values[j];
                let x1 = 1.0 + p.values[j + 1];
                if x1 <= 0.0 || x0 <= 0.0 {
                    alive = 0.0;
                    break;
                }
                alive *= 1.0 - bridge_hit_prob(x0, x1, dt, 0.0, 1.0);
            }
            surv_sum += alive;
        }
        let mc = surv_sum / n as f64;
        let exact = stay_positive_prob(1.0, 1.0);
        let se = (mc * (1.0 - mc) / n as f64).sqrt();
        assert!((mc - exact).abs() <= 3.0 * se, "mc {mc} vs {exact}");
    }

    #[test]
    fn conditioned_transition_normalizes() {
        let (x, s, t) = (1.0, 0.5, 1.0);
        let total =
            integrate_to_infinity(|y| conditioned_positive_transition(x, y, s, t), 0.0, 1e-8);
        assert!((total - 1.0).abs() < 1e-6, "{total}");
        // Killed at the boundary.
        assert_eq!(conditioned_positive_transition(x, 0.0, s, t), 0.0);
        assert!(conditioned_positive_transition(x, 1e-9, s, t) < 1e-6);
    }

    #[test]
    fn conditioned_transition_short_remaining_time() {
        // As s -> t the remaining-survival factor tends to 1/P_x(tau_0 > t).
        let (x, t): (f64, f64) = (1.0, 1.0);
        let s = t - 1e-9;
        let y: f64 = 0.7;
        let killed = ((-(x - y) * (x - y) / (2.0 * s)).exp()
            - (-(x + y) * (x + y) / (2.0 * s)).exp())
            / (2.0 * PI * s).sqrt();
        let got = conditioned_positive_transition(x, y, s, t);
        let want = killed / stay_positive_prob(x, t);
        assert!(((got - want) / want).abs() < 1e-6);
    }

    #[test]
    fn confinement_series_values() {
        assert_eq!(confinement_prob(1.0, 0.0), 1.0);
        // Reference value cross-checked against the Gaussian reflection
        // series sum_k (-1)^k [Phi(2k+1) - Phi(2k-1)].
        let v = confinement_prob(1.0, 1.0);
        assert!((v - 0.3707774297995239).abs() < 1e-12, "{v}");
        // Scaling invariance: depends on t/r^2 only.
        let a = confinement_prob(2.0, 4.0 * 0.7);
        let b = confinement_prob(1.0, 0.7);
        assert!((a - b).abs() < 1e-13);
        // Monotone in both arguments.
        assert!(confinement_prob(1.0, 2.0) < confinement_prob(1.0, 1.0));
        assert!(confinement_prob(2.0, 1.0) > confinement_prob(1.0, 1.0));
    }

    #[test]
    fn confinement_log_slope_is_leading_eigenvalue() {
        // Slope of log P vs t/r^2 over [4, 16] within 1% of -pi^2/8.
        let taus: Vec<f64> = (0..=12).map(|i| 4.0 + i as f64).collect();
        let logs: Vec<f64> = taus.iter().map(|&u| confinement_prob(1.0, u).ln()).collect();
        let n = taus.len() as f64;
        let mean_x = taus.iter().sum::<f64>() / n;
        let mean_y = logs.iter().sum::<f64>() / n;
        let sxy: f64 = taus
            .iter()
            .zip(&logs)
            .map(|(x, y)| (x - mean_x) * (y - mean_y))
            .sum();
        let sxx: f64 = taus.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
        let slope = sxy / sxx;
        let want = -PI * PI / 8.0;
        assert!(((slope - want) / want).abs() < 0.01, "slope {slope}");
    }

    #[test]
    fn confinement_matches_absorbing_mc() {
        // Two-barrier absorption MC with per-step bridge corrections.
        let key = StreamKey::new(31);
        let n = 100_000usize;
        let n_steps = 2048usize;
        let (r, t) = (1.0, 1.0);
        let dt = t / n_steps as f64;
        let mut surv_sum = 0.0;
        for i in 0..n {
            let p = sample_brownian_path(t, n_steps, &key.child(i as u64)).unwrap();
            let mut alive = 1.0;
            for j in 0..n_steps {
                let (x0, x1) = (p.values[j], p.values[j + 1]);
                if x0.abs() >= r || x1.abs() >= r {
                    alive = 0.0;
                    break;
                }
                alive *= (1.0 - bridge_hit_prob(x0, x1, dt, r, 1.0))
                    * (1.0 - bridge_hit_prob(x0, x1, dt, -r, 1.0));
            }
            surv_sum += alive;
        }
        let mc = surv_sum / n as f64;
        let exact = confinement_prob(r, t);
        assert!((mc - exact).abs() / exact < 0.02, "mc {mc} vs {exact}");
    }

    #[test]
    fn range_tail_consistent_with_confinement_bracket() {
        // P(|R_t| < a) >= P(sup|B| < a/2), and both decay at the same
        // exponential rate pi^2 t/(2 a^2); the asymptotic formula differs
        // from the bracket by its polynomial prefactor only. Reported, not
        // asserted tightly (the regime t/a^2 >= 4 is a rare-event tail).
        // Past u ~ 7 the confinement series truncates to 0, so the bracket
        // comparison lives at u = 4 and the rate check covers the rest.
        let u = 4.0;
        let asym = range_tail_asymptotic(u, 1.0);
        let bracket = confinement_prob(0.5, u);
        assert!(asym >= bracket, "u={u}: {asym} < bracket {bracket}");
        let ratio = asym / bracket;
        let prefactor_ratio = 8.0 * PI * PI * u / (4.0 / PI);
        eprintln!(
            "range tail at t/a^2 = {u}: asym {asym:.3e}, bracket {bracket:.3e}, \
             ratio {ratio:.1} (prefactor ratio {prefactor_ratio:.1})"
        );
        assert!(ratio < 10.0 * prefactor_ratio);
        for u in [8.0f64, 16.0] {
            let rate = (range_tail_asymptotic(u + 1.0, 1.0) / range_tail_asymptotic(u, 1.0)
                / ((u + 1.0) / u))
                .ln();
            assert!((rate + PI * PI / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn densities_are_nonnegative_on_grids() {
        let t = 2.0;
        for i in 1..40 {
            let u = t * i as f64 / 40.0;
            for j in 0..40 {
                let m = 3.0 * j as f64 / 40.0;
                assert!(max_argmax_density(m, u, t) >= 0.0);
            }
            assert!(argmax_density(u, t) >= 0.0);
            assert!(first_passage_density(1.3, u) >= 0.0);
        }
    }
}
