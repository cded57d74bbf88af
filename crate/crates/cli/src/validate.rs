//! The validation suite: exact-oracle checks for the analytics layer, the
//! direct-vs-annealed equivalence at configurable budgets, and a thread
//! independence check. The report file carries no timing fields, so
//! repeated runs with the same seed are byte-identical.

use std::path::Path;

use anyhow::Result;
use serde::Serialize;

use trapsim_core::analytics::{
    argmax_density, box_mass_max_argmax, confinement_prob, conditioned_positive_transition,
    expected_range, first_passage_density, max_argmax_density,
};
use trapsim_core::paths::{
    bridge_hit_prob, corrected_max, sample_brownian_path, StreamKey,
};
use trapsim_core::quad::{integrate, integrate_to_infinity};
use trapsim_core::sausage::annealed_survival_estimate;
use trapsim_core::stats::linear_fit;
use trapsim_core::trapfield::{direct_survival_estimate, SimParams};

use crate::config::Resolved;
use crate::output::write_json;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub target: f64,
    pub tol: f64,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct ValidateReport {
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub all_pass: bool,
    pub checks: Vec<CheckResult>,
}

fn check_rel(name: &str, value: f64, target: f64, rel_tol: f64, detail: String) -> CheckResult {
    let pass = (value - target).abs() <= rel_tol * target.abs();
    CheckResult {
        name: name.into(),
        pass,
        value,
        target,
        tol: rel_tol,
        detail,
    }
}

fn check_abs(name: &str, value: f64, target: f64, abs_tol: f64, detail: String) -> CheckResult {
    let pass = (value - target).abs() <= abs_tol;
    CheckResult {
        name: name.into(),
        pass,
        value,
        target,
        tol: abs_tol,
        detail,
    }
}

fn heartbeat(name: &str) {
    eprintln!("validate: running {name} ...");
}

/// Monte Carlo of E|R_t| with bridge-excess-corrected extrema.
fn range_mc(t: f64, n_steps: usize, n_paths: usize, key: &StreamKey) -> f64 {
    use rayon::prelude::*;
    let sums: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let p = sample_brownian_path(t, n_steps, &key.child(i as u64)).expect("params ok");
            corrected_max(&p, 1.0) + corrected_max(&p.negated(), 1.0)
        })
        .collect();
    sums.iter().sum::<f64>() / n_paths as f64
}

/// Two-barrier absorbing MC with per-step bridge survival factors.
fn confinement_mc(r: f64, t: f64, n_steps: usize, n_paths: usize, key: &StreamKey) -> f64 {
    use rayon::prelude::*;
    let dt = t / n_steps as f64;
    let vals: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let p = sample_brownian_path(t, n_steps, &key.child(i as u64)).expect("params ok");
            let mut alive = 1.0;
            for j in 0..n_steps {
                let (x0, x1) = (p.values[j], p.values[j + 1]);
                if x0.abs() >= r || x1.abs() >= r {
                    return 0.0;
                }
                alive *= (1.0 - bridge_hit_prob(x0, x1, dt, r, 1.0))
                    * (1.0 - bridge_hit_prob(x0, x1, dt, -r, 1.0));
            }
            alive
        })
        .collect();
    vals.iter().sum::<f64>() / n_paths as f64
}

/// Quadrature of the arcsine density over (0, t) with the square-root
/// substitution u = s^2 on each half, which removes both singularities.
fn arcsine_total_mass(t: f64) -> f64 {
    let half = integrate(
        |s| 2.0 / (std::f64::consts::PI * (t - s * s).sqrt()),
        0.0,
        (t / 2.0).sqrt(),
        1e-10,
    );
    2.0 * half
}

pub fn run(resolved: &Resolved, out_dir: &Path) -> Result<bool> {
    let v = &resolved.cfg.validate;
    let key = StreamKey::new(resolved.seed);
    let mut checks: Vec<CheckResult> = Vec::new();

    heartbeat("expected range vs MC (t = 1, 4)");
    for (i, t) in [1.0f64, 4.0].into_iter().enumerate() {
        let mc = range_mc(t, 4096, v.n_range, &key.child(10 + i as u64));
        let exact = expected_range(t)?;
        checks.push(check_rel(
            &format!("expected_range_t{t}"),
            mc,
            exact,
            0.01,
            format!("{} corrected-extrema paths at 4096 steps", v.n_range),
        ));
    }

    heartbeat("confinement series vs absorbing MC");
    let mc = confinement_mc(1.0, 1.0, 2048, v.n_confinement, &key.child(20));
    checks.push(check_rel(
        "confinement_value_vs_mc",
        mc,
        confinement_prob(1.0, 1.0),
        0.02,
        format!("{} absorbing-barrier paths", v.n_confinement),
    ));

    heartbeat("confinement log slope");
    {
        let taus: Vec<f64> = (0..=12).map(|i| 4.0 + i as f64).collect();
        let logs: Vec<f64> = taus.iter().map(|&u| confinement_prob(1.0, u).ln()).collect();
        let (slope, _) = linear_fit(&taus, &logs)?;
        checks.push(check_rel(
            "confinement_log_slope",
            slope,
            -std::f64::consts::PI * std::f64::consts::PI / 8.0,
            0.01,
            "slope of log P vs t/r^2 on [4, 16]".into(),
        ));
    }

    heartbeat("density normalizations");
    checks.push(check_abs(
        "arcsine_total_mass",
        arcsine_total_mass(1.0),
        1.0,
        1e-6,
        "quadrature with sqrt substitution".into(),
    ));
    checks.push(check_abs(
        "joint_total_mass",
        box_mass_max_argmax(1.0, 1e6, 0.0, 1.0)?,
        1.0,
        1e-6,
        "box mass over the full support".into(),
    ));
    checks.push(check_abs(
        "first_passage_total_mass",
        integrate_to_infinity(|u| first_passage_density(1.0, u), 0.0, 1e-8),
        1.0,
        1e-6,
        "x = 1".into(),
    ));
    checks.push(check_abs(
        "conditioned_transition_total_mass",
        integrate_to_infinity(
            |y| conditioned_positive_transition(1.0, y, 0.5, 1.0),
            0.0,
            1e-8,
        ),
        1.0,
        1e-6,
        "(x, s, t) = (1, 0.5, 1)".into(),
    ));
    {
        // m-marginal of the joint density vs the arcsine density at 20
        // interior points.
        let t = 1.0;
        let mut worst = 0.0f64;
        for i in 1..=20 {
            let u = t * i as f64 / 21.0;
            let marginal = integrate_to_infinity(|m| max_argmax_density(m, u, t), 0.0, 1e-10);
            worst = worst.max((marginal - argmax_density(u, t)).abs());
        }
        checks.push(check_abs(
            "joint_marginal_matches_arcsine",
            worst,
            0.0,
            1e-8,
            "worst absolute gap over 20 points".into(),
        ));
    }

    heartbeat("direct vs annealed equivalence");
    {
        let params = SimParams::new(v.lambda, v.a, v.t)?;
        let direct = direct_survival_estimate(
            &params,
            v.n_direct,
            &key.child(30),
            resolved.kill_mode(),
        )?;
        let annealed = annealed_survival_estimate(
            &params,
            v.n_outer,
            v.m_inner,
            &key.child(31),
            resolved.sup_mode(),
            resolved.cfg.modes.debias,
        )?;
        let se = (direct.std_err.powi(2) + annealed.estimate.std_err.powi(2)).sqrt();
        checks.push(CheckResult {
            name: "direct_vs_annealed".into(),
            pass: (direct.value - annealed.estimate.value).abs() <= 3.0 * se,
            value: direct.value,
            target: annealed.estimate.value,
            tol: 3.0 * se,
            detail: format!(
                "lambda={}, a={}, t={}; |diff| vs 3 combined SE; convexity bias {:.2e}",
                v.lambda, v.a, v.t, annealed.convexity_bias
            ),
        });
    }

    heartbeat("lambda = 0 degenerate case");
    {
        let params = SimParams::new(0.0, v.a, v.t)?;
        let direct =
            direct_survival_estimate(&params, 500, &key.child(40), resolved.kill_mode())?;
        let annealed = annealed_survival_estimate(
            &params,
            100,
            16,
            &key.child(41),
            resolved.sup_mode(),
            false,
        )?;
        checks.push(check_abs(
            "lambda_zero_exact",
            direct.value + annealed.estimate.value,
            2.0,
            0.0,
            "both routes must return exactly 1".into(),
        ));
    }

    heartbeat("thread independence");
    {
        let params = SimParams::new(v.lambda, v.a, (v.t / 2.0).max(0.25))?;
        let run_in = |threads: usize| -> Result<f64> {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()?;
            Ok(pool
                .install(|| {
                    direct_survival_estimate(&params, 2000, &key.child(50), resolved.kill_mode())
                })?
                .value)
        };
        let p1 = run_in(1)?;
        let p4 = run_in(4)?;
        checks.push(check_abs(
            "thread_independence",
            (p1.to_bits() != p4.to_bits()) as u8 as f64,
            0.0,
            0.0,
            "bit-identical estimate at 1 and 4 threads".into(),
        ));
    }

    let all_pass = checks.iter().all(|c| c.pass);
    for c in &checks {
        println!(
            "check {:<36} {}  value {:<24} target {:<24}",
            c.name,
            if c.pass { "PASS" } else { "FAIL" },
            c.value,
            c.target
        );
    }
    let report = ValidateReport {
        version: resolved.version.clone(),
        seed: resolved.seed,
        config_hash: resolved.config_hash.clone(),
        all_pass,
        checks,
    };
    write_json(&out_dir.join("validate_report.json"), &report)?;
    Ok(all_pass)
}
