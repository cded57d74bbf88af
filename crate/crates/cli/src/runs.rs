//! The survival / conditional / trend / analytics commands.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use trapsim_core::analytics;
use trapsim_core::conditional::{
    conditional_statistics, exponent_fit, event_trend_report, ConditionalRun, ExponentFit,
    TrendReport,
};
use trapsim_core::paths::StreamKey;
use trapsim_core::survival::{survival_report, Budgets, SurvivalReport};

use crate::config::Resolved;
use crate::output::{fmt_f64, write_json, CsvWriter};

pub const SURVIVAL_HEADER: [&str; 12] = [
    "t",
    "lambda",
    "a",
    "n_steps",
    "method",
    "value",
    "std_err",
    "n",
    "seed",
    "config_hash",
    "version",
    "r_star",
];

#[derive(Serialize)]
struct SurvivalJson {
    seed: u64,
    config_hash: String,
    version: String,
    reports: Vec<SurvivalReport>,
}

pub fn run_survival(resolved: &Resolved, out_dir: &Path) -> Result<()> {
    let mut csv = CsvWriter::create(&out_dir.join("survival.csv"), &SURVIVAL_HEADER)?;
    let budgets = Budgets {
        n_direct: resolved.cfg.budgets.n_direct,
        n_outer: resolved.cfg.budgets.n_outer,
        m_inner: resolved.cfg.budgets.m_inner,
    };
    let key = StreamKey::new(resolved.seed).child(1);
    let mut reports = Vec::new();
    for (i, &t) in resolved.cfg.grid.t_grid.iter().enumerate() {
        let params = resolved.sim_params_kill(t)?;
        eprintln!(
            "survival: t={t} (n_steps {}, window {:.2}) ...",
            params.n_steps, params.window_halfwidth
        );
        let report = survival_report(
            &params,
            &budgets,
            &key.child(i as u64),
            resolved.kill_mode(),
            resolved.sup_mode(),
            resolved.cfg.modes.debias,
        )?;
        eprintln!(
            "survival: t={t} direct {:.5} annealed {:.5} bound {:.3e} ({:.1}s + {:.1}s)",
            report.direct.value,
            report.annealed.value,
            report.lower_bound.value,
            report.wall_secs_direct,
            report.wall_secs_annealed
        );
        for est in [&report.direct, &report.annealed, &report.lower_bound] {
            csv.row(&[
                fmt_f64(t),
                fmt_f64(params.lambda),
                fmt_f64(params.a),
                params.n_steps.to_string(),
                est.method.name().to_string(),
                fmt_f64(est.value),
                fmt_f64(est.std_err),
                est.n.to_string(),
                resolved.seed.to_string(),
                resolved.config_hash.clone(),
                resolved.version.clone(),
                fmt_f64(report.r_star),
            ])?;
        }
        reports.push(report);
    }
    csv.finish()?;
    write_json(
        &out_dir.join("survival.json"),
        &SurvivalJson {
            seed: resolved.seed,
            config_hash: resolved.config_hash.clone(),
            version: resolved.version.clone(),
            reports,
        },
    )?;
    Ok(())
}

pub const CONDITIONAL_HEADER: [&str; 20] = [
    "t",
    "lambda",
    "a",
    "n_outer",
    "m_inner",
    "n_eff",
    "degenerate",
    "q10",
    "q25",
    "q50",
    "q75",
    "q90",
    "uncond_median",
    "event_a_prob",
    "event_a_se",
    "event_b_prob",
    "event_b_se",
    "seed",
    "config_hash",
    "version",
];

fn conditional_runs(resolved: &Resolved, root: &StreamKey) -> Result<Vec<ConditionalRun>> {
    let event_a = resolved.event_a()?;
    let event_b = resolved.event_b()?;
    let opts = resolved.conditional_options();
    let mut runs = Vec::new();
    for (i, &t) in resolved.cfg.grid.t_grid.iter().enumerate() {
        let params = resolved.sim_params_paths(t)?;
        eprintln!(
            "conditional: t={t} (n_outer {}, m_inner {}, n_steps {}) ...",
            resolved.cfg.budgets.n_outer, resolved.cfg.budgets.m_inner, params.n_steps
        );
        let run = conditional_statistics(
            &params,
            resolved.cfg.budgets.n_outer,
            resolved.cfg.budgets.m_inner,
            &event_a,
            &event_b,
            &root.child(i as u64),
            &opts,
        )?;
        eprintln!(
            "conditional: t={t} weighted median {:.4}, unweighted {:.4}, n_eff {:.0}",
            run.summary.quantiles[2].1, run.summary.unweighted_median, run.summary.n_eff
        );
        runs.push(run);
    }
    Ok(runs)
}

fn write_conditional_rows(
    resolved: &Resolved,
    runs: &[ConditionalRun],
    csv: &mut CsvWriter,
) -> Result<()> {
    for run in runs {
        let s = &run.summary;
        let q: Vec<f64> = s.quantiles.iter().map(|(_, v)| *v).collect();
        csv.row(&[
            fmt_f64(s.t_end),
            fmt_f64(s.lambda),
            fmt_f64(resolved.cfg.sim.a),
            s.n_outer.to_string(),
            s.m_inner.to_string(),
            fmt_f64(s.n_eff),
            (s.degenerate_weights as u8).to_string(),
            fmt_f64(q[0]),
            fmt_f64(q[1]),
            fmt_f64(q[2]),
            fmt_f64(q[3]),
            fmt_f64(q[4]),
            fmt_f64(s.unweighted_median),
            fmt_f64(s.event_a_prob.0),
            fmt_f64(s.event_a_prob.1),
            fmt_f64(s.event_b_prob.0),
            fmt_f64(s.event_b_prob.1),
            resolved.seed.to_string(),
            resolved.config_hash.clone(),
            resolved.version.clone(),
        ])?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FitJson {
    seed: u64,
    config_hash: String,
    version: String,
    fit: ExponentFit,
}

pub fn run_conditional(resolved: &Resolved, out_dir: &Path) -> Result<()> {
    let mut csv = CsvWriter::create(&out_dir.join("conditional.csv"), &CONDITIONAL_HEADER)?;
    let root = StreamKey::new(resolved.seed).child(2);
    let runs = conditional_runs(resolved, &root)?;
    write_conditional_rows(resolved, &runs, &mut csv)?;
    csv.finish()?;
    if runs.len() >= 3 {
        let batches: Vec<(f64, Vec<(f64, f64)>)> = runs
            .iter()
            .map(|r| {
                (
                    r.summary.t_end,
                    r.samples.iter().map(|s| (s.max_disp, s.weight)).collect(),
                )
            })
            .collect();
        let fit = exponent_fit(&batches, resolved.cfg.budgets.n_boot, &root.child(1_000_000))?;
        eprintln!(
            "conditional: fitted slope {:.4} (95% CI [{:.4}, {:.4}])",
            fit.slope, fit.slope_lo, fit.slope_hi
        );
        write_json(
            &out_dir.join("exponent_fit.json"),
            &FitJson {
                seed: resolved.seed,
                config_hash: resolved.config_hash.clone(),
                version: resolved.version.clone(),
                fit,
            },
        )?;
    } else {
        eprintln!("conditional: fewer than 3 time points, skipping the exponent fit");
    }
    Ok(())
}

pub const TREND_HEADER: [&str; 11] = [
    "t",
    "event",
    "c3",
    "cond_prob",
    "cond_se",
    "uncond_prob",
    "uncond_se",
    "n_eff",
    "seed",
    "config_hash",
    "version",
];

#[derive(Serialize)]
struct TrendJson {
    seed: u64,
    config_hash: String,
    version: String,
    report: TrendReport,
}

pub fn run_trend(resolved: &Resolved, out_dir: &Path) -> Result<()> {
    if resolved.cfg.grid.t_grid.len() < 3 {
        bail!("trend needs a t_grid with at least 3 points");
    }
    let mut csv = CsvWriter::create(&out_dir.join("trend.csv"), &TREND_HEADER)?;
    let root = StreamKey::new(resolved.seed).child(3);
    let runs = conditional_runs(resolved, &root)?;
    let refs: Vec<&ConditionalRun> = runs.iter().collect();
    let report = event_trend_report(
        &refs,
        &resolved.cfg.event_a.c3_grid,
        resolved.cfg.event_a.default_c3,
    )?;
    let n_eff_of = |t: f64| {
        runs.iter()
            .find(|r| r.summary.t_end == t)
            .map(|r| r.summary.n_eff)
            .unwrap_or(f64::NAN)
    };
    for row in report.a_rows.iter() {
        csv.row(&[
            fmt_f64(row.t),
            "a_thresholded".into(),
            fmt_f64(row.c3),
            fmt_f64(row.cond.0),
            fmt_f64(row.cond.1),
            fmt_f64(row.uncond.0),
            fmt_f64(row.uncond.1),
            fmt_f64(n_eff_of(row.t)),
            resolved.seed.to_string(),
            resolved.config_hash.clone(),
            resolved.version.clone(),
        ])?;
    }
    for row in report.b_rows.iter() {
        csv.row(&[
            fmt_f64(row.t),
            "b_blocks".into(),
            String::new(),
            fmt_f64(row.cond.0),
            fmt_f64(row.cond.1),
            fmt_f64(row.uncond.0),
            fmt_f64(row.uncond.1),
            fmt_f64(n_eff_of(row.t)),
            resolved.seed.to_string(),
            resolved.config_hash.clone(),
            resolved.version.clone(),
        ])?;
    }
    csv.finish()?;
    eprintln!(
        "trend: kendall tau A {:.3}, B {:.3}; non-increasing within noise: A {}, B {}",
        report.kendall_a, report.kendall_b, report.a_nonincreasing, report.b_nonincreasing
    );
    write_json(
        &out_dir.join("trend.json"),
        &TrendJson {
            seed: resolved.seed,
            config_hash: resolved.config_hash.clone(),
            version: resolved.version.clone(),
            report,
        },
    )?;
    Ok(())
}

/// Evaluate one closed form by name, printing the value to stdout.
pub fn run_analytics(query: &[String]) -> Result<()> {
    if query.is_empty() {
        bail!(
            "usage: analytics <name> <args...>; names: expected_range t | \
             range_tail t a | argmax_density u t | argmax_cdf u t | \
             max_argmax_density m u t | first_passage_density x u | \
             stay_positive_prob x t | conditioned_positive_transition x y s t | \
             confinement_prob r t | box_mass t m_hi u_lo u_hi"
        );
    }
    let name = query[0].as_str();
    let args: Vec<f64> = query[1..]
        .iter()
        .map(|s| {
            s.parse::<f64>()
                .with_context(|| format!("bad numeric argument {s:?}"))
        })
        .collect::<Result<_>>()?;
    let need = |n: usize| -> Result<()> {
        if args.len() != n {
            bail!("{name} takes {n} numeric arguments, got {}", args.len());
        }
        Ok(())
    };
    let value = match name {
        "expected_range" => {
            need(1)?;
            analytics::expected_range(args[0])?
        }
        "range_tail" => {
            need(2)?;
            analytics::range_tail_asymptotic(args[0], args[1])
        }
        "argmax_density" => {
            need(2)?;
            analytics::argmax_density(args[0], args[1])
        }
        "argmax_cdf" => {
            need(2)?;
            analytics::argmax_cdf(args[0], args[1])
        }
        "max_argmax_density" => {
            need(3)?;
            analytics::max_argmax_density(args[0], args[1], args[2])
        }
        "first_passage_density" => {
            need(2)?;
            analytics::first_passage_density(args[0], args[1])
        }
        "stay_positive_prob" => {
            need(2)?;
            analytics::stay_positive_prob(args[0], args[1])
        }
        "conditioned_positive_transition" => {
            need(4)?;
            analytics::conditioned_positive_transition(args[0], args[1], args[2], args[3])
        }
        "confinement_prob" => {
            need(2)?;
            analytics::confinement_prob(args[0], args[1])
        }
        "box_mass" => {
            need(4)?;
            analytics::box_mass_max_argmax(args[0], args[1], args[2], args[3])?
        }
        other => bail!("unknown analytics function {other:?}"),
    };
    println!("{value}");
    Ok(())
}
