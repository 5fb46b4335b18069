//! Command implementations: solve, verify, sweep, glue.

use crate::config::{Format, RunConfig};
use crate::output;
use crate::svg::LinePlot;
use anyhow::Result;
use lognodal_core::bubbles::{self, asymptotic_sweep, sweep_values, BubbleSpec, SweepQuantity};
use lognodal_core::quadrature::RadialGrid;
use lognodal_core::{estimates, glue, shoot, Params, RadialFn};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Process exit codes: 0 success, 1 usage/config, 2 solver, 3 gate failure.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_GATE: i32 = 3;

#[derive(Serialize)]
struct SolveSummary {
    command: &'static str,
    params: Params,
    k: usize,
    sign: String,
    construction: String,
    initial_value: f64,
    energy: f64,
    nodal_domains: usize,
    node_radii: Vec<f64>,
    ode_residual: f64,
    nehari_residual_total: Option<f64>,
    nehari_residual_per_domain: Vec<f64>,
    derivative_mismatches: Option<Vec<f64>>,
    files: BTreeMap<String, String>,
}

fn profile_points(u: &RadialFn, count: usize) -> Vec<(f64, f64)> {
    let radius = u.grid().radius();
    (0..=count)
        .map(|i| {
            let r = radius * i as f64 / count as f64;
            (r, u.eval(r))
        })
        .collect()
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<i32> {
    let params = cfg.params()?;
    let result = match shoot::shoot_k_with(&params, cfg.k, cfg.sign.as_i8(), &cfg.shoot_options(), None)
    {
        Ok(r) => r,
        Err(e) => {
            eprintln!("solver failure: {e}");
            return Ok(EXIT_SOLVER);
        }
    };
    let csv_path = cfg.out.join("solution.csv");
    output::write_profile_csv(&csv_path, &result.solution)?;
    let mut files = BTreeMap::new();
    files.insert("profile_csv".to_string(), csv_path.display().to_string());
    let svg_path = cfg.out.join("solution.svg");
    if cfg.plot {
        let points = profile_points(&result.solution, 800);
        LinePlot {
            title: &format!("radial profile, k = {}", cfg.k),
            points: &points,
            marks: &result.node_radii,
            x_label: "r",
            y_label: "u(r)",
        }
        .write(&svg_path)?;
        files.insert("plot_svg".to_string(), svg_path.display().to_string());
    }
    let summary = SolveSummary {
        command: "solve",
        params,
        k: cfg.k,
        sign: if cfg.sign.as_i8() > 0 { "+" } else { "-" }.to_string(),
        construction: "shoot".to_string(),
        initial_value: result.initial_value,
        energy: result.energy,
        nodal_domains: result.nodal_domains,
        node_radii: result.node_radii.clone(),
        ode_residual: result.ode_residual,
        nehari_residual_total: Some(result.nehari_residual_total),
        nehari_residual_per_domain: result.nehari_residual_per_domain.clone(),
        derivative_mismatches: None,
        files,
    };
    let json_path = cfg.out.join("summary.json");
    output::write_json(&json_path, &summary)?;
    match cfg.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&summary)?),
        Format::Csv => println!(
            "k,{}\nenergy,{:?}\ninitial_value,{:?}\node_residual,{:?}",
            cfg.k, result.energy, result.initial_value, result.ode_residual
        ),
    }
    Ok(EXIT_OK)
}

pub fn cmd_glue(cfg: &RunConfig) -> Result<i32> {
    let params = cfg.params()?;
    let init = cfg
        .init_nodes
        .clone()
        .unwrap_or_else(|| glue::default_nodes(&params, cfg.k));
    let glued = match glue::optimize_nodes(&params, cfg.k, &init) {
        Ok(g) => g,
        Err(e) => {
            eprintln!("solver failure: {e}");
            return Ok(EXIT_SOLVER);
        }
    };
    let sign = cfg.sign.as_i8();
    let assembled = if sign > 0 {
        glued.assembled.clone()
    } else {
        glued.assembled.scaled(-1.0)
    };
    let csv_path = cfg.out.join("glued.csv");
    output::write_profile_csv(&csv_path, &assembled)?;
    let mut files = BTreeMap::new();
    files.insert("profile_csv".to_string(), csv_path.display().to_string());
    if cfg.plot {
        let svg_path = cfg.out.join("glued.svg");
        let points = profile_points(&assembled, 800);
        LinePlot {
            title: &format!("glued profile, k = {}", cfg.k),
            points: &points,
            marks: &glued.nodes,
            x_label: "r",
            y_label: "u(r)",
        }
        .write(&svg_path)?;
        files.insert("plot_svg".to_string(), svg_path.display().to_string());
    }
    let summary = SolveSummary {
        command: "glue",
        params,
        k: cfg.k,
        sign: if sign > 0 { "+" } else { "-" }.to_string(),
        construction: "glue".to_string(),
        initial_value: assembled.eval(0.0),
        energy: glued.total_energy,
        nodal_domains: cfg.k,
        node_radii: glued.nodes.clone(),
        ode_residual: glued.ode_residual,
        nehari_residual_total: None,
        nehari_residual_per_domain: glued.nehari_residual_per_domain.clone(),
        derivative_mismatches: Some(glued.mismatches.clone()),
        files,
    };
    let json_path = cfg.out.join("summary.json");
    output::write_json(&json_path, &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SubCheck {
    name: String,
    passed: bool,
    value: f64,
    threshold: f64,
    detail: String,
}

#[derive(Serialize)]
struct VerifyReport {
    command: &'static str,
    check: String,
    params: Params,
    passed: bool,
    subchecks: Vec<SubCheck>,
}

fn finish_verify(cfg: &RunConfig, check: &str, subchecks: Vec<SubCheck>) -> Result<i32> {
    let passed = subchecks.iter().all(|s| s.passed);
    let report = VerifyReport {
        command: "verify",
        check: check.to_string(),
        params: cfg.params()?,
        passed,
        subchecks,
    };
    output::write_json(&cfg.out.join("report.json"), &report)?;
    for s in &report.subchecks {
        println!(
            "{:4} {}: value {:?} vs threshold {:?} {}",
            if s.passed { "ok" } else { "FAIL" },
            s.name,
            s.value,
            s.threshold,
            s.detail
        );
    }
    println!(
        "verify {}: {}",
        report.check,
        if passed { "PASS" } else { "FAIL" }
    );
    Ok(if passed { EXIT_OK } else { EXIT_GATE })
}

pub fn cmd_verify(cfg: &RunConfig, check: &str) -> Result<i32> {
    match check {
        "bubbles" => verify_bubbles(cfg),
        "bc-gap" => verify_bc_gap(cfg),
        "nodal-gap" => verify_nodal_gap(cfg),
        "logsob" => verify_logsob(cfg),
        "cross-term" => verify_cross_term(cfg),
        "continuation" => verify_continuation(cfg),
        other => {
            eprintln!(
                "unknown check '{other}'; expected one of bubbles, bc-gap, nodal-gap, logsob, cross-term, continuation"
            );
            Ok(EXIT_CONFIG)
        }
    }
}

fn verify_bubbles(cfg: &RunConfig) -> Result<i32> {
    let dim = cfg.dim;
    let crit = 2.0 * dim as f64 / (dim as f64 - 2.0);
    let mut subchecks = Vec::new();
    let level = bubbles::sobolev_level(dim)?;
    for &eps in &[0.1, 1.0, 10.0] {
        let grad = lognodal_core::quadrature::integrate_halfline(
            |r| bubbles::bubble_deriv(eps, r, dim).powi(2),
            eps,
            dim,
        )?;
        let mass = lognodal_core::quadrature::integrate_halfline(
            |r| bubbles::bubble_value(eps, r, dim).powf(crit),
            eps,
            dim,
        )?;
        let gap = (grad - mass).abs() / level;
        subchecks.push(SubCheck {
            name: format!("identity-eps-{eps}"),
            passed: gap <= 1e-8,
            value: gap,
            threshold: 1e-8,
            detail: "relative gap between the gradient and critical-norm integrals".into(),
        });
    }
    let spec = BubbleSpec::new(1.0, cfg.rho, dim)?;
    let grid = RadialGrid::for_cutoff(
        cfg.radius,
        cfg.rho,
        cfg.rho * 0.5f64.powi(cfg.eps_pow_hi as i32),
        8,
        dim,
    )?;
    let eps = cfg.eps_sweep();
    let n = dim as f64;
    let targets = [
        (SweepQuantity::GradSqDefect, n - 2.0, 0.3),
        (SweepQuantity::CritNormDefect, n, 0.5),
        (SweepQuantity::L2Norm, 2.0, 0.1),
        (SweepQuantity::L1Norm, (n - 2.0) / 2.0, 0.15),
        (SweepQuantity::CritMinusOneNorm, (n - 2.0) / 2.0, 0.15),
    ];
    for (q, target, tol) in targets {
        let fit = asymptotic_sweep(q, &eps, &spec, &grid)?;
        subchecks.push(SubCheck {
            name: format!("exponent-{q:?}"),
            passed: (fit.exponent - target).abs() <= tol && fit.r_squared >= 0.999,
            value: fit.exponent,
            threshold: target,
            detail: format!("tolerance {tol}, r^2 = {:.6}", fit.r_squared),
        });
    }
    let values = sweep_values(SweepQuantity::LogMoment, &eps, &spec, &grid)?;
    let ratios: Vec<f64> = values
        .iter()
        .map(|&(e, v)| v / (e * e * e.ln().abs()))
        .collect();
    let rmin = ratios.iter().cloned().fold(f64::MAX, f64::min);
    let rmax = ratios.iter().cloned().fold(f64::MIN, f64::max);
    subchecks.push(SubCheck {
        name: "log-moment-prefactor".into(),
        passed: rmin > 0.0 && rmax / rmin <= 1.1,
        value: rmax / rmin,
        threshold: 1.1,
        detail: format!("prefactor range {rmin:.4}..{rmax:.4}, positive and stable"),
    });
    finish_verify(cfg, "bubbles", subchecks)
}

fn verify_bc_gap(cfg: &RunConfig) -> Result<i32> {
    let params = cfg.params()?;
    match estimates::gap_check_bc(&params) {
        Ok(gap) => finish_verify(
            cfg,
            "bc-gap",
            vec![SubCheck {
                name: "bc-gap-margin".into(),
                passed: gap.margin > 0.0,
                value: gap.margin,
                threshold: 0.0,
                detail: format!(
                    "C = {:?}, B2 = {:?}, S^(N/2)/N = {:?}",
                    gap.lower_level, gap.upper_level, gap.sobolev_term
                ),
            }],
        ),
        Err(e) => {
            eprintln!("solver failure: {e}");
            Ok(EXIT_SOLVER)
        }
    }
}

fn verify_nodal_gap(cfg: &RunConfig) -> Result<i32> {
    let params = cfg.params()?;
    let report = match estimates::full_report(&params, cfg.k_max + 1) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("solver failure: {e}");
            return Ok(EXIT_SOLVER);
        }
    };
    let mut subchecks = Vec::new();
    for k in 1..=cfg.k_max {
        let name = format!("nodal-gap-{k}");
        match report.gap_margins.get(&name) {
            Some(&margin) => subchecks.push(SubCheck {
                name,
                passed: margin > 0.0,
                value: margin,
                threshold: 0.0,
                detail: String::new(),
            }),
            None => subchecks.push(SubCheck {
                name: name.clone(),
                passed: false,
                value: f64::NAN,
                threshold: 0.0,
                detail: report
                    .errors
                    .values()
                    .next()
                    .cloned()
                    .unwrap_or_else(|| "level unavailable".into()),
            }),
        }
    }
    finish_verify(cfg, "nodal-gap", subchecks)
}

fn verify_logsob(cfg: &RunConfig) -> Result<i32> {
    let params = cfg.params()?;
    let grid = Arc::new(RadialGrid::with_breakpoints(cfg.radius, &[], 8, cfg.dim)?);
    let a = std::f64::consts::PI / 2.0;
    let mut worst = f64::MAX;
    for u in estimates::random_radial_suite(&grid, 100, 42) {
        worst = worst.min(estimates::logsobolev_check(&u, a, &params)?);
    }
    let mut subchecks = vec![SubCheck {
        name: "random-suite".into(),
        passed: worst >= 0.0,
        value: worst,
        threshold: 0.0,
        detail: "smallest margin over 100 seeded radial test functions".into(),
    }];
    match estimates::ground_level(&params) {
        Ok(g) => {
            let margin = estimates::logsobolev_check(&g.solution, a, &params)?;
            subchecks.push(SubCheck {
                name: "ground-state".into(),
                passed: margin >= 0.0,
                value: margin,
                threshold: 0.0,
                detail: String::new(),
            });
        }
        Err(e) => subchecks.push(SubCheck {
            name: "ground-state".into(),
            passed: false,
            value: f64::NAN,
            threshold: 0.0,
            detail: format!("ground solve failed: {e}"),
        }),
    }
    finish_verify(cfg, "logsob", subchecks)
}

fn verify_cross_term(cfg: &RunConfig) -> Result<i32> {
    let params = cfg.params()?;
    let eps = cfg.eps_sweep();
    let half_order = (cfg.dim as f64 - 2.0) / 2.0;
    match estimates::cross_term_check(1.0, -1.0, &eps, &params, cfg.rho) {
        Ok(rep) => finish_verify(
            cfg,
            "cross-term",
            vec![
                SubCheck {
                    name: "critical-norm-defect-exponent".into(),
                    passed: rep.crit_defect_pass,
                    value: rep.crit_defect_fit.exponent,
                    threshold: half_order - 0.3,
                    detail: format!("r^2 = {:.6}", rep.crit_defect_fit.r_squared),
                },
                SubCheck {
                    name: "log-moment-splitting-direction".into(),
                    passed: rep.log_defect_pass,
                    value: rep.log_defect_bound,
                    threshold: f64::INFINITY,
                    detail: "split minus combined stays of bubble-tail order".into(),
                },
            ],
        ),
        Err(e) => {
            eprintln!("solver failure: {e}");
            Ok(EXIT_SOLVER)
        }
    }
}

fn verify_continuation(cfg: &RunConfig) -> Result<i32> {
    let params = cfg.params()?;
    let schedule = cfg.schedule();
    let trace = match estimates::continuation(&params, cfg.k.max(2), &schedule) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("solver failure: {e}");
            return Ok(EXIT_SOLVER);
        }
    };
    let mut subchecks = vec![SubCheck {
        name: "branch-tracked".into(),
        passed: trace.len() == schedule.len(),
        value: trace.len() as f64,
        threshold: schedule.len() as f64,
        detail: format!(
            "levels {:?}",
            trace.iter().map(|s| s.level).collect::<Vec<_>>()
        ),
    }];
    match estimates::nodal_level(&params, cfg.k.max(2)) {
        Ok(level) => {
            let last = trace.last().map(|s| s.level).unwrap_or(f64::NAN);
            let gap = (last - level.value).abs() / level.value;
            subchecks.push(SubCheck {
                name: "final-level-gap".into(),
                passed: gap <= 1e-2,
                value: gap,
                threshold: 1e-2,
                detail: format!("critical-level reference {:?}", level.value),
            });
            subchecks.push(SubCheck {
                name: "limsup-surrogate".into(),
                passed: estimates::continuation_gate(&trace, level.value),
                value: trace.iter().rev().take(3).map(|s| s.level).fold(f64::MIN, f64::max),
                threshold: 1.01 * level.value,
                detail: "largest of the last three levels".into(),
            });
        }
        Err(e) => subchecks.push(SubCheck {
            name: "final-level-gap".into(),
            passed: false,
            value: f64::NAN,
            threshold: 1e-2,
            detail: format!(
                "critical-level reference unavailable: {}",
                e.to_string().lines().next().unwrap_or("")
            ),
        }),
    }
    finish_verify(cfg, "continuation", subchecks)
}

pub fn cmd_sweep(cfg: &RunConfig, axis: &str, values: &[f64], quantity: &str) -> Result<i32> {
    if values.is_empty() {
        eprintln!("empty sweep grid");
        return Ok(EXIT_CONFIG);
    }
    let evaluate = |v: f64| -> Result<f64, String> {
        let mut local = cfg.clone();
        match axis {
            "lambda" => local.lambda = v,
            "theta" => local.theta = v,
            "p" => local.exponent = Some(v),
            "eps" => {}
            other => return Err(format!("unknown sweep axis '{other}'")),
        }
        let params = local.params().map_err(|e| e.to_string())?;
        match quantity {
            "bc-gap" => estimates::gap_check_bc(&params)
                .map(|g| g.margin)
                .map_err(|e| e.to_string()),
            "nodal-gap" => estimates::gap_check_nodal(&params, local.k)
                .map(|g| g.margin)
                .map_err(|e| e.to_string()),
            "level" => estimates::nodal_level(&params, local.k)
                .map(|l| l.value)
                .map_err(|e| e.to_string()),
            "ground" => estimates::ground_level(&params)
                .map(|g| g.energy)
                .map_err(|e| e.to_string()),
            "log-moment" => {
                // eps axis: the swept value is the bubble scale itself
                let eps = if axis == "eps" { v } else { local.rho * 0.01 };
                let spec =
                    BubbleSpec::new(1.0, local.rho, local.dim).map_err(|e| e.to_string())?;
                bubbles::quantity_value(SweepQuantity::LogMoment, eps, &spec, 8)
                    .map_err(|e| e.to_string())
            }
            other => Err(format!("unknown sweep quantity '{other}'")),
        }
    };
    let rows: Vec<(f64, Result<f64, String>)> = values
        .par_iter()
        .map(|&v| (v, evaluate(v)))
        .collect();
    let csv_path = cfg.out.join("sweep.csv");
    output::write_sweep_csv(&csv_path, &rows)?;
    let ok = rows.iter().filter(|(_, r)| r.is_ok()).count();
    if cfg.plot {
        let points: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|(a, r)| r.as_ref().ok().map(|&v| (*a, v)))
            .collect();
        if points.len() >= 2 {
            LinePlot {
                title: &format!("{quantity} vs {axis}"),
                points: &points,
                marks: &[],
                x_label: axis,
                y_label: quantity,
            }
            .write(&cfg.out.join("sweep.svg"))?;
        }
    }
    println!(
        "sweep {quantity} over {axis}: {ok}/{} points succeeded -> {}",
        rows.len(),
        csv_path.display()
    );
    Ok(if ok * 5 >= rows.len() * 4 {
        EXIT_OK
    } else {
        EXIT_SOLVER
    })
}
