//! Subcommand drivers shared by the CLI and the tests.

use std::fs;
use std::path::Path;

use serde_json::json;

use crate::control::{optimality_residual, optimize, ControlProblem, OptimizeResult};
use crate::error::{Error, Result};
use crate::galerkin::{compare_to_pde, ComparisonReport, GalerkinSystem};
use crate::state::{simulate, simulate_series, SimulateOptions, StateTrajectory, DEFAULT_DELTA_MARGIN};

use super::config::RunConfig;
use super::io::{fmt_f64, write_csv, write_diagnostics_csv, write_history_csv, write_snapshots};
use super::verify::{find, CheckOutcome, REGISTRY};

fn prepare(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

/// Forward solve; writes `diagnostics.csv` and `snapshots.cho` (all φ frames).
pub fn run_simulate(cfg: &RunConfig, out: &Path) -> Result<StateTrajectory> {
    prepare(out)?;
    let phi0 = cfg.initial_state()?;
    let control = cfg.control()?;
    let potential = cfg.potential()?;
    let options = SimulateOptions {
        override_compatibility: cfg.override_compatibility,
        delta_margin: DEFAULT_DELTA_MARGIN,
    };
    let traj = simulate(&phi0, &control, &potential, &options)?;
    write_diagnostics_csv(&out.join("diagnostics.csv"), &traj.diagnostics)?;
    write_snapshots(&out.join("snapshots.cho"), &traj.phi)?;
    Ok(traj)
}

/// Optimal control solve started from the configured control; writes
/// `history.csv`, `control.cho`, `diagnostics.csv` and `summary.json`.
pub fn run_optimize(cfg: &RunConfig, out: &Path) -> Result<OptimizeResult> {
    prepare(out)?;
    let phi0 = cfg.initial_state()?;
    let potential = cfg.potential()?;
    let time = cfg.time_grid()?;
    let cost = cfg.cost(&potential, &phi0)?;
    let u0 = cfg.control()?;
    let problem = ControlProblem::new(phi0, potential, time, cost)?;
    let config = cfg.optimizer_config();
    let result = optimize(u0.slices(), &problem, u0.m_bound(), u0.mprime_bound(), &config)?;
    let report = optimality_residual(
        &result.u_star,
        &result.evaluation.gradient,
        cfg.optimizer.probes,
        cfg.seed,
        config.dykstra_iters,
    )?;

    write_history_csv(&out.join("history.csv"), &result.history)?;
    write_snapshots(&out.join("control.cho"), result.u_star.slices())?;
    write_diagnostics_csv(&out.join("diagnostics.csv"), &result.evaluation.trajectory.diagnostics)?;
    let last = result.history.last().expect("history holds the initial iterate");
    let summary = json!({
        "status": result.status.as_str(),
        "iterations": last.iter,
        "J": result.evaluation.j,
        "J_initial": result.history[0].j,
        "stationarity": last.stationarity,
        "vi_min": report.min_value,
        "vi_scale": report.scale,
        "vi_relative": report.relative(),
        "vi_probes": report.probes,
        "seed": cfg.seed,
    });
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary).expect("plain JSON") + "\n")?;
    Ok(result)
}

#[derive(Debug, Clone)]
pub struct VerifyRow {
    pub name: &'static str,
    pub module: &'static str,
    pub outcome: CheckOutcome,
}

/// Runs the configured checks (all of them when none are listed) with the
/// config seed; writes `verify.csv`. A check that errors counts as failed.
pub fn run_verify(cfg: &RunConfig, out: &Path) -> Result<Vec<VerifyRow>> {
    prepare(out)?;
    let checks: Vec<_> = if cfg.verify.checks.is_empty() {
        REGISTRY.iter().collect()
    } else {
        cfg.verify
            .checks
            .iter()
            .map(|n| find(n).ok_or_else(|| Error::Validation(format!("unknown verification check `{n}`"))))
            .collect::<Result<_>>()?
    };
    let rows: Vec<VerifyRow> = checks
        .into_iter()
        .map(|c| VerifyRow {
            name: c.name,
            module: c.module,
            outcome: c.run(cfg.seed).unwrap_or_else(|e| CheckOutcome {
                pass: false,
                value: f64::NAN,
                threshold: f64::NAN,
                detail: format!("{}: {e}", e.kind()),
            }),
        })
        .collect();
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.name.to_string(),
                r.module.to_string(),
                r.outcome.pass.to_string(),
                fmt_f64(r.outcome.value),
                fmt_f64(r.outcome.threshold),
                csv_quote(&r.outcome.detail),
            ]
        })
        .collect();
    write_csv(&out.join("verify.csv"), &["name", "module", "pass", "value", "threshold", "detail"], &csv_rows)?;
    Ok(rows)
}

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Galerkin oracle against the spectral solver for the configured run;
/// writes `oracle.csv` with per-step relative errors.
pub fn run_oracle_compare(cfg: &RunConfig, out: &Path) -> Result<ComparisonReport> {
    prepare(out)?;
    let phi0 = cfg.initial_state()?;
    let control = cfg.control()?;
    let potential = cfg.potential()?;
    let time = cfg.time_grid()?;
    let system = GalerkinSystem::new(cfg.grid()?, cfg.oracle.modes)?;
    let y0 = system.project_initial(&phi0)?;
    let projected = system.synthesize(&y0);
    let pde = simulate_series(&projected, &time, control.slices(), &potential)?;
    let oracle = system.integrate(&y0, control.slices(), &potential, &time, cfg.oracle.substeps)?;
    let report = compare_to_pde(&oracle, &pde)?;
    let rows: Vec<Vec<String>> = (0..=time.steps())
        .map(|n| {
            vec![
                fmt_f64(time.time(n)),
                fmt_f64(report.phi_errors[n]),
                fmt_f64(report.mu_errors[n]),
            ]
        })
        .collect();
    write_csv(&out.join("oracle.csv"), &["t", "phi_error", "mu_error"], &rows)?;
    Ok(report)
}

/// Writes `failure.json` describing `err` into `out`.
pub fn write_failure(out: &Path, err: &Error) -> Result<()> {
    prepare(out)?;
    let step = match err {
        Error::NonFinite { step } | Error::NewtonFailure { step } => Some(*step),
        _ => None,
    };
    let record = json!({
        "error": err.kind(),
        "message": err.to_string(),
        "step": step,
    });
    fs::write(out.join("failure.json"), serde_json::to_string_pretty(&record).expect("plain JSON") + "\n")?;
    Ok(())
}
