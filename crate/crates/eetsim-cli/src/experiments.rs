//! Experiment runners: each turns a typed config into an artifact bundle
//! (CSV files, JSON reports, a plotting stub, and a manifest) under the
//! run's output directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use eetsim::exec::RunMode;
use eetsim::grape::{self, OptimizeOptions, OptimizeStatus};
use eetsim::heom::{self, BathParams};
use eetsim::io;
use eetsim::model::{self, UnitScaler, UnitTag};
use eetsim::ramsey::{self, DecoherenceSource, RamseyConfig};
use eetsim::spectral::{self, NoiseChannel, SpectralDensitySpec, T2Fit};
use eetsim::trajectory;
use serde_json::json;

use crate::compare::{kendall_tau, ComparisonReport};
use crate::config::{
    EetDynamicsParams, GrapeParams, LoadedConfig, RamseyParams, TargetSpec, TypedParams,
};
use crate::error::{from_run, CliError};

const TAU: f64 = std::f64::consts::TAU;

/// What a finished run hands back to the process shell.
pub struct RunOutcome {
    pub out_dir: PathBuf,
    /// Artifact file names, manifest excluded.
    pub artifacts: Vec<String>,
    /// Human summary lines.
    pub lines: Vec<String>,
    /// 0 success, 3 solver shortfall, 4 failed comparison.
    pub exit_code: i32,
}

/// Runs one experiment end to end and writes its manifest.
pub fn run_experiment(cfg: &LoadedConfig, mode: RunMode) -> Result<RunOutcome, CliError> {
    let t0 = Instant::now();
    let mut out = match &cfg.params {
        TypedParams::EetDynamics(p) => run_eet(p, cfg.master_seed, &cfg.out_dir, mode)?,
        TypedParams::Ramsey(p) => run_ramsey(p, cfg.master_seed, &cfg.out_dir, mode)?,
        TypedParams::Grape(p) => run_grape(p, cfg.master_seed, &cfg.out_dir)?,
        TypedParams::Sweep(p, m_list) => {
            run_sweep(p, m_list, cfg.master_seed, &cfg.out_dir, mode)?
        }
        TypedParams::Cost(p) => {
            let table = cost_table_text(p.sites, p.k, p.max_depth);
            let mut o = Bundle::new(&cfg.out_dir);
            o.write("cost.csv", &table)?;
            o.write("plot.py", PLOT_STUB)?;
            let mut lines: Vec<String> = table.lines().map(str::to_owned).collect();
            lines.push(format!("wrote {}", cfg.out_dir.join("cost.csv").display()));
            o.finish(lines, 0)
        }
    };
    write_manifest(cfg, &out, t0.elapsed().as_millis())?;
    out.lines.push(format!("manifest: {}", cfg.out_dir.join("manifest.json").display()));
    Ok(out)
}

/// Accumulates artifacts for one run directory.
struct Bundle {
    dir: PathBuf,
    files: Vec<String>,
}

impl Bundle {
    fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), files: Vec::new() }
    }

    fn write(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        io::write_text(&self.dir.join(name), content)
            .map_err(|e| CliError::Solver(format!("writing {name}: {e}")))?;
        self.files.push(name.to_owned());
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &serde_json::Value) -> Result<(), CliError> {
        let body = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Solver(format!("encoding {name}: {e}")))?;
        self.write(name, &format!("{body}\n"))
    }

    fn finish(self, lines: Vec<String>, exit_code: i32) -> RunOutcome {
        RunOutcome { out_dir: self.dir, artifacts: self.files, lines, exit_code }
    }
}

/// Readout times `0, step, ..., <= t_max` (at least two points).
fn readout_grid(t_max_ms: f64, step_ms: f64) -> Result<Vec<f64>, CliError> {
    let n = (t_max_ms / step_ms + 1e-9).floor() as usize;
    if n < 1 {
        return Err(CliError::Config(format!(
            "readout step {step_ms} ms does not fit into t_max {t_max_ms} ms"
        )));
    }
    Ok((0..=n).map(|i| i as f64 * step_ms).collect())
}

/// Tetramer dynamics: hierarchy reference against a noisy ensemble.
fn run_eet(
    p: &EetDynamicsParams,
    master_seed: u64,
    dir: &Path,
    mode: RunMode,
) -> Result<RunOutcome, CliError> {
    let scaler = UnitScaler::default();
    let e_rad: Vec<f64> = p.h_diag_khz.iter().map(|&e| TAU * e).collect();
    let c_rad: Vec<(usize, usize, f64)> =
        p.couplings_khz.iter().map(|&(i, j, v)| (i, j, TAU * v)).collect();
    let h = model::build_exciton_hamiltonian(&e_rad, &c_rad, UnitTag::NmrAngular)
        .map_err(from_run)?;
    let temp_nmr = scaler.temperature_to_nmr(p.temperature_eet_k);
    let bath =
        BathParams::uniform(h.dim(), TAU * p.lambda_khz, TAU * p.gamma_khz, temp_nmr)
            .map_err(from_run)?;
    let psi = model::encode_site(p.initial_site).map_err(from_run)?;
    let rho0 = &psi * psi.adjoint();
    let grid = readout_grid(p.t_max_ms, p.readout_step_ms)?;

    let (depth, probed) = match p.heom_depth {
        Some(d) => (d, false),
        None => (
            heom::converged_depth(&h, &bath, &rho0, &grid, p.depth_tol, mode)
                .map_err(from_run)?,
            true,
        ),
    };
    let run = heom::heom_propagate(&h, &bath, &rho0, &grid, depth, mode).map_err(from_run)?;

    let profile = spectral::modulation_profile(
        &SpectralDensitySpec::Debye { lambda: TAU * p.lambda_khz, gamma: TAU * p.gamma_khz },
        temp_nmr,
        TAU * p.omega0_khz,
        p.n_lines,
        p.noise_alpha,
        NoiseChannel::Dephasing,
    )
    .map_err(from_run)?;
    let ens =
        trajectory::ensemble_average(&h, &profile, p.m, p.dt_ms, &grid, &psi, master_seed, mode)
            .map_err(from_run)?;

    let report = population_comparison(&ens.mean, &run.populations, p.compare_tolerance);

    let mut b = Bundle::new(dir);
    b.write("heom_populations.csv", &io::populations_csv(&run))?;
    b.write("ensemble_populations.csv", &io::ensemble_csv(&ens))?;
    b.write("profile_audit.csv", &io::profile_audit_csv(&profile))?;
    b.write_json(
        "comparison.json",
        &serde_json::to_value(&report).expect("report serializes"),
    )?;
    b.write_json(
        "run_report.json",
        &json!({
            "heom_depth": depth,
            "depth_probed": probed,
            "max_trace_error": run.max_trace_error,
            "max_hermiticity_error": run.max_hermiticity_error,
            "high_temperature_warning": run.high_temperature_warning,
            "ensemble_size": ens.m,
            "master_seed": master_seed,
        }),
    )?;
    b.write("plot.py", PLOT_STUB)?;

    let lines = vec![
        format!(
            "hierarchy depth {depth}{}; trace error {:.2e}",
            if probed { " (probed)" } else { " (fixed)" },
            run.max_trace_error
        ),
        format!(
            "ensemble M={} vs hierarchy: max |dP| {:.4}, rms {:.4}, tolerance {} -> {}",
            ens.m,
            report.max_abs_deviation,
            report.rms_deviation,
            report.tolerance,
            if report.pass { "pass" } else { "FAIL" }
        ),
    ];
    let exit = if report.pass { 0 } else { 4 };
    Ok(b.finish(lines, exit))
}

/// Per-level deviation report between ensemble means and reference
/// populations on a common grid.
fn population_comparison(
    mean: &[Vec<f64>],
    reference: &[Vec<f64>],
    tolerance: f64,
) -> ComparisonReport {
    let levels = mean.first().map_or(0, Vec::len);
    let mut storage: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::with_capacity(levels);
    for k in 0..levels {
        let a: Vec<f64> = mean.iter().map(|row| row[k]).collect();
        let b: Vec<f64> = reference.iter().map(|row| row[k]).collect();
        storage.push((format!("P{}", k + 1), a, b));
    }
    let pairs: Vec<(String, &[f64], &[f64])> =
        storage.iter().map(|(n, a, b)| (n.clone(), a.as_slice(), b.as_slice())).collect();
    ComparisonReport::from_pairs(&pairs, tolerance, false)
}

/// Fringe study: simulated protocol against the closed-form series.
fn run_ramsey(
    p: &RamseyParams,
    master_seed: u64,
    dir: &Path,
    mode: RunMode,
) -> Result<RunOutcome, CliError> {
    let scaler = UnitScaler::default();
    let temp_nmr = scaler.temperature_to_nmr(p.temperature_eet_k);
    let profile = spectral::modulation_profile(
        &SpectralDensitySpec::Debye { lambda: TAU * p.lambda_khz, gamma: TAU * p.gamma_khz },
        temp_nmr,
        TAU * p.omega0_khz,
        p.n_lines,
        p.noise_alpha,
        NoiseChannel::Dephasing,
    )
    .map_err(from_run)?;
    let grid = readout_grid(p.t_max_ms, p.readout_step_ms)?;
    let omega_l = TAU * p.omega_l_khz;
    let config = RamseyConfig {
        omega_l,
        t_grid: grid.clone(),
        dt: p.dt_ms,
        m: p.m,
        source: DecoherenceSource::Chi(profile.clone()),
    };
    let analytic = ramsey::ramsey_analytic(&config).map_err(from_run)?;
    let sim = ramsey::ramsey_simulate(&config, &profile, master_seed, mode).map_err(from_run)?;

    let n = grid.len() as f64;
    let rms = (sim
        .p0_mean
        .iter()
        .zip(&analytic)
        .map(|(s, a)| (s - a) * (s - a))
        .sum::<f64>()
        / n)
        .sqrt();
    let mean_se = sim.p0_se.iter().sum::<f64>() / n;
    let bound = 3.0 * mean_se;
    let pass = rms <= bound;

    let window = p
        .envelope_window_ms
        .unwrap_or_else(|| (std::f64::consts::PI / omega_l).max(5.0 * p.readout_step_ms));
    let envelope = ramsey::extract_envelope(&grid, &sim.p0_mean, omega_l, Some(window)).ok();
    let t2 = match spectral::fit_t2(&profile) {
        T2Fit::Reached(t) => Some(t),
        T2Fit::Unreachable => None,
    };

    let mut b = Bundle::new(dir);
    b.write("ramsey_simulated.csv", &io::ramsey_simulated_csv(&sim))?;
    b.write(
        "ramsey_analytic.csv",
        &io::ramsey_analytic_csv(&grid, &analytic).map_err(from_run)?,
    )?;
    if let Some(env) = &envelope {
        b.write("envelope.csv", &io::envelope_csv(env))?;
    }
    let env_fit = envelope.as_ref().and_then(|e| e.decay.as_ref()).and_then(|fit| {
        fit.time_constant_ms.is_finite().then(|| {
            json!({ "amplitude": fit.amplitude, "time_constant_ms": fit.time_constant_ms })
        })
    });
    b.write_json(
        "ramsey_report.json",
        &json!({
            "m": sim.m,
            "rms_deviation": rms,
            "mean_standard_error": mean_se,
            "bound_three_se": bound,
            "pass": pass,
            "predicted_t2_ms": t2,
            "envelope_fit": env_fit,
            "master_seed": master_seed,
        }),
    )?;
    b.write("plot.py", PLOT_STUB)?;

    let lines = vec![format!(
        "simulated M={} vs analytic: rms {:.5} against 3 x mean SE {:.5} -> {}",
        sim.m,
        rms,
        bound,
        if pass { "pass" } else { "FAIL" }
    )];
    let exit = if pass { 0 } else { 4 };
    Ok(b.finish(lines, exit))
}

/// Pulse search for a two-qubit target gate.
fn run_grape(p: &GrapeParams, master_seed: u64, dir: &Path) -> Result<RunOutcome, CliError> {
    let sys = grape::SpinSystem::two_spin(p.nu1_khz, p.nu2_khz, p.j_khz).map_err(from_run)?;
    let (target_name, u_target) = match p.target {
        TargetSpec::Cnot => ("cnot".to_owned(), grape::cnot()),
        TargetSpec::HaarRandom { seed } => {
            (format!("haar_random(seed={seed})"), grape::haar_random_unitary(4, seed))
        }
    };
    let dt = p.total_time_ms / p.segments as f64;
    let opts = OptimizeOptions {
        step0: p.step0,
        max_iter: p.max_iter,
        target_fidelity: p.target_fidelity,
        seed: master_seed,
        amplitude_cap: p.amplitude_cap_rad_per_ms,
        ..Default::default()
    };
    let outcome = grape::optimize(&u_target, &sys, p.segments, dt, &opts).map_err(from_run)?;

    let status = match outcome.status {
        OptimizeStatus::ReachedTarget => "reached_target",
        OptimizeStatus::MaxIterations => "max_iterations",
        OptimizeStatus::Stalled => "stalled",
    };
    let mut trace = String::from("iteration,fidelity\n");
    for (i, f) in outcome.trace.iter().enumerate() {
        trace.push_str(&format!("{i},{}\n", io::fmt_f64(*f)));
    }

    let mut b = Bundle::new(dir);
    b.write("pulse.csv", &io::pulse_csv(&outcome.pulse))?;
    b.write("fidelity_trace.csv", &trace)?;
    b.write_json(
        "grape_report.json",
        &json!({
            "target": target_name,
            "fidelity": outcome.fidelity,
            "target_fidelity": p.target_fidelity,
            "status": status,
            "accepted_steps": outcome.trace.len().saturating_sub(1),
            "segments": p.segments,
            "dt_ms": dt,
            "master_seed": master_seed,
        }),
    )?;
    b.write("plot.py", PLOT_STUB)?;

    let reached = outcome.fidelity >= p.target_fidelity;
    let lines = vec![format!(
        "{target_name}: fidelity {:.6} (target {}, {status}, {} accepted steps)",
        outcome.fidelity,
        p.target_fidelity,
        outcome.trace.len().saturating_sub(1)
    )];
    // A search that stops short is a solver shortfall, not a config error.
    let exit = if reached { 0 } else { 3 };
    Ok(b.finish(lines, exit))
}

/// Deviation-vs-M sweep against a fixed hierarchy reference.
fn run_sweep(
    p: &EetDynamicsParams,
    m_list: &[usize],
    master_seed: u64,
    dir: &Path,
    mode: RunMode,
) -> Result<RunOutcome, CliError> {
    let scaler = UnitScaler::default();
    let e_rad: Vec<f64> = p.h_diag_khz.iter().map(|&e| TAU * e).collect();
    let c_rad: Vec<(usize, usize, f64)> =
        p.couplings_khz.iter().map(|&(i, j, v)| (i, j, TAU * v)).collect();
    let h = model::build_exciton_hamiltonian(&e_rad, &c_rad, UnitTag::NmrAngular)
        .map_err(from_run)?;
    let temp_nmr = scaler.temperature_to_nmr(p.temperature_eet_k);
    let bath =
        BathParams::uniform(h.dim(), TAU * p.lambda_khz, TAU * p.gamma_khz, temp_nmr)
            .map_err(from_run)?;
    let psi = model::encode_site(p.initial_site).map_err(from_run)?;
    let rho0 = &psi * psi.adjoint();
    let grid = readout_grid(p.t_max_ms, p.readout_step_ms)?;
    let depth = match p.heom_depth {
        Some(d) => d,
        None => heom::converged_depth(&h, &bath, &rho0, &grid, p.depth_tol, mode)
            .map_err(from_run)?,
    };
    let reference = heom::heom_propagate(&h, &bath, &rho0, &grid, depth, mode).map_err(from_run)?;
    let profile = spectral::modulation_profile(
        &SpectralDensitySpec::Debye { lambda: TAU * p.lambda_khz, gamma: TAU * p.gamma_khz },
        temp_nmr,
        TAU * p.omega0_khz,
        p.n_lines,
        p.noise_alpha,
        NoiseChannel::Dephasing,
    )
    .map_err(from_run)?;

    let mut csv = String::from("m,max_abs_deviation,rms_deviation\n");
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for &m in m_list {
        let ens = trajectory::ensemble_average(
            &h, &profile, m, p.dt_ms, &grid, &psi, master_seed, mode,
        )
        .map_err(from_run)?;
        let rep = population_comparison(&ens.mean, &reference.populations, f64::INFINITY);
        csv.push_str(&format!(
            "{m},{},{}\n",
            io::fmt_f64(rep.max_abs_deviation),
            io::fmt_f64(rep.rms_deviation)
        ));
        lines.push(format!(
            "M={m}: max |dP| {:.4}, rms {:.4}",
            rep.max_abs_deviation, rep.rms_deviation
        ));
        rows.push(json!({
            "m": m,
            "max_abs_deviation": rep.max_abs_deviation,
            "rms_deviation": rep.rms_deviation,
        }));
    }
    let ms: Vec<f64> = m_list.iter().map(|&m| m as f64).collect();
    let devs: Vec<f64> = rows
        .iter()
        .map(|r| r["max_abs_deviation"].as_f64().expect("built as a number"))
        .collect();
    let tau_stat = kendall_tau(&ms, &devs);
    lines.push(format!("deviation-vs-M Kendall tau {tau_stat:.3} (negative means shrinking)"));

    let mut b = Bundle::new(dir);
    b.write("sweep.csv", &csv)?;
    b.write_json(
        "sweep_report.json",
        &json!({
            "heom_depth": depth,
            "rows": rows,
            "kendall_tau": tau_stat,
            "master_seed": master_seed,
        }),
    )?;
    b.write("plot.py", PLOT_STUB)?;
    Ok(b.finish(lines, 0))
}

/// Hierarchy sizes and analytic bounds per truncation depth, CSV-shaped.
pub fn cost_table_text(sites: usize, k: usize, max_depth: usize) -> String {
    let mut out = String::from("depth,count,stirling_bound\n");
    for depth in 0..=max_depth {
        let est = heom::cost_estimate(sites, k, depth);
        let bound = if est.bound_overflowed {
            "inf".to_owned()
        } else {
            io::fmt_f64(est.stirling_bound)
        };
        out.push_str(&format!("{depth},{},{bound}\n", est.count));
    }
    out
}

fn write_manifest(cfg: &LoadedConfig, out: &RunOutcome, runtime_ms: u128) -> Result<(), CliError> {
    let manifest = json!({
        "tool": "eetsim",
        "version": env!("CARGO_PKG_VERSION"),
        "kind": cfg.kind.name(),
        "preset": cfg.preset,
        "master_seed": cfg.master_seed,
        "config_sha256": cfg.sha256,
        "config": cfg.echo,
        "runtime_ms": runtime_ms,
        "artifacts": out.artifacts,
    });
    let body = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Solver(format!("encoding manifest: {e}")))?;
    io::write_text(&cfg.out_dir.join("manifest.json"), &format!("{body}\n"))
        .map_err(|e| CliError::Solver(format!("writing manifest: {e}")))
}

/// Matplotlib stub plotting every CSV artifact next to it.
const PLOT_STUB: &str = r##"#!/usr/bin/env python3
"""Plot the CSV artifacts in this directory (requires matplotlib)."""
import csv
import pathlib

import matplotlib.pyplot as plt

for path in sorted(pathlib.Path(__file__).resolve().parent.glob("*.csv")):
    with path.open() as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if len(rows) < 2 or len(rows[0]) < 2:
        continue
    header, body = rows[0], rows[1:]
    try:
        cols = [[float(r[i]) for r in body] for i in range(len(header))]
    except (ValueError, IndexError):
        continue
    fig, ax = plt.subplots()
    for name, col in zip(header[1:], cols[1:]):
        ax.plot(cols[0], col, label=name)
    ax.set_xlabel(header[0])
    ax.legend()
    fig.tight_layout()
    fig.savefig(path.with_suffix(".png"))
    print(f"wrote {path.with_suffix('.png').name}")
"##;
