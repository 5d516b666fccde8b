//! Experiment configuration: a single JSON document per run.
//!
//! The document names an experiment kind, optionally a parameter preset,
//! and inline parameter overrides. Presets ship inside the binary; inline
//! keys win over preset keys, preset keys win over built-in defaults.
//! Unknown keys anywhere are rejected rather than ignored.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// What a config file asks the tool to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Tetramer population dynamics: exact hierarchy run against a noisy
    /// trajectory ensemble, plus their comparison.
    EetDynamics,
    /// Fringe decay: simulated protocol against the closed-form series.
    Ramsey,
    /// Gradient pulse search for a two-qubit target gate.
    GrapeDesign,
    /// Ensemble-size sweep of the dynamics deviation.
    EnsembleSweep,
    /// Hierarchy size table over truncation depths.
    CostTable,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::EetDynamics => "eet_dynamics",
            Self::Ramsey => "ramsey",
            Self::GrapeDesign => "grape_design",
            Self::EnsembleSweep => "ensemble_sweep",
            Self::CostTable => "cost_table",
        }
    }
}

/// Top-level shape of the config document.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: ExperimentKind,
    #[serde(default)]
    preset: Option<String>,
    /// Inline parameter overrides, merged over the preset.
    #[serde(default)]
    params: Value,
    #[serde(default = "default_seed")]
    master_seed: u64,
    /// Output directory; overridable by `--out-dir` and `EETSIM_OUT_DIR`.
    #[serde(default)]
    out_dir: Option<PathBuf>,
}

fn default_seed() -> u64 {
    7
}

/// Parameters of an `eet_dynamics` or `ensemble_sweep` run.
///
/// Frequencies are laboratory kHz (`nu`, not `omega`); internally
/// everything becomes angular rad/ms. The temperature is given on the
/// electronic scale in kelvin and is downscaled by the same ratio as the
/// energies, so every Boltzmann factor is preserved.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EetDynamicsParams {
    /// Site energies in kHz, one per level.
    pub h_diag_khz: Vec<f64>,
    /// Couplings as `[i, j, J_khz]` with 1-based site labels.
    pub couplings_khz: Vec<(usize, usize, f64)>,
    #[serde(default = "d_lambda_khz")]
    pub lambda_khz: f64,
    #[serde(default = "d_gamma_khz")]
    pub gamma_khz: f64,
    #[serde(default = "d_temp_eet")]
    pub temperature_eet_k: f64,
    /// Comb base frequency in kHz.
    #[serde(default = "d_omega0_khz")]
    pub omega0_khz: f64,
    #[serde(default = "d_n_lines")]
    pub n_lines: usize,
    /// Overall noise amplitude; `sqrt(2)` makes the per-site signal
    /// variance match the bath's classical correlation at `t = 0`.
    #[serde(default = "d_alpha_matched")]
    pub noise_alpha: f64,
    #[serde(default = "d_dt_ms")]
    pub dt_ms: f64,
    #[serde(default = "d_t_max_ms")]
    pub t_max_ms: f64,
    /// CSV readout spacing; must sit on the step lattice.
    #[serde(default = "d_readout_eet")]
    pub readout_step_ms: f64,
    /// Ensemble size.
    #[serde(default = "d_m_eet")]
    pub m: usize,
    /// Level the excitation starts on (1-based).
    #[serde(default = "d_initial_site")]
    pub initial_site: usize,
    /// Fixed hierarchy depth; omit to probe until converged.
    #[serde(default)]
    pub heom_depth: Option<usize>,
    /// Convergence tolerance for the depth probe.
    #[serde(default = "d_depth_tol")]
    pub depth_tol: f64,
    /// Bound on the max ensemble-vs-hierarchy deviation for the report.
    #[serde(default = "d_compare_tol")]
    pub compare_tolerance: f64,
}

/// Parameters of a `ramsey` run; defaults reproduce the fringe study.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RamseyParams {
    /// Fringe frequency in kHz.
    #[serde(default = "d_omega_l_khz")]
    pub omega_l_khz: f64,
    #[serde(default = "d_lambda_khz")]
    pub lambda_khz: f64,
    #[serde(default = "d_gamma_khz")]
    pub gamma_khz: f64,
    #[serde(default = "d_temp_ramsey")]
    pub temperature_eet_k: f64,
    #[serde(default = "d_omega0_khz")]
    pub omega0_khz: f64,
    #[serde(default = "d_n_lines")]
    pub n_lines: usize,
    /// Matched-envelope convention: `chi = Re g` at amplitude 1.
    #[serde(default = "d_alpha_one")]
    pub noise_alpha: f64,
    #[serde(default = "d_dt_ms")]
    pub dt_ms: f64,
    #[serde(default = "d_t_max_ramsey")]
    pub t_max_ms: f64,
    #[serde(default = "d_dt_ms")]
    pub readout_step_ms: f64,
    #[serde(default = "d_m_ramsey")]
    pub m: usize,
    /// Demodulation window; omit for `max(half period, 5 readout steps)`.
    #[serde(default)]
    pub envelope_window_ms: Option<f64>,
}

/// Target gate of a pulse search.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSpec {
    Cnot,
    HaarRandom { seed: u64 },
}

/// Parameters of a `grape_design` run.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GrapeParams {
    /// Chemical shifts and scalar coupling of the two-spin register, kHz.
    pub nu1_khz: f64,
    pub nu2_khz: f64,
    pub j_khz: f64,
    #[serde(default = "d_total_time_ms")]
    pub total_time_ms: f64,
    #[serde(default = "d_segments")]
    pub segments: usize,
    #[serde(default = "d_target")]
    pub target: TargetSpec,
    #[serde(default = "d_target_fid")]
    pub target_fidelity: f64,
    #[serde(default = "d_max_iter")]
    pub max_iter: usize,
    #[serde(default = "d_step0")]
    pub step0: f64,
    /// Optional hard cap on control amplitudes, rad/ms.
    #[serde(default)]
    pub amplitude_cap_rad_per_ms: Option<f64>,
}

/// Parameters of a `cost_table` run.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CostTableParams {
    #[serde(default = "d_sites")]
    pub sites: usize,
    #[serde(default = "d_k_exponentials")]
    pub k: usize,
    #[serde(default = "d_max_depth")]
    pub max_depth: usize,
}

fn d_lambda_khz() -> f64 {
    0.01
}
fn d_gamma_khz() -> f64 {
    45.0
}
fn d_temp_eet() -> f64 {
    3.0e4
}
fn d_temp_ramsey() -> f64 {
    300.0
}
fn d_omega0_khz() -> f64 {
    0.005
}
fn d_n_lines() -> usize {
    5000
}
fn d_alpha_matched() -> f64 {
    std::f64::consts::SQRT_2
}
fn d_alpha_one() -> f64 {
    1.0
}
fn d_dt_ms() -> f64 {
    0.02
}
fn d_t_max_ms() -> f64 {
    12.0
}
fn d_t_max_ramsey() -> f64 {
    40.0
}
fn d_readout_eet() -> f64 {
    0.06
}
fn d_m_eet() -> usize {
    150
}
fn d_m_ramsey() -> usize {
    50
}
fn d_initial_site() -> usize {
    1
}
fn d_depth_tol() -> f64 {
    1e-4
}
fn d_compare_tol() -> f64 {
    0.2
}
fn d_omega_l_khz() -> f64 {
    15.0
}
fn d_total_time_ms() -> f64 {
    5.0
}
fn d_segments() -> usize {
    100
}
fn d_target() -> TargetSpec {
    TargetSpec::Cnot
}
fn d_target_fid() -> f64 {
    0.99
}
fn d_max_iter() -> usize {
    2000
}
fn d_step0() -> f64 {
    0.1
}
fn d_sites() -> usize {
    4
}
fn d_k_exponentials() -> usize {
    1
}
fn d_max_depth() -> usize {
    8
}
fn d_m_list() -> Vec<usize> {
    vec![50, 100, 500]
}

/// Typed parameters after preset merge.
#[derive(Debug, Clone)]
pub enum TypedParams {
    EetDynamics(EetDynamicsParams),
    Ramsey(RamseyParams),
    Grape(GrapeParams),
    /// Dynamics parameters plus the ensemble sizes to sweep.
    Sweep(EetDynamicsParams, Vec<usize>),
    Cost(CostTableParams),
}

/// A fully resolved run: typed parameters plus everything the manifest
/// needs to make the run reproducible.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub kind: ExperimentKind,
    pub preset: Option<String>,
    pub params: TypedParams,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    /// The parsed config document, echoed into the manifest.
    pub echo: Value,
    /// SHA-256 of the raw config file bytes, hex.
    pub sha256: String,
}

const PRESETS: &[(&str, &str)] = &[
    ("methods_tetramer", include_str!("../presets/methods_tetramer.json")),
    ("maintext_tetramer", include_str!("../presets/maintext_tetramer.json")),
    ("ramsey_figure", include_str!("../presets/ramsey_figure.json")),
    ("chloroform", include_str!("../presets/chloroform.json")),
];

fn preset_body(name: &str) -> Result<Value, CliError> {
    for (key, body) in PRESETS {
        if *key == name {
            return serde_json::from_str(body)
                .map_err(|e| CliError::Config(format!("preset {name} is not valid JSON: {e}")));
        }
    }
    let known: Vec<&str> = PRESETS.iter().map(|(k, _)| *k).collect();
    Err(CliError::Config(format!(
        "unknown preset {name:?}; available: {}",
        known.join(", ")
    )))
}

/// Preset keys underneath, inline keys on top. Only top-level keys merge;
/// values replace wholesale.
fn merge_params(preset: Option<Value>, inline: &Value) -> Result<Value, CliError> {
    let mut merged = match preset {
        Some(Value::Object(o)) => Value::Object(o),
        Some(other) => {
            return Err(CliError::Config(format!(
                "preset body must be a JSON object, got {other}"
            )))
        }
        None => Value::Object(Default::default()),
    };
    match inline {
        Value::Null => {}
        Value::Object(overrides) => {
            let slot = merged.as_object_mut().expect("merged starts as an object");
            for (k, v) in overrides {
                slot.insert(k.clone(), v.clone());
            }
        }
        other => {
            return Err(CliError::Config(format!(
                "params must be a JSON object, got {other}"
            )))
        }
    }
    Ok(merged)
}

fn typed<T: serde::de::DeserializeOwned>(kind: ExperimentKind, v: Value) -> Result<T, CliError> {
    serde_json::from_value(v)
        .map_err(|e| CliError::Config(format!("bad parameters for kind {}: {e}", kind.name())))
}

/// Positivity and range checks shared by every entry point, so that a bad
/// value is rejected before any solver starts.
fn validate(params: &TypedParams) -> Result<(), CliError> {
    let positive = |v: f64, what: &str| -> Result<(), CliError> {
        if !(v > 0.0) || !v.is_finite() {
            return Err(CliError::Config(format!("{what} must be positive, got {v}")));
        }
        Ok(())
    };
    match params {
        TypedParams::EetDynamics(p) | TypedParams::Sweep(p, _) => {
            if p.h_diag_khz.len() != 4 {
                return Err(CliError::Config(format!(
                    "the dynamics study drives a four-level register; got {} site energies",
                    p.h_diag_khz.len()
                )));
            }
            if !(1..=4).contains(&p.initial_site) {
                return Err(CliError::Config(format!(
                    "initial_site must be 1..=4, got {}",
                    p.initial_site
                )));
            }
            positive(p.lambda_khz, "lambda_khz")?;
            positive(p.gamma_khz, "gamma_khz")?;
            positive(p.temperature_eet_k, "temperature_eet_k")?;
            positive(p.omega0_khz, "omega0_khz")?;
            positive(p.dt_ms, "dt_ms")?;
            positive(p.t_max_ms, "t_max_ms")?;
            positive(p.readout_step_ms, "readout_step_ms")?;
            positive(p.compare_tolerance, "compare_tolerance")?;
            positive(p.depth_tol, "depth_tol")?;
            if !(p.noise_alpha >= 0.0) || !p.noise_alpha.is_finite() {
                return Err(CliError::Config(format!(
                    "noise_alpha must be nonnegative, got {}",
                    p.noise_alpha
                )));
            }
            if p.n_lines == 0 {
                return Err(CliError::Config("n_lines must be at least 1".into()));
            }
            if p.m == 0 {
                return Err(CliError::Config("m must be at least 1".into()));
            }
            if let TypedParams::Sweep(_, ms) = params {
                if ms.is_empty() {
                    return Err(CliError::Config("m_list must be nonempty".into()));
                }
                if ms.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(CliError::Config(format!("m_list must increase, got {ms:?}")));
                }
                if ms.iter().any(|&m| m == 0) {
                    return Err(CliError::Config("m_list entries must be at least 1".into()));
                }
            }
        }
        TypedParams::Ramsey(p) => {
            positive(p.omega_l_khz, "omega_l_khz")?;
            positive(p.lambda_khz, "lambda_khz")?;
            positive(p.gamma_khz, "gamma_khz")?;
            positive(p.temperature_eet_k, "temperature_eet_k")?;
            positive(p.omega0_khz, "omega0_khz")?;
            positive(p.dt_ms, "dt_ms")?;
            positive(p.t_max_ms, "t_max_ms")?;
            positive(p.readout_step_ms, "readout_step_ms")?;
            if !(p.noise_alpha >= 0.0) || !p.noise_alpha.is_finite() {
                return Err(CliError::Config(format!(
                    "noise_alpha must be nonnegative, got {}",
                    p.noise_alpha
                )));
            }
            if p.n_lines == 0 || p.m == 0 {
                return Err(CliError::Config("n_lines and m must be at least 1".into()));
            }
        }
        TypedParams::Grape(p) => {
            positive(p.total_time_ms, "total_time_ms")?;
            positive(p.step0, "step0")?;
            if p.segments == 0 {
                return Err(CliError::Config("segments must be at least 1".into()));
            }
            if !(p.target_fidelity > 0.0 && p.target_fidelity <= 1.0) {
                return Err(CliError::Config(format!(
                    "target_fidelity must lie in (0, 1], got {}",
                    p.target_fidelity
                )));
            }
        }
        TypedParams::Cost(p) => {
            if p.sites == 0 || p.k == 0 {
                return Err(CliError::Config("sites and k must be at least 1".into()));
            }
        }
    }
    Ok(())
}

/// Reads, merges, types, and validates a config file.
///
/// `out_dir_flag` (from `--out-dir`) wins over the config's `out_dir`,
/// which wins over `EETSIM_OUT_DIR`, which wins over the current
/// directory. `m_list_flag` is `Some` when called from the `sweep` verb:
/// it replaces the config's `m_list`, and an `eet_dynamics` config is
/// reinterpreted as an `ensemble_sweep` so the same preset drives both.
pub fn load(
    path: &Path,
    out_dir_flag: Option<&Path>,
    m_list_flag: Option<&[usize]>,
) -> Result<LoadedConfig, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let sha256 = hex(&Sha256::digest(&bytes));
    let echo: Value = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Config(format!("{} is not valid JSON: {e}", path.display())))?;
    let mut raw: RawConfig = serde_json::from_value(echo.clone())
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if m_list_flag.is_some() && raw.kind == ExperimentKind::EetDynamics {
        raw.kind = ExperimentKind::EnsembleSweep;
    }

    let preset = match &raw.preset {
        Some(name) => Some(preset_body(name)?),
        None => None,
    };
    let mut merged = merge_params(preset, &raw.params)?;

    // m_list is a sweep-only key living beside the dynamics parameters;
    // pull it out before typing the rest.
    let m_list = match merged.as_object_mut().expect("merge yields an object").remove("m_list") {
        Some(v) => serde_json::from_value::<Vec<usize>>(v)
            .map_err(|e| CliError::Config(format!("bad m_list: {e}")))?,
        None => d_m_list(),
    };
    let m_list = match m_list_flag {
        Some(ms) if !ms.is_empty() => ms.to_vec(),
        _ => m_list,
    };
    if raw.kind != ExperimentKind::EnsembleSweep {
        // Any other kind must not silently discard the key.
        if echo.get("params").and_then(|p| p.get("m_list")).is_some() {
            return Err(CliError::Config(format!(
                "m_list only applies to ensemble_sweep, not {}",
                raw.kind.name()
            )));
        }
    }

    let params = match raw.kind {
        ExperimentKind::EetDynamics => TypedParams::EetDynamics(typed(raw.kind, merged)?),
        ExperimentKind::Ramsey => TypedParams::Ramsey(typed(raw.kind, merged)?),
        ExperimentKind::GrapeDesign => TypedParams::Grape(typed(raw.kind, merged)?),
        ExperimentKind::EnsembleSweep => TypedParams::Sweep(typed(raw.kind, merged)?, m_list),
        ExperimentKind::CostTable => TypedParams::Cost(typed(raw.kind, merged)?),
    };
    validate(&params)?;

    let out_dir = out_dir_flag
        .map(Path::to_path_buf)
        .or_else(|| raw.out_dir.clone())
        .or_else(|| std::env::var_os("EETSIM_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir).map_err(|e| {
        CliError::Config(format!("cannot create output dir {}: {e}", out_dir.display()))
    })?;
    let probe = out_dir.join(".eetsim-writable");
    fs::write(&probe, b"")
        .and_then(|()| fs::remove_file(&probe))
        .map_err(|e| {
            CliError::Config(format!("output dir {} is not writable: {e}", out_dir.display()))
        })?;

    Ok(LoadedConfig {
        kind: raw.kind,
        preset: raw.preset,
        params,
        master_seed: raw.master_seed,
        out_dir,
        echo,
        sha256,
    })
}

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}
