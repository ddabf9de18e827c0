use std::path::PathBuf;

use mlt_core::{ChainParams, EquationVariant};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{resolve, to_toml};
use crate::error::{CliError, CliResult};
use crate::output::RunOutput;

pub mod critical_line;
pub mod free_bench;
pub mod negativity_scaling;
pub mod oracle;
pub mod phase_diagram;
pub mod qsd_compare;
pub mod sg_dynamics;
pub mod sg_steady;

/// Area-law / log-law cut on the fitted negativity coefficient `c`.
pub const C_THRESH: f64 = mlt_core::entanglement::AREA_LAW_THRESHOLD;

pub struct Report {
    pub summary: Value,
    /// Set when an oracle check fails; files are still written.
    pub oracle_failure: Option<String>,
}

impl Report {
    pub fn ok(summary: Value) -> Self {
        Self { summary, oracle_failure: None }
    }
}

pub trait Command: Serialize + DeserializeOwned + Default {
    const NAME: &'static str;
    const SEEDED: bool = false;
    fn execute(&self, out: &mut RunOutput) -> CliResult<Report>;
}

pub struct CommonArgs {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub overrides: Vec<String>,
}

pub fn run<C: Command>(args: &CommonArgs) -> CliResult<PathBuf> {
    let mut overrides = args.overrides.clone();
    match (args.seed, C::SEEDED) {
        (Some(seed), true) => overrides.push(format!("seed={seed}")),
        (Some(_), false) => log::warn!("{} draws no random numbers; --seed is ignored", C::NAME),
        _ => {}
    }
    let params: C = resolve(args.config.as_deref(), &overrides)?;
    let dir = args.out.clone().unwrap_or_else(|| PathBuf::from("out").join(C::NAME));
    let mut out = RunOutput::new(&dir, C::NAME)?;
    out.text("config.toml", &to_toml(&params)?)?;
    log::info!("{} -> {}", C::NAME, dir.display());
    let report = params.execute(&mut out)?;
    let params_json = serde_json::to_value(&params).map_err(|e| CliError::Config(e.to_string()))?;
    let seed = if C::SEEDED { params_json.get("seed").cloned().unwrap_or(Value::Null) } else { Value::Null };
    let manifest = out.finish(
        &params_json,
        json!({
            "seed": seed,
            "threads": args.threads.unwrap_or_else(rayon::current_num_threads),
            "result": report.summary,
        }),
    )?;
    match report.oracle_failure {
        Some(msg) => Err(CliError::Oracle(msg)),
        None => Ok(manifest),
    }
}

/// Chain with `Ω` defaulting to `ω`.
pub fn chain(n_sites: usize, omega: f64, big_omega: Option<f64>) -> CliResult<ChainParams> {
    Ok(ChainParams::with_regulator(n_sites, omega, big_omega.unwrap_or(omega))?)
}

/// Stamps units, regulator and equation variants on every output file.
pub fn stamp(out: &mut RunOutput, units: &str, omega: f64, big_omega: Option<f64>, variant: EquationVariant) {
    out.meta("units", units);
    out.meta("big_omega", big_omega.unwrap_or(omega));
    out.meta("regulator", "r_sq = big_omega / (n_sites * omega)");
    out.meta("momentum_drift", tag(&variant.momentum_drift));
    out.meta("pp_bracket", tag(&variant.pp_bracket));
    out.meta("c_thresh", C_THRESH);
}

pub fn tag<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

pub const J_UNITS: &str = "energies and rates in units of J (omega, gamma, big_omega given as ratios to J); times in units of 1/J";
pub const OMEGA_UNITS: &str = "energies and rates as given (free model, no J); times in the same inverse units";

pub fn require_positive_j(j: f64) -> CliResult<()> {
    if j > 0.0 && j.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("j_coupling must be positive (it sets the energy unit), got {j}")))
    }
}
