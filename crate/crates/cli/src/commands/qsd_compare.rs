use mlt_core::experiments::cosine_decay;
use mlt_core::qsd::QsdConfig;
use mlt_core::{EquationVariant, Model};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{chain, stamp, Command, Report, OMEGA_UNITS};
use crate::error::{CliError, CliResult};
use crate::output::{num, RunOutput, Table};

/// Free chain: trajectory average of `cos(α(⟨x_i⟩ − ⟨x_j⟩))` against its
/// value along the most-likely trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QsdCompare {
    pub n_sites: usize,
    pub omega: f64,
    pub big_omega: Option<f64>,
    pub gamma: f64,
    pub alpha: f64,
    pub sites: [usize; 2],
    pub n_trajectories: usize,
    pub seed: u64,
    pub dt: f64,
    pub t_max: f64,
    pub stride: usize,
    /// Fraction of the snapshots, counted from the end, averaged for the
    /// steady value.
    pub late_fraction: f64,
}

impl Default for QsdCompare {
    fn default() -> Self {
        Self {
            n_sites: 32,
            omega: 1.0,
            big_omega: None,
            gamma: 1.0,
            alpha: 2.1,
            sites: [0, 16],
            n_trajectories: 150,
            seed: 0,
            dt: 0.01,
            t_max: 100.0,
            stride: 100,
            late_fraction: 0.2,
        }
    }
}

impl Command for QsdCompare {
    const NAME: &'static str = "qsd-compare";
    const SEEDED: bool = true;

    fn execute(&self, out: &mut RunOutput) -> CliResult<Report> {
        if !(self.late_fraction > 0.0 && self.late_fraction <= 1.0) {
            return Err(CliError::Config(format!("late_fraction must lie in (0, 1], got {}", self.late_fraction)));
        }
        stamp(out, OMEGA_UNITS, self.omega, self.big_omega, EquationVariant::default());
        out.meta("seed", self.seed);
        let chain = chain(self.n_sites, self.omega, self.big_omega)?;
        let mut cfg = QsdConfig::new(self.gamma, Model::Free, self.omega, self.t_max, self.n_trajectories, self.seed);
        cfg.dt = self.dt;
        cfg.stride = self.stride;
        let d = cosine_decay(&chain, &cfg, self.alpha, self.sites[0], self.sites[1], self.late_fraction)?;
        let mut t = Table::new("mlt.cosine-decay.v1", &["t", "ensemble", "mlt"]);
        for ((time, e), m) in d.times.iter().zip(&d.ensemble).zip(&d.mlt) {
            t.push(vec![num(*time), num(*e), num(*m)]);
        }
        out.csv("cosine_decay.csv", &t)?;
        let summary = json!({
            "late_mean": d.late_mean,
            "mlt_min": d.mlt.iter().copied().fold(f64::INFINITY, f64::min),
            "mlt_max": d.mlt.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        });
        out.json("cosine_summary.json", &summary)?;
        Ok(Report::ok(summary))
    }
}
