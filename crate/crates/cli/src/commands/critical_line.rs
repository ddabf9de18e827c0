use mlt_core::perturbation::critical_line;
use mlt_core::steady::Branch;
use mlt_core::EquationVariant;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{chain, require_positive_j, stamp, tag, Command, Report, J_UNITS};
use crate::error::CliResult;
use crate::output::{num, RunOutput, Table};

/// Perturbative against self-consistent critical `α` as a function of `γ/J`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriticalLine {
    pub n_sites: usize,
    pub omega: f64,
    pub big_omega: Option<f64>,
    pub j_coupling: f64,
    pub gammas: Vec<f64>,
    pub branch: Branch,
}

impl Default for CriticalLine {
    fn default() -> Self {
        Self {
            n_sites: 500,
            omega: 0.5,
            big_omega: None,
            j_coupling: 1.0,
            gammas: (0..=10).map(|k| 1.0 + 0.5 * k as f64).collect(),
            branch: Branch::Discrete,
        }
    }
}

impl Command for CriticalLine {
    const NAME: &'static str = "critical-line";

    fn execute(&self, out: &mut RunOutput) -> CliResult<Report> {
        require_positive_j(self.j_coupling)?;
        let j = self.j_coupling;
        stamp(out, J_UNITS, self.omega * j, self.big_omega.map(|w| w * j), EquationVariant::default());
        out.meta("branch", tag(&self.branch));
        let chain = chain(self.n_sites, self.omega * j, self.big_omega.map(|w| w * j))?;
        let line = critical_line(&chain, j, &self.gammas, self.branch)?;
        let mut t = Table::new("mlt.critical-line.v1", &["gamma", "alpha_pt", "alpha_sctdha", "ratio"]);
        for p in &line {
            t.push(vec![num(p.gamma_over_j), num(p.alpha_pt), num(p.alpha_sctdha), num(p.ratio)]);
        }
        out.csv("critical_line.csv", &t)?;
        let ratios = line.iter().map(|p| p.ratio);
        let summary = json!({
            "ratio_min": ratios.clone().fold(f64::INFINITY, f64::min),
            "ratio_max": ratios.fold(f64::NEG_INFINITY, f64::max),
            "pt_decreasing": line.windows(2).all(|w| w[1].alpha_pt < w[0].alpha_pt),
            "sctdha_decreasing": line.windows(2).all(|w| w[1].alpha_sctdha < w[0].alpha_sctdha),
        });
        Ok(Report::ok(summary))
    }
}
