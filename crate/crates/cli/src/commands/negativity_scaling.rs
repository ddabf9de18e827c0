use mlt_core::experiments::{sg_negativity_scan, DEFAULT_SIZES};
use mlt_core::{EquationVariant, SineGordonParams};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{require_positive_j, stamp, Command, Report, C_THRESH, J_UNITS};
use crate::error::CliResult;
use crate::output::{num, RunOutput, Table};

/// Half-chain negativity of the analytic Sine-Gordon steady state against
/// `ln N`, one fit per `γ/J`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NegativityScaling {
    pub omega: f64,
    pub big_omega: Option<f64>,
    pub j_coupling: f64,
    pub alpha: f64,
    pub gammas: Vec<f64>,
    pub sizes: Vec<usize>,
}

impl Default for NegativityScaling {
    fn default() -> Self {
        Self { omega: 0.5, big_omega: None, j_coupling: 1.0, alpha: 2.1, gammas: vec![1.0, 4.0], sizes: DEFAULT_SIZES.to_vec() }
    }
}

impl Command for NegativityScaling {
    const NAME: &'static str = "negativity-scaling";

    fn execute(&self, out: &mut RunOutput) -> CliResult<Report> {
        require_positive_j(self.j_coupling)?;
        let j = self.j_coupling;
        stamp(out, J_UNITS, self.omega * j, self.big_omega.map(|w| w * j), EquationVariant::default());
        let sg = SineGordonParams::new(j, self.alpha)?;
        let mut t = Table::new("mlt.negativity.v1", &["gamma", "n_sites", "log_neg"]);
        let mut fits = Vec::new();
        for &g in &self.gammas {
            let fit = sg_negativity_scan(self.omega * j, self.big_omega.map(|w| w * j), &sg, g * j, &self.sizes)?;
            for (n, v) in fit.sizes.iter().zip(&fit.values) {
                t.push(vec![num(g), n.to_string(), num(*v)]);
            }
            fits.push(json!({
                "gamma": g,
                "c": fit.c,
                "intercept": fit.intercept,
                "r_squared": fit.r_squared,
                "area_law": fit.c < C_THRESH,
            }));
        }
        out.csv("negativity.csv", &t)?;
        out.json("negativity_fit.json", &fits)?;
        Ok(Report::ok(json!({ "fits": fits })))
    }
}
