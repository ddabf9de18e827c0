use mlt_core::experiments::{phase_diagram, DEFAULT_SIZES};
use mlt_core::EquationVariant;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{require_positive_j, stamp, Command, Report, C_THRESH, J_UNITS};
use crate::error::CliResult;
use crate::output::{num, opt_num, RunOutput, Table};

/// `(γ/J, α)` scan of the steady mass and the negativity coefficient `c`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseDiagram {
    pub omega: f64,
    pub big_omega: Option<f64>,
    pub j_coupling: f64,
    pub gammas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub sizes: Vec<usize>,
    /// Chain length at which `h_eff` is reported.
    pub n_ref: usize,
}

impl Default for PhaseDiagram {
    fn default() -> Self {
        Self {
            omega: 0.5,
            big_omega: None,
            j_coupling: 1.0,
            gammas: vec![0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0, 6.0],
            alphas: vec![0.5, 1.0, 1.5, 2.0, 2.1, 2.5, 3.0, 3.5, 4.0, 5.0, 6.0],
            sizes: DEFAULT_SIZES.to_vec(),
            n_ref: 500,
        }
    }
}

impl Command for PhaseDiagram {
    const NAME: &'static str = "phase-diagram";

    fn execute(&self, out: &mut RunOutput) -> CliResult<Report> {
        require_positive_j(self.j_coupling)?;
        let j = self.j_coupling;
        stamp(out, J_UNITS, self.omega * j, self.big_omega.map(|w| w * j), EquationVariant::default());
        out.meta("n_ref", self.n_ref);
        let cells = phase_diagram(self.omega * j, j, self.big_omega.map(|w| w * j), &self.gammas, &self.alphas, &self.sizes, self.n_ref);
        let mut t = Table::new(
            "mlt.phase-diagram.v1",
            &["gamma", "alpha", "h_eff", "massless", "c", "r_squared", "area_law", "error"],
        );
        for c in &cells {
            t.push(vec![
                num(c.gamma_over_j),
                num(c.alpha),
                opt_num(c.h_eff),
                c.massless.map(|m| m.to_string()).unwrap_or_default(),
                opt_num(c.c),
                opt_num(c.r_squared),
                c.c.map(|v| (v < C_THRESH).to_string()).unwrap_or_default(),
                c.error.clone().unwrap_or_default(),
            ]);
        }
        out.csv("phase_diagram.csv", &t)?;

        // Smallest scanned α that is massless for each γ/J.
        let boundary: Vec<_> = self
            .gammas
            .iter()
            .map(|&g| {
                let alpha_c = cells
                    .iter()
                    .filter(|c| c.gamma_over_j == g && c.massless == Some(true))
                    .map(|c| c.alpha)
                    .fold(None, |acc: Option<f64>, a| Some(acc.map_or(a, |b| b.min(a))));
                json!({ "gamma": g, "smallest_massless_alpha": alpha_c })
            })
            .collect();
        let failed = cells.iter().filter(|c| c.error.is_some()).count();
        let summary = json!({ "cells": cells.len(), "failed_cells": failed, "boundary": boundary });
        out.json("phase_summary.json", &summary)?;
        Ok(Report::ok(summary))
    }
}
