use mlt_core::experiments::{free_bench, ModeRunConfig, DEFAULT_SIZES};
use mlt_core::EquationVariant;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{stamp, Command, Report, C_THRESH, OMEGA_UNITS};
use crate::error::CliResult;
use crate::output::{num, opt_num, RunOutput, Table};

/// Free chain: steady-state half-chain negativity over a size grid, the
/// `c` fit, and the `σ_pp` decay profile of the largest chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreeBench {
    pub omega: f64,
    pub big_omega: Option<f64>,
    pub gammas: Vec<f64>,
    pub sizes: Vec<usize>,
    /// Step is `dt_scale / max(ω, γ)`.
    pub dt_scale: f64,
    pub t_max: f64,
    pub steady_tol: f64,
}

impl Default for FreeBench {
    fn default() -> Self {
        let run = ModeRunConfig::default();
        Self {
            omega: 1.0,
            big_omega: None,
            gammas: vec![0.25, 1.0, 4.0],
            sizes: DEFAULT_SIZES.to_vec(),
            dt_scale: run.dt_scale,
            t_max: run.t_max,
            steady_tol: run.steady_tol,
        }
    }
}

impl Command for FreeBench {
    const NAME: &'static str = "free-bench";

    fn execute(&self, out: &mut RunOutput) -> CliResult<Report> {
        stamp(out, OMEGA_UNITS, self.omega, self.big_omega, EquationVariant::default());
        let run = ModeRunConfig { dt_scale: self.dt_scale, t_max: self.t_max, steady_tol: self.steady_tol };
        let rows = free_bench(self.omega, self.big_omega, &self.gammas, &self.sizes, &run)?;

        let mut neg = Table::new("mlt.free-bench.v1", &["gamma", "n_sites", "log_neg", "steady_time"]);
        let mut prof = Table::new("mlt.free-profile.v1", &["gamma", "n_sites", "d", "sigma_pp"]);
        let mut fits = Vec::new();
        for r in &rows {
            for ((n, v), t) in r.scaling.sizes.iter().zip(&r.scaling.values).zip(&r.steady_times) {
                neg.push(vec![num(r.gamma), n.to_string(), num(*v), opt_num(*t)]);
            }
            let n = *r.scaling.sizes.iter().max().unwrap_or(&0);
            for (d, v) in r.profile.iter().enumerate() {
                prof.push(vec![num(r.gamma), n.to_string(), d.to_string(), num(*v)]);
            }
            fits.push(json!({
                "gamma": r.gamma,
                "c": r.scaling.c,
                "intercept": r.scaling.intercept,
                "r_squared": r.scaling.r_squared,
                "area_law": r.scaling.c < C_THRESH,
                "decay": r.decay,
                "all_steady": r.steady_times.iter().all(Option::is_some),
            }));
        }
        out.csv("free_bench.csv", &neg)?;
        out.csv("free_profile.csv", &prof)?;
        out.json("free_fit.json", &fits)?;
        Ok(Report::ok(json!({ "fits": fits })))
    }
}
