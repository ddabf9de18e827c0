use mlt_core::experiments::mlt_vs_qsd;
use mlt_core::qsd::QsdConfig;
use mlt_core::{EquationVariant, Model, SineGordonParams};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{chain, require_positive_j, stamp, Command, Report, J_UNITS};
use crate::error::CliResult;
use crate::output::{num, RunOutput, Table};

/// Sine-Gordon chain from the vacuum: most-likely trajectory next to a QSD
/// ensemble, with MLT/ensemble ratios of the diagonal correlations.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgDynamics {
    pub n_sites: usize,
    pub omega: f64,
    pub big_omega: Option<f64>,
    pub j_coupling: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub n_trajectories: usize,
    pub seed: u64,
    pub dt: f64,
    pub t_max: f64,
    pub stride: usize,
    pub window: [f64; 2],
    pub zero_noise: bool,
    pub variant: EquationVariant,
}

impl Default for SgDynamics {
    fn default() -> Self {
        Self {
            n_sites: 7,
            omega: 0.5,
            big_omega: None,
            j_coupling: 1.0,
            alpha: 2.1,
            gamma: 1.0,
            n_trajectories: 1000,
            seed: 0,
            dt: 0.01,
            t_max: 100.0,
            stride: 100,
            window: [40.0, 100.0],
            zero_noise: false,
            variant: EquationVariant::default(),
        }
    }
}

impl Command for SgDynamics {
    const NAME: &'static str = "sg-dynamics";
    const SEEDED: bool = true;

    fn execute(&self, out: &mut RunOutput) -> CliResult<Report> {
        require_positive_j(self.j_coupling)?;
        let j = self.j_coupling;
        stamp(out, J_UNITS, self.omega * j, self.big_omega.map(|w| w * j), self.variant);
        out.meta("seed", self.seed);
        let chain = chain(self.n_sites, self.omega * j, self.big_omega.map(|w| w * j))?;
        let model = Model::SineGordon(SineGordonParams::new(j, self.alpha)?);
        let mut cfg = QsdConfig::new(self.gamma * j, model, chain.omega, self.t_max, self.n_trajectories, self.seed);
        cfg.dt = self.dt;
        cfg.stride = self.stride;
        cfg.variant = self.variant;
        cfg.zero_noise = self.zero_noise;
        cfg.window = Some((self.window[0], self.window[1]));
        let cmp = mlt_vs_qsd(&chain, &cfg)?;

        let mut t = Table::new(
            "mlt.sg-dynamics.v1",
            &[
                "t", "site", "mlt_xx", "ens_xx", "ens_xx_stderr", "ratio_xx", "mlt_pp", "ens_pp", "ens_pp_stderr", "ratio_pp", "mlt_xp", "ens_xp",
                "ens_xp_stderr", "ratio_xp",
            ],
        );
        let e = &cmp.ensemble;
        for (k, time) in cmp.times.iter().enumerate() {
            for i in 0..self.n_sites {
                let mut row = vec![num(*time), i.to_string()];
                for (mlt, ens) in [(&cmp.mlt_xx, &e.diag_xx), (&cmp.mlt_pp, &e.diag_pp), (&cmp.mlt_xp, &e.diag_xp)] {
                    let (m, s) = (mlt[k][i], ens[k][i]);
                    let ratio = if s.mean == 0.0 { String::new() } else { num(m / s.mean) };
                    row.extend([num(m), num(s.mean), num(s.stderr), ratio]);
                }
                t.push(row);
            }
        }
        out.csv("sg_dynamics.csv", &t)?;
        let ratios: Vec<_> = ["xx", "pp", "xp"]
            .iter()
            .zip(&cmp.window_ratios)
            .map(|(name, w)| json!({ "quantity": name, "window": self.window, "ratio": w, "z_score": w.z_score() }))
            .collect();
        out.json("sg_window.json", &ratios)?;
        Ok(Report::ok(json!({ "window_ratios": ratios })))
    }
}
