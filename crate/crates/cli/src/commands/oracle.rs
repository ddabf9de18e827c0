use mlt_core::fock::{
    build_operators, gaussian_reference, kraus_apply, max_deviation, oracle_run, select_bracket_variant, DensityMatrix, FockSpec, OracleHamiltonian,
};
use mlt_core::{EquationVariant, Error};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{stamp, tag, Command, Report, OMEGA_UNITS};
use crate::error::{CliError, CliResult};
use crate::output::{num, RunOutput, Table};

/// Truncated-Fock validation of the Gaussian moment equations on one site.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Oracle {
    pub n_max: usize,
    pub dt: f64,
    pub omega: f64,
    pub r_sq: f64,
    pub gamma: f64,
    pub mean_x: f64,
    pub mean_p: f64,
    pub t_max: f64,
    pub stride: usize,
    pub tolerance: f64,
    /// Second truncation for the convergence sweep.
    pub n_max_ref: usize,
    pub truncation_t_max: f64,
    pub truncation_tolerance: f64,
    pub bracket_t_max: f64,
    pub kraus_dt: f64,
    pub kraus_grid: usize,
}

impl Default for Oracle {
    fn default() -> Self {
        Self {
            n_max: 40,
            dt: 2e-4,
            omega: 1.0,
            r_sq: 1.0,
            gamma: 0.5,
            mean_x: 0.3,
            mean_p: -0.2,
            t_max: 5.0,
            stride: 250,
            tolerance: 1e-6,
            n_max_ref: 60,
            truncation_t_max: 2.0,
            truncation_tolerance: 1e-8,
            bracket_t_max: 3.0,
            kraus_dt: 0.01,
            kraus_grid: 2000,
        }
    }
}

struct Check {
    name: &'static str,
    value: f64,
    limit: f64,
    pass: bool,
    note: String,
}

impl Check {
    fn json(&self) -> Value {
        json!({ "name": self.name, "value": self.value, "limit": self.limit, "pass": self.pass, "note": self.note })
    }
}

/// Truncation and trace breaches are oracle failures, not numerical ones.
fn breach<T>(name: &'static str, r: Result<T, Error>) -> CliResult<Result<T, Check>> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(e @ (Error::TruncationLeak { .. } | Error::TraceDrift { .. })) => {
            Ok(Err(Check { name, value: f64::NAN, limit: 0.0, pass: false, note: e.to_string() }))
        }
        Err(e) => Err(e.into()),
    }
}

impl Command for Oracle {
    const NAME: &'static str = "oracle";

    fn execute(&self, out: &mut RunOutput) -> CliResult<Report> {
        if self.stride == 0 || self.kraus_grid < 2 {
            return Err(CliError::Config("stride must be positive and kraus_grid at least 2".into()));
        }
        stamp(out, OMEGA_UNITS, self.omega, None, EquationVariant::default());
        out.meta("r_sq", self.r_sq);
        let h = OracleHamiltonian::Quadratic { omega: self.omega, stiffness: mlt_core::nalgebra::DMatrix::from_element(1, 1, self.r_sq) };
        let spec = FockSpec::new(self.n_max, 1, self.dt)?;
        let mut checks = Vec::new();

        match breach("quadratic", oracle_run(&spec, &h, self.gamma, &[self.mean_x], &[self.mean_p], self.t_max, self.stride))? {
            Ok(series) => {
                let g = h.gaussian_generator(self.gamma, EquationVariant::default());
                let reference = gaussian_reference(&series.moments[0], &g, self.dt, &series.times);
                let dev = max_deviation(&series.moments, &reference);
                let mut t = Table::new(
                    "mlt.oracle-moments.v1",
                    &[
                        "t", "oracle_x", "gauss_x", "oracle_p", "gauss_p", "oracle_xx", "gauss_xx", "oracle_pp", "gauss_pp", "oracle_xp", "gauss_xp",
                    ],
                );
                for ((time, o), r) in series.times.iter().zip(&series.moments).zip(&reference) {
                    t.push(vec![
                        num(*time),
                        num(o.mean_x[0]),
                        num(r.mean_x[0]),
                        num(o.mean_p[0]),
                        num(r.mean_p[0]),
                        num(o.s_xx[(0, 0)]),
                        num(r.s_xx[(0, 0)]),
                        num(o.s_pp[(0, 0)]),
                        num(r.s_pp[(0, 0)]),
                        num(o.s_xp[(0, 0)]),
                        num(r.s_xp[(0, 0)]),
                    ]);
                }
                out.csv("oracle_moments.csv", &t)?;
                checks.push(Check {
                    name: "quadratic",
                    value: dev,
                    limit: self.tolerance,
                    pass: dev < self.tolerance,
                    note: format!("max leak {:e}", series.max_leak),
                });
            }
            Err(c) => checks.push(c),
        }

        let sweep = |n_max: usize| -> CliResult<Result<_, Check>> {
            let spec = FockSpec::new(n_max, 1, self.dt)?;
            breach("truncation", oracle_run(&spec, &h, self.gamma, &[self.mean_x], &[self.mean_p], self.truncation_t_max, self.stride))
        };
        match (sweep(self.n_max)?, sweep(self.n_max_ref)?) {
            (Ok(a), Ok(b)) => {
                let dev = max_deviation(&a.moments, &b.moments);
                checks.push(Check {
                    name: "truncation",
                    value: dev,
                    limit: self.truncation_tolerance,
                    pass: dev < self.truncation_tolerance,
                    note: format!("n_max {} vs {}", self.n_max, self.n_max_ref),
                });
            }
            (Err(c), _) | (_, Err(c)) => checks.push(c),
        }

        match breach("pp-bracket", select_bracket_variant(&spec, &h, self.gamma, &[self.mean_x], &[0.0], self.bracket_t_max))? {
            Ok(r) => {
                let best = r.hamiltonian_deviation.min(r.printed_deviation);
                checks.push(Check {
                    name: "pp-bracket",
                    value: best,
                    limit: self.tolerance,
                    pass: best < self.tolerance,
                    note: format!(
                        "selected {}; hamiltonian {:e}, printed-free {:e}",
                        tag(&r.winner),
                        r.hamiltonian_deviation,
                        r.printed_deviation
                    ),
                });
            }
            Err(c) => checks.push(c),
        }

        let ops = build_operators(&spec, None);
        let rho = DensityMatrix::coherent(&spec, &[self.mean_x], &[self.mean_p]);
        let p_mean = rho.moments(&ops).mean_p[0];
        let width = 1.0 / (4.0 * self.gamma * self.kraus_dt).sqrt();
        let step = 8.0 * width / self.kraus_grid as f64;
        let argmax = (0..=self.kraus_grid)
            .map(|k| p_mean - 4.0 * width + k as f64 * step)
            .map(|r| (r, kraus_apply(&rho, r, &ops[0].p, self.gamma, self.kraus_dt).1))
            .fold((f64::NAN, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
            .0;
        let miss = (argmax - p_mean).abs();
        checks.push(Check { name: "kraus-argmax", value: miss, limit: step, pass: miss <= step, note: format!("argmax {argmax}, <p> {p_mean}") });

        let report: Vec<Value> = checks.iter().map(Check::json).collect();
        out.json("oracle_report.json", &report)?;
        for c in &checks {
            log::info!("oracle {}: {} ({:e} vs {:e}) {}", c.name, if c.pass { "pass" } else { "FAIL" }, c.value, c.limit, c.note);
        }
        let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
        Ok(Report {
            summary: json!({ "checks": report }),
            oracle_failure: (!failed.is_empty()).then(|| format!("failed checks: {}", failed.join(", "))),
        })
    }
}
