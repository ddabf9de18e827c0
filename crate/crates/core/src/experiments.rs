//! Figure-level experiment drivers shared by the command line tool, the
//! benches and the acceptance suite.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate_modes, integrate_with, Generator, MltConfig, ModeState, ModeTrajectory, Model};
use crate::entanglement::{fit_log_scaling, half_chain, log_negativity, ScalingFit};
use crate::error::{Error, Result};
use crate::gaussian::GaussianState;
use crate::lattice::ChainParams;
use crate::perturbation::ensemble_cosine_average;
use crate::qsd::{run_ensemble, CosineProbe, EnsembleStats, QsdConfig};
use crate::sctdha::SineGordonParams;
use crate::steady::{classify_decay, solve_self_consistent, Branch, DecayFit, MASSLESS_THRESHOLD};

pub const DEFAULT_SIZES: [usize; 4] = [32, 64, 128, 256];

fn chain_for(n: usize, omega: f64, big_omega: Option<f64>) -> Result<ChainParams> {
    ChainParams::with_regulator(n, omega, big_omega.unwrap_or(omega))
}

/// Momentum-space integration settings for translation-invariant runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeRunConfig {
    /// `dt = dt_scale / max(ω, γ, J)`.
    pub dt_scale: f64,
    pub t_max: f64,
    pub steady_tol: f64,
}

impl Default for ModeRunConfig {
    fn default() -> Self {
        Self { dt_scale: 0.02, t_max: 20_000.0, steady_tol: 1e-9 }
    }
}

/// Integrates the vacuum to steady state mode by mode.
pub fn steady_modes(chain: &ChainParams, gamma: f64, model: Model, run: &ModeRunConfig) -> Result<ModeTrajectory> {
    let mut cfg = MltConfig::new(gamma, model, chain.omega, run.t_max);
    cfg.dt = run.dt_scale / chain.omega.max(gamma).max(model.j_coupling());
    cfg.steady_tol = run.steady_tol;
    let traj = integrate_modes(ModeState::vacuum(chain.n_sites), &cfg, chain)?;
    if traj.steady_time.is_none() {
        log::warn!("N = {} γ = {gamma}: no steady state by t = {}", chain.n_sites, run.t_max);
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeBenchRow {
    pub gamma: f64,
    pub scaling: ScalingFit,
    pub steady_times: Vec<Option<f64>>,
    /// `σ_pp(d)` of the largest size, `d = 0..=N/2`.
    pub profile: Vec<f64>,
    pub decay: DecayFit,
}

/// Free chain: steady state by integration for every size, half-chain
/// negativity, size-scaling fit and the momentum-correlation decay.
pub fn free_bench(omega: f64, big_omega: Option<f64>, gammas: &[f64], sizes: &[usize], run: &ModeRunConfig) -> Result<Vec<FreeBenchRow>> {
    gammas
        .par_iter()
        .map(|&gamma| {
            let states: Vec<(GaussianState, Option<f64>)> = sizes
                .par_iter()
                .map(|&n| {
                    let chain = chain_for(n, omega, big_omega)?;
                    let t = steady_modes(&chain, gamma, Model::Free, run)?;
                    Ok((t.final_state.to_gaussian(), t.steady_time))
                })
                .collect::<Result<_>>()?;
            let values = states
                .par_iter()
                .map(|(s, _)| Ok(log_negativity(s, &half_chain(s.n_sites()))?.log_neg))
                .collect::<Result<Vec<f64>>>()?;
            let scaling = fit_log_scaling(sizes, &values)?;
            let largest = &states.last().ok_or_else(|| Error::InsufficientData("empty size grid".into()))?.0;
            let profile = largest.momentum_correlation_profile();
            let decay = classify_decay(&profile, 5, 50.min(largest.n_sites() / 4))?;
            Ok(FreeBenchRow { gamma, scaling, steady_times: states.iter().map(|s| s.1).collect(), profile, decay })
        })
        .collect()
}

/// Half-chain negativity of the analytic Sine-Gordon steady state for each size.
pub fn sg_negativity_scan(
    omega: f64,
    big_omega: Option<f64>,
    sg: &SineGordonParams,
    gamma: f64,
    sizes: &[usize],
) -> Result<ScalingFit> {
    let values = sizes
        .par_iter()
        .map(|&n| {
            let chain = chain_for(n, omega, big_omega)?;
            let sol = solve_self_consistent(&chain, sg, gamma, Branch::Discrete)?;
            Ok(log_negativity(&sol.to_gaussian(), &half_chain(n))?.log_neg)
        })
        .collect::<Result<Vec<f64>>>()?;
    fit_log_scaling(sizes, &values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub gamma_over_j: f64,
    pub alpha: f64,
    /// Steady mass at the reference size.
    pub h_eff: Option<f64>,
    pub massless: Option<bool>,
    pub c: Option<f64>,
    pub r_squared: Option<f64>,
    pub error: Option<String>,
}

/// `(γ/J, α)` grid: steady mass at `n_ref` sites and negativity scaling
/// over `sizes`. Cells whose solve fails are marked and kept.
pub fn phase_diagram(
    omega: f64,
    j_coupling: f64,
    big_omega: Option<f64>,
    gammas_over_j: &[f64],
    alphas: &[f64],
    sizes: &[usize],
    n_ref: usize,
) -> Vec<PhaseCell> {
    let cells: Vec<(f64, f64)> = gammas_over_j.iter().flat_map(|&g| alphas.iter().map(move |&a| (g, a))).collect();
    cells
        .par_iter()
        .map(|&(g, alpha)| {
            let run = || -> Result<(f64, ScalingFit)> {
                let sg = SineGordonParams::new(j_coupling, alpha)?;
                let gamma = g * j_coupling;
                let h = solve_self_consistent(&chain_for(n_ref, omega, big_omega)?, &sg, gamma, Branch::Discrete)?.h_eff;
                Ok((h, sg_negativity_scan(omega, big_omega, &sg, gamma, sizes)?))
            };
            match run() {
                Ok((h, fit)) => PhaseCell {
                    gamma_over_j: g,
                    alpha,
                    h_eff: Some(h),
                    massless: Some(h < MASSLESS_THRESHOLD),
                    c: Some(fit.c),
                    r_squared: Some(fit.r_squared),
                    error: None,
                },
                Err(e) => PhaseCell {
                    gamma_over_j: g,
                    alpha,
                    h_eff: None,
                    massless: None,
                    c: None,
                    r_squared: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// `γ` at which the steady mass falls below the massless threshold, by
/// bisection on `ln h_eff` inside `[lo, hi]`.
pub fn massless_crossing(chain: &ChainParams, sg: &SineGordonParams, lo: f64, hi: f64) -> Result<f64> {
    let gap = |gamma: f64| -> Result<f64> {
        let h = solve_self_consistent(chain, sg, gamma, Branch::Discrete)?.h_eff;
        Ok(h.max(f64::MIN_POSITIVE).ln() - MASSLESS_THRESHOLD.ln())
    };
    let (mut lo, mut hi) = (lo, hi);
    if gap(lo)? <= 0.0 || gap(hi)? > 0.0 {
        return Err(Error::Domain(format!("h_eff does not cross {MASSLESS_THRESHOLD:e} for gamma in [{lo}, {hi}]")));
    }
    while hi - lo > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        if gap(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowRatio {
    pub mlt: f64,
    pub ensemble: f64,
    pub ensemble_stderr: f64,
    /// `mlt / ensemble`.
    pub ratio: f64,
    pub ratio_stderr: f64,
}

impl WindowRatio {
    fn new(mlt: f64, ensemble: f64, stderr: f64) -> Self {
        let ratio = mlt / ensemble;
        Self { mlt, ensemble, ensemble_stderr: stderr, ratio, ratio_stderr: (ratio * stderr / ensemble).abs() }
    }

    /// `|ratio − 1|` in units of its standard error.
    pub fn z_score(&self) -> f64 {
        if self.ratio_stderr == 0.0 {
            if self.ratio == 1.0 { 0.0 } else { f64::INFINITY }
        } else {
            (self.ratio - 1.0).abs() / self.ratio_stderr
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MltQsdComparison {
    pub times: Vec<f64>,
    /// `[snapshot][site]` along the most-likely trajectory.
    pub mlt_xx: Vec<Vec<f64>>,
    pub mlt_pp: Vec<Vec<f64>>,
    pub mlt_xp: Vec<Vec<f64>>,
    pub ensemble: EnsembleStats,
    /// Site- and window-averaged ratios for `σ_xx`, `σ_pp`, `σ_xp`.
    pub window_ratios: [WindowRatio; 3],
}

/// Most-likely trajectory against a QSD ensemble from the vacuum, on the
/// same time grid. `cfg.window` selects the late-time averaging window.
pub fn mlt_vs_qsd(chain: &ChainParams, cfg: &QsdConfig) -> Result<MltQsdComparison> {
    let (t0, t1) = cfg.window.ok_or_else(|| Error::InvalidParameter("comparison needs an averaging window".into()))?;
    let initial = GaussianState::vacuum(chain.n_sites);
    let ensemble = run_ensemble(cfg, chain, &initial)?;

    let mut mcfg = MltConfig::new(cfg.gamma, cfg.model, chain.omega, cfg.t_max);
    mcfg.dt = cfg.dt;
    mcfg.stride = cfg.stride;
    mcfg.steady_tol = 0.0;
    mcfg.variant = cfg.variant;
    let generator = Generator::chain(chain, cfg.gamma, cfg.model, cfg.variant);
    let traj = integrate_with(initial, &mcfg, &generator)?;
    if traj.snapshots.len() != ensemble.times.len() {
        return Err(Error::InvalidParameter("snapshot grids of the two runs differ".into()));
    }
    let mlt_xx: Vec<Vec<f64>> = traj.snapshots.iter().map(|s| s.diag_xx.clone()).collect();
    let mlt_pp: Vec<Vec<f64>> = traj.snapshots.iter().map(|s| s.diag_pp.clone()).collect();
    let mlt_xp: Vec<Vec<f64>> = traj.snapshots.iter().map(|s| s.diag_xp.clone()).collect();

    let in_window: Vec<usize> =
        (0..ensemble.times.len()).filter(|&k| ensemble.times[k] >= t0 - 1e-9 && ensemble.times[k] <= t1 + 1e-9).collect();
    if in_window.is_empty() {
        return Err(Error::InsufficientData("no snapshots inside the averaging window".into()));
    }
    let n = chain.n_sites as f64;
    let mlt_avg = |series: &Vec<Vec<f64>>| -> f64 {
        in_window.iter().map(|&k| series[k].iter().sum::<f64>() / n).sum::<f64>() / in_window.len() as f64
    };
    let w = ensemble.window.as_ref().expect("window requested");
    let last = chain.n_sites;
    let window_ratios = [
        WindowRatio::new(mlt_avg(&mlt_xx), w.diag_xx[last].mean, w.diag_xx[last].stderr),
        WindowRatio::new(mlt_avg(&mlt_pp), w.diag_pp[last].mean, w.diag_pp[last].stderr),
        WindowRatio::new(mlt_avg(&mlt_xp), w.diag_xp[last].mean, w.diag_xp[last].stderr),
    ];
    Ok(MltQsdComparison { times: ensemble.times.clone(), mlt_xx, mlt_pp, mlt_xp, ensemble, window_ratios })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosineDecay {
    pub times: Vec<f64>,
    pub ensemble: Vec<f64>,
    pub mlt: Vec<f64>,
    /// Ensemble average over the last `late_fraction` of the snapshots.
    pub late_mean: f64,
}

/// Trajectory average of `cos(α(⟨x_i⟩ − ⟨x_j⟩))` for the free chain from the
/// vacuum, next to its most-likely-trajectory value.
pub fn cosine_decay(chain: &ChainParams, cfg: &QsdConfig, alpha: f64, i: usize, j: usize, late_fraction: f64) -> Result<CosineDecay> {
    let initial = GaussianState::vacuum(chain.n_sites);
    let probe = Some(CosineProbe { alpha, i, j });
    let noisy = QsdConfig { record_means: true, cosine: probe, zero_noise: false, ..cfg.clone() };
    let stats = run_ensemble(&noisy, chain, &initial)?;
    let ensemble = ensemble_cosine_average(&stats, alpha, i, j)?;
    let quiet = QsdConfig { record_means: true, cosine: probe, zero_noise: true, n_trajectories: 1, ..cfg.clone() };
    let mlt = ensemble_cosine_average(&run_ensemble(&quiet, chain, &initial)?, alpha, i, j)?;
    let start = ((1.0 - late_fraction) * ensemble.len() as f64).floor() as usize;
    let late = &ensemble[start.min(ensemble.len() - 1)..];
    let late_mean = late.iter().sum::<f64>() / late.len() as f64;
    Ok(CosineDecay { times: stats.times, ensemble, mlt, late_mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steady::DecayClass;

    #[test]
    fn free_modes_reach_analytic_steady_state() {
        let chain = ChainParams::new(32, 1.0).unwrap();
        let t = steady_modes(&chain, 1.0, Model::Free, &ModeRunConfig::default()).unwrap();
        assert!(t.steady_time.is_some());
        let sg = SineGordonParams::new(0.0, 1.0).unwrap();
        let sol = solve_self_consistent(&chain, &sg, 1.0, Branch::Discrete).unwrap();
        for (a, b) in t.final_state.s_xx.iter().zip(&sol.sigma_xx_q) {
            assert!((a / b - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn small_free_bench() {
        let rows = free_bench(1.0, None, &[1.0], &[32, 48, 64, 96], &ModeRunConfig::default()).unwrap();
        assert!(rows[0].scaling.c > 0.0);
        assert_eq!(rows[0].scaling.values.len(), 4);
        assert_eq!(rows[0].decay.class, DecayClass::PowerLaw);
    }

    #[test]
    fn phase_cells_mark_failures() {
        let cells = phase_diagram(0.5, 1.0, None, &[1.0], &[2.1], &[16, 24, 32, 48], 64);
        assert_eq!(cells.len(), 1);
        assert!(cells[0].error.is_none() && cells[0].c.is_some());
        let bad = phase_diagram(0.5, 1.0, None, &[-1.0], &[2.1], &[16, 24, 32, 48], 64);
        assert!(bad[0].error.is_some());
    }
}
