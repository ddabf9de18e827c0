//! Strong-measurement perturbation theory around the monitored free boson:
//! relevance of the cosine and the resulting critical line.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::ChainParams;
use crate::qsd::EnsembleStats;
use crate::sctdha::SineGordonParams;
use crate::steady::{solve_self_consistent, Branch, SteadyConstants, MASSLESS_THRESHOLD};

/// `Γ = √(−ω σ_xp / (2γ)) (1 − 4γ σ_xp / ω)` at the steady `σ_xp`.
pub fn gamma_factor(omega: f64, gamma: f64) -> f64 {
    SteadyConstants::new(omega, gamma).gamma0
}

/// `α_c = √(2π / Γ)`.
pub fn critical_alpha(omega: f64, gamma: f64) -> f64 {
    (2.0 * PI / gamma_factor(omega, gamma)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationResult {
    pub gamma_factor: f64,
    /// `α² Γ / (2π)`.
    pub exponent: f64,
    pub alpha_critical: f64,
    pub relevant: bool,
}

pub fn relevance(alpha: f64, omega: f64, gamma: f64) -> PerturbationResult {
    let g = gamma_factor(omega, gamma);
    let exponent = alpha * alpha * g / (2.0 * PI);
    PerturbationResult { gamma_factor: g, exponent, alpha_critical: (2.0 * PI / g).sqrt(), relevant: exponent > 1.0 }
}

/// `I(y) = ½ (Λ² / (Λ² + y²))^{α²Γ/(2π)}` with the cosine prefactor set to one.
pub fn cosine_correlation(y: f64, alpha: f64, omega: f64, gamma: f64, cutoff: f64) -> f64 {
    let exponent = relevance(alpha, omega, gamma).exponent;
    0.5 * (cutoff * cutoff / (cutoff * cutoff + y * y)).powf(exponent)
}

/// Trajectory average of `cos(α(⟨x_i⟩ − ⟨x_j⟩))` at each snapshot, from the
/// stored mean paths of a QSD ensemble.
pub fn ensemble_cosine_average(stats: &EnsembleStats, alpha: f64, i: usize, j: usize) -> Result<Vec<f64>> {
    let paths = stats
        .mean_x_paths
        .as_ref()
        .filter(|p| !p.is_empty())
        .ok_or_else(|| Error::InsufficientData("ensemble has no stored mean trajectories".into()))?;
    let n = stats.n_sites();
    if i >= n || j >= n {
        return Err(Error::InvalidParameter(format!("site pair ({i}, {j}) outside a {n}-site chain")));
    }
    let n_snap = stats.times.len();
    let mut avg = vec![0.0; n_snap];
    for path in paths {
        for (a, x) in avg.iter_mut().zip(path) {
            *a += (alpha * (x[i] - x[j])).cos();
        }
    }
    let k = paths.len() as f64;
    Ok(avg.into_iter().map(|v| v / k).collect())
}

/// The `α` at which the self-consistent steady mass crosses the massless
/// threshold, by bisection on `ln h_eff`.
pub fn sctdha_critical_alpha(chain: &ChainParams, j_coupling: f64, gamma: f64, branch: Branch) -> Result<f64> {
    let log_gap = |alpha: f64| -> Result<f64> {
        let sg = SineGordonParams::new(j_coupling, alpha)?;
        let h = solve_self_consistent(chain, &sg, gamma, branch)?.h_eff;
        Ok(h.max(f64::MIN_POSITIVE).ln() - MASSLESS_THRESHOLD.ln())
    };
    let (mut lo, mut hi) = (0.05, 20.0);
    if log_gap(lo)? <= 0.0 || log_gap(hi)? > 0.0 {
        return Err(Error::Domain(format!("no massive-massless crossing for alpha in [{lo}, {hi}] at gamma = {gamma}")));
    }
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if log_gap(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub gamma_over_j: f64,
    pub alpha_pt: f64,
    pub alpha_sctdha: f64,
    /// `alpha_sctdha / alpha_pt`.
    pub ratio: f64,
}

/// Perturbative and self-consistent critical `α` for each `γ/J`.
pub fn critical_line(chain: &ChainParams, j_coupling: f64, gammas_over_j: &[f64], branch: Branch) -> Result<Vec<CriticalPoint>> {
    gammas_over_j
        .par_iter()
        .map(|&g| {
            let gamma = g * j_coupling;
            let alpha_pt = critical_alpha(chain.omega, gamma);
            let alpha_sctdha = sctdha_critical_alpha(chain, j_coupling, gamma, branch)?;
            Ok(CriticalPoint { gamma_over_j: g, alpha_pt, alpha_sctdha, ratio: alpha_sctdha / alpha_pt })
        })
        .collect()
}
