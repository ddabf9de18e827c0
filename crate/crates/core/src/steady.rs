//! Momentum-space steady state of the monitored Sine-Gordon chain in the
//! harmonic surrogate, with the self-consistent on-site position variance.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::{inverse_dft, ModeState};
use crate::error::{Error, Result};
use crate::fit::{linear_fit, LinearFit};
use crate::gaussian::GaussianState;
use crate::lattice::ChainParams;
use crate::sctdha::SineGordonParams;

/// `h_eff` below this counts as massless.
pub const MASSLESS_THRESHOLD: f64 = 1e-5;

const DAMPING: f64 = 0.5;
const MAX_ITERATIONS: usize = 10_000;
const OSCILLATION_WINDOW: usize = 20;

/// Steady `σ_xp = (ω − √(ω² + 4γ²)) / (4γ)`, written to avoid cancellation at small `γ`.
pub fn sigma_xp_steady(omega: f64, gamma: f64) -> f64 {
    -gamma / (omega + (omega * omega + 4.0 * gamma * gamma).sqrt())
}

/// Complete elliptic integral of the first kind, parameter convention
/// `K(m) = ∫₀^{π/2} dθ / √(1 − m sin²θ)`, via the arithmetic-geometric mean.
pub fn elliptic_k(m: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&m) {
        return Err(Error::Domain(format!("elliptic parameter must lie in [0, 1), got {m}")));
    }
    let mut a = 1.0;
    let mut b = (1.0 - m).sqrt();
    for _ in 0..64 {
        if (a - b).abs() <= 4.0 * f64::EPSILON * a {
            break;
        }
        let next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = next;
    }
    Ok(PI / (a + b))
}

/// How `F(S_x)` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// `(1/N) Σ_q Γ₀ / √(4 sin²(q/2) + m)`.
    Discrete,
    /// Continuum limit of the discrete sum, `Γ₀ (2/π) K(4/(4+m)) / √(4+m)`.
    Elliptic,
    /// Same with the prefactor `4/π`, twice the continuum limit.
    EllipticPrinted,
}

/// Mode-independent steady quantities of the quadratic problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyConstants {
    pub sigma_xp: f64,
    /// `√(−ω σ_xp / (2γ))`.
    pub amplitude: f64,
    /// `Γ₀ = amplitude · (1 − 4γ σ_xp / ω)`.
    pub gamma0: f64,
}

impl SteadyConstants {
    pub fn new(omega: f64, gamma: f64) -> Self {
        let sigma_xp = sigma_xp_steady(omega, gamma);
        let amplitude = (-omega * sigma_xp / (2.0 * gamma)).sqrt();
        let gamma0 = amplitude * (1.0 - 4.0 * gamma * sigma_xp / omega);
        Self { sigma_xp, amplitude, gamma0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateSolution {
    pub sigma_xp: f64,
    pub s_x: f64,
    pub h_eff: f64,
    pub m_eff: f64,
    pub gamma0: f64,
    /// Ordered like [`ChainParams::momenta`].
    pub sigma_xx_q: Vec<f64>,
    pub sigma_pp_q: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub branch: Branch,
    /// Fixed point of the map with the cosine mass dropped, i.e. the gapless candidate.
    pub massless_s_x: f64,
}

impl SteadyStateSolution {
    pub fn is_massless(&self) -> bool {
        self.h_eff < MASSLESS_THRESHOLD
    }

    /// Zero-mean circulant Gaussian state with these mode correlations.
    pub fn to_gaussian(&self) -> GaussianState {
        let n = self.sigma_xx_q.len();
        ModeState {
            s_xx: self.sigma_xx_q.clone(),
            s_pp: self.sigma_pp_q.clone(),
            s_xp: vec![self.sigma_xp; n],
        }
        .to_gaussian()
    }
}

struct SelfConsistency<'a> {
    chain: &'a ChainParams,
    sg: &'a SineGordonParams,
    consts: SteadyConstants,
    branch: Branch,
    momenta: Vec<f64>,
}

impl SelfConsistency<'_> {
    fn m_eff(&self, s_x: f64) -> f64 {
        self.chain.regulator() + self.sg.j_coupling / self.chain.omega * (-0.5 * self.sg.alpha.powi(2) * s_x).exp()
    }

    fn f_of_mass(&self, m: f64) -> Result<f64> {
        if m <= 0.0 || !m.is_finite() {
            return Err(Error::Domain(format!("effective mass parameter must be positive, got {m}")));
        }
        let g0 = self.consts.gamma0;
        match self.branch {
            Branch::Discrete => {
                let n = self.momenta.len() as f64;
                Ok(g0 * self.momenta.iter().map(|&q| 1.0 / (crate::lattice::dispersion(q, m)).sqrt()).sum::<f64>() / n)
            }
            Branch::Elliptic | Branch::EllipticPrinted => {
                let pre = if self.branch == Branch::Elliptic { 2.0 / PI } else { 4.0 / PI };
                Ok(g0 * pre * elliptic_k(4.0 / (4.0 + m))? / (4.0 + m).sqrt())
            }
        }
    }

    fn f(&self, s_x: f64) -> Result<f64> {
        self.f_of_mass(self.m_eff(s_x))
    }

    /// Smallest root of `S − F(S)` on `[0, hi]`, assuming `G(0) < 0 ≤ G(hi)`.
    fn bisect(&self, hi: f64) -> Result<(f64, usize)> {
        let (mut lo, mut hi) = (0.0, hi);
        let mut it = 0;
        while hi - lo > 1e-15 * hi.max(1.0) && it < 200 {
            let mid = 0.5 * (lo + hi);
            if mid - self.f(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            it += 1;
        }
        Ok((0.5 * (lo + hi), it))
    }
}

/// Solves `S_x = F(S_x)` by damped iteration from the localized start
/// `S_x = 0`, switching to bisection if the residual keeps alternating sign.
pub fn solve_self_consistent(
    chain: &ChainParams,
    sg: &SineGordonParams,
    gamma: f64,
    branch: Branch,
) -> Result<SteadyStateSolution> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let consts = SteadyConstants::new(chain.omega, gamma);
    let problem = SelfConsistency { chain, sg, consts, branch, momenta: chain.momenta() };
    let tol = 1e-12 * consts.gamma0;
    let massless_s_x = problem.f_of_mass(chain.regulator())?;

    let mut s = 0.0;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let mut alternating = 0;
    let mut last_sign = 0.0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        let f = problem.f(s)?;
        residual = f - s;
        if residual.abs() < tol {
            converged = true;
            break;
        }
        let sign = residual.signum();
        alternating = if sign == -last_sign { alternating + 1 } else { 0 };
        last_sign = sign;
        if alternating >= OSCILLATION_WINDOW {
            log::debug!("self-consistency oscillates, bisecting");
            let (root, extra) = problem.bisect(massless_s_x)?;
            s = root;
            iterations += extra;
            residual = problem.f(s)? - s;
            converged = residual.abs() < tol;
            break;
        }
        // The first update is undamped so a mass-independent map lands on
        // its fixed point immediately.
        s += if iterations == 0 { residual } else { DAMPING * residual };
        iterations += 1;
    }
    if !converged {
        return Err(Error::NoConvergence { iterations, residual: residual.abs() });
    }

    let m_eff = problem.m_eff(s);
    let h_eff = 0.5 * sg.j_coupling * (-0.5 * sg.alpha.powi(2) * s).exp();
    let (sigma_xx_q, sigma_pp_q) = problem
        .momenta
        .iter()
        .map(|&q| {
            let root = crate::lattice::dispersion(q, m_eff).sqrt();
            (consts.gamma0 / root, consts.amplitude * root)
        })
        .unzip();
    Ok(SteadyStateSolution {
        sigma_xp: consts.sigma_xp,
        s_x: s,
        h_eff,
        m_eff,
        gamma0: consts.gamma0,
        sigma_xx_q,
        sigma_pp_q,
        converged,
        iterations,
        residual: residual.abs(),
        branch,
        massless_s_x,
    })
}

/// Real-space correlations against distance `d = 0..=N/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationProfiles {
    pub distance: Vec<usize>,
    pub sigma_xx: Vec<f64>,
    pub sigma_pp: Vec<f64>,
}

pub fn real_space_from_modes(solution: &SteadyStateSolution) -> CorrelationProfiles {
    let n = solution.sigma_xx_q.len();
    let half = n / 2;
    let xx = inverse_dft(&solution.sigma_xx_q);
    let pp = inverse_dft(&solution.sigma_pp_q);
    CorrelationProfiles {
        distance: (0..=half).collect(),
        sigma_xx: xx[..=half].to_vec(),
        sigma_pp: pp[..=half].to_vec(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayClass {
    PowerLaw,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub class: DecayClass,
    /// `log|σ| ≈ a + b log d`; the exponent is `b`.
    pub power_law: LinearFit,
    /// `log|σ| ≈ a − d/ξ`.
    pub exponential: LinearFit,
    pub exponent: f64,
    pub xi: f64,
}

/// Fits `|profile[d]|` for `d` in `[d_min, d_max]` (indices into the
/// profile, which starts at distance 0) both as a power law and as an
/// exponential and picks the better `R²`.
pub fn classify_decay(profile: &[f64], d_min: usize, d_max: usize) -> Result<DecayFit> {
    let (mut d, mut lx, mut ly) = (Vec::new(), Vec::new(), Vec::new());
    for (i, v) in profile.iter().enumerate().take(d_max + 1).skip(d_min.max(1)) {
        if v.abs() > 1e-14 && v.is_finite() {
            d.push(i as f64);
            lx.push((i as f64).ln());
            ly.push(v.abs().ln());
        }
    }
    if d.len() < 10 {
        return Err(Error::InsufficientData(format!("{} usable points, need 10", d.len())));
    }
    let power_law = linear_fit(&lx, &ly)?;
    let exponential = linear_fit(&d, &ly)?;
    let class = if power_law.r_squared >= exponential.r_squared { DecayClass::PowerLaw } else { DecayClass::Exponential };
    Ok(DecayFit { class, power_law, exponential, exponent: power_law.slope, xi: -1.0 / exponential.slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quad_k(m: f64) -> f64 {
        // composite Simpson on a smooth integrand
        let n = 20_000;
        let h = 0.5 * PI / n as f64;
        let f = |t: f64| 1.0 / (1.0 - m * t.sin().powi(2)).sqrt();
        let mut s = f(0.0) + f(0.5 * PI);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn sigma_xp_values() {
        assert!((sigma_xp_steady(1.0, 1.0) - (1.0 - 5f64.sqrt()) / 4.0).abs() < 1e-15);
        let g = 1e-4;
        assert!((sigma_xp_steady(1.0, g) + g / 2.0).abs() < g.powi(3));
        assert!((sigma_xp_steady(1.0, 1e3) + 0.5).abs() < 1e-3);
    }

    #[test]
    fn elliptic_values() {
        assert!((elliptic_k(0.0).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!((elliptic_k(0.5).unwrap() - 1.854_074_677_301_372).abs() < 1e-14);
        for m in [0.1, 0.5, 0.9] {
            let k = elliptic_k(m).unwrap();
            assert!((k - quad_k(m)).abs() < 1e-10 * k);
        }
        assert!(elliptic_k(1.0 - 1e-10).unwrap() > 12.0);
        assert!(elliptic_k(1.0).is_err());
        assert!(elliptic_k(-0.1).is_err());
    }

    #[test]
    fn free_limit_needs_no_iteration() {
        let c = ChainParams::new(50, 1.0).unwrap();
        let sg = SineGordonParams::new(0.0, 2.0).unwrap();
        let sol = solve_self_consistent(&c, &sg, 0.8, Branch::Discrete).unwrap();
        assert!(sol.iterations <= 1);
        assert_eq!(sol.h_eff, 0.0);
        for (q, xx) in c.momenta().iter().zip(&sol.sigma_xx_q) {
            assert!((xx - sol.gamma0 / c.dispersion(*q).sqrt()).abs() < 1e-13);
        }
        assert!((sol.s_x - sol.massless_s_x).abs() < 1e-12);
    }

    #[test]
    fn solution_invariants() {
        let c = ChainParams::new(80, 0.5).unwrap();
        let sg = SineGordonParams::new(1.0, 2.1).unwrap();
        for gamma in [0.5, 1.0, 3.0, 6.0] {
            let sol = solve_self_consistent(&c, &sg, gamma, Branch::Discrete).unwrap();
            assert!(sol.sigma_xp < 0.0);
            assert!(sol.sigma_xx_q.iter().chain(&sol.sigma_pp_q).all(|v| *v > 0.0));
            let mean = sol.sigma_xx_q.iter().sum::<f64>() / 80.0;
            assert!((mean - sol.s_x).abs() < 1e-11 * sol.gamma0);
            let prod = sol.gamma0 * SteadyConstants::new(0.5, gamma).amplitude;
            for (a, b) in sol.sigma_xx_q.iter().zip(&sol.sigma_pp_q) {
                assert!((a * b - prod).abs() < 1e-12 * prod);
            }
        }
    }

    #[test]
    fn heff_monotone_in_gamma() {
        let c = ChainParams::new(200, 0.5).unwrap();
        let sg = SineGordonParams::new(1.0, 2.1).unwrap();
        let mut last = f64::INFINITY;
        for k in 1..=40 {
            let h = solve_self_consistent(&c, &sg, 0.2 * k as f64, Branch::Discrete).unwrap().h_eff;
            assert!(h <= last * (1.0 + 1e-12));
            last = h;
        }
    }

    #[test]
    fn constant_modes_give_onsite_profile() {
        let sol = SteadyStateSolution {
            sigma_xp: -0.1,
            s_x: 0.0,
            h_eff: 0.0,
            m_eff: 1.0,
            gamma0: 1.0,
            sigma_xx_q: vec![2.0; 16],
            sigma_pp_q: vec![3.0; 16],
            converged: true,
            iterations: 0,
            residual: 0.0,
            branch: Branch::Discrete,
            massless_s_x: 0.0,
        };
        let p = real_space_from_modes(&sol);
        assert_eq!(p.distance.len(), 9);
        assert!((p.sigma_pp[0] - 3.0).abs() < 1e-14);
        assert!(p.sigma_pp[1..].iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn synthetic_decays() {
        let power: Vec<f64> = (0..60).map(|d| if d == 0 { 1.0 } else { (d as f64).powi(-2) }).collect();
        let fit = classify_decay(&power, 5, 50).unwrap();
        assert_eq!(fit.class, DecayClass::PowerLaw);
        assert!((fit.exponent + 2.0).abs() < 1e-6);

        let exp: Vec<f64> = (0..60).map(|d| (-(d as f64) / 3.0).exp()).collect();
        let fit = classify_decay(&exp, 5, 50).unwrap();
        assert_eq!(fit.class, DecayClass::Exponential);
        assert!((fit.xi - 3.0).abs() < 1e-6);

        assert!(classify_decay(&exp[..8], 1, 7).is_err());
    }

    #[test]
    fn free_steady_state_is_power_law() {
        let c = ChainParams::new(500, 1.0).unwrap();
        let sg = SineGordonParams::new(0.0, 1.0).unwrap();
        let sol = solve_self_consistent(&c, &sg, 1.0, Branch::Discrete).unwrap();
        let p = real_space_from_modes(&sol);
        assert_eq!(classify_decay(&p.sigma_pp, 5, 50).unwrap().class, DecayClass::PowerLaw);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sigma_xp_in_range(omega in 0.05f64..5.0, gamma in 1e-3f64..50.0) {
            let s = sigma_xp_steady(omega, gamma);
            prop_assert!(s < 0.0 && s > -0.5);
        }

        #[test]
        fn fixed_point_residual(gamma in 0.2f64..8.0, alpha in 0.5f64..3.0, n in 20usize..120) {
            let c = ChainParams::new(n, 0.5).unwrap();
            let sg = SineGordonParams::new(1.0, alpha).unwrap();
            let sol = solve_self_consistent(&c, &sg, gamma, Branch::Discrete).unwrap();
            prop_assert!(sol.residual < 1e-12 * sol.gamma0);
        }
    }
}
