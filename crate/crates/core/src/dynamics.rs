//! Deterministic moment equations along the most-likely trajectory and
//! their fixed-step RK4 integration.
//!
//! For a quadratic generator `H = (ω/2) pᵀp + ½ xᵀ V x + gᵀx` monitored by
//! weak momentum measurements of strength `γ` with all readout noise set to
//! zero, Gaussian states stay Gaussian and the moments obey
//!
//! ```text
//! d⟨x⟩  = ω⟨p⟩
//! d⟨p⟩  = −V⟨x⟩ − g
//! dσ_xx = ω(σ_xp + σ_xpᵀ) − 4γ σ_xp σ_xpᵀ + γ I
//! dσ_pp = −(V σ_xp + σ_xpᵀ V) − 4γ σ_pp²
//! dσ_xp = ω σ_pp − σ_xx V − 4γ σ_xp σ_pp
//! ```
//!
//! with `V = ωK + 2 diag(h)` for the chain stiffness `K` and the harmonic
//! surrogate coefficients `(g, h)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianState;
use crate::lattice::{lattice_momenta, ChainParams};
use crate::sctdha::{coefficients, site_coefficients, HarmonicCoefficients, SineGordonParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Model {
    Free,
    SineGordon(SineGordonParams),
}

impl Model {
    pub fn j_coupling(&self) -> f64 {
        match self {
            Model::Free => 0.0,
            Model::SineGordon(sg) => sg.j_coupling,
        }
    }
}

/// Regulator handling in the mean-momentum drift.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentumDrift {
    /// `d⟨p_i⟩ = −ω(2 + r²)⟨x_i⟩ + ω(⟨x_{i+1}⟩ + ⟨x_{i−1}⟩)`, consistent with the Hamiltonian.
    #[default]
    Hamiltonian,
    /// Drops the `r²` term: `d⟨p_i⟩ = −2ω⟨x_i⟩ + ω(neighbours)`.
    Printed,
}

/// On-site coefficient of `σ_xp` in the `σ_pp` equation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PpBracket {
    /// `−ω(2 + r²)` on both `σ_xp^{ij}` and `σ_xp^{ji}`.
    #[default]
    Hamiltonian,
    /// `−ω(1 + r²/2)` inside the `(i ↔ j)` bracket, i.e. half the on-site stiffness.
    PrintedFree,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquationVariant {
    pub momentum_drift: MomentumDrift,
    pub pp_bracket: PpBracket,
}

/// Right-hand side of the moment equations for a fixed stiffness matrix.
#[derive(Debug, Clone)]
pub struct Generator {
    omega: f64,
    gamma: f64,
    model: Model,
    stiffness: DMatrix<f64>,
    drift_stiffness: DMatrix<f64>,
    pp_stiffness: DMatrix<f64>,
}

impl Generator {
    pub fn chain(chain: &ChainParams, gamma: f64, model: Model, variant: EquationVariant) -> Self {
        Self::from_stiffness(chain.omega, chain.coupling_matrix(), chain.regulator(), gamma, model, variant)
    }

    /// A single oscillator `H = (ω/2)(p² + r² x²)`; there is no hopping term.
    pub fn single_site(omega: f64, r_sq: f64, gamma: f64, model: Model, variant: EquationVariant) -> Self {
        Self::from_stiffness(omega, DMatrix::from_element(1, 1, r_sq), r_sq, gamma, model, variant)
    }

    /// General symmetric stiffness `K` (`H = (ω/2)(pᵀp + xᵀKx)`); `r_sq` is the
    /// part of the diagonal that [`MomentumDrift::Printed`] removes.
    pub fn from_stiffness(
        omega: f64,
        stiffness: DMatrix<f64>,
        r_sq: f64,
        gamma: f64,
        model: Model,
        variant: EquationVariant,
    ) -> Self {
        let n = stiffness.nrows();
        let drift_stiffness = match variant.momentum_drift {
            MomentumDrift::Hamiltonian => stiffness.clone(),
            MomentumDrift::Printed => &stiffness - DMatrix::identity(n, n) * r_sq,
        };
        let pp_stiffness = match variant.pp_bracket {
            PpBracket::Hamiltonian => stiffness.clone(),
            PpBracket::PrintedFree => {
                let mut k = stiffness.clone();
                for i in 0..n {
                    k[(i, i)] *= 0.5;
                }
                k
            }
        };
        Self { omega, gamma, model, stiffness, drift_stiffness, pp_stiffness }
    }

    pub fn n_sites(&self) -> usize {
        self.stiffness.nrows()
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn model(&self) -> Model {
        self.model
    }

    /// `max(ω, γ, J)`.
    pub fn energy_scale(&self) -> f64 {
        self.omega.max(self.gamma).max(self.model.j_coupling())
    }

    pub fn coefficients(&self, state: &GaussianState) -> Option<HarmonicCoefficients> {
        match &self.model {
            Model::Free => None,
            Model::SineGordon(sg) => Some(coefficients(state, sg)),
        }
    }

    /// Deterministic drift of all five moment blocks.
    pub fn rhs(&self, s: &GaussianState) -> GaussianState {
        let (w, gam) = (self.omega, self.gamma);
        let n = self.n_sites();
        let coeffs = self.coefficients(s);

        let xp_t = s.s_xp.transpose();

        let mean_x = &s.mean_p * w;
        let mut mean_p = -(&self.drift_stiffness * &s.mean_x) * w;

        let mut s_xx = (&s.s_xp + &xp_t) * w;
        s_xx.gemm(-4.0 * gam, &s.s_xp, &xp_t, 1.0);
        for i in 0..n {
            s_xx[(i, i)] += gam;
        }

        let k_xp = &self.pp_stiffness * &s.s_xp;
        let mut s_pp = -(&k_xp + k_xp.transpose()) * w;
        s_pp.gemm(-4.0 * gam, &s.s_pp, &s.s_pp, 1.0);

        let mut s_xp = &s.s_pp * w;
        s_xp.gemm(-w, &s.s_xx, &self.stiffness, 1.0);
        s_xp.gemm(-4.0 * gam, &s.s_xp, &s.s_pp, 1.0);

        if let Some(HarmonicCoefficients { g, h }) = coeffs {
            for i in 0..n {
                mean_p[i] -= g[i] + 2.0 * h[i] * s.mean_x[i];
            }
            for i in 0..n {
                for j in 0..n {
                    s_pp[(i, j)] -= 2.0 * (h[i] * s.s_xp[(i, j)] + h[j] * s.s_xp[(j, i)]);
                    s_xp[(i, j)] -= 2.0 * h[j] * s.s_xx[(i, j)];
                }
            }
        }

        GaussianState { mean_x, mean_p, s_xx, s_pp, s_xp }
    }

    /// One classical RK4 step; the surrogate coefficients are re-evaluated
    /// at every stage.
    pub fn rk4_step(&self, s: &GaussianState, dt: f64, k1: Option<GaussianState>) -> GaussianState {
        let k1 = k1.unwrap_or_else(|| self.rhs(s));
        let mut tmp = s.clone();
        tmp.axpy(0.5 * dt, &k1);
        let k2 = self.rhs(&tmp);
        let mut tmp = s.clone();
        tmp.axpy(0.5 * dt, &k2);
        let k3 = self.rhs(&tmp);
        let mut tmp = s.clone();
        tmp.axpy(dt, &k3);
        let k4 = self.rhs(&tmp);

        let mut out = s.clone();
        out.axpy(dt / 6.0, &k1);
        out.axpy(dt / 3.0, &k2);
        out.axpy(dt / 3.0, &k3);
        out.axpy(dt / 6.0, &k4);
        out.symmetrize();
        out
    }
}

/// Drift of the free chain with the default equation variant.
pub fn rhs_free(state: &GaussianState, chain: &ChainParams, gamma: f64) -> GaussianState {
    Generator::chain(chain, gamma, Model::Free, EquationVariant::default()).rhs(state)
}

/// Drift of the Sine-Gordon chain in the harmonic surrogate.
pub fn rhs_sg(state: &GaussianState, chain: &ChainParams, sg: &SineGordonParams, gamma: f64) -> GaussianState {
    Generator::chain(chain, gamma, Model::SineGordon(*sg), EquationVariant::default()).rhs(state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MltConfig {
    pub gamma: f64,
    pub dt: f64,
    pub t_max: f64,
    pub steady_tol: f64,
    pub model: Model,
    #[serde(default)]
    pub variant: EquationVariant,
    /// Steps between snapshots.
    pub stride: usize,
    /// Keep full covariance blocks in every snapshot.
    pub store_full: bool,
}

impl MltConfig {
    /// Defaults: `dt = 10⁻³ / max(ω, γ, J)`, `steady_tol = 10⁻⁹`, stride 100.
    pub fn new(gamma: f64, model: Model, omega: f64, t_max: f64) -> Self {
        let scale = omega.max(gamma).max(model.j_coupling());
        Self {
            gamma,
            dt: 1e-3 / scale,
            t_max,
            steady_tol: 1e-9,
            model,
            variant: EquationVariant::default(),
            stride: 100,
            store_full: false,
        }
    }

    pub fn validate(&self, omega: f64) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if !(self.dt > 0.0 && self.t_max > 0.0 && self.steady_tol >= 0.0) {
            return Err(Error::InvalidParameter("dt and t_max must be positive".into()));
        }
        if self.stride == 0 {
            return Err(Error::InvalidParameter("stride must be at least 1".into()));
        }
        let scale = omega.max(self.gamma).max(self.model.j_coupling());
        if self.dt * scale > 0.1 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "dt·max(ω, γ, J) = {} exceeds the stability limit 0.1",
                self.dt * scale
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    /// Max-norm of the drift of all five blocks at this state.
    pub rhs_norm: f64,
    pub mean_x: Vec<f64>,
    pub mean_p: Vec<f64>,
    pub diag_xx: Vec<f64>,
    pub diag_pp: Vec<f64>,
    pub diag_xp: Vec<f64>,
    pub full: Option<GaussianState>,
}

impl Snapshot {
    pub fn new(time: f64, rhs_norm: f64, state: &GaussianState, store_full: bool) -> Self {
        Self {
            time,
            rhs_norm,
            mean_x: state.mean_x.iter().copied().collect(),
            mean_p: state.mean_p.iter().copied().collect(),
            diag_xx: state.s_xx.diagonal().iter().copied().collect(),
            diag_pp: state.s_pp.diagonal().iter().copied().collect(),
            diag_xp: state.s_xp.diagonal().iter().copied().collect(),
            full: store_full.then(|| state.clone()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub final_state: GaussianState,
    pub final_time: f64,
    pub steady_time: Option<f64>,
    pub steps: usize,
}

pub fn integrate(state: GaussianState, cfg: &MltConfig, chain: &ChainParams) -> Result<Trajectory> {
    if chain.n_sites < 2 {
        return Err(Error::InvalidParameter("chain dynamics needs at least two sites".into()));
    }
    let generator = Generator::chain(chain, cfg.gamma, cfg.model, cfg.variant);
    integrate_with(state, cfg, &generator)
}

/// Fixed-step RK4 until `t_max` or until the drift max-norm drops below
/// `steady_tol · max(ω, γ)`.
pub fn integrate_with(mut state: GaussianState, cfg: &MltConfig, generator: &Generator) -> Result<Trajectory> {
    cfg.validate(generator.omega())?;
    if generator.n_sites() != state.n_sites() {
        return Err(Error::InvalidParameter("state and generator sizes differ".into()));
    }
    let threshold = cfg.steady_tol * generator.omega().max(generator.gamma());
    let n_steps = (cfg.t_max / cfg.dt).round() as usize;
    let mut snapshots = Vec::new();
    let mut steady_time = None;
    let mut t = 0.0;
    let mut step = 0;
    loop {
        let k1 = generator.rhs(&state);
        let norm = k1.max_abs();
        if !norm.is_finite() {
            return Err(Error::NonFinite { time: t, trajectory: None });
        }
        let steady = norm < threshold;
        if step % cfg.stride == 0 || steady || step == n_steps {
            snapshots.push(Snapshot::new(t, norm, &state, cfg.store_full));
        }
        if steady {
            steady_time = Some(t);
            break;
        }
        if step == n_steps {
            break;
        }
        state = generator.rk4_step(&state, cfg.dt, Some(k1));
        step += 1;
        t = step as f64 * cfg.dt;
        if !state.is_finite() {
            return Err(Error::NonFinite { time: t, trajectory: None });
        }
    }
    Ok(Trajectory { snapshots, final_state: state, final_time: t, steady_time, steps: step })
}

/// First snapshot (from the second on) whose drift norm is below
/// `steady_tol · scale`, where `scale = max(ω, γ)`.
pub fn detect_steady_state(series: &[Snapshot], steady_tol: f64, scale: f64) -> (bool, Option<f64>) {
    if series.len() < 2 {
        return (false, None);
    }
    series
        .iter()
        .skip(1)
        .find(|s| s.rhs_norm < steady_tol * scale)
        .map_or((false, None), |s| (true, Some(s.time)))
}

/// Zero-mean, translation- and reflection-invariant state stored per
/// lattice momentum. Every block is circulant and symmetric, so each mode
/// carries three real numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeState {
    pub s_xx: Vec<f64>,
    pub s_pp: Vec<f64>,
    pub s_xp: Vec<f64>,
}

impl ModeState {
    pub fn vacuum(n: usize) -> Self {
        Self { s_xx: vec![0.5; n], s_pp: vec![0.5; n], s_xp: vec![0.0; n] }
    }

    pub fn n_modes(&self) -> usize {
        self.s_xx.len()
    }

    /// On-site position variance `(1/N) Σ_q σ_xx^q`.
    pub fn onsite_xx(&self) -> f64 {
        self.s_xx.iter().sum::<f64>() / self.n_modes() as f64
    }

    /// Real-space circulant blocks.
    pub fn to_gaussian(&self) -> GaussianState {
        let n = self.n_modes();
        GaussianState {
            mean_x: DVector::zeros(n),
            mean_p: DVector::zeros(n),
            s_xx: circulant(&inverse_dft(&self.s_xx)),
            s_pp: circulant(&inverse_dft(&self.s_pp)),
            s_xp: circulant(&inverse_dft(&self.s_xp)),
        }
    }

    /// Mode amplitudes of a circulant symmetric state (reads the first row).
    pub fn from_gaussian(state: &GaussianState) -> Self {
        let row = |m: &DMatrix<f64>| -> Vec<f64> { m.row(0).iter().copied().collect() };
        Self {
            s_xx: forward_dft(&row(&state.s_xx)),
            s_pp: forward_dft(&row(&state.s_pp)),
            s_xp: forward_dft(&row(&state.s_xp)),
        }
    }
}

/// `v_q = Σ_d c(d) cos(q d)` for a symmetric first row `c`.
pub fn forward_dft(row: &[f64]) -> Vec<f64> {
    let n = row.len();
    lattice_momenta(n)
        .iter()
        .map(|&q| row.iter().enumerate().map(|(d, c)| c * (q * d as f64).cos()).sum())
        .collect()
}

/// `c(d) = (1/N) Σ_q v_q cos(q d)` for `d = 0..N`.
pub fn inverse_dft(modes: &[f64]) -> Vec<f64> {
    let n = modes.len();
    let qs = lattice_momenta(n);
    (0..n)
        .map(|d| qs.iter().zip(modes).map(|(q, v)| v * (q * d as f64).cos()).sum::<f64>() / n as f64)
        .collect()
}

/// Symmetric circulant matrix with entry `(i, j) = row[(j − i) mod N]`.
pub fn circulant(row: &[f64]) -> DMatrix<f64> {
    let n = row.len();
    DMatrix::from_fn(n, n, |i, j| row[(j + n - i) % n])
}

/// Moment equations per lattice momentum for [`ModeState`]s. Only the
/// default equation variant is supported here.
#[derive(Debug, Clone)]
pub struct ModeGenerator {
    omega: f64,
    gamma: f64,
    model: Model,
    dispersion: Vec<f64>,
}

impl ModeGenerator {
    pub fn new(chain: &ChainParams, gamma: f64, model: Model) -> Self {
        let dispersion = chain.momenta().iter().map(|&q| chain.dispersion(q)).collect();
        Self { omega: chain.omega, gamma, model, dispersion }
    }

    /// Uniform effective mass `h` for the current on-site variance.
    pub fn mass(&self, s: &ModeState) -> f64 {
        match &self.model {
            Model::Free => 0.0,
            Model::SineGordon(sg) => site_coefficients(0.0, s.onsite_xx(), sg).1,
        }
    }

    pub fn rhs(&self, s: &ModeState) -> ModeState {
        let (w, gam) = (self.omega, self.gamma);
        let h = self.mass(s);
        let n = s.n_modes();
        let mut d = ModeState { s_xx: vec![0.0; n], s_pp: vec![0.0; n], s_xp: vec![0.0; n] };
        for q in 0..n {
            let (xx, pp, xp) = (s.s_xx[q], s.s_pp[q], s.s_xp[q]);
            let v = w * self.dispersion[q] + 2.0 * h;
            d.s_xx[q] = 2.0 * w * xp - 4.0 * gam * xp * xp + gam;
            d.s_pp[q] = -2.0 * v * xp - 4.0 * gam * pp * pp;
            d.s_xp[q] = w * pp - v * xx - 4.0 * gam * xp * pp;
        }
        d
    }

    fn axpy(a: &ModeState, c: f64, b: &ModeState) -> ModeState {
        let f = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| u + c * v).collect();
        ModeState { s_xx: f(&a.s_xx, &b.s_xx), s_pp: f(&a.s_pp, &b.s_pp), s_xp: f(&a.s_xp, &b.s_xp) }
    }

    pub fn rk4_step(&self, s: &ModeState, dt: f64) -> ModeState {
        let k1 = self.rhs(s);
        let k2 = self.rhs(&Self::axpy(s, 0.5 * dt, &k1));
        let k3 = self.rhs(&Self::axpy(s, 0.5 * dt, &k2));
        let k4 = self.rhs(&Self::axpy(s, dt, &k3));
        let mut out = Self::axpy(s, dt / 6.0, &k1);
        out = Self::axpy(&out, dt / 3.0, &k2);
        out = Self::axpy(&out, dt / 3.0, &k3);
        Self::axpy(&out, dt / 6.0, &k4)
    }
}

fn mode_norm(d: &ModeState) -> f64 {
    d.s_xx.iter().chain(&d.s_pp).chain(&d.s_xp).fold(0.0, |m, v| m.max(v.abs()))
}

#[derive(Debug, Clone)]
pub struct ModeTrajectory {
    pub final_state: ModeState,
    pub final_time: f64,
    pub steady_time: Option<f64>,
    pub mass: f64,
}

/// RK4 in momentum space. Uses `dt`, `t_max` and `steady_tol` from `cfg`; the
/// steady criterion is on the mode drift, which bounds the real-space drift.
pub fn integrate_modes(mut state: ModeState, cfg: &MltConfig, chain: &ChainParams) -> Result<ModeTrajectory> {
    cfg.validate(chain.omega)?;
    if cfg.variant != EquationVariant::default() {
        return Err(Error::InvalidParameter("momentum-space integration supports only the default equations".into()));
    }
    let generator = ModeGenerator::new(chain, cfg.gamma, cfg.model);
    let threshold = cfg.steady_tol * chain.omega.max(cfg.gamma);
    let n_steps = (cfg.t_max / cfg.dt).round() as usize;
    let mut steady_time = None;
    let mut step = 0;
    loop {
        let t = step as f64 * cfg.dt;
        let norm = mode_norm(&generator.rhs(&state));
        if !norm.is_finite() {
            return Err(Error::NonFinite { time: t, trajectory: None });
        }
        if norm < threshold {
            steady_time = Some(t);
            break;
        }
        if step == n_steps {
            break;
        }
        state = generator.rk4_step(&state, cfg.dt);
        step += 1;
    }
    let mass = generator.mass(&state);
    Ok(ModeTrajectory { final_state: state, final_time: step as f64 * cfg.dt, steady_time, mass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::random_physical_state;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain(n: usize) -> ChainParams {
        ChainParams::new(n, 1.0).unwrap()
    }

    #[test]
    fn vacuum_without_measurement_is_stationary_at_t0() {
        let d = rhs_free(&GaussianState::vacuum(6), &chain(6), 0.0);
        assert_eq!(d.s_xx.amax(), 0.0);
        assert_eq!(d.mean_x.amax(), 0.0);
        assert_eq!(d.mean_p.amax(), 0.0);
    }

    #[test]
    fn vacuum_under_measurement_spreads_positions() {
        let gamma = 0.7;
        let d = rhs_free(&GaussianState::vacuum(5), &chain(5), gamma);
        assert!((d.s_xx - DMatrix::identity(5, 5) * gamma).amax() < 1e-15);
    }

    #[test]
    fn sg_with_zero_coupling_is_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = chain(16);
        let sg = SineGordonParams::new(0.0, 2.1).unwrap();
        for _ in 0..5 {
            let s = random_physical_state(&mut rng, 16, 0.5);
            let a = rhs_free(&s, &c, 0.8);
            let b = rhs_sg(&s, &c, &sg, 0.8);
            let mut diff = a.clone();
            diff.axpy(-1.0, &b);
            assert!(diff.max_abs() <= 1e-14);
        }
    }

    #[test]
    fn zero_means_stay_zero_for_sine_gordon() {
        let c = chain(7);
        let sg = SineGordonParams::new(1.0, 2.1).unwrap();
        let d = rhs_sg(&GaussianState::vacuum(7), &c, &sg, 1.0);
        assert_eq!(d.mean_x.amax(), 0.0);
        assert_eq!(d.mean_p.amax(), 0.0);
    }

    #[test]
    fn printed_drift_drops_regulator() {
        let c = ChainParams::with_regulator(4, 1.0, 2.0).unwrap();
        let mut s = GaussianState::vacuum(4);
        s.mean_x = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let printed = EquationVariant { momentum_drift: MomentumDrift::Printed, ..Default::default() };
        let a = Generator::chain(&c, 0.0, Model::Free, printed).rhs(&s);
        let b = Generator::chain(&c, 0.0, Model::Free, EquationVariant::default()).rhs(&s);
        assert!((a.mean_p[0] + 2.0).abs() < 1e-15);
        assert!((b.mean_p[0] + 2.0 + c.regulator()).abs() < 1e-15);
        assert_eq!(a.mean_p[1], 1.0);
    }

    #[test]
    fn stability_guard() {
        let cfg = MltConfig { dt: 0.2, ..MltConfig::new(1.0, Model::Free, 1.0, 1.0) };
        assert!(integrate(GaussianState::vacuum(4), &cfg, &chain(4)).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        // dt within the guard is still too coarse for a pathological initial
        // state with huge momentum variance.
        let mut s = GaussianState::vacuum(4);
        s.s_pp *= 1e150;
        let cfg = MltConfig { dt: 0.1, ..MltConfig::new(1.0, Model::Free, 1.0, 10.0) };
        match integrate(s, &cfg, &chain(4)) {
            Err(Error::NonFinite { .. }) => {}
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn steady_detection() {
        let s = GaussianState::vacuum(3);
        let constant = vec![Snapshot::new(0.0, 0.0, &s, false), Snapshot::new(1.0, 0.0, &s, false)];
        assert_eq!(detect_steady_state(&constant, 1e-9, 1.0), (true, Some(1.0)));

        let gamma = 0.5;
        let c = chain(3);
        let norm = rhs_free(&s, &c, gamma).max_abs();
        let series = vec![Snapshot::new(0.0, norm, &s, false), Snapshot::new(0.0, norm, &s, false)];
        assert!(!detect_steady_state(&series, 1e-9, 1.0).0);
        assert!(!detect_steady_state(&series[..1], 1e-9, 1.0).0);
    }

    #[test]
    fn mode_and_dense_drifts_agree() {
        let c = ChainParams::new(12, 1.0).unwrap();
        let sg = SineGordonParams::new(1.0, 1.3).unwrap();
        let model = Model::SineGordon(sg);
        // a circulant, reflection-symmetric state
        let mut modes = ModeState::vacuum(12);
        for (q, k) in c.momenta().iter().enumerate() {
            modes.s_xx[q] = 0.6 + 0.2 * k.cos();
            modes.s_pp[q] = 0.9 - 0.1 * (2.0 * k).cos();
            modes.s_xp[q] = -0.1 + 0.05 * k.cos();
        }
        let dense = modes.to_gaussian();
        let back = ModeState::from_gaussian(&dense);
        for q in 0..12 {
            assert!((back.s_xx[q] - modes.s_xx[q]).abs() < 1e-13);
        }
        let dd = Generator::chain(&c, 0.7, model, EquationVariant::default()).rhs(&dense);
        let dm = ModeGenerator::new(&c, 0.7, model).rhs(&modes).to_gaussian();
        assert!((dd.s_xx - dm.s_xx).amax() < 1e-13);
        assert!((dd.s_pp - dm.s_pp).amax() < 1e-13);
        assert!((dd.s_xp - dm.s_xp).amax() < 1e-13);
    }
}
