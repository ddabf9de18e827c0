//! Quantum-state-diffusion trajectories: the same Gaussian moment equations
//! with the measurement noise kept, integrated by Itô Euler–Maruyama.
//!
//! Only the means receive noise,
//! `d⟨x_i⟩ += 2√γ Σ_j cov(x_i, p_j) dW_j` and `d⟨p_i⟩ += 2√γ Σ_j cov(p_i, p_j) dW_j`.
//! Covariances follow the deterministic drift; for the Sine-Gordon chain
//! they still fluctuate through the surrogate coefficients.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{EquationVariant, Model, MomentumDrift, PpBracket};
use crate::error::{Error, Result};
use crate::gaussian::GaussianState;
use crate::lattice::ChainParams;
use crate::sctdha::{coefficients, HarmonicCoefficients, SineGordonParams};

/// Trajectories per work unit; statistics are merged unit by unit in index
/// order so results do not depend on the thread count.
const BLOCK: usize = 16;

/// RNG stream of trajectory `k`.
pub fn trajectory_rng(master_seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(k as u64);
    rng
}

/// `n` independent Wiener increments with variance `dt`.
pub fn sample_wiener<R: rand::Rng + ?Sized>(rng: &mut R, dt: f64, n: usize) -> Vec<f64> {
    let sd = dt.sqrt();
    (0..n).map(|_| sd * Distribution::<f64>::sample(&StandardNormal, rng)).collect()
}

/// Pair of sites whose relative phase enters `cos(α(⟨x_i⟩ − ⟨x_j⟩))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineProbe {
    pub alpha: f64,
    pub i: usize,
    pub j: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QsdConfig {
    pub gamma: f64,
    pub dt: f64,
    pub t_max: f64,
    pub n_trajectories: usize,
    pub master_seed: u64,
    pub model: Model,
    #[serde(default)]
    pub variant: EquationVariant,
    pub stride: usize,
    /// Force every increment to zero (the most-likely trajectory).
    #[serde(default)]
    pub zero_noise: bool,
    /// Keep every trajectory's `⟨x⟩` at each snapshot.
    #[serde(default)]
    pub record_means: bool,
    #[serde(default)]
    pub cosine: Option<CosineProbe>,
    /// Time window `[t0, t1]` over which each trajectory's snapshots of the
    /// diagonal covariances are averaged before ensemble statistics.
    #[serde(default)]
    pub window: Option<(f64, f64)>,
}

impl QsdConfig {
    /// Defaults: `dt = 10⁻³ / max(ω, γ, J)`, stride 100, noise on.
    pub fn new(gamma: f64, model: Model, omega: f64, t_max: f64, n_trajectories: usize, master_seed: u64) -> Self {
        let scale = omega.max(gamma).max(model.j_coupling());
        Self {
            gamma,
            dt: 1e-3 / scale,
            t_max,
            n_trajectories,
            master_seed,
            model,
            variant: EquationVariant::default(),
            stride: 100,
            zero_noise: false,
            record_means: false,
            cosine: None,
            window: None,
        }
    }

    pub fn validate(&self, chain: &ChainParams) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if !(self.dt > 0.0 && self.t_max > 0.0) || self.stride == 0 || self.n_trajectories == 0 {
            return Err(Error::InvalidParameter("dt, t_max, stride and n_trajectories must be positive".into()));
        }
        let scale = chain.omega.max(self.gamma).max(self.model.j_coupling());
        if self.dt * scale > 0.05 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "dt·max(ω, γ, J) = {} exceeds the Euler–Maruyama limit 0.05",
                self.dt * scale
            )));
        }
        if chain.n_sites < 2 {
            return Err(Error::InvalidParameter("chain dynamics needs at least two sites".into()));
        }
        if let Some(c) = &self.cosine {
            if c.i >= chain.n_sites || c.j >= chain.n_sites {
                return Err(Error::InvalidParameter("cosine probe site out of range".into()));
            }
        }
        Ok(())
    }
}

/// Site-by-site evaluation of the chain drift, written with explicit
/// neighbour sums rather than matrix products.
#[derive(Debug, Clone)]
pub struct QsdStepper {
    n: usize,
    omega: f64,
    gamma: f64,
    r_sq: f64,
    model: Model,
    variant: EquationVariant,
}

impl QsdStepper {
    pub fn new(chain: &ChainParams, gamma: f64, model: Model, variant: EquationVariant) -> Self {
        Self { n: chain.n_sites, omega: chain.omega, gamma, r_sq: chain.regulator(), model, variant }
    }

    fn up(&self, i: usize) -> usize {
        (i + 1) % self.n
    }

    fn down(&self, i: usize) -> usize {
        (i + self.n - 1) % self.n
    }

    pub fn coefficients(&self, s: &GaussianState) -> Option<HarmonicCoefficients> {
        match &self.model {
            Model::Free => None,
            Model::SineGordon(sg) => Some(coefficients(s, sg)),
        }
    }

    /// Drift of `(σ_xx, σ_pp, σ_xp)` for surrogate masses `h` (zero for the free chain).
    pub fn covariance_drift(&self, s: &GaussianState, h: &[f64]) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let (n, w, gam) = (self.n, self.omega, self.gamma);
        let onsite = 2.0 + self.r_sq;
        let pp_onsite = match self.variant.pp_bracket {
            PpBracket::Hamiltonian => onsite,
            PpBracket::PrintedFree => 0.5 * onsite,
        };
        let (xx, pp, xp) = (&s.s_xx, &s.s_pp, &s.s_xp);
        let mut dxx = DMatrix::zeros(n, n);
        let mut dpp = DMatrix::zeros(n, n);
        let mut dxp = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let (mut xpxp, mut pppp, mut xppp) = (0.0, 0.0, 0.0);
                for k in 0..n {
                    xpxp += xp[(i, k)] * xp[(j, k)];
                    pppp += pp[(i, k)] * pp[(k, j)];
                    xppp += xp[(i, k)] * pp[(k, j)];
                }
                let delta = if i == j { 1.0 } else { 0.0 };
                dxx[(i, j)] = w * (xp[(i, j)] + xp[(j, i)]) - 4.0 * gam * xpxp + gam * delta;

                let v_xp = w * (pp_onsite * xp[(i, j)] - xp[(self.up(i), j)] - xp[(self.down(i), j)]) + 2.0 * h[i] * xp[(i, j)];
                let xp_v = w * (pp_onsite * xp[(j, i)] - xp[(self.up(j), i)] - xp[(self.down(j), i)]) + 2.0 * h[j] * xp[(j, i)];
                dpp[(i, j)] = -(v_xp + xp_v) - 4.0 * gam * pppp;

                let xx_v = w * (onsite * xx[(i, j)] - xx[(i, self.up(j))] - xx[(i, self.down(j))]) + 2.0 * h[j] * xx[(i, j)];
                dxp[(i, j)] = w * pp[(i, j)] - xx_v - 4.0 * gam * xppp;
            }
        }
        (dxx, dpp, dxp)
    }

    /// Deterministic drift of the means.
    pub fn mean_drift(&self, s: &GaussianState, coeffs: Option<&HarmonicCoefficients>) -> (DVector<f64>, DVector<f64>) {
        let (n, w) = (self.n, self.omega);
        let onsite = match self.variant.momentum_drift {
            MomentumDrift::Hamiltonian => 2.0 + self.r_sq,
            MomentumDrift::Printed => 2.0,
        };
        let dx = &s.mean_p * w;
        let dp = DVector::from_fn(n, |i, _| {
            let x = &s.mean_x;
            let mut v = -w * (onsite * x[i] - x[self.up(i)] - x[self.down(i)]);
            if let Some(c) = coeffs {
                v -= c.g[i] + 2.0 * c.h[i] * x[i];
            }
            v
        });
        (dx, dp)
    }

    /// Noise on the means for increments `dw`.
    pub fn mean_noise(&self, s: &GaussianState, dw: &[f64]) -> (DVector<f64>, DVector<f64>) {
        let dw = DVector::from_column_slice(dw);
        let amp = 2.0 * self.gamma.sqrt();
        (&s.s_xp * &dw * amp, &s.s_pp * &dw * amp)
    }

    /// One Euler–Maruyama step.
    pub fn step(&self, s: &GaussianState, dt: f64, dw: &[f64]) -> Result<GaussianState> {
        let coeffs = self.coefficients(s);
        let zeros = vec![0.0; self.n];
        let h = coeffs.as_ref().map_or(&zeros[..], |c| c.h.as_slice());
        let (dxx, dpp, dxp) = self.covariance_drift(s, h);
        let mut out = s.clone();
        self.advance_means(&mut out, s, coeffs.as_ref(), dt, dw);
        out.s_xx += dxx * dt;
        out.s_pp += dpp * dt;
        out.s_xp += dxp * dt;
        out.symmetrize();
        if !out.is_finite() {
            return Err(Error::NonFinite { time: f64::NAN, trajectory: None });
        }
        Ok(out)
    }

    fn advance_means(&self, out: &mut GaussianState, s: &GaussianState, coeffs: Option<&HarmonicCoefficients>, dt: f64, dw: &[f64]) {
        let (dx, dp) = self.mean_drift(s, coeffs);
        let (nx, np) = self.mean_noise(s, dw);
        out.mean_x = &s.mean_x + dx * dt + nx;
        out.mean_p = &s.mean_p + dp * dt + np;
    }
}

pub fn qsd_step_free(state: &GaussianState, chain: &ChainParams, gamma: f64, dt: f64, dw: &[f64]) -> Result<GaussianState> {
    QsdStepper::new(chain, gamma, Model::Free, EquationVariant::default()).step(state, dt, dw)
}

pub fn qsd_step_sg(
    state: &GaussianState,
    chain: &ChainParams,
    sg: &SineGordonParams,
    gamma: f64,
    dt: f64,
    dw: &[f64],
) -> Result<GaussianState> {
    QsdStepper::new(chain, gamma, Model::SineGordon(*sg), EquationVariant::default()).step(state, dt, dw)
}

/// One-pass mean and variance with pairwise merging.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    /// Sample standard deviation over `√n`; zero for fewer than two samples.
    pub fn stderr(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        (self.m2 / (self.count - 1) as f64).sqrt() / (self.count as f64).sqrt()
    }

    pub fn summary(&self) -> MeanErr {
        MeanErr { mean: self.mean, stderr: self.stderr() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanErr {
    pub mean: f64,
    pub stderr: f64,
}

/// Per-snapshot, per-site ensemble statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub n_trajectories: usize,
    pub diag_xx: Vec<Vec<MeanErr>>,
    pub diag_pp: Vec<Vec<MeanErr>>,
    pub diag_xp: Vec<Vec<MeanErr>>,
    pub mean_x: Vec<Vec<MeanErr>>,
    pub mean_p: Vec<Vec<MeanErr>>,
    pub cosine: Option<Vec<MeanErr>>,
    pub window: Option<WindowStats>,
    /// `[trajectory][snapshot][site]` when requested.
    pub mean_x_paths: Option<Vec<Vec<Vec<f64>>>>,
}

/// Ensemble statistics of per-trajectory time averages over the window.
/// Index `n` of each vector is the average over sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub t0: f64,
    pub t1: f64,
    pub diag_xx: Vec<MeanErr>,
    pub diag_pp: Vec<MeanErr>,
    pub diag_xp: Vec<MeanErr>,
}

impl EnsembleStats {
    pub fn n_sites(&self) -> usize {
        self.diag_xx.first().map_or(0, Vec::len)
    }
}

struct Accumulator {
    per_snapshot: Vec<Vec<Welford>>,
    window: Vec<Welford>,
    paths: Vec<Vec<Vec<f64>>>,
}

impl Accumulator {
    fn new(n_snap: usize, width: usize, n_sites: usize) -> Self {
        Self {
            per_snapshot: vec![vec![Welford::default(); width]; n_snap],
            window: vec![Welford::default(); 3 * (n_sites + 1)],
            paths: Vec::new(),
        }
    }

    fn merge(&mut self, other: Accumulator) {
        for (a, b) in self.per_snapshot.iter_mut().zip(&other.per_snapshot) {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
        }
        for (x, y) in self.window.iter_mut().zip(&other.window) {
            x.merge(y);
        }
        self.paths.extend(other.paths);
    }
}

fn record(acc: &mut [Welford], s: &GaussianState, cosine: Option<&CosineProbe>) {
    let n = s.n_sites();
    for i in 0..n {
        acc[i].push(s.s_xx[(i, i)]);
        acc[n + i].push(s.s_pp[(i, i)]);
        acc[2 * n + i].push(s.s_xp[(i, i)]);
        acc[3 * n + i].push(s.mean_x[i]);
        acc[4 * n + i].push(s.mean_p[i]);
    }
    if let Some(c) = cosine {
        acc[5 * n].push((c.alpha * (s.mean_x[c.i] - s.mean_x[c.j])).cos());
    }
}

struct Schedule {
    n_steps: usize,
    stride: usize,
}

impl Schedule {
    fn is_snapshot(&self, step: usize) -> bool {
        step.is_multiple_of(self.stride) || step == self.n_steps
    }

    fn times(&self, dt: f64) -> Vec<f64> {
        (0..=self.n_steps).filter(|&s| self.is_snapshot(s)).map(|s| s as f64 * dt).collect()
    }
}

/// Runs `n_trajectories` independent trajectories from `initial`.
/// Trajectory `k` draws its increments from [`trajectory_rng`]`(master_seed, k)`.
pub fn run_ensemble(cfg: &QsdConfig, chain: &ChainParams, initial: &GaussianState) -> Result<EnsembleStats> {
    cfg.validate(chain)?;
    if initial.n_sites() != chain.n_sites {
        return Err(Error::InvalidParameter("initial state size differs from the chain".into()));
    }
    let n = chain.n_sites;
    let stepper = QsdStepper::new(chain, cfg.gamma, cfg.model, cfg.variant);
    let schedule = Schedule { n_steps: (cfg.t_max / cfg.dt).round() as usize, stride: cfg.stride };
    let times = schedule.times(cfg.dt);
    let width = 5 * n + usize::from(cfg.cosine.is_some());

    // Free-chain covariances do not see the noise, so one deterministic path
    // serves every trajectory.
    let shared_covariances = match cfg.model {
        Model::Free => Some(free_covariance_path(&stepper, initial, cfg.dt, schedule.n_steps)?),
        Model::SineGordon(_) => None,
    };

    let n_blocks = cfg.n_trajectories.div_ceil(BLOCK);
    let blocks: Vec<Result<Accumulator>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = Accumulator::new(times.len(), width, n);
            for k in b * BLOCK..((b + 1) * BLOCK).min(cfg.n_trajectories) {
                run_one(cfg, &stepper, &schedule, initial, shared_covariances.as_deref(), k, &mut acc)?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = Accumulator::new(times.len(), width, n);
    for block in blocks {
        total.merge(block?);
    }

    let column = |offset: usize| -> Vec<Vec<MeanErr>> {
        total.per_snapshot.iter().map(|row| row[offset..offset + n].iter().map(Welford::summary).collect()).collect()
    };
    Ok(EnsembleStats {
        times,
        n_trajectories: cfg.n_trajectories,
        diag_xx: column(0),
        diag_pp: column(n),
        diag_xp: column(2 * n),
        mean_x: column(3 * n),
        mean_p: column(4 * n),
        cosine: cfg.cosine.map(|_| total.per_snapshot.iter().map(|row| row[5 * n].summary()).collect()),
        window: cfg.window.map(|(t0, t1)| {
            let part = |k: usize| total.window[k * (n + 1)..(k + 1) * (n + 1)].iter().map(Welford::summary).collect();
            WindowStats { t0, t1, diag_xx: part(0), diag_pp: part(1), diag_xp: part(2) }
        }),
        mean_x_paths: cfg.record_means.then_some(total.paths),
    })
}

type CovarianceTriple = (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>);

fn free_covariance_path(stepper: &QsdStepper, initial: &GaussianState, dt: f64, n_steps: usize) -> Result<Vec<CovarianceTriple>> {
    let zeros = vec![0.0; stepper.n];
    let mut s = initial.clone();
    let mut path = Vec::with_capacity(n_steps + 1);
    for step in 0..=n_steps {
        path.push((s.s_xx.clone(), s.s_pp.clone(), s.s_xp.clone()));
        if step == n_steps {
            break;
        }
        let (dxx, dpp, dxp) = stepper.covariance_drift(&s, &zeros);
        s.s_xx += dxx * dt;
        s.s_pp += dpp * dt;
        s.s_xp += dxp * dt;
        s.symmetrize();
        if !s.is_finite() {
            return Err(Error::NonFinite { time: (step + 1) as f64 * dt, trajectory: None });
        }
    }
    Ok(path)
}

fn run_one(
    cfg: &QsdConfig,
    stepper: &QsdStepper,
    schedule: &Schedule,
    initial: &GaussianState,
    shared: Option<&[CovarianceTriple]>,
    k: usize,
    acc: &mut Accumulator,
) -> Result<()> {
    let n = initial.n_sites();
    let mut rng = trajectory_rng(cfg.master_seed, k);
    let mut s = initial.clone();
    let mut snap = 0;
    let mut path = Vec::new();
    let zero_dw = vec![0.0; n];
    let mut window_sum = vec![0.0; 3 * (n + 1)];
    let mut window_count = 0usize;
    for step in 0..=schedule.n_steps {
        if schedule.is_snapshot(step) {
            record(&mut acc.per_snapshot[snap], &s, cfg.cosine.as_ref());
            let t = step as f64 * cfg.dt;
            if let Some((t0, t1)) = cfg.window {
                if t >= t0 - 1e-9 && t <= t1 + 1e-9 {
                    for (k, block) in [&s.s_xx, &s.s_pp, &s.s_xp].into_iter().enumerate() {
                        let base = k * (n + 1);
                        for i in 0..n {
                            window_sum[base + i] += block[(i, i)];
                            window_sum[base + n] += block[(i, i)] / n as f64;
                        }
                    }
                    window_count += 1;
                }
            }
            if cfg.record_means {
                path.push(s.mean_x.iter().copied().collect());
            }
            snap += 1;
        }
        if step == schedule.n_steps {
            break;
        }
        let dw = if cfg.zero_noise { zero_dw.clone() } else { sample_wiener(&mut rng, cfg.dt, n) };
        let next = match shared {
            Some(path) => {
                let mut next = s.clone();
                stepper.advance_means(&mut next, &s, None, cfg.dt, &dw);
                let (xx, pp, xp) = &path[step + 1];
                next.s_xx.copy_from(xx);
                next.s_pp.copy_from(pp);
                next.s_xp.copy_from(xp);
                next
            }
            None => stepper.step(&s, cfg.dt, &dw).map_err(|_| Error::NonFinite {
                time: (step + 1) as f64 * cfg.dt,
                trajectory: Some(k),
            })?,
        };
        if !next.mean_x.iter().chain(next.mean_p.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite { time: (step + 1) as f64 * cfg.dt, trajectory: Some(k) });
        }
        s = next;
    }
    if cfg.record_means {
        acc.paths.push(path);
    }
    if window_count > 0 {
        for (w, v) in acc.window.iter_mut().zip(&window_sum) {
            w.push(v / window_count as f64);
        }
    }
    Ok(())
}
