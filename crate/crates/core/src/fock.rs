//! Brute-force truncated Fock space evolution of one or two sites under the
//! exact nonlinear most-likely-trajectory master equation
//!
//! ```text
//! dρ = −i[H, ρ] − γ Σ_j {p_j² − ⟨p_j²⟩, ρ} + 2γ Σ_j ⟨p_j⟩ {p_j − ⟨p_j⟩, ρ}
//! ```
//!
//! Used to check the Gaussian moment equations, which are exact for
//! quadratic `H`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{EquationVariant, Generator, Model, PpBracket};
use crate::error::{Error, Result};
use crate::gaussian::GaussianState;
use crate::sctdha::SineGordonParams;

type C = Complex64;

const LEAK_LIMIT: f64 = 1e-8;
const TRACE_DRIFT_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FockSpec {
    /// Levels `0..n_max` per site.
    pub n_max: usize,
    pub n_sites: usize,
    pub dt: f64,
}

impl FockSpec {
    pub fn new(n_max: usize, n_sites: usize, dt: f64) -> Result<Self> {
        if n_max < 4 {
            return Err(Error::InvalidParameter(format!("n_max must be at least 4, got {n_max}")));
        }
        if !(1..=2).contains(&n_sites) {
            return Err(Error::InvalidParameter(format!("the oracle handles 1 or 2 sites, got {n_sites}")));
        }
        if dt.is_nan() || dt <= 0.0 {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        Ok(Self { n_max, n_sites, dt })
    }

    pub fn dim(&self) -> usize {
        self.n_max.pow(self.n_sites as u32)
    }

    fn level(&self, index: usize, site: usize) -> usize {
        if self.n_sites == 1 {
            index
        } else if site == 0 {
            index / self.n_max
        } else {
            index % self.n_max
        }
    }
}

/// Row-sparse complex operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    dim: usize,
    rows: Vec<Vec<(usize, C)>>,
}

impl SparseOp {
    pub fn from_dense(m: &DMatrix<C>) -> Self {
        let dim = m.nrows();
        let rows = (0..dim)
            .map(|i| (0..dim).filter(|&k| m[(i, k)] != C::new(0.0, 0.0)).map(|k| (k, m[(i, k)])).collect())
            .collect();
        Self { dim, rows }
    }

    pub fn to_dense(&self) -> DMatrix<C> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, row) in self.rows.iter().enumerate() {
            for &(k, v) in row {
                m[(i, k)] += v;
            }
        }
        m
    }

    /// `self · rho`.
    pub fn apply(&self, rho: &DMatrix<C>) -> DMatrix<C> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        self.apply_into(rho, &mut out);
        out
    }

    pub fn apply_into(&self, rho: &DMatrix<C>, out: &mut DMatrix<C>) {
        for j in 0..self.dim {
            let col = rho.column(j);
            for (i, row) in self.rows.iter().enumerate() {
                let mut acc = C::new(0.0, 0.0);
                for &(k, v) in row {
                    acc += v * col[k];
                }
                out[(i, j)] = acc;
            }
        }
    }

    /// `tr(self · rho)`.
    pub fn expect(&self, rho: &DMatrix<C>) -> C {
        self.rows.iter().enumerate().map(|(i, row)| row.iter().map(|&(k, v)| v * rho[(k, i)]).sum::<C>()).sum()
    }

    /// Maximum absolute row sum, an upper bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        self.rows.iter().map(|r| r.iter().map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn scaled_sum(terms: &[(f64, &SparseOp)]) -> SparseOp {
        let dim = terms[0].1.dim;
        let mut dense = DMatrix::zeros(dim, dim);
        for (c, op) in terms {
            dense += op.to_dense() * C::new(*c, 0.0);
        }
        SparseOp::from_dense(&dense)
    }
}

/// Quadratures of one site embedded in the full space.
#[derive(Debug, Clone)]
pub struct SiteOperators {
    pub x: SparseOp,
    pub p: SparseOp,
    pub x2: SparseOp,
    pub p2: SparseOp,
    pub cos_ax: Option<SparseOp>,
}

fn single_site_ladder(n: usize) -> DMatrix<C> {
    let mut a = DMatrix::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = C::new((k as f64).sqrt(), 0.0);
    }
    a
}

fn embed(op: &DMatrix<C>, spec: &FockSpec, site: usize) -> DMatrix<C> {
    if spec.n_sites == 1 {
        return op.clone();
    }
    let id = DMatrix::<C>::identity(spec.n_max, spec.n_max);
    if site == 0 {
        op.kronecker(&id)
    } else {
        id.kronecker(op)
    }
}

/// `x = (a + a†)/√2`, `p = i(a† − a)/√2` per site, and `cos(αx)` from the
/// spectral decomposition of the truncated `x` when `alpha` is given.
pub fn build_operators(spec: &FockSpec, alpha: Option<f64>) -> Vec<SiteOperators> {
    let n = spec.n_max;
    let a = single_site_ladder(n);
    let ad = a.adjoint();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let x = (&a + &ad) * C::new(s, 0.0);
    let p = (&ad - &a) * C::new(0.0, s);
    let cos_ax = alpha.map(|al| {
        let eig = x.clone().symmetric_eigen();
        let f = DMatrix::from_diagonal(&DVector::from_fn(n, |k, _| C::new((al * eig.eigenvalues[k]).cos(), 0.0)));
        &eig.eigenvectors * f * eig.eigenvectors.adjoint()
    });
    (0..spec.n_sites)
        .map(|site| SiteOperators {
            x: SparseOp::from_dense(&embed(&x, spec, site)),
            p: SparseOp::from_dense(&embed(&p, spec, site)),
            x2: SparseOp::from_dense(&embed(&(&x * &x), spec, site)),
            p2: SparseOp::from_dense(&embed(&(&p * &p), spec, site)),
            cos_ax: cos_ax.as_ref().map(|c| SparseOp::from_dense(&embed(c, spec, site))),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub data: DMatrix<C>,
}

impl DensityMatrix {
    /// Product of coherent states with the given quadrature means.
    pub fn coherent(spec: &FockSpec, mean_x: &[f64], mean_p: &[f64]) -> Self {
        let site_vec = |x0: f64, p0: f64| -> DVector<C> {
            let beta = C::new(x0, p0) * std::f64::consts::FRAC_1_SQRT_2;
            let mut v = DVector::zeros(spec.n_max);
            let mut c = C::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
            for k in 0..spec.n_max {
                v[k] = c;
                c *= beta / ((k + 1) as f64).sqrt();
            }
            v
        };
        Self::from_product(spec, (0..spec.n_sites).map(|s| site_vec(mean_x[s], mean_p[s])).collect())
    }

    /// Product of squeezed vacua, `S(r_j)|0⟩` with `σ_xx = e^{−2r_j}/2` on site `j`.
    pub fn squeezed_vacuum(spec: &FockSpec, squeeze: &[f64]) -> Self {
        let site_vec = |r: f64| -> DVector<C> {
            let t = -r.tanh();
            let mut v = DVector::zeros(spec.n_max);
            // amplitude of |2k⟩ is t^k √((2k)!) / (2^k k!) / √cosh r
            let mut c = 1.0 / r.cosh().sqrt();
            let mut k = 0;
            while 2 * k < spec.n_max {
                v[2 * k] = C::new(c, 0.0);
                c *= t * ((2 * k + 1) as f64 * (2 * k + 2) as f64).sqrt() / (2.0 * (k + 1) as f64);
                k += 1;
            }
            v
        };
        Self::from_product(spec, squeeze.iter().map(|&r| site_vec(r)).collect())
    }

    fn from_product(spec: &FockSpec, sites: Vec<DVector<C>>) -> Self {
        let mut psi = sites[0].clone();
        for s in sites.iter().take(spec.n_sites).skip(1) {
            psi = psi.kronecker(s);
        }
        let norm = psi.norm();
        psi /= C::new(norm, 0.0);
        Self { data: &psi * psi.adjoint() }
    }

    pub fn vacuum(spec: &FockSpec) -> Self {
        Self::coherent(spec, &vec![0.0; spec.n_sites], &vec![0.0; spec.n_sites])
    }

    pub fn trace(&self) -> f64 {
        self.data.trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        max_norm(&(&self.data - self.data.adjoint()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.data.clone().symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Population with any site in its top two levels.
    pub fn truncation_leak(&self, spec: &FockSpec) -> f64 {
        (0..spec.dim())
            .filter(|&i| (0..spec.n_sites).any(|s| spec.level(i, s) + 2 >= spec.n_max))
            .map(|i| self.data[(i, i)].re)
            .sum()
    }

    fn renormalize(&mut self) {
        self.data = (&self.data + self.data.adjoint()) * C::new(0.5, 0.0);
        let tr = self.trace();
        self.data /= C::new(tr, 0.0);
    }

    /// First and second moments as a Gaussian state.
    pub fn moments(&self, ops: &[SiteOperators]) -> GaussianState {
        let n = ops.len();
        let rho = &self.data;
        let mut s = GaussianState::zeros(n);
        for (i, o) in ops.iter().enumerate() {
            s.mean_x[i] = o.x.expect(rho).re;
            s.mean_p[i] = o.p.expect(rho).re;
        }
        let xr: Vec<_> = ops.iter().map(|o| o.x.apply(rho)).collect();
        let pr: Vec<_> = ops.iter().map(|o| o.p.apply(rho)).collect();
        for i in 0..n {
            for j in 0..n {
                let xx = ops[i].x.expect(&xr[j]).re;
                let pp = ops[i].p.expect(&pr[j]).re;
                // ½⟨x_i p_j + p_j x_i⟩
                let xp = 0.5 * (ops[i].x.expect(&pr[j]).re + ops[j].p.expect(&xr[i]).re);
                s.s_xx[(i, j)] = xx - s.mean_x[i] * s.mean_x[j];
                s.s_pp[(i, j)] = pp - s.mean_p[i] * s.mean_p[j];
                s.s_xp[(i, j)] = xp - s.mean_x[i] * s.mean_p[j];
            }
        }
        s
    }
}

fn max_norm(m: &DMatrix<C>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

fn rhs(rho: &DMatrix<C>, h: &SparseOp, ops: &[SiteOperators], gamma: f64) -> DMatrix<C> {
    let d_ = rho.nrows();
    let mut a = DMatrix::zeros(d_, d_);
    let mut b = DMatrix::zeros(d_, d_);
    h.apply_into(rho, &mut a);
    // −i(Hρ − ρH) with ρH = (Hρ)†
    let mut d = DMatrix::from_fn(d_, d_, |i, j| (a[(i, j)] - a[(j, i)].conj()) * C::new(0.0, -1.0));
    for o in ops {
        o.p2.apply_into(rho, &mut a);
        o.p.apply_into(rho, &mut b);
        let p2 = a.trace().re;
        let p1 = b.trace().re;
        for j in 0..d_ {
            for i in 0..d_ {
                let r = rho[(i, j)];
                let anti2 = a[(i, j)] + a[(j, i)].conj() - r * (2.0 * p2);
                let anti1 = b[(i, j)] + b[(j, i)].conj() - r * (2.0 * p1);
                d[(i, j)] += anti1 * (2.0 * gamma * p1) - anti2 * gamma;
            }
        }
    }
    d
}

/// One RK4 step of the nonlinear master equation, then re-Hermitization
/// and trace renormalization.
pub fn mlt_master_step(rho: &DensityMatrix, h: &SparseOp, ops: &[SiteOperators], gamma: f64, dt: f64) -> Result<DensityMatrix> {
    let bound = dt * (gamma * ops.iter().map(|o| o.p2.norm_bound()).sum::<f64>() + h.norm_bound());
    if bound > 0.05 {
        return Err(Error::InvalidParameter(format!("dt·(γ‖p²‖ + ‖H‖) = {bound} exceeds 0.05")));
    }
    let r = &rho.data;
    let half = C::new(0.5 * dt, 0.0);
    let k1 = rhs(r, h, ops, gamma);
    let k2 = rhs(&(r + &k1 * half), h, ops, gamma);
    let k3 = rhs(&(r + &k2 * half), h, ops, gamma);
    let k4 = rhs(&(r + &k3 * C::new(dt, 0.0)), h, ops, gamma);
    let data = r + (k1 + k2 * C::new(2.0, 0.0) + k3 * C::new(2.0, 0.0) + k4) * C::new(dt / 6.0, 0.0);
    let mut out = DensityMatrix { data };
    if !out.data.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::NonFinite { time: f64::NAN, trajectory: None });
    }
    let drift = (out.trace() - 1.0).abs();
    if drift > TRACE_DRIFT_LIMIT {
        return Err(Error::TraceDrift { drift, limit: TRACE_DRIFT_LIMIT });
    }
    out.renormalize();
    Ok(out)
}

/// `M_r ρ M_r` for `M_r = (2γdt/π)^{1/4} exp(−γ dt (r − p)²)`, and its trace,
/// the probability density of readout `r`. `p` is a single site's momentum.
pub fn kraus_apply(rho: &DensityMatrix, r: f64, p: &SparseOp, gamma: f64, dt: f64) -> (DMatrix<C>, f64) {
    let eig = p.to_dense().symmetric_eigen();
    let pre = (2.0 * gamma * dt / std::f64::consts::PI).powf(0.25);
    let diag = DVector::from_fn(eig.eigenvalues.len(), |k, _| {
        C::new(pre * (-gamma * dt * (r - eig.eigenvalues[k]).powi(2)).exp(), 0.0)
    });
    let m = &eig.eigenvectors * DMatrix::from_diagonal(&diag) * eig.eigenvectors.adjoint();
    let out = &m * &rho.data * &m;
    let w = out.trace().re;
    (out, w)
}

/// Hamiltonians the oracle can integrate.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleHamiltonian {
    /// `H = (ω/2)(Σ p_j² + xᵀ K x)` for symmetric `K`.
    Quadratic { omega: f64, stiffness: DMatrix<f64> },
    /// One site, `H = (ω/2)(p² + r² x²) − (J/α²) cos(αx)`.
    SineGordonSite { omega: f64, r_sq: f64, sg: SineGordonParams },
}

impl OracleHamiltonian {
    pub fn n_sites(&self) -> usize {
        match self {
            Self::Quadratic { stiffness, .. } => stiffness.nrows(),
            Self::SineGordonSite { .. } => 1,
        }
    }

    fn alpha(&self) -> Option<f64> {
        match self {
            Self::SineGordonSite { sg, .. } => Some(sg.alpha),
            _ => None,
        }
    }

    fn build(&self, ops: &[SiteOperators]) -> SparseOp {
        match self {
            Self::Quadratic { omega, stiffness } => {
                let n = ops.len();
                let mut dense = DMatrix::zeros(ops[0].x.dim, ops[0].x.dim);
                for i in 0..n {
                    dense += ops[i].p2.to_dense() * C::new(0.5 * omega, 0.0);
                    for j in 0..n {
                        let xx = if i == j { ops[i].x2.to_dense() } else { ops[i].x.to_dense() * ops[j].x.to_dense() };
                        dense += xx * C::new(0.5 * omega * stiffness[(i, j)], 0.0);
                    }
                }
                SparseOp::from_dense(&dense)
            }
            Self::SineGordonSite { omega, r_sq, sg } => {
                let o = &ops[0];
                let cos = o.cos_ax.as_ref().expect("cos(αx) built for Sine-Gordon oracle");
                SparseOp::scaled_sum(&[
                    (0.5 * omega, &o.p2),
                    (0.5 * omega * r_sq, &o.x2),
                    (-sg.j_coupling / (sg.alpha * sg.alpha), cos),
                ])
            }
        }
    }

    /// The Gaussian generator with the same physics (the surrogate for the cosine).
    pub fn gaussian_generator(&self, gamma: f64, variant: EquationVariant) -> Generator {
        match self {
            Self::Quadratic { omega, stiffness } => {
                Generator::from_stiffness(*omega, stiffness.clone(), 0.0, gamma, Model::Free, variant)
            }
            Self::SineGordonSite { omega, r_sq, sg } => {
                Generator::single_site(*omega, *r_sq, gamma, Model::SineGordon(*sg), variant)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleSeries {
    pub times: Vec<f64>,
    pub moments: Vec<GaussianState>,
    pub max_leak: f64,
    pub max_hermiticity_error: f64,
}

/// Exact nonlinear evolution from a coherent state, with moments every
/// `stride` steps. Aborts if the top two levels ever hold more than 1e-8.
pub fn oracle_run(
    spec: &FockSpec,
    hamiltonian: &OracleHamiltonian,
    gamma: f64,
    mean_x: &[f64],
    mean_p: &[f64],
    t_max: f64,
    stride: usize,
) -> Result<OracleSeries> {
    if hamiltonian.n_sites() != spec.n_sites || mean_x.len() != spec.n_sites || mean_p.len() != spec.n_sites {
        return Err(Error::InvalidParameter("oracle site counts disagree".into()));
    }
    oracle_run_from(spec, hamiltonian, gamma, DensityMatrix::coherent(spec, mean_x, mean_p), t_max, stride)
}

/// [`oracle_run`] from an arbitrary initial density matrix.
pub fn oracle_run_from(
    spec: &FockSpec,
    hamiltonian: &OracleHamiltonian,
    gamma: f64,
    mut rho: DensityMatrix,
    t_max: f64,
    stride: usize,
) -> Result<OracleSeries> {
    if hamiltonian.n_sites() != spec.n_sites || rho.data.nrows() != spec.dim() {
        return Err(Error::InvalidParameter("oracle dimensions disagree".into()));
    }
    let ops = build_operators(spec, hamiltonian.alpha());
    let h = hamiltonian.build(&ops);
    let n_steps = (t_max / spec.dt).round() as usize;
    let mut series = OracleSeries { times: Vec::new(), moments: Vec::new(), max_leak: 0.0, max_hermiticity_error: 0.0 };
    for step in 0..=n_steps {
        let t = step as f64 * spec.dt;
        let leak = rho.truncation_leak(spec);
        series.max_leak = series.max_leak.max(leak);
        if leak > LEAK_LIMIT {
            return Err(Error::TruncationLeak { leak, limit: LEAK_LIMIT, time: t });
        }
        if step % stride == 0 || step == n_steps {
            series.times.push(t);
            series.moments.push(rho.moments(&ops));
            series.max_hermiticity_error = series.max_hermiticity_error.max(rho.hermiticity_error());
        }
        if step == n_steps {
            break;
        }
        rho = mlt_master_step(&rho, &h, &ops, gamma, spec.dt)?;
    }
    Ok(series)
}

/// Gaussian moment equations sampled on the oracle's snapshot times.
pub fn gaussian_reference(initial: &GaussianState, generator: &Generator, dt: f64, times: &[f64]) -> Vec<GaussianState> {
    let mut s = initial.clone();
    let mut t = 0.0;
    let mut step = 0usize;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        while t < target - 0.5 * dt {
            s = generator.rk4_step(&s, dt, None);
            step += 1;
            t = step as f64 * dt;
        }
        out.push(s.clone());
    }
    out
}

/// Largest absolute moment difference over a series.
pub fn max_deviation(a: &[GaussianState], b: &[GaussianState]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let mut d = x.clone();
            d.axpy(-1.0, y);
            d.max_abs()
        })
        .fold(0.0, f64::max)
}

/// Largest relative difference of the diagonal second moments over a series.
pub fn max_relative_variance_deviation(oracle: &[GaussianState], gaussian: &[GaussianState]) -> f64 {
    oracle
        .iter()
        .zip(gaussian)
        .flat_map(|(o, g)| {
            let n = o.n_sites();
            (0..n).flat_map(move |i| {
                [
                    ((o.s_xx[(i, i)] - g.s_xx[(i, i)]) / o.s_xx[(i, i)]).abs(),
                    ((o.s_pp[(i, i)] - g.s_pp[(i, i)]) / o.s_pp[(i, i)]).abs(),
                ]
            })
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BracketReport {
    pub hamiltonian_deviation: f64,
    pub printed_deviation: f64,
    pub winner: PpBracket,
}

/// Runs the oracle once and scores both `σ_pp` bracket conventions of the
/// Gaussian equations against it.
pub fn select_bracket_variant(
    spec: &FockSpec,
    hamiltonian: &OracleHamiltonian,
    gamma: f64,
    mean_x: &[f64],
    mean_p: &[f64],
    t_max: f64,
) -> Result<BracketReport> {
    let series = oracle_run(spec, hamiltonian, gamma, mean_x, mean_p, t_max, 10)?;
    let initial = &series.moments[0];
    let score = |pp_bracket| {
        let variant = EquationVariant { pp_bracket, ..Default::default() };
        let reference = gaussian_reference(initial, &hamiltonian.gaussian_generator(gamma, variant), spec.dt, &series.times);
        max_deviation(&series.moments, &reference)
    };
    let hamiltonian_deviation = score(PpBracket::Hamiltonian);
    let printed_deviation = score(PpBracket::PrintedFree);
    let winner = if hamiltonian_deviation <= printed_deviation { PpBracket::Hamiltonian } else { PpBracket::PrintedFree };
    Ok(BracketReport { hamiltonian_deviation, printed_deviation, winner })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_commutator() {
        let spec = FockSpec::new(12, 1, 1e-3).unwrap();
        let ops = build_operators(&spec, Some(0.0));
        let x = ops[0].x.to_dense();
        let p = ops[0].p.to_dense();
        let comm = &x * &p - &p * &x;
        for i in 0..10 {
            for j in 0..10 {
                let want = if i == j { C::new(0.0, 1.0) } else { C::new(0.0, 0.0) };
                assert!((comm[(i, j)] - want).norm() < 1e-13);
            }
        }
        let cos = ops[0].cos_ax.as_ref().unwrap().to_dense();
        assert!(max_norm(&(cos - DMatrix::<C>::identity(12, 12))) < 1e-12);
    }

    #[test]
    fn vacuum_moments() {
        let spec = FockSpec::new(10, 2, 1e-3).unwrap();
        let ops = build_operators(&spec, None);
        let m = DensityMatrix::vacuum(&spec).moments(&ops);
        assert!((m.s_xx[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((m.s_pp[(1, 1)] - 0.5).abs() < 1e-14);
        assert!(m.s_xp.amax() < 1e-14 && m.s_xx[(0, 1)].abs() < 1e-14);
    }

    #[test]
    fn coherent_state_means() {
        let spec = FockSpec::new(30, 1, 1e-3).unwrap();
        let ops = build_operators(&spec, None);
        let m = DensityMatrix::coherent(&spec, &[0.7], &[-0.4]).moments(&ops);
        assert!((m.mean_x[0] - 0.7).abs() < 1e-12);
        assert!((m.mean_p[0] + 0.4).abs() < 1e-12);
        assert!((m.s_xx[(0, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn squeezed_vacuum_variances() {
        let spec = FockSpec::new(40, 2, 1e-3).unwrap();
        let ops = build_operators(&spec, None);
        let m = DensityMatrix::squeezed_vacuum(&spec, &[0.3, 0.0]).moments(&ops);
        assert!((m.s_xx[(0, 0)] - 0.5 * (-0.6f64).exp()).abs() < 1e-10);
        assert!((m.s_pp[(0, 0)] - 0.5 * 0.6f64.exp()).abs() < 1e-10);
        assert!((m.s_xx[(1, 1)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unitary_evolution_is_isospectral() {
        let spec = FockSpec::new(20, 1, 1e-3).unwrap();
        let ops = build_operators(&spec, None);
        let h = OracleHamiltonian::Quadratic { omega: 1.0, stiffness: DMatrix::from_element(1, 1, 0.6) }.build(&ops);
        // a mixed state: average of two coherent states
        let a = DensityMatrix::coherent(&spec, &[0.5], &[0.0]);
        let b = DensityMatrix::coherent(&spec, &[-0.3], &[0.4]);
        let mut rho = DensityMatrix { data: (a.data * C::new(0.7, 0.0)) + b.data * C::new(0.3, 0.0) };
        let before = rho.data.clone().symmetric_eigen().eigenvalues;
        for _ in 0..200 {
            rho = mlt_master_step(&rho, &h, &ops, 0.0, spec.dt).unwrap();
        }
        let mut x: Vec<f64> = before.iter().copied().collect();
        let mut y: Vec<f64> = rho.data.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        x.sort_by(f64::total_cmp);
        y.sort_by(f64::total_cmp);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn measurement_spreads_positions_at_rate_gamma() {
        let spec = FockSpec::new(20, 1, 1e-3).unwrap();
        let ops = build_operators(&spec, None);
        let h = SparseOp::from_dense(&DMatrix::zeros(20, 20));
        let gamma = 0.5;
        let rho = mlt_master_step(&DensityMatrix::vacuum(&spec), &h, &ops, gamma, spec.dt).unwrap();
        let grow = rho.moments(&ops).s_xx[(0, 0)] - 0.5;
        assert!((grow / (gamma * spec.dt) - 1.0).abs() < 0.1);
    }

    #[test]
    fn step_guard() {
        let spec = FockSpec::new(20, 1, 0.1).unwrap();
        let ops = build_operators(&spec, None);
        let h = SparseOp::from_dense(&DMatrix::zeros(20, 20));
        assert!(mlt_master_step(&DensityMatrix::vacuum(&spec), &h, &ops, 1.0, 0.1).is_err());
    }

    #[test]
    fn kraus_weights() {
        let spec = FockSpec::new(30, 1, 1e-2).unwrap();
        let ops = build_operators(&spec, None);
        let rho = DensityMatrix::coherent(&spec, &[0.2], &[0.6]);
        let (gamma, dt) = (1.0f64, 0.01);
        let width = 1.0 / (4.0 * gamma * dt).sqrt();
        // weak limit
        let (out, w) = kraus_apply(&rho, 0.6, &ops[0].p, gamma, dt);
        let scaled = out / C::new(w, 0.0);
        assert!(max_norm(&(scaled - &rho.data)) < 10.0 * gamma * dt * ops[0].p2.norm_bound());
        // completeness and argmax
        let grid: Vec<f64> = (0..=1600).map(|k| 0.6 - 8.0 * width + k as f64 * 16.0 * width / 1600.0).collect();
        let h = grid[1] - grid[0];
        let weights: Vec<f64> = grid.iter().map(|&r| kraus_apply(&rho, r, &ops[0].p, gamma, dt).1).collect();
        let total: f64 = weights.iter().sum::<f64>() * h;
        assert!((total - 1.0).abs() < 1e-6, "total {total}");
        let (imax, _) = weights.iter().enumerate().fold((0, 0.0), |a, (i, &w)| if w > a.1 { (i, w) } else { a });
        assert!((grid[imax] - 0.6).abs() <= h);
    }

    #[test]
    fn leak_is_reported() {
        let spec = FockSpec::new(8, 1, 1e-3).unwrap();
        let h = OracleHamiltonian::Quadratic { omega: 1.0, stiffness: DMatrix::from_element(1, 1, 1.0) };
        match oracle_run(&spec, &h, 0.0, &[2.0], &[0.0], 0.01, 1) {
            Err(Error::TruncationLeak { .. }) => {}
            other => panic!("expected a leak, got {other:?}"),
        }
    }
}
