//! Gaussian many-body states: first moments, covariance blocks and the
//! symplectic spectrum.
//!
//! Conventions: `[x_j, p_k] = i δ_jk`, vacuum variances `1/2`, and
//! `σ_xp^{ij} = ½⟨{x_i, p_j}⟩ − ⟨x_i⟩⟨p_j⟩`. `σ_px` is always `σ_xpᵀ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// First moments and covariance blocks of a Gaussian state.
///
/// The same type doubles as the time derivative returned by the moment
/// equations, in which case the blocks need not be physical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    pub mean_x: DVector<f64>,
    pub mean_p: DVector<f64>,
    pub s_xx: DMatrix<f64>,
    pub s_pp: DMatrix<f64>,
    pub s_xp: DMatrix<f64>,
}

impl GaussianState {
    pub fn vacuum(n: usize) -> Self {
        Self {
            mean_x: DVector::zeros(n),
            mean_p: DVector::zeros(n),
            s_xx: DMatrix::identity(n, n) * 0.5,
            s_pp: DMatrix::identity(n, n) * 0.5,
            s_xp: DMatrix::zeros(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            mean_x: DVector::zeros(n),
            mean_p: DVector::zeros(n),
            s_xx: DMatrix::zeros(n, n),
            s_pp: DMatrix::zeros(n, n),
            s_xp: DMatrix::zeros(n, n),
        }
    }

    /// Split a `2N × 2N` covariance in the `(x_1..x_N, p_1..p_N)` basis back
    /// into blocks, with zero means.
    pub fn from_covariance(cov: &CovarianceMatrix) -> Self {
        let n = cov.n_modes();
        let d = &cov.data;
        Self {
            mean_x: DVector::zeros(n),
            mean_p: DVector::zeros(n),
            s_xx: d.view((0, 0), (n, n)).into_owned(),
            s_pp: d.view((n, n), (n, n)).into_owned(),
            s_xp: d.view((0, n), (n, n)).into_owned(),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.mean_x.len()
    }

    /// `self += a · other`, block by block.
    pub fn axpy(&mut self, a: f64, other: &GaussianState) {
        self.mean_x.axpy(a, &other.mean_x, 1.0);
        self.mean_p.axpy(a, &other.mean_p, 1.0);
        self.s_xx.zip_apply(&other.s_xx, |u, v| *u += a * v);
        self.s_pp.zip_apply(&other.s_pp, |u, v| *u += a * v);
        self.s_xp.zip_apply(&other.s_xp, |u, v| *u += a * v);
    }

    /// Largest absolute entry over all five blocks.
    pub fn max_abs(&self) -> f64 {
        [
            self.mean_x.amax(),
            self.mean_p.amax(),
            self.s_xx.amax(),
            self.s_pp.amax(),
            self.s_xp.amax(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.mean_x.iter().all(|v| v.is_finite())
            && self.mean_p.iter().all(|v| v.is_finite())
            && self.s_xx.iter().all(|v| v.is_finite())
            && self.s_pp.iter().all(|v| v.is_finite())
            && self.s_xp.iter().all(|v| v.is_finite())
    }

    /// `M ← (M + Mᵀ)/2` for `s_xx` and `s_pp`.
    pub fn symmetrize(&mut self) {
        symmetrize_in_place(&mut self.s_xx);
        symmetrize_in_place(&mut self.s_pp);
    }

    pub fn assemble_covariance(&self) -> CovarianceMatrix {
        let n = self.n_sites();
        let mut data = DMatrix::zeros(2 * n, 2 * n);
        data.view_mut((0, 0), (n, n)).copy_from(&self.s_xx);
        data.view_mut((n, n), (n, n)).copy_from(&self.s_pp);
        data.view_mut((0, n), (n, n)).copy_from(&self.s_xp);
        data.view_mut((n, 0), (n, n)).copy_from(&self.s_xp.transpose());
        CovarianceMatrix { data }
    }

    /// Translation-averaged momentum correlations `C(d) = ⟨σ_pp^{i,i+d}⟩_i`
    /// for `d = 0..=N/2`.
    pub fn momentum_correlation_profile(&self) -> Vec<f64> {
        translation_average(&self.s_pp)
    }

    /// Same as [`Self::momentum_correlation_profile`] for `σ_xx`.
    pub fn position_correlation_profile(&self) -> Vec<f64> {
        translation_average(&self.s_xx)
    }
}

fn translation_average(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    (0..=n / 2)
        .map(|d| (0..n).map(|i| m[(i, (i + d) % n)]).sum::<f64>() / n as f64)
        .collect()
}

pub(crate) fn symmetrize_in_place(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Real symmetric `2N × 2N` covariance in the `(x_1..x_N, p_1..p_N)` basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix {
    pub data: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() != data.ncols() || !data.nrows().is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "covariance must be square with even dimension, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        let asym = (&data - data.transpose()).amax();
        if asym > 1e-10 {
            return Err(Error::InvalidParameter(format!("covariance asymmetric by {asym:e}")));
        }
        Ok(Self { data })
    }

    pub fn n_modes(&self) -> usize {
        self.data.nrows() / 2
    }

    /// Symplectic eigenvalues `ν_1 ≤ … ≤ ν_N`, the moduli of the eigenvalues
    /// of `iΩσ` with `Ω = [[0, I], [−I, 0]]`.
    ///
    /// With `σ = L Lᵀ`, the antisymmetric matrix `B = Lᵀ Ω L` satisfies
    /// `spec(BᵀB) = spec(−ΩσΩσ) = {ν²}`, each value twice, so only a Cholesky
    /// factorization and a symmetric eigensolve are needed.
    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        let n = self.n_modes();
        let chol = self
            .data
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Eigen("covariance is not positive definite".into()))?;
        let l = chol.l();
        // Ω L: rows 0..n take L's p-rows, rows n..2n take −(x-rows).
        let mut omega_l = DMatrix::zeros(2 * n, 2 * n);
        omega_l.rows_mut(0, n).copy_from(&l.rows(n, n));
        omega_l.rows_mut(n, n).copy_from(&(-l.rows(0, n)));
        let b = l.transpose() * omega_l;
        let btb = b.transpose() * &b;
        let eig = btb.symmetric_eigen();
        let mut vals: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Eigen("non-finite symplectic eigenvalue".into()));
        }
        vals.sort_by(f64::total_cmp);
        let paired = vals.chunks_exact(2).map(|pair| 0.5 * (pair[0] + pair[1])).collect::<Vec<_>>();
        for (k, pair) in vals.chunks_exact(2).enumerate() {
            let rel = (pair[0] - pair[1]).abs() / pair[1].max(f64::MIN_POSITIVE);
            if rel > 1e-8 {
                log::debug!("symplectic pair {k} mismatch {rel:e}");
            }
        }
        Ok(paired)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_physical_state, single_mode_squeezer};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn vacuum_single_mode() {
        let s = GaussianState::vacuum(1);
        assert_eq!(s.s_xx[(0, 0)], 0.5);
        assert_eq!(s.s_pp[(0, 0)], 0.5);
        assert_eq!(s.s_xp[(0, 0)], 0.0);
    }

    #[test]
    fn vacuum_is_pure() {
        let nu = GaussianState::vacuum(4).assemble_covariance().symplectic_eigenvalues().unwrap();
        assert_eq!(nu.len(), 4);
        for v in nu {
            assert!((v - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn assembled_blocks() {
        let cov = GaussianState::vacuum(2).assemble_covariance();
        assert_eq!(cov.data, DMatrix::identity(4, 4) * 0.5);

        let mut s = GaussianState::vacuum(2);
        s.s_xp = DMatrix::from_row_slice(2, 2, &[0.1, 0.2, 0.3, 0.4]);
        let cov = s.assemble_covariance();
        assert_eq!(cov.data[(0, 3)], 0.2);
        assert_eq!(cov.data[(3, 0)], 0.2);
        assert_eq!(cov.data[(1, 2)], 0.3);
        assert_eq!(cov.data[(2, 1)], 0.3);
    }

    #[test]
    fn random_state_block_reads() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = random_physical_state(&mut rng, 5, 0.3);
        let cov = s.assemble_covariance();
        let n = 5;
        for i in 0..n {
            for j in 0..n {
                assert_eq!(cov.data[(i, j)], s.s_xx[(i, j)]);
                assert_eq!(cov.data[(n + i, n + j)], s.s_pp[(i, j)]);
                assert_eq!(cov.data[(i, n + j)], s.s_xp[(i, j)]);
                assert_eq!(cov.data[(n + j, i)], s.s_xp[(i, j)]);
            }
        }
        let back = GaussianState::from_covariance(&cov);
        assert_eq!(back.s_xp, s.s_xp);
    }

    #[test]
    fn squeezed_and_thermal_diagonals() {
        let n = 3;
        let (a, b) = (2.0, 0.125);
        let diag = DVector::from_iterator(2 * n, (0..2 * n).map(|k| if k < n { a } else { b }));
        let nu = CovarianceMatrix::new(DMatrix::from_diagonal(&diag)).unwrap().symplectic_eigenvalues().unwrap();
        assert!(nu.iter().all(|v| (v - 0.5).abs() < 1e-12));

        let (a, b) = (4.0, 0.25);
        let diag = DVector::from_iterator(2 * n, (0..2 * n).map(|k| if k < n { a } else { b }));
        let nu = CovarianceMatrix::new(DMatrix::from_diagonal(&diag)).unwrap().symplectic_eigenvalues().unwrap();
        assert!(nu.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn matches_complex_eigen_route() {
        // Moduli of the eigenvalues of Ωσ through a real Schur decomposition.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1usize, 2, 5, 9] {
            let s = random_physical_state(&mut rng, n, 1.0);
            let cov = s.assemble_covariance();
            let mut omega = DMatrix::zeros(2 * n, 2 * n);
            for i in 0..n {
                omega[(i, n + i)] = 1.0;
                omega[(n + i, i)] = -1.0;
            }
            let ev = (omega * &cov.data).complex_eigenvalues();
            let mut moduli: Vec<f64> = ev.iter().map(|z| z.norm()).collect();
            moduli.sort_by(f64::total_cmp);
            let oracle: Vec<f64> = moduli.chunks_exact(2).map(|p| 0.5 * (p[0] + p[1])).collect();
            let nu = cov.symplectic_eigenvalues().unwrap();
            for (a, b) in nu.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-9 * b.max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn invariant_under_squeezing() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_physical_state(&mut rng, 4, 0.8);
        let cov = s.assemble_covariance();
        let before = cov.symplectic_eigenvalues().unwrap();
        let sq = single_mode_squeezer(4, 2, 0.7);
        let after = CovarianceMatrix::new({
            let m = &sq * &cov.data * sq.transpose();
            (&m + m.transpose()) * 0.5
        })
        .unwrap()
        .symplectic_eigenvalues()
        .unwrap();
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn profile_of_vacuum_and_circulant() {
        let p = GaussianState::vacuum(6).momentum_correlation_profile();
        assert_eq!(p, vec![0.5, 0.0, 0.0, 0.0]);

        let n = 7;
        let c = [1.0, 0.3, -0.1, 0.05];
        let mut s = GaussianState::vacuum(n);
        for i in 0..n {
            for j in 0..n {
                let d = (j + n - i) % n;
                s.s_pp[(i, j)] = c[d.min(n - d)];
            }
        }
        let p = s.momentum_correlation_profile();
        for (d, v) in p.iter().enumerate().take(n / 2 + 1) {
            assert!((v - s.s_pp[(2, (2 + d) % n)]).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_asymmetric_covariance() {
        let mut m = DMatrix::identity(4, 4);
        m[(0, 1)] = 0.3;
        assert!(CovarianceMatrix::new(m).is_err());
    }

    #[test]
    fn indefinite_covariance_is_an_error() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(CovarianceMatrix::new(m).unwrap().symplectic_eigenvalues().is_err());
    }
}
