//! Random physical Gaussian states and symplectic building blocks, used by
//! property tests and benchmarks.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::gaussian::GaussianState;

/// `diag(e^{−r}, e^{r})` acting on mode `k` of an `n`-mode system.
pub fn single_mode_squeezer(n: usize, k: usize, r: f64) -> DMatrix<f64> {
    let mut s = DMatrix::identity(2 * n, 2 * n);
    s[(k, k)] = (-r).exp();
    s[(n + k, n + k)] = r.exp();
    s
}

/// A random symplectic matrix built from `diag(A, A⁻ᵀ)` and two symmetric
/// shears, so `σ_xp` of the resulting state is generically asymmetric.
pub fn random_symplectic<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> DMatrix<f64> {
    let mut gauss = |scale: f64| -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    };
    let a = DMatrix::identity(n, n) + DMatrix::from_fn(n, n, |_, _| gauss(scale / (n as f64).sqrt()));
    let a_inv_t = a.clone().try_inverse().expect("perturbed identity is invertible").transpose();
    let mut b = DMatrix::from_fn(n, n, |_, _| gauss(scale));
    b = (&b + b.transpose()) * 0.5;
    let mut c = DMatrix::from_fn(n, n, |_, _| gauss(scale));
    c = (&c + c.transpose()) * 0.5;

    let mut block = DMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&a);
    block.view_mut((n, n), (n, n)).copy_from(&a_inv_t);
    let mut lower = DMatrix::identity(2 * n, 2 * n);
    lower.view_mut((n, 0), (n, n)).copy_from(&b);
    let mut upper = DMatrix::identity(2 * n, 2 * n);
    upper.view_mut((0, n), (n, n)).copy_from(&c);
    upper * lower * block
}

/// `S diag(ν, ν) Sᵀ` with random symplectic `S` and `ν_k ∈ [1/2, 1/2 + thermal)`,
/// plus random means.
pub fn random_physical_state<R: Rng + ?Sized>(rng: &mut R, n: usize, thermal: f64) -> GaussianState {
    let s = random_symplectic(rng, n, 0.4);
    let nu: Vec<f64> = (0..n).map(|_| 0.5 + thermal * rng.random::<f64>()).collect();
    let d = DVector::from_iterator(2 * n, nu.iter().chain(nu.iter()).copied());
    let mut cov = &s * DMatrix::from_diagonal(&d) * s.transpose();
    cov = (&cov + cov.transpose()) * 0.5;
    let mut state = GaussianState::from_covariance(&crate::gaussian::CovarianceMatrix { data: cov });
    state.mean_x = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
    state.mean_p = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
    state
}
