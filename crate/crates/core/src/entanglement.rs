//! Logarithmic negativity of Gaussian states and its scaling with system size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::linear_fit;
use crate::gaussian::{CovarianceMatrix, GaussianState};

/// Below this slope a size scan counts as an area law.
pub const AREA_LAW_THRESHOLD: f64 = 0.05;

/// Negates the momentum rows and columns of the sites in `subset`.
pub fn partial_transpose(cov: &CovarianceMatrix, subset: &[usize]) -> Result<CovarianceMatrix> {
    let n = cov.n_modes();
    let mut data = cov.data.clone();
    let mut flipped = vec![false; n];
    for &i in subset {
        if i >= n {
            return Err(Error::InvalidParameter(format!("site {i} outside a {n}-mode state")));
        }
        if flipped[i] {
            continue;
        }
        flipped[i] = true;
        data.row_mut(n + i).neg_mut();
        data.column_mut(n + i).neg_mut();
    }
    Ok(CovarianceMatrix { data })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativityResult {
    pub subset: Vec<usize>,
    pub nu: Vec<f64>,
    pub log_neg: f64,
}

/// `Σ_n ln max(1, 1/(2ν_n))` over the symplectic spectrum of the partial transpose.
pub fn log_negativity(state: &GaussianState, subset: &[usize]) -> Result<NegativityResult> {
    let pt = partial_transpose(&state.assemble_covariance(), subset)?;
    let nu = pt.symplectic_eigenvalues()?;
    let log_neg = nu.iter().map(|v| (1.0 / (2.0 * v)).max(1.0).ln()).sum();
    Ok(NegativityResult { subset: subset.to_vec(), nu, log_neg })
}

/// Contiguous half chain `{0, …, N/2 − 1}`.
pub fn half_chain(n: usize) -> Vec<usize> {
    (0..n / 2).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub sizes: Vec<usize>,
    pub values: Vec<f64>,
    /// Slope of `log N_{N/2}` against `ln N`.
    pub c: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl ScalingFit {
    pub fn is_area_law(&self) -> bool {
        self.c < AREA_LAW_THRESHOLD
    }
}

pub fn fit_log_scaling(sizes: &[usize], values: &[f64]) -> Result<ScalingFit> {
    if sizes.len() < 4 || sizes.len() != values.len() {
        return Err(Error::InsufficientData(format!("need at least 4 sizes with values, got {}", sizes.len())));
    }
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("sizes must be strictly increasing".into()));
    }
    if values.iter().any(|v| v.is_nan() || *v < 0.0) {
        return Err(Error::InvalidParameter("negativities must be non-negative".into()));
    }
    let x: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let f = linear_fit(&x, values)?;
    Ok(ScalingFit { sizes: sizes.to_vec(), values: values.to_vec(), c: f.slope, intercept: f.intercept, r_squared: f.r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::random_physical_state;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn two_mode_squeezed(r: f64) -> GaussianState {
        let (c, s) = ((2.0 * r).cosh() / 2.0, (2.0 * r).sinh() / 2.0);
        GaussianState {
            mean_x: DVector::zeros(2),
            mean_p: DVector::zeros(2),
            s_xx: DMatrix::from_row_slice(2, 2, &[c, s, s, c]),
            s_pp: DMatrix::from_row_slice(2, 2, &[c, -s, -s, c]),
            s_xp: DMatrix::zeros(2, 2),
        }
    }

    #[test]
    fn partial_transpose_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cov = random_physical_state(&mut rng, 5, 0.2).assemble_covariance();
        assert_eq!(partial_transpose(&cov, &[]).unwrap(), cov);
        let once = partial_transpose(&cov, &[1, 3]).unwrap();
        assert_eq!(partial_transpose(&once, &[1, 3]).unwrap(), cov);
        let all = partial_transpose(&cov, &[0, 1, 2, 3, 4]).unwrap();
        let (a, b) = (cov.symplectic_eigenvalues().unwrap(), all.symplectic_eigenvalues().unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!(partial_transpose(&cov, &[5]).is_err());
    }

    #[test]
    fn vacuum_has_no_negativity() {
        let r = log_negativity(&GaussianState::vacuum(6), &[0, 2]).unwrap();
        assert!(r.log_neg.abs() < 1e-14);
    }

    #[test]
    fn two_mode_squeezing_oracle() {
        let mut last = 0.0;
        for r in [0.1, 0.4, 0.8, 1.3] {
            let ln = log_negativity(&two_mode_squeezed(r), &[0]).unwrap().log_neg;
            assert!((ln - 2.0 * r).abs() < 1e-10, "r={r} ln={ln}");
            assert!(ln > last);
            last = ln;
        }
    }

    #[test]
    fn means_do_not_enter() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = random_physical_state(&mut rng, 4, 0.1);
        let mut shifted = s.clone();
        shifted.mean_x.add_scalar_mut(3.0);
        shifted.mean_p.add_scalar_mut(-1.0);
        assert_eq!(log_negativity(&s, &[0, 1]).unwrap().log_neg, log_negativity(&shifted, &[0, 1]).unwrap().log_neg);
    }

    #[test]
    fn synthetic_scaling() {
        let sizes = [32, 64, 128, 256];
        let v: Vec<f64> = sizes.iter().map(|&n| 0.25 * (n as f64).ln()).collect();
        let f = fit_log_scaling(&sizes, &v).unwrap();
        assert!((f.c - 0.25).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
        let f = fit_log_scaling(&sizes, &[0.3; 4]).unwrap();
        assert!(f.c.abs() < 1e-14 && f.is_area_law());
        assert!(fit_log_scaling(&sizes[..3], &v[..3]).is_err());
        assert!(fit_log_scaling(&[64, 32, 128, 256], &v).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn negativity_is_non_negative(seed in any::<u64>(), n in 2usize..7, k in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_physical_state(&mut rng, n, 0.3);
            let subset: Vec<usize> = (0..k.min(n - 1)).collect();
            let r = log_negativity(&s, &subset).unwrap();
            prop_assert!(r.log_neg >= 0.0);
        }

        #[test]
        fn monotone_in_squeezing(a in 0.0f64..1.5, b in 0.0f64..1.5) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let l1 = log_negativity(&two_mode_squeezed(lo), &[0]).unwrap().log_neg;
            let l2 = log_negativity(&two_mode_squeezed(hi), &[0]).unwrap().log_neg;
            prop_assert!(l2 >= l1 - 1e-12);
        }
    }
}
