//! Periodic free-boson chain: couplings, dispersion and infrared regulator.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Parameters of the periodic harmonic chain
/// `H = (ω/2) Σ_j [p_j² + (x_{j+1} − x_j)² + r² x_j²]` with `r² = Ω/(Nω)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub n_sites: usize,
    pub omega: f64,
    pub big_omega: f64,
}

impl ChainParams {
    /// Chain with the default regulator scale `Ω = ω`.
    pub fn new(n_sites: usize, omega: f64) -> Result<Self> {
        Self::with_regulator(n_sites, omega, omega)
    }

    pub fn with_regulator(n_sites: usize, omega: f64, big_omega: f64) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidParameter("n_sites must be positive".into()));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
        }
        if !(big_omega > 0.0 && big_omega.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "big_omega must be positive, got {big_omega}"
            )));
        }
        if n_sites == 2 {
            log::warn!("N = 2 periodic chain: both neighbours are the same site, the bond is counted twice");
        }
        Ok(Self { n_sites, omega, big_omega })
    }

    /// Infrared regulator `r² = Ω/(Nω)`.
    pub fn regulator(&self) -> f64 {
        self.big_omega / (self.n_sites as f64 * self.omega)
    }

    /// `4 sin²(q/2) + r²`, the dimensionless squared mode frequency.
    pub fn dispersion(&self, q: f64) -> f64 {
        dispersion(q, self.regulator())
    }

    /// Lattice momenta `2πk/N`, `k = 0..N`.
    pub fn momenta(&self) -> Vec<f64> {
        lattice_momenta(self.n_sites)
    }

    /// Dimensionless stiffness matrix `K` with `H = (ω/2)(pᵀp + xᵀKx)`.
    ///
    /// Circulant with `2 + r²` on the diagonal and `−1` on the periodic
    /// off-diagonals. For `N = 2` both neighbours coincide and the entry is
    /// `−2`; for `N = 1` only the regulator survives.
    pub fn coupling_matrix(&self) -> DMatrix<f64> {
        let n = self.n_sites;
        let r_sq = self.regulator();
        if n == 1 {
            return DMatrix::from_element(1, 1, r_sq);
        }
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            k[(i, i)] += 2.0 + r_sq;
            k[(i, (i + 1) % n)] -= 1.0;
            k[(i, (i + n - 1) % n)] -= 1.0;
        }
        k
    }
}

pub fn dispersion(q: f64, r_sq: f64) -> f64 {
    let s = (0.5 * q).sin();
    4.0 * s * s + r_sq
}

pub fn lattice_momenta(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regulator_values() {
        let c = ChainParams::new(100, 1.0).unwrap();
        assert!((c.regulator() - 0.01).abs() < 1e-15);
        let c = ChainParams::with_regulator(1, 2.0, 2.0).unwrap();
        assert_eq!(c.regulator(), 1.0);
        let c = ChainParams::with_regulator(500, 0.5, 0.5).unwrap();
        assert!((c.regulator() - 0.002).abs() < 1e-15);
    }

    #[test]
    fn dispersion_values() {
        assert!((dispersion(0.0, 0.01) - 0.01).abs() < 1e-15);
        assert!((dispersion(PI, 0.01) - 4.01).abs() < 1e-14);
        assert!((dispersion(2.0 * PI / 3.0, 0.0) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ChainParams::new(0, 1.0).is_err());
        assert!(ChainParams::new(4, 0.0).is_err());
        assert!(ChainParams::with_regulator(4, 1.0, -1.0).is_err());
    }

    #[test]
    fn three_site_laplacian() {
        // r² = Ω/(Nω) cannot be zero, so subtract it back out.
        let c = ChainParams::new(3, 1.0).unwrap();
        let k = c.coupling_matrix() - DMatrix::identity(3, 3) * c.regulator();
        let expected = DMatrix::from_row_slice(3, 3, &[2., -1., -1., -1., 2., -1., -1., -1., 2.]);
        assert!((k - expected).amax() < 1e-15);
    }

    #[test]
    fn two_site_double_bond() {
        // r² = 0.1 → Ω/(2ω) = 0.1
        let c = ChainParams::with_regulator(2, 1.0, 0.2).unwrap();
        let k = c.coupling_matrix();
        let expected = DMatrix::from_row_slice(2, 2, &[2.1, -2.0, -2.0, 2.1]);
        assert!((k - expected).amax() < 1e-14);
    }

    #[test]
    fn spectrum_matches_dispersion() {
        for n in [3usize, 8, 17, 64] {
            let c = ChainParams::with_regulator(n, 1.0, 0.05 * n as f64).unwrap();
            let k = c.coupling_matrix();
            assert!((&k - k.transpose()).amax() == 0.0);
            let mut eig: Vec<f64> = k.symmetric_eigen().eigenvalues.iter().copied().collect();
            let mut disp: Vec<f64> = c.momenta().iter().map(|&q| c.dispersion(q)).collect();
            eig.sort_by(f64::total_cmp);
            disp.sort_by(f64::total_cmp);
            for (a, b) in eig.iter().zip(&disp) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "n={n}: {a} vs {b}");
            }
            assert!(eig[0] > 0.0);
        }
    }
}
