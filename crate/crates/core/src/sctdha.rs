//! Self-consistent time-dependent harmonic surrogate for the cosine
//! potential `−(J/α²) Σ_j cos(α x_j)`.
//!
//! The interaction is replaced by `Σ_j (g_j x_j + h_j x_j²)`, with
//! coefficients read off the current Gaussian state. The constant offset
//! does not enter the dynamics and is never computed.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineGordonParams {
    pub j_coupling: f64,
    pub alpha: f64,
}

impl SineGordonParams {
    pub fn new(j_coupling: f64, alpha: f64) -> Result<Self> {
        if !(j_coupling >= 0.0 && j_coupling.is_finite()) {
            return Err(Error::InvalidParameter(format!("J must be non-negative, got {j_coupling}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self { j_coupling, alpha })
    }
}

/// Per-site linear drive `g` and effective mass `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicCoefficients {
    pub g: DVector<f64>,
    pub h: DVector<f64>,
}

/// Coefficients for a single site with mean `x` and variance `var`.
pub fn site_coefficients(x: f64, var: f64, sg: &SineGordonParams) -> (f64, f64) {
    let (j, a) = (sg.j_coupling, sg.alpha);
    if j == 0.0 {
        return (0.0, 0.0);
    }
    let damp = (-0.5 * a * a * var).exp();
    let (sin, cos) = (a * x).sin_cos();
    let g = j / a * damp * (sin - a * x * cos);
    let h = 0.5 * j * damp * cos;
    (g, h)
}

pub fn coefficients(state: &GaussianState, sg: &SineGordonParams) -> HarmonicCoefficients {
    let n = state.n_sites();
    let mut g = DVector::zeros(n);
    let mut h = DVector::zeros(n);
    for i in 0..n {
        let (gi, hi) = site_coefficients(state.mean_x[i], state.s_xx[(i, i)], sg);
        g[i] = gi;
        h[i] = hi;
    }
    HarmonicCoefficients { g, h }
}
