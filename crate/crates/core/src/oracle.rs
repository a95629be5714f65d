//! Closed-form bicausal transport cost between two Gaussian random walks
//! `x_{t+1} = x_t + N(0, Σx)`, `y_{t+1} = y_t + N(0, Σy)` under the quadratic
//! cost `Σ_{t=1}^T |x_t − y_t|²`:
//!
//! ```text
//! T |x0 − y0|² + T(T+1)/2 · ( tr Σx + tr Σy − 2 tr √(√Σx Σy √Σx) )
//! ```

use crate::linalg::{sandwich, spd_sqrt, LinalgError, SpdMatrix};

/// The covariance part `tr Σx + tr Σy − 2 tr √(√Σx Σy √Σx)`.
pub fn bures_term(sigma_x: &SpdMatrix, sigma_y: &SpdMatrix) -> Result<f64, LinalgError> {
    let root_x = spd_sqrt(sigma_x);
    let inner = sandwich(&root_x, sigma_y)?;
    let cross = spd_sqrt(&inner).trace();
    Ok((sigma_x.trace() + sigma_y.trace() - 2.0 * cross).max(0.0))
}

/// Exact bicausal value for the Gaussian random-walk pair over horizon `horizon`.
pub fn exact_value(
    x0: &[f64],
    y0: &[f64],
    sigma_x: &SpdMatrix,
    sigma_y: &SpdMatrix,
    horizon: usize,
) -> Result<f64, LinalgError> {
    let d = sigma_x.dim();
    for len in [x0.len(), y0.len(), sigma_y.dim()] {
        if len != d {
            return Err(LinalgError::DimensionMismatch { left: d, right: len });
        }
    }
    let t = horizon as f64;
    let shift: f64 = x0.iter().zip(y0).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(t * shift + 0.5 * t * (t + 1.0) * bures_term(sigma_x, sigma_y)?)
}
