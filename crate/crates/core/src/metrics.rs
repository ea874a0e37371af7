//! Edge-recovery and prediction-error metrics against a known model.

use nalgebra::DMatrix;

use crate::error::{GgmError, Result};
use crate::graph::Graph;
use crate::linmodel::CoefMatrix;

/// `(fdr, power)` of `g_hat` against `g_true`. FDR is 0 for an empty
/// estimate; power is 1 for an empty truth.
pub fn fdr_power(g_true: &Graph, g_hat: &Graph) -> Result<(f64, f64)> {
    if g_true.p() != g_hat.p() {
        return Err(GgmError::domain("graphs have different node counts"));
    }
    let tp = g_hat.edges().filter(|&(a, b)| g_true.has_edge(a, b)).count() as f64;
    let detected = g_hat.n_edges() as f64;
    let fdr = if detected == 0.0 { 0.0 } else { (detected - tp) / detected };
    let power = if g_true.n_edges() == 0 { 1.0 } else { tp / g_true.n_edges() as f64 };
    Ok((fdr, power))
}

/// `sum_a (theta_hat_a - theta_a)^T Sigma (theta_hat_a - theta_a)` over the
/// rows `a` of the coefficient matrices.
pub fn msep(sigma: &DMatrix<f64>, theta_true: &CoefMatrix, theta_hat: &CoefMatrix) -> Result<f64> {
    let p = sigma.nrows();
    if sigma.ncols() != p || theta_true.p() != p || theta_hat.p() != p {
        return Err(GgmError::domain("incompatible dimensions for MSEP"));
    }
    if sigma.clone().cholesky().is_none() {
        return Err(GgmError::domain("covariance is not positive definite"));
    }
    let delta = theta_hat.matrix() - theta_true.matrix();
    // Rows of delta are the per-node errors: sum of delta_a^T Sigma delta_a.
    let value = (&delta * sigma).component_mul(&delta).sum();
    Ok(value.max(0.0))
}
