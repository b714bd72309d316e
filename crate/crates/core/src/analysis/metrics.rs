use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;

/// `‖truth − estimate‖² / ‖truth‖²` over flat entry sequences.
pub fn nmse(estimate: &[Complex64], truth: &[Complex64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::shape(
            "nmse",
            format!("{} estimated entries, {} true", estimate.len(), truth.len()),
        ));
    }
    let energy: f64 = truth.iter().map(|z| z.norm_sqr()).sum();
    if energy == 0.0 {
        return Err(Error::ZeroTruth);
    }
    let err: f64 = estimate.iter().zip(truth).map(|(e, t)| (t - e).norm_sqr()).sum();
    Ok(err / energy)
}

pub fn nmse_matrix(estimate: &ComplexMatrix, truth: &ComplexMatrix) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(Error::shape(
            "nmse",
            format!("{:?} vs {:?}", estimate.shape(), truth.shape()),
        ));
    }
    nmse(estimate.as_slice(), truth.as_slice())
}
