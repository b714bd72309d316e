use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;

/// First `cols` columns of the `rows`-point DFT matrix, entries
/// `e^{-j2π·r·c/rows}`. Column-orthogonal with `AᴴA = rows·I`.
pub fn make_dft_matrix(rows: usize, cols: usize) -> Result<ComplexMatrix> {
    if cols > rows {
        return Err(Error::InfeasibleDesign(format!(
            "truncated DFT needs cols <= rows, got {rows}x{cols}"
        )));
    }
    Ok(ComplexMatrix::from_fn(rows, cols, |r, c| {
        // reduce the exponent first so large products keep full precision
        let e = ((r * c) % rows) as f64;
        Complex64::from_polar(1.0, -2.0 * PI * e / rows as f64)
    }))
}

/// Unit-modulus entries with i.i.d. uniform phases.
pub fn random_phase_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI))
    })
}
