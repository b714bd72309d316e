//! Channel estimators operating on a received tensor `𝒴` (`L × T × K`), the
//! receiver's IRS matrix `S` (`K × N`) and the pilot matrix `X` (`T × M`).

mod align;
mod als;
mod krf;
mod ls;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{khatri_rao, orthogonality_deviation, vec, ComplexMatrix, ComplexVector};
use crate::tensor::SignalTensor3;

pub use align::{align_scaling, match_tals_columns, Aligned, ColumnMatch};
pub use als::{bals, bals_orthogonal, tals};
pub use krf::krf;
pub use ls::{block_ls, filtered_composite, ls_composite};

/// Deviation from `AᴴA = rows·I` below which a design counts as orthogonal.
pub const ORTHOGONALITY_TOL: f64 = 1e-8;

/// Output of one estimator call.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EstimationResult {
    /// `N × M`; absent for LS.
    pub h_hat: Option<ComplexMatrix>,
    /// `L × N`; absent for LS.
    pub g_hat: Option<ComplexMatrix>,
    /// `vec(Ĥᵀ ◇ Ĝ)`, or the unstructured LS solution.
    pub theta_hat: ComplexVector,
    /// TALS only.
    pub s_hat: Option<ComplexMatrix>,
    pub iterations: usize,
    pub converged: bool,
    pub error_trace: Vec<f64>,
    pub wall_time_s: f64,
    /// KRF columns whose filtered slice was identically zero.
    pub zero_columns: Vec<usize>,
    /// Columns re-drawn after their norm underflowed (simplified BALS).
    pub reinitialized_columns: usize,
    /// `(Ĥ, Ĝ)` after each iteration when requested.
    pub iterates: Vec<(ComplexMatrix, ComplexMatrix)>,
}

impl EstimationResult {
    pub(crate) fn from_factors(h: ComplexMatrix, g: ComplexMatrix) -> Self {
        let theta_hat = composite(&h, &g);
        EstimationResult {
            h_hat: Some(h),
            g_hat: Some(g),
            theta_hat,
            ..Default::default()
        }
    }
}

/// `vec(Hᵀ ◇ G)` for `H` (`N × M`) and `G` (`L × N`).
pub fn composite(h: &ComplexMatrix, g: &ComplexMatrix) -> ComplexVector {
    vec(&khatri_rao(&h.transpose(), g).expect("H rows and G columns both index the IRS"))
}

/// Starting point of the alternating estimators.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalsInit {
    /// `Ĥ⁽⁰⁾` with i.i.d. `CN(0,1)` entries from the caller's generator.
    #[default]
    RandomGaussian,
    #[serde(skip)]
    Provided(ComplexMatrix),
}

/// Options shared by BALS, simplified BALS and TALS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BalsOptions {
    pub delta: f64,
    pub max_iter: usize,
    pub init: BalsInit,
    /// Divide the reconstruction error by `‖𝒴‖²_F` before the stopping test.
    pub normalize_error: bool,
    /// Let `bals` dispatch to `bals_orthogonal` when both designs are
    /// orthogonal.
    pub use_orthogonal_fastpath: bool,
    #[serde(skip)]
    pub track_iterates: bool,
}

impl Default for BalsOptions {
    fn default() -> Self {
        BalsOptions {
            delta: 1e-5,
            max_iter: 100,
            init: BalsInit::RandomGaussian,
            normalize_error: true,
            use_orthogonal_fastpath: false,
            track_iterates: false,
        }
    }
}

impl BalsOptions {
    /// Defaults for the trilinear variant, which needs more sweeps.
    pub fn tals_default() -> Self {
        BalsOptions {
            max_iter: 500,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::InvalidConfig(format!("delta {} must be positive", self.delta)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Checks that `y`, `s` and `x` describe the same model and returns
/// `(L, T, K, N, M)`.
pub(crate) fn model_dims(
    y: &SignalTensor3,
    s: &ComplexMatrix,
    x: &ComplexMatrix,
) -> Result<(usize, usize, usize, usize, usize)> {
    let (l, t, k) = y.dims();
    if s.nrows() != k {
        return Err(Error::shape(
            "estimator",
            format!("IRS matrix has {} rows, tensor has {k} blocks", s.nrows()),
        ));
    }
    if x.nrows() != t {
        return Err(Error::shape(
            "estimator",
            format!("pilot matrix has {} rows, tensor has {t} slots", x.nrows()),
        ));
    }
    Ok((l, t, k, s.ncols(), x.ncols()))
}

pub(crate) fn is_orthogonal(a: &ComplexMatrix) -> bool {
    orthogonality_deviation(a, a.nrows() as f64) < ORTHOGONALITY_TOL
}
