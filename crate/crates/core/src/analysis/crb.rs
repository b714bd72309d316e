use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron, ComplexMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrbMethod {
    ClosedForm,
    NumericalFim,
}

/// Cramér-Rao bound on the composite channel `θ` (length `MNL`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrbReport {
    pub sigma2: f64,
    pub m: usize,
    pub l: usize,
    pub n: usize,
    pub k: usize,
    pub t: usize,
    /// Trace of the bound on `E‖θ − θ̂‖²`.
    pub trace_bound: f64,
    /// Trace of the bound on the real part of `θ`.
    pub real_trace: f64,
    /// Trace of the bound on the imaginary part of `θ`.
    pub imag_trace: f64,
    pub method: CrbMethod,
}

/// Bound for orthogonal designs (`SᴴS = K·I`, `XᴴX = T·I`):
/// `σ²MNL/(KT)`, split evenly between real and imaginary parts.
pub fn crb_closed_form(sigma2: f64, m: usize, l: usize, n: usize, k: usize, t: usize) -> CrbReport {
    let total = sigma2 * (m * n * l) as f64 / (k * t) as f64;
    CrbReport {
        sigma2,
        m,
        l,
        n,
        k,
        t,
        trace_bound: total,
        real_trace: total / 2.0,
        imag_trace: total / 2.0,
        method: CrbMethod::ClosedForm,
    }
}

// Pivot ratio (squared) below which the FIM is treated as singular.
const FIM_RCOND: f64 = 1e-13;

fn spd_inverse(a: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = a.cholesky().ok_or(Error::SingularFim)?;
    let d = chol.l_dirty().diagonal();
    let (lo, hi) = (d.min(), d.max());
    if !(hi > 0.0) || (lo / hi).powi(2) < FIM_RCOND {
        return Err(Error::SingularFim);
    }
    Ok(chol.inverse())
}

/// Slepian-Bangs bound for arbitrary full-rank designs.
///
/// With `A = UᴴU = (SᴴS) ⊗ (XᴴX) ⊗ I_L`, `P = Re A` and `Q = Im A`, the
/// real-valued FIM is `(2/σ²)[[P, −Q], [Q, P]]` and its inverse has diagonal
/// blocks `(σ²/2)(P + QP⁻¹Q)⁻¹` and `(σ²/2)(P⁻¹ − P⁻¹Q(P + QP⁻¹Q)⁻¹QP⁻¹)`.
pub fn crb_numerical(s: &ComplexMatrix, x: &ComplexMatrix, l: usize, sigma2: f64) -> Result<CrbReport> {
    let (k, n) = s.shape();
    let (t, m) = x.shape();
    if !(sigma2 > 0.0) || l == 0 {
        return Err(Error::InvalidConfig(format!("sigma2 = {sigma2}, L = {l}")));
    }
    let a = kron(
        &kron(&(s.adjoint() * s), &(x.adjoint() * x)),
        &ComplexMatrix::identity(l, l),
    );
    let p = a.map(|z| z.re);
    let q = a.map(|z| z.im);
    let p_inv = spd_inverse(p.clone())?;
    let schur = &p + &q * &p_inv * &q;
    let schur_inv = spd_inverse(schur)?;
    let half = sigma2 / 2.0;
    let real_trace = half * schur_inv.trace();
    let imag_block = &p_inv - &p_inv * &q * &schur_inv * &q * &p_inv;
    let imag_trace = half * imag_block.trace();
    Ok(CrbReport {
        sigma2,
        m,
        l,
        n,
        k,
        t,
        trace_bound: real_trace + imag_trace,
        real_trace,
        imag_trace,
        method: CrbMethod::NumericalFim,
    })
}
