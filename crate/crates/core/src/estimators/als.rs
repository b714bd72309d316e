use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;

use super::{composite, is_orthogonal, model_dims, BalsInit, BalsOptions, EstimationResult};
use crate::error::{Error, Result};
use crate::linalg::{
    complex_gaussian, conj, default_rank_tolerance, frob_norm_sq, gemm, khatri_rao, numerical_rank,
    orthogonality_deviation, pinv, ComplexMatrix,
};
use crate::tensor::SignalTensor3;

// Cholesky pivots spanning more than this squared ratio are treated as
// ill-conditioned and the update falls back to an SVD pseudo-inverse.
const GRAM_RCOND: f64 = 1e-12;

/// Least-squares factor `F` minimizing `‖A − F Mᵀ‖_F`.
///
/// `gram` must equal `MᴴM`. The normal equations `Γ Fᵀ = (A M*)ᵀ` are solved
/// by Cholesky; an ill-conditioned Gram falls back to `A (Mᵀ)†`.
fn khatri_rao_ls(
    a: &ComplexMatrix,
    m: &ComplexMatrix,
    gram: ComplexMatrix,
    iteration: usize,
) -> Result<ComplexMatrix> {
    let n = m.ncols();
    let rhs = gemm(a, &conj(m), false).transpose();
    if let Some(chol) = gram.cholesky() {
        let diag = chol.l_dirty().diagonal();
        let (lo, hi) = diag
            .iter()
            .map(|z| z.re)
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
        if hi > 0.0 && (lo / hi).powi(2) > GRAM_RCOND {
            return Ok(chol.solve(&rhs).transpose());
        }
    }
    let mt = m.transpose();
    if numerical_rank(&mt, default_rank_tolerance(&mt)) < n {
        return Err(Error::RankDeficientUpdate { iteration });
    }
    Ok(a * pinv(&mt))
}

fn initial_h<R: Rng + ?Sized>(opts: &BalsOptions, n: usize, m: usize, rng: &mut R) -> Result<ComplexMatrix> {
    match &opts.init {
        BalsInit::RandomGaussian => Ok(complex_gaussian(n, m, 1.0, rng)),
        BalsInit::Provided(h) if h.shape() == (n, m) => Ok(h.clone()),
        BalsInit::Provided(h) => Err(Error::shape(
            "initial H",
            format!("expected {n}x{m}, got {:?}", h.shape()),
        )),
    }
}

struct StopRule {
    delta: f64,
    scale: f64,
    prev: Option<f64>,
}

impl StopRule {
    fn new(opts: &BalsOptions, y: &SignalTensor3) -> Self {
        let scale = if opts.normalize_error {
            let energy = y.frob_norm_sq();
            if energy > 0.0 {
                1.0 / energy
            } else {
                1.0
            }
        } else {
            1.0
        };
        StopRule {
            delta: opts.delta,
            scale,
            prev: None,
        }
    }

    /// Records the raw squared residual and reports whether to stop.
    fn step(&mut self, raw: f64, trace: &mut Vec<f64>) -> bool {
        let e = raw * self.scale;
        trace.push(e);
        let done = matches!(self.prev, Some(p) if (p - e).abs() <= self.delta);
        self.prev = Some(e);
        done
    }
}

fn bals_feasibility(l: usize, t: usize, k: usize, n: usize, m: usize) -> Result<()> {
    if k * t.min(l) < n || t < m {
        return Err(Error::InfeasibleDesign(format!(
            "BALS needs K·min(T,L) >= N and T >= M (K={k}, T={t}, L={l}, N={n}, M={m})"
        )));
    }
    Ok(())
}

/// Bilinear alternating least squares.
///
/// Alternates `Ĝ = Y₁[(S ◇ XĤᵀ)ᵀ]†` and `Ĥᵀ = X†Y₂[(S ◇ Ĝ)ᵀ]†` from
/// `Ĥ⁽⁰⁾` until the reconstruction error changes by at most `opts.delta`.
pub fn bals<R: Rng + ?Sized>(
    y: &SignalTensor3,
    s: &ComplexMatrix,
    x: &ComplexMatrix,
    opts: &BalsOptions,
    rng: &mut R,
) -> Result<EstimationResult> {
    opts.validate()?;
    let (l, t, k, n, m) = model_dims(y, s, x)?;
    bals_feasibility(l, t, k, n, m)?;
    if opts.use_orthogonal_fastpath && is_orthogonal(s) && is_orthogonal(x) {
        return bals_orthogonal(y, s, x, opts, rng);
    }
    let start = Instant::now();
    let y1 = y.unfold(1)?;
    let y2 = y.unfold(2)?;
    let x_pinv = pinv(x);
    let s_gram = s.adjoint() * s;
    let mut h = initial_h(opts, n, m, rng)?;
    let mut g = ComplexMatrix::zeros(l, n);
    let mut stop = StopRule::new(opts, y);
    let mut out = EstimationResult::default();
    for it in 1..=opts.max_iter {
        let z = gemm(x, &h, true);
        let m1 = khatri_rao(s, &z)?;
        g = khatri_rao_ls(&y1, &m1, s_gram.component_mul(&(z.adjoint() * &z)), it)?;

        let m2 = khatri_rao(s, &g)?;
        let z_hat = khatri_rao_ls(&y2, &m2, s_gram.component_mul(&(g.adjoint() * &g)), it)?;
        h = (&x_pinv * z_hat).transpose();

        let residual = &y2 - gemm(&gemm(x, &h, true), &m2, true);
        out.iterations = it;
        if opts.track_iterates {
            out.iterates.push((h.clone(), g.clone()));
        }
        if stop.step(frob_norm_sq(&residual), &mut out.error_trace) {
            out.converged = true;
            break;
        }
    }
    out.theta_hat = composite(&h, &g);
    out.h_hat = Some(h);
    out.g_hat = Some(g);
    out.wall_time_s = start.elapsed().as_secs_f64();
    Ok(out)
}

fn redraw_small_rows<R: Rng + ?Sized>(a: &mut ComplexMatrix, rng: &mut R) -> usize {
    let mut count = 0;
    for i in 0..a.nrows() {
        let energy: f64 = a.row(i).iter().map(|z| z.norm_sqr()).sum();
        if !(energy > f64::MIN_POSITIVE) {
            let fresh = complex_gaussian(1, a.ncols(), 1.0, rng);
            a.set_row(i, &fresh.row(0));
            count += 1;
        }
    }
    count
}

/// BALS for orthogonal designs (`SᴴS = K·I`, `XᴴX = T·I`).
///
/// The pseudo-inverses collapse to `Ĝ = Y₁(S ◇ XĤᵀ)* Σ_H⁻¹ / (KT)` and
/// `Ĥᵀ = XᴴY₂(S ◇ Ĝ)* Σ_G⁻¹ / (KT)` with `Σ_H = diag(‖ĥₙ‖²)` and
/// `Σ_G = diag(‖ĝₙ‖²)`. A factor column whose norm underflows is redrawn
/// from `CN(0,1)`.
pub fn bals_orthogonal<R: Rng + ?Sized>(
    y: &SignalTensor3,
    s: &ComplexMatrix,
    x: &ComplexMatrix,
    opts: &BalsOptions,
    rng: &mut R,
) -> Result<EstimationResult> {
    opts.validate()?;
    let (l, t, k, n, m) = model_dims(y, s, x)?;
    bals_feasibility(l, t, k, n, m)?;
    let deviation = orthogonality_deviation(s, k as f64).max(orthogonality_deviation(x, t as f64));
    if !(deviation < super::ORTHOGONALITY_TOL) {
        return Err(Error::NonOrthogonalDesign { deviation });
    }
    let start = Instant::now();
    let y1 = y.unfold(1)?;
    let y2 = y.unfold(2)?;
    let kt = Complex64::new((k * t) as f64, 0.0);
    let x_adj = x.adjoint();
    let mut h = initial_h(opts, n, m, rng)?;
    let mut g = ComplexMatrix::zeros(l, n);
    let mut stop = StopRule::new(opts, y);
    let mut out = EstimationResult::default();
    for it in 1..=opts.max_iter {
        out.reinitialized_columns += redraw_small_rows(&mut h, rng);
        let m1 = khatri_rao(s, &gemm(x, &h, true))?;
        g = gemm(&y1, &conj(&m1), false) / kt;
        for (col, row) in h.row_iter().enumerate() {
            let energy: f64 = row.iter().map(|z| z.norm_sqr()).sum();
            g.column_mut(col).unscale_mut(energy);
        }

        let mut g_rows = g.transpose();
        let redrawn = redraw_small_rows(&mut g_rows, rng);
        if redrawn > 0 {
            out.reinitialized_columns += redrawn;
            g = g_rows.transpose();
        }
        let m2 = khatri_rao(s, &g)?;
        let mut ht = gemm(&gemm(&x_adj, &y2, false), &conj(&m2), false) / kt;
        for (col, gc) in g.column_iter().enumerate() {
            ht.column_mut(col).unscale_mut(gc.norm_squared());
        }
        h = ht.transpose();

        let residual = &y2 - gemm(&gemm(x, &h, true), &m2, true);
        out.iterations = it;
        if opts.track_iterates {
            out.iterates.push((h.clone(), g.clone()));
        }
        if stop.step(frob_norm_sq(&residual), &mut out.error_trace) {
            out.converged = true;
            break;
        }
    }
    out.theta_hat = composite(&h, &g);
    out.h_hat = Some(h);
    out.g_hat = Some(g);
    out.wall_time_s = start.elapsed().as_secs_f64();
    Ok(out)
}

/// Trilinear alternating least squares: BALS plus a refinement of the IRS
/// matrix, `Ŝ = Y₃[(XĤᵀ ◇ Ĝ)ᵀ]†`, starting from `s_init`.
///
/// Requires `min(L,N) + min(M,N) + min(K,N) ≥ 2N + 2`. The composite
/// estimate is reported as is; it shares a per-column scale (and possibly a
/// column permutation) with `Ŝ`.
pub fn tals<R: Rng + ?Sized>(
    y: &SignalTensor3,
    x: &ComplexMatrix,
    s_init: &ComplexMatrix,
    opts: &BalsOptions,
    rng: &mut R,
) -> Result<EstimationResult> {
    opts.validate()?;
    let (l, t, k, n, m) = model_dims(y, s_init, x)?;
    if l.min(n) + m.min(n) + k.min(n) < 2 * n + 2 {
        return Err(Error::InfeasibleDesign(format!(
            "TALS needs min(L,N)+min(M,N)+min(K,N) >= 2N+2 (L={l}, M={m}, K={k}, N={n})"
        )));
    }
    if t < m {
        return Err(Error::InfeasibleDesign(format!("TALS needs T >= M (T={t}, M={m})")));
    }
    let start = Instant::now();
    let y1 = y.unfold(1)?;
    let y2 = y.unfold(2)?;
    let y3 = y.unfold(3)?;
    let x_pinv = pinv(x);
    let mut s = s_init.clone();
    let mut h = initial_h(opts, n, m, rng)?;
    let mut g = ComplexMatrix::zeros(l, n);
    let mut stop = StopRule::new(opts, y);
    let mut out = EstimationResult::default();
    for it in 1..=opts.max_iter {
        let s_gram = s.adjoint() * &s;
        let z = gemm(x, &h, true);
        let m1 = khatri_rao(&s, &z)?;
        g = khatri_rao_ls(&y1, &m1, s_gram.component_mul(&(z.adjoint() * &z)), it)?;

        let g_gram = g.adjoint() * &g;
        let m2 = khatri_rao(&s, &g)?;
        let z_hat = khatri_rao_ls(&y2, &m2, s_gram.component_mul(&g_gram), it)?;
        h = (&x_pinv * z_hat).transpose();

        let z = gemm(x, &h, true);
        let m3 = khatri_rao(&z, &g)?;
        s = khatri_rao_ls(&y3, &m3, (z.adjoint() * &z).component_mul(&g_gram), it)?;

        let residual = &y3 - gemm(&s, &m3, true);
        out.iterations = it;
        if opts.track_iterates {
            out.iterates.push((h.clone(), g.clone()));
        }
        if stop.step(frob_norm_sq(&residual), &mut out.error_trace) {
            out.converged = true;
            break;
        }
    }
    out.theta_hat = composite(&h, &g);
    out.h_hat = Some(h);
    out.g_hat = Some(g);
    out.s_hat = Some(s);
    out.wall_time_s = start.elapsed().as_secs_f64();
    Ok(out)
}
