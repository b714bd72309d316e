//! Dense complex matrix kernel: structured products, vectorization and the
//! rank-1 truncated SVD used by the Khatri-Rao factorization.
//!
//! Matrices are `nalgebra` column-major matrices, so `vec` is a plain copy of
//! the storage and `unvec` its inverse.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = ComplexMatrix::zeros(ar * br, ac * bc);
    for n in 0..ac {
        for i in 0..ar {
            let aij = a[(i, n)];
            if aij == ZERO {
                continue;
            }
            for p in 0..bc {
                for j in 0..br {
                    out[(i * br + j, n * bc + p)] = aij * b[(j, p)];
                }
            }
        }
    }
    out
}

/// Column-wise Kronecker (Khatri-Rao) product `A ◇ B`.
pub fn khatri_rao(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::ColumnMismatch {
            left: a.ncols(),
            right: b.ncols(),
        });
    }
    let (ar, br) = (a.nrows(), b.nrows());
    let mut out = ComplexMatrix::zeros(ar * br, a.ncols());
    for n in 0..a.ncols() {
        for i in 0..ar {
            let ain = a[(i, n)];
            for j in 0..br {
                out[(i * br + j, n)] = ain * b[(j, n)];
            }
        }
    }
    Ok(out)
}

/// Entrywise (Hadamard) product.
pub fn hadamard(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            "hadamard",
            format!("{:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    Ok(a.component_mul(b))
}

/// Stacks the columns of `a` into one vector.
pub fn vec(a: &ComplexMatrix) -> ComplexVector {
    ComplexVector::from_column_slice(a.as_slice())
}

/// Inverse of [`vec`]: reshapes a length `rows*cols` vector column by column.
pub fn unvec(v: &ComplexVector, rows: usize, cols: usize) -> Result<ComplexMatrix> {
    if v.len() != rows * cols {
        return Err(Error::shape(
            "unvec",
            format!("length {} cannot fill {rows}x{cols}", v.len()),
        ));
    }
    Ok(ComplexMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Main diagonal of a square matrix.
pub fn vecd(a: &ComplexMatrix) -> Result<ComplexVector> {
    if !a.is_square() {
        return Err(Error::shape("vecd", format!("{:?} is not square", a.shape())));
    }
    Ok(a.diagonal())
}

pub fn diag(v: &ComplexVector) -> ComplexMatrix {
    ComplexMatrix::from_diagonal(v)
}

/// `D_k(A)`: diagonal matrix holding row `k` of `a`.
pub fn diag_of_row(a: &ComplexMatrix, k: usize) -> ComplexMatrix {
    ComplexMatrix::from_diagonal(&a.row(k).transpose())
}

pub fn frob_norm_sq(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Largest entry modulus.
pub fn max_abs<R: nalgebra::Dim, C: nalgebra::Dim, S: nalgebra::RawStorage<Complex64, R, C>>(
    a: &nalgebra::Matrix<Complex64, R, C, S>,
) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `A·B`, or `A·Bᵀ` when `transpose_b` is set, through a blocked complex
/// GEMM kernel.
pub fn gemm(a: &ComplexMatrix, b: &ComplexMatrix, transpose_b: bool) -> ComplexMatrix {
    let (m, k) = a.shape();
    let (bk, n, rsb, csb) = if transpose_b {
        (b.ncols(), b.nrows(), b.nrows() as isize, 1)
    } else {
        (b.nrows(), b.ncols(), 1, b.nrows() as isize)
    };
    assert_eq!(k, bk, "gemm: inner dimensions {k} and {bk}");
    let mut c = ComplexMatrix::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    // SAFETY: Complex64 is repr(C) with the same layout as [f64; 2]; the
    // strides describe the column-major storage of each matrix and the
    // output buffer is exclusively borrowed.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            rsb,
            csb,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
    c
}

/// Entrywise complex conjugate (`A*`).
pub fn conj(a: &ComplexMatrix) -> ComplexMatrix {
    a.map(|z| z.conj())
}

/// Singular values in descending order.
pub fn singular_values(a: &ComplexMatrix) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Default relative rank threshold: `max_dim · ε_machine`.
pub fn default_rank_tolerance(a: &ComplexMatrix) -> f64 {
    a.nrows().max(a.ncols()) as f64 * f64::EPSILON
}

/// Number of singular values above `rel_tol · σ_max`.
pub fn numerical_rank(a: &ComplexMatrix, rel_tol: f64) -> usize {
    let sv = singular_values(a);
    match sv.first() {
        Some(&smax) if smax > 0.0 => sv.iter().filter(|&&s| s > rel_tol * smax).count(),
        _ => 0,
    }
}

/// Moore-Penrose pseudo-inverse from an SVD, discarding singular values
/// below `max_dim · ε_machine · σ_max`.
pub fn pinv(a: &ComplexMatrix) -> ComplexMatrix {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return ComplexMatrix::zeros(n, m);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return ComplexMatrix::zeros(n, m);
    }
    let tol = default_rank_tolerance(a) * smax;
    svd.pseudo_inverse(tol)
        .expect("svd was computed with both singular vector sets")
}

/// Largest deviation of `AᴴA / scale` from the identity.
pub fn orthogonality_deviation(a: &ComplexMatrix, scale: f64) -> f64 {
    let gram = a.adjoint() * a / Complex64::new(scale, 0.0);
    let mut worst: f64 = 0.0;
    for j in 0..gram.ncols() {
        for i in 0..gram.nrows() {
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((gram[(i, j)] - target).norm());
        }
    }
    worst
}

/// `rows × cols` matrix with i.i.d. `CN(0, variance)` entries.
pub fn complex_gaussian<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    variance: f64,
    rng: &mut R,
) -> ComplexMatrix {
    let scale = (variance / 2.0).sqrt();
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    })
}

/// Dominant singular triplet of a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Rank1 {
    pub u: ComplexVector,
    pub sigma: f64,
    pub v: ComplexVector,
}

impl Rank1 {
    /// `σ u vᴴ`
    pub fn reconstruct(&self) -> ComplexMatrix {
        &self.u * self.v.adjoint() * Complex64::new(self.sigma, 0.0)
    }
}

const POWER_MAX_ITER: usize = 500;
const POWER_TOL: f64 = 1e-12;
const POWER_SEED: u64 = 0x5_eed0_f5bd;

/// Best rank-1 Frobenius approximation `σ u vᴴ` of `a`.
///
/// Power iteration runs on the Gram matrix of the smaller side (`AAᴴ` or
/// `AᴴA`) from a fixed-seed random unit vector; if it has not converged
/// after 500 steps a dense SVD is used instead. The returned `u` has its
/// largest-modulus entry real and positive (lowest index on ties), and the
/// same phase rotation is applied to `v`.
pub fn rank1_approx(a: &ComplexMatrix) -> Result<Rank1> {
    let norm_sq = frob_norm_sq(a);
    if norm_sq == 0.0 || a.is_empty() {
        return Err(Error::ZeroMatrix);
    }
    if !norm_sq.is_finite() {
        return Err(Error::NoConvergence);
    }
    let wide = a.nrows() <= a.ncols();
    let gram = if wide { a * a.adjoint() } else { a.adjoint() * a };

    let (u, sigma, v) = match dominant_eigvec(&gram) {
        Some((x, lambda)) if lambda > 0.0 => {
            if wide {
                let mut v = a.adjoint() * &x;
                let nv = v.norm();
                v /= Complex64::new(nv, 0.0);
                (x, nv, v)
            } else {
                let mut u = a * &x;
                let nu = u.norm();
                u /= Complex64::new(nu, 0.0);
                (u, nu, x)
            }
        }
        _ => dense_dominant_triplet(a)?,
    };
    Ok(fix_phase(u, sigma, v))
}

fn dominant_eigvec(gram: &ComplexMatrix) -> Option<(ComplexVector, f64)> {
    let n = gram.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
    let mut x = complex_gaussian(n, 1, 1.0, &mut rng).column(0).into_owned();
    let nx = x.norm();
    x /= Complex64::new(nx, 0.0);
    for _ in 0..POWER_MAX_ITER {
        let y = gram * &x;
        let rho = x.dotc(&y).re;
        if !(rho > 0.0) || !rho.is_finite() {
            return None;
        }
        let resid = (&y - &x * Complex64::new(rho, 0.0)).norm();
        let ny = y.norm();
        x = y / Complex64::new(ny, 0.0);
        if resid <= POWER_TOL * rho {
            let rho = x.dotc(&(gram * &x)).re;
            return Some((x, rho));
        }
    }
    None
}

fn dense_dominant_triplet(a: &ComplexMatrix) -> Result<(ComplexVector, f64, ComplexVector)> {
    let svd = a.clone().svd(true, true);
    let (idx, sigma) = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, s)| if s > best.1 { (i, s) } else { best });
    if !(sigma > 0.0) {
        return Err(Error::NoConvergence);
    }
    let u = svd.u.as_ref().ok_or(Error::NoConvergence)?.column(idx).into_owned();
    let v = svd.v_t.as_ref().ok_or(Error::NoConvergence)?.row(idx).adjoint();
    Ok((u, sigma, v))
}

fn fix_phase(mut u: ComplexVector, sigma: f64, mut v: ComplexVector) -> Rank1 {
    let mut best = 0;
    let mut best_mod = -1.0;
    for (i, z) in u.iter().enumerate() {
        let m = z.norm();
        if m > best_mod {
            best_mod = m;
            best = i;
        }
    }
    if best_mod > 0.0 {
        let rot = u[best].conj() / best_mod;
        u *= rot;
        v *= rot;
        u[best] = Complex64::new(u[best].re, 0.0);
    }
    Rank1 { u, sigma, v }
}
