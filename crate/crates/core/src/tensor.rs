//! Three-way signal tensors and their mode unfoldings.
//!
//! A tensor of dims `(L, T, K)` is stored as `K` frontal slices, each an
//! `L × T` matrix `Y[k]`. The unfoldings follow the slice-stacking order
//!
//! * mode 1: `Y₁ = [Y[1], …, Y[K]]` (`L × TK`)
//! * mode 2: `Y₂ = [Y[1]ᵀ, …, Y[K]ᵀ]` (`T × LK`)
//! * mode 3: row `k` of `Y₃` is `vec(Y[k])ᵀ` (`K × LT`)
//!
//! so that a PARAFAC tensor `[[G, Z, S]]` unfolds to `G(S◇Z)ᵀ`, `Z(S◇G)ᵀ`
//! and `S(Z◇G)ᵀ` respectively.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ZERO};

#[derive(Debug, Clone, PartialEq)]
pub struct SignalTensor3 {
    dims: (usize, usize, usize),
    // column-major within each slice, slices consecutive: index l + L*(t + T*k)
    data: Vec<Complex64>,
}

impl SignalTensor3 {
    pub fn zeros(dims: (usize, usize, usize)) -> Self {
        SignalTensor3 {
            dims,
            data: vec![ZERO; dims.0 * dims.1 * dims.2],
        }
    }

    /// Builds a tensor from its frontal slices, all of equal shape.
    pub fn from_slices(slices: &[ComplexMatrix]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::shape("from_slices", "no slices"))?;
        let (l, t) = first.shape();
        let mut data = Vec::with_capacity(l * t * slices.len());
        for s in slices {
            if s.shape() != (l, t) {
                return Err(Error::shape(
                    "from_slices",
                    format!("slice {:?} differs from {:?}", s.shape(), (l, t)),
                ));
            }
            data.extend_from_slice(s.as_slice());
        }
        Ok(SignalTensor3 {
            dims: (l, t, slices.len()),
            data,
        })
    }

    pub fn from_fn(
        dims: (usize, usize, usize),
        mut f: impl FnMut(usize, usize, usize) -> Complex64,
    ) -> Self {
        let mut out = Self::zeros(dims);
        for k in 0..dims.2 {
            for t in 0..dims.1 {
                for l in 0..dims.0 {
                    out.data[l + dims.0 * (t + dims.1 * k)] = f(l, t, k);
                }
            }
        }
        out
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn get(&self, l: usize, t: usize, k: usize) -> Complex64 {
        self.data[self.index(l, t, k)]
    }

    pub fn set(&mut self, l: usize, t: usize, k: usize, value: Complex64) {
        let i = self.index(l, t, k);
        self.data[i] = value;
    }

    fn index(&self, l: usize, t: usize, k: usize) -> usize {
        let (dl, dt, dk) = self.dims;
        assert!(l < dl && t < dt && k < dk, "index out of bounds");
        l + dl * (t + dt * k)
    }

    /// Entries in storage order (slice-major, column-major within a slice).
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// Frontal slice `Y[k]` (`L × T`).
    pub fn slice(&self, k: usize) -> ComplexMatrix {
        let (l, t, _) = self.dims;
        let n = l * t;
        ComplexMatrix::from_column_slice(l, t, &self.data[k * n..(k + 1) * n])
    }

    pub fn frob_norm_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        for z in &mut self.data {
            *z *= factor;
        }
    }

    pub fn add(&self, other: &SignalTensor3) -> Result<SignalTensor3> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SignalTensor3) -> Result<SignalTensor3> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(
        &self,
        other: &SignalTensor3,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<SignalTensor3> {
        if self.dims != other.dims {
            return Err(Error::shape(
                "tensor arithmetic",
                format!("{:?} vs {:?}", self.dims, other.dims),
            ));
        }
        Ok(SignalTensor3 {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Mode-`mode` matrix unfolding (modes are 1-based).
    pub fn unfold(&self, mode: usize) -> Result<ComplexMatrix> {
        let (l, t, k) = self.dims;
        match mode {
            1 => Ok(ComplexMatrix::from_column_slice(l, t * k, &self.data)),
            2 => Ok(ComplexMatrix::from_fn(t, l * k, |ti, col| {
                let (li, ki) = (col % l, col / l);
                self.data[li + l * (ti + t * ki)]
            })),
            3 => Ok(ComplexMatrix::from_fn(k, l * t, |ki, col| {
                self.data[col + l * t * ki]
            })),
            m => Err(Error::InvalidMode(m)),
        }
    }

    /// Inverse of [`unfold`](Self::unfold) for the given tensor dims.
    pub fn fold(
        matrix: &ComplexMatrix,
        mode: usize,
        dims: (usize, usize, usize),
    ) -> Result<SignalTensor3> {
        let (l, t, k) = dims;
        let expected = match mode {
            1 => (l, t * k),
            2 => (t, l * k),
            3 => (k, l * t),
            m => return Err(Error::InvalidMode(m)),
        };
        if matrix.shape() != expected {
            return Err(Error::shape(
                "fold",
                format!("mode {mode} expects {expected:?}, got {:?}", matrix.shape()),
            ));
        }
        Ok(match mode {
            1 => SignalTensor3 {
                dims,
                data: matrix.as_slice().to_vec(),
            },
            2 => Self::from_fn(dims, |li, ti, ki| matrix[(ti, li + l * ki)]),
            _ => Self::from_fn(dims, |li, ti, ki| matrix[(ki, li + l * ti)]),
        })
    }
}

/// PARAFAC tensor `[[G, Z, S]]` with entries `Σₙ g_{ℓn} z_{tn} s_{kn}`.
///
/// Built slice by slice as `Y[k] = G · diag(S_{k·}) · Zᵀ`.
pub fn build_parafac_tensor(
    g: &ComplexMatrix,
    z: &ComplexMatrix,
    s: &ComplexMatrix,
) -> Result<SignalTensor3> {
    let n = g.ncols();
    if z.ncols() != n || s.ncols() != n {
        return Err(Error::shape(
            "build_parafac_tensor",
            format!(
                "inner dimensions {} / {} / {}",
                g.ncols(),
                z.ncols(),
                s.ncols()
            ),
        ));
    }
    let zt = z.transpose();
    let slices: Vec<ComplexMatrix> = (0..s.nrows())
        .map(|k| {
            let mut gd = g.clone();
            for (col, &sk) in s.row(k).iter().enumerate() {
                gd.column_mut(col).iter_mut().for_each(|x| *x *= sk);
            }
            gd * &zt
        })
        .collect();
    if slices.is_empty() {
        return Ok(SignalTensor3::zeros((g.nrows(), z.nrows(), 0)));
    }
    SignalTensor3::from_slices(&slices)
}
