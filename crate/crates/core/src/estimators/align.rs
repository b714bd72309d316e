use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexVector, ZERO};

/// Factor estimates with the per-column scaling ambiguity removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Aligned {
    pub h: ComplexMatrix,
    pub g: ComplexMatrix,
    /// Columns left untouched because the estimate (or its projection on
    /// the truth) was zero.
    pub skipped: Vec<usize>,
}

/// Rescales row `n` of `ĥ` by the least-squares `δₙ` against the true row
/// and column `n` of `Ĝ` by `1/δₙ`, leaving `Ĥᵀ ◇ Ĝ` unchanged.
pub fn align_scaling(
    h_hat: &ComplexMatrix,
    g_hat: &ComplexMatrix,
    h_true: &ComplexMatrix,
    g_true: &ComplexMatrix,
) -> Result<Aligned> {
    if h_hat.shape() != h_true.shape() || g_hat.shape() != g_true.shape() {
        return Err(Error::shape(
            "align_scaling",
            format!(
                "estimates {:?}/{:?} vs truth {:?}/{:?}",
                h_hat.shape(),
                g_hat.shape(),
                h_true.shape(),
                g_true.shape()
            ),
        ));
    }
    if h_hat.nrows() != g_hat.ncols() {
        return Err(Error::shape(
            "align_scaling",
            format!("{} rows in H, {} columns in G", h_hat.nrows(), g_hat.ncols()),
        ));
    }
    let mut h = h_hat.clone();
    let mut g = g_hat.clone();
    let mut skipped = Vec::new();
    for n in 0..h.nrows() {
        let est = h_hat.row(n);
        let energy: f64 = est.iter().map(|z| z.norm_sqr()).sum();
        let proj: Complex64 = est.iter().zip(h_true.row(n).iter()).map(|(e, t)| e.conj() * t).sum();
        if energy == 0.0 || proj == ZERO {
            skipped.push(n);
            continue;
        }
        let delta = proj / energy;
        h.row_mut(n).iter_mut().for_each(|z| *z *= delta);
        g.column_mut(n).iter_mut().for_each(|z| *z /= delta);
    }
    Ok(Aligned { h, g, skipped })
}

/// Column correspondence between an estimated and a reference IRS matrix.
///
/// `source[n]` is the estimated column matched to reference column `n` and
/// `scale[n]` the least-squares factor with `s_n ≈ ŝ_{source[n]} / scale[n]`,
/// so that the reference composite column is `scale[n] · θ̂_{source[n]}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMatch {
    pub source: Vec<usize>,
    pub scale: Vec<Complex64>,
}

impl ColumnMatch {
    /// Reorders and rescales a composite estimate whose columns have
    /// `rows` entries.
    pub fn apply(&self, theta_hat: &ComplexVector, rows: usize) -> ComplexVector {
        let mut out = ComplexVector::zeros(theta_hat.len());
        for (n, (&src, &c)) in self.source.iter().zip(&self.scale).enumerate() {
            for r in 0..rows {
                out[n * rows + r] = theta_hat[src * rows + r] * c;
            }
        }
        out
    }
}

/// Greedy matching of the columns of `s_hat` to `s_ref` by normalized
/// correlation magnitude, best pairs first.
pub fn match_tals_columns(s_hat: &ComplexMatrix, s_ref: &ComplexMatrix) -> Result<ColumnMatch> {
    if s_hat.shape() != s_ref.shape() {
        return Err(Error::shape(
            "match_tals_columns",
            format!("{:?} vs {:?}", s_hat.shape(), s_ref.shape()),
        ));
    }
    let n = s_ref.ncols();
    let mut pairs = Vec::with_capacity(n * n);
    for i in 0..n {
        let ri = s_ref.column(i);
        for j in 0..n {
            let ej = s_hat.column(j);
            let denom = ri.norm() * ej.norm();
            let corr = if denom > 0.0 { ri.dotc(&ej).norm() / denom } else { 0.0 };
            pairs.push((corr, i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut source = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for (_, i, j) in pairs {
        if source[i] == usize::MAX && !used[j] {
            source[i] = j;
            used[j] = true;
        }
    }
    let scale = source
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            let r = s_ref.column(i);
            let energy = r.norm_squared();
            if energy > 0.0 {
                r.dotc(&s_hat.column(j)) / energy
            } else {
                ZERO
            }
        })
        .collect();
    Ok(ColumnMatch { source, scale })
}
