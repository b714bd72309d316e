use std::time::Instant;

use num_complex::Complex64;

use super::{is_orthogonal, model_dims, EstimationResult};
use crate::error::{Error, Result};
use crate::linalg::{conj, default_rank_tolerance, numerical_rank, pinv, vec, ComplexMatrix};
use crate::tensor::SignalTensor3;

fn full_column_rank(a: &ComplexMatrix) -> bool {
    a.nrows() >= a.ncols() && numerical_rank(a, default_rank_tolerance(a)) == a.ncols()
}

/// Time-and-IRS filtered signal `Ω = (X† ⊗ I_L) Y₃ᵀ (Sᵀ)†` (`ML × N`).
///
/// Column `n` is the noisy `vec(gₙ hₙᵀ)`. On orthogonal designs the
/// pseudo-inverses reduce to `Sᴴ/K` and `Xᴴ/T`.
pub fn filtered_composite(
    y: &SignalTensor3,
    s: &ComplexMatrix,
    x: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    let (l, t, k, n, m) = model_dims(y, s, x)?;
    if !full_column_rank(s) || !full_column_rank(x) {
        return Err(Error::RankDeficientDesign);
    }
    // right factors: (Sᵀ)† (K × N) and (X†)ᵀ (T × M)
    let (s_right, x_right) = if is_orthogonal(s) && is_orthogonal(x) {
        (
            conj(s) / Complex64::new(k as f64, 0.0),
            conj(x) / Complex64::new(t as f64, 0.0),
        )
    } else {
        (pinv(&s.transpose()), pinv(x).transpose())
    };
    let w = y.unfold(3)?.transpose() * s_right;
    let mut omega = ComplexMatrix::zeros(m * l, n);
    for col in 0..n {
        let slice = ComplexMatrix::from_column_slice(l, t, w.column(col).as_slice());
        let filtered = slice * &x_right;
        omega.column_mut(col).copy_from_slice(filtered.as_slice());
    }
    Ok(omega)
}

/// Unstructured least squares `θ̂ = U†y` with `U = S ⊗ X ⊗ I_L`.
pub fn ls_composite(
    y: &SignalTensor3,
    s: &ComplexMatrix,
    x: &ComplexMatrix,
) -> Result<EstimationResult> {
    let start = Instant::now();
    let omega = filtered_composite(y, s, x)?;
    Ok(EstimationResult {
        theta_hat: vec(&omega),
        converged: true,
        wall_time_s: start.elapsed().as_secs_f64(),
        ..Default::default()
    })
}

/// Per-block cascaded channels `Ĉ_k = Y[k] (Xᵀ)†`, each `L × M`.
pub fn block_ls(
    y: &SignalTensor3,
    s: &ComplexMatrix,
    x: &ComplexMatrix,
) -> Result<Vec<ComplexMatrix>> {
    let (_, _, k, _, _) = model_dims(y, s, x)?;
    if !full_column_rank(x) {
        return Err(Error::RankDeficientDesign);
    }
    let right = pinv(&x.transpose());
    Ok((0..k).map(|kk| y.slice(kk) * &right).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian, kron, max_abs, ComplexVector};
    use crate::system::{build_scenario, make_dft_matrix, SystemConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn noiseless_ls_is_exact() {
        let cfg = SystemConfig::new(3, 2, 4, 4, 3);
        let sc = build_scenario(&cfg, &mut rng(1)).unwrap();
        let est = ls_composite(&sc.noisy, &sc.s_ideal, &sc.x).unwrap();
        let theta = sc.theta();
        assert!((&est.theta_hat - &theta).norm() / theta.norm() < 1e-10);
    }

    #[test]
    fn scalar_model_matches_scalar_ls() {
        let cfg = SystemConfig::new(1, 1, 1, 3, 2).with_snr(5.0);
        let sc = build_scenario(&cfg, &mut rng(2)).unwrap();
        // y_{t,k} = s_k x_t θ  →  θ̂ = Σ conj(s_k x_t) y / Σ |s_k x_t|²
        let (mut num, mut den) = (Complex64::new(0.0, 0.0), 0.0);
        for k in 0..3 {
            for t in 0..2 {
                let a = sc.s_ideal[(k, 0)] * sc.x[(t, 0)];
                num += a.conj() * sc.noisy.get(0, t, k);
                den += a.norm_sqr();
            }
        }
        let est = ls_composite(&sc.noisy, &sc.s_ideal, &sc.x).unwrap();
        assert!((est.theta_hat[0] - num / den).norm() < 1e-12);
    }

    #[test]
    fn general_path_matches_explicit_pseudo_inverse() {
        let mut r = rng(3);
        let (l, t, k, n, m) = (2, 3, 4, 2, 2);
        let s = complex_gaussian(k, n, 1.0, &mut r);
        let x = complex_gaussian(t, m, 1.0, &mut r);
        let y = SignalTensor3::from_fn((l, t, k), |_, _, _| {
            complex_gaussian(1, 1, 1.0, &mut r)[(0, 0)]
        });
        let u = kron(&kron(&s, &x), &ComplexMatrix::identity(l, l));
        let yv: ComplexVector = vec(&y.unfold(3).unwrap().transpose());
        let expected = pinv(&u) * yv;
        let est = ls_composite(&y, &s, &x).unwrap();
        assert!(max_abs(&(est.theta_hat - expected)) < 1e-10);
    }

    #[test]
    fn rank_deficient_design_rejected() {
        let y = SignalTensor3::zeros((2, 3, 4));
        let mut s = make_dft_matrix(4, 2).unwrap();
        let c0 = s.column(0).into_owned();
        s.set_column(1, &c0);
        let x = make_dft_matrix(3, 2).unwrap();
        assert!(matches!(ls_composite(&y, &s, &x), Err(Error::RankDeficientDesign)));
    }

    #[test]
    fn block_ls_recovers_cascaded_channels() {
        let cfg = SystemConfig::new(3, 2, 4, 4, 3);
        let sc = build_scenario(&cfg, &mut rng(4)).unwrap();
        let est = block_ls(&sc.noisy, &sc.s_ideal, &sc.x).unwrap();
        for (c_hat, c) in est.iter().zip(sc.cascaded_channels()) {
            assert!(max_abs(&(c_hat - c)) < 1e-12);
        }
    }

    #[test]
    fn block_ls_single_block() {
        let cfg = SystemConfig::new(2, 2, 1, 1, 2);
        let sc = build_scenario(&cfg, &mut rng(5)).unwrap();
        let est = block_ls(&sc.noisy, &sc.s_ideal, &sc.x).unwrap();
        assert_eq!(est.len(), 1);
        let c = &sc.truth.g * crate::linalg::diag_of_row(&sc.s_ideal, 0) * &sc.truth.h;
        assert!(max_abs(&(&est[0] - c)) < 1e-12);
    }
}
