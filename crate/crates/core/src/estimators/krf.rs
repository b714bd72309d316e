use std::time::Instant;

use num_complex::Complex64;

use super::{filtered_composite, model_dims, EstimationResult};
use crate::error::{Error, Result};
use crate::linalg::{rank1_approx, ComplexMatrix, ZERO};
use crate::tensor::SignalTensor3;

/// Khatri-Rao factorization: one rank-1 approximation per IRS element of
/// the filtered signal.
///
/// Column `n` of the filtered matrix is reshaped to `L × M` and split as
/// `ĝₙ = √σ u`, `ĥₙ = √σ v*`, so both factors carry equal magnitude.
pub fn krf(y: &SignalTensor3, s: &ComplexMatrix, x: &ComplexMatrix) -> Result<EstimationResult> {
    let start = Instant::now();
    let (l, t, k, n, m) = model_dims(y, s, x)?;
    if k < n || t < m {
        return Err(Error::InfeasibleDesign(format!(
            "KRF needs K >= N and T >= M (K={k}, N={n}, T={t}, M={m})"
        )));
    }
    let omega = filtered_composite(y, s, x)?;
    let mut h = ComplexMatrix::zeros(n, m);
    let mut g = ComplexMatrix::zeros(l, n);
    let mut zero_columns = Vec::new();
    for col in 0..n {
        let slice = ComplexMatrix::from_column_slice(l, m, omega.column(col).as_slice());
        if slice.iter().all(|&z| z == ZERO) {
            zero_columns.push(col);
            continue;
        }
        let r1 = rank1_approx(&slice)?;
        let root = Complex64::new(r1.sigma.sqrt(), 0.0);
        g.set_column(col, &(&r1.u * root));
        h.set_row(col, &(r1.v.map(|z| z.conj()) * root).transpose());
    }
    let mut out = EstimationResult::from_factors(h, g);
    out.converged = true;
    out.zero_columns = zero_columns;
    out.wall_time_s = start.elapsed().as_secs_f64();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, unvec};
    use crate::system::{build_scenario, make_dft_matrix, SystemConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_recovery() {
        let cfg = SystemConfig::new(3, 2, 4, 4, 3);
        let sc = build_scenario(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let est = krf(&sc.noisy, &sc.s_ideal, &sc.x).unwrap();
        let theta = sc.theta();
        assert!((&est.theta_hat - &theta).norm() / theta.norm() < 1e-10);
        assert!(est.zero_columns.is_empty());
    }

    #[test]
    fn single_element_is_one_rank1_fit() {
        let cfg = SystemConfig::new(3, 2, 1, 2, 3).with_snr(0.0);
        let sc = build_scenario(&cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let est = krf(&sc.noisy, &sc.s_ideal, &sc.x).unwrap();
        let omega = filtered_composite(&sc.noisy, &sc.s_ideal, &sc.x).unwrap();
        let r1 = rank1_approx(&unvec(&omega.column(0).into_owned(), 2, 3).unwrap()).unwrap();
        let theta = unvec(&est.theta_hat, 2, 3).unwrap();
        assert!(max_abs(&(theta - r1.reconstruct())) < 1e-12);
    }

    #[test]
    fn zero_column_is_flagged() {
        // Only IRS element 0 contributes to the signal.
        let s = ComplexMatrix::identity(2, 2) * Complex64::new(2f64.sqrt(), 0.0);
        let x = ComplexMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0].map(|v| Complex64::new(v, 0.0)));
        let mut g = ComplexMatrix::zeros(2, 2);
        g[(0, 0)] = Complex64::new(1.0, 0.0);
        g[(1, 0)] = Complex64::new(0.5, 0.0);
        let h = ComplexMatrix::from_fn(2, 2, |i, _| Complex64::new((1 - i) as f64, 0.0));
        let y = crate::tensor::build_parafac_tensor(&g, &(&x * h.transpose()), &s).unwrap();
        let est = krf(&y, &s, &x).unwrap();
        assert_eq!(est.zero_columns, vec![1]);
        assert!(est.h_hat.unwrap().row(1).iter().all(|&z| z == ZERO));
    }

    #[test]
    fn infeasible_dimensions_rejected() {
        let y = SignalTensor3::zeros((2, 3, 2));
        let s = crate::linalg::complex_gaussian(2, 3, 1.0, &mut ChaCha8Rng::seed_from_u64(3));
        let x = make_dft_matrix(3, 2).unwrap();
        assert!(matches!(krf(&y, &s, &x), Err(Error::InfeasibleDesign(_))));
    }
}
