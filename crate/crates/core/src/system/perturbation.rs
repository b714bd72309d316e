use rand::Rng;

use super::PerturbationConfig;
use crate::linalg::{complex_gaussian, ComplexMatrix, ZERO};

/// Applies `s_{kn} = (a_{kn} f_{kn}) s̄_{kn}` entrywise: each element is
/// blocked (`a = 0`) with probability `blockage_fraction`, and multiplied by
/// an independent `f ~ CN(0, γ)` draw.
///
/// The factor multiplies the designed entry as a full complex gain, so the
/// perturbed entries have mean power `γ·(1 - blockage_fraction)`.
pub fn apply_perturbation<R: Rng + ?Sized>(
    s_ideal: &ComplexMatrix,
    cfg: &PerturbationConfig,
    rng: &mut R,
) -> ComplexMatrix {
    let (k, n) = s_ideal.shape();
    let blocked: Vec<bool> = (0..k * n)
        .map(|_| rng.random::<f64>() < cfg.blockage_fraction)
        .collect();
    let f = complex_gaussian(k, n, cfg.gamma, rng);
    ComplexMatrix::from_fn(k, n, |row, col| {
        if blocked[row + k * col] {
            ZERO
        } else {
            f[(row, col)] * s_ideal[(row, col)]
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::make_dft_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn no_blockage_means_no_zeros() {
        let s = make_dft_matrix(8, 8).unwrap();
        let cfg = PerturbationConfig {
            blockage_fraction: 0.0,
            gamma: 0.01,
        };
        let p = apply_perturbation(&s, &cfg, &mut ChaCha8Rng::seed_from_u64(1));
        // unit-modulus design: |s| = |f|
        assert!(p.iter().all(|z| z.norm() > 0.0));
    }

    #[test]
    fn blockage_fraction_is_respected() {
        let s = make_dft_matrix(100, 64).unwrap();
        let cfg = PerturbationConfig {
            blockage_fraction: 0.2,
            gamma: 0.01,
        };
        for seed in 0..5 {
            let p = apply_perturbation(&s, &cfg, &mut ChaCha8Rng::seed_from_u64(seed));
            let zeros = p.iter().filter(|z| z.norm() == 0.0).count() as f64;
            let frac = zeros / p.len() as f64;
            assert!((frac - 0.2).abs() < 0.02, "seed {seed}: {frac}");
        }
    }

    #[test]
    fn perturbation_power_matches_gamma() {
        // 10^6 unit-modulus entries, no blockage: E|f|^2 = gamma
        let s = ComplexMatrix::from_element(1000, 1000, crate::linalg::ONE);
        let cfg = PerturbationConfig {
            blockage_fraction: 0.0,
            gamma: 0.01,
        };
        let p = apply_perturbation(&s, &cfg, &mut ChaCha8Rng::seed_from_u64(3));
        let mean = p.iter().map(|z| z.norm_sqr()).sum::<f64>() / p.len() as f64;
        assert!((mean / 0.01 - 1.0).abs() < 0.05, "{mean}");
    }
}
