use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;

use super::{ChannelModel, SystemConfig};
use crate::error::Result;
use crate::linalg::{complex_gaussian, diag, ComplexMatrix, ComplexVector};

/// Azimuth/elevation of one path at the IRS plus the azimuth at the
/// BS (for `H`) or UT (for `G`) array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathAngles {
    pub array_azimuth: f64,
    pub irs_azimuth: f64,
    pub irs_elevation: f64,
}

/// Array responses and gains of the specular channel model
/// `H = A_IRS diag(α) A_BSᴴ`, `G = B_UT diag(β) B_IRSᴴ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricParams {
    pub a_bs: ComplexMatrix,
    pub a_irs: ComplexMatrix,
    pub b_ut: ComplexMatrix,
    pub b_irs: ComplexMatrix,
    pub alpha: ComplexVector,
    pub beta: ComplexVector,
    pub bs_irs_paths: Vec<PathAngles>,
    pub irs_ut_paths: Vec<PathAngles>,
}

/// BS-IRS channel `h` (`N × M`) and IRS-UT channel `g` (`L × N`).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPair {
    pub h: ComplexMatrix,
    pub g: ComplexMatrix,
    pub geometry: Option<GeometricParams>,
}

impl ChannelPair {
    pub fn new(h: ComplexMatrix, g: ComplexMatrix) -> Self {
        ChannelPair {
            h,
            g,
            geometry: None,
        }
    }
}

/// Half-wavelength uniform linear array response `e^{jπ m sinθ}`.
pub fn steering_ula(len: usize, angle: f64) -> ComplexVector {
    let phase = PI * angle.sin();
    ComplexVector::from_fn(len, |m, _| Complex64::from_polar(1.0, phase * m as f64))
}

/// Response of an `N₁ × N₂` half-wavelength rectangular array with
/// `N₁ = ⌈√N⌉`, `N₂ = ⌈N/N₁⌉`, truncated to its first `n` elements.
///
/// The response is `a_{N₁}(u) ⊗ a_{N₂}(v)` with direction cosines
/// `u = cos(el)·sin(az)` and `v = sin(el)`, so element `(i, j)` of the grid
/// sits at index `i·N₂ + j`.
pub fn steering_ura(n: usize, azimuth: f64, elevation: f64) -> ComplexVector {
    let n1 = (n as f64).sqrt().ceil() as usize;
    let n2 = n.div_ceil(n1);
    let u = elevation.cos() * azimuth.sin();
    let v = elevation.sin();
    ComplexVector::from_fn(n, |idx, _| {
        let (i, j) = (idx / n2, idx % n2);
        Complex64::from_polar(1.0, PI * (u * i as f64 + v * j as f64))
    })
}

fn draw_path<R: Rng + ?Sized>(rng: &mut R) -> PathAngles {
    PathAngles {
        array_azimuth: rng.random_range(-FRAC_PI_2..=FRAC_PI_2),
        irs_azimuth: rng.random_range(-FRAC_PI_2..=FRAC_PI_2),
        irs_elevation: rng.random_range(0.0..=FRAC_PI_2),
    }
}

struct Specular {
    irs: ComplexMatrix,
    array: ComplexMatrix,
    gains: ComplexVector,
    paths: Vec<PathAngles>,
}

fn draw_specular<R: Rng + ?Sized>(n: usize, array_len: usize, paths: usize, rng: &mut R) -> Specular {
    let angles: Vec<PathAngles> = (0..paths).map(|_| draw_path(rng)).collect();
    let gains = complex_gaussian(paths, 1, 1.0, rng).column(0).into_owned();
    let mut irs = ComplexMatrix::zeros(n, paths);
    let mut array = ComplexMatrix::zeros(array_len, paths);
    for (r, a) in angles.iter().enumerate() {
        irs.set_column(r, &steering_ura(n, a.irs_azimuth, a.irs_elevation));
        array.set_column(r, &steering_ula(array_len, a.array_azimuth));
    }
    Specular {
        irs,
        array,
        gains,
        paths: angles,
    }
}

/// Draws one BS-IRS channel (`N × M`) under the configured model.
pub fn draw_bs_irs_channel<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> ComplexMatrix {
    match cfg.channel_model {
        ChannelModel::IidRayleigh => complex_gaussian(cfg.n, cfg.m, 1.0, rng),
        ChannelModel::Geometric { r1, .. } => {
            let sp = draw_specular(cfg.n, cfg.m, r1, rng);
            &sp.irs * diag(&sp.gains) * sp.array.adjoint()
        }
    }
}

/// Draws one IRS-UT channel (`L × N`) under the configured model.
pub fn draw_irs_ut_channel<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> ComplexMatrix {
    match cfg.channel_model {
        ChannelModel::IidRayleigh => complex_gaussian(cfg.l, cfg.n, 1.0, rng),
        ChannelModel::Geometric { r2, .. } => {
            let sp = draw_specular(cfg.n, cfg.l, r2, rng);
            &sp.array * diag(&sp.gains) * sp.irs.adjoint()
        }
    }
}

/// Draws `H` then `G` for a single BS-UT link.
///
/// Consumes the generator in the same order as [`draw_bs_irs_channel`]
/// followed by [`draw_irs_ut_channel`], so the matrices coincide with those
/// helpers given the same stream. Geometric draws also keep their factors.
pub fn draw_channels<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<ChannelPair> {
    cfg.validate()?;
    match cfg.channel_model {
        ChannelModel::IidRayleigh => {
            let h = complex_gaussian(cfg.n, cfg.m, 1.0, rng);
            let g = complex_gaussian(cfg.l, cfg.n, 1.0, rng);
            Ok(ChannelPair::new(h, g))
        }
        ChannelModel::Geometric { r1, r2 } => {
            let bs = draw_specular(cfg.n, cfg.m, r1, rng);
            let ut = draw_specular(cfg.n, cfg.l, r2, rng);
            let h = &bs.irs * diag(&bs.gains) * bs.array.adjoint();
            let g = &ut.array * diag(&ut.gains) * ut.irs.adjoint();
            Ok(ChannelPair {
                h,
                g,
                geometry: Some(GeometricParams {
                    a_bs: bs.array,
                    a_irs: bs.irs,
                    b_ut: ut.array,
                    b_irs: ut.irs,
                    alpha: bs.gains,
                    beta: ut.gains,
                    bs_irs_paths: bs.paths,
                    irs_ut_paths: ut.paths,
                }),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::singular_values;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn iid_draws_are_reproducible() {
        let cfg = SystemConfig::new(2, 2, 2, 2, 2);
        let a = draw_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = draw_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn iid_entries_have_unit_variance() {
        let cfg = SystemConfig::new(2, 2, 2, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let draws = 100_000 / 4;
        let mut acc = 0.0;
        let mut count = 0usize;
        for _ in 0..draws {
            let c = draw_channels(&cfg, &mut rng).unwrap();
            for z in c.h.iter().chain(c.g.iter()) {
                acc += z.norm_sqr();
                count += 1;
            }
        }
        let var = acc / count as f64;
        assert!((var - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn single_path_channels_are_rank_one() {
        let mut cfg = SystemConfig::new(4, 4, 16, 16, 4);
        cfg.channel_model = ChannelModel::Geometric { r1: 1, r2: 1 };
        let c = draw_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        for m in [&c.h, &c.g] {
            let sv = singular_values(m);
            assert!(sv[1] < 1e-12 * sv[0]);
        }
    }

    #[test]
    fn geometric_channels_rebuild_bitwise() {
        let mut cfg = SystemConfig::new(4, 3, 9, 9, 4);
        cfg.channel_model = ChannelModel::Geometric { r1: 2, r2: 3 };
        let c = draw_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
        let geo = c.geometry.as_ref().unwrap();
        let h = &geo.a_irs * diag(&geo.alpha) * geo.a_bs.adjoint();
        let g = &geo.b_ut * diag(&geo.beta) * geo.b_irs.adjoint();
        assert_eq!(h, c.h);
        assert_eq!(g, c.g);
    }

    #[test]
    fn geometric_ranks_have_a_clear_gap() {
        let mut cfg = SystemConfig::new(6, 5, 16, 16, 6);
        cfg.channel_model = ChannelModel::Geometric { r1: 3, r2: 2 };
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let c = draw_channels(&cfg, &mut rng).unwrap();
            let sh = singular_values(&c.h);
            let sg = singular_values(&c.g);
            assert!(sh[2] > 1e6 * sh[3], "{sh:?}");
            assert!(sg[1] > 1e6 * sg[2], "{sg:?}");
        }
    }

    #[test]
    fn angles_drawn_in_stated_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..1000 {
            let p = draw_path(&mut rng);
            assert!((-FRAC_PI_2..=FRAC_PI_2).contains(&p.array_azimuth));
            assert!((-FRAC_PI_2..=FRAC_PI_2).contains(&p.irs_azimuth));
            assert!((0.0..=FRAC_PI_2).contains(&p.irs_elevation));
        }
    }

    #[test]
    fn ura_truncation_and_ula_broadside() {
        assert_eq!(steering_ura(10, 0.3, 0.2).len(), 10);
        let a = steering_ula(4, 0.0);
        assert!(a.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }
}
