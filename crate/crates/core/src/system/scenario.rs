use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::channels::{draw_bs_irs_channel, draw_channels, draw_irs_ut_channel, ChannelPair};
use super::design::{make_dft_matrix, random_phase_matrix};
use super::perturbation::apply_perturbation;
use super::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{khatri_rao, vec, ComplexMatrix, ComplexVector};
use crate::tensor::{build_parafac_tensor, SignalTensor3};
use num_complex::Complex64;

/// Physical channels behind a scenario: one `N × M` matrix per BS and one
/// `L × N` matrix per UT.
#[derive(Debug, Clone, PartialEq)]
pub struct Links {
    pub bs_irs: Vec<ComplexMatrix>,
    pub irs_ut: Vec<ComplexMatrix>,
}

/// One synthesized training realization.
///
/// `truth` holds the effective factors of the tensor model
/// `𝒴̄ = [[truth.g, x·truth.hᵀ, s_actual]]`. For a single link these are the
/// physical `(H, G)`. For the uplink multi-user/multi-BS models the roles are
/// swapped: `truth.g` stacks `H_pᵀ` (`PM × N`) and `truth.h` is
/// `[G₁ᵀ, …, G_Uᵀ]` (`N × UL`), with `x` the stacked pilots `[X₁, …, X_U]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: SystemConfig,
    pub truth: ChannelPair,
    pub links: Links,
    /// IRS matrix known to the receiver.
    pub s_ideal: ComplexMatrix,
    /// IRS matrix that actually shaped the received signal.
    pub s_actual: ComplexMatrix,
    pub x: ComplexMatrix,
    pub noiseless: SignalTensor3,
    pub noise: SignalTensor3,
    pub noisy: SignalTensor3,
    /// Realized per-entry noise variance `‖ℬ‖²_F / (LTK)`.
    pub sigma2: f64,
}

impl Scenario {
    /// Assembles the tensors from known factors and draws calibrated noise.
    pub fn from_parts<R: Rng + ?Sized>(
        config: SystemConfig,
        truth: ChannelPair,
        links: Links,
        s_ideal: ComplexMatrix,
        s_actual: ComplexMatrix,
        x: ComplexMatrix,
        noise_rng: &mut R,
    ) -> Result<Self> {
        if x.ncols() != truth.h.ncols() {
            return Err(Error::shape(
                "scenario",
                format!("pilot has {} columns, channel {}", x.ncols(), truth.h.ncols()),
            ));
        }
        let z = &x * truth.h.transpose();
        let noiseless = build_parafac_tensor(&truth.g, &z, &s_actual)?;
        let noise = calibrated_noise(&noiseless, config.snr_db, noise_rng)?;
        let noisy = noiseless.add(&noise)?;
        let (l, t, k) = noiseless.dims();
        let sigma2 = noise.frob_norm_sq() / (l * t * k) as f64;
        Ok(Scenario {
            config,
            truth,
            links,
            s_ideal,
            s_actual,
            x,
            noiseless,
            noise,
            noisy,
            sigma2,
        })
    }

    /// Composite channel `θ = vec(Hᵀ ◇ G)`.
    pub fn theta(&self) -> ComplexVector {
        vec(&khatri_rao(&self.truth.h.transpose(), &self.truth.g)
            .expect("truth factors share the IRS dimension"))
    }

    /// `10·log10(‖𝒴̄‖² / ‖ℬ‖²)`; infinite when noiseless.
    pub fn realized_snr_db(&self) -> f64 {
        let noise = self.noise.frob_norm_sq();
        if noise == 0.0 {
            f64::INFINITY
        } else {
            10.0 * (self.noiseless.frob_norm_sq() / noise).log10()
        }
    }

    /// Cascaded channels `C_k = G·D_k(S)·H` for every block.
    pub fn cascaded_channels(&self) -> Vec<ComplexMatrix> {
        cascaded(&self.truth.g, &self.s_actual, &self.truth.h)
    }
}

pub(crate) fn cascaded(g: &ComplexMatrix, s: &ComplexMatrix, h: &ComplexMatrix) -> Vec<ComplexMatrix> {
    (0..s.nrows())
        .map(|k| g * crate::linalg::diag_of_row(s, k) * h)
        .collect()
}

struct SubSeeds {
    designs: ChaCha8Rng,
    perturbation: ChaCha8Rng,
    channels: ChaCha8Rng,
    noise: ChaCha8Rng,
}

// Independent streams keep channel and noise draws unchanged when optional
// steps (random designs, perturbation) are toggled.
fn split<R: Rng + ?Sized>(rng: &mut R) -> SubSeeds {
    let mut next = || ChaCha8Rng::seed_from_u64(rng.random());
    SubSeeds {
        designs: next(),
        perturbation: next(),
        channels: next(),
        noise: next(),
    }
}

fn design_matrix(
    rows: usize,
    cols: usize,
    allow_random: bool,
    rng: &mut ChaCha8Rng,
    what: &str,
) -> Result<ComplexMatrix> {
    if cols <= rows {
        make_dft_matrix(rows, cols)
    } else if allow_random {
        Ok(random_phase_matrix(rows, cols, rng))
    } else {
        Err(Error::InfeasibleDesign(format!(
            "{what} needs {rows} >= {cols} for a DFT design (set random_designs to override)"
        )))
    }
}

fn calibrated_noise<R: Rng + ?Sized>(
    noiseless: &SignalTensor3,
    snr_db: f64,
    rng: &mut R,
) -> Result<SignalTensor3> {
    let dims = noiseless.dims();
    if snr_db == f64::INFINITY {
        return Ok(SignalTensor3::zeros(dims));
    }
    let signal = noiseless.frob_norm_sq();
    if signal == 0.0 {
        return Err(Error::InvalidConfig(
            "noiseless signal is zero; SNR is undefined".into(),
        ));
    }
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut noise = SignalTensor3::from_fn(dims, |_, _, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    });
    let target = signal / 10f64.powf(snr_db / 10.0);
    let drawn = noise.frob_norm_sq();
    noise.scale((target / drawn).sqrt());
    Ok(noise)
}

/// Single BS / single UT training realization.
///
/// Multi-user or multi-BS configurations are forwarded to
/// [`build_multibs_scenario`].
pub fn build_scenario<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Result<Scenario> {
    config.validate()?;
    if !config.is_single_link() {
        return build_multibs_scenario(config, rng);
    }
    let mut seeds = split(rng);
    let s_ideal = design_matrix(
        config.k,
        config.n,
        config.random_designs,
        &mut seeds.designs,
        "IRS matrix (K >= N)",
    )?;
    let x = design_matrix(
        config.t,
        config.m,
        config.random_designs,
        &mut seeds.designs,
        "pilot matrix (T >= M)",
    )?;
    let s_actual = match &config.perturbation {
        Some(p) => apply_perturbation(&s_ideal, p, &mut seeds.perturbation),
        None => s_ideal.clone(),
    };
    let truth = draw_channels(config, &mut seeds.channels)?;
    let links = Links {
        bs_irs: vec![truth.h.clone()],
        irs_ut: vec![truth.g.clone()],
    };
    Scenario::from_parts(
        config.clone(),
        truth,
        links,
        s_ideal,
        s_actual,
        x,
        &mut seeds.noise,
    )
}

/// Uplink with `U` users and one BS: tensor `M × T × K` with factors
/// `(Hᵀ, X̄Ḡ, S)`.
pub fn build_multiuser_scenario<R: Rng + ?Sized>(
    config: &SystemConfig,
    rng: &mut R,
) -> Result<Scenario> {
    if config.bs_count != 1 {
        return Err(Error::InvalidConfig(
            "multi-user scenario expects a single BS".into(),
        ));
    }
    build_multibs_scenario(config, rng)
}

/// Uplink with `U` users and `P` cooperating BSs: tensor `PM × T × K` with
/// factors `([H₁ᵀ; …; H_Pᵀ], X̄Ḡ, S)`.
///
/// Users transmit disjoint column blocks of one `T × UL` truncated DFT, so
/// `T ≥ UL` is required.
pub fn build_multibs_scenario<R: Rng + ?Sized>(
    config: &SystemConfig,
    rng: &mut R,
) -> Result<Scenario> {
    config.validate()?;
    let ul = config.users * config.l;
    if config.t < ul {
        return Err(Error::InfeasibleDesign(format!(
            "stacked pilots need T >= U·L ({} < {ul})",
            config.t
        )));
    }
    let mut seeds = split(rng);
    let s_ideal = design_matrix(
        config.k,
        config.n,
        config.random_designs,
        &mut seeds.designs,
        "IRS matrix (K >= N)",
    )?;
    let x = make_dft_matrix(config.t, ul)?;
    let s_actual = match &config.perturbation {
        Some(p) => apply_perturbation(&s_ideal, p, &mut seeds.perturbation),
        None => s_ideal.clone(),
    };
    let bs_irs: Vec<ComplexMatrix> = (0..config.bs_count)
        .map(|_| draw_bs_irs_channel(config, &mut seeds.channels))
        .collect();
    let irs_ut: Vec<ComplexMatrix> = (0..config.users)
        .map(|_| draw_irs_ut_channel(config, &mut seeds.channels))
        .collect();

    let (m, n, l) = (config.m, config.n, config.l);
    let mut mode1 = ComplexMatrix::zeros(config.bs_count * m, n);
    for (p, h) in bs_irs.iter().enumerate() {
        mode1.view_mut((p * m, 0), (m, n)).copy_from(&h.transpose());
    }
    let mut inner = ComplexMatrix::zeros(n, ul);
    for (u, g) in irs_ut.iter().enumerate() {
        inner.view_mut((0, u * l), (n, l)).copy_from(&g.transpose());
    }
    Scenario::from_parts(
        config.clone(),
        ChannelPair::new(inner, mode1),
        Links { bs_irs, irs_ut },
        s_ideal,
        s_actual,
        x,
        &mut seeds.noise,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_of_row, kron, max_abs};
    use crate::system::{ChannelModel, PerturbationConfig};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn noiseless_has_zero_noise() {
        let cfg = SystemConfig::new(3, 2, 4, 4, 3);
        let sc = build_scenario(&cfg, &mut rng(1)).unwrap();
        assert_eq!(sc.noise.frob_norm_sq(), 0.0);
        assert_eq!(sc.noisy, sc.noiseless);
        assert_eq!(sc.sigma2, 0.0);
    }

    #[test]
    fn snr_identity_holds_exactly() {
        for (i, snr) in [-10.0, 0.0, 7.5, 30.0].into_iter().enumerate() {
            let cfg = SystemConfig::new(3, 2, 4, 4, 3).with_snr(snr);
            let sc = build_scenario(&cfg, &mut rng(i as u64)).unwrap();
            assert!((sc.realized_snr_db() - snr).abs() < 1e-10);
            let diff = sc.noisy.sub(&sc.noiseless).unwrap().sub(&sc.noise).unwrap();
            assert!(diff.frob_norm_sq() < 1e-28);
        }
    }

    #[test]
    fn slices_match_matrix_product_path() {
        let cfg = SystemConfig::new(3, 2, 4, 4, 3).with_snr(10.0);
        let sc = build_scenario(&cfg, &mut rng(2)).unwrap();
        let (h, g) = (&sc.truth.h, &sc.truth.g);
        for k in 0..4 {
            let expected = g * diag_of_row(&sc.s_actual, k) * h * sc.x.transpose();
            assert!(max_abs(&(sc.noiseless.slice(k) - expected)) < 1e-12);
        }
    }

    #[test]
    fn unfoldings_match_factor_forms() {
        let mut cfg = SystemConfig::new(3, 2, 5, 6, 4).with_snr(5.0);
        cfg.perturbation = Some(PerturbationConfig {
            blockage_fraction: 0.2,
            gamma: 0.5,
        });
        let sc = build_scenario(&cfg, &mut rng(3)).unwrap();
        let (h, g, s) = (&sc.truth.h, &sc.truth.g, &sc.s_actual);
        let z = &sc.x * h.transpose();
        let y = &sc.noiseless;
        let y1 = g * khatri_rao(s, &z).unwrap().transpose();
        let y2 = &z * khatri_rao(s, g).unwrap().transpose();
        let y3 = s * khatri_rao(&z, g).unwrap().transpose();
        assert!(max_abs(&(y.unfold(1).unwrap() - y1)) < 1e-12);
        assert!(max_abs(&(y.unfold(2).unwrap() - y2)) < 1e-12);
        assert!(max_abs(&(y.unfold(3).unwrap() - y3)) < 1e-12);
    }

    #[test]
    fn linear_model_matches_vectorized_mode3() {
        let cfg = SystemConfig::new(2, 2, 3, 4, 2).with_snr(20.0);
        let sc = build_scenario(&cfg, &mut rng(4)).unwrap();
        let y = vec(&sc.noiseless.unfold(3).unwrap().transpose());
        let u = kron(
            &kron(&sc.s_actual, &sc.x),
            &ComplexMatrix::identity(cfg.l, cfg.l),
        );
        let predicted = u * sc.theta();
        assert!(max_abs(&(y - predicted)) < 1e-12);
    }

    #[test]
    fn identical_seed_is_bit_identical() {
        let mut cfg = SystemConfig::new(3, 2, 4, 4, 3).with_snr(3.0);
        cfg.channel_model = ChannelModel::Geometric { r1: 1, r2: 2 };
        let a = build_scenario(&cfg, &mut rng(5)).unwrap();
        let b = build_scenario(&cfg, &mut rng(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dft_feasibility_enforced() {
        let cfg = SystemConfig::new(3, 2, 8, 4, 3);
        assert!(matches!(
            build_scenario(&cfg, &mut rng(6)),
            Err(Error::InfeasibleDesign(_))
        ));
        let mut cfg = cfg;
        cfg.random_designs = true;
        let sc = build_scenario(&cfg, &mut rng(6)).unwrap();
        assert!(sc.s_ideal.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn unperturbed_actual_equals_ideal() {
        let sc = build_scenario(&SystemConfig::new(2, 2, 3, 3, 2), &mut rng(7)).unwrap();
        assert_eq!(sc.s_actual, sc.s_ideal);
    }

    #[test]
    fn perturbation_does_not_change_channels_or_noise() {
        let base = SystemConfig::new(2, 2, 3, 3, 2).with_snr(10.0);
        let mut pert = base.clone();
        pert.perturbation = Some(PerturbationConfig {
            blockage_fraction: 0.1,
            gamma: 0.01,
        });
        let a = build_scenario(&base, &mut rng(8)).unwrap();
        let b = build_scenario(&pert, &mut rng(8)).unwrap();
        assert_eq!(a.truth, b.truth);
        assert_ne!(a.s_actual, b.s_actual);
    }

    #[test]
    fn multiuser_matches_per_user_sum() {
        let mut cfg = SystemConfig::new(2, 1, 2, 2, 2).with_snr(f64::INFINITY);
        cfg.users = 2;
        let sc = build_multiuser_scenario(&cfg, &mut rng(9)).unwrap();
        assert_eq!(sc.noiseless.dims(), (2, 2, 2));
        let h = &sc.links.bs_irs[0];
        for k in 0..2 {
            let mut expected = ComplexMatrix::zeros(2, 2);
            for u in 0..2 {
                let xu = sc.x.columns(u, 1).into_owned();
                let gu = &sc.links.irs_ut[u];
                expected += h.transpose() * diag_of_row(&sc.s_actual, k) * (xu * gu).transpose();
            }
            assert!(max_abs(&(sc.noiseless.slice(k) - expected)) < 1e-12);
        }
        for u in 0..2 {
            let block = sc.truth.h.columns(u, 1).transpose();
            assert_eq!(block, sc.links.irs_ut[u]);
        }
    }

    #[test]
    fn multiuser_requires_enough_slots() {
        let mut cfg = SystemConfig::new(2, 2, 2, 2, 3);
        cfg.users = 2;
        assert!(matches!(
            build_multiuser_scenario(&cfg, &mut rng(10)),
            Err(Error::InfeasibleDesign(_))
        ));
    }

    #[test]
    fn single_user_multiuser_is_role_swapped_single_link() {
        let mut cfg = SystemConfig::new(3, 2, 4, 4, 3).with_snr(12.0);
        cfg.users = 1;
        cfg.bs_count = 1;
        let multi = build_multibs_scenario(&cfg, &mut rng(11)).unwrap();
        // Same tensor from the single-link assembly with M and L exchanged.
        let swapped = SystemConfig::new(cfg.l, cfg.m, cfg.n, cfg.k, cfg.t).with_snr(12.0);
        let truth = ChannelPair::new(
            multi.links.irs_ut[0].transpose(),
            multi.links.bs_irs[0].transpose(),
        );
        let single = Scenario::from_parts(
            swapped,
            truth,
            multi.links.clone(),
            multi.s_ideal.clone(),
            multi.s_actual.clone(),
            make_dft_matrix(cfg.t, cfg.l).unwrap(),
            &mut rng(0),
        )
        .unwrap();
        assert!(max_abs(&(single.noiseless.unfold(1).unwrap() - multi.noiseless.unfold(1).unwrap())) < 1e-12);
        assert_eq!(single.theta(), multi.theta());
    }

    #[test]
    fn multibs_stacks_per_bs_slices() {
        let mut cfg = SystemConfig::new(2, 1, 3, 3, 2);
        cfg.bs_count = 2;
        cfg.users = 2;
        let sc = build_multibs_scenario(&cfg, &mut rng(12)).unwrap();
        assert_eq!(sc.noiseless.dims(), (4, 2, 3));
        let zbar = &sc.x * sc.truth.h.transpose();
        for k in 0..3 {
            let slice = sc.noiseless.slice(k);
            for (p, hp) in sc.links.bs_irs.iter().enumerate() {
                let per_bs = hp.transpose() * diag_of_row(&sc.s_actual, k) * zbar.transpose();
                let block = slice.rows(p * 2, 2).into_owned();
                assert!(max_abs(&(block - per_bs)) < 1e-12);
            }
        }
    }

    #[test]
    fn single_bs_multibs_equals_multiuser() {
        let mut cfg = SystemConfig::new(2, 1, 3, 3, 2).with_snr(4.0);
        cfg.users = 2;
        let a = build_multiuser_scenario(&cfg, &mut rng(13)).unwrap();
        let b = build_multibs_scenario(&cfg, &mut rng(13)).unwrap();
        assert_eq!(a, b);
    }
}
