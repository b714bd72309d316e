//! Everything upstream of estimation: scenario configuration, channel draws,
//! training designs, IRS impairments and the received signal tensor.

mod channels;
mod design;
pub mod io;
mod perturbation;
mod scenario;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use channels::{
    draw_channels, draw_irs_ut_channel, draw_bs_irs_channel, steering_ula, steering_ura,
    ChannelPair, GeometricParams, PathAngles,
};
pub use design::{make_dft_matrix, random_phase_matrix};
pub use perturbation::apply_perturbation;
pub use scenario::{
    build_multibs_scenario, build_multiuser_scenario, build_scenario, Links, Scenario,
};

/// Propagation model used for the BS-IRS and IRS-UT channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelModel {
    /// i.i.d. `CN(0,1)` entries.
    #[default]
    IidRayleigh,
    /// Sum of `r1` (BS-IRS) and `r2` (IRS-UT) specular paths.
    Geometric { r1: usize, r2: usize },
}

/// Multiplicative IRS impairment `s = (a·f)·s̄` with blockage `a ∈ {0,1}` and
/// `f ~ CN(0, gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub blockage_fraction: f64,
    pub gamma: f64,
}

fn one() -> usize {
    1
}

fn infinite() -> f64 {
    f64::INFINITY
}

/// Scenario dimensions and protocol parameters.
///
/// `m`: BS antennas, `l`: UT antennas, `n`: IRS elements, `k`: training
/// blocks, `t`: slots per block. An infinite `snr_db` means noiseless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub m: usize,
    pub l: usize,
    pub n: usize,
    pub k: usize,
    pub t: usize,
    #[serde(default = "infinite")]
    pub snr_db: f64,
    #[serde(default)]
    pub channel_model: ChannelModel,
    #[serde(default)]
    pub perturbation: Option<PerturbationConfig>,
    #[serde(default = "one")]
    pub users: usize,
    #[serde(default = "one")]
    pub bs_count: usize,
    #[serde(default)]
    pub seed: u64,
    /// Use random-phase IRS/pilot matrices when the DFT design is infeasible
    /// (`K < N` or `T < M`).
    #[serde(default)]
    pub random_designs: bool,
}

impl SystemConfig {
    pub fn new(m: usize, l: usize, n: usize, k: usize, t: usize) -> Self {
        SystemConfig {
            m,
            l,
            n,
            k,
            t,
            snr_db: f64::INFINITY,
            channel_model: ChannelModel::IidRayleigh,
            perturbation: None,
            users: 1,
            bs_count: 1,
            seed: 0,
            random_designs: false,
        }
    }

    pub fn with_snr(mut self, snr_db: f64) -> Self {
        self.snr_db = snr_db;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn is_noiseless(&self) -> bool {
        self.snr_db == f64::INFINITY
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("m", self.m),
            ("l", self.l),
            ("n", self.n),
            ("k", self.k),
            ("t", self.t),
            ("users", self.users),
            ("bs_count", self.bs_count),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::InvalidConfig(format!("snr_db = {}", self.snr_db)));
        }
        if let ChannelModel::Geometric { r1, r2 } = self.channel_model {
            if r1 == 0 || r2 == 0 {
                return Err(Error::InvalidConfig("path counts must be positive".into()));
            }
            if r1 > self.m.min(self.n) {
                return Err(Error::InvalidConfig(format!(
                    "r1 = {r1} exceeds min(M, N) = {}",
                    self.m.min(self.n)
                )));
            }
            if r2 > self.l.min(self.n) {
                return Err(Error::InvalidConfig(format!(
                    "r2 = {r2} exceeds min(L, N) = {}",
                    self.l.min(self.n)
                )));
            }
        }
        if let Some(p) = &self.perturbation {
            if !(0.0..1.0).contains(&p.blockage_fraction) {
                return Err(Error::InvalidConfig(format!(
                    "blockage_fraction {} outside [0, 1)",
                    p.blockage_fraction
                )));
            }
            if !(p.gamma > 0.0) || !p.gamma.is_finite() {
                return Err(Error::InvalidConfig(format!("gamma {} must be positive", p.gamma)));
            }
        }
        Ok(())
    }

    /// Row count of the tensor's first mode: `L` for a single link, `P·M`
    /// for the uplink multi-user/multi-BS models.
    pub fn mode1_dim(&self) -> usize {
        if self.is_single_link() {
            self.l
        } else {
            self.bs_count * self.m
        }
    }

    /// Column count of the effective pilot matrix: `M` or `U·L`.
    pub fn pilot_cols(&self) -> usize {
        if self.is_single_link() {
            self.m
        } else {
            self.users * self.l
        }
    }

    pub fn is_single_link(&self) -> bool {
        self.users == 1 && self.bs_count == 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_with_defaults() {
        let cfg: SystemConfig = toml::from_str(
            r#"
            m = 3
            l = 2
            n = 4
            k = 4
            t = 3
            snr_db = 10.0
            [channel_model]
            kind = "geometric"
            r1 = 1
            r2 = 2
            "#,
        )
        .unwrap();
        assert_eq!(cfg.users, 1);
        assert_eq!(cfg.channel_model, ChannelModel::Geometric { r1: 1, r2: 2 });
        let text = toml::to_string(&cfg).unwrap();
        let back: SystemConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn noiseless_default_and_inf_parse() {
        let cfg: SystemConfig = toml::from_str("m=1\nl=1\nn=1\nk=1\nt=1\nsnr_db = inf").unwrap();
        assert!(cfg.is_noiseless());
        let cfg: SystemConfig = toml::from_str("m=1\nl=1\nn=1\nk=1\nt=1").unwrap();
        assert!(cfg.is_noiseless());
    }

    #[test]
    fn validation_catches_bad_ranks_and_dims() {
        let mut cfg = SystemConfig::new(3, 2, 4, 4, 3);
        assert!(cfg.validate().is_ok());
        cfg.channel_model = ChannelModel::Geometric { r1: 4, r2: 1 };
        assert!(cfg.validate().is_err());
        cfg.channel_model = ChannelModel::Geometric { r1: 3, r2: 3 };
        assert!(cfg.validate().is_err());
        cfg.channel_model = ChannelModel::IidRayleigh;
        cfg.k = 0;
        assert!(cfg.validate().is_err());
        cfg.k = 4;
        cfg.perturbation = Some(PerturbationConfig {
            blockage_fraction: 1.0,
            gamma: 0.01,
        });
        assert!(cfg.validate().is_err());
    }
}
