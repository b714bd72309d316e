use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::BalsOptions;
use crate::system::{ChannelModel, PerturbationConfig, SystemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Ls,
    Krf,
    Bals,
    BalsOrth,
    Tals,
    BlockLs,
    /// BALS handed the IRS matrix that actually shaped the signal.
    BalsPerfectIrs,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 7] = [
        EstimatorKind::Ls,
        EstimatorKind::Krf,
        EstimatorKind::Bals,
        EstimatorKind::BalsOrth,
        EstimatorKind::Tals,
        EstimatorKind::BlockLs,
        EstimatorKind::BalsPerfectIrs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Ls => "ls",
            EstimatorKind::Krf => "krf",
            EstimatorKind::Bals => "bals",
            EstimatorKind::BalsOrth => "bals_orth",
            EstimatorKind::Tals => "tals",
            EstimatorKind::BlockLs => "block_ls",
            EstimatorKind::BalsPerfectIrs => "bals_perfect_irs",
        }
    }

    /// Stable index used to derive per-estimator random streams.
    pub fn stream_id(self) -> u64 {
        match self {
            EstimatorKind::Ls => 1,
            EstimatorKind::Krf => 2,
            EstimatorKind::Bals => 3,
            EstimatorKind::BalsOrth => 4,
            EstimatorKind::Tals => 5,
            EstimatorKind::BlockLs => 6,
            EstimatorKind::BalsPerfectIrs => 7,
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown estimator '{s}'")))
    }
}

/// Overrides applied to the base system for one sweep point.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPoint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub users: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bs_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_model: Option<ChannelModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationConfig>,
}

impl SweepPoint {
    pub fn apply(&self, base: &SystemConfig) -> SystemConfig {
        let mut c = base.clone();
        let fields = [
            (&mut c.m, self.m),
            (&mut c.l, self.l),
            (&mut c.n, self.n),
            (&mut c.k, self.k),
            (&mut c.t, self.t),
            (&mut c.users, self.users),
            (&mut c.bs_count, self.bs_count),
        ];
        for (slot, v) in fields {
            if let Some(v) = v {
                *slot = v;
            }
        }
        if let Some(cm) = self.channel_model {
            c.channel_model = cm;
        }
        if let Some(p) = self.perturbation {
            c.perturbation = Some(p);
        }
        c
    }

    /// The label, or the overridden fields as `name=value` pairs.
    pub fn key(&self) -> String {
        if let Some(label) = &self.label {
            return label.clone();
        }
        let mut parts = Vec::new();
        for (name, v) in [
            ("m", self.m),
            ("l", self.l),
            ("n", self.n),
            ("k", self.k),
            ("t", self.t),
            ("users", self.users),
            ("bs_count", self.bs_count),
        ] {
            if let Some(v) = v {
                parts.push(format!("{name}={v}"));
            }
        }
        if parts.is_empty() {
            "base".to_string()
        } else {
            parts.join(";")
        }
    }
}

fn tals_options() -> BalsOptions {
    BalsOptions::tals_default()
}

/// One Monte Carlo experiment: a base system swept over SNR and optional
/// dimension overrides.
///
/// The base system's `snr_db` and `seed` are ignored; the grid and
/// `master_seed` take their place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub snr_grid_db: Vec<f64>,
    pub estimators: Vec<EstimatorKind>,
    pub runs: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    /// Drop (estimator, sweep point) cells that fail their design
    /// prerequisites instead of refusing to start.
    #[serde(default)]
    pub skip_infeasible: bool,
    pub system: SystemConfig,
    #[serde(default)]
    pub bals: BalsOptions,
    #[serde(default = "tals_options")]
    pub tals: BalsOptions,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepPoint>,
}

impl ExperimentSpec {
    pub fn new(system: SystemConfig, snr_grid_db: Vec<f64>, estimators: Vec<EstimatorKind>, runs: usize) -> Self {
        ExperimentSpec {
            snr_grid_db,
            estimators,
            runs,
            master_seed: 0,
            output_path: None,
            skip_infeasible: false,
            system,
            bals: BalsOptions::default(),
            tals: BalsOptions::tals_default(),
            sweep: Vec::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec =
            toml::from_str(text).map_err(|e| Error::Parse(format!("spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(format!("spec: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidConfig("runs must be at least 1".into()));
        }
        if self.snr_grid_db.is_empty() {
            return Err(Error::InvalidConfig("snr_grid_db is empty".into()));
        }
        if let Some(bad) = self.snr_grid_db.iter().find(|s| s.is_nan() || **s == f64::NEG_INFINITY) {
            return Err(Error::InvalidConfig(format!("snr grid entry {bad}")));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidConfig("no estimators requested".into()));
        }
        self.bals.validate()?;
        self.tals.validate()?;
        for (_, cfg) in self.points() {
            cfg.validate()?;
        }
        Ok(())
    }

    /// `(sweep_key, config)` for every sweep point, or the base alone.
    pub fn points(&self) -> Vec<(String, SystemConfig)> {
        if self.sweep.is_empty() {
            vec![("base".to_string(), self.system.clone())]
        } else {
            self.sweep
                .iter()
                .map(|p| (p.key(), p.apply(&self.system)))
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPEC: &str = r#"
        snr_grid_db = [0.0, 10.0, inf]
        estimators = ["krf", "bals"]
        runs = 10
        master_seed = 42

        [system]
        m = 3
        l = 2
        n = 50
        k = 50
        t = 4

        [bals]
        delta = 1e-6

        [[sweep]]
        n = 50

        [[sweep]]
        n = 100
        label = "big"
    "#;

    #[test]
    fn parses_and_round_trips() {
        let spec = ExperimentSpec::from_toml(SPEC).unwrap();
        assert_eq!(spec.estimators, vec![EstimatorKind::Krf, EstimatorKind::Bals]);
        assert_eq!(spec.bals.delta, 1e-6);
        assert_eq!(spec.bals.max_iter, 100);
        assert_eq!(spec.tals.max_iter, 500);
        let keys: Vec<String> = spec.points().into_iter().map(|(k, _)| k).collect();
        assert_eq!(keys, vec!["n=50", "big"]);
        assert_eq!(spec.points()[1].1.n, 100);
        let back = ExperimentSpec::from_toml(&spec.to_toml().unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn rejects_unknown_fields_and_empty_runs() {
        assert!(ExperimentSpec::from_toml(&SPEC.replace("runs = 10", "runs = 0")).is_err());
        assert!(ExperimentSpec::from_toml(&format!("bogus = 1\n{SPEC}")).is_err());
    }

    #[test]
    fn estimator_names_round_trip() {
        for k in EstimatorKind::ALL {
            assert_eq!(k.name().parse::<EstimatorKind>().unwrap(), k);
        }
        assert!("nope".parse::<EstimatorKind>().is_err());
    }
}
