use super::spec::{EstimatorKind, ExperimentSpec, SweepPoint};
use crate::error::{Error, Result};
use crate::system::{ChannelModel, PerturbationConfig, SystemConfig};

/// Preset experiments reproducing the reference result set.
pub const FIGURE_IDS: [&str; 7] = ["fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9"];

fn grid(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).step_by(5).map(f64::from).collect()
}

fn n_sweep(values: &[usize]) -> Vec<SweepPoint> {
    values
        .iter()
        .map(|&n| SweepPoint {
            n: Some(n),
            ..Default::default()
        })
        .collect()
}

fn small_irs(estimators: Vec<EstimatorKind>) -> ExperimentSpec {
    let mut system = SystemConfig::new(3, 2, 50, 50, 4);
    system.random_designs = true;
    let mut spec = ExperimentSpec::new(system, grid(0, 30), estimators, 5000);
    spec.sweep = n_sweep(&[50, 100]);
    spec.skip_infeasible = true;
    spec
}

/// The preset `id`, with its default run count replaced by `runs` when
/// given.
pub fn repro_spec(id: &str, runs: Option<usize>) -> Result<ExperimentSpec> {
    use EstimatorKind::*;
    let mut spec = match id {
        "fig3" | "fig5" => small_irs(vec![Krf, Bals]),
        "fig6" => small_irs(vec![Bals]),
        "fig4" => {
            let mut spec = ExperimentSpec::new(SystemConfig::new(3, 20, 10, 100, 4), grid(0, 30), vec![Krf, Bals], 1000);
            spec.sweep = n_sweep(&[10, 50, 100]);
            spec
        }
        "fig7" => ExperimentSpec::new(SystemConfig::new(20, 8, 50, 50, 20), grid(-10, 20), vec![Ls, Krf], 1000),
        "fig8" => {
            let mut system = SystemConfig::new(4, 4, 64, 64, 4);
            system.channel_model = ChannelModel::Geometric { r1: 1, r2: 1 };
            let mut spec = ExperimentSpec::new(system, grid(-10, 20), vec![Krf, BlockLs], 1000);
            spec.sweep = [4, 20]
                .into_iter()
                .map(|v| SweepPoint {
                    m: Some(v),
                    t: Some(v),
                    ..Default::default()
                })
                .collect();
            spec
        }
        "fig9" => {
            let mut system = SystemConfig::new(50, 4, 16, 100, 50);
            system.perturbation = Some(PerturbationConfig {
                blockage_fraction: 0.2,
                gamma: 0.01,
            });
            let mut spec = ExperimentSpec::new(system, grid(0, 30), vec![Tals, BalsPerfectIrs], 200);
            spec.sweep = n_sweep(&[16, 32]);
            spec
        }
        _ => {
            return Err(Error::InvalidConfig(format!(
                "unknown preset '{id}' (expected one of {})",
                FIGURE_IDS.join(", ")
            )))
        }
    };
    if let Some(r) = runs {
        spec.runs = r;
    }
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::plan_experiment;

    #[test]
    fn every_preset_plans() {
        for id in FIGURE_IDS {
            let spec = repro_spec(id, Some(1)).unwrap();
            let plans = plan_experiment(&spec, false).unwrap();
            assert!(plans.iter().any(|p| !p.estimators.is_empty()), "{id}");
        }
    }

    #[test]
    fn krf_dropped_where_blocks_are_short() {
        let plans = plan_experiment(&repro_spec("fig3", Some(1)).unwrap(), false).unwrap();
        assert_eq!(plans[0].estimators, vec![EstimatorKind::Krf, EstimatorKind::Bals]);
        assert_eq!(plans[1].estimators, vec![EstimatorKind::Bals]);
        assert!(repro_spec("fig10", None).is_err());
    }
}
