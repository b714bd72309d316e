use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::report::{CellSummary, MonteCarloReport, RunRecord};
use super::spec::{EstimatorKind, ExperimentSpec};
use crate::analysis::{check_design, crb_closed_form, crb_numerical, nmse, nmse_matrix, DesignDims, DesignReport};
use crate::error::{Error, Result};
use crate::estimators::{
    align_scaling, bals, bals_orthogonal, block_ls, krf, ls_composite, match_tals_columns,
    EstimationResult,
};
use crate::linalg::ComplexMatrix;
use crate::system::{build_scenario, ChannelModel, Scenario, SystemConfig};
use crate::tensor::SignalTensor3;

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "IRS_PARAFAC_THREADS";

// Largest composite length for which the numerical bound is evaluated on
// non-orthogonal designs.
const NUMERICAL_CRB_MAX_PARAMS: usize = 256;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` reads [`THREADS_ENV`], then uses all cores.
    pub threads: Option<usize>,
    /// Run cells whose design prerequisites fail; their errors count as
    /// failures.
    pub force: bool,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Scenario seed of one run, a pure function of its indices.
pub fn run_seed(master: u64, sweep: usize, snr: usize, run: usize) -> u64 {
    [sweep as u64, snr as u64, run as u64]
        .into_iter()
        .fold(splitmix64(master), |h, v| splitmix64(h ^ v))
}

pub fn estimator_seed(run_seed: u64, kind: EstimatorKind) -> u64 {
    splitmix64(run_seed ^ kind.stream_id().rotate_left(40))
}

/// Estimators that will run at one sweep point.
#[derive(Debug, Clone)]
pub struct CellPlan {
    pub sweep_key: String,
    pub config: SystemConfig,
    pub design: DesignReport,
    pub estimators: Vec<EstimatorKind>,
    /// Requested estimators dropped as infeasible, with the reason.
    pub skipped: Vec<(EstimatorKind, String)>,
}

fn design_for(cfg: &SystemConfig) -> DesignReport {
    let (rh, rg) = match (cfg.channel_model, cfg.is_single_link()) {
        (ChannelModel::Geometric { r1, r2 }, true) => (Some(r1), Some(r2)),
        _ => (None, None),
    };
    check_design(&DesignDims::from(cfg), rh, rg)
}

fn prerequisite(kind: EstimatorKind, cfg: &SystemConfig, d: &DesignReport) -> std::result::Result<(), String> {
    if !cfg.random_designs && !dft_designs(cfg) {
        return Err(format!(
            "DFT designs need K >= N and T >= {} (K={}, N={}, T={})",
            cfg.pilot_cols(),
            cfg.k,
            cfg.n,
            cfg.t
        ));
    }
    let required: &[&str] = match kind {
        EstimatorKind::Ls | EstimatorKind::Krf => &["krf_blocks", "krf_pilots"],
        EstimatorKind::Bals | EstimatorKind::BalsOrth | EstimatorKind::BalsPerfectIrs => {
            &["bals_blocks", "bals_pilots"]
        }
        EstimatorKind::Tals => &["bals_pilots", "kruskal"],
        EstimatorKind::BlockLs => &["bals_pilots"],
    };
    let failing: Vec<&str> = required
        .iter()
        .copied()
        .filter(|name| !d.get(name).is_some_and(|c| c.satisfied))
        .collect();
    if !failing.is_empty() {
        return Err(format!("{kind} prerequisites fail ({})", failing.join(", ")));
    }
    if kind == EstimatorKind::BalsOrth && !dft_designs(cfg) {
        return Err(format!("{kind} needs orthogonal DFT designs"));
    }
    Ok(())
}

// The scenario builder uses DFT designs whenever they fit.
fn dft_designs(cfg: &SystemConfig) -> bool {
    cfg.k >= cfg.n && cfg.t >= cfg.pilot_cols()
}

/// Validates the spec and resolves which estimators run at each sweep
/// point.
pub fn plan_experiment(spec: &ExperimentSpec, force: bool) -> Result<Vec<CellPlan>> {
    spec.validate()?;
    let mut plans = Vec::new();
    for (key, cfg) in spec.points() {
        let design = design_for(&cfg);
        let mut estimators = Vec::new();
        let mut skipped = Vec::new();
        for &kind in &spec.estimators {
            match prerequisite(kind, &cfg, &design) {
                Ok(()) => estimators.push(kind),
                Err(_) if force => estimators.push(kind),
                Err(why) if spec.skip_infeasible => skipped.push((kind, why)),
                Err(why) => {
                    return Err(Error::InfeasibleDesign(format!("sweep point {key}: {why}")))
                }
            }
        }
        plans.push(CellPlan {
            sweep_key: key,
            config: cfg,
            design,
            estimators,
            skipped,
        });
    }
    Ok(plans)
}

pub(crate) fn tensor_checksum(y: &SignalTensor3) -> u64 {
    // FNV-1a over the raw bits
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for z in y.as_slice() {
        for word in [z.re.to_bits(), z.im.to_bits()] {
            for b in word.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
    }
    h
}

#[derive(Debug, Clone)]
struct Outcome {
    nmse_theta: f64,
    nmse_h: f64,
    nmse_g: f64,
    iterations: usize,
    converged: bool,
    time_s: f64,
    checksum: u64,
}

struct RunResult {
    record: RunRecord,
    crb_norm: f64,
    outcomes: Vec<Option<Outcome>>,
}

fn aligned_factor_nmse(est: &EstimationResult, h: &ComplexMatrix, g: &ComplexMatrix) -> (f64, f64) {
    match (&est.h_hat, &est.g_hat) {
        (Some(hh), Some(gh)) => match align_scaling(hh, gh, h, g) {
            Ok(a) => (
                nmse_matrix(&a.h, h).unwrap_or(f64::NAN),
                nmse_matrix(&a.g, g).unwrap_or(f64::NAN),
            ),
            Err(_) => (f64::NAN, f64::NAN),
        },
        _ => (f64::NAN, f64::NAN),
    }
}

fn evaluate(
    kind: EstimatorKind,
    sc: &Scenario,
    spec: &ExperimentSpec,
    seed: u64,
) -> Result<Outcome> {
    let y = &sc.noisy;
    let checksum = tensor_checksum(y);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = sc.theta();
    let (h, g) = (&sc.truth.h, &sc.truth.g);
    let finish = |est: EstimationResult, theta_hat: &crate::linalg::ComplexVector, h_hat_g_hat: (f64, f64)| -> Result<Outcome> {
        Ok(Outcome {
            nmse_theta: nmse(theta_hat.as_slice(), theta.as_slice())?,
            nmse_h: h_hat_g_hat.0,
            nmse_g: h_hat_g_hat.1,
            iterations: est.iterations,
            converged: est.converged,
            time_s: est.wall_time_s,
            checksum,
        })
    };
    match kind {
        EstimatorKind::Ls => {
            let est = ls_composite(y, &sc.s_ideal, &sc.x)?;
            let th = est.theta_hat.clone();
            finish(est, &th, (f64::NAN, f64::NAN))
        }
        EstimatorKind::Krf | EstimatorKind::Bals | EstimatorKind::BalsOrth | EstimatorKind::BalsPerfectIrs => {
            let est = match kind {
                EstimatorKind::Krf => krf(y, &sc.s_ideal, &sc.x)?,
                EstimatorKind::Bals => bals(y, &sc.s_ideal, &sc.x, &spec.bals, &mut rng)?,
                EstimatorKind::BalsOrth => bals_orthogonal(y, &sc.s_ideal, &sc.x, &spec.bals, &mut rng)?,
                _ => bals(y, &sc.s_actual, &sc.x, &spec.bals, &mut rng)?,
            };
            let factors = aligned_factor_nmse(&est, h, g);
            let th = est.theta_hat.clone();
            finish(est, &th, factors)
        }
        EstimatorKind::Tals => {
            let est = crate::estimators::tals(y, &sc.x, &sc.s_ideal, &spec.tals, &mut rng)?;
            let s_hat = est.s_hat.as_ref().expect("trilinear fit returns the IRS estimate");
            let matching = match_tals_columns(s_hat, &sc.s_actual)?;
            let rows = h.ncols() * g.nrows();
            let th = matching.apply(&est.theta_hat, rows);
            let factors = match (&est.h_hat, &est.g_hat) {
                (Some(hh), Some(gh)) => {
                    let mut hp = ComplexMatrix::zeros(hh.nrows(), hh.ncols());
                    let mut gp = ComplexMatrix::zeros(gh.nrows(), gh.ncols());
                    for (n, &src) in matching.source.iter().enumerate() {
                        hp.set_row(n, &hh.row(src));
                        gp.set_column(n, &gh.column(src));
                    }
                    let permuted = EstimationResult {
                        h_hat: Some(hp),
                        g_hat: Some(gp),
                        ..Default::default()
                    };
                    aligned_factor_nmse(&permuted, h, g)
                }
                _ => (f64::NAN, f64::NAN),
            };
            finish(est, &th, factors)
        }
        EstimatorKind::BlockLs => {
            let start = std::time::Instant::now();
            let c_hat = block_ls(y, &sc.s_ideal, &sc.x)?;
            let time_s = start.elapsed().as_secs_f64();
            let c_true = sc.cascaded_channels();
            let (mut err, mut energy) = (0.0, 0.0);
            for (e, t) in c_hat.iter().zip(&c_true) {
                err += (t - e).norm_squared();
                energy += t.norm_squared();
            }
            if energy == 0.0 {
                return Err(Error::ZeroTruth);
            }
            Ok(Outcome {
                nmse_theta: err / energy,
                nmse_h: f64::NAN,
                nmse_g: f64::NAN,
                iterations: 0,
                converged: true,
                time_s,
                checksum,
            })
        }
    }
}

fn normalized_crb(sc: &Scenario) -> f64 {
    let cfg = &sc.config;
    if sc.sigma2 == 0.0 {
        return 0.0;
    }
    if cfg.perturbation.is_some() {
        return f64::NAN;
    }
    let theta_energy = sc.theta().norm_squared();
    let (i, j) = (cfg.mode1_dim(), cfg.pilot_cols());
    let trace = if dft_designs(cfg) {
        crb_closed_form(sc.sigma2, j, i, cfg.n, cfg.k, cfg.t).trace_bound
    } else if i * j * cfg.n <= NUMERICAL_CRB_MAX_PARAMS {
        crb_numerical(&sc.s_ideal, &sc.x, i, sc.sigma2)
            .map(|r| r.trace_bound)
            .unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    trace / theta_energy
}

fn run_one(
    spec: &ExperimentSpec,
    plan: &CellPlan,
    sweep_idx: usize,
    snr_idx: usize,
    run: usize,
) -> RunResult {
    let snr = spec.snr_grid_db[snr_idx];
    let seed = run_seed(spec.master_seed, sweep_idx, snr_idx, run);
    let cfg = plan.config.clone().with_snr(snr).with_seed(seed);
    let mut record = RunRecord {
        sweep_key: plan.sweep_key.clone(),
        snr_db: snr,
        run,
        seed,
        checksum: 0,
        paired: true,
    };
    let sc = match build_scenario(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)) {
        Ok(sc) => sc,
        Err(_) => {
            return RunResult {
                record,
                crb_norm: f64::NAN,
                outcomes: vec![None; plan.estimators.len()],
            }
        }
    };
    record.checksum = tensor_checksum(&sc.noisy);
    let outcomes: Vec<Option<Outcome>> = plan
        .estimators
        .iter()
        .map(|&kind| evaluate(kind, &sc, spec, estimator_seed(seed, kind)).ok())
        .collect();
    record.paired = outcomes
        .iter()
        .flatten()
        .all(|o| o.checksum == record.checksum);
    RunResult {
        record,
        crb_norm: normalized_crb(&sc),
        outcomes,
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

fn median(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

fn summarize(kind: EstimatorKind, slot: usize, plan: &CellPlan, snr: f64, runs: &[RunResult]) -> CellSummary {
    let ok: Vec<&Outcome> = runs.iter().filter_map(|r| r.outcomes[slot].as_ref()).collect();
    let finite_mean = |f: fn(&Outcome) -> f64| {
        let vals: Vec<f64> = ok.iter().map(|o| f(o)).filter(|v| !v.is_nan()).collect();
        mean(vals.into_iter())
    };
    CellSummary {
        estimator: kind,
        sweep_key: plan.sweep_key.clone(),
        snr_db: snr,
        nmse_theta: mean(ok.iter().map(|o| o.nmse_theta)),
        nmse_h: finite_mean(|o| o.nmse_h),
        nmse_g: finite_mean(|o| o.nmse_g),
        crb_norm: mean(runs.iter().map(|r| r.crb_norm)),
        iters_mean: mean(ok.iter().map(|o| o.iterations as f64)),
        iters_median: median(ok.iter().map(|o| o.iterations as f64).collect()),
        conv_rate: ok.iter().filter(|o| o.converged).count() as f64 / runs.len() as f64,
        time_ms: 1e3 * mean(ok.iter().map(|o| o.time_s)),
        runs: runs.len(),
        failures: runs.len() - ok.len(),
    }
}

/// Runs `spec` on the global rayon pool.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<MonteCarloReport> {
    run_with_plans(spec, plan_experiment(spec, false)?)
}

/// Runs `spec` on a dedicated pool of `opts.threads` workers.
pub fn run_experiment_with(spec: &ExperimentSpec, opts: &RunOptions) -> Result<MonteCarloReport> {
    let plans = plan_experiment(spec, opts.force)?;
    let threads = opts
        .threads
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()))
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| run_with_plans(spec, plans))
}

fn run_with_plans(spec: &ExperimentSpec, plans: Vec<CellPlan>) -> Result<MonteCarloReport> {
    let mut cells = Vec::new();
    let mut records = Vec::new();
    for (sweep_idx, plan) in plans.iter().enumerate() {
        if plan.estimators.is_empty() {
            continue;
        }
        for (snr_idx, &snr) in spec.snr_grid_db.iter().enumerate() {
            let results: Vec<RunResult> = (0..spec.runs)
                .into_par_iter()
                .map(|run| run_one(spec, plan, sweep_idx, snr_idx, run))
                .collect();
            for (slot, &kind) in plan.estimators.iter().enumerate() {
                cells.push(summarize(kind, slot, plan, snr, &results));
            }
            records.extend(results.into_iter().map(|r| r.record));
        }
    }
    Ok(MonteCarloReport {
        spec: spec.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        cells,
        runs: records,
        skipped: plans
            .iter()
            .flat_map(|p| {
                p.skipped
                    .iter()
                    .map(move |(k, why)| format!("{}: {k}: {why}", p.sweep_key))
            })
            .collect(),
    })
}
