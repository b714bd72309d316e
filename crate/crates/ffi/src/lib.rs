//! C ABI over `irs-parafac`.
//!
//! Objects are opaque handles created by `irs_*_new`/`irs_estimate*` and
//! released with the matching `*_free`. Every fallible call returns an
//! [`IrsStatus`]; on failure a message is kept per thread and can be read
//! with [`irs_last_error_message`]. Complex data crosses the boundary as
//! [`IrsComplex`] arrays in column-major order; a tensor entry `(l, t, k)`
//! lives at `l + L*(t + T*k)`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use irs_parafac::analysis::{crb_closed_form, nmse};
use irs_parafac::estimators::{
    bals, bals_orthogonal, krf, ls_composite, tals, BalsOptions, EstimationResult,
};
use irs_parafac::system::{build_scenario, Scenario, SystemConfig};
use irs_parafac::{Complex64, ComplexMatrix, Error, SignalTensor3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    InfeasibleDesign = 4,
    RankDeficient = 5,
    NumericalFailure = 6,
    BufferTooSmall = 7,
    Panic = 99,
}

/// One complex double, layout-compatible with `double _Complex`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IrsComplex {
    pub re: f64,
    pub im: f64,
}

/// Estimator selector for [`irs_estimate`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrsEstimator {
    Ls = 0,
    Krf = 1,
    Bals = 2,
    BalsOrthogonal = 3,
    Tals = 4,
}

/// System dimensions: `m` BS antennas, `l` UT antennas, `n` IRS elements,
/// `k` blocks, `t` slots per block.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IrsDims {
    pub m: usize,
    pub l: usize,
    pub n: usize,
    pub k: usize,
    pub t: usize,
}

/// Trace bounds for the composite channel.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IrsCrb {
    pub trace_bound: f64,
    pub real_trace: f64,
    pub imag_trace: f64,
}

/// Opaque simulated scenario.
pub struct IrsScenario(Scenario);

/// Opaque estimator output.
pub struct IrsEstimate(EstimationResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> IrsStatus {
    match e {
        Error::ShapeMismatch { .. } | Error::ColumnMismatch { .. } | Error::InvalidMode(_) => IrsStatus::ShapeMismatch,
        Error::InfeasibleDesign(_) => IrsStatus::InfeasibleDesign,
        Error::RankDeficientDesign | Error::RankDeficientUpdate { .. } => IrsStatus::RankDeficient,
        Error::InvalidConfig(_) | Error::Parse(_) | Error::NonOrthogonalDesign { .. } => IrsStatus::InvalidArgument,
        _ => IrsStatus::NumericalFailure,
    }
}

struct Fail(IrsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> IrsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IrsStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            IrsStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(IrsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail(IrsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn read_complex<'a>(p: *const IrsComplex, len: usize, what: &str) -> Result<&'a [IrsComplex], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail(IrsStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn copy_out(src: &[Complex64], out: *mut IrsComplex, capacity: usize, what: &str) -> Result<(), Fail> {
    if capacity < src.len() {
        return Err(Fail(
            IrsStatus::BufferTooSmall,
            format!("{what} needs {} entries, buffer holds {capacity}", src.len()),
        ));
    }
    if src.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(Fail(IrsStatus::NullPointer, format!("{what} buffer is null")));
    }
    let dst = std::slice::from_raw_parts_mut(out, src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d = IrsComplex { re: s.re, im: s.im };
    }
    Ok(())
}

unsafe fn matrix(p: *const IrsComplex, rows: usize, cols: usize, what: &str) -> Result<ComplexMatrix, Fail> {
    let data = read_complex(p, rows * cols, what)?;
    Ok(ComplexMatrix::from_iterator(rows, cols, data.iter().map(|c| Complex64::new(c.re, c.im))))
}

fn nonzero(d: &IrsDims) -> Result<(), Fail> {
    if d.m * d.l * d.n * d.k * d.t == 0 {
        return Err(Fail(IrsStatus::InvalidArgument, "dimensions must be positive".into()));
    }
    Ok(())
}

fn run_estimator(kind: IrsEstimator, y: &SignalTensor3, s: &ComplexMatrix, x: &ComplexMatrix, seed: u64) -> irs_parafac::Result<EstimationResult> {
    let rng = &mut ChaCha8Rng::seed_from_u64(seed);
    match kind {
        IrsEstimator::Ls => ls_composite(y, s, x),
        IrsEstimator::Krf => krf(y, s, x),
        IrsEstimator::Bals => bals(y, s, x, &BalsOptions::default(), rng),
        IrsEstimator::BalsOrthogonal => bals_orthogonal(y, s, x, &BalsOptions::default(), rng),
        IrsEstimator::Tals => tals(y, x, s, &BalsOptions::tals_default(), rng),
    }
}

/// Copies the message of the last failed call on this thread into `buf`
/// (NUL-terminated, truncated to `len`). Returns the full message length
/// excluding the terminator, or 0 when there is none.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn irs_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn irs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Simulates an i.i.d. Rayleigh scenario. `snr_db` may be `INFINITY` for a
/// noiseless tensor. With `random_designs` nonzero, random-phase IRS and
/// pilot matrices replace the DFT designs.
///
/// # Safety
/// `out` must be a valid pointer; the handle written there must be released
/// with [`irs_scenario_free`].
#[no_mangle]
pub unsafe extern "C" fn irs_scenario_new(
    dims: IrsDims,
    snr_db: f64,
    random_designs: bool,
    seed: u64,
    out: *mut *mut IrsScenario,
) -> IrsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        nonzero(&dims)?;
        let mut cfg = SystemConfig::new(dims.m, dims.l, dims.n, dims.k, dims.t)
            .with_snr(snr_db)
            .with_seed(seed);
        cfg.random_designs = random_designs;
        let sc = build_scenario(&cfg, &mut ChaCha8Rng::seed_from_u64(seed))?;
        *out = Box::into_raw(Box::new(IrsScenario(sc)));
        Ok(())
    })
}

/// # Safety
/// `sc` must be null or a handle from [`irs_scenario_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn irs_scenario_free(sc: *mut IrsScenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}

/// # Safety
/// `sc` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn irs_scenario_dims(sc: *const IrsScenario, out: *mut IrsDims) -> IrsStatus {
    guard(|| {
        let c = &deref(sc, "scenario")?.0.config;
        *out_ref(out, "out")? = IrsDims { m: c.m, l: c.l, n: c.n, k: c.k, t: c.t };
        Ok(())
    })
}

/// Realized per-entry noise variance.
///
/// # Safety
/// `sc` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn irs_scenario_sigma2(sc: *const IrsScenario, out: *mut f64) -> IrsStatus {
    guard(|| {
        *out_ref(out, "out")? = deref(sc, "scenario")?.0.sigma2;
        Ok(())
    })
}

/// True composite channel, `M*L*N` entries.
///
/// # Safety
/// `sc` must be valid and `out` valid for `capacity` entries.
#[no_mangle]
pub unsafe extern "C" fn irs_scenario_theta(sc: *const IrsScenario, out: *mut IrsComplex, capacity: usize) -> IrsStatus {
    guard(|| copy_out(deref(sc, "scenario")?.0.theta().as_slice(), out, capacity, "theta"))
}

/// Received tensor, `L*T*K` entries.
///
/// # Safety
/// `sc` must be valid and `out` valid for `capacity` entries.
#[no_mangle]
pub unsafe extern "C" fn irs_scenario_tensor(sc: *const IrsScenario, out: *mut IrsComplex, capacity: usize) -> IrsStatus {
    guard(|| copy_out(deref(sc, "scenario")?.0.noisy.as_slice(), out, capacity, "tensor"))
}

/// IRS phase matrix `K x N` known to the receiver.
///
/// # Safety
/// `sc` must be valid and `out` valid for `capacity` entries.
#[no_mangle]
pub unsafe extern "C" fn irs_scenario_irs_matrix(sc: *const IrsScenario, out: *mut IrsComplex, capacity: usize) -> IrsStatus {
    guard(|| copy_out(deref(sc, "scenario")?.0.s_ideal.as_slice(), out, capacity, "irs matrix"))
}

/// Pilot matrix `T x M`.
///
/// # Safety
/// `sc` must be valid and `out` valid for `capacity` entries.
#[no_mangle]
pub unsafe extern "C" fn irs_scenario_pilots(sc: *const IrsScenario, out: *mut IrsComplex, capacity: usize) -> IrsStatus {
    guard(|| copy_out(deref(sc, "scenario")?.0.x.as_slice(), out, capacity, "pilots"))
}

/// Runs an estimator on a simulated scenario. `seed` drives the random
/// initialization of the alternating estimators.
///
/// # Safety
/// `sc` and `out` must be valid; release the result with [`irs_estimate_free`].
#[no_mangle]
pub unsafe extern "C" fn irs_estimate(
    sc: *const IrsScenario,
    kind: IrsEstimator,
    seed: u64,
    out: *mut *mut IrsEstimate,
) -> IrsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let sc = &deref(sc, "scenario")?.0;
        let est = run_estimator(kind, &sc.noisy, &sc.s_ideal, &sc.x, seed)?;
        *out = Box::into_raw(Box::new(IrsEstimate(est)));
        Ok(())
    })
}

/// Runs an estimator on caller data: `y` holds `L*T*K` entries, `irs` the
/// `K x N` IRS matrix and `pilots` the `T x M` pilot matrix.
///
/// # Safety
/// Every array must be valid for the length implied by `dims`; `out` must be
/// valid.
#[no_mangle]
pub unsafe extern "C" fn irs_estimate_raw(
    dims: IrsDims,
    y: *const IrsComplex,
    irs: *const IrsComplex,
    pilots: *const IrsComplex,
    kind: IrsEstimator,
    seed: u64,
    out: *mut *mut IrsEstimate,
) -> IrsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        nonzero(&dims)?;
        let IrsDims { m, l, n, k, t } = dims;
        let data = read_complex(y, l * t * k, "y")?;
        let tensor = SignalTensor3::from_fn((l, t, k), |a, b, c| {
            let v = data[a + l * (b + t * c)];
            Complex64::new(v.re, v.im)
        });
        let s = matrix(irs, k, n, "irs")?;
        let x = matrix(pilots, t, m, "pilots")?;
        let est = run_estimator(kind, &tensor, &s, &x, seed)?;
        *out = Box::into_raw(Box::new(IrsEstimate(est)));
        Ok(())
    })
}

/// # Safety
/// `est` must be null or a handle from [`irs_estimate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn irs_estimate_free(est: *mut IrsEstimate) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// Estimated composite channel, `M*L*N` entries.
///
/// # Safety
/// `est` must be valid and `out` valid for `capacity` entries.
#[no_mangle]
pub unsafe extern "C" fn irs_estimate_theta(est: *const IrsEstimate, out: *mut IrsComplex, capacity: usize) -> IrsStatus {
    guard(|| copy_out(deref(est, "estimate")?.0.theta_hat.as_slice(), out, capacity, "theta"))
}

/// Iteration count and convergence flag. Non-iterative estimators report
/// zero iterations.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn irs_estimate_iterations(
    est: *const IrsEstimate,
    iterations: *mut usize,
    converged: *mut bool,
) -> IrsStatus {
    guard(|| {
        let e = &deref(est, "estimate")?.0;
        *out_ref(iterations, "iterations")? = e.iterations;
        *out_ref(converged, "converged")? = e.converged;
        Ok(())
    })
}

/// Normalized squared error of the composite estimate against the scenario.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn irs_estimate_nmse(est: *const IrsEstimate, sc: *const IrsScenario, out: *mut f64) -> IrsStatus {
    guard(|| {
        let e = &deref(est, "estimate")?.0;
        let truth = deref(sc, "scenario")?.0.theta();
        *out_ref(out, "out")? = nmse(e.theta_hat.as_slice(), truth.as_slice())?;
        Ok(())
    })
}

/// Closed-form bound for orthogonal designs at noise variance `sigma2`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn irs_crb_closed_form(dims: IrsDims, sigma2: f64, out: *mut IrsCrb) -> IrsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        nonzero(&dims)?;
        if !(sigma2 > 0.0) {
            return Err(Fail(IrsStatus::InvalidArgument, "sigma2 must be positive".into()));
        }
        let r = crb_closed_form(sigma2, dims.m, dims.l, dims.n, dims.k, dims.t);
        *out = IrsCrb {
            trace_bound: r.trace_bound,
            real_trace: r.real_trace,
            imag_trace: r.imag_trace,
        };
        Ok(())
    })
}
