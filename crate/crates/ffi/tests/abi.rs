use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use irs_parafac_ffi::*;

fn dims(m: usize, l: usize, n: usize, k: usize, t: usize) -> IrsDims {
    IrsDims { m, l, n, k, t }
}

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    let len = unsafe { irs_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(len > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

struct Scenario(*mut IrsScenario);

impl Scenario {
    fn new(d: IrsDims, snr_db: f64, seed: u64) -> Self {
        let mut sc = ptr::null_mut();
        assert_eq!(unsafe { irs_scenario_new(d, snr_db, false, seed, &mut sc) }, IrsStatus::Ok);
        Scenario(sc)
    }
}

impl Drop for Scenario {
    fn drop(&mut self) {
        unsafe { irs_scenario_free(self.0) }
    }
}

fn estimate_nmse(sc: &Scenario, kind: IrsEstimator) -> (f64, usize) {
    let mut est = ptr::null_mut();
    assert_eq!(unsafe { irs_estimate(sc.0, kind, 7, &mut est) }, IrsStatus::Ok);
    let (mut nmse, mut iters, mut conv) = (f64::NAN, 0, false);
    unsafe {
        assert_eq!(irs_estimate_nmse(est, sc.0, &mut nmse), IrsStatus::Ok);
        assert_eq!(irs_estimate_iterations(est, &mut iters, &mut conv), IrsStatus::Ok);
        irs_estimate_free(est);
    }
    (nmse, iters)
}

#[test]
fn noiseless_recovery_through_handles() {
    let sc = Scenario::new(dims(3, 2, 4, 4, 3), f64::INFINITY, 1);
    for kind in [IrsEstimator::Ls, IrsEstimator::Krf, IrsEstimator::Bals, IrsEstimator::BalsOrthogonal] {
        let (nmse, _) = estimate_nmse(&sc, kind);
        assert!(nmse < 1e-20, "{kind:?}: {nmse}");
    }
    let (_, iters) = estimate_nmse(&sc, IrsEstimator::Bals);
    assert!(iters >= 1);
}

#[test]
fn raw_data_matches_scenario_path() {
    let d = dims(2, 2, 3, 4, 3);
    let sc = Scenario::new(d, 15.0, 3);
    let mut y = vec![IrsComplex::default(); d.l * d.t * d.k];
    let mut s = vec![IrsComplex::default(); d.k * d.n];
    let mut x = vec![IrsComplex::default(); d.t * d.m];
    unsafe {
        assert_eq!(irs_scenario_tensor(sc.0, y.as_mut_ptr(), y.len()), IrsStatus::Ok);
        assert_eq!(irs_scenario_irs_matrix(sc.0, s.as_mut_ptr(), s.len()), IrsStatus::Ok);
        assert_eq!(irs_scenario_pilots(sc.0, x.as_mut_ptr(), x.len()), IrsStatus::Ok);
    }
    let p = d.m * d.l * d.n;
    let (mut a, mut b) = (vec![IrsComplex::default(); p], vec![IrsComplex::default(); p]);
    unsafe {
        let (mut e1, mut e2) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(irs_estimate(sc.0, IrsEstimator::Krf, 0, &mut e1), IrsStatus::Ok);
        assert_eq!(
            irs_estimate_raw(d, y.as_ptr(), s.as_ptr(), x.as_ptr(), IrsEstimator::Krf, 0, &mut e2),
            IrsStatus::Ok
        );
        assert_eq!(irs_estimate_theta(e1, a.as_mut_ptr(), p), IrsStatus::Ok);
        assert_eq!(irs_estimate_theta(e2, b.as_mut_ptr(), p), IrsStatus::Ok);
        irs_estimate_free(e1);
        irs_estimate_free(e2);
    }
    assert_eq!(a, b);
}

#[test]
fn errors_are_reported() {
    let mut sc = ptr::null_mut();
    let st = unsafe { irs_scenario_new(dims(0, 2, 4, 4, 3), 10.0, false, 0, &mut sc) };
    assert_eq!(st, IrsStatus::InvalidArgument);
    assert!(sc.is_null());
    assert!(last_error().contains("positive"));

    // DFT designs need K >= N.
    let st = unsafe { irs_scenario_new(dims(2, 2, 6, 4, 3), 10.0, false, 0, &mut sc) };
    assert_ne!(st, IrsStatus::Ok);

    let good = Scenario::new(dims(2, 2, 3, 4, 3), 10.0, 0);
    let mut small = [IrsComplex::default(); 2];
    let st = unsafe { irs_scenario_theta(good.0, small.as_mut_ptr(), small.len()) };
    assert_eq!(st, IrsStatus::BufferTooSmall);
    assert!(last_error().contains("12"));

    let mut est = ptr::null_mut();
    let st = unsafe { irs_estimate(ptr::null(), IrsEstimator::Krf, 0, &mut est) };
    assert_eq!(st, IrsStatus::NullPointer);

    // Too few blocks for a unique trilinear decomposition.
    let st = unsafe { irs_estimate(good.0, IrsEstimator::Tals, 0, &mut est) };
    assert_eq!(st, IrsStatus::InfeasibleDesign);
    assert!(est.is_null());

    let mut out = IrsCrb::default();
    assert_eq!(unsafe { irs_crb_closed_form(dims(3, 2, 5, 4, 2), 2.0, &mut out) }, IrsStatus::Ok);
    assert!((out.trace_bound - 7.5).abs() < 1e-12);
    assert!((out.real_trace + out.imag_trace - out.trace_bound).abs() < 1e-12);
    unsafe {
        irs_scenario_free(ptr::null_mut());
        irs_estimate_free(ptr::null_mut());
    }
}

const C_PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "irs_parafac.h"

int main(void) {
    IrsDims d = {3, 2, 4, 4, 3};
    IrsScenario *sc = NULL;
    IrsEstimate *est = NULL;
    double nmse = 1.0;
    if (irs_scenario_new(d, INFINITY, false, 5, &sc) != IRS_STATUS_OK) return 1;
    if (irs_estimate(sc, IRS_ESTIMATOR_KRF, 0, &est) != IRS_STATUS_OK) return 2;
    if (irs_estimate_nmse(est, sc, &nmse) != IRS_STATUS_OK) return 3;
    irs_estimate_free(est);
    irs_scenario_free(sc);
    printf("%s %.3e\n", irs_version(), nmse);
    return nmse < 1e-20 ? 0 : 4;
}
"#;

#[test]
fn c_program_links_against_header() {
    let Ok(cc) = which_cc() else { return };
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let target_dir = exe.parent().unwrap().parent().unwrap();
    let lib = target_dir.join("libirs_parafac_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let bin = dir.path().join("main");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new(cc)
        .arg("-std=c11")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&src)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with(env!("CARGO_PKG_VERSION")));
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
        .ok_or(())
}
