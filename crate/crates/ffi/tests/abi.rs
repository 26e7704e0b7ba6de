use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use mpstream_ffi::*;

struct Set(*mut MpsLinkSet);

impl Set {
    fn new() -> Self {
        Set(mps_linkset_new())
    }
}

impl Drop for Set {
    fn drop(&mut self) {
        unsafe { mps_linkset_free(self.0) }
    }
}

#[test]
fn estimate_and_bound_agree() {
    let s = Set::new();
    unsafe {
        assert_eq!(mps_linkset_add_exponential(s.0, 0.55), MpsStatus::Ok);
        assert_eq!(mps_linkset_add_exponential(s.0, 0.55), MpsStatus::Ok);
        let mut len = 0;
        assert_eq!(mps_linkset_len(s.0, &mut len), MpsStatus::Ok);
        assert_eq!(len, 2);
        let mut sum = 0.0;
        assert_eq!(mps_linkset_sum_rate(s.0, &mut sum), MpsStatus::Ok);
        assert!((sum - 1.1).abs() < 1e-12);

        let mut est = MpsEstimate::default();
        assert_eq!(
            mps_estimate_starvation(s.0, 1000, 6.0, 5000, 1, 0, &mut est),
            MpsStatus::Ok
        );
        let mut one = MpsEstimate::default();
        assert_eq!(
            mps_estimate_starvation(s.0, 1000, 6.0, 5000, 1, 1, &mut one),
            MpsStatus::Ok
        );
        assert_eq!(est, one);
        let mut bound = 0.0;
        assert_eq!(
            mps_chernoff_bound(s.0, 1000, 5.0, MpsVariant::Product, false, &mut bound),
            MpsStatus::Ok
        );
        assert!(bound >= est.p_hat - 3.0 * est.std_error);
        assert!(est.p_hat > 0.0 && est.p_hat < 1.0);
    }
}

#[test]
fn prebuffer_selection() {
    let s = Set::new();
    unsafe {
        mps_linkset_add_exponential(s.0, 0.6);
        mps_linkset_add_exponential(s.0, 0.6);
        let mut out = MpsPrebuffer {
            b_margin: 0.0,
            total_prebuffer: 0.0,
            achieved_bound: 0.0,
            closed_form: 0.0,
            regime: MpsRegime::Overload,
        };
        assert_eq!(
            mps_select_prebuffer(s.0, 3600, 0.01, MpsVariant::Product, &mut out),
            MpsStatus::Ok
        );
        assert_eq!(out.regime, MpsRegime::Underload);
        assert!((out.b_margin - out.closed_form).abs() < 1e-5);
        assert!((out.total_prebuffer - out.b_margin - 1.0).abs() < 1e-12);

        assert_eq!(
            mps_select_prebuffer(s.0, 3600, 0.01, MpsVariant::Union, &mut out),
            MpsStatus::Ok
        );
        assert!(out.closed_form.is_nan());
    }
}

#[test]
fn diffusion_needs_markov_links() {
    let s = Set::new();
    unsafe {
        assert_eq!(mps_linkset_add_onoff(s.0, 1.0, 1.0, 1.05, 1.0), MpsStatus::Ok);
        assert_eq!(mps_linkset_add_onoff(s.0, 1.0, 1.0, 1.05, 1.0), MpsStatus::Ok);
        let mut v = 0.0;
        assert_eq!(
            mps_diffusion_bound(s.0, 3600, 20.0, MpsVariant::Product, &mut v),
            MpsStatus::Ok
        );
        assert!(v > 0.0 && v < 1.0);
        assert_eq!(mps_linkset_add_fair_sharing(s.0, 0.5, 1.0, 200, 1.0), MpsStatus::Ok);
        assert_eq!(mps_linkset_add_exponential(s.0, 1.0), MpsStatus::Ok);
        assert_eq!(
            mps_diffusion_bound(s.0, 3600, 20.0, MpsVariant::Product, &mut v),
            MpsStatus::Validation
        );
        assert!(last_error().contains("link 4"));
    }
}

#[test]
fn error_codes_and_messages() {
    let s = Set::new();
    unsafe {
        let mut x = 0.0;
        assert_eq!(mps_linkset_sum_rate(s.0, &mut x), MpsStatus::Validation);
        assert_eq!(mps_linkset_add_gaussian(s.0, 1.0, -1.0), MpsStatus::Validation);
        assert!(!last_error().is_empty());
        assert_eq!(mps_linkset_add_gaussian(s.0, 1.0, 0.5), MpsStatus::Ok);
        assert!(last_error().is_empty());

        assert_eq!(mps_linkset_sum_rate(ptr::null(), &mut x), MpsStatus::NullPointer);
        assert_eq!(mps_linkset_sum_rate(s.0, ptr::null_mut()), MpsStatus::NullPointer);
        assert_eq!(mps_linkset_add_trace(s.0, ptr::null(), 3), MpsStatus::NullPointer);
        let delays = [1.0, 2.0, 1.5];
        assert_eq!(mps_linkset_add_trace(s.0, delays.as_ptr(), 3), MpsStatus::Ok);

        assert_eq!(
            mps_chernoff_bound(s.0, 100, 1.0, MpsVariant::Product, false, &mut x),
            MpsStatus::NoAnalyticCgf
        );
        let over = Set::new();
        mps_linkset_add_exponential(over.0, 0.8);
        assert_eq!(
            mps_chernoff_bound(over.0, 100, 1.0, MpsVariant::Product, false, &mut x),
            MpsStatus::Regime
        );
        assert_eq!(mps_lambert_w0(-1.0, &mut x), MpsStatus::Domain);

        let mut buf = [0 as std::ffi::c_char; 8];
        let full = mps_copy_last_error(buf.as_mut_ptr(), buf.len());
        assert!(full > 7);
        assert_eq!(CStr::from_ptr(buf.as_ptr()).to_bytes().len(), 7);
        mps_linkset_free(ptr::null_mut());
    }
}

#[test]
fn scalar_helpers() {
    unsafe {
        assert!((mps_psi(1.0) - 0.158_655_253_931_457_05).abs() < 1e-15);
        let mut w = 0.0;
        assert_eq!(mps_lambert_w0(1.0, &mut w), MpsStatus::Ok);
        assert!((w - 0.567_143_290_409_783_8).abs() < 1e-14);
        let mut v = 0.0;
        assert_eq!(mps_asym_var_fair_sharing(0.5, 1.0, &mut v), MpsStatus::Ok);
        assert!((v - 0.627_408_772_726).abs() < 1e-9);
        assert_eq!(mps_asym_var_fair_sharing(1.5, 1.0, &mut v), MpsStatus::Validation);
        let version = CStr::from_ptr(mps_version()).to_str().unwrap();
        assert_eq!(version, env!("CARGO_PKG_VERSION"));

        let s = Set::new();
        mps_linkset_add_exponential(s.0, 0.3);
        mps_linkset_add_exponential(s.0, 0.9);
        let mut links = [0u32; 8];
        assert_eq!(mps_schedule(s.0, 8, links.as_mut_ptr()), MpsStatus::Ok);
        assert_eq!(links.iter().filter(|&&k| k == 1).count(), 2);
        assert!(links.iter().all(|&k| k == 1 || k == 2));
    }
}

#[test]
fn c_program_links_against_header() {
    // target/<profile>/deps/abi-<hash> -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap();
    let lib = profile_dir.join("libmpstream_ffi.a");
    if !lib.exists() {
        panic!("static library not found at {}", lib.display());
    }
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let tmp = tempfile::TempDir::new().unwrap();
    let bin = tmp.path().join("smoke");
    let status = Command::new(std::env::var("CC").unwrap_or_else(|_| "cc".into()))
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
