use std::ffi::{CStr, CString};
use std::ptr;

use oulab_ffi::*;

fn last_error() -> String {
    let p = oulab_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn shear() -> *mut OulabModel {
    let name = CString::new("paper-2x2").unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { oulab_model_builtin(name.as_ptr(), &mut h) },
        OulabStatus::Ok
    );
    h
}

#[test]
fn lyapunov_through_handle() {
    let h = shear();
    assert_eq!(unsafe { oulab_model_dim(h) }, 2);
    let mut buf = [0.0; 4];
    assert_eq!(
        unsafe { oulab_solve_lyapunov(h, buf.as_mut_ptr(), 4) },
        OulabStatus::Ok
    );
    for (got, want) in buf.iter().zip([0.25, 0.25, 0.25, 0.5]) {
        assert!((got - want).abs() < 1e-10);
    }
    let mut small = [0.0; 3];
    assert_eq!(
        unsafe { oulab_solve_lyapunov(h, small.as_mut_ptr(), 3) },
        OulabStatus::BufferTooSmall
    );
    assert!(last_error().contains("4 needed"));
    unsafe { oulab_model_free(h) };
}

#[test]
fn dense_model_and_norm() {
    let a = [-1.0, 1.0, 0.0, -1.0];
    let i = [0.0, 1.0];
    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { oulab_model_new(a.as_ptr(), i.as_ptr(), 2, 1, &mut h) },
        OulabStatus::Ok
    );
    let mut v = 0.0;
    assert_eq!(
        unsafe { oulab_s_infinity_norm(h, 1.0, &mut v) },
        OulabStatus::Ok
    );
    assert!((v - (-1.0f64).exp() * (1.0 + 2f64.sqrt())).abs() < 1e-9);
    let mut q = [0.0; 4];
    assert_eq!(
        unsafe { oulab_gramian(h, 50.0, q.as_mut_ptr(), 4) },
        OulabStatus::Ok
    );
    assert!((q[3] - 0.5).abs() < 1e-8);
    unsafe { oulab_model_free(h) };
}

#[test]
fn invalid_inputs_report_status() {
    let a = [-1.0, 0.0, 0.0, -1.0];
    let i = [0.0, 0.0];
    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { oulab_model_new(a.as_ptr(), i.as_ptr(), 2, 1, &mut h) },
        OulabStatus::InvalidInput
    );
    assert!(last_error().contains("injective"));
    assert!(h.is_null());
    assert_eq!(
        unsafe { oulab_model_new(ptr::null(), i.as_ptr(), 2, 1, &mut h) },
        OulabStatus::NullPointer
    );
    let bad = CString::new("nope").unwrap();
    assert_eq!(
        unsafe { oulab_model_builtin(bad.as_ptr(), &mut h) },
        OulabStatus::InvalidInput
    );
    let mut v = 0.0;
    assert_eq!(
        unsafe { oulab_s_infinity_norm(ptr::null(), 1.0, &mut v) },
        OulabStatus::NullPointer
    );
}

#[test]
fn unstable_model_is_numerical_failure() {
    let a = [1.0];
    let i = [1.0];
    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { oulab_model_new(a.as_ptr(), i.as_ptr(), 1, 1, &mut h) },
        OulabStatus::Ok
    );
    let mut buf = [0.0; 1];
    assert_eq!(
        unsafe { oulab_solve_lyapunov(h, buf.as_mut_ptr(), 1) },
        OulabStatus::Numerical
    );
    unsafe { oulab_model_free(h) };
}

#[test]
fn analyze_json_round_trip() {
    let h = shear();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { oulab_analyze_json(h, &mut s) }, OulabStatus::Ok);
    let text = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    unsafe { oulab_string_free(s) };
    let report = oulab::io::parse_report(&text).unwrap();
    assert_eq!(
        report.analyticity.unwrap().verdict,
        oulab::diagnostics::Verdict::NotAnalytic
    );
    unsafe { oulab_model_free(h) };
}

#[test]
fn pencil_ratio() {
    let q = [0.25, 0.25, 0.25, 0.5];
    let r = [0.0, 0.0, 0.0, 1.0];
    let mut v = 0.0;
    assert_eq!(
        unsafe { oulab_pencil_sup_ratio(q.as_ptr(), r.as_ptr(), 2, &mut v) },
        OulabStatus::Ok
    );
    assert!(v.is_infinite());
    let r = [1.0, 0.0, 0.0, 1.0];
    assert_eq!(
        unsafe { oulab_pencil_sup_ratio(q.as_ptr(), r.as_ptr(), 2, &mut v) },
        OulabStatus::Ok
    );
    assert!((v - (0.75 + 0.3125f64.sqrt()) / 2.0).abs() < 1e-12);
}

#[test]
fn header_declares_api() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/oulab.h")).unwrap();
    for name in [
        "oulab_model_new",
        "oulab_model_builtin",
        "oulab_model_free",
        "oulab_solve_lyapunov",
        "oulab_gramian",
        "oulab_s_infinity_norm",
        "oulab_analyze_json",
        "oulab_string_free",
        "oulab_pencil_sup_ratio",
        "oulab_last_error",
        "OULAB_STATUS_BUFFER_TOO_SMALL",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
