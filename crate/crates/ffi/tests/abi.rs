use std::ffi::{CStr, CString};
use std::ptr;

use sparsepos::certificate::{from_json, CertificateMode};
use sparsepos_ffi::*;

const TWOBALLS: &str = "vars x : X; y : Y; z : Z\nminimize x + (x - y)^2 + (y - z)^2 + z\nst g: 1 - x^2 - y^2 >= 0\nst h: 1 - y^2 - z^2 >= 0\n";

fn parse(src: &str) -> *mut SpsProblem {
    let c = CString::new(src).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { sps_problem_parse(c.as_ptr(), &mut p) }, SpsStatus::Ok);
    assert!(!p.is_null());
    p
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(sps_last_error()) }.to_str().unwrap().to_owned()
}

fn solve(p: *const SpsProblem, variant: &str, order: u32) -> (SpsStatus, *mut SpsResult) {
    let v = CString::new(variant).unwrap();
    let mut r = ptr::null_mut();
    let code = unsafe { sps_solve(p, v.as_ptr(), order, 1e-8, &mut r) };
    (code, r)
}

#[test]
fn solve_certify_and_verify() {
    let p = parse(TWOBALLS);
    assert_eq!(unsafe { sps_problem_nvars(p) }, 3);
    let (code, r) = solve(p, "schmudgen-sparse", 2);
    assert_eq!(code, SpsStatus::Ok);
    assert_eq!(unsafe { sps_result_status(r) }, SpsSolveStatus::Optimal);
    let bound = unsafe { sps_result_bound(r) };

    let mut minimum = 0.0;
    let mut argmin = [0.0; 3];
    assert_eq!(unsafe { sps_grid_min(p, -1.0, 1.0, 0.01, &mut minimum, argmin.as_mut_ptr()) }, SpsStatus::Ok);
    assert!(bound <= minimum + 1e-6 && minimum - bound < 0.01, "{bound} vs {minimum}");
    assert!(argmin.iter().all(|v| v.abs() <= 1.0));

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { sps_result_certificate_json(r, &mut json) }, SpsStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { sps_string_free(json) };
    let cert = from_json(&text).unwrap();
    assert_eq!(cert.mode(), CertificateMode::Schmudgen);
    assert!((cert.lambda() - bound).abs() < 1e-6);

    let mut residual = f64::NAN;
    let mut passed = false;
    assert_eq!(unsafe { sps_result_verify(r, 1e-5, &mut residual, &mut passed) }, SpsStatus::Ok);
    assert!(passed && residual < 1e-5);
    unsafe {
        sps_result_free(r);
        sps_problem_free(p);
    }
}

#[test]
fn krivine_after_normalization() {
    let p = parse("vars x : X\nminimize x\nst g: 1 - x >= 0\n");
    let bounds = [2.0];
    assert_eq!(unsafe { sps_problem_normalize_krivine(p, bounds.as_ptr(), 1) }, SpsStatus::Ok);
    let (code, r) = solve(p, "krivine", 2);
    assert_eq!(code, SpsStatus::Ok);
    assert!((unsafe { sps_result_bound(r) } + 1.0).abs() < 1e-6);
    let mut passed = false;
    assert_eq!(unsafe { sps_result_verify(r, 1e-6, ptr::null_mut(), &mut passed) }, SpsStatus::Ok);
    assert!(passed);
    let bad = [-1.0];
    assert_eq!(unsafe { sps_problem_normalize_krivine(p, bad.as_ptr(), 1) }, SpsStatus::Argument);
    unsafe {
        sps_result_free(r);
        sps_problem_free(p);
    }
}

#[test]
fn error_codes_and_messages() {
    let c = CString::new("vars x : X\nminimize (x + 1\n").unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { sps_problem_parse(c.as_ptr(), &mut p) }, SpsStatus::Parse);
    assert!(p.is_null());
    assert!(last_error().contains("line 2"), "{}", last_error());

    assert_eq!(unsafe { sps_problem_parse(ptr::null(), &mut p) }, SpsStatus::NullPointer);
    let invalid = [0xffu8, 0];
    assert_eq!(unsafe { sps_problem_parse(invalid.as_ptr().cast(), &mut p) }, SpsStatus::Utf8);

    let p = parse(TWOBALLS);
    let (code, r) = solve(p, "dense", 1);
    assert_eq!(code, SpsStatus::Order);
    assert!(r.is_null());
    assert!(last_error().contains("minimum admissible order 2"));
    assert_eq!(solve(p, "nope", 2).0, SpsStatus::Argument);
    assert_eq!(solve(ptr::null(), "dense", 2).0, SpsStatus::NullPointer);

    assert!(unsafe { sps_result_bound(ptr::null()) }.is_nan());
    assert_eq!(unsafe { sps_result_status(ptr::null()) }, SpsSolveStatus::Unknown);
    assert_eq!(unsafe { sps_problem_nvars(ptr::null()) }, 0);
    unsafe {
        sps_result_free(ptr::null_mut());
        sps_string_free(ptr::null_mut());
        sps_problem_free(p);
    }
}

#[test]
fn infeasible_solve_has_no_certificate() {
    let p = parse("vars x : X\nminimize x\nst g: -1 - x^2 >= 0\n");
    let (code, r) = solve(p, "putinar-sparse", 1);
    assert_eq!(code, SpsStatus::Ok);
    assert_eq!(unsafe { sps_result_status(r) }, SpsSolveStatus::Infeasible);
    assert_eq!(unsafe { sps_result_bound(r) }, f64::INFINITY);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { sps_result_certificate_json(r, &mut json) }, SpsStatus::Certificate);
    assert!(json.is_null());
    unsafe {
        sps_result_free(r);
        sps_problem_free(p);
    }
}
