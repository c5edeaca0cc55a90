use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use metacurv_ffi::*;
use serde_json::Value;

fn bundled(name: &str) -> *mut McChart {
    let name = CString::new(name).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { mc_chart_bundled(name.as_ptr(), &mut h) }, McStatus::Ok);
    assert!(!h.is_null());
    h
}

fn run(h: *const McChart, cmd: McCommand, opts: Option<&McOptions>) -> (Value, i32) {
    let mut report = ptr::null_mut();
    let mut exit = -1;
    let o = opts.map_or(ptr::null(), |o| o as *const _);
    assert_eq!(unsafe { mc_run(h, cmd as u32, o, &mut report, &mut exit) }, McStatus::Ok);
    let s = unsafe { CStr::from_ptr(report) }.to_str().unwrap().to_owned();
    unsafe { mc_string_free(report) };
    (serde_json::from_str(&s).unwrap(), exit)
}

fn last_error() -> String {
    let p = mc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn commands_through_the_abi() {
    let h = bundled("symp2_cubic");
    assert_eq!(unsafe { mc_chart_dim(h) }, 2);
    let (report, exit) = run(h, McCommand::Hawkins, None);
    assert_eq!(exit, 2);
    assert_eq!(report["command"], "hawkins");
    let (report, exit) = run(h, McCommand::Metacurvature, None);
    assert_eq!(exit, 0);
    assert_eq!(report["zero"], false);
    unsafe { mc_chart_free(h) };

    let h = bundled("aff1_liepoisson");
    let opts = McOptions { tol: 1e-7, grid: 17, step: 0.0, seed: 3 };
    let (report, exit) = run(h, McCommand::Reconstruct, Some(&opts));
    assert_eq!(exit, 0, "{report}");
    assert_eq!(report["tol"], 1e-7);
    assert_eq!(report["seed"], 3);
    unsafe { mc_chart_free(h) };
}

#[test]
fn chart_from_json_and_errors() {
    let doc = CString::new(include_str!("../../core/charts/broken_jacobi.json")).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { mc_chart_from_json(doc.as_ptr(), &mut h) }, McStatus::Ok);
    let (_, exit) = run(h, McCommand::Validate, None);
    assert_eq!(exit, 2);

    let mut report = ptr::null_mut();
    let mut exit = 0;
    assert_eq!(unsafe { mc_run(h, 99, ptr::null(), &mut report, &mut exit) }, McStatus::UnknownCommand);
    assert!(report.is_null());
    assert!(last_error().contains("99"));
    unsafe { mc_chart_free(h) };

    let bad = CString::new(r#"{"name": "x", "oops": 1}"#).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { mc_chart_from_json(bad.as_ptr(), &mut h) }, McStatus::InvalidChart);
    assert!(h.is_null());
    assert!(!last_error().is_empty());

    let name = CString::new("nope").unwrap();
    assert_eq!(unsafe { mc_chart_bundled(name.as_ptr(), &mut h) }, McStatus::UnknownChart);
    assert_eq!(unsafe { mc_chart_bundled(ptr::null(), &mut h) }, McStatus::NullPointer);
    assert_eq!(unsafe { mc_run(ptr::null(), 0, ptr::null(), &mut report, &mut exit) }, McStatus::NullPointer);

    let invalid = [0xffu8, 0];
    assert_eq!(unsafe { mc_chart_from_json(invalid.as_ptr().cast(), &mut h) }, McStatus::InvalidUtf8);

    let ok = bundled("symp2_const");
    assert!(mc_last_error().is_null());
    unsafe {
        mc_chart_free(ok);
        mc_chart_free(ptr::null_mut());
        mc_string_free(ptr::null_mut());
    }
    assert_eq!(unsafe { mc_chart_dim(ptr::null()) }, 0);
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/metacurv.h");
    let out = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .output()
        .expect("a C compiler is installed");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
