use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use robust_did_ffi::*;

fn panel_from(rows: &[(i64, i64, f64, i64)]) -> *mut RdidPanel {
    let unit: Vec<i64> = rows.iter().map(|r| r.0).collect();
    let period: Vec<i64> = rows.iter().map(|r| r.1).collect();
    let outcome: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let treated: Vec<i64> = rows.iter().map(|r| r.3).collect();
    let mut p = ptr::null_mut();
    let st = unsafe {
        rdid_panel_from_arrays(rows.len(), unit.as_ptr(), period.as_ptr(), outcome.as_ptr(), treated.as_ptr(), &mut p)
    };
    assert_eq!(st, RdidStatus::Ok);
    p
}

/// Two treated and two control units over periods -1, 0, 1 with cell means
/// chosen so SB_{-1} = 3, SB_0 = 1, θ_OLS = 5.
fn small_panel() -> *mut RdidPanel {
    let mut rows = Vec::new();
    for (u, d) in [(1, 1), (2, 1), (3, 0), (4, 0)] {
        let jitter = if u % 2 == 0 { 0.5 } else { -0.5 };
        for (t, treated_mean, control_mean) in [(-1, 3.0, 0.0), (0, 1.0, 0.0), (1, 5.0, 0.0)] {
            let base = if d == 1 { treated_mean } else { control_mean };
            rows.push((u, t, base + jitter, d));
        }
    }
    panel_from(&rows)
}

fn last_error() -> String {
    let p = rdid_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn bounds_through_handle() {
    let p = small_panel();
    unsafe {
        assert_eq!(rdid_panel_n_units(p), 4);
        assert_eq!(rdid_panel_n_rows(p), 12);
        let mut iv = RdidInterval::default();
        assert_eq!(rdid_bounds(p, ptr::null(), 0, &mut iv), RdidStatus::Ok);
        assert!((iv.lower - 2.0).abs() < 1e-12 && (iv.upper - 4.0).abs() < 1e-12, "{iv:?}");
        assert!((iv.point_estimate - 5.0).abs() < 1e-12);
        assert!((iv.standard_did - 4.0).abs() < 1e-12);
        let only0 = [0i64];
        assert_eq!(rdid_bounds(p, only0.as_ptr(), 1, &mut iv), RdidStatus::Ok);
        assert!((iv.lower - 4.0).abs() < 1e-12 && (iv.upper - 4.0).abs() < 1e-12);
        rdid_panel_free(p);
    }
}

#[test]
fn error_codes_and_messages() {
    let p = small_panel();
    unsafe {
        let mut iv = RdidInterval::default();
        let bad = [7i64];
        assert_eq!(rdid_bounds(p, bad.as_ptr(), 1, &mut iv), RdidStatus::InvalidInformationSet);
        assert!(last_error().starts_with("InvalidInformationSet"));
        assert_eq!(rdid_bounds(ptr::null(), ptr::null(), 0, &mut iv), RdidStatus::NullPointer);
        assert_eq!(rdid_bounds(p, ptr::null(), 0, &mut iv), RdidStatus::Ok);
        assert!(rdid_last_error_message().is_null());

        let mut q = ptr::null_mut();
        let path = CString::new("/nonexistent/x.csv").unwrap();
        assert_eq!(rdid_panel_load_csv(path.as_ptr(), ptr::null(), &mut q), RdidStatus::Io);
        assert!(q.is_null());
        rdid_panel_free(p);
        rdid_panel_free(ptr::null_mut());
    }
}

#[test]
fn duplicate_rows_rejected() {
    let unit = [1i64, 1];
    let period = [0i64, 0];
    let y = [0.0, 1.0];
    let d = [0i64, 0];
    let mut p = ptr::null_mut();
    let st = unsafe { rdid_panel_from_arrays(2, unit.as_ptr(), period.as_ptr(), y.as_ptr(), d.as_ptr(), &mut p) };
    assert_eq!(st, RdidStatus::DuplicateUnitPeriod);
    assert!(p.is_null());
}

#[test]
fn json_entry_point() {
    let p = small_panel();
    unsafe {
        let mut out = ptr::null_mut();
        let cmd = CString::new("po").unwrap();
        let opts = CString::new(r#"{"info": {"kind": "periods", "periods": [-1, 0]}, "losses": ["l2"]}"#).unwrap();
        assert_eq!(rdid_run_json(p, cmd.as_ptr(), opts.as_ptr(), &mut out), RdidStatus::Ok);
        let text = CStr::from_ptr(out).to_str().unwrap().to_owned();
        rdid_string_free(out);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["schema_version"], "1");
        assert_eq!(v["result"]["non_causal"], true);
        assert_eq!(v["result"]["estimates"][0]["estimate"].as_f64().unwrap(), 3.0);

        let bad = CString::new("nope").unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(rdid_run_json(p, bad.as_ptr(), ptr::null(), &mut out), RdidStatus::InvalidArgument);
        assert!(out.is_null());
        let garbage = CString::new("{not json").unwrap();
        assert_eq!(rdid_run_json(p, cmd.as_ptr(), garbage.as_ptr(), &mut out), RdidStatus::Parse);
        rdid_panel_free(p);
    }
}

#[test]
fn mills_constants() {
    let (mut a1, mut a0) = (0.0, 0.0);
    assert_eq!(unsafe { rdid_mills_alpha(1.0, &mut a1, &mut a0) }, RdidStatus::Ok);
    assert!((a1 - 1.525135).abs() < 1e-6 && (a0 + 0.287600).abs() < 1e-6);
    assert_eq!(unsafe { rdid_mills_alpha(1.0, ptr::null_mut(), &mut a0) }, RdidStatus::NullPointer);
    let v = unsafe { CStr::from_ptr(rdid_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/robust_did.h")).unwrap();
    assert!(header.starts_with("#ifndef ROBUST_DID_H"));
    for f in [
        "rdid_last_error_message",
        "rdid_version",
        "rdid_schema_version",
        "rdid_panel_load_csv",
        "rdid_panel_from_arrays",
        "rdid_panel_free",
        "rdid_panel_n_units",
        "rdid_panel_n_rows",
        "rdid_bounds",
        "rdid_run_json",
        "rdid_string_free",
        "rdid_mills_alpha",
        "typedef struct RdidPanel RdidPanel",
        "RDID_STATUS_OK = 0",
    ] {
        assert!(header.contains(f), "header lacks {f}");
    }
}

/// Compiles a C program against the header and the static library.
#[test]
fn c_program_links_against_header() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir: PathBuf = exe.parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("librobust_did_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <string.h>
#include "robust_did.h"
int main(void) {
    int64_t unit[] = {1, 1, 2, 2};
    int64_t period[] = {0, 1, 0, 1};
    double y[] = {1.0, 4.0, 0.0, 1.0};
    int64_t d[] = {1, 1, 0, 0};
    RdidPanel *p = NULL;
    if (rdid_panel_from_arrays(4, unit, period, y, d, &p) != RDID_STATUS_OK) return 1;
    RdidInterval iv;
    if (rdid_bounds(p, NULL, 0, &iv) != RDID_STATUS_OK) return 2;
    rdid_panel_free(p);
    if (iv.lower != 2.0 || iv.upper != 2.0) return 3;
    if (rdid_bounds(NULL, NULL, 0, &iv) != RDID_STATUS_NULL_POINTER) return 4;
    if (strncmp(rdid_last_error_message(), "panel", 5) != 0) return 5;
    printf("ok %s\n", rdid_version());
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("C compiler available");
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
