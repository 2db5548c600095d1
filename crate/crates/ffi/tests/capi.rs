use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use pypi_census_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(p: *mut std::ffi::c_char) -> String {
    assert!(!p.is_null());
    let s = CStr::from_ptr(p).to_str().unwrap().to_string();
    pc_string_free(p);
    s
}

fn last_error() -> Option<String> {
    let p = pc_last_error();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

#[test]
fn statistics_match_the_library() {
    let v = [1.0, 2.0, 3.0, 10.0];
    let mut g = 0.0;
    assert_eq!(
        unsafe { pc_gini(v.as_ptr(), v.len(), &mut g) },
        PcStatus::Ok
    );
    // Mean absolute difference over twice the mean: (2*(1+2+9+1+8+7))/16/(2*4).
    assert!((g - 56.0 / 16.0 / 8.0).abs() < 1e-12, "{g}");

    let mut rate = 0.0;
    assert_eq!(unsafe { pc_cagr(100.0, 400.0, 2, &mut rate) }, PcStatus::Ok);
    assert!((rate - 1.0).abs() < 1e-12);

    let mut s = PcSummary::default();
    let xs = [4.0, 1.0, 3.0, 2.0, 5.0];
    assert_eq!(
        unsafe { pc_distribution_summary(xs.as_ptr(), xs.len(), &mut s) },
        PcStatus::Ok
    );
    assert_eq!(
        (s.n, s.min, s.p25, s.p50, s.p75, s.max),
        (5, 1.0, 2.0, 3.0, 4.0, 5.0)
    );
    assert!((s.mean - 3.0).abs() < 1e-12);
}

#[test]
fn errors_set_status_and_message() {
    let mut out = 0.0;
    assert_eq!(
        unsafe { pc_gini(ptr::null(), 0, &mut out) },
        PcStatus::Stats
    );
    assert!(last_error().unwrap().contains("empty"));
    assert_eq!(unsafe { pc_cagr(0.0, 1.0, 3, &mut out) }, PcStatus::Stats);
    assert_eq!(
        unsafe { pc_cagr(1.0, 2.0, 3, ptr::null_mut()) },
        PcStatus::NullArgument
    );
    assert_eq!(
        unsafe { pc_gini(ptr::null(), 3, &mut out) },
        PcStatus::NullArgument
    );

    // A success clears the message.
    assert_eq!(unsafe { pc_cagr(1.0, 2.0, 1, &mut out) }, PcStatus::Ok);
    assert_eq!(last_error(), None);

    let bad = [0x66u8, 0xff, 0x00];
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { pc_extract_imports_json(bad.as_ptr().cast(), &mut s) },
        PcStatus::InvalidUtf8
    );
    assert!(s.is_null());

    // Messages are per thread.
    std::thread::spawn(|| assert_eq!(last_error(), None))
        .join()
        .unwrap();
}

#[test]
fn license_rules_handle() {
    let mut rules = ptr::null_mut();
    assert_eq!(unsafe { pc_license_rules_new(&mut rules) }, PcStatus::Ok);
    let mut s = ptr::null_mut();
    let raw = cstr("GNU General Public License v3");
    assert_eq!(
        unsafe { pc_license_normalize(rules, raw.as_ptr(), &mut s) },
        PcStatus::Ok
    );
    let canonical = unsafe { take(s) };
    assert!(canonical.starts_with("GPL"), "{canonical}");
    assert!(canonical.contains('3'), "{canonical}");

    let raw = cstr("all rights waived by nobody");
    assert_eq!(
        unsafe { pc_license_normalize(rules, raw.as_ptr(), &mut s) },
        PcStatus::NotFound
    );

    let text = std::fs::read_to_string(
        PathBuf::from(env!("CARGO_MANIFEST_DIR"))
            .join("../core/tests/fixtures/registry/repos/jsmith/http-kit/LICENSE"),
    )
    .unwrap();
    let text = cstr(&text);
    assert_eq!(
        unsafe { pc_license_detect_text(rules, text.as_ptr(), &mut s) },
        PcStatus::Ok
    );
    assert!(unsafe { take(s) }.starts_with("MIT"));

    assert_eq!(
        unsafe { pc_license_normalize(ptr::null(), raw.as_ptr(), &mut s) },
        PcStatus::NullArgument
    );
    unsafe {
        pc_license_rules_free(rules);
        pc_license_rules_free(ptr::null_mut());
    }
}

#[test]
fn imports_as_json() {
    let src = cstr("import os, sys as system\nfrom . import sibling\n");
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { pc_extract_imports_json(src.as_ptr(), &mut s) },
        PcStatus::Ok
    );
    let doc: serde_json::Value = serde_json::from_str(&unsafe { take(s) }).unwrap();
    assert_eq!(doc["stage"], "strict_parse");
    let statements = doc["statements"].as_array().unwrap();
    assert_eq!(statements.len(), 3);
}

#[test]
fn store_handle_counts_and_views() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let db = dir.path().join("census.db");
    let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/registry");
    let args: Vec<CString> = [
        "pypi-census",
        "--fixture",
        fixture.to_str().unwrap(),
        "--cache-dir",
        cache.to_str().unwrap(),
        "--store",
        db.to_str().unwrap(),
        "fetch-index",
    ]
    .iter()
    .map(|a| cstr(a))
    .collect();
    let argv: Vec<_> = args.iter().map(|a| a.as_ptr()).collect();
    assert_eq!(unsafe { pc_cli_run(argv.len() as i32, argv.as_ptr()) }, 0);

    let mut store = ptr::null_mut();
    let path = cstr(db.to_str().unwrap());
    assert_eq!(
        unsafe { pc_store_open(path.as_ptr(), &mut store) },
        PcStatus::Ok
    );
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { pc_store_counts_json(store, &mut s) }, PcStatus::Ok);
    let counts: serde_json::Value = serde_json::from_str(&unsafe { take(s) }).unwrap();
    assert!(counts["index_entries"].as_u64().unwrap() > 0, "{counts}");

    let view = cstr("nope");
    assert_eq!(
        unsafe { pc_store_query_json(store, view.as_ptr(), ptr::null(), -1, &mut s) },
        PcStatus::NotFound
    );
    assert!(last_error().unwrap().contains("nope"));
    unsafe { pc_store_free(store) };

    let mut mem = ptr::null_mut();
    assert_eq!(unsafe { pc_store_open_in_memory(&mut mem) }, PcStatus::Ok);
    let view = cstr(pypi_census::store::VIEWS[0]);
    assert_eq!(
        unsafe { pc_store_query_json(mem, view.as_ptr(), ptr::null(), 5, &mut s) },
        PcStatus::Ok
    );
    let rows: serde_json::Value = serde_json::from_str(&unsafe { take(s) }).unwrap();
    assert!(!rows["columns"].as_array().unwrap().is_empty());
    assert_eq!(rows["rows"].as_array().unwrap().len(), 0);
    unsafe { pc_store_free(mem) };
}

#[test]
fn cli_rejects_bad_arguments() {
    assert_eq!(unsafe { pc_cli_run(1, ptr::null()) }, -1);
    let args = [cstr("pypi-census"), cstr("no-such-command")];
    let argv: Vec<_> = args.iter().map(|a| a.as_ptr()).collect();
    assert_eq!(unsafe { pc_cli_run(2, argv.as_ptr()) }, 2);
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(pc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "pypi_census.h"

int main(void) {
    double v[] = {0.0, 0.0, 0.0, 1.0};
    double g = -1.0;
    if (pc_gini(v, 4, &g) != PC_STATUS_OK || g < 0.7499 || g > 0.7501) return 1;
    if (pc_gini(v, 0, &g) != PC_STATUS_STATS || pc_last_error() == NULL) return 2;

    PcLicenseRules *rules = NULL;
    if (pc_license_rules_new(&rules) != PC_STATUS_OK) return 3;
    char *out = NULL;
    if (pc_license_normalize(rules, "MIT License", &out) != PC_STATUS_OK) return 4;
    int ok = strncmp(out, "MIT", 3) == 0;
    pc_string_free(out);
    pc_license_rules_free(rules);
    if (!ok) return 5;

    PcStore *store = NULL;
    if (pc_store_open_in_memory(&store) != PC_STATUS_OK) return 6;
    if (pc_store_counts_json(store, &out) != PC_STATUS_OK) return 7;
    printf("%s\n", out);
    pc_string_free(out);
    pc_store_free(store);
    return 0;
}
"#;

/// Compiles a C program against the generated header and the static library.
#[test]
fn header_compiles_and_links_from_c() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header_dir = manifest.join("include");
    assert!(header_dir.join("pypi_census.h").exists());
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .and_then(|deps| deps.parent())
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join("libpypi_census_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let exe = dir.path().join("main");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&header_dir)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C build failed");
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let counts: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(counts["packages"], 0);
}
