//! C interface to `pypi_census`.
//!
//! Every fallible function returns a [`PcStatus`]. On failure the message is
//! kept per thread and read with [`pc_last_error`]. Strings handed out by this
//! library are released with [`pc_string_free`]; handles with their own
//! `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pypi_census::imports::extract_imports;
use pypi_census::license::{resolve_from_license_file, LicenseRuleSet};
use pypi_census::stats::{cagr, distribution_summary, gini};
use pypi_census::store::{Store, ViewParams};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    NotFound = 4,
    Store = 5,
    Stats = 6,
    Panic = 7,
}

/// Opaque handle to an open census store.
pub struct PcStore {
    inner: Store,
}

/// Opaque handle to a license rule set.
pub struct PcLicenseRules {
    inner: LicenseRuleSet,
}

/// Five-number summary plus mean and standard deviation.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PcSummary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub max: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(PcStatus, String);

impl Failure {
    fn new(status: PcStatus, msg: impl ToString) -> Self {
        Self(status, msg.to_string())
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PcStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PcStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PcStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(
            PcStatus::NullArgument,
            format!("{what} is null"),
        ));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(PcStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(
            PcStatus::NullArgument,
            "output pointer is null",
        ));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|e| Failure::new(PcStatus::InvalidArgument, e))?;
    put(out, c.into_raw())
}

unsafe fn values<'a>(p: *const f64, len: usize) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::new(PcStatus::NullArgument, "values is null"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn json(v: &impl serde::Serialize) -> Result<String, Failure> {
    serde_json::to_string(v).map_err(|e| Failure::new(PcStatus::InvalidArgument, e))
}

fn stats_err(e: impl ToString) -> Failure {
    Failure::new(PcStatus::Stats, e)
}

fn store_err(e: impl ToString) -> Failure {
    Failure::new(PcStatus::Store, e)
}

/// Message for the last failure on this thread, or null. Valid until the next
/// call into this library from the same thread.
#[no_mangle]
pub extern "C" fn pc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn pc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Opens (creating if needed) the store at `path`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_store_open(path: *const c_char, out: *mut *mut PcStore) -> PcStatus {
    guard(|| {
        let path = text(path, "path")?;
        let inner = Store::open(path).map_err(store_err)?;
        put(out, Box::into_raw(Box::new(PcStore { inner })))
    })
}

/// Opens an empty in-memory store.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_store_open_in_memory(out: *mut *mut PcStore) -> PcStatus {
    guard(|| {
        let inner = Store::open_in_memory().map_err(store_err)?;
        put(out, Box::into_raw(Box::new(PcStore { inner })))
    })
}

/// Closes a store. Null is ignored.
///
/// # Safety
/// `store` must come from `pc_store_open*` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pc_store_free(store: *mut PcStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Row counts per table as a JSON object.
///
/// # Safety
/// `store` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_store_counts_json(
    store: *const PcStore,
    out: *mut *mut c_char,
) -> PcStatus {
    guard(|| {
        let store = store
            .as_ref()
            .ok_or_else(|| Failure::new(PcStatus::NullArgument, "store is null"))?;
        let counts = store.inner.counts().map_err(store_err)?;
        put_string(out, json(&counts)?)
    })
}

/// Runs a named view and returns `{"columns": [...], "rows": [[...]]}`.
/// `package` may be null; a negative `limit` means no limit.
///
/// # Safety
/// `store` must be a live handle; `view` a NUL-terminated string; `package`
/// null or NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_store_query_json(
    store: *const PcStore,
    view: *const c_char,
    package: *const c_char,
    limit: i64,
    out: *mut *mut c_char,
) -> PcStatus {
    guard(|| {
        let store = store
            .as_ref()
            .ok_or_else(|| Failure::new(PcStatus::NullArgument, "store is null"))?;
        let view = text(view, "view")?;
        let package = if package.is_null() {
            None
        } else {
            Some(text(package, "package")?.to_string())
        };
        let params = ViewParams {
            package,
            limit: u64::try_from(limit).ok(),
        };
        let rows = store.inner.query(view, &params).map_err(|e| match e {
            pypi_census::store::StoreError::UnknownView(_) => Failure::new(PcStatus::NotFound, e),
            other => store_err(other),
        })?;
        put_string(out, json(&rows)?)
    })
}

/// Creates the built-in license rule set.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_license_rules_new(out: *mut *mut PcLicenseRules) -> PcStatus {
    guard(|| {
        let inner = LicenseRuleSet::default_rules();
        put(out, Box::into_raw(Box::new(PcLicenseRules { inner })))
    })
}

/// Releases a rule set. Null is ignored.
///
/// # Safety
/// `rules` must come from `pc_license_rules_new` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pc_license_rules_free(rules: *mut PcLicenseRules) {
    if !rules.is_null() {
        drop(Box::from_raw(rules));
    }
}

/// Normalizes a free-text license string to its canonical form, for
/// example `"GPLv2"` to `"GPL 2"`. Returns `NotFound` when no rule matches.
///
/// # Safety
/// `rules` must be a live handle; `raw` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_license_normalize(
    rules: *const PcLicenseRules,
    raw: *const c_char,
    out: *mut *mut c_char,
) -> PcStatus {
    guard(|| {
        let rules = rules
            .as_ref()
            .ok_or_else(|| Failure::new(PcStatus::NullArgument, "rules is null"))?;
        let raw = text(raw, "raw")?;
        let id = rules.inner.normalize(raw).ok_or_else(|| {
            Failure::new(PcStatus::NotFound, format!("no license matches {raw:?}"))
        })?;
        put_string(out, id.canonical_string())
    })
}

/// Detects a license from the text of a license file.
///
/// # Safety
/// `rules` must be a live handle; `text_ptr` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_license_detect_text(
    rules: *const PcLicenseRules,
    text_ptr: *const c_char,
    out: *mut *mut c_char,
) -> PcStatus {
    guard(|| {
        let rules = rules
            .as_ref()
            .ok_or_else(|| Failure::new(PcStatus::NullArgument, "rules is null"))?;
        let body = text(text_ptr, "text")?;
        let a = resolve_from_license_file(body, &rules.inner)
            .ok_or_else(|| Failure::new(PcStatus::NotFound, "no license phrase found"))?;
        put_string(out, a.id().canonical_string())
    })
}

/// Extracts import statements from Python source. The result is
/// `{"stage": "...", "statements": [...]}`.
///
/// # Safety
/// `source` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_extract_imports_json(
    source: *const c_char,
    out: *mut *mut c_char,
) -> PcStatus {
    guard(|| {
        let source = text(source, "source")?;
        let (statements, stage) = extract_imports(source);
        let doc = serde_json::json!({ "stage": stage.as_str(), "statements": statements });
        put_string(out, json(&doc)?)
    })
}

/// Gini coefficient of `len` nonnegative values.
///
/// # Safety
/// `values_ptr` must point to `len` doubles (may be null when `len` is 0);
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_gini(values_ptr: *const f64, len: usize, out: *mut f64) -> PcStatus {
    guard(|| {
        let g = gini(values(values_ptr, len)?).map_err(stats_err)?;
        put(out, g)
    })
}

/// Compound annual growth rate `(end / start)^(1 / years) - 1`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_cagr(start: f64, end: f64, years: u32, out: *mut f64) -> PcStatus {
    guard(|| put(out, cagr(start, end, years).map_err(stats_err)?))
}

/// Distribution summary of `len` values.
///
/// # Safety
/// `values_ptr` must point to `len` doubles (may be null when `len` is 0);
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_distribution_summary(
    values_ptr: *const f64,
    len: usize,
    out: *mut PcSummary,
) -> PcStatus {
    guard(|| {
        let s = distribution_summary(values(values_ptr, len)?).map_err(stats_err)?;
        put(
            out,
            PcSummary {
                n: s.n,
                mean: s.mean,
                std: s.std,
                min: s.min,
                p25: s.p25,
                p50: s.p50,
                p75: s.p75,
                max: s.max,
            },
        )
    })
}

/// Runs the command-line tool with `argc` arguments (including the program
/// name) and returns its exit code. Returns -1 if an argument is null or not
/// UTF-8.
///
/// # Safety
/// `argv` must point to `argc` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn pc_cli_run(argc: c_int, argv: *const *const c_char) -> c_int {
    let mut args = Vec::new();
    let status = guard(|| {
        let n = usize::try_from(argc)
            .map_err(|_| Failure::new(PcStatus::InvalidArgument, "argc is negative"))?;
        if n > 0 && argv.is_null() {
            return Err(Failure::new(PcStatus::NullArgument, "argv is null"));
        }
        for i in 0..n {
            args.push(text(*argv.add(i), "argument")?.to_string());
        }
        Ok(())
    });
    if status != PcStatus::Ok {
        return -1;
    }
    if args.is_empty() {
        args.push("pypi-census".into());
    }
    catch_unwind(|| pypi_census::cli::run(args)).unwrap_or(-1)
}
