//! C ABI over the fsmguard core.
//!
//! Every entry point returns an [`FsmStatus`]. On failure a message is kept
//! per thread and can be read with [`fsmguard_last_error`]. Strings handed out
//! by this library must be released with [`fsmguard_string_free`], design
//! handles with [`fsmguard_design_free`].

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fsmguard::frontend::{self, emit_verilog, FsmAst, SourceText};
use fsmguard::inject::{plan_injection, VulnClass};
use fsmguard::mitigate::{mitigate, MitigationConfig};
use fsmguard::rules::{check_ast, fif_metric, RuleConfig};
use fsmguard::Encoding;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidArgument = 4,
    InjectFailed = 5,
    /// The check ran and found at least one violation.
    Violations = 6,
    Internal = 7,
}

/// Opaque parsed design.
pub struct FsmDesign {
    ast: FsmAst,
    origin: String,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

type FfiResult<T> = Result<T, FsmStatus>;

fn fail<T>(status: FsmStatus, msg: impl Into<String>) -> FfiResult<T> {
    set_error(msg);
    Err(status)
}

fn guard(f: impl FnOnce() -> FfiResult<FsmStatus>) -> FsmStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            FsmStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return fail(FsmStatus::NullPointer, format!("{what} is null"));
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(s),
        Err(_) => fail(FsmStatus::InvalidUtf8, format!("{what} is not UTF-8")),
    }
}

unsafe fn opt_str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<Option<&'a str>> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

fn protected_set(csv: Option<&str>) -> BTreeSet<String> {
    csv.map(|s| {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(String::from)
            .collect()
    })
    .unwrap_or_default()
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> FfiResult<()> {
    if out.is_null() {
        return fail(FsmStatus::NullPointer, "output pointer is null");
    }
    match CString::new(s) {
        Ok(c) => {
            *out = c.into_raw();
            Ok(())
        }
        Err(_) => fail(FsmStatus::Internal, "output contains a NUL byte"),
    }
}

unsafe fn design_ref<'a>(h: *const FsmDesign) -> FfiResult<&'a FsmDesign> {
    if h.is_null() {
        return fail(FsmStatus::NullPointer, "design handle is null");
    }
    Ok(&*h)
}

fn parse_source(text: &str, origin: &str) -> FfiResult<FsmAst> {
    frontend::parse(&SourceText::new(text, origin)).or_else(|diags| {
        let msg = diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ");
        fail(FsmStatus::ParseError, msg)
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fsmguard_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failing call on this thread, or NULL. The pointer is
/// valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn fsmguard_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses Verilog source. `origin` may be NULL.
///
/// # Safety
/// `source` and `origin` must be NULL or valid NUL-terminated strings; `out`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fsmguard_parse(
    source: *const c_char,
    origin: *const c_char,
    out: *mut *mut FsmDesign,
) -> FsmStatus {
    guard(|| {
        let text = str_arg(source, "source")?;
        let origin = opt_str_arg(origin, "origin")?.unwrap_or("<ffi>");
        if out.is_null() {
            return fail(FsmStatus::NullPointer, "output pointer is null");
        }
        let ast = parse_source(text, origin)?;
        *out = Box::into_raw(Box::new(FsmDesign { ast, origin: origin.to_string() }));
        Ok(FsmStatus::Ok)
    })
}

/// Releases a design handle. NULL is ignored.
///
/// # Safety
/// `design` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fsmguard_design_free(design: *mut FsmDesign) {
    if !design.is_null() {
        drop(Box::from_raw(design));
    }
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fsmguard_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Canonical Verilog for a design.
///
/// # Safety
/// `design` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fsmguard_emit(design: *const FsmDesign, out: *mut *mut c_char) -> FsmStatus {
    guard(|| {
        let d = design_ref(design)?;
        put_string(out, emit_verilog(&d.ast).content)?;
        Ok(FsmStatus::Ok)
    })
}

/// Runs the checker and writes the JSON report to `out`. `protected_csv` is
/// a comma-separated list of extra protected states, or NULL. Returns
/// `Violations` when the report is non-empty; `out` is filled either way.
///
/// # Safety
/// `design` must be a live handle, `protected_csv` NULL or a valid string,
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fsmguard_check_json(
    design: *const FsmDesign,
    protected_csv: *const c_char,
    enable_fif: bool,
    out: *mut *mut c_char,
) -> FsmStatus {
    guard(|| {
        let d = design_ref(design)?;
        let protected = protected_set(opt_str_arg(protected_csv, "protected_csv")?);
        let config = RuleConfig { fif: enable_fif, ..RuleConfig::default() };
        let report = check_ast(&d.ast, &protected, &config, &d.origin);
        if !report.parsed {
            let msg = report.lint.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("; ");
            return fail(FsmStatus::InvalidArgument, msg);
        }
        put_string(out, report.to_json())?;
        Ok(if report.violations.is_empty() { FsmStatus::Ok } else { FsmStatus::Violations })
    })
}

/// Injects a vulnerability of class `vuln` (e.g. `STATIC_DEADLOCK`). On
/// success `out_design` receives a new handle and `out_plan`, if not NULL,
/// the injection plan as JSON.
///
/// # Safety
/// `design` must be a live handle, `vuln` a valid string, `out_design` a
/// valid pointer, `out_plan` NULL or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fsmguard_inject(
    design: *const FsmDesign,
    vuln: *const c_char,
    seed: u64,
    out_design: *mut *mut FsmDesign,
    out_plan: *mut *mut c_char,
) -> FsmStatus {
    guard(|| {
        let d = design_ref(design)?;
        let class: VulnClass = match str_arg(vuln, "vuln")?.parse() {
            Ok(c) => c,
            Err(e) => return fail(FsmStatus::InvalidArgument, format!("{e}")),
        };
        if out_design.is_null() {
            return fail(FsmStatus::NullPointer, "output pointer is null");
        }
        let (ast, plan) = match plan_injection(class, &d.ast, seed) {
            Ok(r) => r,
            Err(e) => return fail(FsmStatus::InjectFailed, e.to_string()),
        };
        if !out_plan.is_null() {
            put_string(out_plan, serde_json::to_string_pretty(&plan).expect("plan serializes"))?;
        }
        *out_design = Box::into_raw(Box::new(FsmDesign { ast, origin: d.origin.clone() }));
        Ok(FsmStatus::Ok)
    })
}

/// Runs the mitigator and writes the outcome as JSON to `out`.
///
/// # Safety
/// Same contract as [`fsmguard_check_json`].
#[no_mangle]
pub unsafe extern "C" fn fsmguard_mitigate(
    design: *const FsmDesign,
    protected_csv: *const c_char,
    out: *mut *mut c_char,
) -> FsmStatus {
    guard(|| {
        let d = design_ref(design)?;
        let protected = protected_set(opt_str_arg(protected_csv, "protected_csv")?);
        let mut src = emit_verilog(&d.ast);
        src.origin = d.origin.clone();
        let report = check_ast(&d.ast, &protected, &RuleConfig::default(), &d.origin);
        let outcome = mitigate(&src, &report, &MitigationConfig::default());
        put_string(out, serde_json::to_string_pretty(&outcome).expect("outcome serializes"))?;
        Ok(FsmStatus::Ok)
    })
}

/// FIF of one transition given three binary encodings of equal width.
/// Writes 0 or 1 to `out`.
///
/// # Safety
/// All string arguments must be valid; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fsmguard_fif(
    bx: *const c_char,
    by: *const c_char,
    bp: *const c_char,
    out: *mut u8,
) -> FsmStatus {
    guard(|| {
        let mut enc = Vec::with_capacity(3);
        for (p, what) in [(bx, "bx"), (by, "by"), (bp, "bp")] {
            match str_arg(p, what)?.parse::<Encoding>() {
                Ok(e) => enc.push(e),
                Err(e) => return fail(FsmStatus::InvalidArgument, format!("{what}: {e}")),
            }
        }
        if out.is_null() {
            return fail(FsmStatus::NullPointer, "output pointer is null");
        }
        match fif_metric(&enc[0], &enc[1], &enc[2]) {
            Ok(r) => {
                *out = r.overall;
                Ok(FsmStatus::Ok)
            }
            Err(e) => fail(FsmStatus::InvalidArgument, e.to_string()),
        }
    })
}
