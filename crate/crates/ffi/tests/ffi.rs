use std::ffi::{CStr, CString};
use std::ptr;

use fsmguard_ffi::*;

const AES: &str = include_str!("../../core/testdata/aes_ctrl.v");

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(p: *mut std::ffi::c_char) -> String {
    let s = CStr::from_ptr(p).to_str().unwrap().to_string();
    fsmguard_string_free(p);
    s
}

unsafe fn parse(src: &str) -> *mut FsmDesign {
    let mut h = ptr::null_mut();
    let s = cstr(src);
    assert_eq!(fsmguard_parse(s.as_ptr(), ptr::null(), &mut h), FsmStatus::Ok);
    assert!(!h.is_null());
    h
}

#[test]
fn parse_emit_check_roundtrip() {
    unsafe {
        let h = parse(AES);
        let mut out = ptr::null_mut();
        assert_eq!(fsmguard_emit(h, &mut out), FsmStatus::Ok);
        let text = take(out);
        assert!(text.contains("module"));

        let mut json = ptr::null_mut();
        let st = fsmguard_check_json(h, ptr::null(), false, &mut json);
        let report: serde_json::Value = serde_json::from_str(&take(json)).unwrap();
        let n = report["violations"].as_array().unwrap().len();
        assert_eq!(st == FsmStatus::Violations, n > 0);
        fsmguard_design_free(h);
    }
}

#[test]
fn parse_error_sets_message() {
    unsafe {
        let mut h = ptr::null_mut();
        let s = cstr("module broken (");
        assert_eq!(fsmguard_parse(s.as_ptr(), ptr::null(), &mut h), FsmStatus::ParseError);
        assert!(h.is_null());
        let msg = fsmguard_last_error();
        assert!(!msg.is_null());
        assert!(!CStr::from_ptr(msg).to_bytes().is_empty());
    }
}

#[test]
fn null_arguments_are_rejected() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(fsmguard_parse(ptr::null(), ptr::null(), &mut h), FsmStatus::NullPointer);
        let mut out = ptr::null_mut();
        assert_eq!(fsmguard_emit(ptr::null(), &mut out), FsmStatus::NullPointer);
        fsmguard_design_free(ptr::null_mut());
        fsmguard_string_free(ptr::null_mut());
    }
}

#[test]
fn inject_then_mitigate() {
    unsafe {
        let h = parse(AES);
        let class = cstr("STATIC_DEADLOCK");
        let mut injected = ptr::null_mut();
        let mut plan = ptr::null_mut();
        assert_eq!(fsmguard_inject(h, class.as_ptr(), 7, &mut injected, &mut plan), FsmStatus::Ok);
        let plan: serde_json::Value = serde_json::from_str(&take(plan)).unwrap();
        assert_eq!(plan["vuln"], "STATIC_DEADLOCK");

        let mut json = ptr::null_mut();
        assert_eq!(fsmguard_check_json(injected, ptr::null(), false, &mut json), FsmStatus::Violations);
        assert!(take(json).contains("STATIC_DEADLOCK"));

        let mut out = ptr::null_mut();
        assert_eq!(fsmguard_mitigate(injected, ptr::null(), &mut out), FsmStatus::Ok);
        let outcome: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert!(outcome["fixed"].as_array().unwrap().iter().any(|r| r == "STATIC_DEADLOCK"));

        let bad = cstr("NOT_A_CLASS");
        let mut none = ptr::null_mut();
        assert_eq!(
            fsmguard_inject(h, bad.as_ptr(), 0, &mut none, ptr::null_mut()),
            FsmStatus::InvalidArgument
        );
        fsmguard_design_free(injected);
        fsmguard_design_free(h);
    }
}

#[test]
fn fif_codes() {
    unsafe {
        let mut v = 9u8;
        let (a, b, p) = (cstr("0000"), cstr("0100"), cstr("1110"));
        assert_eq!(fsmguard_fif(a.as_ptr(), b.as_ptr(), p.as_ptr(), &mut v), FsmStatus::Ok);
        assert_eq!(v, 0);
        let (a, b, p) = (cstr("11"), cstr("01"), cstr("11"));
        assert_eq!(fsmguard_fif(a.as_ptr(), b.as_ptr(), p.as_ptr(), &mut v), FsmStatus::Ok);
        assert_eq!(v, 1);
        let w = cstr("1");
        assert_eq!(fsmguard_fif(a.as_ptr(), w.as_ptr(), p.as_ptr(), &mut v), FsmStatus::InvalidArgument);
    }
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/fsmguard.h");
    for sym in [
        "fsmguard_version",
        "fsmguard_last_error",
        "fsmguard_parse",
        "fsmguard_design_free",
        "fsmguard_string_free",
        "fsmguard_emit",
        "fsmguard_check_json",
        "fsmguard_inject",
        "fsmguard_mitigate",
        "fsmguard_fif",
        "typedef struct FsmDesign FsmDesign",
        "FSM_STATUS_OK = 0",
    ] {
        assert!(header.contains(sym), "missing {sym}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Some(cc) = ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| std::process::Command::new(c).arg("--version").output().is_ok())
    else {
        eprintln!("no C compiler, skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("use.c");
    std::fs::write(
        &c,
        "#include \"fsmguard.h\"\nint main(void) { FsmDesign *d = 0; return fsmguard_parse(\"\", 0, &d) == FSM_STATUS_OK; }\n",
    )
    .unwrap();
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&c)
        .status()
        .unwrap();
    assert!(status.success());
}
