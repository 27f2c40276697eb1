use std::ffi::{c_char, CStr, CString};
use std::ptr;

use jetvar_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_string();
    jv_string_free(s);
    out
}

unsafe fn last_error() -> String {
    CStr::from_ptr(jv_last_error_message()).to_str().unwrap().to_string()
}

unsafe fn parse(src: &str) -> *mut JvExpr {
    let mut e = ptr::null_mut();
    assert_eq!(jv_expr_parse(cstr(src).as_ptr(), &mut e), JvStatus::Ok);
    e
}

unsafe fn text(e: *const JvExpr) -> String {
    let mut s = ptr::null_mut();
    assert_eq!(jv_expr_to_string(e, &mut s), JvStatus::Ok);
    take(s)
}

#[test]
fn parse_normalize_diff_print() {
    unsafe {
        let e = parse("(a + q1_2)^2 - a^2");
        let mut n = ptr::null_mut();
        assert_eq!(jv_expr_normalize(e, &mut n), JvStatus::Ok);
        assert_eq!(text(n), "q1_2^2 + 2*q1_2*a");
        let mut d = ptr::null_mut();
        assert_eq!(jv_expr_diff(n, cstr("q1_2").as_ptr(), &mut d), JvStatus::Ok);
        assert_eq!(text(d), "2*q1_2 + 2*a");
        assert_eq!(last_error(), "");
        jv_expr_free(d);
        jv_expr_free(n);
        jv_expr_free(e);
    }
}

#[test]
fn errors_carry_messages() {
    unsafe {
        let mut e = ptr::null_mut();
        assert_eq!(jv_expr_parse(cstr("a +\n * b").as_ptr(), &mut e), JvStatus::InputError);
        assert!(e.is_null());
        assert!(last_error().contains("line 2"), "{}", last_error());
        assert_eq!(jv_expr_parse(ptr::null(), &mut e), JvStatus::NullPointer);
        assert_eq!(jv_expr_parse(cstr("a").as_ptr(), ptr::null_mut()), JvStatus::NullPointer);
        let bad = [0xffu8, 0];
        assert_eq!(jv_expr_parse(bad.as_ptr() as *const c_char, &mut e), JvStatus::InvalidUtf8);
        let mut s = ptr::null_mut();
        assert_eq!(jv_expr_to_string(ptr::null(), &mut s), JvStatus::NullPointer);
        jv_expr_free(ptr::null_mut());
        jv_string_free(ptr::null_mut());
    }
}

#[test]
fn run_constraints() {
    unsafe {
        let lagrangian = cstr("lagrangian { kind: mechanics, n: 1, k: 2 }\nL = q1_0*q1_2\n");
        let mut out = ptr::null_mut();
        let st = jv_run_command(cstr("constraints").as_ptr(), lagrangian.as_ptr(), ptr::null(), &mut out);
        assert_eq!(st, JvStatus::Ok, "{}", last_error());
        let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(v["chain"]["generations"], serde_json::json!([["2*q1_2"], ["2*q1_3"]]));
    }
}

#[test]
fn run_rejects_bad_commands_and_options() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(jv_run_command(cstr("launch").as_ptr(), ptr::null(), ptr::null(), &mut out), JvStatus::InputError);
        let opts = cstr(r#"{"colour": 3}"#);
        assert_eq!(
            jv_run_command(cstr("gravity-verify").as_ptr(), ptr::null(), opts.as_ptr(), &mut out),
            JvStatus::InputError
        );
        assert!(last_error().contains("colour"));
        assert_eq!(jv_run_command(cstr("analyze").as_ptr(), ptr::null(), ptr::null(), &mut out), JvStatus::InputError);
        assert!(out.is_null());
    }
}

#[test]
fn failed_fixture_check_returns_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.json");
    std::fs::write(
        &path,
        r#"{"schema_version":1,"generator":"hand","records":[
            {"quantity":"christoffel","dimension":2,"indices":[1,1,1],
             "point":{"g00":"1","g11":"3","g11_[0,1]":"1/2"},"value":"1/6","encoding":"rational"}]}"#,
    )
    .unwrap();
    let opts = cstr(&serde_json::json!({ "fixtures": path }).to_string());
    unsafe {
        let mut out = ptr::null_mut();
        let st = jv_run_command(cstr("fixtures-check").as_ptr(), ptr::null(), opts.as_ptr(), &mut out);
        assert_eq!(st, JvStatus::VerificationFailed);
        let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(v["verification"]["failures"].as_array().unwrap().len(), 1);
    }
}

#[test]
fn header_is_current_and_compiles() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let header = std::fs::read_to_string(format!("{dir}/include/jetvar.h")).unwrap();
    for name in [
        "jv_expr_parse",
        "jv_expr_normalize",
        "jv_expr_diff",
        "jv_expr_to_string",
        "jv_expr_free",
        "jv_string_free",
        "jv_run_command",
        "jv_last_error_message",
        "JV_STATUS_PANIC = 5",
    ] {
        assert!(header.contains(name), "{name} missing from the header");
    }
    // Syntax-check with a C compiler when one is installed.
    let probe = tempfile::tempdir().unwrap();
    let src = probe.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"jetvar.h\"\nint main(void) { JvExpr *e = 0; return jv_expr_parse(\"x1\", &e) == JV_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    if let Ok(out) =
        std::process::Command::new("cc").args(["-fsyntax-only", "-I", &format!("{dir}/include")]).arg(&src).output()
    {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
