//! C ABI for the jetvar engine.
//!
//! Expressions are opaque [`JvExpr`] handles released with
//! [`jv_expr_free`]; strings returned through out-parameters are released
//! with [`jv_string_free`]. Every function returns a [`JvStatus`]; on
//! failure [`jv_last_error_message`] describes the error of the calling
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use jetvar::expr::Simplifier;
use jetvar::io::{parse_expr_in, parse_input, resolve_identifier, run, Command, RunOptions, Scope};
use jetvar::{Error, Expr};

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JvStatus {
    Ok = 0,
    /// Syntax, unknown-coordinate, order or other input errors.
    InputError = 1,
    /// The command ran but one of its checks failed; the report is still
    /// returned.
    VerificationFailed = 2,
    NullPointer = 3,
    InvalidUtf8 = 4,
    /// A Rust panic was caught at the boundary.
    Panic = 5,
}

/// Opaque expression handle.
pub struct JvExpr {
    expr: Expr,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: JvStatus, msg: &str) -> JvStatus {
    set_error(msg);
    status
}

fn from_engine(e: &Error) -> JvStatus {
    let status = match e {
        Error::VerificationFailed(_) => JvStatus::VerificationFailed,
        _ => JvStatus::InputError,
    };
    fail(status, &e.to_string())
}

/// Runs `f`, turning panics into [`JvStatus::Panic`].
fn guard(f: impl FnOnce() -> JvStatus) -> JvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == JvStatus::Ok {
                set_error("");
            }
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(JvStatus::Panic, &format!("panic: {msg}"))
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, JvStatus> {
    if p.is_null() {
        return Err(fail(JvStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(JvStatus::InvalidUtf8, "argument is not valid UTF-8"))
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> JvStatus {
    match CString::new(s) {
        Ok(c) => {
            *out = c.into_raw();
            JvStatus::Ok
        }
        Err(_) => fail(JvStatus::InputError, "output contains a NUL byte"),
    }
}

unsafe fn write_expr(out: *mut *mut JvExpr, expr: Expr) -> JvStatus {
    *out = Box::into_raw(Box::new(JvExpr { expr }));
    JvStatus::Ok
}

macro_rules! check_out {
    ($out:expr) => {
        if $out.is_null() {
            return fail(JvStatus::NullPointer, "null output pointer");
        }
        *$out = ptr::null_mut();
    };
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Parses an expression. Any identifier is admitted: coordinate names
/// denote coordinates, others become free symbols.
///
/// # Safety
/// `src` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jv_expr_parse(src: *const c_char, out: *mut *mut JvExpr) -> JvStatus {
    guard(|| {
        check_out!(out);
        let src = try_ffi!(read_str(src));
        match parse_expr_in(src, &Scope::permissive()) {
            Ok(e) => write_expr(out, e),
            Err(e) => from_engine(&e),
        }
    })
}

/// Canonical normal form (fully expanded).
///
/// # Safety
/// `e` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jv_expr_normalize(e: *const JvExpr, out: *mut *mut JvExpr) -> JvStatus {
    guard(|| {
        check_out!(out);
        let Some(e) = e.as_ref() else { return fail(JvStatus::NullPointer, "null expression") };
        write_expr(out, Simplifier::default().normalize(&e.expr))
    })
}

/// Partial derivative with respect to the coordinate or symbol `name`.
///
/// # Safety
/// `e` must be a live handle, `name` a NUL-terminated string and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn jv_expr_diff(e: *const JvExpr, name: *const c_char, out: *mut *mut JvExpr) -> JvStatus {
    guard(|| {
        check_out!(out);
        let Some(e) = e.as_ref() else { return fail(JvStatus::NullPointer, "null expression") };
        let name = try_ffi!(read_str(name));
        match resolve_identifier(name.trim(), &Scope::permissive()) {
            Ok(s) => write_expr(out, Simplifier::default().normalize(&jetvar::expr::diff(&e.expr, &s))),
            Err(err) => from_engine(&err),
        }
    })
}

/// Canonical text of an expression.
///
/// # Safety
/// `e` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jv_expr_to_string(e: *const JvExpr, out: *mut *mut c_char) -> JvStatus {
    guard(|| {
        check_out!(out);
        let Some(e) = e.as_ref() else { return fail(JvStatus::NullPointer, "null expression") };
        write_string(out, e.expr.to_string())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `e` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn jv_expr_free(e: *mut JvExpr) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Releases a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn jv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Runs a command (`analyze`, `constraints`, `gravity-verify`,
/// `fixtures-check`) and returns the JSON report. `lagrangian` is Lagrangian
/// source text and may be null for the commands that do not need it.
/// `options_json` may be null or an object with the keys
/// `max_generations`, `points`, `seed`, `dim`, `fixtures`, `timing`.
/// A failed verification returns [`JvStatus::VerificationFailed`] together
/// with the report.
///
/// # Safety
/// Non-null string arguments must be NUL-terminated; `out_json` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn jv_run_command(
    command: *const c_char,
    lagrangian: *const c_char,
    options_json: *const c_char,
    out_json: *mut *mut c_char,
) -> JvStatus {
    guard(|| {
        check_out!(out_json);
        let command = try_ffi!(read_str(command));
        let command: Command = match command.parse() {
            Ok(c) => c,
            Err(e) => return from_engine(&e),
        };
        let lagrangian = if lagrangian.is_null() {
            None
        } else {
            match parse_input(try_ffi!(read_str(lagrangian))) {
                Ok(s) => Some(s),
                Err(e) => return from_engine(&e),
            }
        };
        let opts: RunOptions = if options_json.is_null() {
            RunOptions::default()
        } else {
            match serde_json::from_str(try_ffi!(read_str(options_json))) {
                Ok(o) => o,
                Err(e) => return fail(JvStatus::InputError, &format!("options: {e}")),
            }
        };
        match run(command, lagrangian.as_ref(), &opts) {
            Ok(doc) => {
                let passed = doc.passed();
                let s = write_string(out_json, doc.to_json());
                if s == JvStatus::Ok && !passed {
                    return fail(JvStatus::VerificationFailed, "verification failed");
                }
                s
            }
            Err(e) => from_engine(&e),
        }
    })
}

/// Message of the last failed call on this thread, empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn jv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}
