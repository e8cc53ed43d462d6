//! C ABI over the `sparsepos` library.
//!
//! Every function returns an [`SpsStatus`] (or a sentinel value for plain
//! getters) and never unwinds across the boundary. The message of the most
//! recent failure on the calling thread is available from [`sps_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sparsepos::certificate::{to_json, verify};
use sparsepos::cli::{parse_problem, prepare_instance, solve_row, Row, RunConfig};
use sparsepos::oracle::grid_min;
use sparsepos::relaxation::normalize_krivine;
use sparsepos::{Error, ProblemInstance, Rational, SolveStatus, Variant};

/// Result codes of the C interface.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpsStatus {
    Ok = 0,
    NullPointer = 1,
    Utf8 = 2,
    Parse = 3,
    Order = 4,
    Solver = 5,
    Argument = 6,
    Certificate = 7,
    Panic = 8,
}

/// Termination status of a solve.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpsSolveStatus {
    Optimal = 0,
    Infeasible = 1,
    Unbounded = 2,
    MaxIterations = 3,
    NumericalFailure = 4,
    /// The handle was null.
    Unknown = 5,
}

/// Opaque parsed problem.
pub struct SpsProblem {
    instance: ProblemInstance,
}

/// Opaque result of one solve at one relaxation order.
pub struct SpsResult {
    instance: ProblemInstance,
    row: Row,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let msg = CString::new(message.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(code: SpsStatus, message: impl Into<String>) -> SpsStatus {
    set_error(message);
    code
}

fn code_of(e: &Error) -> SpsStatus {
    match e {
        Error::Syntax { .. }
        | Error::Coupling { .. }
        | Error::BlockViolation { .. }
        | Error::Layout { .. }
        | Error::InvalidLayout(_) => SpsStatus::Parse,
        Error::Order { .. } => SpsStatus::Order,
        Error::Solver(_) => SpsStatus::Solver,
        Error::Extraction(_) => SpsStatus::Certificate,
        _ => SpsStatus::Argument,
    }
}

fn from_error(e: Error) -> SpsStatus {
    fail(code_of(&e), e.to_string())
}

fn guard(f: impl FnOnce() -> SpsStatus) -> SpsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => fail(SpsStatus::Panic, "internal panic"),
    }
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, SpsStatus> {
    if s.is_null() {
        return Err(fail(SpsStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s).to_str().map_err(|_| fail(SpsStatus::Utf8, "string is not valid UTF-8"))
}

fn solve_status(s: SolveStatus) -> SpsSolveStatus {
    match s {
        SolveStatus::Optimal => SpsSolveStatus::Optimal,
        SolveStatus::Infeasible => SpsSolveStatus::Infeasible,
        SolveStatus::Unbounded => SpsSolveStatus::Unbounded,
        SolveStatus::MaxIterations => SpsSolveStatus::MaxIterations,
        SolveStatus::NumericalFailure => SpsSolveStatus::NumericalFailure,
    }
}

/// Message of the last failure on this thread; empty when none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sps_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a problem in the text format accepted by the command line tool.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sps_problem_parse(source: *const c_char, out: *mut *mut SpsProblem) -> SpsStatus {
    guard(|| {
        if out.is_null() {
            return fail(SpsStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let src = match text(source) {
            Ok(s) => s,
            Err(c) => return c,
        };
        match parse_problem(src) {
            Ok(instance) => {
                *out = Box::into_raw(Box::new(SpsProblem { instance }));
                SpsStatus::Ok
            }
            Err(e) => fail(SpsStatus::Parse, e.to_string()),
        }
    })
}

/// # Safety
/// `problem` must be null or a handle from [`sps_problem_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sps_problem_free(problem: *mut SpsProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Total number of variables, or 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sps_problem_nvars(problem: *const SpsProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.instance.nvars())
}

/// Divides every constraint by its bound (`g` constraints first) so that
/// `0 <= g <= 1` on the feasible set, in place.
///
/// # Safety
/// `problem` must be a live handle and `bounds` point to `count` doubles.
#[no_mangle]
pub unsafe extern "C" fn sps_problem_normalize_krivine(problem: *mut SpsProblem, bounds: *const f64, count: usize) -> SpsStatus {
    guard(|| {
        let Some(p) = problem.as_mut() else {
            return fail(SpsStatus::NullPointer, "null problem");
        };
        if bounds.is_null() && count > 0 {
            return fail(SpsStatus::NullPointer, "null bounds");
        }
        let raw = if count == 0 { &[][..] } else { std::slice::from_raw_parts(bounds, count) };
        let mut exact = Vec::with_capacity(count);
        for &b in raw {
            match Rational::from_float(b) {
                Some(r) => exact.push(r),
                None => return fail(SpsStatus::Argument, format!("bound {b} is not finite")),
            }
        }
        match normalize_krivine(&p.instance, &exact) {
            Ok(n) => {
                p.instance = n;
                SpsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Solves one relaxation order of `variant` (for example `"schmudgen-sparse"`).
/// A non-optimal termination still yields a result; inspect its status.
///
/// # Safety
/// `problem` must be a live handle, `variant` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sps_solve(
    problem: *const SpsProblem,
    variant: *const c_char,
    order: u32,
    tol: f64,
    out: *mut *mut SpsResult,
) -> SpsStatus {
    guard(|| {
        if out.is_null() {
            return fail(SpsStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let Some(p) = problem.as_ref() else {
            return fail(SpsStatus::NullPointer, "null problem");
        };
        let variant: Variant = match text(variant).map(str::parse) {
            Ok(Ok(v)) => v,
            Ok(Err(e)) => return from_error(e),
            Err(c) => return c,
        };
        let mut config = RunConfig::new(variant, order, order);
        config.tol = tol;
        if let Err(e) = config.validate() {
            return from_error(e);
        }
        let instance = match prepare_instance(&p.instance, &config) {
            Ok(i) => i,
            Err(e) => return from_error(e),
        };
        let row = solve_row(&instance, variant, order, tol);
        if let Some(e) = row.error.clone() {
            return from_error(e);
        }
        *out = Box::into_raw(Box::new(SpsResult { instance, row }));
        SpsStatus::Ok
    })
}

/// # Safety
/// `result` must be null or a handle from [`sps_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sps_result_free(result: *mut SpsResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Lower bound of the solve; `-inf` when unbounded, NaN for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sps_result_bound(result: *const SpsResult) -> f64 {
    result.as_ref().and_then(|r| r.row.bound).unwrap_or(f64::NAN)
}

/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sps_result_status(result: *const SpsResult) -> SpsSolveStatus {
    result
        .as_ref()
        .and_then(|r| r.row.status)
        .map_or(SpsSolveStatus::Unknown, solve_status)
}

/// Writes the certificate as a newly allocated JSON string; release it with
/// [`sps_string_free`].
///
/// # Safety
/// `result` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sps_result_certificate_json(result: *const SpsResult, out: *mut *mut c_char) -> SpsStatus {
    guard(|| {
        if out.is_null() {
            return fail(SpsStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let Some(r) = result.as_ref() else {
            return fail(SpsStatus::NullPointer, "null result");
        };
        let Some(cert) = &r.row.certificate else {
            return fail(SpsStatus::Certificate, "no certificate for a non-optimal solve");
        };
        match CString::new(to_json(cert)) {
            Ok(s) => {
                *out = s.into_raw();
                SpsStatus::Ok
            }
            Err(_) => fail(SpsStatus::Certificate, "certificate contains NUL"),
        }
    })
}

/// Verifies the certificate against the solved instance. `residual` and
/// `passed` are optional outputs.
///
/// # Safety
/// `result` must be a live handle; outputs must be null or valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sps_result_verify(result: *const SpsResult, tol: f64, residual: *mut f64, passed: *mut bool) -> SpsStatus {
    guard(|| {
        let Some(r) = result.as_ref() else {
            return fail(SpsStatus::NullPointer, "null result");
        };
        let Some(cert) = &r.row.certificate else {
            return fail(SpsStatus::Certificate, "no certificate for a non-optimal solve");
        };
        let report = verify(cert, &r.instance, tol);
        if let Some(p) = residual.as_mut() {
            *p = report.residual;
        }
        if let Some(p) = passed.as_mut() {
            *p = report.passed;
        }
        if !report.passed {
            set_error(report.message.unwrap_or_else(|| "verification failed".into()));
        }
        SpsStatus::Ok
    })
}

/// Grid minimum of the objective over the feasible points of `[lo, hi]^n`.
/// `argmin` is optional and, when given, must hold `nvars` doubles.
///
/// # Safety
/// `problem` must be a live handle; outputs must be null or valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sps_grid_min(
    problem: *const SpsProblem,
    lo: f64,
    hi: f64,
    step: f64,
    minimum: *mut f64,
    argmin: *mut f64,
) -> SpsStatus {
    guard(|| {
        let Some(p) = problem.as_ref() else {
            return fail(SpsStatus::NullPointer, "null problem");
        };
        if minimum.is_null() {
            return fail(SpsStatus::NullPointer, "null output pointer");
        }
        let bounds = vec![(lo, hi); p.instance.nvars()];
        match grid_min(&p.instance, &bounds, step) {
            Ok(o) => {
                *minimum = o.minimum;
                if !argmin.is_null() {
                    std::slice::from_raw_parts_mut(argmin, o.argmin.len()).copy_from_slice(&o.argmin);
                }
                SpsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sps_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
