//! C ABI over the bridgepot library.
//!
//! Every function returns a [`BpStatus`]; results go through out-pointers.
//! On failure, [`bp_last_error_message`] describes the most recent error on
//! the calling thread. Panics are caught at the boundary and reported as
//! [`BpStatus::Panic`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bridgepot::feynman_kac::{g_ratio_mc, s_mc, McConfig, McEstimate};
use bridgepot::functionals::{
    j_transform, k_transform, n_functional, newton_potential, s_functional, BridgeSpec,
};
use bridgepot::kernels::{f_integral, heat_kernel, j_kernel, k0, Dimension};
use bridgepot::potentials::{lp_halfd_norm, Potential};
use bridgepot::quadrature::{Estimate, QuadratureSpec, Status};
use bridgepot::verify::{run_suite, SuiteConfig};
use bridgepot::BridgeError;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    ComputationFailed = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpQuadratureStatus {
    Converged = 0,
    MaxSubdivisionsReached = 1,
    Diverged = 2,
}

/// A value with an error bound and convergence status.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpEstimate {
    pub value: f64,
    pub error_bound: f64,
    pub status: BpQuadratureStatus,
}

/// Monte Carlo mean with its standard error.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpMcEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub paths: u64,
}

/// Opaque potential handle.
pub struct BpPotential {
    inner: Potential,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: BpStatus,
    message: String,
}

impl Failure {
    fn new(status: BpStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<BridgeError> for Failure {
    fn from(e: BridgeError) -> Self {
        let status = match e {
            BridgeError::Parse(_) => BpStatus::ParseError,
            BridgeError::LowDimension(_)
            | BridgeError::DimensionMismatch { .. }
            | BridgeError::NonPositiveTime(_)
            | BridgeError::InvalidParameter(_)
            | BridgeError::UnknownSuite(_)
            | BridgeError::TooFewRadii(_) => BpStatus::InvalidArgument,
            _ => BpStatus::ComputationFailed,
        };
        Failure::new(status, e.to_string())
    }
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> BpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BpStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(fail.message);
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {msg}"));
            BpStatus::Panic
        }
    }
}

unsafe fn slice<'a>(ptr: *const f64, len: usize) -> Result<&'a [f64], Failure> {
    if ptr.is_null() {
        return Err(Failure::new(BpStatus::NullPointer, "null coordinate pointer"));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn potential<'a>(p: *const BpPotential) -> Result<&'a Potential, Failure> {
    p.as_ref()
        .map(|h| &h.inner)
        .ok_or_else(|| Failure::new(BpStatus::NullPointer, "null potential handle"))
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(BpStatus::NullPointer, "null output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(Failure::new(BpStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Failure::new(BpStatus::InvalidArgument, "string is not valid UTF-8"))
}

fn dimension(d: u32) -> Result<Dimension, Failure> {
    Ok(Dimension::new(d)?)
}

/// `rel_tol <= 0` selects the library default for the integral.
fn spec(rel_tol: f64, default: QuadratureSpec) -> Result<QuadratureSpec, Failure> {
    if rel_tol.is_nan() {
        return Err(Failure::new(BpStatus::InvalidArgument, "rel_tol is NaN"));
    }
    Ok(if rel_tol > 0.0 {
        default.with_rel_tol(rel_tol)
    } else {
        default
    })
}

fn estimate(e: Estimate) -> BpEstimate {
    BpEstimate {
        value: e.value,
        error_bound: e.error_bound,
        status: match e.status {
            Status::Converged => BpQuadratureStatus::Converged,
            Status::MaxSubdivisionsReached => BpQuadratureStatus::MaxSubdivisionsReached,
            Status::Diverged => BpQuadratureStatus::Diverged,
        },
    }
}

fn mc_estimate(e: McEstimate) -> BpMcEstimate {
    BpMcEstimate {
        mean: e.mean,
        std_error: e.std_error,
        paths: e.paths as u64,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a potential from its JSON description.
#[no_mangle]
pub unsafe extern "C" fn bp_potential_from_json(json: *const c_char, out: *mut *mut BpPotential) -> BpStatus {
    guard(|| {
        let v = Potential::from_json(text(json)?)?;
        write(out, Box::into_raw(Box::new(BpPotential { inner: v })))
    })
}

/// Releases a handle; NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn bp_potential_free(p: *mut BpPotential) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Serialises a potential to JSON; release the string with [`bp_string_free`].
#[no_mangle]
pub unsafe extern "C" fn bp_potential_to_json(p: *const BpPotential, out: *mut *mut c_char) -> BpStatus {
    guard(|| {
        let json = potential(p)?.to_json();
        let c = CString::new(json).map_err(|e| Failure::new(BpStatus::ComputationFailed, e.to_string()))?;
        write(out, c.into_raw())
    })
}

#[no_mangle]
pub unsafe extern "C" fn bp_potential_evaluate(
    p: *const BpPotential,
    z: *const f64,
    d: u32,
    out: *mut f64,
) -> BpStatus {
    guard(|| {
        let v = potential(p)?.evaluate(slice(z, d as usize)?)?;
        write(out, v)
    })
}

/// Releases a string returned by this library; NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn bp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Heat kernel `g(t, x, y)` in dimension `d`.
#[no_mangle]
pub unsafe extern "C" fn bp_heat_kernel(t: f64, x: *const f64, y: *const f64, d: u32, out: *mut f64) -> BpStatus {
    guard(|| {
        let n = d as usize;
        let v = heat_kernel(t, slice(x, n)?, slice(y, n)?, dimension(d)?)?;
        write(out, v)
    })
}

/// `K₀(x, y)`; `+∞` at `x = 0`.
#[no_mangle]
pub unsafe extern "C" fn bp_k0(x: *const f64, y: *const f64, d: u32, out: *mut f64) -> BpStatus {
    guard(|| {
        let n = d as usize;
        let v = k0(slice(x, n)?, slice(y, n)?, dimension(d)?)?;
        write(out, v)
    })
}

#[no_mangle]
pub unsafe extern "C" fn bp_j_kernel(
    x: *const f64,
    y: *const f64,
    d: u32,
    rel_tol: f64,
    out: *mut BpEstimate,
) -> BpStatus {
    guard(|| {
        let n = d as usize;
        let q = spec(rel_tol, QuadratureSpec::one_dim())?;
        let e = j_kernel(slice(x, n)?, slice(y, n)?, dimension(d)?, &q)?;
        write(out, estimate(e))
    })
}

/// `f(a, b; β, c)`.
#[no_mangle]
pub unsafe extern "C" fn bp_f_integral(
    a: f64,
    b: f64,
    beta: f64,
    c: f64,
    rel_tol: f64,
    out: *mut BpEstimate,
) -> BpStatus {
    guard(|| {
        let q = spec(rel_tol, QuadratureSpec::one_dim())?;
        write(out, estimate(f_integral(a, b, beta, c, &q)?))
    })
}

/// `K(V, x, y)`. An infinite value is returned with quadrature status
/// `Diverged` and call status `Ok`.
#[no_mangle]
pub unsafe extern "C" fn bp_k_transform(
    p: *const BpPotential,
    x: *const f64,
    y: *const f64,
    d: u32,
    rel_tol: f64,
    out: *mut BpEstimate,
) -> BpStatus {
    guard(|| {
        let n = d as usize;
        let q = spec(rel_tol, QuadratureSpec::multi_dim())?;
        let e = k_transform(potential(p)?, slice(x, n)?, slice(y, n)?, &q)?;
        write(out, estimate(e))
    })
}

#[no_mangle]
pub unsafe extern "C" fn bp_j_transform(
    p: *const BpPotential,
    x: *const f64,
    y: *const f64,
    d: u32,
    rel_tol: f64,
    out: *mut BpEstimate,
) -> BpStatus {
    guard(|| {
        let n = d as usize;
        let q = spec(rel_tol, QuadratureSpec::multi_dim())?;
        let e = j_transform(potential(p)?, slice(x, n)?, slice(y, n)?, &q)?;
        write(out, estimate(e))
    })
}

#[no_mangle]
pub unsafe extern "C" fn bp_newton_potential(
    p: *const BpPotential,
    x: *const f64,
    d: u32,
    rel_tol: f64,
    out: *mut BpEstimate,
) -> BpStatus {
    guard(|| {
        let q = spec(rel_tol, QuadratureSpec::multi_dim())?;
        let e = newton_potential(potential(p)?, slice(x, d as usize)?, &q)?;
        write(out, estimate(e))
    })
}

unsafe fn bridge(t: f64, x: *const f64, y: *const f64, d: u32) -> Result<BridgeSpec, Failure> {
    let n = d as usize;
    Ok(BridgeSpec::new(t, slice(x, n)?.to_vec(), slice(y, n)?.to_vec())?)
}

/// `S(V, t, x, y)`.
#[no_mangle]
pub unsafe extern "C" fn bp_s_functional(
    p: *const BpPotential,
    t: f64,
    x: *const f64,
    y: *const f64,
    d: u32,
    rel_tol: f64,
    out: *mut BpEstimate,
) -> BpStatus {
    guard(|| {
        let q = spec(rel_tol, QuadratureSpec::multi_dim())?;
        let e = s_functional(potential(p)?, &bridge(t, x, y, d)?, &q)?;
        write(out, estimate(e))
    })
}

/// `N(V, t, x, y)`.
#[no_mangle]
pub unsafe extern "C" fn bp_n_functional(
    p: *const BpPotential,
    t: f64,
    x: *const f64,
    y: *const f64,
    d: u32,
    rel_tol: f64,
    out: *mut BpEstimate,
) -> BpStatus {
    guard(|| {
        let q = spec(rel_tol, QuadratureSpec::multi_dim())?;
        let e = n_functional(potential(p)?, &bridge(t, x, y, d)?, &q)?;
        write(out, estimate(e))
    })
}

/// `‖V‖_{L^{d/2}}`; infinite norms come back with status `Diverged`.
#[no_mangle]
pub unsafe extern "C" fn bp_lp_halfd_norm(p: *const BpPotential, d: u32, rel_tol: f64, out: *mut BpEstimate) -> BpStatus {
    guard(|| {
        let q = spec(rel_tol, QuadratureSpec::one_dim())?;
        write(out, estimate(lp_halfd_norm(potential(p)?, dimension(d)?, &q)?))
    })
}

/// Monte Carlo estimate of `G/g`.
#[no_mangle]
pub unsafe extern "C" fn bp_g_ratio_mc(
    p: *const BpPotential,
    t: f64,
    x: *const f64,
    y: *const f64,
    d: u32,
    paths: u64,
    steps: u64,
    seed: u64,
    out: *mut BpMcEstimate,
) -> BpStatus {
    guard(|| {
        let mc = McConfig::new(paths as usize, steps as usize, seed)?;
        let e = g_ratio_mc(potential(p)?, &bridge(t, x, y, d)?, &mc)?;
        write(out, mc_estimate(e))
    })
}

/// Monte Carlo estimate of `S(V, t, x, y)`.
#[no_mangle]
pub unsafe extern "C" fn bp_s_mc(
    p: *const BpPotential,
    t: f64,
    x: *const f64,
    y: *const f64,
    d: u32,
    paths: u64,
    steps: u64,
    seed: u64,
    out: *mut BpMcEstimate,
) -> BpStatus {
    guard(|| {
        let mc = McConfig::new(paths as usize, steps as usize, seed)?;
        let e = s_mc(potential(p)?, &bridge(t, x, y, d)?, &mc)?;
        write(out, mc_estimate(e))
    })
}

/// Runs a verification suite and returns its JSON report through
/// `report_json` (release with [`bp_string_free`]) and its verdict through
/// `passed` (1 or 0).
#[no_mangle]
pub unsafe extern "C" fn bp_verify_suite(
    suite: *const c_char,
    seed: u64,
    quick: bool,
    report_json: *mut *mut c_char,
    passed: *mut i32,
) -> BpStatus {
    guard(|| {
        let cfg = SuiteConfig {
            seed,
            quick,
            timing: false,
        };
        let report = run_suite(text(suite)?, &cfg)?;
        let json = serde_json::to_string(&report).map_err(|e| Failure::new(BpStatus::ComputationFailed, e.to_string()))?;
        let c = CString::new(json).map_err(|e| Failure::new(BpStatus::ComputationFailed, e.to_string()))?;
        write(passed, i32::from(report.passed))?;
        write(report_json, c.into_raw())
    })
}
