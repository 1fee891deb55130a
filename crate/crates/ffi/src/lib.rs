//! C interface to `wkbdiff`.
//!
//! Matrices and branches are opaque handles released with their `_free` function.
//! Every fallible call returns a [`WkbStatus`]; on failure the message is available
//! from [`wkb_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use wkbdiff::matrix::MatrixDescription;
use wkbdiff::momentum::MomentumBranch;
use wkbdiff::phase::{self, ResidueOptions, Sign};
use wkbdiff::scenario::{self, Scenario};
use wkbdiff::{MatrixModel, WkbError, C64};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WkbComplex {
    pub re: f64,
    pub im: f64,
}

impl From<WkbComplex> for C64 {
    fn from(c: WkbComplex) -> Self {
        C64::new(c.re, c.im)
    }
}

impl From<C64> for WkbComplex {
    fn from(c: C64) -> Self {
        WkbComplex { re: c.re, im: c.im }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WkbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Range = 3,
    Degenerate = 4,
    BranchAmbiguity = 5,
    Singularity = 6,
    Convergence = 7,
    Panic = 8,
}

impl From<&WkbError> for WkbStatus {
    fn from(e: &WkbError) -> Self {
        match e.root() {
            WkbError::InvalidInput(_) | WkbError::TurnMismatch(_) | WkbError::InvalidNormalization { .. } => {
                WkbStatus::InvalidInput
            }
            WkbError::Range { .. } => WkbStatus::Range,
            WkbError::Degenerate(_) | WkbError::NotUnimodular { .. } | WkbError::Defective => WkbStatus::Degenerate,
            WkbError::BranchAmbiguity { .. } => WkbStatus::BranchAmbiguity,
            WkbError::Singularity { .. } | WkbError::PoleProximity { .. } => WkbStatus::Singularity,
            WkbError::StepFailure { .. }
            | WkbError::IncompleteSearch { .. }
            | WkbError::InsufficientHeight { .. }
            | WkbError::Quadrature(_) => WkbStatus::Convergence,
            WkbError::Context { .. } => unreachable!(),
        }
    }
}

/// Opaque matrix model.
pub struct WkbMatrix(Arc<MatrixModel>);

/// Opaque momentum branch.
pub struct WkbBranch(MomentumBranch);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), (WkbStatus, String)>) -> WkbStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WkbStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            WkbStatus::Panic
        }
    }
}

fn fail(e: WkbError) -> (WkbStatus, String) {
    (WkbStatus::from(&e), e.to_string())
}

fn null(what: &str) -> (WkbStatus, String) {
    (WkbStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (WkbStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (WkbStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (WkbStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (WkbStatus::InvalidInput, format!("{what} is not valid UTF-8")))
}

fn sign(s: c_int) -> Result<Sign, (WkbStatus, String)> {
    match s {
        1 => Ok(Sign::Plus),
        -1 => Ok(Sign::Minus),
        _ => Err((WkbStatus::InvalidInput, format!("sign must be +1 or -1, got {s}"))),
    }
}

/// Library version, as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wkb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL.
/// Valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn wkb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Harper companion matrix with potential `2λ cos 2πz + μ`.
///
/// # Safety
/// `out_matrix` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wkb_matrix_harper(lambda: f64, mu: f64, out_matrix: *mut *mut WkbMatrix) -> WkbStatus {
    guard(|| {
        let slot = out(out_matrix, "out_matrix")?;
        let model = MatrixDescription::CompanionHarper { lambda, mu }.build().map_err(fail)?;
        *slot = Box::into_raw(Box::new(WkbMatrix(Arc::new(model))));
        Ok(())
    })
}

/// Matrix from its JSON description (same format as the `matrix` field of a scenario).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out_matrix` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wkb_matrix_from_json(json: *const c_char, out_matrix: *mut *mut WkbMatrix) -> WkbStatus {
    guard(|| {
        let slot = out(out_matrix, "out_matrix")?;
        let desc: MatrixDescription = serde_json::from_str(text(json, "json")?)
            .map_err(|e| (WkbStatus::InvalidInput, format!("matrix JSON: {e}")))?;
        let model = desc.build().map_err(fail)?;
        *slot = Box::into_raw(Box::new(WkbMatrix(Arc::new(model))));
        Ok(())
    })
}

/// # Safety
/// `m` must come from a `wkb_matrix_*` constructor and not be freed twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn wkb_matrix_free(m: *mut WkbMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Writes `M(z)` row-major into `out4[0..4]`.
///
/// # Safety
/// `m` must be a live handle and `out4` must point to 4 writable elements.
#[no_mangle]
pub unsafe extern "C" fn wkb_matrix_eval(m: *const WkbMatrix, z: WkbComplex, out4: *mut WkbComplex) -> WkbStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        if out4.is_null() {
            return Err(null("out4"));
        }
        let v = m.0.try_eval(z.into()).map_err(fail)?;
        for i in 0..2 {
            for j in 0..2 {
                *out4.add(2 * i + j) = v.get(i, j).into();
            }
        }
        Ok(())
    })
}

/// Branch of the momentum through `z_ref` with the default root there.
///
/// # Safety
/// `m` must be a live handle and `out_branch` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wkb_branch_new(m: *const WkbMatrix, z_ref: WkbComplex, out_branch: *mut *mut WkbBranch) -> WkbStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        let slot = out(out_branch, "out_branch")?;
        let b = MomentumBranch::new(m.0.clone(), z_ref.into()).map_err(fail)?;
        *slot = Box::into_raw(Box::new(WkbBranch(b)));
        Ok(())
    })
}

/// Branch through `z_ref` taking the value `p_ref` there.
///
/// # Safety
/// `m` must be a live handle and `out_branch` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wkb_branch_new_with_value(
    m: *const WkbMatrix,
    z_ref: WkbComplex,
    p_ref: WkbComplex,
    out_branch: *mut *mut WkbBranch,
) -> WkbStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        let slot = out(out_branch, "out_branch")?;
        let b = MomentumBranch::with_value(m.0.clone(), z_ref.into(), p_ref.into()).map_err(fail)?;
        *slot = Box::into_raw(Box::new(WkbBranch(b)));
        Ok(())
    })
}

/// # Safety
/// `b` must come from a `wkb_branch_*` constructor and not be freed twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn wkb_branch_free(b: *mut WkbBranch) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

/// Momentum continued along the straight segment from the base point to `z`.
///
/// # Safety
/// `b` must be a live handle and `out_p` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wkb_momentum_at(b: *const WkbBranch, z: WkbComplex, out_p: *mut WkbComplex) -> WkbStatus {
    guard(|| {
        let b = deref(b, "branch")?;
        let slot = out(out_p, "out_p")?;
        *slot = b.0.momentum_at(z.into()).map_err(fail)?.into();
        Ok(())
    })
}

/// Density `ω±(z)` of the phase differential; `sign` is +1 or -1.
///
/// # Safety
/// `b` must be a live handle and `out_w` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wkb_omega_density(b: *const WkbBranch, z: WkbComplex, sign_: c_int, out_w: *mut WkbComplex) -> WkbStatus {
    guard(|| {
        let b = deref(b, "branch")?;
        let slot = out(out_w, "out_w")?;
        *slot = phase::omega_density(&b.0, z.into(), sign(sign_)?).map_err(fail)?.into();
        Ok(())
    })
}

/// Integral of `Ω±` along the polyline `path[0..len]`.
/// `out_error` may be NULL.
///
/// # Safety
/// `b` must be a live handle, `path` must hold `len` elements, `out_value` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wkb_phase_integral(
    b: *const WkbBranch,
    path: *const WkbComplex,
    len: usize,
    sign_: c_int,
    tol: f64,
    out_value: *mut WkbComplex,
    out_error: *mut f64,
) -> WkbStatus {
    guard(|| {
        let b = deref(b, "branch")?;
        let slot = out(out_value, "out_value")?;
        if path.is_null() {
            return Err(null("path"));
        }
        let pts: Vec<C64> = std::slice::from_raw_parts(path, len).iter().map(|&c| c.into()).collect();
        let r = phase::phase_integral(&b.0, &pts, sign(sign_)?, tol).map_err(fail)?;
        *slot = r.value.into();
        if let Some(e) = out_error.as_mut() {
            *e = r.error_estimate;
        }
        Ok(())
    })
}

/// Residue of `Ω±` at `center`. `radius <= 0` and `turns == 0` pick automatic values.
/// `out_turns` may be NULL.
///
/// # Safety
/// `b` must be a live handle and `out_value` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wkb_residue(
    b: *const WkbBranch,
    center: WkbComplex,
    sign_: c_int,
    radius: f64,
    turns: u32,
    out_value: *mut WkbComplex,
    out_turns: *mut u32,
) -> WkbStatus {
    guard(|| {
        let b = deref(b, "branch")?;
        let slot = out(out_value, "out_value")?;
        let opts = ResidueOptions {
            radius: (radius > 0.0).then_some(radius),
            turns: (turns > 0).then_some(turns),
            ..ResidueOptions::default()
        };
        let r = phase::residue_at(&b.0, center.into(), sign(sign_)?, &opts).map_err(fail)?;
        *slot = r.value.into();
        if let Some(t) = out_turns.as_mut() {
            *t = r.turns;
        }
        Ok(())
    })
}

/// Runs a scenario given as JSON. On success `*out_report` receives the canonical
/// report (release with [`wkb_string_free`]) and `*out_passed` is 1 if every check passed.
///
/// # Safety
/// `json` must be NUL-terminated; `out_report` and `out_passed` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wkb_run_scenario(json: *const c_char, out_report: *mut *mut c_char, out_passed: *mut c_int) -> WkbStatus {
    guard(|| {
        let report = out(out_report, "out_report")?;
        let passed = out(out_passed, "out_passed")?;
        let s = Scenario::from_json(text(json, "json")?).map_err(fail)?;
        let outcome = scenario::run(&s).map_err(fail)?;
        *report = CString::new(outcome.json())
            .map_err(|_| (WkbStatus::Panic, "report contains NUL".to_string()))?
            .into_raw();
        *passed = outcome.passed as c_int;
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn wkb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
