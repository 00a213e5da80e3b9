//! C ABI over `oulab`. Models are opaque handles; every call returns an
//! [`OulabStatus`] and leaves a message for [`oulab_last_error`] on failure.
//! Matrices cross the boundary as row-major `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use oulab::builders::builtin;
use oulab::covariance::{gramian_quadrature, solve_lyapunov};
use oulab::diagnostics::{analyze, s_infinity_norm};
use oulab::linalg::{pencil_sup_ratio, Mat};
use oulab::{OuError, OuModel, Tolerances};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OulabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Numerical = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

/// Opaque model handle.
pub struct OulabModel {
    model: OuModel,
    tol: Tolerances,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: OulabStatus, msg: impl Into<String>) -> OulabStatus {
    set_error(msg);
    status
}

fn from_core(err: OuError) -> OulabStatus {
    let status = if err.is_input_error() {
        OulabStatus::InvalidInput
    } else {
        OulabStatus::Numerical
    };
    fail(status, err.to_string())
}

fn guard(f: impl FnOnce() -> OulabStatus) -> OulabStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(OulabStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

/// # Safety
/// `data` must point to `rows * cols` readable doubles.
unsafe fn read_matrix(data: *const f64, rows: usize, cols: usize) -> Mat {
    let slice = std::slice::from_raw_parts(data, rows * cols);
    Mat::from_row_slice(rows, cols, slice)
}

/// # Safety
/// `out` must point to `len` writable doubles.
unsafe fn write_matrix(m: &Mat, out: *mut f64, len: usize) -> OulabStatus {
    let need = m.nrows() * m.ncols();
    if len < need {
        return fail(
            OulabStatus::BufferTooSmall,
            format!("buffer holds {len} values, {need} needed"),
        );
    }
    let dst = std::slice::from_raw_parts_mut(out, need);
    for (k, v) in m.transpose().iter().enumerate() {
        dst[k] = *v;
    }
    OulabStatus::Ok
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn oulab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Builds a model from the drift `a` (n x n) and noise embedding `i_factor` (n x m).
///
/// # Safety
/// `a` and `i_factor` must point to `n*n` and `n*m` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oulab_model_new(
    a: *const f64,
    i_factor: *const f64,
    n: usize,
    m: usize,
    out: *mut *mut OulabModel,
) -> OulabStatus {
    guard(|| {
        if a.is_null() || i_factor.is_null() || out.is_null() {
            return fail(OulabStatus::NullPointer, "null argument");
        }
        if n == 0 || m == 0 {
            return fail(OulabStatus::InvalidInput, "dimensions must be positive");
        }
        let tol = Tolerances::default();
        match OuModel::new(
            "ffi",
            read_matrix(a, n, n),
            read_matrix(i_factor, n, m),
            &tol,
        ) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(OulabModel { model, tol }));
                OulabStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Builds one of the named builtin models.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oulab_model_builtin(
    name: *const c_char,
    out: *mut *mut OulabModel,
) -> OulabStatus {
    guard(|| {
        if name.is_null() || out.is_null() {
            return fail(OulabStatus::NullPointer, "null argument");
        }
        let Ok(name) = CStr::from_ptr(name).to_str() else {
            return fail(OulabStatus::InvalidInput, "name is not UTF-8");
        };
        match builtin(name) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(OulabModel {
                    model,
                    tol: Tolerances::default(),
                }));
                OulabStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn oulab_model_free(model: *mut OulabModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// State dimension, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn oulab_model_dim(model: *const OulabModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.dim())
}

/// Invariant covariance, written row-major into `out` (n*n values).
///
/// # Safety
/// `model` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn oulab_solve_lyapunov(
    model: *const OulabModel,
    out: *mut f64,
    len: usize,
) -> OulabStatus {
    guard(|| {
        let (Some(h), false) = (model.as_ref(), out.is_null()) else {
            return fail(OulabStatus::NullPointer, "null argument");
        };
        match solve_lyapunov(&h.model, &h.tol) {
            Ok(inv) => write_matrix(&inv.matrix, out, len),
            Err(e) => from_core(e),
        }
    })
}

/// Gramian `Q_t`, written row-major into `out` (n*n values).
///
/// # Safety
/// `model` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn oulab_gramian(
    model: *const OulabModel,
    t: f64,
    out: *mut f64,
    len: usize,
) -> OulabStatus {
    guard(|| {
        let (Some(h), false) = (model.as_ref(), out.is_null()) else {
            return fail(OulabStatus::NullPointer, "null argument");
        };
        match gramian_quadrature(&h.model, t, &h.tol) {
            Ok(q) => write_matrix(&q.value, out, len),
            Err(e) => from_core(e),
        }
    })
}

/// Operator norm of the semigroup on the invariant space at time `t`.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oulab_s_infinity_norm(
    model: *const OulabModel,
    t: f64,
    out: *mut f64,
) -> OulabStatus {
    guard(|| {
        let (Some(h), false) = (model.as_ref(), out.is_null()) else {
            return fail(OulabStatus::NullPointer, "null argument");
        };
        match s_infinity_norm(&h.model, t, &h.tol) {
            Ok(v) => {
                *out = v;
                OulabStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Full diagnostics report as a JSON string; release it with [`oulab_string_free`].
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oulab_analyze_json(
    model: *const OulabModel,
    out: *mut *mut c_char,
) -> OulabStatus {
    guard(|| {
        let (Some(h), false) = (model.as_ref(), out.is_null()) else {
            return fail(OulabStatus::NullPointer, "null argument");
        };
        let json = analyze(&h.model, &h.tol).and_then(|r| oulab::io::report_json(&r));
        match json {
            Ok(s) => match CString::new(s) {
                Ok(c) => {
                    *out = c.into_raw();
                    OulabStatus::Ok
                }
                Err(_) => fail(OulabStatus::Numerical, "report contains NUL"),
            },
            Err(e) => from_core(e),
        }
    })
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn oulab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// `sup <Q x, x> / <R x, x>` for symmetric PSD `q`, `r` (n x n); +infinity
/// when ker R is not inside ker Q.
///
/// # Safety
/// `q` and `r` must point to `n*n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oulab_pencil_sup_ratio(
    q: *const f64,
    r: *const f64,
    n: usize,
    out: *mut f64,
) -> OulabStatus {
    guard(|| {
        if q.is_null() || r.is_null() || out.is_null() {
            return fail(OulabStatus::NullPointer, "null argument");
        }
        if n == 0 {
            return fail(OulabStatus::InvalidInput, "dimension must be positive");
        }
        match pencil_sup_ratio(
            &read_matrix(q, n, n),
            &read_matrix(r, n, n),
            &Tolerances::default(),
        ) {
            Ok(res) => {
                *out = res.sup_ratio;
                OulabStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}
