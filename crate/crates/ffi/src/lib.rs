//! C ABI over `narrow-dbm`.
//!
//! Models are opaque `DbmModel` handles created by `dbm_model_from_json`,
//! `dbm_model_zeros` or `dbm_compile` and released with `dbm_model_free`.
//! Every function returns a `DbmStatus`; on failure the message is available
//! from `dbm_last_error` until the next call on the same thread. Strings
//! returned to the caller are released with `dbm_string_free`. Panics are
//! caught at the boundary and reported as `DBM_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use narrow_dbm::compiler::{compile, CompileConfig};
use narrow_dbm::inference::{layer_marginal, log_partition};
use narrow_dbm::{bounds, DbmParams, Distribution, Error, StateSpace};

/// Opaque model handle.
pub struct DbmModel {
    params: DbmParams,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DbmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Dimension = 3,
    Domain = 4,
    Index = 5,
    Parse = 6,
    Architecture = 7,
    /// The compiler missed the tolerance; the best model is still returned.
    Convergence = 8,
    OracleLimit = 9,
    BufferTooSmall = 10,
    Other = 11,
    Panic = 12,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> DbmStatus {
    match err {
        Error::Dimension(_) => DbmStatus::Dimension,
        Error::Domain(_) | Error::Positivity(_) | Error::Conditioning | Error::DegenerateProduct => DbmStatus::Domain,
        Error::Index(_) => DbmStatus::Index,
        Error::Parse { .. } => DbmStatus::Parse,
        Error::Architecture(_) | Error::Plan(_) => DbmStatus::Architecture,
        Error::Convergence { .. } => DbmStatus::Convergence,
        Error::OracleLimit { .. } => DbmStatus::OracleLimit,
        _ => DbmStatus::Other,
    }
}

fn fail(err: Error) -> DbmStatus {
    set_error(err.to_string());
    status_of(&err)
}

/// Runs `f` with panics converted to a status.
fn guard(f: impl FnOnce() -> DbmStatus) -> DbmStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            DbmStatus::Panic
        }
    }
}

macro_rules! non_null {
    ($($p:expr),+) => {
        $(if $p.is_null() {
            set_error(format!("null pointer: {}", stringify!($p)));
            return DbmStatus::NullPointer;
        })+
    };
}

fn into_handle(params: DbmParams) -> *mut DbmModel {
    Box::into_raw(Box::new(DbmModel { params }))
}

/// Message of the last failure on this thread, or null. Owned by the
/// library; valid until the next call.
#[no_mangle]
pub extern "C" fn dbm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parse a model from NUL-terminated JSON.
///
/// # Safety
/// `json` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dbm_model_from_json(json: *const c_char, out: *mut *mut DbmModel) -> DbmStatus {
    guard(|| {
        non_null!(json, out);
        let Ok(text) = CStr::from_ptr(json).to_str() else {
            set_error("model JSON is not valid UTF-8".into());
            return DbmStatus::InvalidUtf8;
        };
        match DbmParams::from_json(text) {
            Ok(p) => {
                *out = into_handle(p);
                DbmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Serialize a model to JSON; release the string with `dbm_string_free`.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dbm_model_to_json(model: *const DbmModel, out: *mut *mut c_char) -> DbmStatus {
    guard(|| {
        non_null!(model, out);
        let text = (*model).params.to_json();
        *out = CString::new(text).expect("JSON has no NUL").into_raw();
        DbmStatus::Ok
    })
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn dbm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `model` must come from this library or be null; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dbm_model_free(model: *mut DbmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Model with all parameters zero; `widths` has `n_widths` entries (`L + 1`).
///
/// # Safety
/// `widths` must point to `n_widths` readable values and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn dbm_model_zeros(
    q: usize,
    widths: *const usize,
    n_widths: usize,
    out: *mut *mut DbmModel,
) -> DbmStatus {
    guard(|| {
        non_null!(widths, out);
        let w = std::slice::from_raw_parts(widths, n_widths).to_vec();
        match DbmParams::zeros(q, w) {
            Ok(p) => {
                *out = into_handle(p);
                DbmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of hidden layers `L`.
///
/// # Safety
/// `model` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn dbm_model_depth(model: *const DbmModel, out: *mut usize) -> DbmStatus {
    guard(|| {
        non_null!(model, out);
        *out = (*model).params.depth();
        DbmStatus::Ok
    })
}

/// Width of layer `k`.
///
/// # Safety
/// `model` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn dbm_model_layer_width(model: *const DbmModel, k: usize, out: *mut usize) -> DbmStatus {
    guard(|| {
        non_null!(model, out);
        match (*model).params.widths().get(k) {
            Some(&w) => {
                *out = w;
                DbmStatus::Ok
            }
            None => fail(Error::Index(format!("layer {k} > L = {}", (*model).params.depth()))),
        }
    })
}

/// Exact `log Z`.
///
/// # Safety
/// `model` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn dbm_log_partition(model: *const DbmModel, out: *mut f64) -> DbmStatus {
    guard(|| {
        non_null!(model, out);
        match log_partition(&(*model).params) {
            Ok(z) => {
                *out = z;
                DbmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Exact marginal of layer `k` in enumeration order. `*written` receives the
/// number of states; when `capacity` is smaller nothing is copied and
/// `DBM_STATUS_BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// `model` must be a live handle, `buf` writable for `capacity` values
/// (may be null when `capacity` is 0) and `written` valid.
#[no_mangle]
pub unsafe extern "C" fn dbm_layer_marginal(
    model: *const DbmModel,
    k: usize,
    buf: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> DbmStatus {
    guard(|| {
        non_null!(model, written);
        let m = match layer_marginal(&(*model).params, k) {
            Ok(m) => m,
            Err(e) => return fail(e),
        };
        *written = m.probs().len();
        if capacity < m.probs().len() {
            set_error(format!("buffer holds {capacity} values, {} needed", m.probs().len()));
            return DbmStatus::BufferTooSmall;
        }
        non_null!(buf);
        ptr::copy_nonoverlapping(m.probs().as_ptr(), buf, m.probs().len());
        DbmStatus::Ok
    })
}

/// Compile a target over `n` units with alphabet `q` (`q^n` probabilities).
/// `width` 0 selects the visible width. On `DBM_STATUS_CONVERGENCE` the best
/// model and its KL are still returned.
///
/// # Safety
/// `probs` must point to `len` readable values; `out` and `kl` must be valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn dbm_compile(
    n: usize,
    q: usize,
    probs: *const f64,
    len: usize,
    tolerance: f64,
    beta0: f64,
    max_beta: f64,
    width: usize,
    out: *mut *mut DbmModel,
    kl: *mut f64,
) -> DbmStatus {
    guard(|| {
        non_null!(probs, out, kl);
        let p = std::slice::from_raw_parts(probs, len).to_vec();
        let target = match StateSpace::new(n, q).and_then(|s| Distribution::new(s, p)) {
            Ok(t) => t,
            Err(e) => return fail(e),
        };
        let config = CompileConfig {
            tolerance,
            beta0,
            max_beta,
            max_depth: None,
            width: (width > 0).then_some(width),
        };
        match compile(&target, &config) {
            Ok(c) => {
                *kl = c.certificate.kl;
                *out = into_handle(c.params);
                DbmStatus::Ok
            }
            Err(Error::Convergence {
                outcome,
                best_kl,
                best_beta,
                tolerance,
            }) => {
                set_error(format!(
                    "best KL {best_kl:e} at beta {best_beta} exceeds tolerance {tolerance:e}"
                ));
                *kl = best_kl;
                *out = into_handle(outcome.params);
                DbmStatus::Convergence
            }
            Err(e) => fail(e),
        }
    })
}

/// Sufficient depth for `n >= 2` units with alphabet `q`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dbm_sufficient_depth(n: usize, q: usize, out: *mut u64) -> DbmStatus {
    guard(|| {
        non_null!(out);
        match bounds::sufficient_depth(n, q) {
            Ok(v) => {
                *out = v;
                DbmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Depth below which some distribution cannot be represented.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dbm_necessary_depth(n: usize, q: usize, out: *mut u64) -> DbmStatus {
    guard(|| {
        non_null!(out);
        match bounds::necessary_depth(n, q) {
            Ok(v) => {
                *out = v;
                DbmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Smallest first hidden width for `n0` binary visible units.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dbm_min_first_hidden_width(n0: usize, out: *mut usize) -> DbmStatus {
    guard(|| {
        non_null!(out);
        *out = bounds::min_first_hidden_width(n0);
        DbmStatus::Ok
    })
}

/// Free parameters of a width-`n`, depth-`layers` model with alphabet `q`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dbm_param_count(n: u64, layers: u64, q: u64, out: *mut u64) -> DbmStatus {
    guard(|| {
        non_null!(out);
        *out = if q == 2 {
            bounds::param_count(n, layers)
        } else {
            bounds::param_count_q(n, layers, q)
        };
        DbmStatus::Ok
    })
}
