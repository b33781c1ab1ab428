//! C ABI over the `wfs` library.
//!
//! Scenarios cross the boundary as opaque handles built from the same JSON
//! documents the CLI reads. Every fallible function returns a [`WfsStatus`];
//! on failure the message is kept per thread and can be fetched with
//! [`wfs_last_error`]. Panics are caught at the boundary and reported as
//! [`WfsStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use wfs::bipartite::{self, BipartiteScenario};
use wfs::io;
use wfs::scenario::{run_trial, Scenario};
use wfs::witnesses::{self, QVector, WitnessReport};
use wfs::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WfsStatus {
    Ok = 0,
    /// Null pointer, non-UTF-8 string or out-of-range index.
    InvalidArgument = 1,
    /// The input parsed but failed a physical validity check.
    InvalidScenario = 2,
    /// The JSON text could not be parsed.
    Json = 3,
    /// The witness does not apply to this scenario.
    NotApplicable = 4,
    /// The caller's output buffer is too short.
    BufferTooSmall = 5,
    Panic = 6,
}

/// Opaque single-party scenario.
pub struct WfsScenario(Scenario);

/// Opaque two-party scenario.
pub struct WfsBipartite(BipartiteScenario);

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WfsWitness {
    pub value: f64,
    pub bound: f64,
    pub violated: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WfsChsh {
    pub p0: f64,
    pub p1: f64,
    pub ps: f64,
    /// Largest `P_1` reachable under AoM at this `P_0`.
    pub p1_bound: f64,
    pub p1_violated: bool,
    pub ps_violated: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(WfsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Json(_) => WfsStatus::Json,
            Error::NotApplicable(_) => WfsStatus::NotApplicable,
            Error::IndexOutOfRange { .. } => WfsStatus::InvalidArgument,
            _ => WfsStatus::InvalidScenario,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: &str) -> Failure {
    Failure(WfsStatus::InvalidArgument, msg.to_owned())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> WfsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            WfsStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            WfsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(invalid("null string"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid("string is not valid UTF-8"))
}

unsafe fn ref_arg<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| invalid("null handle"))
}

unsafe fn out_arg<'a, T>(p: *mut T) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| invalid("null output pointer"))
}

unsafe fn slice_out<'a>(p: *mut f64, len: usize, needed: usize) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(invalid("null output buffer"));
    }
    if len < needed {
        return Err(Failure(
            WfsStatus::BufferTooSmall,
            format!("output buffer holds {len} values, need {needed}"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

fn witness(r: &WitnessReport) -> WfsWitness {
    WfsWitness {
        value: r.value,
        bound: r.bound,
        violated: r.violated,
    }
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next `wfs_*` call on the same thread.
#[no_mangle]
pub extern "C" fn wfs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wfs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a single-party scenario document. On success `*out` owns a handle
/// to release with [`wfs_scenario_free`].
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn wfs_scenario_from_json(
    json: *const c_char,
    out: *mut *mut WfsScenario,
) -> WfsStatus {
    guard(|| {
        let out = out_arg(out)?;
        let s = io::scenario_from_json(str_arg(json)?)?;
        *out = Box::into_raw(Box::new(WfsScenario(s)));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from [`wfs_scenario_from_json`] that was not
/// freed yet.
#[no_mangle]
pub unsafe extern "C" fn wfs_scenario_free(s: *mut WfsScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of non-null outcomes of `Ω`, i.e. `d·n`. Zero for a null handle.
///
/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wfs_scenario_outcome_count(s: *const WfsScenario) -> usize {
    s.as_ref().map_or(0, |s| s.0.d() * s.0.n())
}

/// Runs one trial with Friend setting `x` and Wigner operation `w`. Writes
/// `p(a|x', U_w)` at `probs[x'·d + a]` and the null-outcome probability at
/// `*null_out`.
///
/// # Safety
/// `s` must be a live handle, `probs` must point to `len` writable doubles
/// and `null_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wfs_run_trial(
    s: *const WfsScenario,
    x: usize,
    w: usize,
    probs: *mut f64,
    len: usize,
    null_out: *mut f64,
) -> WfsStatus {
    guard(|| {
        let s = &ref_arg(s)?.0;
        let null_out = out_arg(null_out)?;
        let dist = run_trial(s, x, w)?;
        slice_out(probs, len, dist.probs.len())?.copy_from_slice(&dist.probs);
        *null_out = dist.null;
        Ok(())
    })
}

/// Evaluates `T` with Wigner operation `w` against its AoM bound ½.
///
/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wfs_eval_t(
    s: *const WfsScenario,
    w: usize,
    out: *mut WfsWitness,
) -> WfsStatus {
    guard(|| {
        let s = &ref_arg(s)?.0;
        let out = out_arg(out)?;
        *out = witness(&witnesses::eval_t(s, w)?);
        Ok(())
    })
}

/// Evaluates `T(q)` for the `q_len` target probabilities at `q` against its
/// AoM bound `max q`.
///
/// # Safety
/// `s` must be a live handle, `q` must point to `q_len` readable doubles and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wfs_eval_tq(
    s: *const WfsScenario,
    w: usize,
    q: *const f64,
    q_len: usize,
    out: *mut WfsWitness,
) -> WfsStatus {
    guard(|| {
        let s = &ref_arg(s)?.0;
        let out = out_arg(out)?;
        if q.is_null() {
            return Err(invalid("null q"));
        }
        let q = QVector::new(std::slice::from_raw_parts(q, q_len).to_vec())?;
        *out = witness(&witnesses::eval_tq(s, w, &q)?);
        Ok(())
    })
}

/// Parses a two-party scenario document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn wfs_bipartite_from_json(
    json: *const c_char,
    out: *mut *mut WfsBipartite,
) -> WfsStatus {
    guard(|| {
        let out = out_arg(out)?;
        let bs = io::bipartite_from_json(str_arg(json)?)?;
        *out = Box::into_raw(Box::new(WfsBipartite(bs)));
        Ok(())
    })
}

/// The NoM strategy reaching `P_0 = ¾` and `P_1 = cos²(π/8)`.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn wfs_bipartite_violating_strategy(
    out: *mut *mut WfsBipartite,
) -> WfsStatus {
    guard(|| {
        let out = out_arg(out)?;
        *out = Box::into_raw(Box::new(WfsBipartite(bipartite::nom_violating_strategy())));
        Ok(())
    })
}

/// # Safety
/// `bs` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wfs_bipartite_free(bs: *mut WfsBipartite) {
    if !bs.is_null() {
        drop(Box::from_raw(bs));
    }
}

/// Writes the 32 joint probabilities `p(a,b|x,y,U_w)` at index
/// `16w + 8x + 4y + 2a + b`.
///
/// # Safety
/// `bs` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn wfs_bipartite_joint_table(
    bs: *const WfsBipartite,
    out: *mut f64,
    len: usize,
) -> WfsStatus {
    guard(|| {
        let bs = &ref_arg(bs)?.0;
        let t = bipartite::joint_table(bs)?;
        slice_out(out, len, 32)?.copy_from_slice(t.as_slice());
        Ok(())
    })
}

/// Evaluates `P_0`, `P_1` and `P_S` with their AoM bounds.
///
/// # Safety
/// `bs` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wfs_bipartite_eval(
    bs: *const WfsBipartite,
    out: *mut WfsChsh,
) -> WfsStatus {
    guard(|| {
        let bs = &ref_arg(bs)?.0;
        let out = out_arg(out)?;
        let r = bipartite::eval_scenario(bs)?;
        *out = WfsChsh {
            p0: r.p0,
            p1: r.p1,
            ps: r.ps,
            p1_bound: r.p1_bound,
            p1_violated: r.p1_violated,
            ps_violated: r.witness.violated,
        };
        Ok(())
    })
}
