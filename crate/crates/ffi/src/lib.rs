//! C ABI over fblab. Every call returns an `FblabStatus`; on failure the
//! message is available from `fblab_last_error`. Values are in nats.

use fblab::channels::{blahut_arimoto, DmcSpec};
use fblab::divergences::transport::{wasserstein, TransportProblem};
use fblab::divergences::{kl, tv, FiniteDist};
use fblab::testing::beta_alpha;
use fblab::FbError;
use libc::{c_char, size_t};
use std::cell::RefCell;
use std::panic::{catch_unwind, AssertUnwindSafe};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FblabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    GuardExceeded = 4,
    NoConvergence = 5,
    Infeasible = 6,
    Precondition = 7,
    Io = 8,
    Panic = 9,
}

/// Opaque finite distribution.
pub struct FblabDist(FiniteDist);

/// Opaque discrete memoryless channel.
pub struct FblabChannel(DmcSpec);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &FbError) -> FblabStatus {
    match e {
        FbError::Invalid(_) | FbError::Parse(_) => FblabStatus::InvalidArgument,
        FbError::Dimension(..) => FblabStatus::DimensionMismatch,
        FbError::Guard { .. } => FblabStatus::GuardExceeded,
        FbError::NoConvergence { .. } => FblabStatus::NoConvergence,
        FbError::Infeasible(_) => FblabStatus::Infeasible,
        FbError::Precondition(_) => FblabStatus::Precondition,
        FbError::Io(_) => FblabStatus::Io,
    }
}

enum Fail {
    Lib(FbError),
    Null,
}

impl From<FbError> for Fail {
    fn from(e: FbError) -> Self {
        Fail::Lib(e)
    }
}

struct Null;

impl From<Null> for Fail {
    fn from(_: Null) -> Self {
        Fail::Null
    }
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> FblabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FblabStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null)) => {
            set_error("null pointer".into());
            FblabStatus::NullPointer
        }
        Err(_) => {
            set_error("internal panic".into());
            FblabStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: size_t) -> Result<&'a [T], Null> {
    if p.is_null() {
        if len == 0 {
            return Ok(&[]);
        }
        return Err(Null);
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, Null> {
    p.as_ref().ok_or(Null)
}

fn null_check<T>(p: *const T) -> Option<FblabStatus> {
    if p.is_null() {
        set_error("null pointer".into());
        Some(FblabStatus::NullPointer)
    } else {
        None
    }
}

/// Copies the last error message (NUL-terminated, truncated to `cap`)
/// and returns its full length in bytes.
///
/// # Safety
/// `buf` must be valid for `cap` bytes, or null with `cap == 0`.
#[no_mangle]
pub unsafe extern "C" fn fblab_last_error(buf: *mut c_char, cap: size_t) -> size_t {
    LAST_ERROR.with(|e| {
        let s = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = s.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(s.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        s.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fblab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// # Safety
/// `masses` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fblab_dist_new(masses: *const f64, len: size_t, out: *mut *mut FblabDist) -> FblabStatus {
    if let Some(s) = null_check(out) {
        return s;
    }
    guard(|| {
        let m = slice(masses, len)?.to_vec();
        *out = Box::into_raw(Box::new(FblabDist(FiniteDist::new(m)?)));
        Ok(())
    })
}

/// # Safety
/// `d` must come from `fblab_dist_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fblab_dist_free(d: *mut FblabDist) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Row-major `rows × cols` transition matrix.
///
/// # Safety
/// `w` must point to `rows * cols` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fblab_dmc_new(w: *const f64, rows: size_t, cols: size_t, out: *mut *mut FblabChannel) -> FblabStatus {
    if let Some(s) = null_check(out) {
        return s;
    }
    guard(|| {
        let cells = rows.checked_mul(cols).ok_or_else(|| FbError::Invalid("matrix too large".into()))?;
        let flat = slice(w, cells)?;
        if cols == 0 {
            return Err(FbError::Invalid("empty matrix".into()).into());
        }
        let m: Vec<Vec<f64>> = flat.chunks(cols).map(<[f64]>::to_vec).collect();
        *out = Box::into_raw(Box::new(FblabChannel(DmcSpec::new(m, None, None)?)));
        Ok(())
    })
}

/// # Safety
/// `c` must come from `fblab_dmc_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fblab_channel_free(c: *mut FblabChannel) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// D(P‖Q) in nats; +∞ when P is not dominated by Q.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fblab_kl(p: *const FblabDist, q: *const FblabDist, out: *mut f64) -> FblabStatus {
    if let Some(s) = null_check(out) {
        return s;
    }
    guard(|| {
        *out = kl(&deref(p)?.0, &deref(q)?.0)?.value();
        Ok(())
    })
}

/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fblab_tv(p: *const FblabDist, q: *const FblabDist, out: *mut f64) -> FblabStatus {
    if let Some(s) = null_check(out) {
        return s;
    }
    guard(|| {
        *out = tv(&deref(p)?.0, &deref(q)?.0)?;
        Ok(())
    })
}

/// β_α(P, Q): smallest Q-probability of acceptance with P-probability ≥ α.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fblab_beta(alpha: f64, p: *const FblabDist, q: *const FblabDist, out: *mut f64) -> FblabStatus {
    if let Some(s) = null_check(out) {
        return s;
    }
    guard(|| {
        *out = beta_alpha(alpha, &deref(p)?.0, &deref(q)?.0)?.beta;
        Ok(())
    })
}

/// W_order(P, Q) for a row-major |P| × |Q| ground cost; `order` is 1 or 2.
///
/// # Safety
/// `cost` must point to |P|·|Q| doubles; handles live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fblab_wasserstein(
    p: *const FblabDist,
    q: *const FblabDist,
    cost: *const f64,
    order: u8,
    out: *mut f64,
) -> FblabStatus {
    if let Some(s) = null_check(out) {
        return s;
    }
    guard(|| {
        let (p, q) = (&deref(p)?.0, &deref(q)?.0);
        let c = slice(cost, p.len() * q.len())?;
        let rows: Vec<Vec<f64>> = if q.is_empty() { vec![] } else { c.chunks(q.len()).map(<[f64]>::to_vec).collect() };
        *out = wasserstein(&TransportProblem::new(p.clone(), q.clone(), rows, order)?)?.value;
        Ok(())
    })
}

/// Capacity (nats) and dispersion (nats²); `caod` receives the output
/// distribution when non-null and `caod_len` equals the output size.
///
/// # Safety
/// Handle live; `capacity`, `dispersion` writable; `caod` valid for `caod_len`.
#[no_mangle]
pub unsafe extern "C" fn fblab_capacity(
    ch: *const FblabChannel,
    tol: f64,
    capacity: *mut f64,
    dispersion: *mut f64,
    caod: *mut f64,
    caod_len: size_t,
) -> FblabStatus {
    if let Some(s) = null_check(capacity) {
        return s;
    }
    guard(|| {
        let dmc = &deref(ch)?.0;
        let sol = blahut_arimoto(dmc, tol, 1_000_000)?;
        *capacity = sol.capacity;
        if !dispersion.is_null() {
            *dispersion = sol.dispersion;
        }
        if !caod.is_null() {
            let m = sol.caod_masses()?;
            if caod_len != m.len() {
                return Err(FbError::Dimension(caod_len, m.len()).into());
            }
            std::ptr::copy_nonoverlapping(m.as_ptr(), caod, m.len());
        }
        Ok(())
    })
}
