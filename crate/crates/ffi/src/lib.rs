//! C interface to fxcorr.
//!
//! Every function returns an [`FxcStatus`]; results go through out-pointers.
//! On failure the message is kept per thread and read with
//! [`fxc_last_error_message`]. Pairs are strings such as `"EUR/USD"`, the
//! price of one USD in EUR.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fxcorr::correlation::{cross_corr, implied_corr, triangle_corr, CorrOptions, CorrQuery, Horizon};
use fxcorr::error::Error;
use fxcorr::market_data::{load_snapshot_file, load_snapshot_with, FxPair, LoadOptions, MarketSnapshot};
use fxcorr::montecarlo::{price, PayoffSpec, SimulationConfig};
use fxcorr::term_structure::forward_vol;
use fxcorr::vanilla::{gk_price, implied_vol, OptionKind, PricingInputs, VanillaSpec};

pub const FXC_CALL: i32 = 0;
pub const FXC_PUT: i32 = 1;

/// Status codes. 1 to 5 match the command line exit statuses.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FxcStatus {
    Ok = 0,
    ErrOther = 1,
    ErrNoImpliedVol = 2,
    ErrMissingData = 3,
    ErrCorrelationOutOfRange = 4,
    ErrCalendarArbitrage = 5,
    ErrNullPointer = 6,
    ErrInvalidArgument = 7,
    ErrPanic = 8,
}

/// Opaque market snapshot.
pub struct FxcSnapshot {
    inner: MarketSnapshot,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg).unwrap_or_else(|e| {
        let mut bytes = e.into_vec();
        bytes.retain(|&b| b != 0);
        CString::new(bytes).unwrap_or_default()
    });
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

enum Failure {
    Lib(Error),
    Null(&'static str),
    Invalid(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FxcStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FxcStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            match e.class() as i32 {
                2 => FxcStatus::ErrNoImpliedVol,
                3 => FxcStatus::ErrMissingData,
                4 => FxcStatus::ErrCorrelationOutOfRange,
                5 => FxcStatus::ErrCalendarArbitrage,
                _ => FxcStatus::ErrOther,
            }
        }
        Ok(Err(Failure::Null(name))) => {
            set_last_error(format!("null pointer: {name}"));
            FxcStatus::ErrNullPointer
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_last_error(msg);
            FxcStatus::ErrInvalidArgument
        }
        Err(_) => {
            set_last_error("internal panic".into());
            FxcStatus::ErrPanic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Invalid(format!("{name} is not valid UTF-8")))
}

unsafe fn fx_pair(p: *const c_char, name: &'static str) -> Result<FxPair, Failure> {
    Ok(text(p, name)?.parse()?)
}

fn kind(k: i32) -> Result<OptionKind, Failure> {
    match k {
        FXC_CALL => Ok(OptionKind::Call),
        FXC_PUT => Ok(OptionKind::Put),
        _ => Err(Failure::Invalid(format!("unknown option kind {k}"))),
    }
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    out.write(value);
    Ok(())
}

unsafe fn snapshot_ref<'a>(s: *const FxcSnapshot) -> Result<&'a MarketSnapshot, Failure> {
    s.as_ref().map(|s| &s.inner).ok_or(Failure::Null("snapshot"))
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn fxc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |m| m.as_ptr()))
}

/// Parse a snapshot document. Free the handle with [`fxc_snapshot_free`].
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fxc_snapshot_from_json(json: *const c_char, out: *mut *mut FxcSnapshot) -> FxcStatus {
    guard(|| {
        let inner = load_snapshot_with(text(json, "json")?, LoadOptions::default())?;
        write(out, Box::into_raw(Box::new(FxcSnapshot { inner })))
    })
}

/// Load a snapshot from a file path.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fxc_snapshot_from_file(path: *const c_char, out: *mut *mut FxcSnapshot) -> FxcStatus {
    guard(|| {
        let inner = load_snapshot_file(text(path, "path")?, LoadOptions::default())?;
        write(out, Box::into_raw(Box::new(FxcSnapshot { inner })))
    })
}

/// # Safety
/// `snapshot` must come from this library and not be freed twice. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn fxc_snapshot_free(snapshot: *mut FxcSnapshot) {
    if !snapshot.is_null() {
        drop(Box::from_raw(snapshot));
    }
}

/// Garman-Kohlhagen price in units of the denominating currency.
///
/// # Safety
/// `pair` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fxc_gk_price(
    pair: *const c_char,
    strike: f64,
    maturity: f64,
    option_kind: i32,
    spot: f64,
    domestic_rate: f64,
    foreign_rate: f64,
    vol: f64,
    out: *mut f64,
) -> FxcStatus {
    guard(|| {
        let spec = VanillaSpec::new(fx_pair(pair, "pair")?, strike, maturity, kind(option_kind)?)?;
        let inputs = PricingInputs::new(spot, domestic_rate, foreign_rate, vol)?;
        write(out, gk_price(&spec, &inputs)?)
    })
}

/// # Safety
/// `pair` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fxc_implied_vol(
    pair: *const c_char,
    strike: f64,
    maturity: f64,
    option_kind: i32,
    price: f64,
    spot: f64,
    domestic_rate: f64,
    foreign_rate: f64,
    out: *mut f64,
) -> FxcStatus {
    guard(|| {
        let spec = VanillaSpec::new(fx_pair(pair, "pair")?, strike, maturity, kind(option_kind)?)?;
        write(out, implied_vol(&spec, price, spot, domestic_rate, foreign_rate)?)
    })
}

/// Forward vol on (t1, t2] from implied vols at t1 and t2.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fxc_forward_vol(vol1: f64, vol2: f64, t1: f64, t2: f64, out: *mut f64) -> FxcStatus {
    guard(|| write(out, forward_vol(vol1, vol2, t1, t2)?))
}

/// Correlation of i/j with i/k given the vols of i/k, i/j and j/k.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fxc_triangle_corr(vol_ik: f64, vol_ij: f64, vol_jk: f64, clamp: bool, out: *mut f64) -> FxcStatus {
    guard(|| write(out, triangle_corr(vol_ik, vol_ij, vol_jk, clamp)?.value))
}

/// Correlation of i/j with m/k from the six vols of the four currencies.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fxc_cross_corr(
    vol_ij: f64,
    vol_mk: f64,
    vol_ik: f64,
    vol_mj: f64,
    vol_jk: f64,
    vol_im: f64,
    clamp: bool,
    out: *mut f64,
) -> FxcStatus {
    guard(|| write(out, cross_corr(vol_ij, vol_mk, vol_ik, vol_mj, vol_jk, vol_im, clamp)?.value))
}

/// Implied correlation of two pairs over [0, horizon], in the orientations given.
///
/// # Safety
/// `snapshot` must be a live handle; the pairs NUL-terminated strings; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fxc_implied_corr(
    snapshot: *const FxcSnapshot,
    pair_a: *const c_char,
    pair_b: *const c_char,
    horizon: f64,
    clamp: bool,
    out: *mut f64,
) -> FxcStatus {
    guard(|| {
        let query = CorrQuery { pair_a: fx_pair(pair_a, "pair_a")?, pair_b: fx_pair(pair_b, "pair_b")?, horizon: Horizon::Total(horizon) };
        let corr = implied_corr(&query, snapshot_ref(snapshot)?, CorrOptions { clamp, repair: false })?;
        write(out, corr.value)
    })
}

/// Monte Carlo price of a payoff document. Writes a JSON pricing result to
/// `out`, to be released with [`fxc_string_free`].
///
/// # Safety
/// `snapshot` must be a live handle; `payoff_json` a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fxc_price_json(
    snapshot: *const FxcSnapshot,
    payoff_json: *const c_char,
    n_paths: u64,
    seed: u64,
    antithetic: bool,
    out: *mut *mut c_char,
) -> FxcStatus {
    guard(|| {
        let payoff: PayoffSpec = serde_json::from_str(text(payoff_json, "payoff_json")?)
            .map_err(|e| Error::Parse(format!("payoff: {e}")))?;
        let n_paths = usize::try_from(n_paths).map_err(|_| Failure::Invalid("n_paths too large".into()))?;
        let config = SimulationConfig { antithetic, ..SimulationConfig::new(n_paths, seed) };
        let result = price(&payoff, snapshot_ref(snapshot)?, &config, CorrOptions::default())?;
        let json = serde_json::to_string(&result).map_err(|e| Failure::Invalid(e.to_string()))?;
        write(out, CString::new(json).map_err(|e| Failure::Invalid(e.to_string()))?.into_raw())
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn fxc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
