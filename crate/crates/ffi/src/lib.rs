//! C interface to `robust_did`.
//!
//! Datasets live behind an opaque `RdidPanel` handle. Every fallible call
//! returns an `RdidStatus`; on failure `rdid_last_error_message` describes
//! the error until the next call on the same thread. Structured results are
//! returned as JSON strings owned by the caller and released with
//! `rdid_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use robust_did::analysis::{
    run_bounds, run_event_study, run_forecast, run_po, run_sc_bounds, run_validate, BoundsOptions, EventStudyOptions,
    ForecastOptions, InfoSpec, PoOptions, SCHEMA_VERSION,
};
use robust_did::dgp::mills_alpha;
use robust_did::gdid::{gdid_bounds, standard_did, theta_ols};
use robust_did::panel::{Contrast, InformationSet, PanelColumns, PanelDataset, SchemaConfig};
use robust_did::selection_bias::bias_set;
use robust_did::Error;

/// Result codes. `Ok` is zero; every library error has its own code.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdidStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Panic = 3,
    Io = 10,
    Parse = 11,
    MissingColumn = 12,
    NonNumericOutcome = 13,
    MissingValue = 14,
    DuplicateUnitPeriod = 15,
    EmptyDataset = 16,
    InvalidPanel = 17,
    EmptyCell = 18,
    InvalidInformationSet = 19,
    NeedsAtLeastTwoPeriods = 20,
    DimensionMismatch = 21,
    SingleClass = 22,
    SeparationDetected = 23,
    DegenerateDesign = 24,
    CollinearDesign = 25,
    NoTreatedUnits = 26,
    AllPropensitiesClipped = 27,
    TooManyFailedReplicates = 28,
    InsufficientReplicates = 29,
    UnbalancedPanel = 30,
    TreatmentReversalInStaggeredMode = 31,
    WeightSumInvalid = 32,
    EmptyDonorPool = 33,
    MissingPeriod = 34,
    NegativeM = 35,
    InvalidSpec = 36,
    InvalidArgument = 37,
}

impl From<&Error> for RdidStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } => RdidStatus::Io,
            Error::Parse(_) => RdidStatus::Parse,
            Error::MissingColumn(_) => RdidStatus::MissingColumn,
            Error::NonNumericOutcome { .. } => RdidStatus::NonNumericOutcome,
            Error::MissingValue { .. } => RdidStatus::MissingValue,
            Error::DuplicateUnitPeriod { .. } => RdidStatus::DuplicateUnitPeriod,
            Error::EmptyDataset => RdidStatus::EmptyDataset,
            Error::InvalidPanel(_) => RdidStatus::InvalidPanel,
            Error::EmptyCell { .. } => RdidStatus::EmptyCell,
            Error::InvalidInformationSet(_) => RdidStatus::InvalidInformationSet,
            Error::NeedsAtLeastTwoPeriods => RdidStatus::NeedsAtLeastTwoPeriods,
            Error::DimensionMismatch(_) => RdidStatus::DimensionMismatch,
            Error::SingleClass => RdidStatus::SingleClass,
            Error::SeparationDetected => RdidStatus::SeparationDetected,
            Error::DegenerateDesign(_) => RdidStatus::DegenerateDesign,
            Error::CollinearDesign(_) => RdidStatus::CollinearDesign,
            Error::NoTreatedUnits => RdidStatus::NoTreatedUnits,
            Error::AllPropensitiesClipped(_) => RdidStatus::AllPropensitiesClipped,
            Error::TooManyFailedReplicates { .. } => RdidStatus::TooManyFailedReplicates,
            Error::InsufficientReplicates(_) => RdidStatus::InsufficientReplicates,
            Error::UnbalancedPanel(_) => RdidStatus::UnbalancedPanel,
            Error::TreatmentReversalInStaggeredMode { .. } => RdidStatus::TreatmentReversalInStaggeredMode,
            Error::WeightSumInvalid(_) => RdidStatus::WeightSumInvalid,
            Error::EmptyDonorPool => RdidStatus::EmptyDonorPool,
            Error::MissingPeriod(_) => RdidStatus::MissingPeriod,
            Error::NegativeM(_) => RdidStatus::NegativeM,
            Error::InvalidSpec(_) => RdidStatus::InvalidSpec,
            Error::InvalidArgument(_) => RdidStatus::InvalidArgument,
        }
    }
}

/// Opaque dataset handle.
pub struct RdidPanel {
    ds: PanelDataset,
}

/// Bias-set bounds on the post-period effect.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RdidInterval {
    pub lower: f64,
    pub upper: f64,
    /// θ_OLS, the difference in post-period means.
    pub point_estimate: f64,
    pub standard_did: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

enum Fail {
    Status(RdidStatus, String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, converting errors and panics into a status and message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RdidStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RdidStatus::Ok,
        Ok(Err(Fail::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(format!("{}: {e}", e.name()));
            RdidStatus::from(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            RdidStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail::Status(RdidStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `s` must be null or a valid NUL-terminated string.
unsafe fn opt_str<'a>(s: *const c_char, what: &str) -> Result<Option<&'a str>, Fail> {
    if s.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(s)
        .to_str()
        .map(Some)
        .map_err(|_| Fail::Status(RdidStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// # Safety
/// As [`opt_str`].
unsafe fn req_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    opt_str(s, what)?.ok_or_else(|| null(what))
}

/// # Safety
/// `p` must be null or a handle returned by this library and not yet freed.
unsafe fn panel<'a>(p: *const RdidPanel) -> Result<&'a PanelDataset, Fail> {
    p.as_ref().map(|h| &h.ds).ok_or_else(|| null("panel"))
}

/// # Safety
/// `ptr` must be valid for `n` reads unless `n == 0`.
unsafe fn slice<'a, T>(ptr: *const T, n: usize, what: &str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, n))
}

fn parse_json<T: serde::de::DeserializeOwned + Default>(s: Option<&str>) -> Result<T, Fail> {
    match s {
        None => Ok(T::default()),
        Some(t) if t.trim().is_empty() => Ok(T::default()),
        Some(t) => serde_json::from_str(t).map_err(|e| Fail::Lib(Error::Parse(format!("options: {e}")))),
    }
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next library call on the same thread.
#[no_mangle]
pub extern "C" fn rdid_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn rdid_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Version of the JSON documents returned by `rdid_run_json`.
#[no_mangle]
pub extern "C" fn rdid_schema_version() -> *const c_char {
    static V: &str = "1\0";
    debug_assert_eq!(&V[..V.len() - 1], SCHEMA_VERSION);
    V.as_ptr().cast()
}

/// Loads a CSV. `schema_json` maps columns (null for the defaults
/// `unit, period, outcome, treatment`).
///
/// # Safety
/// `path` must be a NUL-terminated string, `schema_json` null or one, and
/// `out` a valid pointer. On success `*out` owns a handle for
/// `rdid_panel_free`.
#[no_mangle]
pub unsafe extern "C" fn rdid_panel_load_csv(
    path: *const c_char,
    schema_json: *const c_char,
    out: *mut *mut RdidPanel,
) -> RdidStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = req_str(path, "path")?;
        let schema = match opt_str(schema_json, "schema_json")? {
            Some(s) => SchemaConfig::from_json_str(s)?,
            None => SchemaConfig::default(),
        };
        let ds = PanelDataset::load_csv(path, &schema)?;
        *out = Box::into_raw(Box::new(RdidPanel { ds }));
        Ok(())
    })
}

/// Builds a panel without covariates from parallel arrays of length `n`.
/// Units are identified by integer ids.
///
/// # Safety
/// Each array must hold `n` elements; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rdid_panel_from_arrays(
    n: usize,
    unit: *const i64,
    period: *const i64,
    outcome: *const f64,
    treated: *const i64,
    out: *mut *mut RdidPanel,
) -> RdidStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let unit = slice(unit, n, "unit")?;
        let period = slice(period, n, "period")?;
        let outcome = slice(outcome, n, "outcome")?;
        let treated = slice(treated, n, "treated")?;
        let mut ids: Vec<i64> = unit.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let mut cols = PanelColumns::with_capacity(n, 0);
        cols.unit_ids = ids.iter().map(|u| u.to_string()).collect();
        for i in 0..n {
            let u = ids.binary_search(&unit[i]).expect("id collected above") as u32;
            cols.push(u, period[i], outcome[i], treated[i], &[]);
        }
        let ds = PanelDataset::from_columns(cols, Vec::new(), None, None)?;
        *out = Box::into_raw(Box::new(RdidPanel { ds }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `p` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rdid_panel_free(p: *mut RdidPanel) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of units, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rdid_panel_n_units(p: *const RdidPanel) -> usize {
    p.as_ref().map_or(0, |h| h.ds.n_units())
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rdid_panel_n_rows(p: *const RdidPanel) -> usize {
    p.as_ref().map_or(0, |h| h.ds.len())
}

/// Bias-set bounds over the given pre-periods (`n_info == 0` uses all).
///
/// # Safety
/// `p` must be a live handle, `info_periods` valid for `n_info` reads and
/// `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rdid_bounds(
    p: *const RdidPanel,
    info_periods: *const i64,
    n_info: usize,
    out: *mut RdidInterval,
) -> RdidStatus {
    guard(|| {
        let ds = panel(p)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let periods = slice(info_periods, n_info, "info_periods")?;
        let periods = if periods.is_empty() { ds.pre_periods() } else { periods.to_vec() };
        let post = ds.post_period()?;
        let info = InformationSet::pre_periods(ds, &periods)?;
        let theta = theta_ols(ds, post)?;
        let iv = gdid_bounds(theta, &bias_set(ds, &info, &Contrast::binary())?);
        *out = RdidInterval { lower: iv.lower, upper: iv.upper, point_estimate: theta, standard_did: standard_did(ds, post)? };
        Ok(())
    })
}

/// Runs `command` (`bounds`, `po`, `forecast`, `event_study`, `sc_bounds`
/// or `validate`) with JSON options and returns the JSON report in
/// `*out_json`, to be released with `rdid_string_free`.
///
/// # Safety
/// `p` must be a live handle, `command` a NUL-terminated string,
/// `options_json` null or one, and `out_json` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rdid_run_json(
    p: *const RdidPanel,
    command: *const c_char,
    options_json: *const c_char,
    out_json: *mut *mut c_char,
) -> RdidStatus {
    guard(|| {
        let ds = panel(p)?;
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let command = req_str(command, "command")?;
        let opts = opt_str(options_json, "options_json")?;
        let result = match command {
            "bounds" => serde_json::to_value(run_bounds(ds, &parse_json::<BoundsOptions>(opts)?)?),
            "po" => serde_json::to_value(run_po(ds, &parse_json::<PoOptions>(opts)?)?),
            "forecast" => serde_json::to_value(run_forecast(ds, &parse_json::<ForecastOptions>(opts)?)?),
            "event_study" => serde_json::to_value(run_event_study(ds, &parse_json::<EventStudyOptions>(opts)?)?),
            "sc_bounds" => {
                let info: InfoSpec = parse_json(opts)?;
                let InfoSpec::Periods { periods } = info else {
                    return Err(Fail::Lib(Error::InvalidArgument("sc_bounds takes a period list".into())));
                };
                serde_json::to_value(run_sc_bounds(ds, &periods)?)
            }
            "validate" => serde_json::to_value(run_validate(ds, 0.01)?),
            other => return Err(Fail::Lib(Error::InvalidArgument(format!("unknown command `{other}`")))),
        }
        .map_err(|e| Fail::Lib(Error::Parse(e.to_string())))?;
        let doc = serde_json::json!({ "schema_version": SCHEMA_VERSION, "command": command, "result": result });
        let text = CString::new(doc.to_string()).expect("JSON has no NUL");
        *out_json = text.into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from `rdid_run_json` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rdid_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Truncated standard-normal means `E[U | U ≥ c]` and `E[U | U < c]`.
///
/// # Safety
/// `alpha1` and `alpha0` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rdid_mills_alpha(c: f64, alpha1: *mut f64, alpha0: *mut f64) -> RdidStatus {
    guard(|| {
        if alpha1.is_null() || alpha0.is_null() {
            return Err(null("output"));
        }
        let (a1, a0) = mills_alpha(c);
        *alpha1 = a1;
        *alpha0 = a0;
        Ok(())
    })
}
