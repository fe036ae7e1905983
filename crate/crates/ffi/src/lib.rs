//! C ABI over the core laboratory: opaque config and series handles, status
//! codes, and a thread-local last-error message. The matching header is
//! generated into `include/nsk.h` by cbindgen at build time.
//!
//! Conventions:
//! * every pointer argument must be non-null unless documented otherwise;
//! * handles are freed exactly once with their matching `_free` function;
//! * strings returned by the library are freed with [`nsk_string_free`];
//! * `nsk_last_error_message` describes the most recent failure on the
//!   calling thread and stays valid until the next failing call.

use nsk_core::config::RunConfig;
use nsk_core::constitutive::check_admissibility;
use nsk_core::solver::{fit_decay_rate, run, TimeSeries};
use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Status codes returned by fallible calls.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NskStatus {
    NskOk = 0,
    /// A null pointer, invalid UTF-8, or out-of-range argument.
    NskErrArgument = 1,
    /// Configuration or validation failure (parallels process exit code 2).
    NskErrConfig = 2,
    /// Solver failure: vacuum or retry-cap exhaustion (exit code 3).
    NskErrRun = 3,
}

/// One entropy record row (mirrors the series.csv schema).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NskRecord {
    pub t: c_double,
    pub mass: c_double,
    pub e_total: c_double,
    pub e_kinetic_w: c_double,
    pub e_drift_v: c_double,
    pub e_pressure_h: c_double,
    pub e_drag_h: c_double,
    pub d_capillary: c_double,
    pub d_pressure: c_double,
    pub d_drag: c_double,
    pub d_z1_quartic: c_double,
    pub dissipation_residual: c_double,
}

/// Opaque configuration handle.
pub struct NskConfig {
    inner: RunConfig,
}

/// Opaque result handle: the record series plus the run's error marker.
pub struct NskSeries {
    series: TimeSeries,
    residual_tol: f64,
    failed: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &nsk_core::Error) -> NskStatus {
    match nsk_core::cli::exit_code(err) {
        3 => NskStatus::NskErrRun,
        _ => NskStatus::NskErrConfig,
    }
}

/// Most recent error message on this thread, or null. Valid until the next
/// failing call from the same thread; do not free.
#[no_mangle]
pub extern "C" fn nsk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map(|c| c.as_ptr())
            .unwrap_or(std::ptr::null())
    })
}

/// Library version string; static storage, do not free.
#[no_mangle]
pub extern "C" fn nsk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parse a TOML configuration (empty string = documented defaults).
/// Returns null on failure; see [`nsk_last_error_message`].
///
/// # Safety
/// `toml_text` must be a valid NUL-terminated string or null (treated as "").
#[no_mangle]
pub unsafe extern "C" fn nsk_config_parse(toml_text: *const c_char) -> *mut NskConfig {
    let text = if toml_text.is_null() {
        ""
    } else {
        match CStr::from_ptr(toml_text).to_str() {
            Ok(s) => s,
            Err(_) => {
                set_error("config text is not valid UTF-8".into());
                return std::ptr::null_mut();
            }
        }
    };
    match RunConfig::from_toml_str(text) {
        Ok(inner) => Box::into_raw(Box::new(NskConfig { inner })),
        Err(e) => {
            set_error(e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Apply one dotted-path override, e.g. key "viscosity.alpha", value "0.75".
///
/// # Safety
/// `config` must be a live handle from [`nsk_config_parse`]; `key` and
/// `value` must be valid NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn nsk_config_set(
    config: *mut NskConfig,
    key: *const c_char,
    value: *const c_char,
) -> NskStatus {
    if config.is_null() || key.is_null() || value.is_null() {
        set_error("null argument to nsk_config_set".into());
        return NskStatus::NskErrArgument;
    }
    let (key, value) = match (CStr::from_ptr(key).to_str(), CStr::from_ptr(value).to_str()) {
        (Ok(k), Ok(v)) => (k, v),
        _ => {
            set_error("override key/value is not valid UTF-8".into());
            return NskStatus::NskErrArgument;
        }
    };
    let cfg = &mut *config;
    match cfg.inner.with_overrides(&[format!("{key}={value}")]) {
        Ok(updated) => {
            cfg.inner = updated;
            NskStatus::NskOk
        }
        Err(e) => {
            set_error(e.to_string());
            NskStatus::NskErrConfig
        }
    }
}

/// # Safety
/// `config` must come from [`nsk_config_parse`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn nsk_config_free(config: *mut NskConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Run the configured experiment. On solver failure (vacuum, retry cap) the
/// partial series is still returned in `out` together with `NskErrRun`.
///
/// # Safety
/// `config` must be a live handle; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn nsk_simulate(
    config: *const NskConfig,
    override_admissibility: c_int,
    out: *mut *mut NskSeries,
) -> NskStatus {
    if config.is_null() || out.is_null() {
        set_error("null argument to nsk_simulate".into());
        return NskStatus::NskErrArgument;
    }
    *out = std::ptr::null_mut();
    let cfg = &(*config).inner;
    let result = catch_unwind(AssertUnwindSafe(|| -> nsk_core::Result<(TimeSeries, f64, bool)> {
        let grid = cfg.grid()?;
        let initial = cfg.initial_state(grid)?;
        let r = cfg.resolved_r(&initial);
        let solver_cfg = cfg.solver_config(r, override_admissibility != 0)?;
        let outcome = run(&solver_cfg, &initial)?;
        Ok((
            outcome.series,
            solver_cfg.residual_tol,
            outcome.error.is_some(),
        ))
    }));
    match result {
        Ok(Ok((series, residual_tol, failed))) => {
            *out = Box::into_raw(Box::new(NskSeries {
                series,
                residual_tol,
                failed,
            }));
            if failed {
                set_error("run ended early; partial series returned".into());
                NskStatus::NskErrRun
            } else {
                NskStatus::NskOk
            }
        }
        Ok(Err(e)) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic in nsk_simulate".into());
            NskStatus::NskErrRun
        }
    }
}

/// Number of entropy records in the series. Zero for a null handle.
///
/// # Safety
/// `series` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn nsk_series_len(series: *const NskSeries) -> usize {
    if series.is_null() {
        0
    } else {
        (*series).series.records.len()
    }
}

/// 1 when the run ended early (vacuum / retry cap), else 0.
///
/// # Safety
/// `series` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nsk_series_failed(series: *const NskSeries) -> c_int {
    if !series.is_null() && (*series).failed {
        1
    } else {
        0
    }
}

/// Copy record `index` into `out`.
///
/// # Safety
/// `series` must be a live handle; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn nsk_series_record(
    series: *const NskSeries,
    index: usize,
    out: *mut NskRecord,
) -> NskStatus {
    if series.is_null() || out.is_null() {
        set_error("null argument to nsk_series_record".into());
        return NskStatus::NskErrArgument;
    }
    let records = &(*series).series.records;
    let Some(r) = records.get(index) else {
        set_error(format!("record index {index} out of range ({} records)", records.len()));
        return NskStatus::NskErrArgument;
    };
    *out = NskRecord {
        t: r.t,
        mass: r.mass,
        e_total: r.e_total,
        e_kinetic_w: r.e_kinetic_w,
        e_drift_v: r.e_drift_v,
        e_pressure_h: r.e_pressure_h,
        e_drag_h: r.e_drag_h,
        d_capillary: r.d_capillary,
        d_pressure: r.d_pressure,
        d_drag: r.d_drag,
        d_z1_quartic: r.d_z1_quartic,
        dissipation_residual: r.dissipation_residual,
    };
    NskStatus::NskOk
}

/// Least-squares decay rate of the modulated energy over `[t0, t1]`.
///
/// # Safety
/// `series` must be a live handle; `c` and `r_squared` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nsk_series_fit(
    series: *const NskSeries,
    t0: c_double,
    t1: c_double,
    c: *mut c_double,
    r_squared: *mut c_double,
) -> NskStatus {
    if series.is_null() || c.is_null() || r_squared.is_null() {
        set_error("null argument to nsk_series_fit".into());
        return NskStatus::NskErrArgument;
    }
    match fit_decay_rate(&(*series).series, (t0, t1)) {
        Ok((rate, r2)) => {
            *c = rate;
            *r_squared = r2;
            NskStatus::NskOk
        }
        Err(e) => {
            set_error(e.to_string());
            NskStatus::NskErrConfig
        }
    }
}

/// 1 when the series is monotone nonincreasing within the run's entropy
/// budget, else 0.
///
/// # Safety
/// `series` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nsk_series_monotone(series: *const NskSeries) -> c_int {
    if series.is_null() {
        return 0;
    }
    let s = &*series;
    s.series.is_monotone(s.residual_tol) as c_int
}

/// # Safety
/// `series` must come from [`nsk_simulate`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn nsk_series_free(series: *mut NskSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Admissibility report for the configured law/pressure pair as a JSON
/// string. Free with [`nsk_string_free`]; null on failure.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nsk_check_law_json(config: *const NskConfig) -> *mut c_char {
    if config.is_null() {
        set_error("null config".into());
        return std::ptr::null_mut();
    }
    let cfg = &(*config).inner;
    let report = (|| -> nsk_core::Result<String> {
        let law = cfg.law()?;
        let pressure = cfg.pressure_law()?;
        let report = check_admissibility(&law, &pressure, (1e-5, 1e5), 400)?;
        serde_json::to_string(&serde_json::json!({
            "report": report,
            "admissible": report.admissible(),
        }))
        .map_err(|e| nsk_core::Error::Config(e.to_string()))
    })();
    match report {
        Ok(json) => CString::new(json)
            .map(CString::into_raw)
            .unwrap_or(std::ptr::null_mut()),
        Err(e) => {
            set_error(e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// # Safety
/// `s` must be a string returned by this library, freed exactly once.
#[no_mangle]
pub unsafe extern "C" fn nsk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
