//! Exercises the C ABI the way a foreign binding would: through the extern
//! functions and raw pointers only.

use nsk_ffi::*;
use std::ffi::{CStr, CString};

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn last_error() -> String {
    let p = nsk_last_error_message();
    assert!(!p.is_null());
    CStr::from_ptr(p).to_string_lossy().into_owned()
}

#[test]
fn parse_configure_simulate_fit_roundtrip() {
    unsafe {
        let cfg = nsk_config_parse(cstr("[grid]\nn = 64\n").as_ptr());
        assert!(!cfg.is_null());
        for (k, v) in [
            ("time.t_end", "0.5"),
            ("time.output_interval", "0.02"),
            ("time.fit_start", "0.1"),
        ] {
            let st = nsk_config_set(cfg, cstr(k).as_ptr(), cstr(v).as_ptr());
            assert_eq!(st, NskStatus::NskOk, "{k}: {}", last_error());
        }

        let mut series: *mut NskSeries = std::ptr::null_mut();
        let st = nsk_simulate(cfg, 0, &mut series);
        assert_eq!(st, NskStatus::NskOk, "{}", last_error());
        assert!(!series.is_null());
        assert_eq!(nsk_series_failed(series), 0);

        let len = nsk_series_len(series);
        assert!(len >= 20, "{len}");
        let mut rec = std::mem::zeroed::<NskRecord>();
        assert_eq!(nsk_series_record(series, 0, &mut rec), NskStatus::NskOk);
        assert_eq!(rec.t, 0.0);
        assert!(rec.e_total > 0.0);
        let mut last = std::mem::zeroed::<NskRecord>();
        assert_eq!(nsk_series_record(series, len - 1, &mut last), NskStatus::NskOk);
        assert!(last.e_total < rec.e_total);
        assert_eq!(nsk_series_monotone(series), 1);

        let (mut c, mut r2) = (0.0f64, 0.0f64);
        assert_eq!(
            nsk_series_fit(series, 0.1, 0.5, &mut c, &mut r2),
            NskStatus::NskOk,
            "{}",
            last_error()
        );
        assert!(c > 0.0 && r2 > 0.9, "C={c} r2={r2}");

        // out-of-range record is an argument error
        assert_eq!(
            nsk_series_record(series, len, &mut rec),
            NskStatus::NskErrArgument
        );

        nsk_series_free(series);
        nsk_config_free(cfg);
    }
}

#[test]
fn config_errors_are_reported() {
    unsafe {
        let bad = nsk_config_parse(cstr("not [valid toml").as_ptr());
        assert!(bad.is_null());
        assert!(last_error().contains("TOML"), "{}", last_error());

        let cfg = nsk_config_parse(std::ptr::null());
        assert!(!cfg.is_null()); // null text means documented defaults
        let st = nsk_config_set(cfg, cstr("grid.bogus").as_ptr(), cstr("1").as_ptr());
        assert_eq!(st, NskStatus::NskErrConfig);

        // inadmissible pair without override
        for (k, v) in [
            ("viscosity.family", "power-law"),
            ("viscosity.alpha", "2.0"),
            ("pressure.gamma", "3.0"),
            ("time.t_end", "0.1"),
            ("grid.n", "64"),
        ] {
            assert_eq!(
                nsk_config_set(cfg, cstr(k).as_ptr(), cstr(v).as_ptr()),
                NskStatus::NskOk
            );
        }
        let mut series: *mut NskSeries = std::ptr::null_mut();
        assert_eq!(nsk_simulate(cfg, 0, &mut series), NskStatus::NskErrConfig);
        assert!(series.is_null());
        // with the override it runs
        assert_eq!(nsk_simulate(cfg, 1, &mut series), NskStatus::NskOk, "{}", last_error());
        assert!(!series.is_null());
        nsk_series_free(series);
        nsk_config_free(cfg);
    }
}

#[test]
fn run_failure_returns_partial_series() {
    unsafe {
        let cfg = nsk_config_parse(std::ptr::null());
        for (k, v) in [
            ("grid.n", "64"),
            ("time.t_end", "0.5"),
            ("solver.rho_floor_rel", "0.9"),
        ] {
            assert_eq!(
                nsk_config_set(cfg, cstr(k).as_ptr(), cstr(v).as_ptr()),
                NskStatus::NskOk
            );
        }
        let mut series: *mut NskSeries = std::ptr::null_mut();
        let st = nsk_simulate(cfg, 0, &mut series);
        // the floor is above the initial dip, so this fails up front as a
        // config-level vacuum error rather than producing a series
        assert_ne!(st, NskStatus::NskOk);
        nsk_config_free(cfg);
        if !series.is_null() {
            nsk_series_free(series);
        }
    }
}

#[test]
fn law_check_json_and_version() {
    unsafe {
        assert!(!nsk_version().is_null());
        let cfg = nsk_config_parse(std::ptr::null());
        let json = nsk_check_law_json(cfg);
        assert!(!json.is_null());
        let text = CStr::from_ptr(json).to_string_lossy().into_owned();
        assert!(text.contains("\"admissible\":true"), "{text}");
        nsk_string_free(json);
        nsk_config_free(cfg);
    }
}

#[test]
fn header_is_generated_with_the_full_surface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/nsk.h"))
        .expect("include/nsk.h present");
    for symbol in [
        "nsk_config_parse",
        "nsk_config_set",
        "nsk_config_free",
        "nsk_simulate",
        "nsk_series_len",
        "nsk_series_record",
        "nsk_series_fit",
        "nsk_series_monotone",
        "nsk_series_free",
        "nsk_check_law_json",
        "nsk_string_free",
        "nsk_last_error_message",
        "NskStatus",
        "NskRecord",
    ] {
        assert!(header.contains(symbol), "header is missing {symbol}");
    }
}
