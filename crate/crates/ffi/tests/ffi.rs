use std::ffi::{CStr, CString};
use std::os::raw::c_int;
use std::ptr;

use phlosar_ffi::*;

fn last_error() -> String {
    let p = phlosar_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn scenario_json(name: &str) -> CString {
    let path = format!("{}/../core/scenarios/{name}", env!("CARGO_MANIFEST_DIR"));
    CString::new(std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn alpha_for_dry_air() {
    let mut a = 0.0;
    let s = unsafe { phlosar_alpha(phlosar_gas_default(), &mut a) };
    assert_eq!(s, PhlosarStatus::Ok);
    assert!((a - 101.3185).abs() < 1e-3, "{a}");
    assert!(phlosar_last_error().is_null());
}

#[test]
fn closed_forms() {
    let g = phlosar_gas_default();
    let mut v = 0.0;
    unsafe {
        assert_eq!(phlosar_cutoff_frequency(100.0, 10.0, &mut v), PhlosarStatus::Ok);
        assert!((v - 100.0 / (20.0 * std::f64::consts::PI)).abs() < 1e-12);
        assert_eq!(phlosar_frequency_gain(4.0, 2.0, &mut v), PhlosarStatus::Ok);
        assert_eq!(v, 0.5);
        assert_eq!(phlosar_max_command_rate(10.0, 1.0, &mut v), PhlosarStatus::Ok);
        assert!((v - 20.0 * std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(phlosar_discharge_pressure(0.0, 689.0, 1759.2, 2.0, g, &mut v), PhlosarStatus::Ok);
        assert_eq!(v, 689.0);
        assert_eq!(phlosar_inflation_rate(689.0, 1759.2, 0.5, g, &mut v), PhlosarStatus::Ok);
        assert!((v - 79.37).abs() < 0.05, "{v}");
        let mut p = 0.0;
        assert_eq!(phlosar_min_reservoir_pressure(v, 1759.2, 0.5, g, &mut p), PhlosarStatus::Ok);
        assert!((p - 689.0).abs() < 1e-9);
        assert_eq!(phlosar_n_cycles(689.0, 0.5, 1759.2, v, 2.0, 20.0, g, &mut v), PhlosarStatus::Ok);
        assert!(v.abs() < 1e-9, "{v}");
    }
}

#[test]
fn invalid_arguments_set_status_and_message() {
    let mut v = 0.0;
    let s = unsafe { phlosar_cutoff_frequency(1.0, 0.0, &mut v) };
    assert_eq!(s, PhlosarStatus::InvalidInput);
    assert!(last_error().contains('A'));
    let s = unsafe { phlosar_alpha(phlosar_gas_default(), ptr::null_mut()) };
    assert_eq!(s, PhlosarStatus::NullPointer);
    let mut g = phlosar_gas_default();
    g.temperature = -1.0;
    assert_eq!(unsafe { phlosar_alpha(g, &mut v) }, PhlosarStatus::InvalidInput);
}

#[test]
fn scenario_round_trip() {
    let json = scenario_json("step_response.json");
    let mut scn = ptr::null_mut();
    let mut ts = ptr::null_mut();
    unsafe {
        assert_eq!(phlosar_scenario_from_json(json.as_ptr(), &mut scn), PhlosarStatus::Ok);
        assert_eq!(phlosar_simulate(scn, &mut ts), PhlosarStatus::Ok);
        let n = phlosar_timeseries_len(ts);
        assert_eq!(n, 3001);

        let mut p_cv = vec![0.0; n];
        let s = phlosar_timeseries_column(ts, PhlosarColumn::PressureControlVolume as c_int, p_cv.as_mut_ptr(), n);
        assert_eq!(s, PhlosarStatus::Ok);
        assert!((p_cv[n - 1] - 69.0).abs() < 0.5, "{}", p_cv[n - 1]);

        let s = phlosar_timeseries_column(ts, PhlosarColumn::Time as c_int, p_cv.as_mut_ptr(), n - 1);
        assert_eq!(s, PhlosarStatus::BufferTooSmall);
        let s = phlosar_timeseries_column(ts, 42, p_cv.as_mut_ptr(), n);
        assert_eq!(s, PhlosarStatus::InvalidInput);

        let mode = CStr::from_ptr(phlosar_timeseries_mode(ts, 0)).to_str().unwrap();
        assert_eq!(mode, "ON_OFF_INFLATE");
        assert!(phlosar_timeseries_mode(ts, n).is_null());

        let mut imbalance = 1.0;
        assert_eq!(phlosar_mass_balance(scn, ts, &mut imbalance), PhlosarStatus::Ok);
        assert!(imbalance < 1e-4);

        let mut csv = ptr::null_mut();
        assert_eq!(phlosar_timeseries_csv(ts, &mut csv), PhlosarStatus::Ok);
        let text = CStr::from_ptr(csv).to_str().unwrap().to_string();
        phlosar_string_free(csv);
        assert!(text.starts_with("t_s,P_cmd_kPa,"));
        assert_eq!(text.lines().count(), n + 1);

        phlosar_timeseries_free(ts);
        phlosar_scenario_free(scn);
        phlosar_timeseries_free(ptr::null_mut());
        phlosar_scenario_free(ptr::null_mut());
    }
}

#[test]
fn bad_scenario_reports_json_error() {
    let json = CString::new(r#"{"schema_version": 1, "bogus": true}"#).unwrap();
    let mut scn = ptr::null_mut();
    let s = unsafe { phlosar_scenario_from_json(json.as_ptr(), &mut scn) };
    assert_eq!(s, PhlosarStatus::Json);
    assert!(scn.is_null());
    assert!(last_error().contains("bogus"), "{}", last_error());
}

#[test]
fn fit_recovers_tau() {
    let t: Vec<f64> = (0..100).map(|i| i as f64 * 0.5).collect();
    let p: Vec<f64> = t.iter().map(|t| 600.0 * (-t / 12.5).exp()).collect();
    let mut fit = PhlosarDischargeFit::default();
    let s = unsafe { phlosar_fit_discharge(t.as_ptr(), p.as_ptr(), t.len(), &mut fit) };
    assert_eq!(s, PhlosarStatus::Ok);
    assert!((fit.tau - 12.5).abs() < 1e-9);
    assert!((fit.p_r0_fit - 600.0).abs() < 1e-7);
}

#[test]
fn single_bin_recovers_amplitude() {
    let fs = 1000.0;
    let x: Vec<f64> = (0..6000)
        .map(|i| 3.0 + 0.8 * (2.0 * std::f64::consts::PI * i as f64 / fs).sin())
        .collect();
    let mut g = 0.0;
    let s = unsafe { phlosar_single_bin_gain(x.as_ptr(), x.len(), 1.0, 1.0, fs, &mut g) };
    assert_eq!(s, PhlosarStatus::Ok);
    assert!((g - 0.8).abs() < 1e-3, "{g}");
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(phlosar_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_exports() {
    let h = std::fs::read_to_string(format!("{}/include/phlosar.h", env!("CARGO_MANIFEST_DIR"))).unwrap();
    for sym in [
        "PHLOSAR_H",
        "PHLOSAR_STATUS_OK = 0",
        "PHLOSAR_COLUMN_VENTED",
        "typedef struct PhlosarScenario PhlosarScenario",
        "phlosar_last_error(void)",
        "phlosar_scenario_from_json(",
        "phlosar_simulate(",
        "phlosar_timeseries_column(",
        "phlosar_string_free(",
        "phlosar_fit_discharge(",
    ] {
        assert!(h.contains(sym), "header lacks {sym}");
    }
}
