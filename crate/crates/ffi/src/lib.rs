//! C ABI over the `phlosar` simulator.
//!
//! Every fallible call returns a [`PhlosarStatus`]; on failure the message is
//! available from [`phlosar_last_error`] on the same thread. Objects cross the
//! boundary as opaque handles that must be released with the matching
//! `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use phlosar::analysis::{fit_discharge, single_bin_gain};
use phlosar::config::ScenarioFile;
use phlosar::gasmodel::{self, FlowResistance, GasConstants, PressureGauge};
use phlosar::output::timeseries_csv;
use phlosar::sim::{mass_balance, simulate, Scenario, TimeSeries};
use phlosar::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhlosarStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Json = 3,
    Divergence = 4,
    BelowVacuum = 5,
    Analysis = 6,
    NoFeasibleDesign = 7,
    Io = 8,
    InvalidUtf8 = 9,
    BufferTooSmall = 10,
    Panic = 99,
}

impl From<&Error> for PhlosarStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidInput { .. } => PhlosarStatus::InvalidInput,
            Error::Json { .. } => PhlosarStatus::Json,
            Error::Divergence { .. } => PhlosarStatus::Divergence,
            Error::BelowVacuum { .. } => PhlosarStatus::BelowVacuum,
            Error::Analysis(_) => PhlosarStatus::Analysis,
            Error::NoFeasibleDesign { .. } => PhlosarStatus::NoFeasibleDesign,
            Error::Io { .. } => PhlosarStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    let c = CString::new(msg).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn fail(status: PhlosarStatus, msg: impl Into<String>) -> PhlosarStatus {
    set_error(msg);
    status
}

fn from_err(e: Error) -> PhlosarStatus {
    let status = PhlosarStatus::from(&e);
    fail(status, e.to_string())
}

/// Runs `body`, converting panics into [`PhlosarStatus::Panic`].
fn guard(body: impl FnOnce() -> PhlosarStatus) -> PhlosarStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(s) => s,
        Err(_) => fail(PhlosarStatus::Panic, "internal panic"),
    }
}

/// Writes a result through `out`, mapping library errors to status codes.
///
/// # Safety
/// `out` must be null or valid for a write of `T`.
unsafe fn deliver<T>(out: *mut T, r: phlosar::Result<T>) -> PhlosarStatus {
    if out.is_null() {
        return fail(PhlosarStatus::NullPointer, "output pointer is null");
    }
    match r {
        Ok(v) => {
            out.write(v);
            PhlosarStatus::Ok
        }
        Err(e) => from_err(e),
    }
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn phlosar_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn phlosar_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Standard-condition gas properties.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhlosarGas {
    /// kg/m³.
    pub rho: f64,
    /// J/(mol·K).
    pub r_universal: f64,
    /// K.
    pub temperature: f64,
    /// kg/mol.
    pub molar_mass: f64,
}

impl From<PhlosarGas> for GasConstants {
    fn from(g: PhlosarGas) -> Self {
        GasConstants {
            rho: g.rho,
            r_universal: g.r_universal,
            temperature: g.temperature,
            molar_mass: g.molar_mass,
        }
    }
}

/// Dry air at 20 °C.
#[no_mangle]
pub extern "C" fn phlosar_gas_default() -> PhlosarGas {
    let g = GasConstants::default();
    PhlosarGas {
        rho: g.rho,
        r_universal: g.r_universal,
        temperature: g.temperature,
        molar_mass: g.molar_mass,
    }
}

fn gas(g: PhlosarGas) -> phlosar::Result<GasConstants> {
    let gc = GasConstants::from(g);
    gc.validate()?;
    Ok(gc)
}

/// Ideal-gas coefficient converting standard flow into pressure rate, kPa.
///
/// # Safety
/// `out` must be valid for a write of one `double`.
#[no_mangle]
pub unsafe extern "C" fn phlosar_alpha(g: PhlosarGas, out: *mut f64) -> PhlosarStatus {
    guard(|| deliver(out, gas(g).map(|gc| gc.alpha())))
}

/// Reservoir pressure after `t` s of discharge through `r_v`, kPa gauge.
///
/// # Safety
/// `out` must be valid for a write of one `double`.
#[no_mangle]
pub unsafe extern "C" fn phlosar_discharge_pressure(
    t: f64,
    p_r0: f64,
    r_v: f64,
    v_r: f64,
    g: PhlosarGas,
    out: *mut f64,
) -> PhlosarStatus {
    guard(|| {
        let r = (|| {
            let p = gasmodel::discharge_pressure(
                t,
                PressureGauge::new(p_r0)?,
                FlowResistance::new(r_v)?,
                v_r,
                &gas(g)?,
            )?;
            Ok(p.kpa())
        })();
        deliver(out, r)
    })
}

/// Control-volume inflation rate with the reservoir at `p_r`, kPa/s.
///
/// # Safety
/// `out` must be valid for a write of one `double`.
#[no_mangle]
pub unsafe extern "C" fn phlosar_inflation_rate(
    p_r: f64,
    r_v: f64,
    v_cv: f64,
    g: PhlosarGas,
    out: *mut f64,
) -> PhlosarStatus {
    guard(|| {
        let r = (|| {
            gasmodel::inflation_rate(
                PressureGauge::new(p_r)?,
                FlowResistance::new(r_v)?,
                v_cv,
                &gas(g)?,
            )
        })();
        deliver(out, r)
    })
}

/// Peak slope of a sine of amplitude `a` kPa at `omega` Hz, kPa/s.
///
/// # Safety
/// `out` must be valid for a write of one `double`.
#[no_mangle]
pub unsafe extern "C" fn phlosar_max_command_rate(a: f64, omega: f64, out: *mut f64) -> PhlosarStatus {
    guard(|| deliver(out, gasmodel::max_command_rate(a, omega)))
}

/// Cutoff frequency for a slew limit `pdot_max` and amplitude `a`, Hz.
///
/// # Safety
/// `out` must be valid for a write of one `double`.
#[no_mangle]
pub unsafe extern "C" fn phlosar_cutoff_frequency(pdot_max: f64, a: f64, out: *mut f64) -> PhlosarStatus {
    guard(|| deliver(out, gasmodel::cutoff_frequency(pdot_max, a)))
}

/// # Safety
/// `out` must be valid for a write of one `double`.
#[no_mangle]
pub unsafe extern "C" fn phlosar_frequency_gain(omega: f64, omega_c: f64, out: *mut f64) -> PhlosarStatus {
    guard(|| deliver(out, gasmodel::frequency_gain(omega, omega_c)))
}

/// Reservoir pressure needed to inflate at `pdot_d` kPa/s, kPa gauge.
///
/// # Safety
/// `out` must be valid for a write of one `double`.
#[no_mangle]
pub unsafe extern "C" fn phlosar_min_reservoir_pressure(
    pdot_d: f64,
    r_v: f64,
    v_cv: f64,
    g: PhlosarGas,
    out: *mut f64,
) -> PhlosarStatus {
    guard(|| {
        let r = (|| {
            let p = gasmodel::min_reservoir_pressure(pdot_d, FlowResistance::new(r_v)?, v_cv, &gas(g)?)?;
            Ok(p.kpa())
        })();
        deliver(out, r)
    })
}

/// Inflation–deflation cycles available from a full reservoir (real-valued).
///
/// # Safety
/// `out` must be valid for a write of one `double`.
#[no_mangle]
pub unsafe extern "C" fn phlosar_n_cycles(
    p_r0: f64,
    v_cv: f64,
    r_vmin: f64,
    pdot_d: f64,
    v_r: f64,
    dp_cv: f64,
    g: PhlosarGas,
    out: *mut f64,
) -> PhlosarStatus {
    guard(|| {
        let r = (|| {
            gasmodel::n_cycles(
                PressureGauge::new(p_r0)?,
                v_cv,
                FlowResistance::new(r_vmin)?,
                pdot_d,
                v_r,
                dp_cv,
                &gas(g)?,
            )
        })();
        deliver(out, r)
    })
}

/// Parsed and validated scenario.
pub struct PhlosarScenario {
    inner: Scenario,
}

/// Simulation output.
pub struct PhlosarTimeSeries {
    inner: TimeSeries,
}

/// Columns of a time series.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhlosarColumn {
    Time = 0,
    PressureCommand = 1,
    PressureControlVolume = 2,
    PressureReservoir = 3,
    InflationValve = 4,
    VenturiValve = 5,
    Solenoid = 6,
    FlowIn = 7,
    FlowOut = 8,
    FlowMotive = 9,
    /// Cumulative standard liters drawn from the supply.
    Supplied = 10,
    /// Cumulative standard liters exhausted to atmosphere.
    Vented = 11,
}

impl PhlosarColumn {
    const ALL: [PhlosarColumn; 12] = [
        PhlosarColumn::Time,
        PhlosarColumn::PressureCommand,
        PhlosarColumn::PressureControlVolume,
        PhlosarColumn::PressureReservoir,
        PhlosarColumn::InflationValve,
        PhlosarColumn::VenturiValve,
        PhlosarColumn::Solenoid,
        PhlosarColumn::FlowIn,
        PhlosarColumn::FlowOut,
        PhlosarColumn::FlowMotive,
        PhlosarColumn::Supplied,
        PhlosarColumn::Vented,
    ];

    pub fn from_raw(v: c_int) -> Option<Self> {
        Self::ALL.into_iter().find(|c| *c as c_int == v)
    }
}

unsafe fn utf8<'a>(s: *const c_char) -> Result<&'a str, PhlosarStatus> {
    if s.is_null() {
        return Err(fail(PhlosarStatus::NullPointer, "string pointer is null"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| fail(PhlosarStatus::InvalidUtf8, e.to_string()))
}

/// Parses a scenario document (the same JSON accepted by the command-line
/// tool) and stores a new handle in `*out`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn phlosar_scenario_from_json(
    json: *const c_char,
    out: *mut *mut PhlosarScenario,
) -> PhlosarStatus {
    guard(|| {
        if out.is_null() {
            return fail(PhlosarStatus::NullPointer, "output pointer is null");
        }
        let text = match utf8(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match ScenarioFile::parse(text, "scenario").and_then(|f| f.resolve()) {
            Ok(inner) => {
                out.write(Box::into_raw(Box::new(PhlosarScenario { inner })));
                PhlosarStatus::Ok
            }
            Err(e) => from_err(e),
        }
    })
}

/// # Safety
/// `scn` must be null or a handle from [`phlosar_scenario_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn phlosar_scenario_free(scn: *mut PhlosarScenario) {
    if !scn.is_null() {
        drop(Box::from_raw(scn));
    }
}

/// Runs the scenario and stores a new time-series handle in `*out`.
///
/// # Safety
/// `scn` must be a live scenario handle; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn phlosar_simulate(
    scn: *const PhlosarScenario,
    out: *mut *mut PhlosarTimeSeries,
) -> PhlosarStatus {
    guard(|| {
        if scn.is_null() || out.is_null() {
            return fail(PhlosarStatus::NullPointer, "null handle or output pointer");
        }
        match simulate(&(*scn).inner) {
            Ok(inner) => {
                out.write(Box::into_raw(Box::new(PhlosarTimeSeries { inner })));
                PhlosarStatus::Ok
            }
            Err(e) => from_err(e),
        }
    })
}

/// # Safety
/// `ts` must be null or a handle from [`phlosar_simulate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn phlosar_timeseries_free(ts: *mut PhlosarTimeSeries) {
    if !ts.is_null() {
        drop(Box::from_raw(ts));
    }
}

/// Number of samples, 0 for a null handle.
///
/// # Safety
/// `ts` must be null or a live time-series handle.
#[no_mangle]
pub unsafe extern "C" fn phlosar_timeseries_len(ts: *const PhlosarTimeSeries) -> usize {
    ts.as_ref().map_or(0, |t| t.inner.len())
}

/// Copies one column (a `PhlosarColumn` value) into `buf`, which must hold at
/// least [`phlosar_timeseries_len`] values.
///
/// # Safety
/// `ts` must be a live handle; `buf` must be valid for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn phlosar_timeseries_column(
    ts: *const PhlosarTimeSeries,
    column: c_int,
    buf: *mut f64,
    cap: usize,
) -> PhlosarStatus {
    guard(|| {
        let Some(t) = ts.as_ref() else {
            return fail(PhlosarStatus::NullPointer, "null time-series handle");
        };
        if buf.is_null() {
            return fail(PhlosarStatus::NullPointer, "null buffer");
        }
        let ts = &t.inner;
        let Some(column) = PhlosarColumn::from_raw(column) else {
            return fail(PhlosarStatus::InvalidInput, format!("unknown column {column}"));
        };
        let src = match column {
            PhlosarColumn::Time => &ts.t,
            PhlosarColumn::PressureCommand => &ts.p_cmd,
            PhlosarColumn::PressureControlVolume => &ts.p_cv,
            PhlosarColumn::PressureReservoir => &ts.p_r,
            PhlosarColumn::InflationValve => &ts.u_evp,
            PhlosarColumn::VenturiValve => &ts.u_dvp,
            PhlosarColumn::Solenoid => &ts.solenoid,
            PhlosarColumn::FlowIn => &ts.q_in,
            PhlosarColumn::FlowOut => &ts.q_out,
            PhlosarColumn::FlowMotive => &ts.q_motive,
            PhlosarColumn::Supplied => &ts.supplied,
            PhlosarColumn::Vented => &ts.vented,
        };
        if cap < src.len() {
            return fail(
                PhlosarStatus::BufferTooSmall,
                format!("buffer holds {cap} values, column has {}", src.len()),
            );
        }
        slice::from_raw_parts_mut(buf, src.len()).copy_from_slice(src);
        PhlosarStatus::Ok
    })
}

/// Controller mode per sample as a NUL-terminated name (`"PID"`,
/// `"ON_OFF_INFLATE"`, ...). Null when out of range. Static storage.
///
/// # Safety
/// `ts` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn phlosar_timeseries_mode(
    ts: *const PhlosarTimeSeries,
    index: usize,
) -> *const c_char {
    use phlosar::control::Mode;
    let Some(mode) = ts.as_ref().and_then(|t| t.inner.mode.get(index)) else {
        return ptr::null();
    };
    let name: &'static [u8] = match mode {
        Mode::Pid => b"PID\0",
        Mode::OnOffInflate => b"ON_OFF_INFLATE\0",
        Mode::Vent => b"VENT\0",
        Mode::ActiveDeflate => b"ACTIVE_DEFLATE\0",
        Mode::Idle => b"IDLE\0",
    };
    name.as_ptr().cast()
}

/// Renders the time series as CSV into a new string in `*out`; release it
/// with [`phlosar_string_free`].
///
/// # Safety
/// `ts` must be a live handle; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn phlosar_timeseries_csv(
    ts: *const PhlosarTimeSeries,
    out: *mut *mut c_char,
) -> PhlosarStatus {
    guard(|| {
        let Some(t) = ts.as_ref() else {
            return fail(PhlosarStatus::NullPointer, "null time-series handle");
        };
        if out.is_null() {
            return fail(PhlosarStatus::NullPointer, "output pointer is null");
        }
        let csv = CString::new(timeseries_csv(&t.inner)).expect("CSV has no NUL");
        out.write(csv.into_raw());
        PhlosarStatus::Ok
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn phlosar_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Relative air-mass imbalance of a run.
///
/// # Safety
/// Both handles must be live and `ts` must come from simulating `scn`.
#[no_mangle]
pub unsafe extern "C" fn phlosar_mass_balance(
    scn: *const PhlosarScenario,
    ts: *const PhlosarTimeSeries,
    out: *mut f64,
) -> PhlosarStatus {
    guard(|| match (scn.as_ref(), ts.as_ref()) {
        (Some(s), Some(t)) => deliver(out, Ok(mass_balance(&t.inner, &s.inner))),
        _ => fail(PhlosarStatus::NullPointer, "null handle"),
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhlosarDischargeFit {
    /// s.
    pub tau: f64,
    /// kPa.
    pub p_r0_fit: f64,
    pub nrmse: f64,
}

/// Log-linear fit of an exponential decay to `n` paired samples.
///
/// # Safety
/// `t` and `p` must each be valid for `n` reads; `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn phlosar_fit_discharge(
    t: *const f64,
    p: *const f64,
    n: usize,
    out: *mut PhlosarDischargeFit,
) -> PhlosarStatus {
    guard(|| {
        if t.is_null() || p.is_null() {
            return fail(PhlosarStatus::NullPointer, "null sample pointer");
        }
        let (t, p) = (slice::from_raw_parts(t, n), slice::from_raw_parts(p, n));
        let r = fit_discharge(t, p).map(|f| PhlosarDischargeFit {
            tau: f.tau,
            p_r0_fit: f.p_r0_fit,
            nrmse: f.nrmse,
        });
        deliver(out, r)
    })
}

/// Gain of the `omega` component of a uniformly sampled response relative to
/// amplitude `a`.
///
/// # Safety
/// `response` must be valid for `n` reads; `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn phlosar_single_bin_gain(
    response: *const f64,
    n: usize,
    omega: f64,
    a: f64,
    sample_rate: f64,
    out: *mut f64,
) -> PhlosarStatus {
    guard(|| {
        if response.is_null() {
            return fail(PhlosarStatus::NullPointer, "null response pointer");
        }
        let x = slice::from_raw_parts(response, n);
        deliver(out, single_bin_gain(x, omega, a, sample_rate).map(|p| p.gain))
    })
}
