//! Closed-form relations of the lumped isothermal gas model.
//!
//! Every function here is pure. Pressures are gauge (kPa relative to the
//! atmosphere), volumes are liters, flows are standard liters per second and
//! times are seconds. The lumped coefficient [`GasConstants::alpha`] converts a
//! standard volume per actual volume into a gauge pressure, so that
//! `alpha * Q / V` is a pressure rate in kPa/s.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{finite, non_negative, positive, Error, Result};

/// Gauge pressure of a perfect vacuum, kPa.
pub const VACUUM_GAUGE_KPA: f64 = -101.325;

/// Standard atmospheric pressure, kPa.
pub const STANDARD_ATMOSPHERE_KPA: f64 = 101.325;

/// Gas properties at the standard conditions used to define "standard" flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasConstants {
    /// Density, kg/m³.
    pub rho: f64,
    /// Universal gas constant, J/(mol·K).
    pub r_universal: f64,
    /// Temperature, K.
    pub temperature: f64,
    /// Molar mass, kg/mol.
    pub molar_mass: f64,
}

impl Default for GasConstants {
    /// Dry air at 20 °C.
    fn default() -> Self {
        GasConstants {
            rho: 1.2041,
            r_universal: 8.314,
            temperature: 293.15,
            molar_mass: 0.028965,
        }
    }
}

impl GasConstants {
    pub fn new(rho: f64, r_universal: f64, temperature: f64, molar_mass: f64) -> Result<Self> {
        let gc = GasConstants {
            rho,
            r_universal,
            temperature,
            molar_mass,
        };
        gc.validate()?;
        Ok(gc)
    }

    pub fn validate(&self) -> Result<()> {
        positive("gas.rho", self.rho)?;
        positive("gas.R_u", self.r_universal)?;
        positive("gas.T", self.temperature)?;
        positive("gas.M", self.molar_mass)?;
        Ok(())
    }

    /// `rho * R_u * T / M` in kPa.
    pub fn alpha(&self) -> f64 {
        self.rho * self.r_universal * self.temperature / self.molar_mass / 1000.0
    }
}

/// Free-function form of [`GasConstants::alpha`].
pub fn alpha(gc: &GasConstants) -> f64 {
    gc.alpha()
}

/// Gauge pressure in kPa. Never below perfect vacuum.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PressureGauge(f64);

impl PressureGauge {
    pub const ATMOSPHERE: PressureGauge = PressureGauge(0.0);

    pub fn new(kpa: f64) -> Result<Self> {
        finite("pressure", kpa)?;
        if kpa < VACUUM_GAUGE_KPA {
            return Err(Error::invalid(
                "pressure",
                format!("{kpa} kPa gauge is below perfect vacuum ({VACUUM_GAUGE_KPA} kPa)"),
            ));
        }
        Ok(PressureGauge(kpa))
    }

    pub fn kpa(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for PressureGauge {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        PressureGauge::new(v)
    }
}

impl From<PressureGauge> for f64 {
    fn from(p: PressureGauge) -> f64 {
        p.0
    }
}

/// Linear flow resistance, kPa·s per standard liter.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FlowResistance(f64);

impl FlowResistance {
    pub fn new(kpa_s_per_l: f64) -> Result<Self> {
        positive("flow resistance", kpa_s_per_l)?;
        Ok(FlowResistance(kpa_s_per_l))
    }

    /// Resistance that passes `flow_slpm` at a pressure drop of `dp_kpa`.
    ///
    /// This is how a datasheet pair (max flow, rated inlet pressure) becomes a
    /// single resistance, assuming the rated flow discharges to atmosphere.
    pub fn from_rating(dp_kpa: f64, flow_slpm: f64) -> Result<Self> {
        positive("rated pressure", dp_kpa)?;
        positive("rated flow", flow_slpm)?;
        FlowResistance::new(dp_kpa / slpm_to_slps(flow_slpm))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for FlowResistance {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        FlowResistance::new(v)
    }
}

impl From<FlowResistance> for f64 {
    fn from(r: FlowResistance) -> f64 {
        r.0
    }
}

pub fn slpm_to_slps(slpm: f64) -> f64 {
    slpm / 60.0
}

pub fn slps_to_slpm(slps: f64) -> f64 {
    slps * 60.0
}

/// Pressure rate of a rigid volume receiving standard flow `q` (std L/s).
pub fn pressure_rate_from_flow(q: f64, v_cv: f64, gc: &GasConstants) -> Result<f64> {
    finite("Q", q)?;
    positive("V_cv", v_cv)?;
    Ok(gc.alpha() * q / v_cv)
}

/// Standard flow through a linear resistance.
pub fn flow_from_ohm(dp: f64, r_v: FlowResistance) -> f64 {
    dp / r_v.value()
}

/// Discharge time constant `R_v * V_r / alpha`, seconds.
pub fn discharge_time_constant(r_v: FlowResistance, v_r: f64, gc: &GasConstants) -> Result<f64> {
    positive("V_r", v_r)?;
    Ok(r_v.value() * v_r / gc.alpha())
}

/// Reservoir pressure after discharging to atmosphere through `r_v` for `t` seconds.
pub fn discharge_pressure(
    t: f64,
    p_r0: PressureGauge,
    r_v: FlowResistance,
    v_r: f64,
    gc: &GasConstants,
) -> Result<PressureGauge> {
    non_negative("t", t)?;
    let tau = discharge_time_constant(r_v, v_r, gc)?;
    PressureGauge::new(p_r0.kpa() * (-t / tau).exp())
}

/// Inflation rate of the control volume with the reservoir at `p_r`, neglecting
/// the control-volume back pressure (valid for `P_r >> P_cv`).
pub fn inflation_rate(
    p_r: PressureGauge,
    r_v: FlowResistance,
    v_cv: f64,
    gc: &GasConstants,
) -> Result<f64> {
    positive("V_cv", v_cv)?;
    Ok(gc.alpha() * p_r.kpa() / (r_v.value() * v_cv))
}

/// Peak slope of `A sin(2 pi omega t) + c`.
pub fn max_command_rate(amplitude: f64, omega_hz: f64) -> Result<f64> {
    non_negative("A", amplitude)?;
    non_negative("omega", omega_hz)?;
    Ok(2.0 * amplitude * PI * omega_hz)
}

/// Frequency above which a slew-limited regulator can no longer follow a sine of
/// amplitude `amplitude`.
pub fn cutoff_frequency(max_rate: f64, amplitude: f64) -> Result<f64> {
    non_negative("Pdot_max", max_rate)?;
    positive("A", amplitude)?;
    Ok(max_rate / (2.0 * PI * amplitude))
}

/// Unity in the pass band, `omega_c / omega` above it.
pub fn frequency_gain(omega_hz: f64, omega_c_hz: f64) -> Result<f64> {
    positive("omega", omega_hz)?;
    non_negative("omega_c", omega_c_hz)?;
    Ok(if omega_hz <= omega_c_hz {
        1.0
    } else {
        omega_c_hz / omega_hz
    })
}

/// Smallest reservoir pressure that still delivers `rate` kPa/s into `v_cv`.
pub fn min_reservoir_pressure(
    rate: f64,
    r_v: FlowResistance,
    v_cv: f64,
    gc: &GasConstants,
) -> Result<PressureGauge> {
    non_negative("Pdot_d", rate)?;
    positive("V_cv", v_cv)?;
    PressureGauge::new(rate * r_v.value() * v_cv / gc.alpha())
}

/// Inflation–deflation cycles available before the reservoir falls below the
/// pressure needed for `rate`. Deflation is budgeted at the same air cost as
/// inflation, hence the factor one half. Real-valued, clamped at zero.
pub fn n_cycles(
    p_r0: PressureGauge,
    v_cv: f64,
    r_vmin: FlowResistance,
    rate: f64,
    v_r: f64,
    dp_cv: f64,
    gc: &GasConstants,
) -> Result<f64> {
    positive("V_cv", v_cv)?;
    positive("V_r", v_r)?;
    positive("dP_cv", dp_cv)?;
    non_negative("Pdot_d", rate)?;
    let bracket = p_r0.kpa() / v_cv - r_vmin.value() * rate / gc.alpha();
    Ok((0.5 * bracket * v_r / dp_cv).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gc_at(alpha_kpa: f64) -> GasConstants {
        // rho scaled so that alpha() hits the requested value exactly
        let base = GasConstants::default();
        GasConstants {
            rho: base.rho * alpha_kpa / base.alpha(),
            ..base
        }
    }

    fn r(v: f64) -> FlowResistance {
        FlowResistance::new(v).unwrap()
    }

    fn p(v: f64) -> PressureGauge {
        PressureGauge::new(v).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn alpha_standard_conditions() {
        let a20 = GasConstants::default().alpha();
        assert!((a20 - 101.3).abs() < 0.05, "{a20}");
        let a0 = GasConstants::new(1.2754, 8.314, 273.15, 0.028965).unwrap().alpha();
        assert!((a0 - 100.0).abs() < 0.05, "{a0}");
    }

    #[test]
    fn alpha_scales_linearly() {
        let gc = GasConstants::default();
        let twice = GasConstants {
            rho: 2.0 * gc.rho,
            ..gc
        };
        assert_eq!(twice.alpha(), 2.0 * gc.alpha());
        let hot = GasConstants {
            temperature: 3.0 * gc.temperature,
            ..gc
        };
        assert!(close(hot.alpha(), 3.0 * gc.alpha(), 1e-15));
        let heavy = GasConstants {
            molar_mass: 2.0 * gc.molar_mass,
            ..gc
        };
        assert!(close(heavy.alpha(), 0.5 * gc.alpha(), 1e-15));
    }

    #[test]
    fn gas_constants_reject_non_positive() {
        assert!(GasConstants::new(0.0, 8.314, 293.15, 0.029).is_err());
        assert!(GasConstants::new(1.2, -1.0, 293.15, 0.029).is_err());
        assert!(GasConstants::new(1.2, 8.314, f64::NAN, 0.029).is_err());
    }

    #[test]
    fn pressure_rate_examples() {
        let gc = gc_at(101.325);
        assert_eq!(pressure_rate_from_flow(0.0, 0.5, &gc).unwrap(), 0.0);
        let rate = pressure_rate_from_flow(0.3917, 0.5, &gc).unwrap();
        assert!((rate - 79.4).abs() < 0.05, "{rate}");
        let half = pressure_rate_from_flow(0.3917, 0.25, &gc).unwrap();
        assert!(close(half, 2.0 * rate, 1e-14));
        assert!(pressure_rate_from_flow(-0.1, 0.5, &gc).unwrap() < 0.0);
        assert!(pressure_rate_from_flow(0.1, 0.0, &gc).is_err());
        assert!(pressure_rate_from_flow(0.1, -1.0, &gc).is_err());
    }

    #[test]
    fn ohm_examples() {
        assert_eq!(flow_from_ohm(0.0, r(3.0)), 0.0);
        let q = flow_from_ohm(689.0, r(1759.2));
        assert!((q - 0.3917).abs() < 1e-4);
        assert!((slps_to_slpm(q) - 23.5).abs() < 0.01);
        assert_eq!(flow_from_ohm(-10.0, r(5.0)), -2.0);
    }

    #[test]
    fn resistance_from_datasheet_rating() {
        let evp = FlowResistance::from_rating(689.0, 23.5).unwrap();
        assert!((evp.value() - 1759.15).abs() < 0.01);
        assert!(FlowResistance::from_rating(689.0, 0.0).is_err());
        assert!(FlowResistance::new(0.0).is_err());
    }

    #[test]
    fn discharge_examples() {
        let gc = gc_at(101.325);
        let p0 = p(689.0);
        assert_eq!(discharge_pressure(0.0, p0, r(1759.2), 2.0, &gc).unwrap(), p0);
        let tau = discharge_time_constant(r(1759.2), 2.0, &gc).unwrap();
        assert!((tau - 34.7).abs() < 0.05, "{tau}");
        let at_tau = discharge_pressure(tau, p0, r(1759.2), 2.0, &gc).unwrap();
        assert!(close(at_tau.kpa(), 689.0 / std::f64::consts::E, 1e-12));
        let at_347 = discharge_pressure(34.7, p0, r(1759.2), 2.0, &gc).unwrap();
        assert!((at_347.kpa() - 253.6).abs() < 0.2, "{at_347:?}");
        assert!(discharge_pressure(-1.0, p0, r(1759.2), 2.0, &gc).is_err());
    }

    #[test]
    fn discharge_satisfies_its_ode() {
        let gc = GasConstants::default();
        let (rv, vr, p0) = (r(900.0), 1.5, p(500.0));
        let tau = discharge_time_constant(rv, vr, &gc).unwrap();
        let h = 1e-4 * tau;
        for frac in [0.1, 0.5, 1.0, 3.0] {
            let t = frac * tau;
            let f = |t: f64| discharge_pressure(t, p0, rv, vr, &gc).unwrap().kpa();
            let deriv = (f(t + h) - f(t - h)) / (2.0 * h);
            let expected = -f(t) / tau;
            assert!(close(deriv, expected, 1e-6), "{deriv} vs {expected}");
        }
    }

    #[test]
    fn inflation_rate_examples() {
        let gc = gc_at(101.325);
        let step = inflation_rate(p(689.0), r(1759.2), 0.5, &gc).unwrap();
        assert!((step - 79.4).abs() < 0.05, "{step}");
        let half_supply = inflation_rate(p(345.0), r(1759.2), 1.0, &gc).unwrap();
        assert!((half_supply - 19.9).abs() < 0.05, "{half_supply}");
        assert_eq!(inflation_rate(p(0.0), r(1759.2), 1.0, &gc).unwrap(), 0.0);
        assert!(inflation_rate(p(1.0), r(1.0), 0.0, &gc).is_err());
    }

    #[test]
    fn command_rate_and_cutoff() {
        let c21 = max_command_rate(21.0, 1.35).unwrap();
        assert!((c21 - 178.1).abs() < 0.05, "{c21}");
        let c34 = max_command_rate(34.0, 0.32).unwrap();
        assert!((c34 - 68.4).abs() < 0.05, "{c34}");
        assert_eq!(max_command_rate(0.0, 3.0).unwrap(), 0.0);

        let wc4 = cutoff_frequency(178.1, 21.0).unwrap();
        assert_eq!(format!("{wc4:.2}"), "1.35");
        let wc5 = cutoff_frequency(68.4, 34.0).unwrap();
        assert_eq!(format!("{wc5:.2}"), "0.32");
        assert_eq!(cutoff_frequency(0.0, 21.0).unwrap(), 0.0);
        assert!(cutoff_frequency(10.0, 0.0).is_err());
    }

    #[test]
    fn frequency_gain_piecewise() {
        assert_eq!(frequency_gain(1.3, 1.3).unwrap(), 1.0);
        assert_eq!(frequency_gain(2.6, 1.3).unwrap(), 0.5);
        assert_eq!(frequency_gain(0.65, 1.3).unwrap(), 1.0);
        assert!(frequency_gain(0.0, 1.0).is_err());
        assert!(frequency_gain(1.0, -1.0).is_err());
    }

    #[test]
    fn min_reservoir_pressure_examples() {
        let gc = gc_at(101.325);
        let p_min = min_reservoir_pressure(79.4, r(1759.2), 0.5, &gc).unwrap();
        assert!((p_min.kpa() - 689.0).abs() < 0.5, "{p_min:?}");
        assert_eq!(
            min_reservoir_pressure(0.0, r(1759.2), 0.5, &gc).unwrap().kpa(),
            0.0
        );
        let demo = min_reservoir_pressure(35.8, r(1759.2), 0.1, &gc).unwrap();
        assert!((demo.kpa() - 62.1).abs() < 0.1, "{demo:?}");
        assert!(min_reservoir_pressure(-1.0, r(1759.2), 0.5, &gc).is_err());
    }

    #[test]
    fn cycle_count_examples() {
        let gc = gc_at(101.325);
        let n = n_cycles(p(689.0), 0.1, r(1759.2), 35.8, 2.0, 20.7, &gc).unwrap();
        assert!((n - 303.0).abs() < 1.0, "{n}");
        // bracket vanishes exactly
        let rate = 689.0 / 0.1 * gc.alpha() / 1759.2;
        let zero = n_cycles(p(689.0), 0.1, r(1759.2), rate, 2.0, 20.7, &gc).unwrap();
        assert!(zero.abs() < 1e-9, "{zero}");
        let n2 = n_cycles(p(689.0), 0.1, r(1759.2), 35.8, 4.0, 20.7, &gc).unwrap();
        assert!(close(n2, 2.0 * n, 1e-14));
        // depleted reservoir clamps at zero
        assert_eq!(
            n_cycles(p(10.0), 0.1, r(1759.2), 35.8, 2.0, 20.7, &gc).unwrap(),
            0.0
        );
        assert!(n_cycles(p(689.0), 0.0, r(1759.2), 35.8, 2.0, 20.7, &gc).is_err());
        assert!(n_cycles(p(689.0), 0.1, r(1759.2), 35.8, 2.0, 0.0, &gc).is_err());
    }

    #[test]
    fn pressure_gauge_floor() {
        assert!(PressureGauge::new(-101.325).is_ok());
        assert!(PressureGauge::new(-101.4).is_err());
        assert!(PressureGauge::new(f64::INFINITY).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn min_pressure_inverts_inflation_rate(
                rate in 0.01f64..1e4, rv in 1.0f64..1e4, v in 0.01f64..10.0,
            ) {
                let gc = GasConstants::default();
                let p_min = min_reservoir_pressure(rate, r(rv), v, &gc).unwrap();
                let back = inflation_rate(p_min, r(rv), v, &gc).unwrap();
                prop_assert!((back - rate).abs() <= 1e-12 * rate);
            }

            #[test]
            fn gain_bounded_and_non_increasing(
                wc in 0.01f64..10.0, w1 in 0.01f64..50.0, w2 in 0.01f64..50.0,
            ) {
                let (lo, hi) = if w1 <= w2 { (w1, w2) } else { (w2, w1) };
                let g_lo = frequency_gain(lo, wc).unwrap();
                let g_hi = frequency_gain(hi, wc).unwrap();
                prop_assert!(g_lo > 0.0 && g_lo <= 1.0);
                prop_assert!(g_hi <= g_lo);
            }

            #[test]
            fn cycles_monotone(
                p0 in 100.0f64..1000.0, rate in 0.0f64..100.0, rv in 100.0f64..3000.0,
                vr in 0.5f64..5.0, dp in 1.0f64..50.0, bump in 1.0f64..2.0,
            ) {
                let gc = GasConstants::default();
                let n = |p0: f64, rate: f64, rv: f64, vr: f64| {
                    n_cycles(p(p0), 0.2, r(rv), rate, vr, dp, &gc).unwrap()
                };
                let base = n(p0, rate, rv, vr);
                prop_assert!(n(p0, rate * bump, rv, vr) <= base);
                prop_assert!(n(p0, rate, rv * bump, vr) <= base);
                prop_assert!(n(p0 * bump, rate, rv, vr) >= base);
                prop_assert!(n(p0, rate, rv, vr * bump) >= base);
            }
        }
    }
}
