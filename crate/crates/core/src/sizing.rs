//! Component sizing: checks valve / reservoir (/ Venturi) combinations against
//! actuation requirements for pressure headroom, bandwidth and cycle budget.

use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;

use crate::error::{finite, non_negative, positive, Error, Result};
use crate::gasmodel::{
    cutoff_frequency, inflation_rate, max_command_rate, min_reservoir_pressure, n_cycles,
    FlowResistance, GasConstants, PressureGauge,
};

/// What the soft actuator needs from the supply.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignRequirements {
    /// L.
    pub v_cv: f64,
    /// On–off pressure swing per cycle, kPa.
    pub dp_cv: f64,
    /// Desired inflation speed, kPa/s. Derived from the sine when absent.
    pub pdot_d: Option<f64>,
    /// Sine amplitude, kPa. Defaults to half the pressure swing.
    pub amplitude: Option<f64>,
    /// Hz.
    pub omega_target: Option<f64>,
    pub min_cycles: f64,
}

impl DesignRequirements {
    pub fn validate(&self) -> Result<()> {
        positive("V_cv_L", self.v_cv)?;
        positive("dP_cv_kPa", self.dp_cv)?;
        non_negative("min_cycles", self.min_cycles)?;
        if let Some(v) = self.pdot_d {
            positive("Pdot_d_kPa_per_s", v)?;
        }
        if let Some(v) = self.amplitude {
            positive("A_kPa", v)?;
        }
        if let Some(v) = self.omega_target {
            positive("omega_target_Hz", v)?;
        }
        if self.pdot_d.is_none() && self.omega_target.is_none() {
            return Err(Error::invalid(
                "requirements",
                "give Pdot_d_kPa_per_s or omega_target_Hz (with optional A_kPa)",
            ));
        }
        Ok(())
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude.unwrap_or(0.5 * self.dp_cv)
    }

    /// Explicit `pdot_d`, else the peak slope of the target sine.
    pub fn desired_rate(&self) -> Result<f64> {
        match (self.pdot_d, self.omega_target) {
            (Some(r), _) => Ok(r),
            (None, Some(w)) => max_command_rate(self.amplitude(), w),
            (None, None) => Err(Error::invalid(
                "requirements",
                "neither Pdot_d nor omega_target given",
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogValve {
    pub name: String,
    pub r_vmin: FlowResistance,
    pub mass_g: f64,
    pub p_inlet_max: PressureGauge,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogReservoir {
    pub name: String,
    /// L.
    pub volume: f64,
    pub mass_g: f64,
    pub p_max: PressureGauge,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogVenturi {
    pub name: String,
    pub mass_g: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ComponentCatalog {
    pub valves: Vec<CatalogValve>,
    pub reservoirs: Vec<CatalogReservoir>,
    /// Optional; when present every combination takes one Venturi.
    pub venturis: Vec<CatalogVenturi>,
}

impl ComponentCatalog {
    pub fn validate(&self) -> Result<()> {
        if self.valves.is_empty() {
            return Err(Error::invalid("catalog.valves", "must not be empty"));
        }
        if self.reservoirs.is_empty() {
            return Err(Error::invalid("catalog.reservoirs", "must not be empty"));
        }
        for (i, v) in self.valves.iter().enumerate() {
            positive(&format!("catalog.valves[{i}].mass_g"), v.mass_g)?;
            positive(&format!("catalog.valves[{i}].P_inlet_max_kPa"), v.p_inlet_max.kpa())?;
        }
        for (i, r) in self.reservoirs.iter().enumerate() {
            positive(&format!("catalog.reservoirs[{i}].V_r_L"), r.volume)?;
            positive(&format!("catalog.reservoirs[{i}].mass_g"), r.mass_g)?;
            positive(&format!("catalog.reservoirs[{i}].P_max_kPa"), r.p_max.kpa())?;
        }
        for (i, v) in self.venturis.iter().enumerate() {
            positive(&format!("catalog.venturis[{i}].mass_g"), v.mass_g)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Constraint {
    #[serde(rename = "reservoir pressure")]
    ReservoirPressure,
    #[serde(rename = "cycles")]
    Cycles,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constraint::ReservoirPressure => "reservoir pressure",
            Constraint::Cycles => "cycles",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignEntry {
    pub valve: String,
    pub reservoir: String,
    pub venturi: Option<String>,
    /// Starting reservoir pressure actually usable, kPa.
    pub p_r0: f64,
    /// Reservoir pressure below which the desired rate is lost, kPa.
    pub p_r_required: f64,
    pub pdot_d: f64,
    /// Cutoff with a full reservoir, Hz.
    pub omega_c_full: f64,
    /// Cutoff at the depletion floor, Hz.
    pub omega_c_depleted: f64,
    pub n_cycles: f64,
    pub total_mass_g: f64,
    /// Reservoir rating exceeds the valve inlet limit; `p_r0` was clamped.
    pub inlet_limited: bool,
    pub feasible: bool,
    /// First violated requirement, if any.
    pub limiting_constraint: Option<Constraint>,
}

/// Scores one valve / reservoir pairing. The reservoir is assumed filled to the
/// lower of its own rating and the valve inlet limit.
pub fn evaluate_design(
    req: &DesignRequirements,
    valve: &CatalogValve,
    reservoir: &CatalogReservoir,
    gc: &GasConstants,
) -> Result<DesignEntry> {
    req.validate()?;
    gc.validate()?;
    let inlet_limited = reservoir.p_max.kpa() > valve.p_inlet_max.kpa();
    let p_r0 = if inlet_limited {
        valve.p_inlet_max
    } else {
        reservoir.p_max
    };
    let rate = req.desired_rate()?;
    let amplitude = req.amplitude();
    let p_req = min_reservoir_pressure(rate, valve.r_vmin, req.v_cv, gc)?;
    let full_rate = inflation_rate(p_r0, valve.r_vmin, req.v_cv, gc)?;
    let floor_rate = inflation_rate(p_req, valve.r_vmin, req.v_cv, gc)?;
    let cycles = n_cycles(
        p_r0,
        req.v_cv,
        valve.r_vmin,
        rate,
        reservoir.volume,
        req.dp_cv,
        gc,
    )?;

    let limiting_constraint = if p_req.kpa() > p_r0.kpa() {
        Some(Constraint::ReservoirPressure)
    } else if cycles < req.min_cycles {
        Some(Constraint::Cycles)
    } else {
        None
    };
    Ok(DesignEntry {
        valve: valve.name.clone(),
        reservoir: reservoir.name.clone(),
        venturi: None,
        p_r0: p_r0.kpa(),
        p_r_required: p_req.kpa(),
        pdot_d: rate,
        omega_c_full: cutoff_frequency(full_rate, amplitude)?,
        omega_c_depleted: cutoff_frequency(floor_rate, amplitude)?,
        n_cycles: cycles,
        total_mass_g: valve.mass_g + reservoir.mass_g,
        inlet_limited,
        feasible: limiting_constraint.is_none(),
        limiting_constraint,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignReport {
    pub requirements: DesignRequirements,
    pub evaluated: usize,
    /// Feasible configurations, best first.
    pub ranked: Vec<DesignEntry>,
}

/// Lighter first, then more cycles, then by component names.
pub fn rank_order(a: &DesignEntry, b: &DesignEntry) -> Ordering {
    a.total_mass_g
        .total_cmp(&b.total_mass_g)
        .then_with(|| b.n_cycles.total_cmp(&a.n_cycles))
        .then_with(|| a.valve.cmp(&b.valve))
        .then_with(|| a.reservoir.cmp(&b.reservoir))
        .then_with(|| a.venturi.cmp(&b.venturi))
}

/// Evaluates every catalog combination and ranks the feasible ones. An empty
/// feasible set is [`Error::NoFeasibleDesign`].
pub fn enumerate_catalog(
    req: &DesignRequirements,
    cat: &ComponentCatalog,
    gc: &GasConstants,
) -> Result<DesignReport> {
    req.validate()?;
    cat.validate()?;
    let venturis: Vec<Option<&CatalogVenturi>> = if cat.venturis.is_empty() {
        vec![None]
    } else {
        cat.venturis.iter().map(Some).collect()
    };
    let mut ranked = Vec::new();
    let mut evaluated = 0;
    for valve in &cat.valves {
        for reservoir in &cat.reservoirs {
            let base = evaluate_design(req, valve, reservoir, gc)?;
            for venturi in &venturis {
                evaluated += 1;
                if !base.feasible {
                    continue;
                }
                let mut entry = base.clone();
                if let Some(v) = venturi {
                    entry.venturi = Some(v.name.clone());
                    entry.total_mass_g = finite("total_mass_g", entry.total_mass_g + v.mass_g)?;
                }
                ranked.push(entry);
            }
        }
    }
    if ranked.is_empty() {
        return Err(Error::NoFeasibleDesign { evaluated });
    }
    ranked.sort_by(rank_order);
    Ok(DesignReport {
        requirements: req.clone(),
        evaluated,
        ranked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_req() -> DesignRequirements {
        DesignRequirements {
            v_cv: 0.1,
            dp_cv: 20.7,
            pdot_d: None,
            amplitude: None,
            omega_target: Some(0.55),
            min_cycles: 300.0,
        }
    }

    fn evp() -> CatalogValve {
        CatalogValve {
            name: "EVP".into(),
            r_vmin: FlowResistance::from_rating(689.0, 23.5).unwrap(),
            mass_g: 120.0,
            p_inlet_max: PressureGauge::new(689.0).unwrap(),
        }
    }

    fn bottle(name: &str, v: f64, p: f64, mass: f64) -> CatalogReservoir {
        CatalogReservoir {
            name: name.into(),
            volume: v,
            mass_g: mass,
            p_max: PressureGauge::new(p).unwrap(),
        }
    }

    #[test]
    fn demo_configuration() {
        let gc = GasConstants::default();
        let e = evaluate_design(&demo_req(), &evp(), &bottle("2L", 2.0, 689.0, 800.0), &gc).unwrap();
        assert!((e.pdot_d - 35.77).abs() < 0.01, "{}", e.pdot_d);
        assert!((e.n_cycles - 303.2).abs() < 1.0, "{}", e.n_cycles);
        assert!((e.p_r_required - 62.1).abs() < 0.1);
        assert!(e.feasible);
        assert!(!e.inlet_limited);
        assert!((e.omega_c_depleted - 0.55).abs() < 1e-9);
        assert!(e.omega_c_full > e.omega_c_depleted);
        let direct = n_cycles(
            PressureGauge::new(689.0).unwrap(),
            0.1,
            evp().r_vmin,
            e.pdot_d,
            2.0,
            20.7,
            &gc,
        )
        .unwrap();
        assert_eq!(e.n_cycles, direct);
    }

    #[test]
    fn vanishing_rate_limit() {
        let gc = GasConstants::default();
        let req = DesignRequirements {
            pdot_d: Some(1e-12),
            omega_target: None,
            min_cycles: 0.0,
            ..demo_req()
        };
        let e = evaluate_design(&req, &evp(), &bottle("2L", 2.0, 689.0, 800.0), &gc).unwrap();
        assert!(e.p_r_required < 1e-9);
        let limit = 0.5 * 689.0 * 2.0 / (0.1 * 20.7);
        assert!((e.n_cycles - limit).abs() < 1e-6);
    }

    #[test]
    fn low_pressure_reservoir_is_limiting() {
        let gc = GasConstants::default();
        let e = evaluate_design(&demo_req(), &evp(), &bottle("weak", 2.0, 50.0, 10.0), &gc).unwrap();
        assert!(!e.feasible);
        assert_eq!(e.limiting_constraint, Some(Constraint::ReservoirPressure));
    }

    #[test]
    fn inlet_limit_clamps_fill_pressure() {
        let gc = GasConstants::default();
        let e = evaluate_design(&demo_req(), &evp(), &bottle("hp", 2.0, 2000.0, 900.0), &gc).unwrap();
        assert!(e.inlet_limited);
        assert_eq!(e.p_r0, 689.0);
    }

    #[test]
    fn requirements_need_a_rate() {
        let req = DesignRequirements {
            pdot_d: None,
            omega_target: None,
            ..demo_req()
        };
        assert!(matches!(req.validate(), Err(Error::InvalidInput { .. })));
    }

    #[test]
    fn catalog_single_entry_and_ranking() {
        let gc = GasConstants::default();
        let cat = ComponentCatalog {
            valves: vec![evp()],
            reservoirs: vec![bottle("2L", 2.0, 689.0, 800.0)],
            venturis: vec![],
        };
        let rep = enumerate_catalog(&demo_req(), &cat, &gc).unwrap();
        assert_eq!(rep.ranked.len(), 1);
        assert!((rep.ranked[0].n_cycles - 303.2).abs() < 1.0);

        let cat = ComponentCatalog {
            valves: vec![evp()],
            reservoirs: vec![bottle("heavy", 2.0, 689.0, 900.0), bottle("light", 2.0, 689.0, 700.0)],
            venturis: vec![],
        };
        let rep = enumerate_catalog(&demo_req(), &cat, &gc).unwrap();
        assert_eq!(rep.ranked[0].reservoir, "light");
        assert_eq!(rep.ranked[1].reservoir, "heavy");
    }

    #[test]
    fn venturis_multiply_combinations() {
        let gc = GasConstants::default();
        let cat = ComponentCatalog {
            valves: vec![evp()],
            reservoirs: vec![bottle("2L", 2.0, 689.0, 800.0)],
            venturis: vec![
                CatalogVenturi { name: "big".into(), mass_g: 40.0 },
                CatalogVenturi { name: "small".into(), mass_g: 15.0 },
            ],
        };
        let rep = enumerate_catalog(&demo_req(), &cat, &gc).unwrap();
        assert_eq!(rep.evaluated, 2);
        assert_eq!(rep.ranked[0].venturi.as_deref(), Some("small"));
        assert_eq!(rep.ranked[0].total_mass_g, 935.0);
    }

    #[test]
    fn impossible_cycle_count() {
        let gc = GasConstants::default();
        let req = DesignRequirements {
            min_cycles: 1e6,
            ..demo_req()
        };
        let cat = ComponentCatalog {
            valves: vec![evp()],
            reservoirs: vec![bottle("2L", 2.0, 689.0, 800.0)],
            venturis: vec![],
        };
        assert!(matches!(
            enumerate_catalog(&req, &cat, &gc),
            Err(Error::NoFeasibleDesign { evaluated: 1 })
        ));
        assert!(enumerate_catalog(&demo_req(), &ComponentCatalog::default(), &gc).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn relaxing_requirements_keeps_feasibility(
                rate in 1.0f64..400.0, frac in 0.0f64..1.0, dp in 1.0f64..100.0,
                shrink in 0.05f64..1.0, v_r in 0.2f64..5.0, p in 50.0f64..900.0,
            ) {
                let gc = GasConstants::default();
                let mut req = DesignRequirements {
                    v_cv: 0.1, dp_cv: dp, pdot_d: Some(rate), amplitude: None,
                    omega_target: None, min_cycles: 0.0,
                };
                let res = bottle("r", v_r, p, 500.0);
                req.min_cycles = frac * evaluate_design(&req, &evp(), &res, &gc).unwrap().n_cycles;
                let cycles = req.min_cycles;
                let base = evaluate_design(&req, &evp(), &res, &gc).unwrap();
                prop_assume!(base.feasible);
                for relaxed in [
                    DesignRequirements { pdot_d: Some(rate * shrink), ..req.clone() },
                    DesignRequirements { min_cycles: cycles * shrink, ..req.clone() },
                    DesignRequirements { dp_cv: dp * shrink, ..req.clone() },
                ] {
                    prop_assert!(evaluate_design(&relaxed, &evp(), &res, &gc).unwrap().feasible);
                }
            }

            #[test]
            fn ranking_is_total_and_repeatable(masses in proptest::collection::vec(100.0f64..1000.0, 1..6)) {
                let gc = GasConstants::default();
                let cat = ComponentCatalog {
                    valves: vec![evp()],
                    reservoirs: masses.iter().enumerate()
                        .map(|(i, m)| bottle(&format!("r{i}"), 2.0, 689.0, *m)).collect(),
                    venturis: vec![],
                };
                let a = enumerate_catalog(&demo_req(), &cat, &gc).unwrap();
                let mut rev = cat.clone();
                rev.reservoirs.reverse();
                let b = enumerate_catalog(&demo_req(), &rev, &gc).unwrap();
                prop_assert_eq!(&a.ranked, &b.ranked);
                for w in a.ranked.windows(2) {
                    prop_assert!(rank_order(&w[0], &w[1]) != Ordering::Greater);
                }
            }
        }
    }
}
