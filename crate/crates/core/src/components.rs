//! Lumped models of the physical elements: reservoir, control volume,
//! proportional and binary valves, the Venturi vacuum generator and the
//! pressure sensors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{finite, non_negative, positive, Error, Result};
use crate::gasmodel::{
    slpm_to_slps, FlowResistance, GasConstants, PressureGauge, STANDARD_ATMOSPHERE_KPA,
    VACUUM_GAUGE_KPA,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reservoir {
    /// Volume, L.
    pub volume: f64,
    /// Fill pressure at the start of a run.
    pub p_initial: PressureGauge,
    /// Held at `p_initial` for the whole run (bench supply instead of a bottle).
    pub fixed: bool,
}

impl Reservoir {
    pub fn new(volume: f64, p_initial: PressureGauge, fixed: bool) -> Result<Self> {
        positive("reservoir.V_r_L", volume)?;
        Ok(Reservoir {
            volume,
            p_initial,
            fixed,
        })
    }
}

/// Rigid sealed volume whose pressure is regulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlVolume {
    /// Volume, L. Constant for a run.
    pub volume: f64,
    pub p_initial: PressureGauge,
}

impl ControlVolume {
    pub fn new(volume: f64, p_initial: PressureGauge) -> Result<Self> {
        positive("control_volume.V_cv_L", volume)?;
        Ok(ControlVolume { volume, p_initial })
    }

    /// Moles of gas held at gauge pressure `p_cv`.
    pub fn moles(&self, p_cv: PressureGauge, gc: &GasConstants) -> f64 {
        // kPa·L = J
        (p_cv.kpa() + STANDARD_ATMOSPHERE_KPA) * self.volume / (gc.r_universal * gc.temperature)
    }
}

/// Proportional valve with conductance affine in the command above a deadband.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProportionalValveSpec {
    /// Resistance at full command.
    pub r_vmin: FlowResistance,
    /// Command fraction below which the valve passes nothing.
    pub deadband: f64,
    pub p_inlet_max: PressureGauge,
}

impl ProportionalValveSpec {
    pub fn new(r_vmin: FlowResistance, deadband: f64, p_inlet_max: PressureGauge) -> Result<Self> {
        finite("deadband", deadband)?;
        if !(0.0..1.0).contains(&deadband) {
            return Err(Error::invalid(
                "deadband",
                format!("must lie in [0, 1), got {deadband}"),
            ));
        }
        Ok(ProportionalValveSpec {
            r_vmin,
            deadband,
            p_inlet_max,
        })
    }

    /// Conductance (std L/s per kPa) at command `u`, without range checks.
    pub(crate) fn conductance(&self, u: f64) -> f64 {
        ((u - self.deadband) / (1.0 - self.deadband)).max(0.0) / self.r_vmin.value()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryValveSpec {
    pub r_open: FlowResistance,
}

impl BinaryValveSpec {
    pub(crate) fn flow(&self, p_cv: f64, p_node: f64, open: bool) -> f64 {
        if !open {
            return 0.0;
        }
        ((p_cv - p_node) / self.r_open.value()).max(0.0)
    }
}

/// Vacuum node whose pressure ramps linearly with motive flow down to a floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VenturiSpec {
    /// Deepest vacuum, reached at `q_motive_rated`. Strictly between perfect
    /// vacuum and atmosphere.
    pub p_vac_floor: PressureGauge,
    /// Motive flow at which the floor is reached, std L/s.
    pub q_motive_rated: f64,
}

impl VenturiSpec {
    pub fn new(p_vac_floor: PressureGauge, q_motive_rated: f64) -> Result<Self> {
        let floor = p_vac_floor.kpa();
        if !(floor > VACUUM_GAUGE_KPA && floor < 0.0) {
            return Err(Error::invalid(
                "venturi.P_vac_floor_kPa",
                format!("must lie in ({VACUUM_GAUGE_KPA}, 0), got {floor}"),
            ));
        }
        positive("venturi.flow_rated", q_motive_rated)?;
        Ok(VenturiSpec {
            p_vac_floor,
            q_motive_rated,
        })
    }

    /// Defaults: -80 kPa reached at 67 SLPM motive flow.
    pub fn default_spec() -> Self {
        VenturiSpec {
            p_vac_floor: PressureGauge::new(-80.0).expect("constant"),
            q_motive_rated: slpm_to_slps(67.0),
        }
    }

    pub(crate) fn node_pressure(&self, q_motive: f64) -> f64 {
        self.p_vac_floor.kpa() * (q_motive / self.q_motive_rated).min(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub range_max: PressureGauge,
    /// Standard deviation of additive Gaussian noise, kPa.
    pub noise_std: f64,
    pub seed: u64,
}

impl SensorSpec {
    pub fn new(range_max: PressureGauge, noise_std: f64, seed: u64) -> Result<Self> {
        positive("sensor.range_max_kPa", range_max.kpa())?;
        non_negative("sensor.noise_std_kPa", noise_std)?;
        Ok(SensorSpec {
            range_max,
            noise_std,
            seed,
        })
    }

    /// Control-volume sensor: 207 kPa full scale, noiseless.
    pub fn control_volume_default() -> Self {
        SensorSpec {
            range_max: PressureGauge::new(207.0).expect("constant"),
            noise_std: 0.0,
            seed: 0,
        }
    }
}

/// Standard flow through a proportional valve at command `u` and pressure drop `dp`.
pub fn proportional_valve_flow(u: f64, dp: f64, spec: &ProportionalValveSpec) -> Result<f64> {
    finite("u", u)?;
    finite("dP", dp)?;
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::invalid("u", format!("must lie in [0, 1], got {u}")));
    }
    Ok(spec.conductance(u) * dp)
}

/// Gauge pressure at the Venturi suction port for motive flow `q_motive`.
pub fn venturi_vacuum_pressure(q_motive: f64, spec: &VenturiSpec) -> Result<PressureGauge> {
    non_negative("Q_motive", q_motive)?;
    PressureGauge::new(spec.node_pressure(q_motive))
}

/// Flow out of the control volume through the solenoid into the suction node.
/// Reverse flow is blocked.
pub fn deflation_flow(
    p_cv: PressureGauge,
    p_node: PressureGauge,
    solenoid_open: bool,
    spec: &BinaryValveSpec,
) -> f64 {
    spec.flow(p_cv.kpa(), p_node.kpa(), solenoid_open)
}

/// Seeded pressure transducer: additive Gaussian noise, clamped to
/// `[perfect vacuum, range_max]`.
#[derive(Debug, Clone)]
pub struct PressureSensor {
    spec: SensorSpec,
    noise: Option<Normal<f64>>,
    rng: ChaCha8Rng,
}

impl PressureSensor {
    pub fn new(spec: SensorSpec) -> Self {
        let noise = (spec.noise_std > 0.0)
            .then(|| Normal::new(0.0, spec.noise_std).expect("noise_std validated"));
        PressureSensor {
            spec,
            noise,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
        }
    }

    pub fn read(&mut self, p_true: f64) -> f64 {
        let noisy = match &self.noise {
            Some(n) => p_true + n.sample(&mut self.rng),
            None => p_true,
        };
        noisy.clamp(VACUUM_GAUGE_KPA, self.spec.range_max.kpa())
    }
}

/// One-shot form of [`PressureSensor::read`].
pub fn sensor_read(p_true: PressureGauge, sensor: &mut PressureSensor) -> PressureGauge {
    PressureGauge::new(sensor.read(p_true.kpa())).expect("clamped into range")
}
