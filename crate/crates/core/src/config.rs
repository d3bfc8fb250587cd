//! On-disk JSON formats for scenarios, design requirements and component
//! catalogs. Keys carry their units; unknown keys are rejected.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analysis::SweepOptions;
use crate::components::{
    BinaryValveSpec, ControlVolume, ProportionalValveSpec, Reservoir, SensorSpec, VenturiSpec,
};
use crate::control::{ActuatorCommand, ControllerConfig};
use crate::error::{Error, Result};
use crate::gasmodel::{slpm_to_slps, FlowResistance, GasConstants, PressureGauge};
use crate::sim::{CommandSignal, Network, Regulation, Scenario};
use crate::sizing::{
    CatalogReservoir, CatalogValve, CatalogVenturi, ComponentCatalog, DesignRequirements,
};

pub const SCHEMA_VERSION: u32 = 1;

fn check_schema(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(Error::invalid(
            "schema_version",
            format!("unsupported version {v}, expected {SCHEMA_VERSION}"),
        ));
    }
    Ok(())
}

fn gauge(field: &str, kpa: f64) -> Result<PressureGauge> {
    PressureGauge::new(kpa).map_err(|e| rename(field, e))
}

fn resistance(field: &str, r: f64) -> Result<FlowResistance> {
    FlowResistance::new(r).map_err(|e| rename(field, e))
}

fn rename(field: &str, e: Error) -> Error {
    match e {
        Error::InvalidInput { reason, .. } => Error::invalid(field, reason),
        other => other,
    }
}

/// Reads and parses a JSON file; parse errors carry line and column.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_json(&text, &path.display().to_string())
}

pub fn parse_json<T: DeserializeOwned>(text: &str, context: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|source| Error::Json {
        context: context.to_string(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasFile {
    pub rho_kg_per_m3: f64,
    #[serde(rename = "R_u_J_per_mol_K")]
    pub r_u_j_per_mol_k: f64,
    #[serde(rename = "T_K")]
    pub t_k: f64,
    #[serde(rename = "M_kg_per_mol")]
    pub m_kg_per_mol: f64,
}

impl Default for GasFile {
    fn default() -> Self {
        GasFile::from(GasConstants::default())
    }
}

impl From<GasConstants> for GasFile {
    fn from(g: GasConstants) -> Self {
        GasFile {
            rho_kg_per_m3: g.rho,
            r_u_j_per_mol_k: g.r_universal,
            t_k: g.temperature,
            m_kg_per_mol: g.molar_mass,
        }
    }
}

impl GasFile {
    pub fn resolve(&self) -> Result<GasConstants> {
        GasConstants::new(
            self.rho_kg_per_m3,
            self.r_u_j_per_mol_k,
            self.t_k,
            self.m_kg_per_mol,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirFile {
    #[serde(rename = "V_r_L")]
    pub v_r_l: f64,
    #[serde(rename = "P_r0_kPa")]
    pub p_r0_kpa: f64,
    /// Hold the pressure constant (regulated bench supply).
    #[serde(default)]
    pub fixed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlVolumeFile {
    #[serde(rename = "V_cv_L")]
    pub v_cv_l: f64,
    #[serde(rename = "P_cv0_kPa", default)]
    pub p_cv0_kpa: f64,
}

/// Flow resistance given directly or as a rated flow at a rated pressure drop.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResistanceFile {
    #[serde(rename = "R_vmin_kPa_s_per_L", skip_serializing_if = "Option::is_none")]
    pub r_kpa_s_per_l: Option<f64>,
    #[serde(rename = "flow_max_slpm", skip_serializing_if = "Option::is_none")]
    pub flow_max_slpm: Option<f64>,
    #[serde(rename = "P_rated_kPa", skip_serializing_if = "Option::is_none")]
    pub p_rated_kpa: Option<f64>,
}

impl ResistanceFile {
    fn resolve(&self, field: &str) -> Result<FlowResistance> {
        match (self.r_kpa_s_per_l, self.flow_max_slpm, self.p_rated_kpa) {
            (Some(r), None, None) => resistance(&format!("{field}.R_vmin_kPa_s_per_L"), r),
            (None, Some(q), Some(p)) => FlowResistance::from_rating(p, q)
                .map_err(|e| rename(&format!("{field}.flow_max_slpm"), e)),
            _ => Err(Error::invalid(
                field,
                "give either R_vmin_kPa_s_per_L or both flow_max_slpm and P_rated_kPa",
            )),
        }
    }

    fn direct(r: FlowResistance) -> Self {
        ResistanceFile {
            r_kpa_s_per_l: Some(r.value()),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProportionalValveFile {
    #[serde(flatten)]
    pub resistance: ResistanceFile,
    #[serde(default)]
    pub deadband: f64,
    /// Defaults to the rated pressure when the rating form is used.
    #[serde(rename = "P_inlet_max_kPa", default, skip_serializing_if = "Option::is_none")]
    pub p_inlet_max_kpa: Option<f64>,
}

impl ProportionalValveFile {
    fn resolve(&self, field: &str) -> Result<ProportionalValveSpec> {
        let r = self.resistance.resolve(field)?;
        let inlet = self
            .p_inlet_max_kpa
            .or(self.resistance.p_rated_kpa)
            .ok_or_else(|| {
                Error::invalid(
                    format!("{field}.P_inlet_max_kPa"),
                    "required when the valve is given by resistance",
                )
            })?;
        let inlet = gauge(&format!("{field}.P_inlet_max_kPa"), inlet)?;
        ProportionalValveSpec::new(r, self.deadband, inlet).map_err(|e| match e {
            Error::InvalidInput { field: f, reason } => Error::invalid(format!("{field}.{f}"), reason),
            other => other,
        })
    }

    fn from_spec(v: &ProportionalValveSpec) -> Self {
        ProportionalValveFile {
            resistance: ResistanceFile::direct(v.r_vmin),
            deadband: v.deadband,
            p_inlet_max_kpa: Some(v.p_inlet_max.kpa()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolenoidFile {
    #[serde(rename = "R_open_kPa_s_per_L")]
    pub r_open_kpa_s_per_l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VenturiFile {
    #[serde(rename = "P_vac_floor_kPa")]
    pub p_vac_floor_kpa: f64,
    #[serde(rename = "Q_motive_rated_slpm", default, skip_serializing_if = "Option::is_none")]
    pub q_motive_rated_slpm: Option<f64>,
    #[serde(rename = "Q_motive_rated_slps", default, skip_serializing_if = "Option::is_none")]
    pub q_motive_rated_slps: Option<f64>,
}

impl VenturiFile {
    fn resolve(&self) -> Result<VenturiSpec> {
        let q = match (self.q_motive_rated_slpm, self.q_motive_rated_slps) {
            (Some(m), None) => slpm_to_slps(m),
            (None, Some(s)) => s,
            _ => {
                return Err(Error::invalid(
                    "venturi",
                    "give exactly one of Q_motive_rated_slpm and Q_motive_rated_slps",
                ))
            }
        };
        VenturiSpec::new(gauge("venturi.P_vac_floor_kPa", self.p_vac_floor_kpa)?, q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorFile {
    #[serde(rename = "range_max_kPa")]
    pub range_max_kpa: f64,
    #[serde(rename = "noise_std_kPa", default)]
    pub noise_std_kpa: f64,
    #[serde(default)]
    pub seed: u64,
}

impl From<SensorSpec> for SensorFile {
    fn from(s: SensorSpec) -> Self {
        SensorFile {
            range_max_kpa: s.range_max.kpa(),
            noise_std_kpa: s.noise_std,
            seed: s.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerFile {
    ClosedLoop {
        #[serde(default = "default_kp")]
        kp: f64,
        #[serde(default = "default_ki")]
        ki: f64,
        #[serde(default)]
        kd: f64,
        #[serde(rename = "error_cutoff_kPa", default = "default_cutoff")]
        error_cutoff_kpa: f64,
        #[serde(rename = "control_rate_Hz", default = "default_rate")]
        control_rate_hz: f64,
        #[serde(rename = "settle_horizon_s", default = "default_horizon")]
        settle_horizon_s: f64,
        #[serde(rename = "active_deflation_threshold_kPa_per_s", default)]
        active_deflation_threshold: f64,
        #[serde(rename = "integrator_limit_kPa_s", default = "default_ilimit")]
        integrator_limit: f64,
    },
    /// Controller disabled, valve commands held for the whole run.
    Fixed {
        #[serde(default)]
        u_evp: f64,
        #[serde(default)]
        u_dvp: f64,
        #[serde(default)]
        solenoid: f64,
    },
}

fn default_kp() -> f64 {
    ControllerConfig::default().kp
}
fn default_ki() -> f64 {
    ControllerConfig::default().ki
}
fn default_cutoff() -> f64 {
    ControllerConfig::default().error_cutoff
}
fn default_rate() -> f64 {
    ControllerConfig::default().control_rate
}
fn default_horizon() -> f64 {
    ControllerConfig::default().settle_horizon
}
fn default_ilimit() -> f64 {
    ControllerConfig::default().integrator_limit
}

impl ControllerFile {
    fn resolve(&self) -> Result<Regulation> {
        Ok(match *self {
            ControllerFile::ClosedLoop {
                kp,
                ki,
                kd,
                error_cutoff_kpa,
                control_rate_hz,
                settle_horizon_s,
                active_deflation_threshold,
                integrator_limit,
            } => {
                let cfg = ControllerConfig {
                    kp,
                    ki,
                    kd,
                    error_cutoff: error_cutoff_kpa,
                    control_rate: control_rate_hz,
                    settle_horizon: settle_horizon_s,
                    active_deflation_rate_threshold: active_deflation_threshold,
                    integrator_limit,
                };
                cfg.validate()?;
                Regulation::ClosedLoop(cfg)
            }
            ControllerFile::Fixed {
                u_evp,
                u_dvp,
                solenoid,
            } => Regulation::OpenLoop(ActuatorCommand {
                u_evp,
                u_dvp,
                solenoid_duty: solenoid,
            }),
        })
    }

    fn from_regulation(r: &Regulation) -> Self {
        match *r {
            Regulation::ClosedLoop(c) => ControllerFile::ClosedLoop {
                kp: c.kp,
                ki: c.ki,
                kd: c.kd,
                error_cutoff_kpa: c.error_cutoff,
                control_rate_hz: c.control_rate,
                settle_horizon_s: c.settle_horizon,
                active_deflation_threshold: c.active_deflation_rate_threshold,
                integrator_limit: c.integrator_limit,
            },
            Regulation::OpenLoop(cmd) => ControllerFile::Fixed {
                u_evp: cmd.u_evp,
                u_dvp: cmd.u_dvp,
                solenoid: cmd.solenoid_duty,
            },
        }
    }
}

impl Default for ControllerFile {
    fn default() -> Self {
        ControllerFile::from_regulation(&Regulation::ClosedLoop(ControllerConfig::default()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CommandFile {
    Step {
        #[serde(rename = "before_kPa", default)]
        before_kpa: f64,
        #[serde(rename = "target_kPa")]
        target_kpa: f64,
        #[serde(rename = "start_s", default)]
        start_s: f64,
    },
    /// Offset defaults to the amplitude, so the sine starts at 0 kPa.
    Sine {
        #[serde(rename = "A_kPa")]
        a_kpa: f64,
        #[serde(rename = "omega_Hz")]
        omega_hz: f64,
        #[serde(rename = "offset_kPa", default, skip_serializing_if = "Option::is_none")]
        offset_kpa: Option<f64>,
    },
    /// `[time_s, pressure_kPa]` pairs held until the next knot.
    Piecewise { knots: Vec<(f64, f64)> },
}

impl CommandFile {
    fn resolve(&self) -> Result<CommandSignal> {
        let c = match self {
            CommandFile::Step {
                before_kpa,
                target_kpa,
                start_s,
            } => CommandSignal::Step {
                before: *before_kpa,
                target: *target_kpa,
                start: *start_s,
            },
            CommandFile::Sine {
                a_kpa,
                omega_hz,
                offset_kpa,
            } => CommandSignal::Sine {
                amplitude: *a_kpa,
                omega: *omega_hz,
                offset: offset_kpa.unwrap_or(*a_kpa),
            },
            CommandFile::Piecewise { knots } => CommandSignal::Piecewise {
                knots: knots.clone(),
            },
        };
        c.validate()?;
        Ok(c)
    }

    fn from_signal(c: &CommandSignal) -> Self {
        match c {
            CommandSignal::Step {
                before,
                target,
                start,
            } => CommandFile::Step {
                before_kpa: *before,
                target_kpa: *target,
                start_s: *start,
            },
            CommandSignal::Sine {
                amplitude,
                omega,
                offset,
            } => CommandFile::Sine {
                a_kpa: *amplitude,
                omega_hz: *omega,
                offset_kpa: Some(*offset),
            },
            CommandSignal::Piecewise { knots } => CommandFile::Piecewise {
                knots: knots.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationFile {
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    pub duration_s: f64,
    #[serde(rename = "sample_rate_Hz", default = "default_sample_rate")]
    pub sample_rate_hz: f64,
}

fn default_dt() -> f64 {
    5e-4
}
fn default_sample_rate() -> f64 {
    1000.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    #[serde(rename = "omegas_Hz", default)]
    pub omegas_hz: Vec<f64>,
    #[serde(default = "default_periods")]
    pub n_periods: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_true")]
    pub hold_reservoir: bool,
}

fn default_periods() -> usize {
    SweepOptions::default().n_periods
}
fn default_repeats() -> usize {
    SweepOptions::default().repeats
}
fn default_true() -> bool {
    true
}

impl Default for SweepFile {
    fn default() -> Self {
        SweepFile {
            omegas_hz: Vec::new(),
            n_periods: default_periods(),
            repeats: default_repeats(),
            hold_reservoir: true,
        }
    }
}

impl SweepFile {
    pub fn options(&self) -> Result<SweepOptions> {
        if self.n_periods < 3 {
            return Err(Error::invalid(
                "sweep.n_periods",
                format!("need at least 3 analysis periods, got {}", self.n_periods),
            ));
        }
        if self.repeats == 0 {
            return Err(Error::invalid("sweep.repeats", "must be at least 1"));
        }
        Ok(SweepOptions {
            n_periods: self.n_periods,
            repeats: self.repeats,
            hold_reservoir: self.hold_reservoir,
        })
    }
}

/// Scenario file. Sections other than the reservoir, control volume, inflation
/// valve, command and integration default to the reference hardware.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default)]
    pub gas: GasFile,
    pub reservoir: ReservoirFile,
    pub control_volume: ControlVolumeFile,
    pub evp: ProportionalValveFile,
    #[serde(default = "default_dvp")]
    pub dvp: ProportionalValveFile,
    #[serde(default = "default_solenoid")]
    pub solenoid: SolenoidFile,
    #[serde(default = "default_venturi")]
    pub venturi: VenturiFile,
    #[serde(default = "default_sensor")]
    pub sensor: SensorFile,
    #[serde(default)]
    pub controller: ControllerFile,
    pub command: CommandFile,
    pub integration: IntegrationFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepFile>,
}

fn default_dvp() -> ProportionalValveFile {
    ProportionalValveFile::from_spec(&Network::reference().dvp)
}
fn default_solenoid() -> SolenoidFile {
    SolenoidFile {
        r_open_kpa_s_per_l: Network::reference().solenoid.r_open.value(),
    }
}
fn default_venturi() -> VenturiFile {
    let v = Network::reference().venturi;
    VenturiFile {
        p_vac_floor_kpa: v.p_vac_floor.kpa(),
        q_motive_rated_slpm: None,
        q_motive_rated_slps: Some(v.q_motive_rated),
    }
}
fn default_sensor() -> SensorFile {
    Network::reference().cv_sensor.into()
}

/// Command-line values that replace file values before resolution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Overrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self> {
        let f: ScenarioFile = read_json(path)?;
        check_schema(f.schema_version)?;
        Ok(f)
    }

    pub fn parse(text: &str, context: &str) -> Result<Self> {
        let f: ScenarioFile = parse_json(text, context)?;
        check_schema(f.schema_version)?;
        Ok(f)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.dt {
            self.integration.dt_s = v;
        }
        if let Some(v) = o.duration {
            self.integration.duration_s = v;
        }
        if let Some(v) = o.sample_rate {
            self.integration.sample_rate_hz = v;
        }
        if let Some(v) = o.seed {
            self.sensor.seed = v;
        }
    }

    pub fn resolve(&self) -> Result<Scenario> {
        check_schema(self.schema_version)?;
        let gas = self.gas.resolve()?;
        let reservoir = Reservoir::new(
            self.reservoir.v_r_l,
            gauge("reservoir.P_r0_kPa", self.reservoir.p_r0_kpa)?,
            self.reservoir.fixed,
        )?;
        let control_volume = ControlVolume::new(
            self.control_volume.v_cv_l,
            gauge("control_volume.P_cv0_kPa", self.control_volume.p_cv0_kpa)?,
        )?;
        let network = Network {
            gas,
            reservoir,
            control_volume,
            evp: self.evp.resolve("evp")?,
            dvp: self.dvp.resolve("dvp")?,
            solenoid: BinaryValveSpec {
                r_open: resistance("solenoid.R_open_kPa_s_per_L", self.solenoid.r_open_kpa_s_per_l)?,
            },
            venturi: self.venturi.resolve()?,
            cv_sensor: SensorSpec::new(
                gauge("sensor.range_max_kPa", self.sensor.range_max_kpa)?,
                self.sensor.noise_std_kpa,
                self.sensor.seed,
            )?,
        };
        let scn = Scenario {
            network,
            regulation: self.controller.resolve()?,
            command: self.command.resolve()?,
            dt: self.integration.dt_s,
            duration: self.integration.duration_s,
            sample_rate: self.integration.sample_rate_hz,
        };
        scn.validate()?;
        if let Some(s) = &self.sweep {
            s.options()?;
        }
        Ok(scn)
    }

    /// Fully explicit file describing `scn`, in canonical units.
    pub fn from_scenario(scn: &Scenario, sweep: Option<SweepFile>) -> Self {
        let net = &scn.network;
        ScenarioFile {
            schema_version: SCHEMA_VERSION,
            gas: net.gas.into(),
            reservoir: ReservoirFile {
                v_r_l: net.reservoir.volume,
                p_r0_kpa: net.reservoir.p_initial.kpa(),
                fixed: net.reservoir.fixed,
            },
            control_volume: ControlVolumeFile {
                v_cv_l: net.control_volume.volume,
                p_cv0_kpa: net.control_volume.p_initial.kpa(),
            },
            evp: ProportionalValveFile::from_spec(&net.evp),
            dvp: ProportionalValveFile::from_spec(&net.dvp),
            solenoid: SolenoidFile {
                r_open_kpa_s_per_l: net.solenoid.r_open.value(),
            },
            venturi: VenturiFile {
                p_vac_floor_kpa: net.venturi.p_vac_floor.kpa(),
                q_motive_rated_slpm: None,
                q_motive_rated_slps: Some(net.venturi.q_motive_rated),
            },
            sensor: net.cv_sensor.into(),
            controller: ControllerFile::from_regulation(&scn.regulation),
            command: CommandFile::from_signal(&scn.command),
            integration: IntegrationFile {
                dt_s: scn.dt,
                duration_s: scn.duration,
                sample_rate_hz: scn.sample_rate,
            },
            sweep,
        }
    }

    /// Canonical form: every default materialized, every unit canonical.
    pub fn canonical(&self) -> Result<Self> {
        Ok(ScenarioFile::from_scenario(&self.resolve()?, self.sweep.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequirementsFile {
    pub schema_version: u32,
    #[serde(default)]
    pub gas: GasFile,
    #[serde(rename = "V_cv_L")]
    pub v_cv_l: f64,
    #[serde(rename = "dP_cv_kPa")]
    pub dp_cv_kpa: f64,
    #[serde(rename = "Pdot_d_kPa_per_s", default, skip_serializing_if = "Option::is_none")]
    pub pdot_d: Option<f64>,
    #[serde(rename = "A_kPa", default, skip_serializing_if = "Option::is_none")]
    pub a_kpa: Option<f64>,
    #[serde(rename = "omega_target_Hz", default, skip_serializing_if = "Option::is_none")]
    pub omega_target_hz: Option<f64>,
    #[serde(default)]
    pub min_cycles: f64,
}

impl RequirementsFile {
    pub fn load(path: &Path) -> Result<Self> {
        let f: RequirementsFile = read_json(path)?;
        check_schema(f.schema_version)?;
        Ok(f)
    }

    pub fn resolve(&self) -> Result<(DesignRequirements, GasConstants)> {
        check_schema(self.schema_version)?;
        let req = DesignRequirements {
            v_cv: self.v_cv_l,
            dp_cv: self.dp_cv_kpa,
            pdot_d: self.pdot_d,
            amplitude: self.a_kpa,
            omega_target: self.omega_target_hz,
            min_cycles: self.min_cycles,
        };
        req.validate()?;
        Ok((req, self.gas.resolve()?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogValveFile {
    pub name: String,
    #[serde(flatten)]
    pub resistance: ResistanceFile,
    pub mass_g: f64,
    #[serde(rename = "P_inlet_max_kPa", default, skip_serializing_if = "Option::is_none")]
    pub p_inlet_max_kpa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogReservoirFile {
    pub name: String,
    #[serde(rename = "V_r_L")]
    pub v_r_l: f64,
    pub mass_g: f64,
    #[serde(rename = "P_max_kPa")]
    pub p_max_kpa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogVenturiFile {
    pub name: String,
    pub mass_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogFile {
    pub schema_version: u32,
    pub valves: Vec<CatalogValveFile>,
    pub reservoirs: Vec<CatalogReservoirFile>,
    #[serde(default)]
    pub venturis: Vec<CatalogVenturiFile>,
}

impl CatalogFile {
    pub fn load(path: &Path) -> Result<Self> {
        let f: CatalogFile = read_json(path)?;
        check_schema(f.schema_version)?;
        Ok(f)
    }

    pub fn resolve(&self) -> Result<ComponentCatalog> {
        check_schema(self.schema_version)?;
        let valves = self
            .valves
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let field = format!("valves[{i}]");
                let inlet = v.p_inlet_max_kpa.or(v.resistance.p_rated_kpa).ok_or_else(|| {
                    Error::invalid(
                        format!("{field}.P_inlet_max_kPa"),
                        "required when the valve is given by resistance",
                    )
                })?;
                Ok(CatalogValve {
                    name: v.name.clone(),
                    r_vmin: v.resistance.resolve(&field)?,
                    mass_g: v.mass_g,
                    p_inlet_max: gauge(&format!("{field}.P_inlet_max_kPa"), inlet)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let reservoirs = self
            .reservoirs
            .iter()
            .enumerate()
            .map(|(i, r)| {
                Ok(CatalogReservoir {
                    name: r.name.clone(),
                    volume: r.v_r_l,
                    mass_g: r.mass_g,
                    p_max: gauge(&format!("reservoirs[{i}].P_max_kPa"), r.p_max_kpa)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let venturis = self
            .venturis
            .iter()
            .map(|v| CatalogVenturi {
                name: v.name.clone(),
                mass_g: v.mass_g,
            })
            .collect();
        let cat = ComponentCatalog {
            valves,
            reservoirs,
            venturis,
        };
        cat.validate()?;
        Ok(cat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STEP: &str = r#"{
        "schema_version": 1,
        "reservoir": {"V_r_L": 2.0, "P_r0_kPa": 689},
        "control_volume": {"V_cv_L": 0.5},
        "evp": {"flow_max_slpm": 23.5, "P_rated_kPa": 689},
        "command": {"kind": "step", "target_kPa": 69},
        "integration": {"duration_s": 3.0}
    }"#;

    #[test]
    fn minimal_file_matches_reference_network() {
        let scn = ScenarioFile::parse(STEP, "step").unwrap().resolve().unwrap();
        let mut reference = Network::reference();
        reference.venturi = scn.network.venturi;
        assert_eq!(scn.network, reference);
        assert!((scn.network.venturi.q_motive_rated - 67.0 / 60.0).abs() < 1e-15);
        assert!((scn.network.evp.r_vmin.value() - 1759.149).abs() < 1e-3);
        assert_eq!(scn.dt, 5e-4);
        assert_eq!(scn.regulation, Regulation::ClosedLoop(ControllerConfig::default()));
    }

    #[test]
    fn unknown_key_rejected_with_location() {
        let bad = STEP.replace("\"V_cv_L\"", "\"V_cv_psi\"");
        let err = ScenarioFile::parse(&bad, "step").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("V_cv_psi"), "{msg}");
        assert!(msg.contains("line"), "{msg}");
        assert_eq!(err.exit_code(), 2);
        let bad = STEP.replace("\"kind\": \"step\"", "\"kind\": \"step\", \"amp\": 3");
        assert!(ScenarioFile::parse(&bad, "step").is_err());
        let bad = STEP.replace("\"P_rated_kPa\": 689", "\"P_rated_kPa\": 689, \"flow_max_scfm\": 1");
        assert!(ScenarioFile::parse(&bad, "step").is_err());
    }

    #[test]
    fn negative_volume_names_field() {
        let bad = STEP.replace("\"V_cv_L\": 0.5", "\"V_cv_L\": -0.5");
        let err = ScenarioFile::parse(&bad, "step").unwrap().resolve().unwrap_err();
        assert!(err.to_string().contains("V_cv"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn schema_version_enforced() {
        let bad = STEP.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(ScenarioFile::parse(&bad, "step").is_err());
        let missing = STEP.replace("\"schema_version\": 1,", "");
        assert!(ScenarioFile::parse(&missing, "step").is_err());
    }

    #[test]
    fn valve_forms_are_exclusive() {
        let both = STEP.replace(
            "\"flow_max_slpm\": 23.5",
            "\"flow_max_slpm\": 23.5, \"R_vmin_kPa_s_per_L\": 100",
        );
        assert!(ScenarioFile::parse(&both, "x").unwrap().resolve().is_err());
        let bare = STEP.replace(
            "\"flow_max_slpm\": 23.5, \"P_rated_kPa\": 689",
            "\"R_vmin_kPa_s_per_L\": 1759.2",
        );
        assert!(ScenarioFile::parse(&bare, "x").unwrap().resolve().is_err());
    }

    #[test]
    fn overrides_apply_before_resolution() {
        let mut f = ScenarioFile::parse(STEP, "step").unwrap();
        f.apply(&Overrides {
            dt: Some(2.5e-4),
            duration: Some(1.0),
            sample_rate: Some(500.0),
            seed: Some(9),
        });
        let scn = f.resolve().unwrap();
        assert_eq!((scn.dt, scn.duration, scn.sample_rate), (2.5e-4, 1.0, 500.0));
        assert_eq!(scn.network.cv_sensor.seed, 9);
    }

    #[test]
    fn fixed_controller_and_sine() {
        let text = STEP
            .replace(
                "\"command\": {\"kind\": \"step\", \"target_kPa\": 69}",
                "\"command\": {\"kind\": \"sine\", \"A_kPa\": 21, \"omega_Hz\": 1.0}",
            )
            .replace(
                "\"integration\"",
                "\"controller\": {\"kind\": \"fixed\", \"u_dvp\": 1.0}, \"integration\"",
            );
        let scn = ScenarioFile::parse(&text, "x").unwrap().resolve().unwrap();
        assert_eq!(scn.command, CommandSignal::sine_from_zero(21.0, 1.0));
        assert_eq!(
            scn.regulation,
            Regulation::OpenLoop(ActuatorCommand {
                u_evp: 0.0,
                u_dvp: 1.0,
                solenoid_duty: 0.0
            })
        );
    }

    #[test]
    fn requirements_and_catalog() {
        let req: RequirementsFile = parse_json(
            r#"{"schema_version": 1, "V_cv_L": 0.1, "dP_cv_kPa": 20.7, "omega_target_Hz": 0.55}"#,
            "req",
        )
        .unwrap();
        let (r, _) = req.resolve().unwrap();
        assert!((r.desired_rate().unwrap() - 35.77).abs() < 0.01);

        let cat: CatalogFile = parse_json(
            r#"{"schema_version": 1,
                "valves": [{"name": "EVP", "flow_max_slpm": 23.5, "P_rated_kPa": 689, "mass_g": 120}],
                "reservoirs": [{"name": "2L", "V_r_L": 2, "mass_g": 800, "P_max_kPa": 689}]}"#,
            "cat",
        )
        .unwrap();
        let c = cat.resolve().unwrap();
        assert_eq!(c.valves[0].p_inlet_max.kpa(), 689.0);
        let empty: CatalogFile =
            parse_json(r#"{"schema_version": 1, "valves": [], "reservoirs": []}"#, "cat").unwrap();
        assert!(empty.resolve().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_command() -> impl Strategy<Value = CommandFile> {
            prop_oneof![
                (0.0f64..50.0, 0.0f64..200.0, 0.0f64..2.0).prop_map(|(b, t, s)| CommandFile::Step {
                    before_kpa: b,
                    target_kpa: t,
                    start_s: s
                }),
                (0.1f64..50.0, 0.01f64..20.0).prop_map(|(a, w)| CommandFile::Sine {
                    a_kpa: a,
                    omega_hz: w,
                    offset_kpa: None
                }),
                proptest::collection::vec(0.0f64..200.0, 1..5).prop_map(|ps| CommandFile::Piecewise {
                    knots: ps.iter().enumerate().map(|(i, p)| (i as f64 * 0.37, *p)).collect()
                }),
            ]
        }

        proptest! {
            #[test]
            fn parse_serialize_parse_is_identity(
                v_r in 0.1f64..10.0, p_r in 1.0f64..900.0, v_cv in 0.01f64..5.0,
                slpm in 1.0f64..200.0, rated in 100.0f64..900.0, slpm_v in 1.0f64..200.0,
                floor in -100.0f64..-1.0, seed in any::<u64>(), noise in 0.0f64..2.0,
                command in arb_command(), fixed in any::<bool>(),
            ) {
                let mut f = ScenarioFile::parse(STEP, "step").unwrap();
                f.reservoir = ReservoirFile { v_r_l: v_r, p_r0_kpa: p_r, fixed };
                f.control_volume.v_cv_l = v_cv;
                f.evp.resistance = ResistanceFile {
                    r_kpa_s_per_l: None, flow_max_slpm: Some(slpm), p_rated_kpa: Some(rated),
                };
                f.venturi = VenturiFile {
                    p_vac_floor_kpa: floor, q_motive_rated_slpm: Some(slpm_v), q_motive_rated_slps: None,
                };
                f.sensor.seed = seed;
                f.sensor.noise_std_kpa = noise;
                f.command = command;
                let first = f.resolve().unwrap();
                let text = serde_json::to_string_pretty(&f.canonical().unwrap()).unwrap();
                let second = ScenarioFile::parse(&text, "rt").unwrap().resolve().unwrap();
                prop_assert_eq!(first, second);
            }
        }
    }
}
