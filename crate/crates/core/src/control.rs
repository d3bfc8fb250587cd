//! Hybrid regulator: full-flow on-off inflation and deflation for large
//! errors, PID inside the error band.
//!
//! Deflation first tries passive venting through the solenoid alone and only
//! drives the Venturi (DVP open) when venting cannot meet the required rate.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{non_negative, positive, Result};
use crate::gasmodel::{FlowResistance, GasConstants};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// Proportional gain, 1/kPa.
    pub kp: f64,
    /// Integral gain, 1/(kPa·s).
    pub ki: f64,
    /// Derivative gain, s/kPa.
    pub kd: f64,
    /// Error magnitude above which the on-off branch takes over, kPa.
    pub error_cutoff: f64,
    /// Hz.
    pub control_rate: f64,
    /// Horizon over which a deflation error is expected to be recovered, s.
    pub settle_horizon: f64,
    /// Margin the required deflation rate must exceed the venting capability by, kPa/s.
    pub active_deflation_rate_threshold: f64,
    /// Bound on the integrator magnitude, kPa·s.
    pub integrator_limit: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            kp: 0.05,
            ki: 0.5,
            kd: 0.0,
            error_cutoff: 1.0,
            control_rate: 1000.0,
            settle_horizon: 0.2,
            active_deflation_rate_threshold: 0.0,
            integrator_limit: 2.0,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        non_negative("controller.kp", self.kp)?;
        non_negative("controller.ki", self.ki)?;
        non_negative("controller.kd", self.kd)?;
        positive("controller.error_cutoff_kPa", self.error_cutoff)?;
        positive("controller.control_rate_Hz", self.control_rate)?;
        positive("controller.settle_horizon_s", self.settle_horizon)?;
        non_negative(
            "controller.active_deflation_rate_threshold_kPa_s",
            self.active_deflation_rate_threshold,
        )?;
        positive("controller.integrator_limit_kPa_s", self.integrator_limit)?;
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1.0 / self.control_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Pid,
    OnOffInflate,
    Vent,
    ActiveDeflate,
    Idle,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Pid => "PID",
            Mode::OnOffInflate => "ON_OFF_INFLATE",
            Mode::Vent => "VENT",
            Mode::ActiveDeflate => "ACTIVE_DEFLATE",
            Mode::Idle => "IDLE",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    /// Integrated error, kPa·s.
    pub integrator: f64,
    pub prev_error: f64,
    pub mode: Mode,
}

impl Default for ControllerState {
    fn default() -> Self {
        ControllerState {
            integrator: 0.0,
            prev_error: 0.0,
            mode: Mode::Idle,
        }
    }
}

/// Valve commands held until the next control instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActuatorCommand {
    /// Inflation valve command, [0, 1].
    pub u_evp: f64,
    /// Venturi drive valve command, [0, 1].
    pub u_dvp: f64,
    /// Fraction of the control period the solenoid is open, [0, 1].
    /// On-off branches use 0 or 1; negative PID output maps to a partial duty.
    pub solenoid_duty: f64,
}

impl ActuatorCommand {
    pub const CLOSED: ActuatorCommand = ActuatorCommand {
        u_evp: 0.0,
        u_dvp: 0.0,
        solenoid_duty: 0.0,
    };

    pub fn solenoid_open(&self) -> bool {
        self.solenoid_duty > 0.0
    }
}

/// What the controller knows about the vent path, used to estimate how fast
/// passive venting can deflate the control volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VentModel {
    pub r_open: FlowResistance,
    pub v_cv: f64,
    pub gas: GasConstants,
}

/// Deflation rate available from venting to atmosphere at `p_cv`, kPa/s.
pub fn passive_vent_capability(
    p_cv: f64,
    r_open: FlowResistance,
    v_cv: f64,
    gc: &GasConstants,
) -> Result<f64> {
    positive("V_cv", v_cv)?;
    Ok(gc.alpha() * p_cv.max(0.0) / (r_open.value() * v_cv))
}

/// Deflation rate the controller asks for at error `e` (negative) while the
/// command moves at `cmd_rate_hint`.
pub fn required_deflation_rate(e: f64, cmd_rate_hint: f64, cfg: &ControllerConfig) -> f64 {
    let urgency = cmd_rate_hint.abs() + e.abs() / cfg.settle_horizon;
    (e.abs() * cfg.control_rate).min(urgency)
}

/// One controller tick at period `1 / cfg.control_rate`.
pub fn control_step(
    p_cmd: f64,
    p_meas: f64,
    cmd_rate_hint: f64,
    cfg: &ControllerConfig,
    vent: &VentModel,
    state: ControllerState,
) -> (ActuatorCommand, ControllerState) {
    if !(p_cmd.is_finite() && p_meas.is_finite() && cmd_rate_hint.is_finite()) {
        let next = ControllerState {
            mode: Mode::Idle,
            ..state
        };
        return (ActuatorCommand::CLOSED, next);
    }

    let e = p_cmd - p_meas;

    if e > cfg.error_cutoff {
        let cmd = ActuatorCommand {
            u_evp: 1.0,
            ..ActuatorCommand::CLOSED
        };
        return (cmd, with_mode(state, Mode::OnOffInflate, e));
    }

    if e < -cfg.error_cutoff {
        let required = required_deflation_rate(e, cmd_rate_hint, cfg);
        // an invalid vent model never justifies burning reservoir air
        let capability = passive_vent_capability(p_meas, vent.r_open, vent.v_cv, &vent.gas)
            .unwrap_or(f64::INFINITY);
        let active = required > capability + cfg.active_deflation_rate_threshold;
        let (cmd, mode) = if active {
            let cmd = ActuatorCommand {
                u_evp: 0.0,
                u_dvp: 1.0,
                solenoid_duty: 1.0,
            };
            (cmd, Mode::ActiveDeflate)
        } else {
            let cmd = ActuatorCommand {
                solenoid_duty: 1.0,
                ..ActuatorCommand::CLOSED
            };
            (cmd, Mode::Vent)
        };
        return (cmd, with_mode(state, mode, e));
    }

    let dt = cfg.period();
    let (integrator, prev_error) = if state.mode == Mode::Pid {
        (state.integrator, state.prev_error)
    } else {
        // bumpless entry: fresh integrator, no derivative kick
        (0.0, e)
    };
    let derivative = (e - prev_error) / dt;
    let candidate = (integrator + e * dt).clamp(-cfg.integrator_limit, cfg.integrator_limit);
    let unsaturated = cfg.kp * e + cfg.ki * candidate + cfg.kd * derivative;
    // conditional integration: hold the integrator while the output is pinned
    // and the error would push it further
    let integrator = if unsaturated.abs() > 1.0 && unsaturated.signum() == e.signum() {
        integrator.clamp(-cfg.integrator_limit, cfg.integrator_limit)
    } else {
        candidate
    };
    let output = cfg.kp * e + cfg.ki * integrator + cfg.kd * derivative;

    let cmd = if output > 0.0 {
        ActuatorCommand {
            u_evp: output.min(1.0),
            ..ActuatorCommand::CLOSED
        }
    } else if output < 0.0 {
        ActuatorCommand {
            solenoid_duty: (-output).min(1.0),
            ..ActuatorCommand::CLOSED
        }
    } else {
        ActuatorCommand::CLOSED
    };
    let next = ControllerState {
        integrator,
        prev_error: e,
        mode: Mode::Pid,
    };
    (cmd, next)
}

fn with_mode(state: ControllerState, mode: Mode, e: f64) -> ControllerState {
    ControllerState {
        integrator: if mode == Mode::Pid { state.integrator } else { 0.0 },
        prev_error: e,
        mode,
    }
}
