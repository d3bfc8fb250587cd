//! Fixed-step simulation of the reservoir / valve / control-volume / Venturi
//! network under the hybrid controller.
//!
//! The plant is integrated with classical RK4 at `dt`. The controller runs on
//! its own clock and its command is held constant between control instants,
//! so every RK4 step sees a single actuator command. Flows are also integrated
//! separately with the trapezoid rule so that [`mass_balance`] can compare the
//! pressure states against an independent air ledger.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::components::{
    BinaryValveSpec, ControlVolume, PressureSensor, ProportionalValveSpec,
    Reservoir, SensorSpec, VenturiSpec,
};
use crate::control::{
    control_step, ActuatorCommand, ControllerConfig, ControllerState, Mode, VentModel,
};
use crate::error::{finite, non_negative, positive, Error, Result};
use crate::gasmodel::{
    slpm_to_slps, FlowResistance, GasConstants, PressureGauge, VACUUM_GAUGE_KPA,
};

/// Pressure command seen by the controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CommandSignal {
    /// `before` until `start`, `target` afterwards.
    Step { before: f64, target: f64, start: f64 },
    /// `amplitude * sin(2 pi omega t) + offset`.
    Sine {
        amplitude: f64,
        omega: f64,
        offset: f64,
    },
    /// Zero-order hold through `(time, value)` knots, sorted by time.
    Piecewise { knots: Vec<(f64, f64)> },
}

impl CommandSignal {
    /// Sine whose minimum sits at 0 kPa.
    pub fn sine_from_zero(amplitude: f64, omega: f64) -> Self {
        CommandSignal::Sine {
            amplitude,
            omega,
            offset: amplitude,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CommandSignal::Step {
                before,
                target,
                start,
            } => {
                non_negative("command.before_kPa", *before)?;
                non_negative("command.target_kPa", *target)?;
                non_negative("command.start_s", *start)?;
            }
            CommandSignal::Sine {
                amplitude,
                omega,
                offset,
            } => {
                non_negative("command.A_kPa", *amplitude)?;
                positive("command.omega_Hz", *omega)?;
                finite("command.c_kPa", *offset)?;
                if offset < amplitude {
                    return Err(Error::invalid(
                        "command.c_kPa",
                        format!("offset {offset} below amplitude {amplitude} commands negative pressure"),
                    ));
                }
            }
            CommandSignal::Piecewise { knots } => {
                if knots.is_empty() {
                    return Err(Error::invalid("command.knots", "at least one knot required"));
                }
                for (i, &(t, v)) in knots.iter().enumerate() {
                    non_negative(&format!("command.knots[{i}].t_s"), t)?;
                    non_negative(&format!("command.knots[{i}].P_kPa"), v)?;
                    if i > 0 && t <= knots[i - 1].0 {
                        return Err(Error::invalid(
                            format!("command.knots[{i}].t_s"),
                            "knot times must be strictly increasing",
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            CommandSignal::Step {
                before,
                target,
                start,
            } => {
                if t >= *start {
                    *target
                } else {
                    *before
                }
            }
            CommandSignal::Sine {
                amplitude,
                omega,
                offset,
            } => amplitude * (2.0 * PI * omega * t).sin() + offset,
            CommandSignal::Piecewise { knots } => {
                let idx = knots.partition_point(|&(kt, _)| kt <= t);
                knots[idx.saturating_sub(1)].1
            }
        }
    }

    /// Time derivative of the command, ignoring the jumps of steps and holds.
    pub fn rate(&self, t: f64) -> f64 {
        match self {
            CommandSignal::Sine {
                amplitude, omega, ..
            } => 2.0 * PI * omega * amplitude * (2.0 * PI * omega * t).cos(),
            _ => 0.0,
        }
    }
}

/// Physical plant: one reservoir feeding one control volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub gas: GasConstants,
    pub reservoir: Reservoir,
    pub control_volume: ControlVolume,
    /// Inflation valve, reservoir to control volume.
    pub evp: ProportionalValveSpec,
    /// Venturi drive valve, reservoir to Venturi inlet.
    pub dvp: ProportionalValveSpec,
    /// Solenoid between the control volume and the Venturi suction port.
    pub solenoid: BinaryValveSpec,
    pub venturi: VenturiSpec,
    pub cv_sensor: SensorSpec,
}

impl Network {
    /// Prototype hardware: 2 L bottle at 689 kPa, EVP rated 23.5 SLPM and DVP
    /// rated 67 SLPM at 689 kPa, 100 kPa·s/L solenoid, 0.5 L control volume.
    pub fn reference() -> Self {
        let p = |v: f64| PressureGauge::new(v).expect("constant");
        let valve = |slpm: f64| ProportionalValveSpec {
            r_vmin: FlowResistance::from_rating(689.0, slpm).expect("constant"),
            deadband: 0.0,
            p_inlet_max: p(689.0),
        };
        Network {
            gas: GasConstants::default(),
            reservoir: Reservoir {
                volume: 2.0,
                p_initial: p(689.0),
                fixed: false,
            },
            control_volume: ControlVolume {
                volume: 0.5,
                p_initial: p(0.0),
            },
            evp: valve(23.5),
            dvp: valve(67.0),
            solenoid: BinaryValveSpec {
                r_open: FlowResistance::new(100.0).expect("constant"),
            },
            venturi: VenturiSpec {
                p_vac_floor: p(-80.0),
                q_motive_rated: slpm_to_slps(67.0),
            },
            cv_sensor: SensorSpec::control_volume_default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.gas.validate()?;
        Reservoir::new(
            self.reservoir.volume,
            self.reservoir.p_initial,
            self.reservoir.fixed,
        )?;
        ControlVolume::new(self.control_volume.volume, self.control_volume.p_initial)?;
        for (name, v) in [("evp", &self.evp), ("dvp", &self.dvp)] {
            ProportionalValveSpec::new(v.r_vmin, v.deadband, v.p_inlet_max)
                .map_err(|e| prefix(name, e))?;
        }
        VenturiSpec::new(self.venturi.p_vac_floor, self.venturi.q_motive_rated)?;
        SensorSpec::new(
            self.cv_sensor.range_max,
            self.cv_sensor.noise_std,
            self.cv_sensor.seed,
        )?;
        Ok(())
    }

    pub fn vent_model(&self) -> VentModel {
        VentModel {
            r_open: self.solenoid.r_open,
            v_cv: self.control_volume.volume,
            gas: self.gas,
        }
    }
}

fn prefix(name: &str, e: Error) -> Error {
    match e {
        Error::InvalidInput { field, reason } => Error::InvalidInput {
            field: format!("{name}.{field}"),
            reason,
        },
        other => other,
    }
}

/// How valve commands are produced during a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Regulation {
    ClosedLoop(ControllerConfig),
    /// Controller disabled; the command is held for the whole run.
    OpenLoop(ActuatorCommand),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub network: Network,
    pub regulation: Regulation,
    pub command: CommandSignal,
    /// Integration step, s.
    pub dt: f64,
    /// s.
    pub duration: f64,
    /// Output rate, Hz.
    pub sample_rate: f64,
}

/// Integer ratio `coarse / fine`, tolerant to float representation.
fn step_ratio(field: &str, coarse: f64, fine: f64) -> Result<u64> {
    let ratio = coarse / fine;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-6 * n {
        return Err(Error::invalid(
            field,
            format!("must be an integer multiple of dt ({coarse} / {fine} = {ratio})"),
        ));
    }
    Ok(n as u64)
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.command.validate()?;
        positive("integration.dt_s", self.dt)?;
        positive("integration.duration_s", self.duration)?;
        positive("integration.sample_rate_Hz", self.sample_rate)?;
        if self.sample_rate * self.dt > 1.0 + 1e-9 {
            return Err(Error::invalid(
                "integration.sample_rate_Hz",
                format!("{} Hz exceeds 1/dt", self.sample_rate),
            ));
        }
        self.steps_per_sample()?;
        match &self.regulation {
            Regulation::ClosedLoop(cfg) => {
                cfg.validate()?;
                if self.dt > 0.5 / cfg.control_rate * (1.0 + 1e-9) {
                    return Err(Error::invalid(
                        "integration.dt_s",
                        format!(
                            "{} s exceeds half the control period ({} s)",
                            self.dt,
                            0.5 / cfg.control_rate
                        ),
                    ));
                }
                self.steps_per_control()?;
            }
            Regulation::OpenLoop(cmd) => {
                for (field, v) in [
                    ("hold.u_evp", cmd.u_evp),
                    ("hold.u_dvp", cmd.u_dvp),
                    ("hold.solenoid", cmd.solenoid_duty),
                ] {
                    finite(field, v)?;
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::invalid(field, format!("must lie in [0, 1], got {v}")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn total_steps(&self) -> u64 {
        (self.duration / self.dt).round().max(1.0) as u64
    }

    fn steps_per_sample(&self) -> Result<u64> {
        step_ratio("integration.sample_rate_Hz", 1.0 / self.sample_rate, self.dt)
    }

    fn steps_per_control(&self) -> Result<u64> {
        match &self.regulation {
            Regulation::ClosedLoop(cfg) => {
                step_ratio("controller.control_rate_Hz", cfg.period(), self.dt)
            }
            Regulation::OpenLoop(_) => Ok(u64::MAX),
        }
    }
}

/// Uniformly sampled run output. Row `k` holds the state at `t[k]` and the
/// command (and resulting flows) applied from `t[k]` onwards.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub p_cmd: Vec<f64>,
    pub p_cv: Vec<f64>,
    pub p_r: Vec<f64>,
    pub u_evp: Vec<f64>,
    pub u_dvp: Vec<f64>,
    pub solenoid: Vec<f64>,
    pub q_in: Vec<f64>,
    pub q_out: Vec<f64>,
    pub q_motive: Vec<f64>,
    pub mode: Vec<Mode>,
    /// Cumulative standard liters drawn from the supply, `∫(Q_in + Q_motive)`.
    pub supplied: Vec<f64>,
    /// Cumulative standard liters exhausted to atmosphere, `∫(Q_out + Q_motive)`.
    pub vented: Vec<f64>,
    pub sample_rate: f64,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub p_r: f64,
    pub p_cv: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivatives {
    pub dp_r: f64,
    pub dp_cv: f64,
    pub q_in: f64,
    pub q_out: f64,
    pub q_motive: f64,
}

/// Right-hand side of the plant at `state` under `cmd`.
pub fn derivatives(state: PlantState, cmd: &ActuatorCommand, net: &Network) -> Derivatives {
    let alpha = net.gas.alpha();
    let q_in = net.evp.conductance(cmd.u_evp) * (state.p_r - state.p_cv);
    // motive flow exhausts to atmosphere
    let q_motive = net.dvp.conductance(cmd.u_dvp) * state.p_r;
    let p_node = net.venturi.node_pressure(q_motive.max(0.0));
    let q_out = cmd.solenoid_duty.min(1.0)
        * net
            .solenoid
            .flow(state.p_cv, p_node, cmd.solenoid_open());
    let dp_cv = alpha * (q_in - q_out) / net.control_volume.volume;
    let dp_r = if net.reservoir.fixed {
        0.0
    } else {
        -alpha * (q_in + q_motive) / net.reservoir.volume
    };
    Derivatives {
        dp_r,
        dp_cv,
        q_in,
        q_out,
        q_motive,
    }
}

fn rk4(state: PlantState, cmd: &ActuatorCommand, net: &Network, h: f64) -> PlantState {
    let f = |s: PlantState| derivatives(s, cmd, net);
    let add = |s: PlantState, d: &Derivatives, k: f64| PlantState {
        p_r: s.p_r + k * d.dp_r,
        p_cv: s.p_cv + k * d.dp_cv,
    };
    let k1 = f(state);
    let k2 = f(add(state, &k1, 0.5 * h));
    let k3 = f(add(state, &k2, 0.5 * h));
    let k4 = f(add(state, &k3, h));
    PlantState {
        p_r: state.p_r + h / 6.0 * (k1.dp_r + 2.0 * k2.dp_r + 2.0 * k3.dp_r + k4.dp_r),
        p_cv: state.p_cv + h / 6.0 * (k1.dp_cv + 2.0 * k2.dp_cv + 2.0 * k3.dp_cv + k4.dp_cv),
    }
}

/// Trapezoid increments of the supplied and vented ledgers over one step.
fn ledger_increment(a: &Derivatives, b: &Derivatives, h: f64) -> (f64, f64) {
    let supplied = 0.5 * h * ((a.q_in + a.q_motive) + (b.q_in + b.q_motive));
    let vented = 0.5 * h * ((a.q_out + a.q_motive) + (b.q_out + b.q_motive));
    (supplied, vented)
}

fn check_state(s: PlantState, t: f64) -> Result<()> {
    if !(s.p_r.is_finite() && s.p_cv.is_finite()) {
        return Err(Error::Divergence {
            t,
            detail: format!("non-finite state (P_r = {}, P_cv = {})", s.p_r, s.p_cv),
        });
    }
    Ok(())
}

fn below_vacuum(s: PlantState) -> Option<(&'static str, f64)> {
    if s.p_r < VACUUM_GAUGE_KPA {
        Some(("reservoir", s.p_r))
    } else if s.p_cv < VACUUM_GAUGE_KPA {
        Some(("control volume", s.p_cv))
    } else {
        None
    }
}

/// Advances one integration step. A step that would cross perfect vacuum is
/// retried as ten substeps; if that still fails the run is aborted.
fn advance(
    state: PlantState,
    cmd: &ActuatorCommand,
    net: &Network,
    dt: f64,
    t: f64,
) -> Result<(PlantState, f64, f64)> {
    let trial = rk4(state, cmd, net, dt);
    check_state(trial, t + dt)?;
    if below_vacuum(trial).is_none() {
        let (s, v) = ledger_increment(
            &derivatives(state, cmd, net),
            &derivatives(trial, cmd, net),
            dt,
        );
        return Ok((trial, s, v));
    }
    let h = dt / 10.0;
    let mut s = state;
    let (mut supplied, mut vented) = (0.0, 0.0);
    for i in 0..10 {
        let next = rk4(s, cmd, net, h);
        let t_next = t + (i + 1) as f64 * h;
        check_state(next, t_next)?;
        if let Some((which, value)) = below_vacuum(next) {
            return Err(Error::BelowVacuum {
                t: t_next,
                which,
                value,
            });
        }
        let (ds, dv) = ledger_increment(&derivatives(s, cmd, net), &derivatives(next, cmd, net), h);
        supplied += ds;
        vented += dv;
        s = next;
    }
    Ok((s, supplied, vented))
}

/// Runs a scenario to completion. Bit-identical output for identical input.
pub fn simulate(scn: &Scenario) -> Result<TimeSeries> {
    scn.validate()?;
    let net = &scn.network;
    let total = scn.total_steps();
    let per_sample = scn.steps_per_sample()?;
    let per_control = scn.steps_per_control()?;
    let vent = net.vent_model();
    let mut sensor = PressureSensor::new(net.cv_sensor);

    let mut state = PlantState {
        p_r: net.reservoir.p_initial.kpa(),
        p_cv: net.control_volume.p_initial.kpa(),
    };
    let (mut cmd, mut ctrl) = match &scn.regulation {
        Regulation::OpenLoop(hold) => (*hold, ControllerState::default()),
        Regulation::ClosedLoop(_) => (ActuatorCommand::CLOSED, ControllerState::default()),
    };
    let (mut supplied, mut vented) = (0.0, 0.0);

    let capacity = (total / per_sample + 1) as usize;
    let mut ts = TimeSeries {
        sample_rate: scn.sample_rate,
        ..TimeSeries::default()
    };
    for col in [
        &mut ts.t,
        &mut ts.p_cmd,
        &mut ts.p_cv,
        &mut ts.p_r,
        &mut ts.u_evp,
        &mut ts.u_dvp,
        &mut ts.solenoid,
        &mut ts.q_in,
        &mut ts.q_out,
        &mut ts.q_motive,
        &mut ts.supplied,
        &mut ts.vented,
    ] {
        col.reserve_exact(capacity);
    }
    ts.mode.reserve_exact(capacity);

    for n in 0..=total {
        let t = n as f64 * scn.dt;
        if let Regulation::ClosedLoop(cfg) = &scn.regulation {
            if n % per_control == 0 {
                let p_meas = sensor.read(state.p_cv);
                let (next_cmd, next_ctrl) = control_step(
                    scn.command.value(t),
                    p_meas,
                    scn.command.rate(t),
                    cfg,
                    &vent,
                    ctrl,
                );
                cmd = next_cmd;
                ctrl = next_ctrl;
            }
        }
        if n % per_sample == 0 {
            let d = derivatives(state, &cmd, net);
            ts.t.push(t);
            ts.p_cmd.push(scn.command.value(t));
            ts.p_cv.push(state.p_cv);
            ts.p_r.push(state.p_r);
            ts.u_evp.push(cmd.u_evp);
            ts.u_dvp.push(cmd.u_dvp);
            ts.solenoid.push(cmd.solenoid_duty);
            ts.q_in.push(d.q_in);
            ts.q_out.push(d.q_out);
            ts.q_motive.push(d.q_motive);
            ts.mode.push(match scn.regulation {
                Regulation::OpenLoop(_) => Mode::Idle,
                Regulation::ClosedLoop(_) => ctrl.mode,
            });
            ts.supplied.push(supplied);
            ts.vented.push(vented);
        }
        if n == total {
            break;
        }
        let (next, ds, dv) = advance(state, &cmd, net, scn.dt, t)?;
        state = next;
        supplied += ds;
        vented += dv;
    }
    Ok(ts)
}

/// Relative mismatch between the air that left the supply and the air found
/// in the control volume plus the air exhausted to atmosphere, all in
/// standard liters.
pub fn mass_balance(ts: &TimeSeries, scn: &Scenario) -> f64 {
    if ts.is_empty() {
        return 0.0;
    }
    let net = &scn.network;
    let alpha = net.gas.alpha();
    let last = ts.len() - 1;
    let loss = if net.reservoir.fixed {
        ts.supplied[last]
    } else {
        net.reservoir.volume * (ts.p_r[0] - ts.p_r[last]) / alpha
    };
    let gain = net.control_volume.volume * (ts.p_cv[last] - ts.p_cv[0]) / alpha;
    let vented = ts.vented[last];
    (loss - gain - vented).abs() / loss.max(1e-12)
}
