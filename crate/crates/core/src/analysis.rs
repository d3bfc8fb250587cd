//! Verification computations on simulated (or logged) traces: step-response
//! metrics, single-bin frequency-response extraction with cutoff estimation,
//! and log-linear discharge fitting.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::thread;

use serde::Serialize;

use crate::error::{positive, Error, Result};
use crate::gasmodel::inflation_rate;
use crate::sim::{simulate, CommandSignal, Scenario, TimeSeries};

/// Half-width of the band used for rise-phase end and settling, kPa.
pub const SETTLING_BAND_KPA: f64 = 1.0;

/// Root-mean-square difference divided by `normalizer`.
pub fn nrmse(measured: &[f64], reference: &[f64], normalizer: f64) -> Result<f64> {
    if measured.len() != reference.len() {
        return Err(Error::invalid(
            "trace",
            format!(
                "length mismatch: {} measured vs {} reference samples",
                measured.len(),
                reference.len()
            ),
        ));
    }
    if measured.len() < 2 {
        return Err(Error::invalid("trace", "need at least two samples"));
    }
    positive("normalizer", normalizer)?;
    let sse: f64 = measured
        .iter()
        .zip(reference)
        .map(|(m, r)| (m - r) * (m - r))
        .sum();
    Ok((sse / measured.len() as f64).sqrt() / normalizer)
}

/// Piecewise-linear step model: constant ramp at `rate` from `p_start` at
/// `t_start` until `target`, then flat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepReference {
    pub t_start: f64,
    pub p_start: f64,
    pub target: f64,
    /// Model ramp rate, kPa/s (magnitude).
    pub rate: f64,
}

impl StepReference {
    /// Reference for a step scenario, ramping at the inflation rate of the
    /// initial reservoir pressure through the fully open inflation valve.
    pub fn for_scenario(scn: &Scenario) -> Result<Self> {
        let CommandSignal::Step {
            target, start, ..
        } = scn.command
        else {
            return Err(Error::invalid("command", "step metrics need a step command"));
        };
        let net = &scn.network;
        let rate = inflation_rate(
            net.reservoir.p_initial,
            net.evp.r_vmin,
            net.control_volume.volume,
            &net.gas,
        )?;
        Ok(StepReference {
            t_start: start,
            p_start: net.control_volume.p_initial.kpa(),
            target,
            rate,
        })
    }

    pub fn value(&self, t: f64) -> f64 {
        if t <= self.t_start {
            return self.p_start;
        }
        let span = self.target - self.p_start;
        let travelled = (self.rate * (t - self.t_start)).min(span.abs());
        self.p_start + span.signum() * travelled
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepMetrics {
    /// Average slope over the rise phase, kPa/s.
    pub avg_rise_rate: f64,
    /// Against the piecewise-linear reference, normalized by the step size.
    pub nrmse: f64,
    /// Peak excursion past the target, kPa (negative when it never passes).
    pub overshoot: f64,
    /// Time from the step until the trace stays within the band, s. `None` if
    /// it is still outside at the end of the trace.
    pub settling_time: Option<f64>,
}

/// Step-response metrics of the control-volume pressure.
///
/// The rise phase ends when the trace first enters the `±SETTLING_BAND_KPA`
/// band around the target (linearly interpolated between samples).
pub fn step_metrics(ts: &TimeSeries, reference: &StepReference) -> Result<StepMetrics> {
    if ts.len() < 2 {
        return Err(Error::Analysis("trace shorter than two samples".into()));
    }
    let target = reference.target;
    let step = target - reference.p_start;
    if step.abs() <= SETTLING_BAND_KPA {
        return Err(Error::Analysis(format!(
            "step of {step} kPa is inside the settling band"
        )));
    }
    let dir = step.signum();
    // signed distance still to go, positive before the band edge
    let remaining = |p: f64| dir * (target - p) - SETTLING_BAND_KPA;

    let first = ts
        .t
        .iter()
        .position(|&t| t >= reference.t_start)
        .ok_or_else(|| Error::Analysis("trace ends before the step".into()))?;
    let hit = (first..ts.len())
        .find(|&i| remaining(ts.p_cv[i]) <= 0.0)
        .ok_or_else(|| Error::Analysis("trace never reaches the target band".into()))?;
    let t_cross = if hit == first {
        ts.t[hit]
    } else {
        let (r0, r1) = (remaining(ts.p_cv[hit - 1]), remaining(ts.p_cv[hit]));
        let frac = r0 / (r0 - r1);
        ts.t[hit - 1] + frac * (ts.t[hit] - ts.t[hit - 1])
    };
    let rise_time = t_cross - reference.t_start;
    let p_edge = target - dir * SETTLING_BAND_KPA;
    let avg_rise_rate = if rise_time > 0.0 {
        (p_edge - reference.p_start).abs() / rise_time
    } else {
        f64::INFINITY
    };

    let model: Vec<f64> = ts.t.iter().map(|&t| reference.value(t)).collect();
    let fit = nrmse(&ts.p_cv, &model, step.abs())?;

    let overshoot = ts.p_cv[first..]
        .iter()
        .map(|&p| dir * (p - target))
        .fold(f64::NEG_INFINITY, f64::max);

    let outside = |p: f64| (p - target).abs() > SETTLING_BAND_KPA;
    let settling_time = match ts.p_cv.iter().rposition(|&p| outside(p)) {
        None => Some(0.0),
        Some(last) if last + 1 < ts.len() => Some((ts.t[last + 1] - reference.t_start).max(0.0)),
        Some(_) => None,
    };

    Ok(StepMetrics {
        avg_rise_rate,
        nrmse: fit,
        overshoot,
        settling_time,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyPoint {
    /// Hz.
    pub omega: f64,
    pub gain: f64,
    /// Integer number of command periods in the analysis window.
    pub n_periods: usize,
}

/// Amplitude of the `omega` component of `response`, relative to `amplitude`.
///
/// The first period is discarded as transient; the largest integer number of
/// periods at the end of the trace forms the window. The window mean is removed
/// before the single-bin correlation.
pub fn single_bin_gain(
    response: &[f64],
    omega: f64,
    amplitude: f64,
    sample_rate: f64,
) -> Result<FrequencyPoint> {
    positive("omega", omega)?;
    positive("A", amplitude)?;
    positive("sample_rate", sample_rate)?;
    if sample_rate <= 10.0 * omega {
        return Err(Error::Analysis(format!(
            "sample rate {sample_rate} Hz must exceed ten times the {omega} Hz command"
        )));
    }
    let per_period = sample_rate / omega;
    let usable = response.len() as f64 - per_period;
    let n_periods = if usable > 0.0 {
        (usable / per_period + 1e-9).floor() as usize
    } else {
        0
    };
    if n_periods < 3 {
        return Err(Error::Analysis(format!(
            "{} samples cover {n_periods} analysable periods of {omega} Hz; need 3 after the transient period",
            response.len()
        )));
    }
    let n = (n_periods as f64 * per_period).round() as usize;
    let window = &response[response.len() - n..];
    let mean = window.iter().sum::<f64>() / n as f64;
    let step = 2.0 * PI * omega / sample_rate;
    let (mut re, mut im) = (0.0, 0.0);
    for (k, &x) in window.iter().enumerate() {
        let phase = step * k as f64;
        re += (x - mean) * phase.cos();
        im -= (x - mean) * phase.sin();
    }
    let magnitude = 2.0 * (re * re + im * im).sqrt() / n as f64;
    Ok(FrequencyPoint {
        omega,
        gain: magnitude / amplitude,
        n_periods,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Analysis periods per point, after the discarded transient period.
    pub n_periods: usize,
    /// Runs per frequency with successive sensor seeds; gains are averaged.
    pub repeats: usize,
    /// Hold the reservoir at its initial pressure (bench supply).
    pub hold_reservoir: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            n_periods: 5,
            repeats: 1,
            hold_reservoir: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub omega: f64,
    pub gain: f64,
    /// Sample standard deviation across repeats, 0 for a single run.
    pub gain_std: f64,
    pub n_periods: usize,
    pub repeats: usize,
}

/// Scenario for one sweep frequency: the template with a sine command of the
/// template's amplitude starting at 0 kPa, and a duration covering the
/// transient period plus the analysis window.
pub fn sweep_scenario(template: &Scenario, omega: f64, opts: &SweepOptions) -> Result<Scenario> {
    let CommandSignal::Sine { amplitude, .. } = template.command else {
        return Err(Error::invalid("command", "frequency sweep needs a sine command"));
    };
    positive("omega", omega)?;
    let mut scn = template.clone();
    scn.command = CommandSignal::sine_from_zero(amplitude, omega);
    scn.duration = (opts.n_periods as f64 + 1.0) / omega;
    if opts.hold_reservoir {
        scn.network.reservoir.fixed = true;
    }
    Ok(scn)
}

fn sweep_one(template: &Scenario, omega: f64, opts: &SweepOptions) -> Result<SweepPoint> {
    let CommandSignal::Sine { amplitude, .. } = template.command else {
        return Err(Error::invalid("command", "frequency sweep needs a sine command"));
    };
    let repeats = opts.repeats.max(1);
    let mut gains = Vec::with_capacity(repeats);
    let mut n_periods = 0;
    for r in 0..repeats {
        let mut scn = sweep_scenario(template, omega, opts)?;
        scn.network.cv_sensor.seed = scn.network.cv_sensor.seed.wrapping_add(r as u64);
        let ts = simulate(&scn)?;
        let point = single_bin_gain(&ts.p_cv, omega, amplitude, ts.sample_rate)?;
        n_periods = point.n_periods;
        gains.push(point.gain);
    }
    let mean = gains.iter().sum::<f64>() / repeats as f64;
    let gain_std = if repeats > 1 {
        (gains.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (repeats - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(SweepPoint {
        omega,
        gain: mean,
        gain_std,
        n_periods,
        repeats,
    })
}

/// Closed-loop gain at each frequency. Points run in parallel; results come
/// back in input order, each carrying its own error.
pub fn frequency_sweep(
    template: &Scenario,
    omegas: &[f64],
    opts: &SweepOptions,
) -> Vec<Result<SweepPoint>> {
    let workers = thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(omegas.len().max(1));
    let mut results: Vec<Option<Result<SweepPoint>>> = omegas.iter().map(|_| None).collect();
    thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || {
                    omegas
                        .iter()
                        .enumerate()
                        .skip(w)
                        .step_by(workers)
                        .map(|(i, &omega)| (i, sweep_one(template, omega, opts)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("sweep worker panicked") {
                results[i] = Some(r);
            }
        }
    });
    results
        .into_iter()
        .map(|r| r.expect("every index visited"))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutoffEstimates {
    /// Knee of the least-squares fit of `min(1, knee / omega)` over log-gain.
    pub knee: Option<f64>,
    /// First -3 dB crossing, log-log interpolated between bracketing points.
    pub minus_3db: Option<f64>,
}

/// Knee frequency of the two-segment model `log g = min(0, log knee - log omega)`
/// fitted by least squares. `None` with fewer than three points or when the
/// best knee lies beyond the highest frequency (no roll-off observed).
pub fn fit_knee(points: &[(f64, f64)]) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(w, g)| *w > 0.0 && *g > 0.0 && w.is_finite() && g.is_finite())
        .map(|&(w, g)| (w.ln(), g.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));

    let sse = |x: f64| -> f64 {
        pts.iter()
            .map(|&(lw, lg)| {
                let model = (x - lw).min(0.0);
                (lg - model).powi(2)
            })
            .sum()
    };
    // On each interval between sorted abscissae the points right of the knee
    // are fixed, so SSE is quadratic with minimiser mean(lg + lw) over them.
    let mut best: Option<(f64, f64)> = None;
    for split in 0..=pts.len() {
        let lo = if split == 0 { f64::NEG_INFINITY } else { pts[split - 1].0 };
        let hi = if split == pts.len() { f64::INFINITY } else { pts[split].0 };
        let right = &pts[split..];
        let x = if right.is_empty() {
            lo
        } else {
            let m = right.iter().map(|&(lw, lg)| lw + lg).sum::<f64>() / right.len() as f64;
            m.clamp(lo, hi)
        };
        if !x.is_finite() {
            continue;
        }
        let e = sse(x);
        if best.is_none_or(|(_, be)| e < be) {
            best = Some((x, e));
        }
    }
    let (x, _) = best?;
    if x >= pts[pts.len() - 1].0 {
        return None;
    }
    Some(x.exp())
}

/// First frequency where the gain drops through `1/sqrt(2)`.
pub fn minus_3db_crossing(points: &[(f64, f64)]) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.windows(2).find_map(|w| {
        let ((w0, g0), (w1, g1)) = (w[0], w[1]);
        if g0 >= FRAC_1_SQRT_2 && g1 < FRAC_1_SQRT_2 {
            let f = (g0.ln() - FRAC_1_SQRT_2.ln()) / (g0.ln() - g1.ln());
            Some((w0.ln() + f * (w1.ln() - w0.ln())).exp())
        } else {
            None
        }
    })
}

pub fn cutoff_estimates(points: &[SweepPoint]) -> CutoffEstimates {
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.omega, p.gain)).collect();
    CutoffEstimates {
        knee: fit_knee(&pairs),
        minus_3db: minus_3db_crossing(&pairs),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DischargeFit {
    /// s.
    pub tau: f64,
    /// Fitted initial pressure, kPa.
    pub p_r0_fit: f64,
    /// Against the fitted exponential, normalized by the first sample.
    pub nrmse: f64,
}

/// Least-squares line through `(t, ln P)`.
pub fn fit_discharge(t: &[f64], p: &[f64]) -> Result<DischargeFit> {
    if t.len() != p.len() || t.len() < 2 {
        return Err(Error::Analysis(
            "discharge fit needs two or more paired samples".into(),
        ));
    }
    if let Some(i) = p.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Analysis(format!(
            "non-positive pressure {} kPa at t = {} s; log fit undefined",
            p[i], t[i]
        )));
    }
    let n = t.len() as f64;
    let logs: Vec<f64> = p.iter().map(|v| v.ln()).collect();
    let t_mean = t.iter().sum::<f64>() / n;
    let l_mean = logs.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (&ti, &li) in t.iter().zip(&logs) {
        sxy += (ti - t_mean) * (li - l_mean);
        sxx += (ti - t_mean) * (ti - t_mean);
    }
    if sxx == 0.0 {
        return Err(Error::Analysis("all samples at one instant".into()));
    }
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::Analysis(format!(
            "degenerate: pressure does not decay (log slope {slope:e})"
        )));
    }
    let intercept = l_mean - slope * t_mean;
    let tau = -1.0 / slope;
    let p_r0_fit = intercept.exp();
    let model: Vec<f64> = t.iter().map(|&ti| p_r0_fit * (-ti / tau).exp()).collect();
    Ok(DischargeFit {
        tau,
        p_r0_fit,
        nrmse: nrmse(p, &model, p[0])?,
    })
}

/// Discharge fit of the reservoir trace, time measured from the first sample.
pub fn fit_discharge_tau(ts: &TimeSeries) -> Result<DischargeFit> {
    let t0 = ts.t.first().copied().unwrap_or(0.0);
    let t: Vec<f64> = ts.t.iter().map(|t| t - t0).collect();
    fit_discharge(&t, &ts.p_r)
}
