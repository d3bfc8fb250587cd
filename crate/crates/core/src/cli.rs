//! `phlosar` command-line front end.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{
    cutoff_estimates, fit_discharge_tau, frequency_sweep, CutoffEstimates,
    DischargeFit, SweepPoint,
};
use crate::config::{CatalogFile, Overrides, RequirementsFile, ScenarioFile};
use crate::error::{Error, Result};
use crate::output::{
    sweep_csv, timeseries_csv, to_json, write_output, OutputFile, RunManifest,
};
use crate::sim::{simulate, CommandSignal, Regulation, Scenario};
use crate::sizing::enumerate_catalog;

#[derive(Debug, Parser)]
#[command(name = "phlosar", version, about = "Pneumatic supply and regulator simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write its time series.
    Simulate(RunArgs),
    /// Closed-loop frequency response of a sine scenario.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated command frequencies, Hz (replaces the file's list).
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        omegas: Option<Vec<f64>>,
    },
    /// Open-valve reservoir discharge with an exponential fit.
    Discharge(RunArgs),
    /// Rank catalog configurations against design requirements.
    Size {
        requirements: PathBuf,
        catalog: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    scenario: PathBuf,
    /// Integration step, s.
    #[arg(long)]
    dt: Option<f64>,
    /// Run length, s (ignored by sweep, which sizes each point).
    #[arg(long)]
    duration: Option<f64>,
    /// Output rate, Hz.
    #[arg(long = "sample-rate")]
    sample_rate: Option<f64>,
    /// Sensor noise seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            dt: self.dt,
            duration: self.duration,
            sample_rate: self.sample_rate,
            seed: self.seed,
        }
    }

    fn load(&self) -> Result<(ScenarioFile, Scenario)> {
        let mut file = ScenarioFile::load(&self.scenario)?;
        file.apply(&self.overrides());
        let scn = file.resolve()?;
        Ok((file.canonical()?, scn))
    }
}

#[derive(Debug, Serialize)]
struct SweepOverrides {
    #[serde(flatten)]
    base: Overrides,
    #[serde(skip_serializing_if = "Option::is_none")]
    omegas_hz: Option<Vec<f64>>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Sweep { run, omegas } => cmd_sweep(&run, omegas),
        Command::Discharge(args) => cmd_discharge(&args),
        Command::Size {
            requirements,
            catalog,
            out,
        } => cmd_size(&requirements, &catalog, &out),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })
}

fn finish<C: Serialize, O: Serialize>(
    dir: &Path,
    mut manifest: RunManifest<C, O>,
    outputs: Vec<OutputFile>,
) -> Result<()> {
    manifest.outputs = outputs;
    write_output(dir, "manifest.json", &to_json(&manifest)?)?;
    Ok(())
}

fn cmd_simulate(args: &RunArgs) -> Result<i32> {
    let (canonical, scn) = args.load()?;
    let manifest = RunManifest::new(
        "simulate",
        vec![args.scenario.display().to_string()],
        args.overrides(),
        canonical,
    )?;
    let ts = simulate(&scn)?;
    ensure_dir(&args.out)?;
    let csv = write_output(&args.out, "timeseries.csv", &timeseries_csv(&ts))?;
    finish(&args.out, manifest, vec![csv])?;
    println!(
        "simulate: {} samples to {}",
        ts.len(),
        args.out.join("timeseries.csv").display()
    );
    Ok(0)
}

#[derive(Debug, Serialize)]
struct SweepReport {
    input_sha256: String,
    points: Vec<SweepRow>,
    cutoff: CutoffEstimates,
    failed: usize,
}

#[derive(Debug, Serialize)]
struct SweepRow {
    omega_hz: f64,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    point: Option<SweepPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn cmd_sweep(args: &RunArgs, omegas: Option<Vec<f64>>) -> Result<i32> {
    let mut file = ScenarioFile::load(&args.scenario)?;
    file.apply(&args.overrides());
    let mut sweep = file.sweep.clone().unwrap_or_default();
    if let Some(list) = &omegas {
        sweep.omegas_hz = list.clone();
    }
    let opts = sweep.options()?;
    if sweep.omegas_hz.is_empty() {
        return Err(Error::invalid(
            "omegas",
            "no frequencies given (use --omegas or sweep.omegas_Hz)",
        ));
    }
    for (i, w) in sweep.omegas_hz.iter().enumerate() {
        if !(w.is_finite() && *w > 0.0) {
            return Err(Error::invalid(format!("omegas[{i}]"), format!("must be > 0, got {w}")));
        }
    }
    sweep.omegas_hz.sort_by(f64::total_cmp);
    file.sweep = Some(sweep.clone());
    let template = file.resolve()?;
    if !matches!(template.command, CommandSignal::Sine { .. }) {
        return Err(Error::invalid("command", "sweep needs a sine command"));
    }
    let canonical = file.canonical()?;
    let manifest = RunManifest::new(
        "sweep",
        vec![args.scenario.display().to_string()],
        SweepOverrides {
            base: args.overrides(),
            omegas_hz: omegas,
        },
        canonical,
    )?;

    let results = frequency_sweep(&template, &sweep.omegas_hz, &opts);
    let ok: Vec<SweepPoint> = results.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let failed = results.len() - ok.len();
    let report = SweepReport {
        input_sha256: manifest.input_sha256.clone(),
        points: sweep
            .omegas_hz
            .iter()
            .zip(&results)
            .map(|(&w, r)| SweepRow {
                omega_hz: w,
                point: r.as_ref().ok().copied(),
                error: r.as_ref().err().map(|e| e.to_string()),
            })
            .collect(),
        cutoff: cutoff_estimates(&ok),
        failed,
    };

    ensure_dir(&args.out)?;
    let table = write_output(&args.out, "sweep.csv", &sweep_csv(&sweep.omegas_hz, &results))?;
    let json = write_output(&args.out, "sweep.json", &to_json(&report)?)?;
    finish(&args.out, manifest, vec![table, json])?;

    println!("{:>12} {:>10} {:>9}  error", "omega_Hz", "gain", "periods");
    for row in &report.points {
        match (&row.point, &row.error) {
            (Some(p), _) => println!("{:>12.4} {:>10.4} {:>9}", row.omega_hz, p.gain, p.n_periods),
            (None, Some(e)) => println!("{:>12.4} {:>10} {:>9}  {e}", row.omega_hz, "-", "-"),
            (None, None) => unreachable!("row without point or error"),
        }
    }
    let show = |v: Option<f64>| v.map_or("none".to_string(), |w| format!("{w:.4} Hz"));
    println!("knee fit: {}", show(report.cutoff.knee));
    println!("-3 dB crossing: {}", show(report.cutoff.minus_3db));

    if ok.is_empty() {
        let first = results
            .into_iter()
            .find_map(|r| r.err())
            .expect("no successes implies an error");
        return Err(first);
    }
    Ok(0)
}

#[derive(Debug, Serialize)]
struct DischargeReport {
    input_sha256: String,
    /// Closed-form time constant when only the Venturi drive valve is open.
    tau_model_s: Option<f64>,
    fit: Option<DischargeFit>,
    degenerate: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
}

fn model_tau(scn: &Scenario) -> Option<f64> {
    let Regulation::OpenLoop(cmd) = scn.regulation else {
        return None;
    };
    let net = &scn.network;
    let g = net.dvp.conductance(cmd.u_dvp);
    if net.reservoir.fixed || net.evp.conductance(cmd.u_evp) > 0.0 || g <= 0.0 {
        return None;
    }
    Some(net.reservoir.volume / (net.gas.alpha() * g))
}

fn cmd_discharge(args: &RunArgs) -> Result<i32> {
    let (canonical, scn) = args.load()?;
    if !matches!(scn.regulation, Regulation::OpenLoop(_)) {
        return Err(Error::invalid(
            "controller.kind",
            "discharge needs a fixed (open-loop) controller",
        ));
    }
    let manifest = RunManifest::new(
        "discharge",
        vec![args.scenario.display().to_string()],
        args.overrides(),
        canonical,
    )?;
    let ts = simulate(&scn)?;
    let (fit, reason) = match fit_discharge_tau(&ts) {
        Ok(f) => (Some(f), None),
        Err(Error::Analysis(msg)) => (None, Some(msg)),
        Err(e) => return Err(e),
    };
    let report = DischargeReport {
        input_sha256: manifest.input_sha256.clone(),
        tau_model_s: model_tau(&scn),
        degenerate: fit.is_none(),
        fit,
        reason,
    };
    ensure_dir(&args.out)?;
    let trace = write_output(&args.out, "discharge.csv", &timeseries_csv(&ts))?;
    let rep = write_output(&args.out, "discharge_fit.json", &to_json(&report)?)?;
    finish(&args.out, manifest, vec![trace, rep])?;
    match (&report.fit, &report.reason) {
        (Some(f), _) => println!(
            "discharge: tau = {:.4} s, P_r0 = {:.3} kPa, nrmse = {:.3e}",
            f.tau, f.p_r0_fit, f.nrmse
        ),
        (None, reason) => println!(
            "discharge: fit degenerate ({})",
            reason.as_deref().unwrap_or("unknown")
        ),
    }
    Ok(0)
}

#[derive(Debug, Serialize)]
struct SizeInputs {
    requirements: RequirementsFile,
    catalog: CatalogFile,
}

fn cmd_size(requirements: &Path, catalog: &Path, out: &Path) -> Result<i32> {
    let req_file = RequirementsFile::load(requirements)?;
    let cat_file = CatalogFile::load(catalog)?;
    let (req, gas) = req_file.resolve()?;
    let cat = cat_file.resolve()?;
    let manifest = RunManifest::new(
        "size",
        vec![
            requirements.display().to_string(),
            catalog.display().to_string(),
        ],
        Overrides::default(),
        SizeInputs {
            requirements: req_file,
            catalog: cat_file,
        },
    )?;
    let report = enumerate_catalog(&req, &cat, &gas)?;

    #[derive(Serialize)]
    struct Stamped<'a, T> {
        input_sha256: &'a str,
        #[serde(flatten)]
        report: &'a T,
    }
    ensure_dir(out)?;
    let file = write_output(
        out,
        "design_report.json",
        &to_json(&Stamped {
            input_sha256: &manifest.input_sha256,
            report: &report,
        })?,
    )?;
    finish(out, manifest, vec![file])?;
    println!(
        "{:<16} {:<16} {:>10} {:>10} {:>12} {:>12}",
        "valve", "reservoir", "mass_g", "cycles", "wc_full_Hz", "wc_low_Hz"
    );
    for e in &report.ranked {
        println!(
            "{:<16} {:<16} {:>10.1} {:>10.0} {:>12.3} {:>12.3}",
            e.valve,
            e.reservoir,
            e.total_mass_g,
            e.n_cycles.floor(),
            e.omega_c_full,
            e.omega_c_depleted
        );
    }
    Ok(0)
}
