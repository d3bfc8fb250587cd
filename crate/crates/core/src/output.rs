//! Byte-stable serialization of run results and run manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis::SweepPoint;
use crate::error::{Error, Result};
use crate::sim::TimeSeries;

pub const TIMESERIES_HEADER: &str =
    "t_s,P_cmd_kPa,P_cv_kPa,P_r_kPa,u_evp,u_dvp,solenoid,Q_in_slps,Q_out_slps,Q_motive_slps,mode";

pub const SWEEP_HEADER: &str = "omega_Hz,gain,gain_std,n_periods,repeats,error";

/// C `%.9g`: nine significant digits, trailing zeros dropped, exponent form
/// outside `1e-4 <= |x| < 1e9`. Negative zero prints as `0`.
pub fn fmt_g9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn timeseries_csv(ts: &TimeSeries) -> String {
    let mut out = String::with_capacity(ts.len() * 120 + 128);
    out.push_str(TIMESERIES_HEADER);
    out.push('\n');
    for i in 0..ts.len() {
        for v in [
            ts.t[i],
            ts.p_cmd[i],
            ts.p_cv[i],
            ts.p_r[i],
            ts.u_evp[i],
            ts.u_dvp[i],
            ts.solenoid[i],
            ts.q_in[i],
            ts.q_out[i],
            ts.q_motive[i],
        ] {
            out.push_str(&fmt_g9(v));
            out.push(',');
        }
        out.push_str(ts.mode[i].as_str());
        out.push('\n');
    }
    out
}

/// One row per requested frequency, in request order; failed points carry the
/// error text and empty numeric fields.
pub fn sweep_csv(omegas: &[f64], results: &[Result<SweepPoint>]) -> String {
    let mut out = String::new();
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for (omega, r) in omegas.iter().zip(results) {
        match r {
            Ok(p) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},",
                    fmt_g9(p.omega),
                    fmt_g9(p.gain),
                    fmt_g9(p.gain_std),
                    p.n_periods,
                    p.repeats
                );
            }
            Err(e) => {
                let msg = e.to_string().replace(['"', '\n'], "'");
                let _ = writeln!(out, "{},,,,,\"{msg}\"", fmt_g9(*omega));
            }
        }
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of everything that determines a run's output: the canonical resolved
/// configuration and the tool version.
pub fn input_hash(canonical_config: &impl Serialize) -> Result<String> {
    let json = to_json(canonical_config)?;
    let mut h = Sha256::new();
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    h.update([0u8]);
    h.update(json.as_bytes());
    Ok(hex::encode(h.finalize()))
}

pub fn to_json(value: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        context: "serializing output".into(),
        source,
    })?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest<C: Serialize, O: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub inputs: Vec<String>,
    pub overrides: O,
    pub input_sha256: String,
    pub resolved: C,
    pub outputs: Vec<OutputFile>,
}

impl<C: Serialize, O: Serialize> RunManifest<C, O> {
    pub fn new(command: &'static str, inputs: Vec<String>, overrides: O, resolved: C) -> Result<Self> {
        Ok(RunManifest {
            tool: "phlosar",
            version: env!("CARGO_PKG_VERSION"),
            command,
            inputs,
            overrides,
            input_sha256: input_hash(&resolved)?,
            resolved,
            outputs: Vec::new(),
        })
    }
}

/// Writes `contents` to `dir/name` and returns its manifest record.
pub fn write_output(dir: &Path, name: &str, contents: &str) -> Result<OutputFile> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(OutputFile {
        file: name.to_string(),
        sha256: sha256_hex(contents.as_bytes()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::Mode;

    #[test]
    fn g9_matches_printf() {
        let cases: &[(f64, &str)] = &[
            (0.0, "0"),
            (-0.0, "0"),
            (1.0, "1"),
            (0.5, "0.5"),
            (69.0, "69"),
            (-80.0, "-80"),
            (0.1, "0.1"),
            (1.0 / 3.0, "0.333333333"),
            (2.0 / 3.0, "0.666666667"),
            (1759.14893617, "1759.14894"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (999999999.5, "1e+09"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (5e-4, "0.0005"),
            (-1.5e-7, "-1.5e-07"),
            (1e100, "1e+100"),
            (0.016666666666666666, "0.0166666667"),
            (9.9999999999, "10"),
        ];
        for &(x, want) in cases {
            assert_eq!(fmt_g9(x), want, "{x:e}");
        }
    }

    #[test]
    fn csv_layout() {
        let ts = TimeSeries {
            t: vec![0.0, 0.001],
            p_cmd: vec![69.0, 69.0],
            p_cv: vec![0.0, 0.0794],
            p_r: vec![689.0, 688.99],
            u_evp: vec![1.0, 1.0],
            u_dvp: vec![0.0, 0.0],
            solenoid: vec![0.0, 0.0],
            q_in: vec![0.39, 0.39],
            q_out: vec![0.0, -0.0],
            q_motive: vec![0.0, 0.0],
            mode: vec![Mode::OnOffInflate, Mode::Pid],
            ..TimeSeries::default()
        };
        let csv = timeseries_csv(&ts);
        let lines: Vec<&str> = csv.split('\n').collect();
        assert_eq!(lines[0], TIMESERIES_HEADER);
        assert_eq!(lines[1], "0,69,0,689,1,0,0,0.39,0,0,ON_OFF_INFLATE");
        assert_eq!(lines[2], "0.001,69,0.0794,688.99,1,0,0,0.39,0,0,PID");
        assert_eq!(lines[3], "");
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn sweep_rows_keep_errors() {
        let ok = SweepPoint {
            omega: 0.5,
            gain: 0.99,
            gain_std: 0.0,
            n_periods: 5,
            repeats: 1,
        };
        let rows = sweep_csv(
            &[0.5, 90.0],
            &[Ok(ok), Err(Error::Analysis("too \"fast\"".into()))],
        );
        let lines: Vec<&str> = rows.lines().collect();
        assert_eq!(lines[1], "0.5,0.99,0,5,1,");
        assert!(lines[2].starts_with("90,,,,,\"analysis rejected trace: too 'fast'"));
    }

    #[test]
    fn hash_tracks_content() {
        let a = input_hash(&serde_json::json!({"dt_s": 0.0005})).unwrap();
        let b = input_hash(&serde_json::json!({"dt_s": 0.00025})).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, input_hash(&serde_json::json!({"dt_s": 0.0005})).unwrap());
        assert_eq!(sha256_hex(b"abc").len(), 64);
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
