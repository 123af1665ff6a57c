//! CSV and JSON artifacts.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a file
//! read back reproduces the in-memory numbers exactly and identical runs give
//! byte-identical files.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::ensemble::{DivergenceScan, ObservableSeries};
use crate::error::{Error, Result};
use crate::noise::{analytic_target, CumulantTable};

pub const SERIES_HEADER: &str =
    "t,mean_Xa,se_Xa,mean_n_a,se_n_a,mean_Xb,se_Xb,n_effective,diverged_fraction";
pub const CUMULANT_HEADER: &str = "monomial,real,imag,se_real,se_imag,target_real,target_imag";
pub const SCAN_HEADER: &str = "dt,variance,diverged_fraction,excluded";

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::Contract(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    Ok(result?)
}

pub fn series_to_csv(s: &ObservableSeries) -> String {
    let mut out = String::with_capacity(64 * (s.len() + 1));
    out.push_str(SERIES_HEADER);
    out.push('\n');
    for k in 0..s.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            s.times[k],
            s.mean[0][k],
            s.stderr[0][k],
            s.mean[1][k],
            s.stderr[1][k],
            s.mean[2][k],
            s.stderr[2][k],
            s.n_effective[k],
            s.diverged_fraction[k]
        );
    }
    out
}

pub fn series_from_csv(text: &str, label: &str) -> Result<ObservableSeries> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Contract("empty series file".into()))?;
    if header.trim() != SERIES_HEADER {
        return Err(Error::Contract(format!(
            "unexpected series header {header:?}, expected {SERIES_HEADER:?}"
        )));
    }
    let mut s = ObservableSeries {
        label: label.to_string(),
        times: Vec::new(),
        mean: Default::default(),
        stderr: Default::default(),
        n_effective: Vec::new(),
        diverged_fraction: Vec::new(),
        truncated: false,
    };
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 9 {
            return Err(Error::Contract(format!(
                "series row {} has {} fields, expected 9",
                row + 1,
                fields.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i].parse::<f64>().map_err(|e| {
                Error::Contract(format!("series row {} column {}: {e}", row + 1, i + 1))
            })
        };
        s.times.push(num(0)?);
        for o in 0..3 {
            s.mean[o].push(num(1 + 2 * o)?);
            s.stderr[o].push(num(2 + 2 * o)?);
        }
        s.n_effective.push(fields[7].parse::<u64>().map_err(|e| {
            Error::Contract(format!("series row {} n_effective: {e}", row + 1))
        })?);
        s.diverged_fraction.push(num(8)?);
    }
    Ok(s)
}

pub fn read_series(path: &Path) -> Result<ObservableSeries> {
    let text = std::fs::read_to_string(path)?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    series_from_csv(&text, &label)
        .map_err(|e| Error::Contract(format!("{}: {e}", path.display())))
}

/// Cumulant table with the analytic targets for coupling `kappa` alongside.
pub fn cumulants_to_csv(table: &CumulantTable, kappa: f64) -> String {
    let mut out = String::new();
    out.push_str(CUMULANT_HEADER);
    out.push('\n');
    for e in &table.entries {
        let target: Complex64 = analytic_target(&e.monomial, kappa);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            e.monomial, e.value.re, e.value.im, e.se_re, e.se_im, target.re, target.im
        );
    }
    out
}

pub fn scan_to_csv(scan: &DivergenceScan) -> String {
    let mut out = String::new();
    out.push_str(SCAN_HEADER);
    out.push('\n');
    for p in &scan.points {
        let _ = writeln!(out, "{},{},{},{}", p.dt, p.variance, p.diverged_fraction, p.excluded);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{run_ensemble, RunConfig};
    use crate::integrators::{InitialMode, InitialStateSpec, Representation, StepConfig};
    use crate::model::ModelParams;
    use crate::noise::sigma_cumulant_table;
    use crate::noise::optimal_sigma_params;

    fn small_series() -> ObservableSeries {
        let cfg = RunConfig {
            model: ModelParams::reference(),
            step: StepConfig::new(0.01, Representation::PositiveP).unwrap(),
            sigma: None,
            initial: InitialStateSpec {
                mode: InitialMode::Deterministic,
                alpha0: Complex64::new(1.0, 0.0),
                beta0: Complex64::new(1.0, 0.0),
            },
            n_traj: 64,
            t_end: 0.2,
            record_every: 5,
            seed: 5,
            chi: 0.33,
        };
        run_ensemble(&cfg).unwrap()
    }

    #[test]
    fn series_round_trip_is_exact() {
        let s = small_series();
        let text = series_to_csv(&s);
        assert!(text.starts_with(SERIES_HEADER));
        assert_eq!(text.lines().count(), s.len() + 1);
        let back = series_from_csv(&text, &s.label).unwrap();
        assert_eq!(back.times, s.times);
        assert_eq!(back.mean, s.mean);
        assert_eq!(back.stderr, s.stderr);
        assert_eq!(back.n_effective, s.n_effective);
        assert_eq!(series_to_csv(&back), text);
    }

    #[test]
    fn malformed_series_is_rejected() {
        assert!(series_from_csv("", "x").is_err());
        assert!(series_from_csv("t,a,b\n", "x").is_err());
        let short = format!("{SERIES_HEADER}\n0,1,2\n");
        assert!(series_from_csv(&short, "x").is_err());
        let nan = format!("{SERIES_HEADER}\n0,abc,0,0,0,0,0,1,0\n");
        assert!(series_from_csv(&nan, "x").is_err());
    }

    #[test]
    fn cumulant_csv_lists_targets() {
        let sp = optimal_sigma_params(2.0, 0.33).unwrap();
        let t = sigma_cumulant_table(&sp, 20_000, 1).unwrap();
        let text = cumulants_to_csv(&t, 2.0);
        assert_eq!(text.lines().count(), 35);
        let targets: Vec<&str> = text
            .lines()
            .skip(1)
            .filter(|l| l.split(',').nth(5) != Some("0"))
            .collect();
        assert_eq!(targets.len(), 2, "{targets:?}");
        assert!(targets.iter().all(|l| l.split(',').nth(5) == Some("-0.5")));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
