//! CSV and JSON outputs read by the plotting scripts.

use std::fs;
use std::io::Write;
use std::path::Path;

use sbcm_core::reduced::PhasePortrait;
use sbcm_core::spectral::SpectralReport;
use sbcm_core::steady::SteadyStateRecord;
use sbcm_core::Trajectory;
use serde::Serialize;

use crate::error::{Error, Result};

/// Version of every CSV/JSON layout written here; bumped on any column change.
pub const FORMAT_VERSION: u32 = 1;

/// Layouts printed by `sbcm --schema`.
pub const SCHEMAS: &[(&str, &str)] = &[
    ("trajectory.csv", "t,x_0,...,x_{n-1}"),
    ("steady.csv", "gamma,delta,origin,classification,residual,x_0,...,x_{n-1}"),
    ("spectral.json", "{\"eigenvalues\": [..], \"classification\": str, \"max_imag_residual\": f, \"marginal_tol\": f}"),
    ("branch.json", "{\"gammas\": [..], \"records\": [record], \"terminated_reason\": str, \"critical_gamma\": f|null}"),
    ("graph.json", "{\"n\": int, \"edges\": [[i, j], ..], \"zealots\": {\"i\": opinion}}"),
    ("fixed_points.csv", "x1,x2,class_reduced,class_full"),
    ("nullclines.csv", "component,segment,x1,x2 (two rows per segment)"),
    ("basins.csv", "x1,x2,attractor_id,polarization (attractor_id -1 and empty polarization when unresolved)"),
    ("counts.csv", "gamma,delta,count,count_reduced"),
    ("continuation.csv", "gamma_max,delta,termination,critical_gamma,steps"),
    ("enumerate.csv", "gamma,delta,count,states,failed_starts"),
    ("portraits.csv", "gamma,delta,fixed_points,stable_full,stable_reduced,stable_off_line (on neither x1 = x2 nor x1 = -x2),unresolved"),
];

/// Shortest round-trip text for a float; switches to exponent form for extreme magnitudes.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::usage(format!("{}: {other:?}", path.display())),
    }
}

pub fn create_csv(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(csv_err(path))
}

fn state_header(prefix: &[&str], n: usize) -> Vec<String> {
    prefix
        .iter()
        .map(|s| s.to_string())
        .chain((0..n).map(|i| format!("x_{i}")))
        .collect()
}

pub fn write_trajectory<W: Write>(out: W, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = traj.states.first().map_or(0, |s| s.len());
    w.write_record(state_header(&["t"], n))?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        w.write_record(std::iter::once(num(*t)).chain(s.0.iter().map(|&x| num(x))))?;
    }
    w.flush().map_err(|e| Error::io("<trajectory>", e))?;
    Ok(())
}

pub fn write_steady<W: Write>(out: W, records: &[SteadyStateRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = records.first().map_or(0, |r| r.state.len());
    w.write_record(state_header(&["gamma", "delta", "origin", "classification", "residual"], n))?;
    for r in records {
        let head = [
            num(r.params.gamma),
            num(r.params.delta),
            r.origin.as_str().to_string(),
            r.classification.as_str().to_string(),
            num(r.residual),
        ];
        w.write_record(head.into_iter().chain(r.state.0.iter().map(|&x| num(x))))?;
    }
    w.flush().map_err(|e| Error::io("<steady>", e))?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

pub fn spectral_json(report: &SpectralReport) -> Result<String> {
    to_json(report)
}

/// Writes `fixed_points.csv`, `nullclines.csv` and `basins.csv` into `dir`.
pub fn write_portrait(dir: &Path, portrait: &PhasePortrait) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join("fixed_points.csv");
    let mut w = create_csv(&path)?;
    w.write_record(["x1", "x2", "class_reduced", "class_full"])?;
    for f in &portrait.fixed_points {
        w.write_record([num(f.x1), num(f.x2), f.reduced.as_str().into(), f.full.as_str().into()])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("nullclines.csv");
    let mut w = create_csv(&path)?;
    w.write_record(["component", "segment", "x1", "x2"])?;
    for (k, s) in portrait.nullclines.iter().enumerate() {
        for p in [s.start, s.end] {
            w.write_record([s.component.to_string(), k.to_string(), num(p.0), num(p.1)])?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("basins.csv");
    let mut w = create_csv(&path)?;
    w.write_record(["x1", "x2", "attractor_id", "polarization"])?;
    for b in &portrait.basins {
        w.write_record([
            num(b.x1),
            num(b.x2),
            b.attractor.map_or("-1".to_string(), |a| a.to_string()),
            b.polarization.map_or(String::new(), num),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(())
}
