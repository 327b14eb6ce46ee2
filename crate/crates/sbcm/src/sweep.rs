//! Parameter sweeps over a `(gamma, delta)` grid.
//!
//! Each finished cell is appended to `journal.jsonl` in the output directory. A rerun
//! with the same spec skips the cells already in the journal, and the final CSV is
//! rebuilt from the journal in cell order, so the bytes never depend on worker count
//! or on how often the run was interrupted.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rayon::prelude::*;
use sbcm_core::reduced::{count_stable_family, count_stable_on_line, CliqueReduction, FamilyKind, FamilySpec, GridSpec, Line};
use sbcm_core::spectral::Classification;
use sbcm_core::steady::{continue_in_gamma, enumerate_steady_states, StepPolicy};
use sbcm_core::{Graph, ModelParams};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{self, num};
use crate::portrait::phase_portrait_parallel;
use crate::topology::Topology;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "SBCM_WORKERS";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default)]
    pub scale: Scale,
}

impl Axis {
    pub fn linear(min: f64, max: f64, points: usize) -> Self {
        Axis { min, max, points, scale: Scale::Linear }
    }

    pub fn log(min: f64, max: f64, points: usize) -> Self {
        Axis { min, max, points, scale: Scale::Log }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if self.points == 0 {
            return Err(Error::usage(format!("{name} axis needs at least one point")));
        }
        if !(self.min.is_finite() && self.max.is_finite()) || self.min > self.max {
            return Err(Error::usage(format!("{name} axis needs finite min <= max")));
        }
        if self.scale == Scale::Log && self.min <= 0.0 {
            return Err(Error::usage(format!("{name} axis is logarithmic and needs min > 0")));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|k| {
                if k == 0 {
                    return self.min;
                }
                if k + 1 == self.points {
                    return self.max;
                }
                let t = k as f64 / last;
                match self.scale {
                    Scale::Linear => self.min + t * (self.max - self.min),
                    Scale::Log => (self.min.ln() + t * (self.max.ln() - self.min.ln())).exp(),
                }
            })
            .collect()
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    /// `min:max:points` or `min:max:points:log`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::usage(format!("axis {s:?} is not min:max:points[:log|:linear]"));
        if !(3..=4).contains(&parts.len()) {
            return Err(bad());
        }
        let min = parts[0].parse().map_err(|_| bad())?;
        let max = parts[1].parse().map_err(|_| bad())?;
        let points = parts[2].parse().map_err(|_| bad())?;
        let scale = match parts.get(3) {
            None | Some(&"linear") => Scale::Linear,
            Some(&"log") => Scale::Log,
            _ => return Err(bad()),
        };
        Ok(Axis { min, max, points, scale })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Experiment {
    /// Stable members of a one-parameter path family (needs `path:N`).
    FamilyCounts,
    /// Stable steady states on an invariant line of the clique reduction (needs `cliques:..`).
    LineCounts,
    /// Continuation from the harmonic state up to the largest gamma, one branch per delta.
    Continuation,
    /// Multistart enumeration of steady states.
    Enumerate,
    /// Phase portrait of the clique reduction, one bundle per cell.
    Portrait,
}

fn default_scan() -> usize {
    sbcm_core::reduced::DEFAULT_SCAN
}
fn default_starts() -> usize {
    100
}
fn default_portrait_resolution() -> usize {
    51
}

/// A sweep as read from a JSON config. Every field can be overridden on the command line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub experiment: Experiment,
    pub topology: String,
    pub gamma: Axis,
    pub delta: Axis,
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Falls back to `SBCM_WORKERS`, then to the number of CPUs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Path family for `family_counts`; polarized when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyKind>,
    /// Invariant line for `line_counts`; the anti-diagonal when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<Line>,
    #[serde(default = "default_scan")]
    pub scan_points: usize,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default = "default_portrait_resolution")]
    pub portrait_resolution: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.gamma.validate("gamma")?;
        self.delta.validate("delta")?;
        if self.gamma.min < 0.0 || self.delta.min < 0.0 {
            return Err(Error::usage("gamma and delta must be nonnegative"));
        }
        if self.workers == Some(0) {
            return Err(Error::usage("workers must be at least 1"));
        }
        if self.scan_points < 2 || self.starts == 0 || self.portrait_resolution == 0 {
            return Err(Error::usage("scan_points >= 2, starts >= 1 and portrait_resolution >= 1 are required"));
        }
        Ok(())
    }

    pub fn results_file(&self) -> &'static str {
        match self.experiment {
            Experiment::FamilyCounts | Experiment::LineCounts => "counts.csv",
            Experiment::Continuation => "continuation.csv",
            Experiment::Enumerate => "enumerate.csv",
            Experiment::Portrait => "portraits.csv",
        }
    }

    fn header(&self) -> &'static [&'static str] {
        match self.experiment {
            Experiment::FamilyCounts | Experiment::LineCounts => &["gamma", "delta", "count", "count_reduced"],
            Experiment::Continuation => &["gamma_max", "delta", "termination", "critical_gamma", "steps"],
            Experiment::Enumerate => &["gamma", "delta", "count", "states", "failed_starts"],
            Experiment::Portrait => &[
                "gamma",
                "delta",
                "fixed_points",
                "stable_full",
                "stable_reduced",
                "stable_off_line",
                "unresolved",
            ],
        }
    }

    /// The spec with run-only fields cleared, used to recognise a resumable journal.
    fn fingerprint(&self) -> Result<String> {
        let mut s = self.clone();
        s.workers = None;
        s.output = PathBuf::new();
        Ok(serde_json::to_string(&s)?)
    }

    fn cells(&self) -> Vec<(f64, f64)> {
        let gammas = self.gamma.values();
        let deltas = self.delta.values();
        match self.experiment {
            Experiment::Continuation => deltas.iter().map(|&d| (self.gamma.max, d)).collect(),
            _ => deltas
                .iter()
                .flat_map(|&d| gammas.iter().map(move |&g| (g, d)))
                .collect(),
        }
    }
}

pub fn resolve_workers(requested: Option<usize>) -> Result<usize> {
    if let Some(w) = requested {
        return Ok(w);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(w) if w > 0 => Ok(w),
            _ => Err(Error::usage(format!("{WORKERS_ENV}={v:?} is not a positive integer"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Everything a cell needs, built once per sweep.
enum Context {
    Family(FamilySpec),
    Line(CliqueReduction, Line),
    Graph(Graph),
}

fn context(spec: &SweepSpec) -> Result<Context> {
    let topo: Topology = spec.topology.parse()?;
    Ok(match spec.experiment {
        Experiment::FamilyCounts => Context::Family(FamilySpec::new(
            spec.family.unwrap_or(FamilyKind::Polarized),
            topo.path_length()?,
        )?),
        Experiment::LineCounts | Experiment::Portrait => {
            Context::Line(CliqueReduction::new(topo.cliques()?), spec.line.unwrap_or(Line::Anti))
        }
        Experiment::Continuation | Experiment::Enumerate => Context::Graph(topo.graph()?),
    })
}

fn run_cell(spec: &SweepSpec, ctx: &Context, index: usize, gamma: f64, delta: f64) -> Result<Vec<String>> {
    let params = ModelParams::new(gamma, delta)?;
    let row = match (spec.experiment, ctx) {
        (Experiment::FamilyCounts, Context::Family(fam)) => {
            let c = count_stable_family(fam, &params, spec.scan_points)?;
            vec![num(gamma), num(delta), c.count.to_string(), c.count_reduced.to_string()]
        }
        (Experiment::LineCounts, Context::Line(red, line)) => {
            let c = count_stable_on_line(red, &params, *line, spec.scan_points)?;
            vec![num(gamma), num(delta), c.count.to_string(), c.count_reduced.to_string()]
        }
        (Experiment::Continuation, Context::Graph(g)) => {
            let b = continue_in_gamma(g, delta, gamma, &StepPolicy::default())?;
            let reason = serde_json::to_value(b.terminated_reason)?;
            vec![
                num(gamma),
                num(delta),
                reason.as_str().unwrap_or_default().to_string(),
                b.critical_gamma.map_or(String::new(), num),
                b.gammas.len().to_string(),
            ]
        }
        (Experiment::Enumerate, Context::Graph(g)) => {
            let e = enumerate_steady_states(g, &params, spec.starts, spec.seed.wrapping_add(index as u64))?;
            let stable = e.records.iter().filter(|r| r.is_stable()).count();
            vec![
                num(gamma),
                num(delta),
                stable.to_string(),
                e.records.len().to_string(),
                e.failed_starts.to_string(),
            ]
        }
        (Experiment::Portrait, Context::Line(red, _)) => {
            let grid = GridSpec {
                resolution: spec.portrait_resolution,
                ..GridSpec::default()
            };
            let p = phase_portrait_parallel(red, &params, &grid)?;
            formats::write_portrait(&spec.output.join(format!("portrait_{index:05}")), &p)?;
            let stable = |f: &&sbcm_core::reduced::ReducedFixedPoint| f.full == Classification::Stable;
            vec![
                num(gamma),
                num(delta),
                p.fixed_points.len().to_string(),
                p.fixed_points.iter().filter(stable).count().to_string(),
                p.fixed_points
                    .iter()
                    .filter(|f| f.reduced == Classification::Stable)
                    .count()
                    .to_string(),
                p.fixed_points
                    .iter()
                    .filter(stable)
                    .filter(|f| (f.x1 + f.x2).abs() > 1e-6 && (f.x1 - f.x2).abs() > 1e-6)
                    .count()
                    .to_string(),
                p.basins.iter().filter(|b| b.attractor.is_none()).count().to_string(),
            ]
        }
        _ => unreachable!("context matches experiment"),
    };
    Ok(row)
}

#[derive(Serialize, Deserialize)]
struct JournalEntry {
    index: usize,
    row: Vec<String>,
}

fn read_journal(path: &Path) -> Result<BTreeMap<usize, Vec<String>>> {
    let mut done = BTreeMap::new();
    let file = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(done),
        Err(e) => return Err(Error::io(path, e)),
    };
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        // a line cut short by an interrupt is simply recomputed
        if let Ok(entry) = serde_json::from_str::<JournalEntry>(&line) {
            done.insert(entry.index, entry.row);
        }
    }
    Ok(done)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutcome {
    pub results: PathBuf,
    pub cells: usize,
    /// Cells taken from an earlier journal instead of recomputed.
    pub resumed: usize,
}

/// Runs every cell not yet in the journal, then writes the results CSV.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome> {
    run_sweep_limited(spec, usize::MAX)
}

/// Like [`run_sweep`] but stops after computing `limit` new cells, leaving the journal
/// as an interrupted run would. An incomplete run writes no results CSV, and the
/// outcome's `cells` counts only the finished cells.
pub fn run_sweep_limited(spec: &SweepSpec, limit: usize) -> Result<SweepOutcome> {
    spec.validate()?;
    let ctx = context(spec)?;
    let out = &spec.output;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let spec_path = out.join("spec.json");
    let journal_path = out.join("journal.jsonl");
    let fingerprint = spec.fingerprint()?;
    match fs::read_to_string(&spec_path) {
        Ok(prev) if prev.trim_end() == fingerprint => {}
        Ok(_) if journal_path.exists() => {
            return Err(Error::usage(format!(
                "{} holds a journal for a different sweep; use another output directory",
                out.display()
            )))
        }
        _ => fs::write(&spec_path, format!("{fingerprint}\n")).map_err(|e| Error::io(&spec_path, e))?,
    }

    let cells = spec.cells();
    let done = read_journal(&journal_path)?;
    let todo: Vec<usize> = (0..cells.len()).filter(|i| !done.contains_key(i)).take(limit).collect();
    let resumed = done.len();
    log::info!(
        "sweep: {} cells, {} from journal, {} to compute",
        cells.len(),
        resumed,
        todo.len()
    );

    let journal = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&journal_path)
        .map_err(|e| Error::io(&journal_path, e))?;
    let sink = Mutex::new(journal);
    let finished = AtomicUsize::new(0);
    let report_every = (todo.len() / 20).max(1);
    let workers = resolve_workers(spec.workers)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::usage(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| {
        todo.par_iter().try_for_each(|&index| -> Result<()> {
            let (gamma, delta) = cells[index];
            let row = run_cell(spec, &ctx, index, gamma, delta)?;
            let line = serde_json::to_string(&JournalEntry { index, row })? + "\n";
            {
                let mut f = sink.lock().expect("journal lock");
                f.write_all(line.as_bytes())
                    .and_then(|_| f.flush())
                    .map_err(|e| Error::io(&journal_path, e))?;
            }
            let k = finished.fetch_add(1, Ordering::Relaxed) + 1;
            if k % report_every == 0 || k == todo.len() {
                log::info!("sweep: {k}/{} cells", todo.len());
            }
            Ok(())
        })
    })?;

    let rows = read_journal(&journal_path)?;
    let results = out.join(spec.results_file());
    if rows.len() < cells.len() {
        return Ok(SweepOutcome {
            results,
            cells: rows.len(),
            resumed,
        });
    }
    let mut w = formats::create_csv(&results)?;
    w.write_record(spec.header())?;
    for index in 0..cells.len() {
        w.write_record(&rows[&index])?;
    }
    w.flush().map_err(|e| Error::io(&results, e))?;
    Ok(SweepOutcome {
        results,
        cells: cells.len(),
        resumed,
    })
}
