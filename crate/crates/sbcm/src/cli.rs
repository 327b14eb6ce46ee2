use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sbcm_core::analytic::{
    be_unstable_subspace, critical_gammas, g_function, h_function, path_harmonic_stability, path_top_eigenvalue,
    solve_y, unit_gap_weight, zero_gap_weight,
};
use sbcm_core::reduced::{CliqueReduction, GridSpec};
use sbcm_core::spectral::{self, instability_certificate, isolation_check, DEFAULT_MARGINAL_TOL};
use sbcm_core::steady::{
    continue_in_gamma, enumerate_steady_states, find_steady_state, harmonic_state, multistart_guesses, StepPolicy,
};
use sbcm_core::{integrate, Graph, IntegrationOptions, ModelParams, OpinionState, StepControl};
use serde_json::json;

use crate::error::{Error, Result};
use crate::formats::{self, FORMAT_VERSION, SCHEMAS};
use crate::portrait::phase_portrait_parallel;
use crate::sweep::{self, Axis, Experiment, SweepSpec};
use crate::topology::Topology;

#[derive(Parser, Debug)]
#[command(name = "sbcm", about = "Sigmoidal bounded-confidence opinion dynamics on graphs with zealots")]
#[command(disable_version_flag = true, arg_required_else_help = true)]
pub struct Cli {
    /// Print the program and file-format versions.
    #[arg(long)]
    pub version: bool,
    /// Print the layout of every file the program writes.
    #[arg(long)]
    pub schema: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate the dynamics and write a trajectory CSV.
    Simulate(SimulateArgs),
    /// Solve for one steady state and report its spectrum.
    Steady(SteadyArgs),
    /// Follow the harmonic branch in gamma at fixed delta.
    Continue(ContinueArgs),
    /// Find steady states from random starts.
    Enumerate(EnumerateArgs),
    /// Closed-form quantities for paths and balanced-exposure graphs.
    Analytic(AnalyticArgs),
    /// Run a parameter sweep from a JSON config and/or flags.
    Sweep(SweepArgs),
    /// Phase portrait of the two-class clique reduction.
    Portrait(PortraitArgs),
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    /// Graph reference: karate, path:N, cliques:K:aligned|unaligned, gateway, json:FILE, edges:FILE[:ZEALOTS].
    #[arg(long, short)]
    pub topology: String,
    #[arg(long, short)]
    pub gamma: f64,
    #[arg(long, short)]
    pub delta: f64,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 100.0)]
    pub horizon: f64,
    /// Initial state: harmonic, uniform:V, random:SEED, or file:PATH (JSON array of all node opinions).
    #[arg(long, default_value = "random:0")]
    pub init: String,
    /// Stop once max |F| falls below this; 0 disables the early stop.
    #[arg(long, default_value_t = 1e-10)]
    pub stop_tol: f64,
    /// Use fixed-step RK4 with this step instead of the adaptive integrator.
    #[arg(long)]
    pub fixed_dt: Option<f64>,
    #[arg(long, default_value_t = 1e-8)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub atol: f64,
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
    /// Output CSV; standard output when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SteadyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Newton start, in the same forms as `simulate --init`.
    #[arg(long, default_value = "harmonic")]
    pub init: String,
    #[arg(long, default_value_t = sbcm_core::steady::DEFAULT_TOL)]
    pub tol: f64,
    /// Write the steady-state CSV instead of JSON.
    #[arg(long)]
    pub csv: bool,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ContinueArgs {
    #[arg(long, short)]
    pub topology: String,
    #[arg(long, short)]
    pub delta: f64,
    #[arg(long)]
    pub gamma_max: f64,
    #[arg(long, default_value_t = StepPolicy::default().initial_step)]
    pub initial_step: f64,
    #[arg(long, default_value_t = StepPolicy::default().min_step)]
    pub min_step: f64,
    #[arg(long, default_value_t = StepPolicy::default().max_step)]
    pub max_step: f64,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EnumerateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 100)]
    pub starts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the steady-state CSV instead of JSON.
    #[arg(long)]
    pub csv: bool,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AnalyticArgs {
    #[arg(long, short)]
    pub delta: f64,
    /// Also evaluate g, h and the stability verdict at this gamma.
    #[arg(long, short)]
    pub gamma: Option<f64>,
    /// Path length for the top eigenvalue of the harmonic state (needs --gamma).
    #[arg(long, short)]
    pub n: Option<usize>,
    /// Balanced-exposure graph for the unstable subspace (needs --gamma).
    #[arg(long, short)]
    pub topology: Option<String>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// JSON config; any flag below overrides the matching field.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub experiment: Option<Experiment>,
    #[arg(long, short)]
    pub topology: Option<String>,
    /// min:max:points[:log]
    #[arg(long, short)]
    pub gamma: Option<String>,
    /// min:max:points[:log]
    #[arg(long, short)]
    pub delta: Option<String>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to $SBCM_WORKERS, then the CPU count.
    #[arg(long, short)]
    pub workers: Option<usize>,
    /// polarized or consensus (family_counts).
    #[arg(long)]
    pub family: Option<String>,
    /// anti or diagonal (line_counts, portrait).
    #[arg(long)]
    pub line: Option<String>,
    #[arg(long)]
    pub scan_points: Option<usize>,
    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long)]
    pub portrait_resolution: Option<usize>,
}

#[derive(Args, Debug)]
pub struct PortraitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = GridSpec::default().resolution)]
    pub resolution: usize,
    #[arg(long, default_value_t = GridSpec::default().min, allow_hyphen_values = true)]
    pub min: f64,
    #[arg(long, default_value_t = GridSpec::default().max, allow_hyphen_values = true)]
    pub max: f64,
    #[arg(long, short)]
    pub workers: Option<usize>,
    /// Directory for fixed_points.csv, nullclines.csv and basins.csv.
    #[arg(long, short)]
    pub out: PathBuf,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn params(m: &ModelArgs) -> Result<(Graph, ModelParams)> {
    let g = m.topology.parse::<Topology>()?.graph()?;
    Ok((g, ModelParams::new(m.gamma, m.delta)?))
}

fn initial_state(g: &Graph, spec: &str) -> Result<OpinionState> {
    let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
    let bad = || Error::usage(format!("initial state {spec:?} is not harmonic, uniform:V, random:SEED or file:PATH"));
    match kind {
        "harmonic" => Ok(harmonic_state(g)?),
        "uniform" => Ok(OpinionState::uniform(g, arg.parse().map_err(|_| bad())?)),
        "random" => {
            let seed = arg.parse().map_err(|_| bad())?;
            Ok(multistart_guesses(g, 1, seed).remove(0))
        }
        "file" => {
            let text = fs::read_to_string(arg).map_err(|e| Error::io(arg, e))?;
            let values: Vec<f64> = serde_json::from_str(&text)?;
            Ok(OpinionState::new(g, values)?)
        }
        _ => Err(bad()),
    }
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let (g, p) = params(&a.model)?;
    let x0 = initial_state(&g, &a.init)?;
    let control = match a.fixed_dt {
        Some(dt) => StepControl::Fixed { dt },
        None => match StepControl::default() {
            StepControl::Adaptive { min_step, max_steps, .. } => StepControl::Adaptive {
                rtol: a.rtol,
                atol: a.atol,
                min_step,
                max_steps,
            },
            fixed => fixed,
        },
    };
    let opts = IntegrationOptions {
        control,
        stop_tol: (a.stop_tol > 0.0).then_some(a.stop_tol),
        record_every: a.record_every,
    };
    let traj = integrate(&g, &x0, &p, a.horizon, &opts)?;
    let mut buf = Vec::new();
    formats::write_trajectory(&mut buf, &traj)?;
    emit(a.out.as_deref(), &String::from_utf8_lossy(&buf))
}

fn steady(a: &SteadyArgs) -> Result<()> {
    let (g, p) = params(&a.model)?;
    let guess = initial_state(&g, &a.init)?;
    let rec = find_steady_state(&g, &p, &guess, a.tol)?;
    if a.csv {
        let mut buf = Vec::new();
        formats::write_steady(&mut buf, std::slice::from_ref(&rec))?;
        return emit(a.out.as_deref(), &String::from_utf8_lossy(&buf));
    }
    let report = spectral::classify(&g, &rec.state, &p)?;
    let value = json!({
        "record": rec,
        "spectral": report,
        "isolation": isolation_check(&g, &rec.state, &p),
        "instability_certificate": instability_certificate(&g, &rec.state, &p),
    });
    emit(a.out.as_deref(), &formats::to_json(&value)?)
}

fn continuation(a: &ContinueArgs) -> Result<()> {
    let g = a.topology.parse::<Topology>()?.graph()?;
    let policy = StepPolicy {
        initial_step: a.initial_step,
        min_step: a.min_step,
        max_step: a.max_step,
    };
    let branch = continue_in_gamma(&g, a.delta, a.gamma_max, &policy)?;
    emit(a.out.as_deref(), &formats::to_json(&branch)?)
}

fn enumerate(a: &EnumerateArgs) -> Result<()> {
    let (g, p) = params(&a.model)?;
    let e = enumerate_steady_states(&g, &p, a.starts, a.seed)?;
    if a.csv {
        let mut buf = Vec::new();
        formats::write_steady(&mut buf, &e.records)?;
        return emit(a.out.as_deref(), &String::from_utf8_lossy(&buf));
    }
    emit(a.out.as_deref(), &formats::to_json(&e)?)
}

fn analytic(a: &AnalyticArgs) -> Result<()> {
    let y = solve_y();
    let mut value = json!({
        "delta": a.delta,
        "y": y,
        "always_stable_above_delta": 1.0 - y,
        "critical_gammas": critical_gammas(a.delta)?,
    });
    if let Some(gamma) = a.gamma {
        ModelParams::new(gamma, a.delta)?;
        let v = unit_gap_weight(gamma, a.delta);
        let u = zero_gap_weight(gamma, a.delta);
        value["gamma"] = json!(gamma);
        value["g"] = json!(g_function(gamma, a.delta));
        value["h"] = json!(h_function(gamma, a.delta));
        value["v"] = json!(v);
        value["u"] = json!(u);
        value["harmonic_stability"] = json!(path_harmonic_stability(gamma, a.delta, DEFAULT_MARGINAL_TOL));
        if let Some(n) = a.n {
            value["path_top_eigenvalue"] = json!(path_top_eigenvalue(n, gamma, a.delta));
        }
        if let Some(t) = &a.topology {
            let g = t.parse::<Topology>()?.graph()?;
            let sub = be_unstable_subspace(&g, gamma, a.delta)?;
            value["balanced_exposure"] = json!({
                "threshold": sub.threshold,
                "unstable_dimension": sub.dim(),
                "laplacian_eigenvalues": sub.eigenpairs.iter().map(|e| e.0).collect::<Vec<_>>(),
            });
        }
    } else if a.n.is_some() || a.topology.is_some() {
        return Err(Error::usage("--n and --topology need --gamma"));
    }
    emit(None, &formats::to_json(&value)?)
}

fn parse_named<T: serde::de::DeserializeOwned>(name: &str, value: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| Error::usage(format!("unknown {name} {value:?}")))
}

pub fn sweep_spec(a: &SweepArgs) -> Result<SweepSpec> {
    let mut v: serde_json::Value = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::usage(format!("{}: {e}", p.display())))?
        }
        None => json!({}),
    };
    let obj = v
        .as_object_mut()
        .ok_or_else(|| Error::usage("sweep config must be a JSON object"))?;
    let mut set = |k: &str, val: serde_json::Value| {
        obj.insert(k.to_string(), val);
    };
    if let Some(e) = a.experiment {
        set("experiment", serde_json::to_value(e)?);
    }
    if let Some(t) = &a.topology {
        set("topology", json!(t));
    }
    if let Some(g) = &a.gamma {
        set("gamma", serde_json::to_value(g.parse::<Axis>()?)?);
    }
    if let Some(d) = &a.delta {
        set("delta", serde_json::to_value(d.parse::<Axis>()?)?);
    }
    if let Some(o) = &a.output {
        set("output", json!(o));
    }
    if let Some(s) = a.seed {
        set("seed", json!(s));
    }
    if let Some(w) = a.workers {
        set("workers", json!(w));
    }
    if let Some(f) = &a.family {
        let kind: sbcm_core::reduced::FamilyKind = parse_named("family", f)?;
        set("family", serde_json::to_value(kind)?);
    }
    if let Some(l) = &a.line {
        let line: sbcm_core::reduced::Line = parse_named("line", l)?;
        set("line", serde_json::to_value(line)?);
    }
    if let Some(s) = a.scan_points {
        set("scan_points", json!(s));
    }
    if let Some(s) = a.starts {
        set("starts", json!(s));
    }
    if let Some(r) = a.portrait_resolution {
        set("portrait_resolution", json!(r));
    }
    let spec: SweepSpec = serde_json::from_value(v).map_err(|e| Error::usage(format!("sweep spec: {e}")))?;
    spec.validate()?;
    Ok(spec)
}

fn run_sweep(a: &SweepArgs) -> Result<()> {
    let spec = sweep_spec(a)?;
    let outcome = sweep::run_sweep(&spec)?;
    log::info!("wrote {} ({} cells, {} resumed)", outcome.results.display(), outcome.cells, outcome.resumed);
    Ok(())
}

fn portrait(a: &PortraitArgs) -> Result<()> {
    let topo: Topology = a.model.topology.parse()?;
    let red = CliqueReduction::new(topo.cliques()?);
    let p = ModelParams::new(a.model.gamma, a.model.delta)?;
    if a.resolution == 0 || !(a.min < a.max) {
        return Err(Error::usage("portrait grid needs resolution >= 1 and min < max"));
    }
    let grid = GridSpec {
        min: a.min,
        max: a.max,
        resolution: a.resolution,
    };
    let workers = sweep::resolve_workers(a.workers)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::usage(format!("cannot start {workers} workers: {e}")))?;
    let pp = pool.install(|| phase_portrait_parallel(&red, &p, &grid))?;
    formats::write_portrait(&a.out, &pp)
}

fn version_text() -> String {
    let mut s = format!("sbcm {}\nformat version {FORMAT_VERSION}\n", env!("CARGO_PKG_VERSION"));
    for (name, _) in SCHEMAS {
        s += &format!("  {name} v{FORMAT_VERSION}\n");
    }
    s
}

fn schema_text() -> Result<String> {
    let files: serde_json::Map<String, serde_json::Value> =
        SCHEMAS.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
    formats::to_json(&json!({
        "format_version": FORMAT_VERSION,
        "files": files,
        "sweep_config": {
            "experiment": "family_counts | line_counts | continuation | enumerate | portrait",
            "topology": "karate | path:N | cliques:K:aligned|unaligned | gateway | json:FILE | edges:FILE[:ZEALOTS]",
            "gamma": {"min": "f64", "max": "f64", "points": "usize >= 1", "scale": "linear | log (default linear)"},
            "delta": "same as gamma",
            "output": "directory",
            "seed": "u64 (default 0)",
            "workers": "usize (optional; default $SBCM_WORKERS, then CPU count)",
            "family": "polarized | consensus (optional)",
            "line": "anti | diagonal (optional)",
            "scan_points": "usize (default 2001)",
            "starts": "usize (default 100)",
            "portrait_resolution": "usize (default 51)",
        },
    }))
}

/// Runs the parsed command line; the error carries the exit code.
pub fn run(cli: &Cli) -> Result<()> {
    if cli.version {
        return emit(None, &version_text());
    }
    if cli.schema {
        return emit(None, &schema_text()?);
    }
    match &cli.command {
        Some(Command::Simulate(a)) => simulate(a),
        Some(Command::Steady(a)) => steady(a),
        Some(Command::Continue(a)) => continuation(a),
        Some(Command::Enumerate(a)) => enumerate(a),
        Some(Command::Analytic(a)) => analytic(a),
        Some(Command::Sweep(a)) => run_sweep(a),
        Some(Command::Portrait(a)) => portrait(a),
        None => Err(Error::usage("no subcommand given; see --help")),
    }
}
