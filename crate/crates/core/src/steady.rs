//! Steady states: the harmonic state, Newton solves, continuation in `gamma`,
//! multistart enumeration, and a probe of the large-`gamma` limit.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{hk_velocity, hk_velocity_strict, max_abs, residual, velocity, ModelParams, OpinionState};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::integrate::{integrate, IntegrationOptions};
use crate::spectral::{self, jacobian_matrix, Classification};

pub const DEFAULT_TOL: f64 = 1e-10;
/// Condition estimate above which a Jacobian counts as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;
/// States closer than this in the max norm are merged.
pub const MERGE_RADIUS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Origin {
    Harmonic,
    Newton,
    Continuation,
    Integration,
}

impl Origin {
    pub fn as_str(&self) -> &'static str {
        match self {
            Origin::Harmonic => "harmonic",
            Origin::Newton => "newton",
            Origin::Continuation => "continuation",
            Origin::Integration => "integration",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SteadyStateRecord {
    pub state: OpinionState,
    /// `max |F(x)|`.
    pub residual: f64,
    pub params: ModelParams,
    pub classification: Classification,
    /// Largest eigenvalue of `J_P`; `None` when there are no persuadable nodes.
    pub top_eigenvalue: Option<f64>,
    pub origin: Origin,
}

impl SteadyStateRecord {
    /// Evaluates residual and spectrum of `state` from scratch.
    pub fn classify(graph: &Graph, state: OpinionState, params: &ModelParams, origin: Origin) -> Result<Self> {
        let report = spectral::classify(graph, &state, params)?;
        Ok(SteadyStateRecord {
            residual: residual(graph, &state, params),
            params: *params,
            classification: report.classification,
            top_eigenvalue: report.top(),
            state,
            origin,
        })
    }

    pub fn is_stable(&self) -> bool {
        self.classification == Classification::Stable
    }
}

/// Solves for the state in which every persuadable opinion is the mean of its
/// neighbors' opinions.
///
/// Each persuadable component must border a zealot; otherwise the error names the
/// smallest node id of the offending component.
pub fn harmonic_state(graph: &Graph) -> Result<OpinionState> {
    for comp in graph.persuadable_components().components {
        if !comp.iter().any(|&i| graph.zealot_degree(i) > 0) {
            return Err(Error::ZealotFreeComponent(comp[0]));
        }
    }
    let pers = graph.persuadable();
    let n = pers.len();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for (r, &i) in pers.iter().enumerate() {
        a[(r, r)] = graph.degree(i) as f64;
        for &j in graph.neighbors(i) {
            match graph.persuadable_index(j) {
                Some(c) => a[(r, c)] -= 1.0,
                None => b[r] += graph.zealot_opinion(j).expect("non-persuadable node is a zealot"),
            }
        }
    }
    let chol = a.cholesky().ok_or(Error::SingularJacobian {
        condition: f64::INFINITY,
    })?;
    let x = chol.solve(&b);
    Ok(OpinionState::from_persuadable(graph, x.as_slice()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverOptions {
    /// Target for `max |F(x)|`.
    pub tol: f64,
    /// Newton iterations per attempt; every fallback starts a fresh attempt.
    pub max_iterations: usize,
    /// Integrate the flow for this long before Newton. The flow settles on stable
    /// states, so this biases the result toward them.
    pub relax: Option<f64>,
    /// Integration time used when Newton stalls.
    pub fallback_horizon: f64,
    pub max_fallbacks: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: DEFAULT_TOL,
            max_iterations: 100,
            relax: None,
            fallback_horizon: 50.0,
            max_fallbacks: 20,
        }
    }
}

enum NewtonStop {
    Converged,
    Stalled,
    Singular(f64),
    MaxIterations,
}

/// Damped Newton on persuadable coordinates. `x` is updated in place.
///
/// Iterates are projected onto the zealot-opinion interval, which contains every
/// steady state of a component that borders a zealot. Outside it weights underflow
/// and Newton can otherwise wander off to spurious near-roots.
fn newton(graph: &Graph, params: &ModelParams, x: &mut [f64], tol: f64, max_iterations: usize) -> (NewtonStop, usize) {
    let pers = graph.persuadable();
    let (lo, hi) = graph.zealot_hull().unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let n = pers.len();
    let mut f = vec![0.0; n];
    let mut trial = x.to_vec();
    let mut ftrial = vec![0.0; n];
    crate::dynamics::persuadable_velocity_into(graph, x, params, &mut f);
    let mut norm = max_abs(&f);
    for it in 0..max_iterations {
        if norm < tol {
            return (NewtonStop::Converged, it);
        }
        let jac = jacobian_matrix(graph, x, params);
        let sv = jac.singular_values();
        let smax = sv.max();
        let smin = sv.min();
        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(cond <= SINGULAR_CONDITION) {
            return (NewtonStop::Singular(cond), it);
        }
        let rhs = -DVector::from_column_slice(&f);
        let step = match jac.lu().solve(&rhs) {
            Some(s) => s,
            None => return (NewtonStop::Singular(f64::INFINITY), it),
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda >= 1.0 / 1024.0 {
            trial.copy_from_slice(x);
            for (k, &i) in pers.iter().enumerate() {
                trial[i] = (trial[i] + lambda * step[k]).clamp(lo, hi);
            }
            crate::dynamics::persuadable_velocity_into(graph, &trial, params, &mut ftrial);
            let tnorm = max_abs(&ftrial);
            if tnorm < (1.0 - 1e-4 * lambda) * norm || tnorm < tol {
                accepted = true;
                x.copy_from_slice(&trial);
                core::mem::swap(&mut f, &mut ftrial);
                norm = tnorm;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return (NewtonStop::Stalled, it);
        }
    }
    if norm < tol {
        (NewtonStop::Converged, max_iterations)
    } else {
        (NewtonStop::MaxIterations, max_iterations)
    }
}

/// Newton solve from `guess` with default options and the given tolerance.
pub fn find_steady_state(graph: &Graph, params: &ModelParams, guess: &OpinionState, tol: f64) -> Result<SteadyStateRecord> {
    find_steady_state_with(
        graph,
        params,
        guess,
        &SolverOptions {
            tol,
            ..SolverOptions::default()
        },
    )
}

/// Damped Newton with backtracking; whenever Newton stalls or meets a singular
/// Jacobian the flow is integrated for a while and Newton resumes from there.
///
/// Zealot entries of `guess` are overwritten with the pinned opinions.
pub fn find_steady_state_with(
    graph: &Graph,
    params: &ModelParams,
    guess: &OpinionState,
    options: &SolverOptions,
) -> Result<SteadyStateRecord> {
    let n = graph.node_count();
    if guess.len() != n {
        return Err(Error::StateLength {
            expected: n,
            found: guess.len(),
        });
    }
    if let Some(i) = guess.0.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState(i));
    }
    let mut x = guess.0.clone();
    for (&node, &z) in graph.zealots() {
        x[node] = z;
    }
    let mut origin = Origin::Newton;
    let tol = options.tol;
    if let Some(horizon) = options.relax {
        x = relax(graph, params, x, horizon, tol)?;
        origin = Origin::Integration;
    }
    let mut fallbacks = 0;
    let mut last_singular;
    // Newton works on a copy; a failed attempt must not drag the flow onto a plateau
    let mut trial = x.clone();
    loop {
        let (stop, _) = newton(graph, params, &mut trial, tol, options.max_iterations);
        match stop {
            NewtonStop::Converged => {
                let state = OpinionState(trial);
                let record = SteadyStateRecord::classify(graph, state, params, origin)?;
                debug_assert!(record.residual < tol);
                return Ok(record);
            }
            NewtonStop::Singular(c) => last_singular = Some(c),
            NewtonStop::Stalled | NewtonStop::MaxIterations => last_singular = None,
        }
        if fallbacks >= options.max_fallbacks {
            break;
        }
        fallbacks += 1;
        origin = Origin::Integration;
        x = relax(graph, params, x, options.fallback_horizon, tol)?;
        trial.clone_from(&x);
    }
    if let Some(condition) = last_singular {
        return Err(Error::SingularJacobian { condition });
    }
    let state = OpinionState(x);
    Err(Error::NonConvergence {
        residual: residual(graph, &state, params),
        best: state.0,
    })
}

fn relax(graph: &Graph, params: &ModelParams, x: Vec<f64>, horizon: f64, tol: f64) -> Result<Vec<f64>> {
    let start = OpinionState(x);
    let options = IntegrationOptions {
        stop_tol: Some(tol),
        ..IntegrationOptions::endpoint_only()
    };
    match integrate(graph, &start, params, horizon, &options) {
        Ok(traj) => Ok(traj.final_state().0.clone()),
        Err(Error::IntegrationFailure { last_state, .. }) => Ok(last_state),
        Err(e) => Err(e),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepPolicy {
    pub initial_step: f64,
    /// Below this step the branch end is declared.
    pub min_step: f64,
    pub max_step: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy {
            initial_step: 0.05,
            min_step: 1e-8,
            max_step: 0.25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Termination {
    ReachedMax,
    SingularJacobian,
    Diverged,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContinuationBranch {
    pub gammas: Vec<f64>,
    pub records: Vec<SteadyStateRecord>,
    pub terminated_reason: Termination,
    /// Midpoint of the last bracketing step when the branch ends at a singularity.
    pub critical_gamma: Option<f64>,
}

/// `dx/dgamma` along the branch through `x`, from `J dx = -dF/dgamma`.
fn branch_tangent(graph: &Graph, x: &[f64], params: &ModelParams) -> Option<DVector<f64>> {
    let h = 1e-6 * params.gamma.max(1.0);
    let state = OpinionState(x.to_vec());
    let plus = ModelParams {
        gamma: params.gamma + h,
        ..*params
    };
    let minus = ModelParams {
        gamma: params.gamma - h,
        ..*params
    };
    let fp = velocity(graph, &state, &plus);
    let fm = velocity(graph, &state, &minus);
    let rhs = DVector::from_iterator(
        graph.persuadable().len(),
        graph.persuadable().iter().map(|&i| -(fp[i] - fm[i]) / (2.0 * h)),
    );
    jacobian_matrix(graph, x, params).lu().solve(&rhs)
}

/// Follows the steady state that starts at the harmonic state for `gamma = 0`.
///
/// Steps are natural-parameter steps with the previous solution as predictor. A step
/// is rejected when Newton fails, when the solution jumps further than the branch
/// tangent allows, or when the classification changes; rejected steps are halved.
/// Once the step falls below `min_step` the branch ends, as `singular_jacobian` if the
/// top eigenvalue has become small relative to its value at `gamma = 0` and as
/// `diverged` otherwise.
pub fn continue_in_gamma(graph: &Graph, delta: f64, gamma_max: f64, policy: &StepPolicy) -> Result<ContinuationBranch> {
    if !(gamma_max >= 0.0) || !(policy.min_step > 0.0) || !(policy.initial_step >= policy.min_step) {
        return Err(Error::InvalidArgument("continuation needs gamma_max >= 0 and 0 < min_step <= initial_step"));
    }
    let start = harmonic_state(graph)?;
    let mut params = ModelParams::new(0.0, delta)?;
    let first = SteadyStateRecord::classify(graph, start, &params, Origin::Harmonic)?;
    let top0 = first.top_eigenvalue.unwrap_or(-1.0).abs();
    let mut gammas = vec![0.0];
    let mut records = vec![first];
    let mut h = policy.initial_step.min(policy.max_step);
    let mut gamma = 0.0;
    let mut tangent = branch_tangent(graph, &records[0].state.0, &params);
    let pers = graph.persuadable();
    while gamma < gamma_max {
        let prev = records.last().expect("branch is never empty");
        let step = h.min(gamma_max - gamma);
        let next_gamma = if gamma_max - gamma <= h { gamma_max } else { gamma + step };
        let trial_params = ModelParams { gamma: next_gamma, delta };
        let mut x = prev.state.0.clone();
        let (stop, iterations) = newton(graph, &trial_params, &mut x, DEFAULT_TOL, 30);
        let mut accepted = None;
        if let NewtonStop::Converged = stop {
            let jump = pers.iter().fold(0.0f64, |m, &i| m.max((x[i] - prev.state.0[i]).abs()));
            let allowed = match &tangent {
                Some(t) => 3.0 * step * t.amax() + 1e-9,
                None => f64::INFINITY,
            };
            if jump <= allowed {
                let record = SteadyStateRecord::classify(graph, OpinionState(x), &trial_params, Origin::Continuation)?;
                if record.classification == prev.classification {
                    accepted = Some(record);
                }
            }
        }
        match accepted {
            Some(record) => {
                gamma = next_gamma;
                params = trial_params;
                let report = spectral::classify(graph, &record.state, &params)?;
                gammas.push(gamma);
                records.push(record);
                if report.condition() > SINGULAR_CONDITION {
                    return Ok(ContinuationBranch {
                        gammas,
                        records,
                        terminated_reason: Termination::SingularJacobian,
                        critical_gamma: Some(gamma),
                    });
                }
                tangent = branch_tangent(graph, &records.last().expect("just pushed").state.0, &params);
                if iterations <= 4 {
                    h = (h * 1.5).min(policy.max_step);
                }
            }
            None => {
                h *= 0.5;
                if h < policy.min_step {
                    let top = prev.top_eigenvalue.unwrap_or(0.0).abs();
                    let singular = top <= 1e-2 * top0;
                    return Ok(ContinuationBranch {
                        gammas,
                        records,
                        terminated_reason: if singular {
                            Termination::SingularJacobian
                        } else {
                            Termination::Diverged
                        },
                        critical_gamma: singular.then(|| gamma + h),
                    });
                }
            }
        }
    }
    Ok(ContinuationBranch {
        gammas,
        records,
        terminated_reason: Termination::ReachedMax,
        critical_gamma: None,
    })
}

/// Multistart output: distinct steady states and the number of starts that failed.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Enumeration {
    pub records: Vec<SteadyStateRecord>,
    pub failed_starts: usize,
}

/// Start states drawn uniformly from the zealot-opinion hull (or `[-1, 1]` without
/// zealots), reproducible from `seed`.
pub fn multistart_guesses(graph: &Graph, n_starts: usize, seed: u64) -> Vec<OpinionState> {
    let (lo, hi) = graph.zealot_hull().unwrap_or((-1.0, 1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = graph.persuadable().len();
    (0..n_starts)
        .map(|_| {
            let xs: Vec<f64> = (0..m)
                .map(|_| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
                .collect();
            OpinionState::from_persuadable(graph, &xs)
        })
        .collect()
}

/// Keeps the first of any records within [`MERGE_RADIUS`] of each other, in input order.
pub fn merge_records(records: impl IntoIterator<Item = SteadyStateRecord>) -> Vec<SteadyStateRecord> {
    let mut out: Vec<SteadyStateRecord> = Vec::new();
    for r in records {
        if !out.iter().any(|o| o.state.max_abs_diff(&r.state) < MERGE_RADIUS) {
            out.push(r);
        }
    }
    out
}

/// Solves from `n_starts` random starts and merges duplicates.
pub fn enumerate_steady_states(graph: &Graph, params: &ModelParams, n_starts: usize, seed: u64) -> Result<Enumeration> {
    if n_starts == 0 {
        return Err(Error::InvalidArgument("n_starts must be at least 1"));
    }
    let mut failed_starts = 0;
    let mut found = Vec::new();
    for guess in multistart_guesses(graph, n_starts, seed) {
        match find_steady_state(graph, params, &guess, DEFAULT_TOL) {
            Ok(r) => found.push(r),
            Err(_) => failed_starts += 1,
        }
    }
    Ok(Enumeration {
        records: merge_records(found),
        failed_starts,
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HkProbeEntry {
    pub gamma: f64,
    pub state: OpinionState,
    pub classification: Classification,
    /// `max |F(x)|` for the sigmoidal model.
    pub residual: f64,
    /// `max |F_inf(x)|`, boundary pairs weighted 1/2.
    pub hk_residual: f64,
    /// `max |F(x)|` with the strict indicator `(x_i - x_j)^2 < delta`.
    pub hk_strict_residual: f64,
    /// `min |(x_i - x_j)^2 - delta|` over edges with a persuadable end.
    pub min_gap_margin: f64,
    /// `min_gap_margin >= a` and the state lies within `Delta / 2` of the origin.
    pub in_band: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct HkProbeReport {
    /// Gaps are measured as `|(x_i - x_j)^2 - delta|`, not `| |x_i - x_j| - sqrt(delta) |`.
    pub gap_form: &'static str,
    pub margin: f64,
    /// `Delta`, taken as twice the largest absolute zealot opinion.
    pub hull_bound: f64,
    pub entries: Vec<HkProbeEntry>,
    /// `(gamma, error)` for every `gamma` at which no stable state was found.
    pub failures: Vec<(f64, Error)>,
}

impl HkProbeReport {
    /// Whether the HK residual strictly decreases along the entries; `None` for fewer than two.
    pub fn hk_residual_strictly_decreasing(&self) -> Option<bool> {
        (self.entries.len() >= 2).then(|| self.entries.windows(2).all(|w| w[1].hk_residual < w[0].hk_residual))
    }

    pub fn strict_residual_strictly_decreasing(&self) -> Option<bool> {
        (self.entries.len() >= 2).then(|| {
            self.entries
                .windows(2)
                .all(|w| w[1].hk_strict_residual < w[0].hk_strict_residual)
        })
    }

    pub fn final_hk_residual(&self) -> Option<f64> {
        self.entries.last().map(|e| e.hk_residual)
    }

    pub fn all_in_band(&self) -> bool {
        self.entries.iter().all(|e| e.in_band)
    }
}

/// Follows a stable steady state from `initial` through increasing `gammas` and
/// measures how close each one is to a root of the limiting operator.
///
/// At each `gamma` the flow is integrated from the previous state before Newton
/// polishes the result, so the probe stays on stable states.
pub fn hk_consistency_probe(graph: &Graph, delta: f64, gammas: &[f64], margin: f64, initial: &OpinionState) -> Result<HkProbeReport> {
    initial.validate(graph)?;
    let hull_bound = 2.0
        * graph
            .zealot_hull()
            .map(|(lo, hi)| lo.abs().max(hi.abs()))
            .unwrap_or(1.0);
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    let mut x = initial.clone();
    for &gamma in gammas {
        let params = ModelParams::new(gamma, delta)?;
        let options = SolverOptions {
            relax: Some(1e3),
            ..SolverOptions::default()
        };
        let record = match find_steady_state_with(graph, &params, &x, &options) {
            Ok(r) => r,
            Err(e) => {
                failures.push((gamma, e));
                continue;
            }
        };
        if !record.is_stable() {
            failures.push((gamma, Error::Hypothesis("probe state is not linearly stable")));
            continue;
        }
        let s = &record.state;
        let min_gap_margin = graph
            .edges()
            .iter()
            .filter(|&&(a, b)| !(graph.is_zealot(a) && graph.is_zealot(b)))
            .map(|&(a, b)| {
                let d = s[a] - s[b];
                (d * d - delta).abs()
            })
            .fold(f64::INFINITY, f64::min);
        let within = s.0.iter().all(|v| v.abs() <= hull_bound / 2.0 + 1e-12);
        entries.push(HkProbeEntry {
            gamma,
            classification: record.classification,
            residual: record.residual,
            hk_residual: max_abs(&hk_velocity(graph, s, delta)),
            hk_strict_residual: max_abs(&hk_velocity_strict(graph, s, delta)),
            min_gap_margin,
            in_band: min_gap_margin >= margin && within,
            state: s.clone(),
        });
        x = record.state;
    }
    Ok(HkProbeReport {
        gap_form: "squared",
        margin,
        hull_bound,
        entries,
        failures,
    })
}
