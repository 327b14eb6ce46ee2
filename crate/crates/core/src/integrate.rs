//! Trajectories of the opinion dynamics.

use alloc::vec::Vec;

use crate::dynamics::{persuadable_velocity_into, ModelParams, OpinionState};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::ode::{self, StepControl};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrationOptions {
    pub control: StepControl,
    /// Stop once `max |F(x)|` drops below this value.
    pub stop_tol: Option<f64>,
    /// Keep every k-th accepted step (the first and last states are always kept).
    pub record_every: usize,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        IntegrationOptions {
            control: StepControl::default(),
            stop_tol: Some(1e-10),
            record_every: 1,
        }
    }
}

impl IntegrationOptions {
    /// Only the endpoint matters; skip intermediate storage.
    pub fn endpoint_only() -> Self {
        IntegrationOptions {
            record_every: usize::MAX,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<OpinionState>,
    /// The steady-stop criterion ended the run before the horizon.
    pub stopped_early: bool,
}

impl Trajectory {
    pub fn final_state(&self) -> &OpinionState {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds at least the initial time")
    }
}

/// Integrates `dx/dt = F(x)` from `initial` up to `horizon`. Zealot entries are
/// never touched by the integrator, so they stay bitwise pinned.
pub fn integrate(
    graph: &Graph,
    initial: &OpinionState,
    params: &ModelParams,
    horizon: f64,
    options: &IntegrationOptions,
) -> Result<Trajectory> {
    initial.validate(graph)?;
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument("horizon must be positive"));
    }
    let record_every = options.record_every.max(1);
    let mut full = initial.0.clone();
    let persuadable = graph.persuadable();
    let y0 = initial.persuadable_values(graph);
    let embed = |full: &mut [f64], y: &[f64]| {
        for (&node, &v) in persuadable.iter().zip(y) {
            full[node] = v;
        }
    };
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut seen = 0usize;
    let mut scratch = full.clone();
    let end = ode::solve(
        |y, dy| {
            embed(&mut scratch, y);
            persuadable_velocity_into(graph, &scratch, params, dy);
        },
        &y0,
        horizon,
        options.control,
        options.stop_tol,
        |t, y| {
            if seen % record_every == 0 {
                let mut s = initial.0.clone();
                embed(&mut s, y);
                times.push(t);
                states.push(OpinionState(s));
            }
            seen += 1;
        },
    )
    .map_err(|e| match e {
        Error::IntegrationFailure { time, last_state } => {
            let mut s = initial.0.clone();
            embed(&mut s, &last_state);
            Error::IntegrationFailure { time, last_state: s }
        }
        other => other,
    })?;
    if times.last() != Some(&end.t) {
        embed(&mut full, &end.y);
        times.push(end.t);
        states.push(OpinionState(full));
    }
    Ok(Trajectory {
        times,
        states,
        stopped_early: end.stopped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{karate_club, path_graph};

    #[test]
    fn zealots_stay_pinned_and_times_increase() {
        let g = karate_club();
        let start = OpinionState::uniform(&g, 0.0);
        let traj = integrate(
            &g,
            &start,
            &ModelParams::new(4.0, 0.5).unwrap(),
            50.0,
            &IntegrationOptions::default(),
        )
        .unwrap();
        assert!(traj.times.windows(2).all(|w| w[0] < w[1]));
        for s in &traj.states {
            assert_eq!(s[0], -1.0);
            assert_eq!(s[33], 1.0);
        }
    }

    #[test]
    fn path_relaxes_to_harmonic_at_zero_gamma() {
        let g = path_graph(4).unwrap();
        let start = OpinionState::uniform(&g, 0.0);
        let traj = integrate(
            &g,
            &start,
            &ModelParams::new(0.0, 1.0).unwrap(),
            1e4,
            &IntegrationOptions::default(),
        )
        .unwrap();
        assert!(traj.stopped_early);
        let x = traj.final_state();
        for j in 0..6 {
            assert!((x[j] - (-2.5 + j as f64)).abs() < 1e-8);
        }
    }

    #[test]
    fn record_every_thins_output() {
        let g = path_graph(3).unwrap();
        let start = OpinionState::uniform(&g, 0.0);
        let params = ModelParams::new(0.0, 1.0).unwrap();
        let dense = integrate(&g, &start, &params, 5.0, &IntegrationOptions { stop_tol: None, ..Default::default() }).unwrap();
        let sparse = integrate(
            &g,
            &start,
            &params,
            5.0,
            &IntegrationOptions {
                stop_tol: None,
                record_every: 5,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(sparse.times.len() < dense.times.len());
        assert_eq!(sparse.final_time(), 5.0);
        assert_eq!(sparse.final_state(), dense.final_state());
    }

    #[test]
    fn rejects_bad_horizon() {
        let g = path_graph(1).unwrap();
        let s = OpinionState::uniform(&g, 0.0);
        let p = ModelParams::new(1.0, 1.0).unwrap();
        assert!(integrate(&g, &s, &p, 0.0, &IntegrationOptions::default()).is_err());
    }
}
