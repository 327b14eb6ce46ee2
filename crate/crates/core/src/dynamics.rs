//! The sigmoidal influence function, its limits, and the update operator.
//!
//! For adjacent nodes the influence weight is
//! `w = 1 / (1 + exp(gamma * (x_i - x_j)^2 - gamma * delta))`, a logistic in
//! `t = gamma * (delta - (x_i - x_j)^2)`. Persuadable node `i` moves with velocity
//! `sum_j w_ij (x_j - x_i) / sum_j w_ij`; zealots never move.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::math;

/// Steepness `gamma` and squared confidence bound `delta`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelParams {
    pub gamma: f64,
    pub delta: f64,
}

impl ModelParams {
    pub fn new(gamma: f64, delta: f64) -> Result<Self> {
        if !(gamma >= 0.0 && delta >= 0.0 && gamma.is_finite() && delta.is_finite()) {
            return Err(Error::InvalidParams { gamma, delta });
        }
        Ok(ModelParams { gamma, delta })
    }

    /// Logistic argument for a pair at opinion distance `diff`.
    #[inline]
    pub(crate) fn logit(&self, diff: f64) -> f64 {
        self.gamma * (self.delta - diff * diff)
    }

    /// `(w, 1 - w)` for a pair at opinion distance `diff`, both accurate near 0 and 1.
    #[inline]
    pub(crate) fn weight_pair(&self, diff: f64) -> (f64, f64) {
        let t = self.logit(diff);
        (math::logistic(t), math::logistic(-t))
    }
}

/// An opinion vector over all nodes of a graph.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct OpinionState(pub Vec<f64>);

impl OpinionState {
    /// Checks length, finiteness, and zealot pinning against `graph`.
    pub fn new(graph: &Graph, values: Vec<f64>) -> Result<Self> {
        let state = OpinionState(values);
        state.validate(graph)?;
        Ok(state)
    }

    /// Builds a full state from persuadable opinions (in [`Graph::persuadable`] order).
    pub fn from_persuadable(graph: &Graph, persuadable: &[f64]) -> Self {
        let mut values = vec![0.0; graph.node_count()];
        for (&node, &z) in graph.zealots() {
            values[node] = z;
        }
        for (&node, &x) in graph.persuadable().iter().zip(persuadable) {
            values[node] = x;
        }
        OpinionState(values)
    }

    /// Every persuadable node at `value`, zealots pinned.
    pub fn uniform(graph: &Graph, value: f64) -> Self {
        Self::from_persuadable(graph, &vec![value; graph.persuadable().len()])
    }

    pub fn validate(&self, graph: &Graph) -> Result<()> {
        if self.0.len() != graph.node_count() {
            return Err(Error::StateLength {
                expected: graph.node_count(),
                found: self.0.len(),
            });
        }
        if let Some(i) = self.0.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteState(i));
        }
        for (&node, &z) in graph.zealots() {
            if self.0[node] != z {
                return Err(Error::ZealotNotPinned { node });
            }
        }
        Ok(())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn persuadable_values(&self, graph: &Graph) -> Vec<f64> {
        graph.persuadable().iter().map(|&i| self.0[i]).collect()
    }

    /// Largest absolute componentwise difference.
    pub fn max_abs_diff(&self, other: &OpinionState) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl core::ops::Index<usize> for OpinionState {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Influence weights and per-node strengths at a state.
#[derive(Clone, Debug)]
pub struct InfluenceSnapshot {
    pub weights: DMatrix<f64>,
    pub strengths: DVector<f64>,
}

/// The sigmoidal influence weight between two opinions.
pub fn influence(xi: f64, xj: f64, params: &ModelParams, adjacent: bool) -> f64 {
    if !adjacent {
        return 0.0;
    }
    math::logistic(params.logit(xi - xj))
}

/// The influence weight as a function of opinion distance, for adjacent nodes.
pub fn omega(distance: f64, params: &ModelParams) -> f64 {
    influence(distance, 0.0, params, true)
}

/// Pointwise limit of [`influence`] as `gamma` grows: 1 inside the confidence
/// bound, 1/2 on it, 0 outside.
pub fn influence_limit(xi: f64, xj: f64, delta: f64, adjacent: bool) -> f64 {
    if !adjacent {
        return 0.0;
    }
    let sq = (xi - xj) * (xi - xj);
    if sq < delta {
        1.0
    } else if sq == delta {
        0.5
    } else {
        0.0
    }
}

/// Hegselmann–Krause indicator on squared distance, strict at the boundary.
pub fn hk_influence(xi: f64, xj: f64, delta: f64, adjacent: bool) -> f64 {
    if adjacent && (xi - xj) * (xi - xj) < delta {
        1.0
    } else {
        0.0
    }
}

pub fn influence_snapshot(graph: &Graph, state: &OpinionState, params: &ModelParams) -> InfluenceSnapshot {
    let n = graph.node_count();
    let x = state.as_slice();
    let mut weights = DMatrix::zeros(n, n);
    for &(a, b) in graph.edges() {
        let w = influence(x[a], x[b], params, true);
        weights[(a, b)] = w;
        weights[(b, a)] = w;
    }
    let strengths = DVector::from_iterator(n, (0..n).map(|i| weights.row(i).sum()));
    InfluenceSnapshot { weights, strengths }
}

/// Weighted mean of neighbor differences for one persuadable node.
///
/// Falls back to log-domain normalization when every weight underflows, so the
/// result stays finite for very steep sigmoids.
fn node_velocity(graph: &Graph, x: &[f64], i: usize, params: &ModelParams) -> f64 {
    let nbrs = graph.neighbors(i);
    if nbrs.is_empty() {
        return 0.0;
    }
    let xi = x[i];
    let mut num = 0.0;
    let mut den = 0.0;
    for &j in nbrs {
        let d = x[j] - xi;
        let w = math::logistic(params.logit(d));
        num += w * d;
        den += w;
    }
    if den > 1e-250 {
        return num / den;
    }
    let lmax = nbrs
        .iter()
        .map(|&j| math::log_logistic(params.logit(x[j] - xi)))
        .fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for &j in nbrs {
        let d = x[j] - xi;
        let w = math::exp(math::log_logistic(params.logit(d)) - lmax);
        num += w * d;
        den += w;
    }
    num / den
}

/// The update operator `F(x)`; zealot and isolated components are 0.
pub fn velocity(graph: &Graph, state: &OpinionState, params: &ModelParams) -> Vec<f64> {
    let x = state.as_slice();
    let mut out = vec![0.0; graph.node_count()];
    for &i in graph.persuadable() {
        out[i] = node_velocity(graph, x, i, params);
    }
    out
}

/// `F(x)` restricted to persuadable nodes, written into `out` (persuadable order).
pub(crate) fn persuadable_velocity_into(graph: &Graph, x: &[f64], params: &ModelParams, out: &mut [f64]) {
    for (k, &i) in graph.persuadable().iter().enumerate() {
        out[k] = node_velocity(graph, x, i, params);
    }
}

/// `max_i |F_i(x)|`.
pub fn residual(graph: &Graph, state: &OpinionState, params: &ModelParams) -> f64 {
    let x = state.as_slice();
    graph
        .persuadable()
        .iter()
        .fold(0.0, |m, &i| m.max(node_velocity(graph, x, i, params).abs()))
}

fn weighted_velocity<W: Fn(f64, f64) -> f64>(graph: &Graph, x: &[f64], weight: W) -> Vec<f64> {
    let mut out = vec![0.0; graph.node_count()];
    for &i in graph.persuadable() {
        let (mut num, mut den) = (0.0, 0.0);
        for &j in graph.neighbors(i) {
            let w = weight(x[i], x[j]);
            num += w * (x[j] - x[i]);
            den += w;
        }
        if den > 0.0 {
            out[i] = num / den;
        }
    }
    out
}

/// The limiting operator `F_inf`, built from [`influence_limit`] weights.
///
/// Nodes with no neighbor inside the confidence bound get velocity 0.
pub fn hk_velocity(graph: &Graph, state: &OpinionState, delta: f64) -> Vec<f64> {
    weighted_velocity(graph, state.as_slice(), |a, b| influence_limit(a, b, delta, true))
}

/// As [`hk_velocity`] but with the strict indicator of [`hk_influence`].
pub fn hk_velocity_strict(graph: &Graph, state: &OpinionState, delta: f64) -> Vec<f64> {
    weighted_velocity(graph, state.as_slice(), |a, b| hk_influence(a, b, delta, true))
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
