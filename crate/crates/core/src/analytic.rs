//! Closed-form stability results for the harmonic state on paths and on
//! balanced-exposure graphs.
//!
//! On the path with zealots `-(n+1)/2` and `(n+1)/2` the harmonic state has unit
//! gaps, so every edge carries the same weight `v = w(1)`. Its stability is decided
//! by the sign of `g = 2 gamma (1 - v) - 1`, or equivalently of
//! `h = 1 + exp(-gamma (1 - delta)) - 2 gamma` (stable iff `g < 0` iff `h > 0`).

use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::math;
use crate::spectral::Classification;

/// `v = w(1) = 1 / (1 + exp(gamma (1 - delta)))`.
pub fn unit_gap_weight(gamma: f64, delta: f64) -> f64 {
    math::logistic(gamma * (delta - 1.0))
}

/// `u = w(0) = 1 / (1 + exp(-gamma delta))`.
pub fn zero_gap_weight(gamma: f64, delta: f64) -> f64 {
    math::logistic(gamma * delta)
}

/// `g(gamma) = 2 gamma (1 - v) - 1`.
pub fn g_function(gamma: f64, delta: f64) -> f64 {
    2.0 * gamma * math::logistic(gamma * (1.0 - delta)) - 1.0
}

/// `h(gamma) = 1 + exp(-gamma (1 - delta)) - 2 gamma`, which equals `g / (v - 1)`.
pub fn h_function(gamma: f64, delta: f64) -> f64 {
    1.0 + math::exp(-gamma * (1.0 - delta)) - 2.0 * gamma
}

/// The negative root of `exp(y - 2) = y^2 / 4`, about `-0.557`.
///
/// For `delta > 1 - y` the path harmonic state is stable at every `gamma`.
pub fn solve_y() -> f64 {
    math::bisect(|y| math::exp(y - 2.0) - 0.25 * y * y, -1.0, 0.0, 1e-15)
}

pub fn path_harmonic_stability(gamma: f64, delta: f64, marginal_tol: f64) -> Classification {
    Classification::from_indicator(g_function(gamma, delta), marginal_tol)
}

/// Largest eigenvalue of `M_P = s tridiag(-1, 2, -1)` at the harmonic state of the
/// `n`-node path, with `s = v g`.
///
/// The spectrum is `2 s (1 - cos(k pi / (n + 1)))` for `k = 1..n`, so the top is
/// `2 s (1 - cos(pi / (n + 1)))` when `s <= 0` and `2 s (1 + cos(pi / (n + 1)))` when
/// `s > 0`.
pub fn path_top_eigenvalue(n: usize, gamma: f64, delta: f64) -> f64 {
    let s = unit_gap_weight(gamma, delta) * g_function(gamma, delta);
    let half = core::f64::consts::PI / (2.0 * (n as f64 + 1.0));
    let c = math::sin(half);
    // 1 - cos(2a) = 2 sin^2(a), exact for small angles
    let one_minus_cos = 2.0 * c * c;
    if s <= 0.0 {
        2.0 * s * one_minus_cos
    } else {
        2.0 * s * (2.0 - one_minus_cos)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CrossingCase {
    /// Stable below `gamma_c`, unstable above (`delta <= 1`).
    SingleCrossing,
    /// Unstable exactly on `(gamma_1, gamma_2)` (`1 < delta < 1 - y`).
    DoubleCrossing,
    /// Stable for every `gamma` (`delta >= 1 - y`).
    AlwaysStable,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CriticalGammas {
    pub case: CrossingCase,
    pub gamma_c: Option<f64>,
    pub gamma_1: Option<f64>,
    pub gamma_2: Option<f64>,
}

impl CriticalGammas {
    /// Number of roots of `h`.
    pub fn root_count(&self) -> usize {
        [self.gamma_c, self.gamma_1, self.gamma_2].iter().flatten().count()
    }
}

const ROOT_TOL: f64 = 1e-13;

/// Where `h` changes sign, for a given `delta >= 0`.
pub fn critical_gammas(delta: f64) -> Result<CriticalGammas> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument("delta must be finite and nonnegative"));
    }
    let h = |g: f64| h_function(g, delta);
    let single = |gamma_c| CriticalGammas {
        case: CrossingCase::SingleCrossing,
        gamma_c: Some(gamma_c),
        gamma_1: None,
        gamma_2: None,
    };
    let stable = CriticalGammas {
        case: CrossingCase::AlwaysStable,
        gamma_c: None,
        gamma_1: None,
        gamma_2: None,
    };
    if delta == 1.0 {
        return Ok(single(1.0));
    }
    if delta < 1.0 {
        // h(0) = 2 and h(1) = exp(delta - 1) - 1 < 0; h is decreasing here
        return Ok(single(math::bisect(h, 0.0, 1.0, ROOT_TOL)));
    }
    let a = delta - 1.0;
    let gbar = math::ln(2.0 / a) / a;
    if !(gbar > 0.0) || h(gbar) >= 0.0 {
        return Ok(stable);
    }
    let gamma_1 = math::bisect(h, 0.0, gbar, ROOT_TOL);
    let mut hi = 2.0 * gbar;
    while h(hi) <= 0.0 {
        hi *= 2.0;
    }
    let gamma_2 = math::bisect(h, gbar, hi, ROOT_TOL);
    Ok(CriticalGammas {
        case: CrossingCase::DoubleCrossing,
        gamma_c: None,
        gamma_1: Some(gamma_1),
        gamma_2: Some(gamma_2),
    })
}

/// Stability of the zero state on a balanced-exposure graph with zealots `-1, +1`:
/// stable iff `g < 0`, as on the path.
pub fn be_harmonic_stability(gamma: f64, delta: f64, marginal_tol: f64) -> Classification {
    path_harmonic_stability(gamma, delta, marginal_tol)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UnstableSubspace {
    /// `(lambda, eigenvector)` of the persuadable Laplacian with `lambda <= threshold`,
    /// ascending; vectors are indexed in [`Graph::persuadable`] order.
    pub eigenpairs: Vec<(f64, Vec<f64>)>,
    /// `2 v g / u`.
    pub threshold: f64,
    pub u: f64,
    pub v: f64,
}

impl UnstableSubspace {
    pub fn dim(&self) -> usize {
        self.eigenpairs.len()
    }
}

/// Directions in which the zero state is not stable, for graphs whose persuadable
/// subgraph is regular and whose persuadable nodes all see both zealots.
///
/// There `M_P = 2 v g I - u L`, so the Laplacian eigenvector for `lambda` is a
/// nonnegative direction of `M_P` exactly when `lambda <= 2 v g / u`.
pub fn be_unstable_subspace(graph: &Graph, gamma: f64, delta: f64) -> Result<UnstableSubspace> {
    let zealots: Vec<(usize, f64)> = graph.zealots().iter().map(|(&k, &v)| (k, v)).collect();
    let mut opinions: Vec<f64> = zealots.iter().map(|z| z.1).collect();
    opinions.sort_by(|a, b| a.partial_cmp(b).expect("zealot opinions are finite"));
    if opinions != [-1.0, 1.0] {
        return Err(Error::Hypothesis("needs exactly two zealots with opinions -1 and +1"));
    }
    let pers = graph.persuadable();
    if pers.iter().any(|&i| zealots.iter().any(|&(z, _)| !graph.has_edge(i, z))) {
        return Err(Error::Hypothesis("every persuadable node must be adjacent to both zealots"));
    }
    let degrees: Vec<usize> = pers
        .iter()
        .map(|&i| graph.neighbors(i).iter().filter(|&&j| !graph.is_zealot(j)).count())
        .collect();
    if degrees.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::Hypothesis("persuadable subgraph must be regular"));
    }
    let n = pers.len();
    let mut lap = DMatrix::zeros(n, n);
    for (a, &i) in pers.iter().enumerate() {
        for &j in graph.neighbors(i) {
            if let Some(b) = graph.persuadable_index(j) {
                lap[(a, b)] = -1.0;
                lap[(a, a)] += 1.0;
            }
        }
    }
    let u = zero_gap_weight(gamma, delta);
    let v = unit_gap_weight(gamma, delta);
    let threshold = 2.0 * v * g_function(gamma, delta) / u;
    let eig = SymmetricEigen::try_new(lap, 1e-15, 10_000).ok_or(Error::EigenFailure)?;
    let mut eigenpairs: Vec<(f64, Vec<f64>)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|&(_, &l)| l <= threshold)
        .map(|(k, &l)| (l, eig.eigenvectors.column(k).iter().copied().collect()))
        .collect();
    eigenpairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("eigenvalues are finite"));
    Ok(UnstableSubspace {
        eigenpairs,
        threshold,
        u,
        v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{residual, ModelParams, OpinionState};
    use crate::graph::{paired_cliques, path_graph, Alignment};
    use crate::spectral::{eigen_report, jacobian};
    use crate::steady::harmonic_state;

    #[test]
    fn g_values() {
        assert_eq!(g_function(0.0, 0.3), -1.0);
        assert_eq!(g_function(1.0, 1.0), 0.0);
        assert_eq!(g_function(2.0, 1.0), 1.0);
    }

    #[test]
    fn h_values_and_sign_relation() {
        assert_eq!(h_function(0.0, 0.7), 2.0);
        for gamma in [0.0, 0.3, 1.0, 2.5] {
            assert!((h_function(gamma, 1.0) - (2.0 - 2.0 * gamma)).abs() < 1e-15);
        }
        for gi in 1..40 {
            for di in 0..30 {
                let (gamma, delta) = (0.1 * gi as f64, 0.07 * di as f64);
                let (g, h) = (g_function(gamma, delta), h_function(gamma, delta));
                if g.abs() > 1e-12 && h.abs() > 1e-12 {
                    assert_eq!(g.signum(), -h.signum(), "gamma {gamma} delta {delta}");
                }
            }
        }
    }

    #[test]
    fn y_root() {
        let y = solve_y();
        assert!((y + 0.5569290855221476).abs() < 1e-12);
        assert!((math::exp(y - 2.0) - y * y / 4.0).abs() < 1e-12);
    }

    #[test]
    fn critical_cases() {
        let c = critical_gammas(1.0).unwrap();
        assert_eq!(c.case, CrossingCase::SingleCrossing);
        assert_eq!(c.gamma_c, Some(1.0));
        let c = critical_gammas(0.5).unwrap();
        assert_eq!(c.case, CrossingCase::SingleCrossing);
        assert!(h_function(c.gamma_c.unwrap(), 0.5).abs() < 1e-10);
        let c = critical_gammas(1.2).unwrap();
        assert_eq!(c.case, CrossingCase::DoubleCrossing);
        let (g1, g2) = (c.gamma_1.unwrap(), c.gamma_2.unwrap());
        assert!(0.0 < g1 && g1 < g2);
        assert!(h_function(g1, 1.2).abs() < 1e-10 && h_function(g2, 1.2).abs() < 1e-10);
        assert_eq!(critical_gammas(2.0).unwrap().case, CrossingCase::AlwaysStable);
        assert_eq!(critical_gammas(1.5).unwrap().root_count(), 2);
        assert_eq!(critical_gammas(1.6).unwrap().root_count(), 0);
        assert!(critical_gammas(-0.1).is_err());
    }

    #[test]
    fn double_crossing_closes_at_threshold() {
        let edge = 1.0 - solve_y();
        let mut last = f64::INFINITY;
        for k in 1..15 {
            let delta = edge - 0.1 / (1u32 << k) as f64;
            let c = critical_gammas(delta).unwrap();
            let width = c.gamma_2.unwrap() - c.gamma_1.unwrap();
            assert!(width < last);
            last = width;
        }
        assert!(last < 0.05, "{last}");
        assert_eq!(critical_gammas(edge + 1e-6).unwrap().case, CrossingCase::AlwaysStable);
    }

    #[test]
    fn top_eigenvalue_matches_dense_solver() {
        for n in [2usize, 5, 11] {
            let g = path_graph(n).unwrap();
            let x = harmonic_state(&g).unwrap();
            for (gamma, delta) in [(0.5, 0.5), (2.0, 1.0), (1.0, 1.0), (6.0, 0.2), (3.0, 1.2)] {
                let d = jacobian(&g, &x, &ModelParams::new(gamma, delta).unwrap(), false).unwrap();
                let top = SymmetricEigen::new(d.m.clone()).eigenvalues.max();
                let closed = path_top_eigenvalue(n, gamma, delta);
                assert!((top - closed).abs() <= 1e-10 * closed.abs() + 1e-13, "{n} {gamma} {delta} {top} {closed}");
            }
        }
    }

    #[test]
    fn be_zero_state_agrees_with_spectrum() {
        for align in [Alignment::Aligned, Alignment::Unaligned] {
            let c = paired_cliques(10, align).unwrap();
            let x = OpinionState::uniform(&c.graph, 0.0);
            for (gamma, delta) in [(0.2, 0.5), (0.8, 0.5), (2.0, 0.5), (5.0, 1.0), (3.0, 2.0), (20.0, 0.1)] {
                let params = ModelParams::new(gamma, delta).unwrap();
                assert!(residual(&c.graph, &x, &params) < 1e-12);
                let d = jacobian(&c.graph, &x, &params, false).unwrap();
                let rep = eigen_report(&d, 1e-8).unwrap();
                assert_eq!(rep.classification, be_harmonic_stability(gamma, delta, 1e-8));
                let sub = be_unstable_subspace(&c.graph, gamma, delta).unwrap();
                assert_eq!(sub.dim(), rep.nonnegative_count(), "gamma {gamma} delta {delta}");
            }
        }
    }

    #[test]
    fn first_unstable_direction_is_constant() {
        let c = paired_cliques(10, Alignment::Aligned).unwrap();
        // just above g = 0 only lambda = 0 qualifies
        let gamma = critical_gammas(0.5).unwrap().gamma_c.unwrap() * 1.01;
        let sub = be_unstable_subspace(&c.graph, gamma, 0.5).unwrap();
        assert_eq!(sub.dim(), 1);
        let vec = &sub.eigenpairs[0].1;
        assert!(vec.iter().all(|&e| (e.abs() - vec[0].abs()).abs() < 1e-12));
    }

    #[test]
    fn delta_one_subspace_fills_up() {
        let c = paired_cliques(10, Alignment::Unaligned).unwrap();
        let n = c.graph.persuadable().len();
        assert_eq!(be_unstable_subspace(&c.graph, 0.5, 1.0).unwrap().dim(), 0);
        assert_eq!(be_unstable_subspace(&c.graph, 50.0, 1.0).unwrap().dim(), n);
        assert_eq!(be_unstable_subspace(&c.graph, 50.0, 2.0).unwrap().dim(), 0);
    }

    #[test]
    fn subspace_hypotheses() {
        let g = path_graph(3).unwrap();
        assert!(matches!(be_unstable_subspace(&g, 1.0, 1.0), Err(Error::Hypothesis(_))));
    }
}
