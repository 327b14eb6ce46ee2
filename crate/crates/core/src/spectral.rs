//! Linearization of the update operator at a state.
//!
//! On persuadable coordinates the Jacobian factors as `J_P = -S_P^{-1} (Z_P + L_P)`,
//! where `S_P` holds node strengths, `Z_P` the zealot couplings, and `L_P` is the
//! Laplacian of `r_ij = w_ij (1 - 2 gamma (1 - w_ij) (x_j - x_i)^2)`. With
//! `M_P = -Z_P - L_P` symmetric, `J_P` is similar to `S_P^{-1/2} M_P S_P^{-1/2}`,
//! so its spectrum is real and its sign structure is that of `M_P`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Hessenberg, Schur, SymmetricEigen};

use crate::dynamics::{residual, ModelParams, OpinionState};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::math;

/// Above this velocity norm the exact Jacobian reinstates the term that vanishes
/// at steady states.
pub const NON_STEADY_THRESHOLD: f64 = 1e-8;

/// Default half-width of the band in which eigenvalues count as zero.
pub const DEFAULT_MARGINAL_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Classification {
    Stable,
    Unstable,
    Marginal,
}

impl Classification {
    /// Classifies a scalar stability indicator (negative means stable).
    pub fn from_indicator(value: f64, tol: f64) -> Self {
        if value < -tol {
            Classification::Stable
        } else if value > tol {
            Classification::Unstable
        } else {
            Classification::Marginal
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Stable => "stable",
            Classification::Unstable => "unstable",
            Classification::Marginal => "marginal",
        }
    }
}

impl core::fmt::Display for Classification {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The persuadable Jacobian and the matrices it is assembled from.
#[derive(Clone, Debug)]
pub struct JacobianDecomposition {
    /// Persuadable node ids, giving the row/column order of every matrix here.
    pub persuadable: Vec<usize>,
    pub gamma: f64,
    /// `J_P`; includes the non-steady correction when `corrected` is set.
    pub jp: DMatrix<f64>,
    /// Diagonal of `S_P`.
    pub strengths: DVector<f64>,
    /// Diagonal of `Z_P`.
    pub zealot_coupling: DVector<f64>,
    /// `L_P`.
    pub laplacian: DMatrix<f64>,
    /// `M_P = -Z_P - L_P`.
    pub m: DMatrix<f64>,
    /// Laplacian of the weights `w_ij`.
    pub l1: DMatrix<f64>,
    /// Laplacian of `w_ij (1 - w_ij) (x_j - x_i)^2`.
    pub l2: DMatrix<f64>,
    pub corrected: bool,
}

impl JacobianDecomposition {
    pub fn dim(&self) -> usize {
        self.persuadable.len()
    }

    /// `S_P^{-1/2} M_P S_P^{-1/2}`.
    pub fn symmetric_form(&self) -> DMatrix<f64> {
        let n = self.dim();
        let inv_sqrt: Vec<f64> = self.strengths.iter().map(|&s| 1.0 / math::sqrt(s)).collect();
        let mut out = self.m.clone();
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
            }
        }
        // symmetrize away rounding
        (&out + out.transpose()) * 0.5
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpectralReport {
    /// Eigenvalues of `J_P`, sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Largest imaginary part among eigenvalues of `J_P` computed without symmetrization.
    pub max_imag_residual: f64,
    pub classification: Classification,
    pub marginal_tol: f64,
}

impl SpectralReport {
    pub fn top(&self) -> Option<f64> {
        self.eigenvalues.first().copied()
    }

    /// `max |lambda| / min |lambda|`; infinite when an eigenvalue is exactly zero.
    pub fn condition(&self) -> f64 {
        let (lo, hi) = self
            .eigenvalues
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), l| (lo.min(l.abs()), hi.max(l.abs())));
        if self.eigenvalues.is_empty() {
            1.0
        } else if lo == 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    /// Number of eigenvalues above `-marginal_tol`.
    pub fn nonnegative_count(&self) -> usize {
        self.eigenvalues.iter().filter(|&&l| l >= -self.marginal_tol).count()
    }
}

/// Per-edge quantities from one persuadable node's point of view.
struct EdgeTerm {
    j: usize,
    w: f64,
    one_minus_w: f64,
    d: f64,
}

fn edge_terms(graph: &Graph, x: &[f64], i: usize, params: &ModelParams) -> Vec<EdgeTerm> {
    graph
        .neighbors(i)
        .iter()
        .map(|&j| {
            let d = x[j] - x[i];
            let (w, one_minus_w) = params.weight_pair(d);
            EdgeTerm { j, w, one_minus_w, d }
        })
        .collect()
}

/// Assembles the Jacobian decomposition at `state`.
///
/// With `exact` set and `max |F(x)| > 1e-8`, `J_P` also carries the term that is
/// dropped at steady states, making it the true derivative of `F` there.
pub fn jacobian(
    graph: &Graph,
    state: &OpinionState,
    params: &ModelParams,
    exact: bool,
) -> Result<JacobianDecomposition> {
    state.validate(graph)?;
    let x = state.as_slice();
    let persuadable = graph.persuadable().to_vec();
    let n = persuadable.len();
    let gamma = params.gamma;
    let mut strengths = DVector::zeros(n);
    let mut zealot_coupling = DVector::zeros(n);
    let mut r = DMatrix::zeros(n, n);
    let mut w_p = DMatrix::zeros(n, n);
    let mut q_p = DMatrix::zeros(n, n);
    for (a, &i) in persuadable.iter().enumerate() {
        let terms = edge_terms(graph, x, i, params);
        let s: f64 = terms.iter().map(|t| t.w).sum();
        if !(s > 0.0) {
            return Err(Error::ZeroStrength(i));
        }
        strengths[a] = s;
        for t in &terms {
            let rij = t.w * (1.0 - 2.0 * gamma * t.one_minus_w * t.d * t.d);
            match graph.persuadable_index(t.j) {
                Some(b) => {
                    r[(a, b)] = rij;
                    w_p[(a, b)] = t.w;
                    q_p[(a, b)] = t.w * t.one_minus_w * t.d * t.d;
                }
                None => zealot_coupling[a] += rij,
            }
        }
    }
    let laplacian = laplacian_of(&r);
    let l1 = laplacian_of(&w_p);
    let l2 = laplacian_of(&q_p);
    let m = -(DMatrix::from_diagonal(&zealot_coupling) + &laplacian);
    let corrected = exact && residual(graph, state, params) > NON_STEADY_THRESHOLD;
    let jp = if corrected {
        jacobian_matrix(graph, x, params)
    } else {
        let mut jp = -(DMatrix::from_diagonal(&zealot_coupling) + &laplacian);
        for a in 0..n {
            let inv = 1.0 / strengths[a];
            for b in 0..n {
                jp[(a, b)] *= inv;
            }
        }
        jp
    };
    Ok(JacobianDecomposition {
        persuadable,
        gamma,
        jp,
        strengths,
        zealot_coupling,
        laplacian,
        m,
        l1,
        l2,
        corrected,
    })
}

fn laplacian_of(weights: &DMatrix<f64>) -> DMatrix<f64> {
    let n = weights.nrows();
    let mut l = -weights.clone();
    for i in 0..n {
        l[(i, i)] = weights.row(i).sum() - weights[(i, i)];
    }
    l
}

/// The true derivative of `F` on persuadable coordinates at any state.
///
/// Each row is computed from weights rescaled by their row maximum, so rows whose
/// weights all underflow still get a finite Jacobian.
pub fn jacobian_matrix(graph: &Graph, x: &[f64], params: &ModelParams) -> DMatrix<f64> {
    let persuadable = graph.persuadable();
    let n = persuadable.len();
    let gamma = params.gamma;
    let mut jp = DMatrix::zeros(n, n);
    for (a, &i) in persuadable.iter().enumerate() {
        let nbrs = graph.neighbors(i);
        if nbrs.is_empty() {
            continue;
        }
        let logs: Vec<f64> = nbrs
            .iter()
            .map(|&j| math::log_logistic(params.logit(x[j] - x[i])))
            .collect();
        let lmax = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scaled: Vec<f64> = logs.iter().map(|l| math::exp(l - lmax)).collect();
        let s: f64 = scaled.iter().sum();
        let f: f64 = nbrs
            .iter()
            .zip(&scaled)
            .map(|(&j, w)| w * (x[j] - x[i]))
            .sum::<f64>()
            / s;
        let mut diag = 0.0;
        for (&j, &w) in nbrs.iter().zip(&scaled) {
            let d = x[j] - x[i];
            let one_minus_w = math::logistic(-params.logit(d));
            let entry = w / s * (1.0 - 2.0 * gamma * one_minus_w * d * (d - f));
            diag -= entry;
            if let Some(b) = graph.persuadable_index(j) {
                jp[(a, b)] = entry;
            }
        }
        jp[(a, a)] = diag;
    }
    jp
}

/// Spectrum of `J_P` via its symmetric similar form, plus a direct nonsymmetric
/// check of how far the computed eigenvalues stray from the real axis.
pub fn eigen_report(decomp: &JacobianDecomposition, marginal_tol: f64) -> Result<SpectralReport> {
    let n = decomp.dim();
    if n == 0 {
        return Ok(SpectralReport {
            eigenvalues: Vec::new(),
            max_imag_residual: 0.0,
            classification: Classification::Stable,
            marginal_tol,
        });
    }
    let sym = decomp.symmetric_form();
    let eig = SymmetricEigen::try_new(sym, 1e-15, 10_000).ok_or(Error::EigenFailure)?;
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if eigenvalues.iter().any(|l| !l.is_finite()) {
        return Err(Error::EigenFailure);
    }
    eigenvalues.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let max_imag_residual = direct_eigenvalues(&decomp.jp)?
        .iter()
        .fold(0.0f64, |m, (_, im)| m.max(im.abs()));
    let classification = Classification::from_indicator(eigenvalues[0], marginal_tol);
    Ok(SpectralReport {
        eigenvalues,
        max_imag_residual,
        classification,
        marginal_tol,
    })
}

/// Eigenvalues `(re, im)` of a general square matrix via real Schur form.
pub fn direct_eigenvalues(matrix: &DMatrix<f64>) -> Result<Vec<(f64, f64)>> {
    if matrix.nrows() == 0 {
        return Ok(Vec::new());
    }
    if let Some(schur) = Schur::try_new(matrix.clone(), f64::EPSILON, 10_000) {
        return Ok(schur.complex_eigenvalues().iter().map(|c| (c.re, c.im)).collect());
    }
    // nalgebra's Francis iteration has no exceptional shifts and can cycle on
    // clustered spectra, which polarized states produce routinely.
    let h = Hessenberg::new(matrix.clone()).h();
    hqr(h).ok_or(Error::EigenFailure)
}

/// Eigenvalues of an upper Hessenberg matrix by shifted QR with exceptional shifts
/// (the EISPACK `hqr` scheme).
fn hqr(h: DMatrix<f64>) -> Option<Vec<(f64, f64)>> {
    let n = h.nrows();
    // 1-based copy keeps the index arithmetic identical to the classic formulation.
    let mut a = vec![vec![0.0f64; n + 1]; n + 1];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            a[i + 1][j + 1] = h[(i, j)];
            anorm += h[(i, j)].abs();
        }
    }
    let mut out = vec![(0.0, 0.0); n + 1];
    let sign = |a: f64, b: f64| if b >= 0.0 { a.abs() } else { -a.abs() };
    let mut nn = n;
    let mut t = 0.0;
    let (mut p, mut q, mut r): (f64, f64, f64);
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nn][nn];
            if l == nn {
                out[nn] = (x + t, 0.0);
                nn -= 1;
            } else {
                let mut y = a[nn - 1][nn - 1];
                let mut w = a[nn][nn - 1] * a[nn - 1][nn];
                if l == nn - 1 {
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    let mut z = math::sqrt(q.abs());
                    x += t;
                    if q >= 0.0 {
                        z = p + sign(z, p);
                        let hi = x + z;
                        let lo = if z != 0.0 { x - w / z } else { hi };
                        out[nn - 1] = (hi, 0.0);
                        out[nn] = (lo, 0.0);
                    } else {
                        out[nn - 1] = (x + p, -z);
                        out[nn] = (x + p, z);
                    }
                    nn -= 2;
                } else {
                    if its >= 120 {
                        return None;
                    }
                    if its > 0 && its % 10 == 0 {
                        t += x;
                        for i in 1..=nn {
                            a[i][i] -= x;
                        }
                        let s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    let mut m = nn - 2;
                    loop {
                        let z = a[m][m];
                        let rr = x - z;
                        let ss = y - z;
                        p = (rr * ss - w) / a[m + 1][m] + a[m][m + 1];
                        q = a[m + 1][m + 1] - z - rr - ss;
                        r = a[m + 2][m + 1];
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in m + 2..=nn {
                        a[i][i - 2] = 0.0;
                        if i != m + 2 {
                            a[i][i - 3] = 0.0;
                        }
                    }
                    let mut k = m;
                    while k + 1 <= nn {
                        if k != m {
                            p = a[k][k - 1];
                            q = a[k + 1][k - 1];
                            r = if k != nn - 1 { a[k + 2][k - 1] } else { 0.0 };
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = sign(math::sqrt(p * p + q * q + r * r), p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    a[k][k - 1] = -a[k][k - 1];
                                }
                            } else {
                                a[k][k - 1] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            let z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                let mut pp = a[k][j] + q * a[k + 1][j];
                                if k != nn - 1 {
                                    pp += r * a[k + 2][j];
                                    a[k + 2][j] -= pp * z;
                                }
                                a[k + 1][j] -= pp * y;
                                a[k][j] -= pp * x;
                            }
                            let mmin = if nn < k + 3 { nn } else { k + 3 };
                            for i in l..=mmin {
                                let mut pp = x * a[i][k] + y * a[i][k + 1];
                                if k != nn - 1 {
                                    pp += z * a[i][k + 2];
                                    a[i][k + 2] -= pp * r;
                                }
                                a[i][k + 1] -= pp * q;
                                a[i][k] -= pp;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if nn < 2 || l >= nn - 1 {
                break;
            }
        }
    }
    out.remove(0);
    if out.iter().any(|(re, im)| !re.is_finite() || !im.is_finite()) {
        return None;
    }
    Some(out)
}

/// Lowest persuadable node whose every neighbor satisfies
/// `(1 - w_ij)(x_j - x_i)^2 > 1/(2 gamma)`; such a node forces a positive eigenvalue.
pub fn instability_certificate(graph: &Graph, state: &OpinionState, params: &ModelParams) -> Option<usize> {
    if !(params.gamma > 0.0) {
        return None;
    }
    let x = state.as_slice();
    let threshold = 1.0 / (2.0 * params.gamma);
    graph.persuadable().iter().copied().find(|&i| {
        let nbrs = graph.neighbors(i);
        !nbrs.is_empty()
            && nbrs.iter().all(|&j| {
                let d = x[j] - x[i];
                let (_, one_minus_w) = params.weight_pair(d);
                one_minus_w * d * d > threshold
            })
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IsolationReport {
    /// `sqrt(max(delta, 1/gamma))`.
    pub bound: f64,
    /// `(node, passes)` for each persuadable node.
    pub nodes: Vec<(usize, bool)>,
}

impl IsolationReport {
    pub fn all_pass(&self) -> bool {
        self.nodes.iter().all(|&(_, ok)| ok)
    }

    pub fn failing(&self) -> Vec<usize> {
        self.nodes.iter().filter(|(_, ok)| !ok).map(|&(i, _)| i).collect()
    }
}

/// Whether each persuadable node has a neighbor within `sqrt(max(delta, 1/gamma))`,
/// a necessary condition at any linearly stable steady state.
pub fn isolation_check(graph: &Graph, state: &OpinionState, params: &ModelParams) -> IsolationReport {
    let x = state.as_slice();
    let reach = if params.gamma > 0.0 {
        params.delta.max(1.0 / params.gamma)
    } else {
        f64::INFINITY
    };
    let bound = math::sqrt(reach);
    let nodes = graph
        .persuadable()
        .iter()
        .map(|&i| {
            let ok = graph
                .neighbors(i)
                .iter()
                .any(|&j| (x[i] - x[j]).abs() <= bound);
            (i, ok)
        })
        .collect();
    IsolationReport { bound, nodes }
}

/// Convenience: decomposition plus report with the default marginal band.
pub fn classify(graph: &Graph, state: &OpinionState, params: &ModelParams) -> Result<SpectralReport> {
    let decomp = jacobian(graph, state, params, false)?;
    eigen_report(&decomp, DEFAULT_MARGINAL_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::velocity;
    use crate::graph::{karate_club, path_graph, Graph};

    fn p(gamma: f64, delta: f64) -> ModelParams {
        ModelParams::new(gamma, delta).unwrap()
    }

    /// Central differences of the velocity operator, independent of the analytic path.
    fn fd_jacobian(graph: &Graph, state: &OpinionState, params: &ModelParams, h: f64) -> DMatrix<f64> {
        let pers = graph.persuadable();
        let n = pers.len();
        let mut out = DMatrix::zeros(n, n);
        for (b, &j) in pers.iter().enumerate() {
            let mut plus = state.clone();
            let mut minus = state.clone();
            plus.0[j] += h;
            minus.0[j] -= h;
            let vp = velocity(graph, &plus, params);
            let vm = velocity(graph, &minus, params);
            for (a, &i) in pers.iter().enumerate() {
                out[(a, b)] = (vp[i] - vm[i]) / (2.0 * h);
            }
        }
        out
    }

    fn harmonic_path(n: usize) -> (Graph, OpinionState) {
        let g = path_graph(n).unwrap();
        let half = (n as f64 + 1.0) / 2.0;
        let x = (0..n + 2).map(|j| -half + j as f64).collect();
        let s = OpinionState::new(&g, x).unwrap();
        (g, s)
    }

    #[test]
    fn gamma_zero_laplacian_is_half_the_graph_laplacian() {
        let g = karate_club();
        let x = OpinionState::uniform(&g, 0.2);
        let d = jacobian(&g, &x, &p(0.0, 0.5), false).unwrap();
        for (a, &i) in d.persuadable.iter().enumerate() {
            for (b, &j) in d.persuadable.iter().enumerate() {
                let expected = if a == b {
                    d.persuadable.iter().filter(|&&k| g.has_edge(i, k)).count() as f64
                } else if g.has_edge(i, j) {
                    -1.0
                } else {
                    0.0
                };
                assert!((2.0 * d.laplacian[(a, b)] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn path_harmonic_m_is_scaled_toeplitz() {
        let (g, s) = harmonic_path(6);
        let params = p(0.7, 0.4);
        let d = jacobian(&g, &s, &params, false).unwrap();
        let v = crate::dynamics::omega(1.0, &params);
        let gval = 2.0 * params.gamma * (1.0 - v) - 1.0;
        let scale = v * gval;
        for a in 0..6usize {
            for b in 0..6 {
                let t = if a == b {
                    2.0
                } else if a.abs_diff(b) == 1 {
                    -1.0
                } else {
                    0.0
                };
                assert!((d.m[(a, b)] - scale * t).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn analytic_matches_finite_differences_at_steady_state() {
        let (g, s) = harmonic_path(5);
        for params in [p(0.5, 0.5), p(2.0, 1.0), p(6.0, 0.3)] {
            let d = jacobian(&g, &s, &params, false).unwrap();
            let fd = fd_jacobian(&g, &s, &params, 1e-6);
            assert!((&d.jp - fd).amax() < 1e-6);
        }
    }

    #[test]
    fn exact_mode_matches_finite_differences_off_steady() {
        let g = karate_club();
        let x: Vec<f64> = (0..34)
            .map(|i| match i {
                0 => -1.0,
                33 => 1.0,
                _ => ((i * 13) % 11) as f64 / 5.5 - 1.0,
            })
            .collect();
        let s = OpinionState::new(&g, x).unwrap();
        let params = p(3.0, 0.3);
        let exact = jacobian(&g, &s, &params, true).unwrap();
        assert!(exact.corrected);
        let fd = fd_jacobian(&g, &s, &params, 1e-6);
        assert!((&exact.jp - &fd).amax() < 1e-6);
        let steady_form = jacobian(&g, &s, &params, false).unwrap();
        assert!((&steady_form.jp - &fd).amax() > 1e-3);
    }

    #[test]
    fn split_identity_and_symmetry() {
        let g = karate_club();
        let x: Vec<f64> = (0..34)
            .map(|i| match i {
                0 => -1.0,
                33 => 1.0,
                _ => ((i * 7) % 9) as f64 / 4.5 - 1.0,
            })
            .collect();
        let s = OpinionState::new(&g, x).unwrap();
        let params = p(4.0, 0.2);
        let d = jacobian(&g, &s, &params, false).unwrap();
        assert!((&d.m - d.m.transpose()).amax() < 1e-12);
        let recon = &d.l1 - &d.l2 * (2.0 * params.gamma);
        assert!((&d.laplacian - recon).amax() < 1e-10);
        for l in [&d.l1, &d.l2] {
            let e = SymmetricEigen::new(l.clone());
            assert!(e.eigenvalues.iter().all(|&v| v >= -1e-10));
        }
        assert!(d.strengths.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn zero_gamma_is_stable_with_a_zealot() {
        let g = karate_club();
        let r = classify(&g, &OpinionState::uniform(&g, 0.0), &p(0.0, 1.0)).unwrap();
        assert_eq!(r.classification, Classification::Stable);
        assert!(r.eigenvalues.iter().all(|&l| l < 0.0));
    }

    #[test]
    fn unstable_path_harmonic_above_critical_gamma() {
        let (g, s) = harmonic_path(10);
        let r = classify(&g, &s, &p(2.0, 1.0)).unwrap();
        assert_eq!(r.classification, Classification::Unstable);
        assert!(r.top().unwrap() > 0.0);
    }

    #[test]
    fn symmetric_and_direct_eigenvalues_agree() {
        let (g, s) = harmonic_path(8);
        let d = jacobian(&g, &s, &p(0.8, 0.6), false).unwrap();
        let r = eigen_report(&d, 1e-8).unwrap();
        let mut direct: Vec<f64> = direct_eigenvalues(&d.jp).unwrap().iter().map(|c| c.0).collect();
        direct.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, b) in r.eigenvalues.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(r.max_imag_residual < 1e-10);
    }

    #[test]
    fn zero_strength_is_an_error() {
        let g = Graph::new(3, &[(0, 1)], &[(0, 0.0)]).unwrap();
        let s = OpinionState::new(&g, vec![0.0, 0.0, 0.0]).unwrap();
        assert_eq!(jacobian(&g, &s, &p(1.0, 1.0), false).unwrap_err(), Error::ZeroStrength(2));
    }

    #[test]
    fn certificate_cases() {
        let (g, s) = harmonic_path(10);
        // g(gamma) < 0 at gamma = 0.5, delta = 0.5
        assert_eq!(instability_certificate(&g, &s, &p(0.5, 0.5)), None);
        assert_eq!(instability_certificate(&g, &s, &p(0.0, 0.5)), None);
        // far above critical: every node has (1-w) d^2 = 1 - v > 1/(2 gamma)
        let cert = instability_certificate(&g, &s, &p(5.0, 0.5));
        assert_eq!(cert, Some(1));
        assert_eq!(classify(&g, &s, &p(5.0, 0.5)).unwrap().classification, Classification::Unstable);
    }

    #[test]
    fn isolation_cases() {
        let g = path_graph(2).unwrap();
        let consensus = OpinionState::new(&g, vec![-1.5, 0.0, 0.0, 1.5]).unwrap();
        let params = p(100.0, 0.01);
        let rep = isolation_check(&g, &consensus, &params);
        // node 1 has node 2 at distance 0
        assert!(rep.all_pass());
        let g = Graph::new(4, &[(0, 1), (1, 2), (2, 3)], &[(0, 0.0), (3, 0.0)]).unwrap();
        let lonely = OpinionState::new(&g, vec![0.0, 10.0, 0.05, 0.0]).unwrap();
        let rep = isolation_check(&g, &lonely, &params);
        assert!((rep.bound - 0.1).abs() < 1e-15);
        assert_eq!(rep.failing(), vec![1]);
    }

    fn sorted(mut v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn hqr_recovers_complex_pairs_and_repeats() {
        // rotation block plus a triple eigenvalue at -1
        let m = DMatrix::from_row_slice(
            5,
            5,
            &[
                0.0, -2.0, 0.0, 0.0, 0.0, //
                2.0, 0.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, -1.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, -1.0, 0.0, //
                0.0, 0.0, 0.0, 0.0, -1.0,
            ],
        );
        let q = DMatrix::from_fn(5, 5, |i, j| if i == j { 2.0 } else { 0.1 * (i + 2 * j) as f64 });
        let mixed = &q * m * q.clone().try_inverse().unwrap();
        let h = Hessenberg::new(mixed).h();
        let ev = sorted(hqr(h).unwrap());
        let expected = [(-1.0, 0.0), (-1.0, 0.0), (-1.0, 0.0), (0.0, -2.0), (0.0, 2.0)];
        for (a, b) in ev.iter().zip(expected) {
            assert!((a.0 - b.0).abs() < 1e-6 && (a.1 - b.1).abs() < 1e-6, "{ev:?}");
        }
    }

    #[test]
    fn direct_eigenvalues_on_clustered_polarized_state() {
        // weights across the split underflow relative to those within each side
        let g = karate_club();
        let x: Vec<f64> = (0..34)
            .map(|i| if [0, 4, 5, 6, 10, 11, 16].contains(&i) { -1.0 } else { 1.0 })
            .collect();
        let s = OpinionState::new(&g, x).unwrap();
        let d = jacobian(&g, &s, &p(8.0, 0.5), false).unwrap();
        let r = eigen_report(&d, DEFAULT_MARGINAL_TOL).unwrap();
        assert!(r.max_imag_residual < 1e-10);
        let mut direct: Vec<f64> = direct_eigenvalues(&d.jp).unwrap().iter().map(|c| c.0).collect();
        direct.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, b) in r.eigenvalues.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}
