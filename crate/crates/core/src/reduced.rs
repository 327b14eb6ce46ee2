//! Low-dimensional reductions: two one-parameter families of states on the path,
//! and the two-class reduction of the paired-clique graphs.
//!
//! Every reduced quantity is computed by embedding the reduced state in the full
//! graph and evaluating the full update operator there, so the reductions can be
//! checked against the full system rather than trusted.

use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::{residual, velocity, ModelParams, OpinionState};
use crate::error::{Error, Result};
use crate::graph::{path_graph, CliqueGraph, Graph};
use crate::ode::{self, StepControl};
use crate::spectral::{self, jacobian_matrix, Classification, DEFAULT_MARGINAL_TOL};

/// Default number of scan points for one-dimensional root searches.
pub const DEFAULT_SCAN: usize = 2001;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum FamilyKind {
    /// Interpolates from the harmonic state to each half of the path sitting on its zealot.
    Polarized,
    /// Interpolates from the harmonic state to all persuadable nodes at 0.
    Consensus,
}

/// A one-parameter family `x_theta = (1 - theta) xbar + theta (n + 1)/2 v` on the
/// path with `n` persuadable nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FamilySpec {
    pub kind: FamilyKind,
    pub n: usize,
}

impl FamilySpec {
    pub fn new(kind: FamilyKind, n: usize) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::InvalidArgument("family needs an even persuadable count n >= 2"));
        }
        Ok(FamilySpec { kind, n })
    }

    pub fn graph(&self) -> Graph {
        path_graph(self.n).expect("n >= 2")
    }

    /// The node whose velocity decides whether a family member is steady. Every other
    /// persuadable node is balanced by symmetry.
    ///
    /// For the polarized family it is the midpoint `n/2`; for the consensus family the
    /// midpoint never moves, and the first persuadable node is used instead.
    pub fn active_node(&self) -> usize {
        match self.kind {
            FamilyKind::Polarized => self.n / 2,
            FamilyKind::Consensus => 1,
        }
    }

    /// `d x_active / d theta`.
    pub fn active_rate(&self) -> f64 {
        let half = (self.n as f64 + 1.0) / 2.0;
        let xbar = -half + self.active_node() as f64;
        match self.kind {
            FamilyKind::Polarized => -xbar - half,
            FamilyKind::Consensus => -xbar,
        }
    }
}

/// The family member at `theta` on the `n + 2` node path, zealots included.
///
/// In the consensus family zealots stay at `-(n+1)/2` and `(n+1)/2`.
pub fn family_state(spec: &FamilySpec, theta: f64) -> Result<OpinionState> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidArgument("theta must lie in [0, 1]"));
    }
    let n = spec.n;
    let half = (n as f64 + 1.0) / 2.0;
    let values = (0..n + 2)
        .map(|j| {
            let xbar = -half + j as f64;
            let zealot = j == 0 || j == n + 1;
            match spec.kind {
                FamilyKind::Polarized => {
                    let v = if j <= n / 2 { -1.0 } else { 1.0 };
                    if zealot {
                        xbar
                    } else {
                        (1.0 - theta) * xbar + theta * half * v
                    }
                }
                FamilyKind::Consensus => {
                    if zealot {
                        xbar
                    } else {
                        (1.0 - theta) * xbar
                    }
                }
            }
        })
        .collect();
    Ok(OpinionState(values))
}

/// Velocity of the active node at the family member `theta`, from the full operator.
pub fn reduced_velocity(spec: &FamilySpec, theta: f64, params: &ModelParams) -> Result<f64> {
    let g = spec.graph();
    reduced_velocity_on(&g, spec, theta, params)
}

fn reduced_velocity_on(g: &Graph, spec: &FamilySpec, theta: f64, params: &ModelParams) -> Result<f64> {
    let x = family_state(spec, theta)?;
    Ok(velocity(g, &x, params)[spec.active_node()])
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FamilyRoot {
    pub theta: f64,
    /// Stability of `theta` under the one-dimensional reduced flow.
    pub reduced: Classification,
    /// Stability of the embedded state in the full system.
    pub full: Classification,
    /// `max |F|` of the embedded state.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FamilyCount {
    /// Roots that are stable in the full system.
    pub count: usize,
    /// Roots that are stable in the reduced flow.
    pub count_reduced: usize,
    pub roots: Vec<FamilyRoot>,
}

/// Roots of `f` on `[a, b]` from a scan of `points` samples plus bisection.
///
/// Exact zeros on the grid count once per run of consecutive zeros.
fn scan_roots<F: FnMut(f64) -> Result<f64>>(mut f: F, a: f64, b: f64, points: usize) -> Result<Vec<f64>> {
    let points = points.max(2);
    let at = |k: usize| if k + 1 == points { b } else { a + (b - a) * k as f64 / (points - 1) as f64 };
    let mut roots = Vec::new();
    let mut prev = (at(0), f(at(0))?);
    if prev.1 == 0.0 {
        roots.push(prev.0);
    }
    for k in 1..points {
        let t = at(k);
        let v = f(t)?;
        if v == 0.0 {
            if prev.1 != 0.0 {
                roots.push(t);
            }
        } else if prev.1 != 0.0 && (v < 0.0) != (prev.1 < 0.0) {
            let (mut lo, mut hi) = (prev.0, t);
            let flo_neg = prev.1 < 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fm = f(mid)?;
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (fm < 0.0) == flo_neg {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev = (t, v);
    }
    Ok(roots)
}

/// Sign of the slope of a scalar field at a root, by central differences clipped to `[a, b]`.
fn slope_at<F: FnMut(f64) -> Result<f64>>(mut f: F, t: f64, a: f64, b: f64) -> Result<f64> {
    let h = 1e-6 * (b - a);
    let lo = (t - h).max(a);
    let hi = (t + h).min(b);
    Ok((f(hi)? - f(lo)?) / (hi - lo))
}

/// Finds the family members that are steady at `params` and classifies each one.
pub fn count_stable_family(spec: &FamilySpec, params: &ModelParams, scan_points: usize) -> Result<FamilyCount> {
    let g = spec.graph();
    let rate = spec.active_rate();
    // theta' = f / rate, so a root is stable in the reduced flow when d(f/rate)/dtheta < 0
    let field = |t: f64| reduced_velocity_on(&g, spec, t, params);
    let thetas = scan_roots(field, 0.0, 1.0, scan_points)?;
    let mut roots = Vec::with_capacity(thetas.len());
    for theta in thetas {
        let slope = slope_at(|t| reduced_velocity_on(&g, spec, t, params), theta, 0.0, 1.0)? / rate;
        let state = family_state(spec, theta)?;
        let report = spectral::classify(&g, &state, params)?;
        roots.push(FamilyRoot {
            theta,
            reduced: Classification::from_indicator(slope, DEFAULT_MARGINAL_TOL),
            full: report.classification,
            residual: residual(&g, &state, params),
        });
    }
    Ok(FamilyCount {
        count: roots.iter().filter(|r| r.full == Classification::Stable).count(),
        count_reduced: roots.iter().filter(|r| r.reduced == Classification::Stable).count(),
        roots,
    })
}

/// Paired-clique graph with class opinions `x1`, `x2` and zealots at `-1`, `+1`.
#[derive(Clone, Debug, PartialEq)]
pub struct CliqueReduction {
    pub topology: CliqueGraph,
}

/// Within-class velocity spread tolerated before the reduction is declared broken.
const CLASS_AGREEMENT: f64 = 1e-10;

impl CliqueReduction {
    pub fn new(topology: CliqueGraph) -> Self {
        CliqueReduction { topology }
    }

    pub fn graph(&self) -> &Graph {
        &self.topology.graph
    }

    pub fn embed(&self, x1: f64, x2: f64) -> OpinionState {
        let g = &self.topology.graph;
        let mut values = vec![0.0; g.node_count()];
        for (&z, &op) in g.zealots() {
            values[z] = op;
        }
        for &i in &self.topology.classes[0] {
            values[i] = x1;
        }
        for &i in &self.topology.classes[1] {
            values[i] = x2;
        }
        OpinionState(values)
    }

    /// `(dx1/dt, dx2/dt)`; errors if nodes of one class disagree.
    pub fn velocity(&self, x1: f64, x2: f64, params: &ModelParams) -> Result<(f64, f64)> {
        let v = velocity(self.graph(), &self.embed(x1, x2), params);
        let mut out = [0.0; 2];
        for (c, class) in self.topology.classes.iter().enumerate() {
            let first = v[class[0]];
            let spread = class.iter().fold(0.0f64, |m, &i| m.max((v[i] - first).abs()));
            if spread > CLASS_AGREEMENT {
                return Err(Error::InconsistentReduction(spread));
            }
            out[c] = first;
        }
        Ok((out[0], out[1]))
    }

    /// Jacobian of the reduced field: row `a`, column `b` sums the full Jacobian of a
    /// class-`a` node over the columns of class `b`.
    pub fn reduced_jacobian(&self, x1: f64, x2: f64, params: &ModelParams) -> [[f64; 2]; 2] {
        let g = self.graph();
        let x = self.embed(x1, x2);
        let jac = jacobian_matrix(g, &x.0, params);
        let mut out = [[0.0; 2]; 2];
        for a in 0..2 {
            let row = g.persuadable_index(self.topology.classes[a][0]).expect("class nodes are persuadable");
            for b in 0..2 {
                out[a][b] = self.topology.classes[b]
                    .iter()
                    .map(|&j| jac[(row, g.persuadable_index(j).expect("class nodes are persuadable"))])
                    .sum();
            }
        }
        out
    }

    fn reduced_class(&self, x1: f64, x2: f64, params: &ModelParams) -> Classification {
        let j = self.reduced_jacobian(x1, x2, params);
        let tr = j[0][0] + j[1][1];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let disc = 0.25 * tr * tr - det;
        let top = if disc >= 0.0 {
            0.5 * tr + crate::math::sqrt(disc)
        } else {
            0.5 * tr
        };
        Classification::from_indicator(top, DEFAULT_MARGINAL_TOL)
    }

    fn full_class(&self, x1: f64, x2: f64, params: &ModelParams) -> Result<Classification> {
        Ok(spectral::classify(self.graph(), &self.embed(x1, x2), params)?.classification)
    }
}

/// `(dx1/dt, dx2/dt)` of the two-class reduction.
pub fn clique_reduced_velocity(reduction: &CliqueReduction, x1: f64, x2: f64, params: &ModelParams) -> Result<(f64, f64)> {
    reduction.velocity(x1, x2, params)
}

/// The invariant lines of the reduction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Line {
    /// `x1 = -x2`: symmetric polarization.
    Anti,
    /// `x1 = x2`: consensus between the classes.
    Diagonal,
}

impl Line {
    fn point(&self, s: f64) -> (f64, f64) {
        match self {
            Line::Anti => (s, -s),
            Line::Diagonal => (s, s),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReducedFixedPoint {
    pub x1: f64,
    pub x2: f64,
    pub reduced: Classification,
    pub full: Classification,
    /// `max |F|` of the embedded state.
    pub residual: f64,
}

impl ReducedFixedPoint {
    pub fn polarization(&self) -> f64 {
        (self.x1 - self.x2).abs()
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LineCount {
    pub line: Line,
    /// Roots that are stable in the full system.
    pub count: usize,
    pub count_reduced: usize,
    pub roots: Vec<ReducedFixedPoint>,
}

/// Steady states of the reduction on `line` with `x1` in `[-1, 1]`.
pub fn count_stable_on_line(reduction: &CliqueReduction, params: &ModelParams, line: Line, scan_points: usize) -> Result<LineCount> {
    let field = |s: f64| {
        let (x1, x2) = line.point(s);
        reduction.velocity(x1, x2, params).map(|v| v.0)
    };
    let mut roots = Vec::new();
    for s in scan_roots(field, -1.0, 1.0, scan_points)? {
        let (x1, x2) = line.point(s);
        roots.push(ReducedFixedPoint {
            x1,
            x2,
            reduced: reduction.reduced_class(x1, x2, params),
            full: reduction.full_class(x1, x2, params)?,
            residual: residual(reduction.graph(), &reduction.embed(x1, x2), params),
        });
    }
    Ok(LineCount {
        line,
        count: roots.iter().filter(|r| r.full == Classification::Stable).count(),
        count_reduced: roots.iter().filter(|r| r.reduced == Classification::Stable).count(),
        roots,
    })
}

/// A square grid over `[min, max]^2` with `resolution` nodes per axis.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub resolution: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            min: -1.5,
            max: 1.5,
            resolution: 201,
        }
    }
}

impl GridSpec {
    pub fn coord(&self, k: usize) -> f64 {
        if self.resolution <= 1 {
            return 0.5 * (self.min + self.max);
        }
        self.min + (self.max - self.min) * k as f64 / (self.resolution - 1) as f64
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let r = self.resolution;
        (0..r * r).map(move |k| (self.coord(k % r), self.coord(k / r)))
    }
}

/// Largest residual for which a reduced fixed point is accepted.
pub const FIXED_POINT_RESIDUAL: f64 = 1e-8;
const FIXED_POINT_MERGE: f64 = 1e-6;

fn newton_2d(red: &CliqueReduction, params: &ModelParams, mut p: (f64, f64)) -> Option<(f64, f64)> {
    let norm = |v: (f64, f64)| v.0.abs().max(v.1.abs());
    let mut v = red.velocity(p.0, p.1, params).ok()?;
    for _ in 0..60 {
        if norm(v) < 1e-13 {
            return Some(p);
        }
        let j = red.reduced_jacobian(p.0, p.1, params);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dx = -(j[1][1] * v.0 - j[0][1] * v.1) / det;
        let dy = -(-j[1][0] * v.0 + j[0][0] * v.1) / det;
        let mut lambda = 1.0;
        loop {
            let q = ((p.0 + lambda * dx).clamp(-1.0, 1.0), (p.1 + lambda * dy).clamp(-1.0, 1.0));
            let vq = red.velocity(q.0, q.1, params).ok()?;
            if norm(vq) < (1.0 - 1e-4 * lambda) * norm(v) {
                p = q;
                v = vq;
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-6 {
                return (norm(v) < 1e-10).then_some(p);
            }
        }
    }
    (norm(v) < 1e-10).then_some(p)
}

/// Fixed points of the reduction from a `starts x starts` grid of Newton starts on
/// `[-1, 1]^2` plus the roots on both invariant lines.
pub fn find_fixed_points(red: &CliqueReduction, params: &ModelParams, starts: usize) -> Result<Vec<ReducedFixedPoint>> {
    let mut found: Vec<ReducedFixedPoint> = Vec::new();
    let push = |found: &mut Vec<ReducedFixedPoint>, p: (f64, f64)| -> Result<()> {
        if found
            .iter()
            .any(|f| (f.x1 - p.0).abs().max((f.x2 - p.1).abs()) < FIXED_POINT_MERGE)
        {
            return Ok(());
        }
        let res = residual(red.graph(), &red.embed(p.0, p.1), params);
        if res < FIXED_POINT_RESIDUAL {
            found.push(ReducedFixedPoint {
                x1: p.0,
                x2: p.1,
                reduced: red.reduced_class(p.0, p.1, params),
                full: red.full_class(p.0, p.1, params)?,
                residual: res,
            });
        }
        Ok(())
    };
    for line in [Line::Anti, Line::Diagonal] {
        for r in count_stable_on_line(red, params, line, 401)?.roots {
            push(&mut found, (r.x1, r.x2))?;
        }
    }
    let grid = GridSpec {
        min: -1.0,
        max: 1.0,
        resolution: starts,
    };
    for p in grid.points() {
        if let Some(q) = newton_2d(red, params, p) {
            push(&mut found, q)?;
        }
    }
    found.sort_by(|a, b| (a.x1, a.x2).partial_cmp(&(b.x1, b.x2)).expect("finite"));
    Ok(found)
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NullclineSegment {
    /// 1 for `dx1/dt = 0`, 2 for `dx2/dt = 0`.
    pub component: u8,
    pub start: (f64, f64),
    pub end: (f64, f64),
}

/// Zero sets of both velocity components by marching squares on `grid`.
pub fn nullclines(red: &CliqueReduction, params: &ModelParams, grid: &GridSpec) -> Result<Vec<NullclineSegment>> {
    let r = grid.resolution;
    let mut values = [vec![0.0; r * r], vec![0.0; r * r]];
    for (k, (x1, x2)) in grid.points().enumerate() {
        let v = red.velocity(x1, x2, params)?;
        values[0][k] = v.0;
        values[1][k] = v.1;
    }
    let mut out = Vec::new();
    for (c, field) in values.iter().enumerate() {
        for j in 0..r.saturating_sub(1) {
            for i in 0..r - 1 {
                let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
                let val = |(a, b): (usize, usize)| field[b * r + a];
                let pos = |(a, b): (usize, usize)| (grid.coord(a), grid.coord(b));
                let mut crossings = Vec::with_capacity(4);
                for e in 0..4 {
                    let (p, q) = (corners[e], corners[(e + 1) % 4]);
                    let (fp, fq) = (val(p), val(q));
                    if (fp >= 0.0) != (fq >= 0.0) {
                        let t = fp / (fp - fq);
                        let (pp, qq) = (pos(p), pos(q));
                        crossings.push((pp.0 + t * (qq.0 - pp.0), pp.1 + t * (qq.1 - pp.1)));
                    }
                }
                let component = c as u8 + 1;
                match crossings.len() {
                    2 => out.push(NullclineSegment {
                        component,
                        start: crossings[0],
                        end: crossings[1],
                    }),
                    4 => {
                        // saddle cell: pair crossings according to the sign at the center
                        let center: f64 = corners.iter().map(|&p| val(p)).sum::<f64>() / 4.0;
                        let (a, b) = if (center >= 0.0) == (val(corners[0]) >= 0.0) {
                            ((0, 1), (2, 3))
                        } else {
                            ((3, 0), (1, 2))
                        };
                        for (s, e) in [a, b] {
                            out.push(NullclineSegment {
                                component,
                                start: crossings[s],
                                end: crossings[e],
                            });
                        }
                    }
                    _ => {}
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BasinCell {
    pub x1: f64,
    pub x2: f64,
    /// Index into the portrait's fixed points; `None` when the run did not settle within
    /// `1e-3` of one.
    pub attractor: Option<usize>,
    /// `|x1 - x2|` at the attractor.
    pub polarization: Option<f64>,
}

/// Integration horizon for basin labels.
pub const BASIN_HORIZON: f64 = 200.0;
const BASIN_MATCH: f64 = 1e-3;
/// Velocity below which a run that reached the horizon still counts as settled.
const BASIN_SETTLED: f64 = 1e-6;

/// Integrates the reduction from `(x1, x2)` and names the fixed point it reaches.
pub fn basin_cell(red: &CliqueReduction, params: &ModelParams, x1: f64, x2: f64, fixed_points: &[ReducedFixedPoint]) -> Result<BasinCell> {
    let mut failure = None;
    let end = ode::solve(
        |y, dy| match red.velocity(y[0], y[1], params) {
            Ok(v) => {
                dy[0] = v.0;
                dy[1] = v.1;
            }
            Err(e) => {
                failure.get_or_insert(e);
                dy[0] = 0.0;
                dy[1] = 0.0;
            }
        },
        &[x1, x2],
        BASIN_HORIZON,
        StepControl::default(),
        Some(1e-10),
        |_, _| {},
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let settled = |y: &[f64]| {
        red.velocity(y[0], y[1], params)
            .map_or(false, |v| v.0.abs().max(v.1.abs()) < BASIN_SETTLED)
    };
    let attractor = match end {
        Ok(end) if end.stopped || settled(&end.y) => fixed_points
            .iter()
            .enumerate()
            .map(|(k, f)| (k, (f.x1 - end.y[0]).abs().max((f.x2 - end.y[1]).abs())))
            .filter(|&(_, d)| d < BASIN_MATCH)
            .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite"))
            .map(|(k, _)| k),
        _ => None,
    };
    Ok(BasinCell {
        x1,
        x2,
        attractor,
        polarization: attractor.map(|k| fixed_points[k].polarization()),
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhasePortrait {
    pub grid: GridSpec,
    pub fixed_points: Vec<ReducedFixedPoint>,
    pub nullclines: Vec<NullclineSegment>,
    /// Row-major over the grid, `x1` varying fastest.
    pub basins: Vec<BasinCell>,
}

/// Newton starts per axis used by [`phase_portrait`].
pub const FIXED_POINT_STARTS: usize = 21;

/// Fixed points, nullclines and basin labels of the two-class reduction.
pub fn phase_portrait(red: &CliqueReduction, params: &ModelParams, grid: &GridSpec) -> Result<PhasePortrait> {
    let fixed_points = find_fixed_points(red, params, FIXED_POINT_STARTS)?;
    let nullclines = nullclines(red, params, grid)?;
    let basins = grid
        .points()
        .map(|(x1, x2)| basin_cell(red, params, x1, x2, &fixed_points))
        .collect::<Result<Vec<_>>>()?;
    Ok(PhasePortrait {
        grid: *grid,
        fixed_points,
        nullclines,
        basins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::omega;
    use crate::graph::{paired_cliques, Alignment};
    use crate::steady::harmonic_state;

    fn p(gamma: f64, delta: f64) -> ModelParams {
        ModelParams::new(gamma, delta).unwrap()
    }

    /// Active-node velocity written out by hand for each family.
    fn closed_form(spec: &FamilySpec, theta: f64, params: &ModelParams) -> f64 {
        let n = spec.n as f64;
        let (left, right) = match spec.kind {
            FamilyKind::Polarized => (1.0 - theta, 1.0 + theta * n),
            FamilyKind::Consensus => (1.0 + theta * (n - 1.0) / 2.0, 1.0 - theta),
        };
        let (wl, wr) = (omega(left, params), omega(right, params));
        (-left * wl + right * wr) / (wl + wr)
    }

    #[test]
    fn family_endpoints() {
        for n in [4, 12] {
            let g = path_graph(n).unwrap();
            for kind in [FamilyKind::Polarized, FamilyKind::Consensus] {
                let spec = FamilySpec::new(kind, n).unwrap();
                let x0 = family_state(&spec, 0.0).unwrap();
                assert!(x0.max_abs_diff(&harmonic_state(&g).unwrap()) < 1e-14);
                x0.validate(&g).unwrap();
                family_state(&spec, 1.0).unwrap().validate(&g).unwrap();
            }
            let half = (n as f64 + 1.0) / 2.0;
            let pol = family_state(&FamilySpec::new(FamilyKind::Polarized, n).unwrap(), 1.0).unwrap();
            for j in 1..=n {
                assert_eq!(pol[j], if j <= n / 2 { -half } else { half });
            }
            let con = family_state(&FamilySpec::new(FamilyKind::Consensus, n).unwrap(), 1.0).unwrap();
            assert!((1..=n).all(|j| con[j] == 0.0));
        }
        assert!(FamilySpec::new(FamilyKind::Polarized, 5).is_err());
        let spec = FamilySpec::new(FamilyKind::Polarized, 4).unwrap();
        assert!(family_state(&spec, 1.5).is_err());
    }

    #[test]
    fn only_the_active_node_moves() {
        for kind in [FamilyKind::Polarized, FamilyKind::Consensus] {
            let spec = FamilySpec::new(kind, 10).unwrap();
            let g = spec.graph();
            let x = family_state(&spec, 0.37).unwrap();
            let v = velocity(&g, &x, &p(3.0, 0.4));
            let a = spec.active_node();
            let mirror = spec.n + 1 - a;
            for (j, &vj) in v.iter().enumerate() {
                if j == a || j == mirror {
                    assert!(vj.abs() > 1e-6);
                } else {
                    assert!(vj.abs() < 1e-12, "node {j}: {vj}");
                }
            }
            assert!((v[a] + v[mirror]).abs() < 1e-12);
        }
    }

    #[test]
    fn full_operator_matches_closed_form() {
        for n in [4, 10, 12] {
            for kind in [FamilyKind::Polarized, FamilyKind::Consensus] {
                let spec = FamilySpec::new(kind, n).unwrap();
                for params in [p(0.5, 0.3), p(5.0, 1.0), p(40.0, 0.05)] {
                    for k in 0..=50 {
                        let theta = k as f64 / 50.0;
                        let a = reduced_velocity(&spec, theta, &params).unwrap();
                        let b = closed_form(&spec, theta, &params);
                        assert!((a - b).abs() < 1e-12, "{kind:?} {n} {theta}: {a} vs {b}");
                    }
                }
            }
        }
        let spec = FamilySpec::new(FamilyKind::Polarized, 12).unwrap();
        assert_eq!(reduced_velocity(&spec, 0.0, &p(3.0, 0.2)).unwrap(), 0.0);
    }

    #[test]
    fn family_roots_are_steady() {
        let spec = FamilySpec::new(FamilyKind::Polarized, 12).unwrap();
        for params in [p(0.1, 0.5), p(10.0, 1.5), p(30.0, 0.3)] {
            let c = count_stable_family(&spec, &params, 501).unwrap();
            assert!(c.roots[0].theta == 0.0);
            for r in &c.roots {
                assert!(r.residual < 1e-8, "{r:?}");
            }
        }
    }

    #[test]
    fn small_gamma_polarized_count_is_one() {
        let spec = FamilySpec::new(FamilyKind::Polarized, 12).unwrap();
        let c = count_stable_family(&spec, &p(0.001, 0.5), 2001).unwrap();
        assert_eq!(c.count, 1);
        assert_eq!(c.roots.iter().filter(|r| r.full == Classification::Stable).next().unwrap().theta, 0.0);
    }

    fn reductions() -> [CliqueReduction; 2] {
        [
            CliqueReduction::new(paired_cliques(10, Alignment::Aligned).unwrap()),
            CliqueReduction::new(paired_cliques(10, Alignment::Unaligned).unwrap()),
        ]
    }

    #[test]
    fn clique_reduction_basics() {
        for red in reductions() {
            let params = p(4.0, 0.3);
            assert_eq!(red.velocity(0.0, 0.0, &params).unwrap(), (0.0, 0.0));
            for &(x1, x2) in &[(0.3, -0.2), (0.9, 0.1), (-0.7, -0.4)] {
                let (a, b) = red.velocity(x1, x2, &params).unwrap();
                let (c, d) = red.velocity(-x2, -x1, &params).unwrap();
                assert!((c + b).abs() < 1e-12 && (d + a).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn broken_classes_are_reported() {
        let mut topo = paired_cliques(4, Alignment::Aligned).unwrap();
        let (a, b) = (topo.classes[0][0], topo.classes[1][0]);
        topo.classes[0][0] = b;
        topo.classes[1][0] = a;
        let red = CliqueReduction::new(topo);
        assert!(matches!(red.velocity(0.5, -0.5, &p(2.0, 0.5)), Err(Error::InconsistentReduction(_))));
    }

    #[test]
    fn reduced_jacobian_matches_differences() {
        let red = &reductions()[0];
        let params = p(3.0, 0.4);
        let (x1, x2) = (0.2, -0.5);
        let j = red.reduced_jacobian(x1, x2, &params);
        let h = 1e-6;
        let dx = |a: f64, b: f64| red.velocity(a, b, &params).unwrap();
        let c0 = ((dx(x1 + h, x2).0 - dx(x1 - h, x2).0) / (2.0 * h), (dx(x1 + h, x2).1 - dx(x1 - h, x2).1) / (2.0 * h));
        let c1 = ((dx(x1, x2 + h).0 - dx(x1, x2 - h).0) / (2.0 * h), (dx(x1, x2 + h).1 - dx(x1, x2 - h).1) / (2.0 * h));
        assert!((j[0][0] - c0.0).abs() < 1e-6 && (j[1][0] - c0.1).abs() < 1e-6);
        assert!((j[0][1] - c1.0).abs() < 1e-6 && (j[1][1] - c1.1).abs() < 1e-6);
    }

    #[test]
    fn line_count_at_zero_gamma() {
        for red in reductions() {
            let c = count_stable_on_line(&red, &p(0.0, 0.5), Line::Anti, 201).unwrap();
            assert_eq!(c.count, 1);
            assert_eq!(c.roots.len(), 1);
            assert_eq!((c.roots[0].x1, c.roots[0].x2), (0.0, 0.0));
        }
    }

    #[test]
    fn line_roots_come_in_pairs() {
        for red in reductions() {
            let c = count_stable_on_line(&red, &p(20.0, 0.3), Line::Anti, 2001).unwrap();
            let xs: Vec<f64> = c.roots.iter().map(|r| r.x1).collect();
            for &x in &xs {
                assert!(xs.iter().any(|&y| (x + y).abs() < 1e-9), "{xs:?}");
            }
            for r in &c.roots {
                assert!(r.residual < 1e-8);
            }
        }
    }

    #[test]
    fn portrait_at_zero_gamma() {
        let red = &reductions()[1];
        let grid = GridSpec {
            min: -1.5,
            max: 1.5,
            resolution: 7,
        };
        let pp = phase_portrait(red, &p(0.0, 0.5), &grid).unwrap();
        assert_eq!(pp.fixed_points.len(), 1);
        assert!(pp.basins.iter().all(|b| b.attractor == Some(0)));
        assert!(pp.nullclines.iter().any(|s| s.component == 1));
        assert!(pp.nullclines.iter().any(|s| s.component == 2));
    }
}
