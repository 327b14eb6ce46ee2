//! Undirected simple graphs with a designated set of zealots.
//!
//! Node ids are 0-based and contiguous. Zealots carry a fixed opinion; every other
//! node is persuadable. The constructors here build the special topologies used
//! throughout the crate: paths with opposing end zealots, paired cliques with two
//! fully exposed zealots, the Karate Club network, and a small decomposable graph
//! with a single-gateway block.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Undirected simple graph with zealots. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    zealots: BTreeMap<usize, f64>,
    #[cfg_attr(feature = "serde", serde(skip))]
    neighbors: Vec<Vec<usize>>,
    #[cfg_attr(feature = "serde", serde(skip))]
    persuadable: Vec<usize>,
    #[cfg_attr(feature = "serde", serde(skip))]
    persuadable_index: Vec<Option<usize>>,
}

/// Connected components of the subgraph induced by the persuadable nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PersuadablePartition {
    pub components: Vec<Vec<usize>>,
}

/// A zealot-free block whose every path to a zealot runs through `gateway`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GatewayBlock {
    pub gateway: usize,
    pub block: Vec<usize>,
}

/// How the class partition of a paired-clique graph relates to its cliques.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Alignment {
    /// Classes coincide with the two cliques.
    Aligned,
    /// Every persuadable node has half its neighbors in each class.
    Unaligned,
}

/// A paired-clique graph together with its two-class partition of persuadable nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct CliqueGraph {
    pub graph: Graph,
    pub clique_size: usize,
    pub alignment: Alignment,
    /// Persuadable node ids of class 1 and class 2.
    pub classes: [Vec<usize>; 2],
    /// Zealot ids with opinions -1 and +1, in that order.
    pub zealots: [usize; 2],
}

impl Graph {
    /// Validates and builds a graph. Duplicate undirected edges are collapsed.
    pub fn new(
        node_count: usize,
        edges: &[(usize, usize)],
        zealots: &[(usize, f64)],
    ) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            for node in [a, b] {
                if node >= node_count {
                    return Err(Error::NodeOutOfRange { node, node_count });
                }
            }
            if a == b {
                return Err(Error::SelfEdge(a));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let mut zmap = BTreeMap::new();
        for &(node, opinion) in zealots {
            if node >= node_count {
                return Err(Error::NodeOutOfRange { node, node_count });
            }
            if !opinion.is_finite() {
                return Err(Error::NonFiniteOpinion { node, opinion });
            }
            if zmap.insert(node, opinion).is_some() {
                return Err(Error::DuplicateZealot(node));
            }
        }
        Ok(Self::assemble(node_count, set.into_iter().collect(), zmap))
    }

    fn assemble(node_count: usize, edges: Vec<(usize, usize)>, zealots: BTreeMap<usize, f64>) -> Self {
        let mut neighbors = vec![Vec::new(); node_count];
        for &(a, b) in &edges {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        let mut persuadable = Vec::new();
        let mut persuadable_index = vec![None; node_count];
        for i in 0..node_count {
            if !zealots.contains_key(&i) {
                persuadable_index[i] = Some(persuadable.len());
                persuadable.push(i);
            }
        }
        Graph {
            node_count,
            edges,
            zealots,
            neighbors,
            persuadable,
            persuadable_index,
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Normalized edges `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn zealots(&self) -> &BTreeMap<usize, f64> {
        &self.zealots
    }

    pub fn zealot_opinion(&self, node: usize) -> Option<f64> {
        self.zealots.get(&node).copied()
    }

    pub fn is_zealot(&self, node: usize) -> bool {
        self.persuadable_index[node].is_none()
    }

    /// Sorted neighbor list of `node`.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.neighbors[node].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    /// Persuadable node ids in increasing order.
    pub fn persuadable(&self) -> &[usize] {
        &self.persuadable
    }

    /// Position of `node` within [`Graph::persuadable`], if it is persuadable.
    pub fn persuadable_index(&self, node: usize) -> Option<usize> {
        self.persuadable_index[node]
    }

    /// Number of zealots adjacent to `node`.
    pub fn zealot_degree(&self, node: usize) -> usize {
        self.neighbors[node].iter().filter(|&&j| self.is_zealot(j)).count()
    }

    /// Smallest and largest zealot opinion, if any zealots exist.
    pub fn zealot_hull(&self) -> Option<(f64, f64)> {
        let mut it = self.zealots.values().copied();
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), x| (lo.min(x), hi.max(x))))
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.node_count];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.node_count
    }

    /// Connected components of the persuadable subgraph, each sorted, ordered by smallest id.
    pub fn persuadable_components(&self) -> PersuadablePartition {
        let mut seen = vec![false; self.node_count];
        let mut components = Vec::new();
        for &start in &self.persuadable {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &v in &self.neighbors[u] {
                    if !seen[v] && !self.is_zealot(v) {
                        seen[v] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            components.push(comp);
        }
        PersuadablePartition { components }
    }

    /// True iff every persuadable node is adjacent to zero or two zealots.
    ///
    /// Only defined for graphs with exactly two zealots.
    pub fn is_balanced_exposure(&self) -> Result<bool> {
        if self.zealots.len() != 2 {
            return Err(Error::ZealotCount(self.zealots.len()));
        }
        Ok(self
            .persuadable
            .iter()
            .all(|&i| self.zealot_degree(i) != 1))
    }

    /// Maximal zealot-free blocks that reach every zealot through one gateway node.
    ///
    /// For each node `i`, the components of `G - i` without zealots are blocks with
    /// gateway `i`; blocks nested inside a larger block are dropped. Graphs without
    /// zealots have no blocks.
    pub fn single_gateway_blocks(&self) -> Result<Vec<GatewayBlock>> {
        if !self.is_connected() {
            return Err(Error::Disconnected);
        }
        if self.zealots.is_empty() {
            return Ok(Vec::new());
        }
        let mut candidates: Vec<GatewayBlock> = Vec::new();
        for removed in 0..self.node_count {
            let mut seen = vec![false; self.node_count];
            seen[removed] = true;
            for start in 0..self.node_count {
                if seen[start] {
                    continue;
                }
                seen[start] = true;
                let mut comp = vec![start];
                let mut has_zealot = self.is_zealot(start);
                let mut queue = VecDeque::from([start]);
                while let Some(u) = queue.pop_front() {
                    for &v in &self.neighbors[u] {
                        if !seen[v] {
                            seen[v] = true;
                            has_zealot |= self.is_zealot(v);
                            comp.push(v);
                            queue.push_back(v);
                        }
                    }
                }
                if !has_zealot {
                    comp.sort_unstable();
                    candidates.push(GatewayBlock {
                        gateway: removed,
                        block: comp,
                    });
                }
            }
        }
        let maximal = candidates
            .iter()
            .filter(|c| {
                !candidates.iter().any(|other| {
                    other.block.len() > c.block.len()
                        && c.block.iter().all(|n| other.block.binary_search(n).is_ok())
                })
            })
            .cloned()
            .collect();
        Ok(maximal)
    }

    /// The subgraph on `nodes` plus every zealot adjacent to them, relabeled 0..m.
    ///
    /// Returns the subgraph and the original id of each new node.
    pub fn with_attached_zealots(&self, nodes: &[usize]) -> (Graph, Vec<usize>) {
        let mut keep: BTreeSet<usize> = nodes.iter().copied().collect();
        for &i in nodes {
            for &j in &self.neighbors[i] {
                if self.is_zealot(j) {
                    keep.insert(j);
                }
            }
        }
        let original: Vec<usize> = keep.into_iter().collect();
        let mut relabel = vec![usize::MAX; self.node_count];
        for (new, &old) in original.iter().enumerate() {
            relabel[old] = new;
        }
        let edges = self
            .edges
            .iter()
            .filter(|&&(a, b)| relabel[a] != usize::MAX && relabel[b] != usize::MAX)
            // zealot-zealot edges carry no dynamics; keep them anyway for fidelity
            .map(|&(a, b)| (relabel[a], relabel[b]))
            .collect();
        let zealots = original
            .iter()
            .filter_map(|&old| self.zealot_opinion(old).map(|z| (relabel[old], z)))
            .collect();
        (Self::assemble(original.len(), edges, zealots), original)
    }
}

/// Path with `n_persuadable` persuadable nodes between two end zealots.
///
/// Node 0 has opinion `-(n+1)/2`, node `n+1` has opinion `(n+1)/2`.
pub fn path_graph(n_persuadable: usize) -> Result<Graph> {
    if n_persuadable == 0 {
        return Err(Error::EmptyPath);
    }
    let n = n_persuadable;
    let half = (n as f64 + 1.0) / 2.0;
    let edges: Vec<_> = (0..=n).map(|i| (i, i + 1)).collect();
    Graph::new(n + 2, &edges, &[(0, -half), (n + 1, half)])
}

/// Two cliques of `clique_size` joined by a perfect matching, plus two opposing
/// zealots (-1 and +1) adjacent to every persuadable node and not to each other.
///
/// Nodes `0..k` form clique A and `k..2k` clique B; node `i` in A is matched with
/// `k + i`. Zealots are `2k` (opinion -1) and `2k + 1` (opinion +1).
/// The aligned partition is {A, B}. The unaligned partition puts the first half of
/// each clique in class 1, which gives every node `k/2` neighbors in each class.
pub fn paired_cliques(clique_size: usize, alignment: Alignment) -> Result<CliqueGraph> {
    let k = clique_size;
    if k < 2 || k % 2 != 0 {
        return Err(Error::InvalidCliqueSize(k));
    }
    let mut edges = Vec::new();
    for base in [0, k] {
        for i in 0..k {
            for j in (i + 1)..k {
                edges.push((base + i, base + j));
            }
        }
    }
    for i in 0..k {
        edges.push((i, k + i));
    }
    let (zl, zr) = (2 * k, 2 * k + 1);
    for i in 0..2 * k {
        edges.push((i, zl));
        edges.push((i, zr));
    }
    let graph = Graph::new(2 * k + 2, &edges, &[(zl, -1.0), (zr, 1.0)])?;
    let classes = match alignment {
        Alignment::Aligned => [(0..k).collect(), (k..2 * k).collect()],
        Alignment::Unaligned => {
            let h = k / 2;
            let c1: Vec<usize> = (0..h).chain(k..k + h).collect();
            let c2: Vec<usize> = (h..k).chain(k + h..2 * k).collect();
            [c1, c2]
        }
    };
    Ok(CliqueGraph {
        graph,
        clique_size: k,
        alignment,
        classes,
        zealots: [zl, zr],
    })
}

/// Zachary's Karate Club, 0-based, 78 edges.
pub const KARATE_EDGES: [(usize, usize); 78] = [
    (0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (0, 6), (0, 7), (0, 8), (0, 10), (0, 11),
    (0, 12), (0, 13), (0, 17), (0, 19), (0, 21), (0, 31), (1, 2), (1, 3), (1, 7), (1, 13),
    (1, 17), (1, 19), (1, 21), (1, 30), (2, 3), (2, 7), (2, 8), (2, 9), (2, 13), (2, 27),
    (2, 28), (2, 32), (3, 7), (3, 12), (3, 13), (4, 6), (4, 10), (5, 6), (5, 10), (5, 16),
    (6, 16), (8, 30), (8, 32), (8, 33), (9, 33), (13, 33), (14, 32), (14, 33), (15, 32),
    (15, 33), (18, 32), (18, 33), (19, 33), (20, 32), (20, 33), (22, 32), (22, 33), (23, 25),
    (23, 27), (23, 29), (23, 32), (23, 33), (24, 25), (24, 27), (24, 31), (25, 31), (26, 29),
    (26, 33), (27, 33), (28, 31), (28, 33), (29, 32), (29, 33), (30, 32), (30, 33), (31, 32),
    (31, 33), (32, 33),
];

/// Faction hubs of the Karate Club used as the two opposing zealots.
pub const KARATE_ZEALOTS: [(usize, f64); 2] = [(0, -1.0), (33, 1.0)];

/// The Karate Club with zealots at the instructor (node 0, opinion -1) and the
/// administrator (node 33, opinion +1).
pub fn karate_club() -> Graph {
    Graph::new(34, &KARATE_EDGES, &KARATE_ZEALOTS).expect("static karate data is valid")
}

/// Node ids of [`gateway_example`], named by their letters.
pub mod gateway_nodes {
    pub const A: usize = 0;
    pub const B: usize = 1;
    pub const C: usize = 2;
    pub const D: usize = 3;
    pub const E: usize = 4;
    pub const F: usize = 5;
    pub const G: usize = 6;
    pub const H: usize = 7;
    pub const I: usize = 8;
    pub const Z1: usize = 9;
    pub const Z2: usize = 10;
    pub const Z3: usize = 11;
}

/// Nine persuadable nodes and three zealots arranged in three groups.
///
/// `S1 = {A, B, C}` sits between zealots `Z1` and `Z2`; `S2 = {D, E, F}` hangs off
/// `C` and reaches zealots only through it; `S3 = {G, H, I}` sits between `Z2` and
/// `Z3` and shares no persuadable edge with `S1 ∪ S2`.
pub fn gateway_example() -> Graph {
    use gateway_nodes::*;
    let edges = [
        (Z1, A),
        (A, B),
        (B, C),
        (A, C),
        (C, Z2),
        (C, D),
        (D, E),
        (E, F),
        (D, F),
        (Z2, G),
        (G, H),
        (H, I),
        (G, I),
        (I, Z3),
    ];
    Graph::new(12, &edges, &[(Z1, -1.0), (Z2, 1.0), (Z3, 0.25)]).expect("static example is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_small_path_with_one_zealot() {
        let g = Graph::new(3, &[(0, 1), (1, 2)], &[(0, -1.0)]).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.persuadable(), &[1, 2]);
        assert_eq!(g.zealot_opinion(0), Some(-1.0));
    }

    #[test]
    fn rejects_invalid_input() {
        assert_eq!(Graph::new(3, &[(2, 2)], &[]), Err(Error::SelfEdge(2)));
        assert_eq!(
            Graph::new(3, &[(0, 3)], &[]),
            Err(Error::NodeOutOfRange { node: 3, node_count: 3 })
        );
        assert_eq!(
            Graph::new(3, &[], &[(1, 0.0), (1, 2.0)]),
            Err(Error::DuplicateZealot(1))
        );
        assert!(matches!(
            Graph::new(3, &[], &[(1, f64::NAN)]),
            Err(Error::NonFiniteOpinion { node: 1, .. })
        ));
        assert_eq!(Graph::new(0, &[], &[]), Err(Error::EmptyGraph));
    }

    #[test]
    fn duplicate_edges_collapse() {
        let g = Graph::new(3, &[(0, 1), (1, 0), (0, 1), (1, 2)], &[]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.degree(1), 2);
    }

    #[test]
    fn path_graph_zealots_and_degrees() {
        let g = path_graph(3).unwrap();
        assert_eq!(g.node_count(), 5);
        assert_eq!(g.zealot_opinion(0), Some(-2.0));
        assert_eq!(g.zealot_opinion(4), Some(2.0));
        let g1 = path_graph(1).unwrap();
        assert_eq!(g1.node_count(), 3);
        assert_eq!(g1.zealot_opinion(0), Some(-1.0));
        assert_eq!(g1.zealot_opinion(2), Some(1.0));
        let g10 = path_graph(10).unwrap();
        assert_eq!(g10.node_count(), 12);
        assert_eq!(g10.edges().len(), 11);
        assert!((1..11).all(|i| g10.degree(i) == 2));
        assert_eq!(path_graph(0), Err(Error::EmptyPath));
    }

    fn class_counts(cg: &CliqueGraph, node: usize) -> (usize, usize) {
        let n = cg.graph.neighbors(node);
        let c1 = n.iter().filter(|j| cg.classes[0].contains(j)).count();
        let c2 = n.iter().filter(|j| cg.classes[1].contains(j)).count();
        (c1, c2)
    }

    #[test]
    fn paired_cliques_class_structure() {
        let aligned = paired_cliques(10, Alignment::Aligned).unwrap();
        assert_eq!(aligned.graph.node_count(), 22);
        for &i in &aligned.classes[0] {
            assert_eq!(class_counts(&aligned, i), (9, 1));
        }
        let unaligned = paired_cliques(10, Alignment::Unaligned).unwrap();
        for &i in unaligned.graph.persuadable() {
            assert_eq!(class_counts(&unaligned, i), (5, 5));
        }
        for cg in [&aligned, &unaligned] {
            assert_eq!(cg.classes[0].len(), 10);
            assert_eq!(cg.classes[1].len(), 10);
            assert!(!cg.graph.has_edge(20, 21));
        }
        assert_eq!(
            paired_cliques(3, Alignment::Unaligned).unwrap_err(),
            Error::InvalidCliqueSize(3)
        );
    }

    #[test]
    fn tiny_paired_cliques_is_balanced() {
        let cg = paired_cliques(2, Alignment::Aligned).unwrap();
        assert_eq!(cg.graph.node_count(), 6);
        assert_eq!(cg.graph.is_balanced_exposure(), Ok(true));
    }

    #[test]
    fn balanced_exposure_cases() {
        let cg = paired_cliques(10, Alignment::Aligned).unwrap();
        assert_eq!(cg.graph.is_balanced_exposure(), Ok(true));
        assert_eq!(path_graph(3).unwrap().is_balanced_exposure(), Ok(false));
        let isolated = Graph::new(4, &[(0, 1), (1, 2)], &[(0, -1.0), (2, 1.0)]).unwrap();
        assert_eq!(isolated.is_balanced_exposure(), Ok(true));
        assert_eq!(karate_club().is_balanced_exposure(), Ok(false));
        let one = Graph::new(2, &[(0, 1)], &[(0, 1.0)]).unwrap();
        assert_eq!(one.is_balanced_exposure(), Err(Error::ZealotCount(1)));
    }

    #[test]
    fn persuadable_components_cases() {
        let g = gateway_example();
        let parts = g.persuadable_components();
        assert_eq!(parts.components.len(), 2);
        assert_eq!(parts.components[0], vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(parts.components[1], vec![6, 7, 8]);
        assert_eq!(path_graph(5).unwrap().persuadable_components().components.len(), 1);
        let all_z = Graph::new(2, &[(0, 1)], &[(0, 0.0), (1, 1.0)]).unwrap();
        assert!(all_z.persuadable_components().components.is_empty());
    }

    #[test]
    fn gateway_blocks_on_example_path_and_star() {
        use gateway_nodes::*;
        let blocks = gateway_example().single_gateway_blocks().unwrap();
        assert_eq!(
            blocks,
            vec![GatewayBlock {
                gateway: C,
                block: vec![D, E, F]
            }]
        );
        assert!(path_graph(3).unwrap().single_gateway_blocks().unwrap().is_empty());

        // 5-node star with the zealot at the center: every leaf is its own block.
        let star = Graph::new(5, &[(0, 1), (0, 2), (0, 3), (0, 4)], &[(0, 0.5)]).unwrap();
        let blocks = star.single_gateway_blocks().unwrap();
        let expected: Vec<_> = (1..5)
            .map(|leaf| GatewayBlock {
                gateway: 0,
                block: vec![leaf],
            })
            .collect();
        assert_eq!(blocks, expected);

        let split = Graph::new(3, &[(0, 1)], &[(0, 0.0)]).unwrap();
        assert_eq!(split.single_gateway_blocks(), Err(Error::Disconnected));
    }

    #[test]
    fn nested_blocks_reduce_to_maximal() {
        // zealot 0 - 1 - 2 - 3 (leaf chain): {2,3} via 1 dominates {3} via 2
        let g = Graph::new(4, &[(0, 1), (1, 2), (2, 3)], &[(0, 0.0)]).unwrap();
        let blocks = g.single_gateway_blocks().unwrap();
        assert_eq!(
            blocks,
            vec![GatewayBlock {
                gateway: 0,
                block: vec![1, 2, 3]
            }]
        );
    }

    #[test]
    fn karate_club_shape() {
        let g = karate_club();
        assert_eq!(g.node_count(), 34);
        assert_eq!(g.edges().len(), 78);
        assert_eq!(g.degree(0), 16);
        assert_eq!(g.degree(33), 17);
        assert!(g.is_connected());
    }

    #[test]
    fn attached_zealot_subgraph() {
        let g = gateway_example();
        let (sub, map) = g.with_attached_zealots(&[6, 7, 8]);
        assert_eq!(map, vec![6, 7, 8, 10, 11]);
        assert_eq!(sub.zealots().len(), 2);
        assert_eq!(sub.edges().len(), 5);
    }
}
