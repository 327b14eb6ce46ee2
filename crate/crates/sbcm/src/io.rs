//! Edge files, zealot files and graph JSON.
//!
//! Edge file: one `i j` pair per line. Zealot file: one `i opinion` pair per line.
//! Both are whitespace separated and allow `#` comments and blank lines. Graph JSON is
//! `{"n": 4, "edges": [[0, 1], ...], "zealots": {"0": -1.0}}`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use sbcm_core::Graph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_pairs<T: std::str::FromStr>(text: &str, path: &Path) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: k + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(bad(format!("expected two fields, found {}", fields.len())));
        }
        let a = fields[0]
            .parse::<usize>()
            .map_err(|_| bad(format!("bad node id {:?}", fields[0])))?;
        let b = fields[1]
            .parse::<T>()
            .map_err(|_| bad(format!("bad value {:?}", fields[1])))?;
        out.push((a, b));
    }
    Ok(out)
}

pub fn parse_edges(text: &str, path: &Path) -> Result<Vec<(usize, usize)>> {
    parse_pairs(text, path)
}

pub fn parse_zealots(text: &str, path: &Path) -> Result<Vec<(usize, f64)>> {
    parse_pairs(text, path)
}

/// Builds a graph from an edge file and an optional zealot file.
///
/// The node count is one more than the largest id mentioned in either file.
pub fn load_graph(edge_file: &Path, zealot_file: Option<&Path>) -> Result<Graph> {
    let edges = parse_edges(&read(edge_file)?, edge_file)?;
    let zealots = match zealot_file {
        Some(p) => parse_zealots(&read(p)?, p)?,
        None => Vec::new(),
    };
    let n = edges
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .chain(zealots.iter().map(|z| z.0))
        .max()
        .map_or(0, |m| m + 1);
    Ok(Graph::new(n, &edges, &zealots)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    pub zealots: BTreeMap<String, f64>,
}

impl GraphJson {
    pub fn from_graph(g: &Graph) -> Self {
        GraphJson {
            n: g.node_count(),
            edges: g.edges().iter().map(|&(a, b)| [a, b]).collect(),
            zealots: g.zealots().iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    pub fn to_graph(&self) -> Result<Graph> {
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        let zealots = self
            .zealots
            .iter()
            .map(|(k, &v)| {
                k.parse::<usize>()
                    .map(|id| (id, v))
                    .map_err(|_| Error::usage(format!("zealot key {k:?} is not a node id")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Graph::new(self.n, &edges, &zealots)?)
    }
}

pub fn read_graph_json(path: &Path) -> Result<Graph> {
    let parsed: GraphJson = serde_json::from_str(&read(path)?)?;
    parsed.to_graph()
}

pub fn write_graph_json(path: &Path, g: &Graph) -> Result<()> {
    let text = serde_json::to_string_pretty(&GraphJson::from_graph(g))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
