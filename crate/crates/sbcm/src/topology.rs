//! Named graphs for the command line and sweep configs.
//!
//! | reference                    | graph                                       |
//! |------------------------------|---------------------------------------------|
//! | `karate`                     | Karate Club, zealots 0 (-1) and 33 (+1)     |
//! | `path:N`                     | path with N persuadable nodes               |
//! | `cliques:K:aligned`          | paired cliques of size K, aligned classes   |
//! | `cliques:K:unaligned`        | paired cliques of size K, unaligned classes |
//! | `gateway`                    | the three-group gateway example             |
//! | `json:FILE`                  | graph JSON                                  |
//! | `edges:FILE` / `edges:FILE:ZEALOTS` | edge file, optional zealot file      |

use std::path::PathBuf;
use std::str::FromStr;

use sbcm_core::graph::{gateway_example, karate_club, paired_cliques, path_graph, Alignment, CliqueGraph};
use sbcm_core::Graph;

use crate::error::{Error, Result};
use crate::io;

#[derive(Clone, Debug, PartialEq)]
pub enum Topology {
    Karate,
    Path(usize),
    Cliques(usize, Alignment),
    Gateway,
    Json(PathBuf),
    Edges(PathBuf, Option<PathBuf>),
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.splitn(3, ':').collect();
        let number = |t: &str| {
            t.parse::<usize>()
                .map_err(|_| Error::usage(format!("topology {s:?}: {t:?} is not a size")))
        };
        Ok(match parts.as_slice() {
            ["karate"] => Topology::Karate,
            ["gateway"] => Topology::Gateway,
            ["path", n] => Topology::Path(number(n)?),
            ["cliques", k, a] => {
                let al = match *a {
                    "aligned" => Alignment::Aligned,
                    "unaligned" => Alignment::Unaligned,
                    other => return Err(Error::usage(format!("unknown alignment {other:?}"))),
                };
                Topology::Cliques(number(k)?, al)
            }
            ["json", rest @ ..] if !rest.is_empty() => Topology::Json(PathBuf::from(rest.join(":"))),
            ["edges", e] => Topology::Edges(PathBuf::from(e), None),
            ["edges", e, z] => Topology::Edges(PathBuf::from(e), Some(PathBuf::from(z))),
            _ => return Err(Error::usage(format!("unknown topology {s:?}"))),
        })
    }
}

impl Topology {
    pub fn graph(&self) -> Result<Graph> {
        Ok(match self {
            Topology::Karate => karate_club(),
            Topology::Path(n) => path_graph(*n)?,
            Topology::Cliques(k, a) => paired_cliques(*k, *a)?.graph,
            Topology::Gateway => gateway_example(),
            Topology::Json(p) => io::read_graph_json(p)?,
            Topology::Edges(e, z) => io::load_graph(e, z.as_deref())?,
        })
    }

    /// The class metadata needed by the two-class reduction.
    pub fn cliques(&self) -> Result<CliqueGraph> {
        match self {
            Topology::Cliques(k, a) => Ok(paired_cliques(*k, *a)?),
            _ => Err(Error::usage("this experiment needs a cliques:K:aligned|unaligned topology")),
        }
    }

    pub fn path_length(&self) -> Result<usize> {
        match self {
            Topology::Path(n) => Ok(*n),
            _ => Err(Error::usage("this experiment needs a path:N topology")),
        }
    }
}
