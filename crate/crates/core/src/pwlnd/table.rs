//! Neighbour tables as text and the JSON shape of an `N`-dimensional model.
//!
//! The text format has one row per neuron: the neuron id followed by its
//! neighbour ids, separated by whitespace, commas or `&`, e.g.
//! `i1 i2 i5 i4`. Ids are 1-based and the `i` prefix is optional. Blank
//! lines and lines starting with `#` are ignored.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Edge, PwlModelND};
use crate::error::{Error, Result};
use crate::neuron::Neuron;

/// 0-based adjacency lists from the text format. Every neuron must appear
/// in exactly one row and the table must be symmetric.
pub fn parse_neighbor_table(text: &str) -> Result<Vec<Vec<usize>>> {
    let mut rows: BTreeMap<usize, (usize, Vec<usize>)> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let ids = line
            .split(|c: char| c.is_whitespace() || c == ',' || c == '&')
            .filter(|tok| !tok.is_empty())
            .map(|tok| parse_id(tok, line_no))
            .collect::<Result<Vec<usize>>>()?;
        let (&own, nbrs) = ids.split_first().expect("non-empty line");
        if rows.insert(own, (line_no, nbrs.to_vec())).is_some() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("neuron i{} listed twice", own + 1),
            });
        }
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty neighbour table".into()));
    }
    let mut table = vec![Vec::new(); n];
    for (&own, (line, nbrs)) in &rows {
        if own >= n {
            return Err(Error::Parse {
                line: *line,
                message: format!("neuron i{} but only {n} rows", own + 1),
            });
        }
        for &j in nbrs {
            let back = rows.get(&j).is_some_and(|(_, r)| r.contains(&own));
            if j == own || !back {
                return Err(Error::Parse {
                    line: *line,
                    message: format!("i{} lists i{} but not the reverse", own + 1, j + 1),
                });
            }
        }
        let mut sorted = nbrs.clone();
        sorted.sort_unstable();
        sorted.dedup();
        table[own] = sorted;
    }
    Ok(table)
}

fn parse_id(tok: &str, line: usize) -> Result<usize> {
    let digits = tok.strip_prefix(['i', 'I']).unwrap_or(tok);
    match digits.parse::<usize>() {
        Ok(id) if id >= 1 => Ok(id - 1),
        _ => Err(Error::Parse {
            line,
            message: format!("bad neuron id {tok:?}"),
        }),
    }
}

/// Text form of a 0-based table, one `i<id> i<nbr> …` row per neuron.
pub fn format_neighbor_table(table: &[Vec<usize>]) -> String {
    let mut out = String::new();
    for (i, row) in table.iter().enumerate() {
        out.push_str(&format!("i{}", i + 1));
        for j in row {
            out.push_str(&format!(" i{}", j + 1));
        }
        out.push('\n');
    }
    out
}

/// One boundary; exactly one of `sign` and `pinned_plane` is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    /// 0-based ids, lower first.
    pub pair: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign: Option<f64>,
    /// Coefficients of `h_lo,hi` over the augmented input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pinned_plane: Option<Vec<f64>>,
}

/// JSON shape of an `N`-dimensional model. `neighbors` is derived from
/// `edges` and ignored on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PwlNdRecord {
    pub neurons: Vec<Neuron>,
    pub anchors: Vec<Vec<f64>>,
    #[serde(default)]
    pub neighbors: Vec<Vec<usize>>,
    pub edges: Vec<EdgeRecord>,
}

impl PwlModelND {
    pub fn to_record(&self) -> PwlNdRecord {
        PwlNdRecord {
            neurons: self.neurons.clone(),
            anchors: self.anchors.clone(),
            neighbors: self.neighbor_table(),
            edges: self
                .edges
                .iter()
                .map(|(&(lo, hi), e)| match e {
                    Edge::Free { sign } => EdgeRecord {
                        pair: [lo, hi],
                        sign: Some(*sign),
                        pinned_plane: None,
                    },
                    Edge::Pinned { plane } => EdgeRecord {
                        pair: [lo, hi],
                        sign: None,
                        pinned_plane: Some(plane.clone()),
                    },
                })
                .collect(),
        }
    }

    pub fn from_record(rec: PwlNdRecord) -> Result<Self> {
        let mut edges = BTreeMap::new();
        for e in rec.edges {
            let [lo, hi] = e.pair;
            let edge = match (e.sign, e.pinned_plane) {
                (Some(sign), None) => Edge::Free { sign },
                (None, Some(plane)) => Edge::Pinned { plane },
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "edge ({lo}, {hi}) needs exactly one of sign and pinned_plane"
                    )))
                }
            };
            if edges.insert((lo, hi), edge).is_some() {
                return Err(Error::InvalidInput(format!(
                    "edge ({lo}, {hi}) listed twice"
                )));
            }
        }
        Self::with_edges(rec.neurons, rec.anchors, edges)
    }
}
