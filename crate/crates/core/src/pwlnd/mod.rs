//! Polyhedral switching-linear neurons over `N`-dimensional inputs.
//!
//! Neuron `i` owns the region where every edge function toward a neighbour
//! is non-negative, `h_ij(x) ≥ 0`. A free edge is the set where both outputs
//! agree, `h_ij = s_ij (ẑᵢ − ẑⱼ)`, oriented by a sign that is shared by both
//! directions so that `h_ji = −h_ij`. A pinned edge is an explicit hyperplane
//! used while the two weight vectors coincide after a split.
//!
//! Every neuron keeps an anchor point inside its region. Anchors orient new
//! edges and seed the walk that finds the active neuron. Geometry upkeep is
//! written for `N = 2`; the learning law itself does not depend on `N`.

mod degeneracy;
mod edit;
mod fit;
mod table;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use self::degeneracy::{DegeneracyReport, OverdeterminedCorner};
pub use self::fit::{fitnd, FitNd, NdPhaseSummary};
pub use self::table::{format_neighbor_table, parse_neighbor_table, EdgeRecord, PwlNdRecord};
use crate::dataset::{augment, Dataset};
use crate::error::{Error, Result};
use crate::learner::{ActiveSet, Activity, Learner, ModelEvent, ModelKind};
use crate::linalg::{least_squares, solve_square};
use crate::neuron::Neuron;

/// Inclusive tolerance of the region inequalities.
pub const REGION_TOL: f64 = 1e-12;
/// Weight vectors closer than this (max norm) count as identical.
pub const SEPARATION_EPS: f64 = 1e-9;
/// Largest prediction change allowed when a pin is released during learning.
pub const RELEASE_TOL: f64 = 1e-9;

/// Boundary between two neighbours, stored for the ordered pair `(lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    /// `h_lo,hi = sign · (ẑ_lo − ẑ_hi)`.
    Free { sign: f64 },
    /// `h_lo,hi = plane · x̃`.
    Pinned { plane: Vec<f64> },
}

/// Result of locating an input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub neuron: usize,
    /// The walk cycled and an exhaustive scan was needed.
    pub exhaustive: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PwlModelND {
    neurons: Vec<Neuron>,
    anchors: Vec<Vec<f64>>,
    edges: BTreeMap<(usize, usize), Edge>,
}

fn key(i: usize, j: usize) -> (usize, usize) {
    (i.min(j), i.max(j))
}

fn signum(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl PwlModelND {
    /// Free edges for every adjacent pair, oriented so that each anchor lies
    /// strictly inside its own region.
    pub fn new(
        neurons: Vec<Neuron>,
        anchors: Vec<Vec<f64>>,
        adjacency: &[Vec<usize>],
    ) -> Result<Self> {
        if adjacency.len() != neurons.len() {
            return Err(Error::InvalidInput(format!(
                "neighbour table has {} rows for {} neurons",
                adjacency.len(),
                neurons.len()
            )));
        }
        let mut m = PwlModelND {
            neurons,
            anchors,
            edges: BTreeMap::new(),
        };
        for (i, row) in adjacency.iter().enumerate() {
            for &j in row {
                if j >= m.neurons.len() || j == i {
                    return Err(Error::InvalidInput(format!(
                        "bad neighbour {j} of neuron {i}"
                    )));
                }
                if !adjacency[j].contains(&i) {
                    return Err(Error::InvalidInput(format!(
                        "neighbour table not symmetric: {j} in row {i} but not the reverse"
                    )));
                }
                if i < j {
                    let s = m.anchor_sign(i, j).ok_or_else(|| {
                        Error::InvalidInput(format!(
                            "anchors of neurons {i} and {j} do not separate their outputs"
                        ))
                    })?;
                    m.edges.insert((i, j), Edge::Free { sign: s });
                }
            }
        }
        m.validate()?;
        Ok(m)
    }

    /// Model with explicitly given edges, keyed by `(lo, hi)`.
    pub fn with_edges(
        neurons: Vec<Neuron>,
        anchors: Vec<Vec<f64>>,
        edges: BTreeMap<(usize, usize), Edge>,
    ) -> Result<Self> {
        let m = PwlModelND {
            neurons,
            anchors,
            edges,
        };
        m.validate()?;
        Ok(m)
    }

    /// One neuron covering everything.
    pub fn single(neuron: Neuron, anchor: Vec<f64>) -> Result<Self> {
        Self::with_edges(vec![neuron], vec![anchor], BTreeMap::new())
    }

    /// Least-squares plane over all data, anchored at the data centroid.
    pub fn from_least_squares(dataset: &Dataset) -> Result<Self> {
        let rows = (0..dataset.len()).map(|k| dataset.x_aug(k));
        let w = least_squares(rows, &dataset.ys())
            .ok_or_else(|| Error::InvalidInput("least-squares fit failed".into()))?;
        let n = dataset.input_dim();
        let mut centroid = vec![0.0; n];
        for (x, _) in dataset.iter() {
            for (c, v) in centroid.iter_mut().zip(&x[1..]) {
                *c += v / dataset.len() as f64;
            }
        }
        Self::single(Neuron(w), centroid)
    }

    fn validate(&self) -> Result<()> {
        let n = self.neurons.len();
        if n == 0 {
            return Err(Error::InvalidInput(
                "a model needs at least one neuron".into(),
            ));
        }
        let width = self.neurons[0].len();
        if width < 2 {
            return Err(Error::InvalidInput(
                "neurons need at least two weights".into(),
            ));
        }
        if let Some(bad) = self
            .neurons
            .iter()
            .position(|w| w.len() != width || !w.is_finite())
        {
            return Err(Error::InvalidInput(format!(
                "neuron {bad} must have {width} finite weights"
            )));
        }
        if self.anchors.len() != n {
            return Err(Error::InvalidInput(format!(
                "{} anchors for {n} neurons",
                self.anchors.len()
            )));
        }
        if let Some(bad) = self
            .anchors
            .iter()
            .position(|a| a.len() + 1 != width || a.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidInput(format!(
                "anchor {bad} has the wrong dimension"
            )));
        }
        for (&(i, j), e) in &self.edges {
            if i >= j || j >= n {
                return Err(Error::InvalidInput(format!("bad edge ({i}, {j})")));
            }
            match e {
                Edge::Free { sign } if *sign != 1.0 && *sign != -1.0 => {
                    return Err(Error::InvalidInput(format!(
                        "edge ({i}, {j}) sign must be ±1"
                    )));
                }
                Edge::Pinned { plane }
                    if plane.len() != width || plane.iter().any(|v| !v.is_finite()) =>
                {
                    return Err(Error::InvalidInput(format!(
                        "edge ({i}, {j}) plane is malformed"
                    )));
                }
                _ => {}
            }
        }
        // Connectivity by flood fill from neuron 0.
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in self.neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if let Some(lost) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidInput(format!(
                "neuron {lost} is not connected"
            )));
        }
        Ok(())
    }

    pub fn neurons(&self) -> &[Neuron] {
        &self.neurons
    }

    pub fn anchors(&self) -> &[Vec<f64>] {
        &self.anchors
    }

    pub fn edges(&self) -> &BTreeMap<(usize, usize), Edge> {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.neurons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neurons.is_empty()
    }

    /// `N`, the raw input dimension.
    pub fn input_dim(&self) -> usize {
        self.neurons[0].len() - 1
    }

    /// Neighbours of `i` in ascending order.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .keys()
            .filter_map(|&(a, b)| {
                if a == i {
                    Some(b)
                } else if b == i {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn neighbor_table(&self) -> Vec<Vec<usize>> {
        (0..self.len()).map(|i| self.neighbors(i)).collect()
    }

    pub fn are_adjacent(&self, i: usize, j: usize) -> bool {
        self.edges.contains_key(&key(i, j))
    }

    /// Orientation sign `s_ij` of a free edge (equal to `s_ji`).
    pub fn sign(&self, i: usize, j: usize) -> Option<f64> {
        match self.edges.get(&key(i, j))? {
            Edge::Free { sign } => Some(*sign),
            Edge::Pinned { .. } => None,
        }
    }

    pub fn is_pinned(&self, i: usize, j: usize) -> bool {
        matches!(self.edges.get(&key(i, j)), Some(Edge::Pinned { .. }))
    }

    /// Edge oriented from `i` toward `j`.
    fn edge_from(&self, i: usize, j: usize) -> Option<Edge> {
        let e = self.edges.get(&key(i, j))?;
        Some(match e {
            Edge::Pinned { plane } if i > j => Edge::Pinned {
                plane: plane.iter().map(|v| -v).collect(),
            },
            other => other.clone(),
        })
    }

    /// Store an edge given oriented from `i` toward `j`.
    fn set_edge_from(&mut self, i: usize, j: usize, edge: Edge) {
        let stored = match edge {
            Edge::Pinned { plane } if i > j => Edge::Pinned {
                plane: plane.iter().map(|v| -v).collect(),
            },
            other => other,
        };
        self.edges.insert(key(i, j), stored);
    }

    /// `h_ij` at an augmented input; `None` when not adjacent.
    pub fn edge_value(&self, i: usize, j: usize, x_aug: &[f64]) -> Option<f64> {
        let e = self.edges.get(&key(i, j))?;
        let h = match e {
            Edge::Free { sign } => {
                sign * (self.neurons[i.min(j)].value(x_aug) - self.neurons[i.max(j)].value(x_aug))
            }
            Edge::Pinned { plane } => plane.iter().zip(x_aug).map(|(p, x)| p * x).sum(),
        };
        Some(if i < j { h } else { -h })
    }

    /// Sign of `ẑᵢ − ẑⱼ` at `i`'s anchor, provided `j`'s anchor sees the
    /// opposite sign.
    fn anchor_sign(&self, i: usize, j: usize) -> Option<f64> {
        let d = |a: &[f64]| {
            let xa = augment(a);
            self.neurons[i].value(&xa) - self.neurons[j].value(&xa)
        };
        let s = signum(d(&self.anchors[i]));
        (s != 0.0 && signum(d(&self.anchors[j])) == -s).then_some(s)
    }

    /// Smallest edge value of `i` at `x_aug` and the neighbour attaining it
    /// (lowest id on ties). `None` for a neuron without neighbours.
    fn worst_edge(&self, i: usize, x_aug: &[f64]) -> Option<(usize, f64)> {
        let mut worst: Option<(usize, f64)> = None;
        for j in self.neighbors(i) {
            let h = self.edge_value(i, j, x_aug).expect("neighbour has an edge");
            if worst.is_none_or(|(_, w)| h < w) {
                worst = Some((j, h));
            }
        }
        worst
    }

    fn contains_aug(&self, i: usize, x_aug: &[f64]) -> bool {
        self.worst_edge(i, x_aug)
            .is_none_or(|(_, h)| h >= -REGION_TOL)
    }

    /// Whether raw input `x` satisfies all of neuron `i`'s edge inequalities.
    pub fn region_contains(&self, i: usize, x: &[f64]) -> bool {
        self.contains_aug(i, &augment(x))
    }

    /// Lowest-id containing neuron by checking every region.
    pub fn locate_exhaustive(&self, x: &[f64]) -> Option<usize> {
        let xa = augment(x);
        (0..self.len()).find(|&i| self.contains_aug(i, &xa))
    }

    /// Walk from the nearest anchor toward the most violated neighbour.
    pub fn locate(&self, x: &[f64]) -> Result<Location> {
        self.locate_aug(&augment(x))
    }

    fn locate_aug(&self, x_aug: &[f64]) -> Result<Location> {
        let x = &x_aug[1..];
        let dist = |a: &[f64]| a.iter().zip(x).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
        let mut i = (0..self.len())
            .min_by(|&a, &b| dist(&self.anchors[a]).total_cmp(&dist(&self.anchors[b])))
            .expect("at least one neuron");
        let mut visited = vec![false; self.len()];
        loop {
            visited[i] = true;
            match self.worst_edge(i, x_aug) {
                Some((j, h)) if h < -REGION_TOL => {
                    if visited[j] {
                        break;
                    }
                    i = j;
                }
                _ => {
                    return Ok(Location {
                        neuron: self.lowest_tied(i, x_aug),
                        exhaustive: false,
                    })
                }
            }
        }
        match (0..self.len()).find(|&i| self.contains_aug(i, x_aug)) {
            Some(neuron) => Ok(Location {
                neuron,
                exhaustive: true,
            }),
            None => Err(Error::Degeneracy(format!("no region contains {x:?}"))),
        }
    }

    /// On a shared boundary the lowest containing id wins.
    fn lowest_tied(&self, i: usize, x_aug: &[f64]) -> usize {
        self.neighbors(i)
            .into_iter()
            .filter(|&j| j < i)
            .find(|&j| {
                self.edge_value(i, j, x_aug)
                    .is_some_and(|h| h.abs() <= REGION_TOL)
                    && self.contains_aug(j, x_aug)
            })
            .unwrap_or(i)
    }

    pub fn active_neuron_nd(&self, x: &[f64]) -> Result<usize> {
        Ok(self.locate(x)?.neuron)
    }

    pub fn predict_nd(&self, x: &[f64]) -> Result<f64> {
        let xa = augment(x);
        let i = self.locate_aug(&xa)?.neuron;
        Ok(self.neurons[i].value(&xa))
    }

    /// Point where the `N + 1` mutually adjacent neurons `ids` agree, and
    /// their common output there.
    pub fn corner_nd(&self, ids: &[usize]) -> Result<(Vec<f64>, f64)> {
        if ids.len() != self.input_dim() + 1 {
            return Err(Error::InvalidInput(format!(
                "a corner needs {} neurons, got {}",
                self.input_dim() + 1,
                ids.len()
            )));
        }
        for (a, &i) in ids.iter().enumerate() {
            if i >= self.len() {
                return Err(Error::InvalidInput(format!("no neuron {i}")));
            }
            for &j in &ids[a + 1..] {
                if !self.are_adjacent(i, j) {
                    return Err(Error::InvalidInput(format!(
                        "neurons {i} and {j} are not adjacent"
                    )));
                }
            }
        }
        self.planes_meet(ids)
    }

    /// Intersection of the given neurons' planes, adjacency not required.
    pub(crate) fn planes_meet(&self, ids: &[usize]) -> Result<(Vec<f64>, f64)> {
        let n = self.input_dim();
        let first = &self.neurons[ids[0]].0;
        let mut a = nalgebra::DMatrix::zeros(n, n);
        let mut b = nalgebra::DVector::zeros(n);
        for (row, &m) in ids[1..].iter().enumerate() {
            let other = &self.neurons[m].0;
            for col in 0..n {
                a[(row, col)] = first[col + 1] - other[col + 1];
            }
            b[row] = other[0] - first[0];
        }
        let x = solve_square(a, b).ok_or_else(|| Error::SingularCorner { ids: ids.to_vec() })?;
        let x: Vec<f64> = x.iter().copied().collect();
        let value = self.neurons[ids[0]].value(&augment(&x));
        Ok((x, value))
    }
}

impl Learner for PwlModelND {
    fn kind(&self) -> ModelKind {
        ModelKind::Pwlnd
    }

    fn neurons(&self) -> &[Neuron] {
        &self.neurons
    }

    fn neurons_mut(&mut self) -> &mut [Neuron] {
        &mut self.neurons
    }

    fn activity(&self, x_aug: &[f64]) -> Result<Activity> {
        let i = self.locate_aug(x_aug)?.neuron;
        Ok(Activity {
            prediction: self.neurons[i].value(x_aug),
            active: ActiveSet::One(i),
        })
    }

    fn switch_margin(&self, x_aug: &[f64]) -> Result<f64> {
        let i = self.locate_aug(x_aug)?.neuron;
        Ok(self
            .neighbors(i)
            .into_iter()
            .filter_map(|j| self.edge_value(i, j, x_aug))
            .map(f64::abs)
            .fold(f64::INFINITY, f64::min))
    }

    fn settle(&mut self, dataset: &Dataset) -> Result<Vec<ModelEvent>> {
        self.settle_nd(dataset)
    }
}
