//! One-dimensional switching-linear neurons.
//!
//! Neurons are ordered left to right. Neuron `i` is active on
//! `[c_{i-1}, c_i]` where `c_i` is the corner between neurons `i` and `i+1`,
//! the solution of `ẑᵢ = ẑᵢ₊₁`. Pairs are indexed from 0: pair `p` sits
//! between neurons `p` and `p + 1`. An input exactly on a corner belongs to
//! the lower neuron.
//!
//! A split duplicates a neuron, so the new pair has no intersection. Such a
//! pair carries a pinned corner until releasing the pin would not move any
//! measurement to the other neuron (or only moves measurements at which the
//! two lines already agree).

mod fit;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use self::fit::{fit1d, Fit1d, PhaseSummary};
use crate::dataset::Dataset;
use crate::dynamics::cost;
use crate::error::{Error, Result};
use crate::learner::{ActiveSet, Activity, Learner, ModelEvent, ModelKind};
use crate::linalg::least_squares;
use crate::neuron::Neuron;

/// Slopes closer than this have no usable intersection.
pub const PARALLEL_EPS: f64 = 1e-9;
/// Adjacent neurons whose weights all differ by less than this are merged.
pub const MERGE_EPS: f64 = 1e-9;
/// Largest prediction jump allowed for a measurement that changes neuron
/// when a pin is released.
pub const RELEASE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PwlModel1D {
    neurons: Vec<Neuron>,
    pins: BTreeMap<usize, f64>,
}

impl PwlModel1D {
    pub fn new(neurons: Vec<Neuron>) -> Result<Self> {
        Self::with_pins(neurons, BTreeMap::new())
    }

    pub fn with_pins(neurons: Vec<Neuron>, pins: BTreeMap<usize, f64>) -> Result<Self> {
        if neurons.is_empty() {
            return Err(Error::InvalidInput(
                "a model needs at least one neuron".into(),
            ));
        }
        if let Some(bad) = neurons.iter().position(|n| n.len() != 2 || !n.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "neuron {bad} must have two finite weights"
            )));
        }
        if let Some((&p, _)) = pins
            .iter()
            .find(|(&p, x)| p + 1 >= neurons.len() || !x.is_finite())
        {
            return Err(Error::InvalidInput(format!("invalid pin on pair {p}")));
        }
        Ok(PwlModel1D { neurons, pins })
    }

    pub fn line(intercept: f64, slope: f64) -> Self {
        PwlModel1D {
            neurons: vec![Neuron(vec![intercept, slope])],
            pins: BTreeMap::new(),
        }
    }

    /// Single neuron holding the ordinary least-squares line of the data.
    pub fn from_least_squares(dataset: &Dataset) -> Result<Self> {
        if dataset.input_dim() != 1 {
            return Err(Error::InvalidInput("dataset is not one-dimensional".into()));
        }
        let rows = (0..dataset.len()).map(|k| dataset.x_aug(k));
        let w = least_squares(rows, &dataset.ys())
            .ok_or_else(|| Error::InvalidInput("least-squares fit failed".into()))?;
        Ok(Self::line(w[0], w[1]))
    }

    pub fn neurons(&self) -> &[Neuron] {
        &self.neurons
    }

    pub fn pins(&self) -> &BTreeMap<usize, f64> {
        &self.pins
    }

    pub fn len(&self) -> usize {
        self.neurons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neurons.is_empty()
    }

    pub fn pin(&mut self, pair: usize, x: f64) -> Result<()> {
        if pair + 1 >= self.neurons.len() || !x.is_finite() {
            return Err(Error::InvalidInput(format!("invalid pin on pair {pair}")));
        }
        self.pins.insert(pair, x);
        Ok(())
    }

    fn check_pair(&self, pair: usize) -> Result<()> {
        if pair + 1 >= self.neurons.len() {
            return Err(Error::InvalidInput(format!(
                "pair {pair} out of range for {} neurons",
                self.neurons.len()
            )));
        }
        Ok(())
    }

    /// Intersection of the two lines of `pair`, ignoring any pin.
    pub fn analytic_corner(&self, pair: usize) -> Result<f64> {
        self.check_pair(pair)?;
        let (a, b) = (&self.neurons[pair].0, &self.neurons[pair + 1].0);
        let dslope = b[1] - a[1];
        if dslope.abs() < PARALLEL_EPS {
            return Err(Error::DegenerateParallel {
                left: pair,
                right: pair + 1,
            });
        }
        Ok((a[0] - b[0]) / dslope)
    }

    /// Corner of `pair`: the pinned position if pinned, else the intersection.
    pub fn corner(&self, pair: usize) -> Result<f64> {
        self.check_pair(pair)?;
        match self.pins.get(&pair) {
            Some(&x) => Ok(x),
            None => self.analytic_corner(pair),
        }
    }

    /// All corners in pair order, without checking their ordering.
    pub fn corners(&self) -> Result<Vec<f64>> {
        (0..self.neurons.len() - 1)
            .map(|p| self.corner(p))
            .collect()
    }

    /// All corners, required to be strictly increasing.
    pub fn ordered_corners(&self) -> Result<Vec<f64>> {
        let cs = self.corners()?;
        if let Some(p) = cs.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InconsistentCorners {
                pair: p,
                next: p + 1,
            });
        }
        Ok(cs)
    }

    pub fn is_consistent(&self) -> bool {
        self.ordered_corners().is_ok()
    }

    /// `[lower, upper]` bounds of neuron `i`'s interval (infinite at the ends).
    pub fn interval(&self, i: usize) -> Result<(f64, f64)> {
        if i >= self.neurons.len() {
            return Err(Error::InvalidInput(format!("no neuron {i}")));
        }
        let cs = self.ordered_corners()?;
        let lo = if i == 0 { f64::NEG_INFINITY } else { cs[i - 1] };
        let hi = cs.get(i).copied().unwrap_or(f64::INFINITY);
        Ok((lo, hi))
    }

    /// Neuron active at `x`; ties at a corner go to the lower index.
    pub fn active_index(&self, x: f64) -> Result<usize> {
        let cs = self.ordered_corners()?;
        Ok(cs.partition_point(|&c| c < x))
    }

    pub fn predict1d(&self, x: f64) -> Result<f64> {
        let i = self.active_index(x)?;
        Ok(self.neurons[i].value(&[1.0, x]))
    }

    /// Replace neuron `i` by two copies meeting at a pinned corner `x_s`.
    /// The represented function is unchanged.
    pub fn split1d(&self, i: usize, x_s: f64) -> Result<Self> {
        let (lo, hi) = self.interval(i)?;
        if !(x_s > lo && x_s < hi) {
            return Err(Error::InvalidInput(format!(
                "split point {x_s} is not inside neuron {i}'s interval [{lo}, {hi}]"
            )));
        }
        let mut out = self.clone();
        out.neurons.insert(i + 1, self.neurons[i].clone());
        out.pins = self
            .pins
            .iter()
            .map(|(&p, &x)| (if p >= i { p + 1 } else { p }, x))
            .collect();
        out.pins.insert(i, x_s);
        Ok(out)
    }

    /// Remove neuron `i`. The pair that forms between its neighbours is
    /// pinned at `new_pin` when given.
    fn remove_neuron(&mut self, i: usize, new_pin: Option<f64>) {
        let n = self.neurons.len();
        self.neurons.remove(i);
        let mut pins = BTreeMap::new();
        for (&p, &x) in &self.pins {
            if p + 1 < i {
                pins.insert(p, x);
            } else if p > i {
                pins.insert(p - 1, x);
            }
        }
        if let Some(x) = new_pin {
            if i > 0 && i + 1 < n {
                pins.insert(i - 1, x);
            }
        }
        self.pins = pins;
    }

    /// Drop neurons whose interval collapsed because the corners on either
    /// side crossed.
    fn remove_squeezed(&mut self) -> Result<Vec<ModelEvent>> {
        let mut events = Vec::new();
        while self.neurons.len() >= 3 {
            let cs = self.corners()?;
            let Some(p) = cs.windows(2).position(|w| w[1] <= w[0]) else {
                break;
            };
            let squeezed = p + 1;
            let (a, b) = (&self.neurons[p].0, &self.neurons[p + 2].0);
            let pin = ((b[1] - a[1]).abs() < PARALLEL_EPS).then(|| 0.5 * (cs[p] + cs[p + 1]));
            self.remove_neuron(squeezed, pin);
            events.push(ModelEvent::Prune {
                neuron: squeezed,
                reason: "squeezed".into(),
            });
        }
        Ok(events)
    }

    /// An unpinned parallel pair has its corner at infinity, so one of the
    /// two covers no data. Drop whichever removal costs less.
    fn remove_parallel(&mut self, dataset: &Dataset) -> Vec<ModelEvent> {
        let mut events = Vec::new();
        while let Some(p) = (0..self.neurons.len().saturating_sub(1)).find(|&p| {
            !self.pins.contains_key(&p)
                && (self.neurons[p].0[1] - self.neurons[p + 1].0[1]).abs() < PARALLEL_EPS
        }) {
            let best = [p + 1, p]
                .into_iter()
                .map(|i| {
                    let mut m = self.clone();
                    m.remove_neuron(i, None);
                    let v = cost(&m, dataset).unwrap_or(f64::INFINITY);
                    (v, i, m)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .expect("two candidates");
            *self = best.2;
            events.push(ModelEvent::Prune {
                neuron: best.1,
                reason: "parallel".into(),
            });
        }
        events
    }

    /// Release every pin whose analytic replacement keeps the corner order
    /// and leaves the dataset's predictions unchanged to `RELEASE_TOL`.
    fn release_pins(&mut self, dataset: &Dataset) -> Vec<ModelEvent> {
        let mut events = Vec::new();
        let pinned: Vec<(usize, f64)> = self.pins.iter().map(|(&p, &x)| (p, x)).collect();
        for (p, xp) in pinned {
            let Ok(c) = self.analytic_corner(p) else {
                continue;
            };
            let lower = if p == 0 {
                Ok(f64::NEG_INFINITY)
            } else {
                self.corner(p - 1)
            };
            let upper = if p + 2 >= self.neurons.len() {
                Ok(f64::INFINITY)
            } else {
                self.corner(p + 1)
            };
            let (Ok(lower), Ok(upper)) = (lower, upper) else {
                continue;
            };
            if !(lower < c && c < upper && lower < xp && xp < upper) {
                continue;
            }
            let (a, b) = (&self.neurons[p], &self.neurons[p + 1]);
            let preserves = dataset.iter().all(|(x, _)| {
                let u = x[1];
                if u <= lower || u > upper {
                    return true;
                }
                (u <= xp) == (u <= c) || (a.value(x) - b.value(x)).abs() <= RELEASE_TOL
            });
            if preserves {
                self.pins.remove(&p);
                events.push(ModelEvent::PinReleased {
                    left: p,
                    right: p + 1,
                });
            }
        }
        events
    }

    /// Remove neurons with no measurement in their interval and merge
    /// neighbours with (numerically) identical weights. Predictions at the
    /// dataset's measurements are preserved.
    pub fn prune1d(&self, dataset: &Dataset) -> Result<(Self, Vec<ModelEvent>)> {
        let mut m = self.clone();
        let mut events = m.remove_squeezed()?;

        while m.neurons.len() > 1 {
            let mut counts = vec![0usize; m.neurons.len()];
            for (x, _) in dataset.iter() {
                counts[m.active_index(x[1])?] += 1;
            }
            let Some(empty) = counts.iter().position(|&c| c == 0) else {
                break;
            };
            let pin = if empty == 0 || empty + 1 == m.neurons.len() {
                None
            } else {
                let (lo, hi) = m.interval(empty)?;
                Some(0.5 * (lo + hi))
            };
            m.remove_neuron(empty, pin);
            events.push(ModelEvent::Prune {
                neuron: empty,
                reason: "no measurements".into(),
            });
        }

        while let Some(p) = (0..m.neurons.len().saturating_sub(1))
            .find(|&p| m.neurons[p].max_abs_diff(&m.neurons[p + 1]) < MERGE_EPS)
        {
            let inherited = m.pins.get(&(p + 1)).copied();
            m.remove_neuron(p + 1, inherited);
            events.push(ModelEvent::Merge {
                kept: p,
                removed: p + 1,
            });
        }

        events.extend(m.release_pins(dataset));
        Ok((m, events))
    }

    pub fn to_record(&self) -> Pwl1dRecord {
        Pwl1dRecord {
            neurons: self.neurons.clone(),
            pinned_corners: self
                .pins
                .iter()
                .map(|(&pair, &x)| PinnedCorner { pair, x })
                .collect(),
            derived: Some(DerivedCorners {
                corners: self.corners().ok(),
                consistent: self.is_consistent(),
            }),
        }
    }

    pub fn from_record(rec: Pwl1dRecord) -> Result<Self> {
        let pins = rec.pinned_corners.iter().map(|p| (p.pair, p.x)).collect();
        Self::with_pins(rec.neurons, pins)
    }
}

impl Learner for PwlModel1D {
    fn kind(&self) -> ModelKind {
        ModelKind::Pwl1d
    }

    fn neurons(&self) -> &[Neuron] {
        &self.neurons
    }

    fn neurons_mut(&mut self) -> &mut [Neuron] {
        &mut self.neurons
    }

    fn activity(&self, x_aug: &[f64]) -> Result<Activity> {
        let i = self.active_index(x_aug[1])?;
        Ok(Activity {
            prediction: self.neurons[i].value(x_aug),
            active: ActiveSet::One(i),
        })
    }

    fn switch_margin(&self, x_aug: &[f64]) -> Result<f64> {
        Ok(self
            .ordered_corners()?
            .iter()
            .map(|c| (x_aug[1] - c).abs())
            .fold(f64::INFINITY, f64::min))
    }

    fn settle(&mut self, dataset: &Dataset) -> Result<Vec<ModelEvent>> {
        let mut events = self.remove_parallel(dataset);
        events.extend(self.remove_squeezed()?);
        events.extend(self.release_pins(dataset));
        self.ordered_corners()?;
        Ok(events)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinnedCorner {
    pub pair: usize,
    pub x: f64,
}

/// Values recomputed from the weights; ignored on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedCorners {
    pub corners: Option<Vec<f64>>,
    pub consistent: bool,
}

/// JSON shape of a 1D model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pwl1dRecord {
    pub neurons: Vec<Neuron>,
    #[serde(default)]
    pub pinned_corners: Vec<PinnedCorner>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived: Option<DerivedCorners>,
}

#[cfg(test)]
mod tests;
