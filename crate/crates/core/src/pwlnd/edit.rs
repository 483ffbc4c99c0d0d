use super::{signum, Edge, PwlModelND, RELEASE_TOL, SEPARATION_EPS};
use crate::dataset::{augment, Dataset};
use crate::dynamics::cost;
use crate::error::{Error, Result};
use crate::learner::ModelEvent;

impl PwlModelND {
    /// Duplicate neuron `i` into a new last neuron. The two are separated by
    /// a pinned hyperplane through `x_k`, normal to the direction from `i`'s
    /// anchor to `x_k`; the new neuron lies on the far side and inherits all
    /// of `i`'s neighbours. Predictions are unchanged everywhere.
    ///
    /// When `x_k` coincides with the anchor, the direction toward the
    /// nearest distinct measurement of `dataset` is used instead.
    pub fn split_nd(&self, i: usize, x_k: &[f64], dataset: Option<&Dataset>) -> Result<Self> {
        if i >= self.len() || x_k.len() != self.input_dim() {
            return Err(Error::InvalidInput(format!(
                "cannot split neuron {i} at {x_k:?}"
            )));
        }
        if !self.region_contains(i, x_k) {
            return Err(Error::InvalidInput(format!(
                "{x_k:?} is not in neuron {i}'s region"
            )));
        }
        let anchor = &self.anchors[i];
        let mut d: Vec<f64> = x_k.iter().zip(anchor).map(|(x, a)| x - a).collect();
        let on_anchor = d.iter().all(|v| *v == 0.0);
        if on_anchor {
            let nearest = dataset
                .into_iter()
                .flat_map(|ds| ds.iter())
                .map(|(x, _)| &x[1..])
                .filter(|x| *x != x_k)
                .min_by(|a, b| dist2(a, x_k).total_cmp(&dist2(b, x_k)))
                .ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "split point {x_k:?} is neuron {i}'s anchor and no other measurement gives a direction"
                    ))
                })?;
            d = nearest.iter().zip(x_k).map(|(p, x)| p - x).collect();
        }

        let new_anchor = self
            .inside_along(i, x_k, &d, 1.0)
            .ok_or_else(|| Error::Degeneracy(format!("no room for a new region beyond {x_k:?}")))?;
        let old_anchor = if on_anchor {
            self.inside_along(i, x_k, &d, -1.0)
                .ok_or_else(|| Error::Degeneracy(format!("no room on both sides of {x_k:?}")))?
        } else {
            anchor.clone()
        };

        let new = self.len();
        let mut out = self.clone();
        out.neurons.push(self.neurons[i].clone());
        out.anchors.push(new_anchor);
        out.anchors[i] = old_anchor;
        for j in self.neighbors(i) {
            let e = self.edge_from(j, i).expect("neighbour has an edge");
            out.set_edge_from(j, new, e);
        }
        // h_{i,new}(x) = d·(x_k − x): non-negative on the anchor's side.
        let mut plane = vec![d.iter().zip(x_k).map(|(a, b)| a * b).sum()];
        plane.extend(d.iter().map(|v| -v));
        out.set_edge_from(i, new, Edge::Pinned { plane });
        Ok(out)
    }

    /// `x_k + t·dir·d` for the largest `t` in `{1/2, 1/4, …}` that lies
    /// strictly on the requested side and inside neuron `i`'s region.
    fn inside_along(&self, i: usize, x_k: &[f64], d: &[f64], dir: f64) -> Option<Vec<f64>> {
        let mut t = 0.5;
        for _ in 0..60 {
            let p: Vec<f64> = x_k.iter().zip(d).map(|(x, v)| x + dir * t * v).collect();
            if p != x_k && self.region_contains(i, &p) {
                return Some(p);
            }
            t *= 0.5;
        }
        None
    }

    /// Merge adjacent neurons whose weights differ by less than `eps`, then
    /// remove neurons that own no measurement and whose anchor has left
    /// their region. Each edit is kept only if no prediction at the dataset
    /// moves by `eps` or more.
    pub fn merge_prune_nd(&self, dataset: &Dataset, eps: f64) -> Result<(Self, Vec<ModelEvent>)> {
        let mut m = self.clone();
        let mut events = Vec::new();
        let base = predictions(&m, dataset)?;

        let mut rejected = Vec::new();
        while let Some((i, j)) = m.edges.keys().copied().find(|&(i, j)| {
            !rejected.contains(&(i, j)) && m.neurons[i].max_abs_diff(&m.neurons[j]) < eps
        }) {
            let trial = m.merged(i, j);
            if keeps_predictions(&trial, dataset, &base, eps) {
                m = trial;
                rejected.clear();
                events.push(ModelEvent::Merge {
                    kept: i,
                    removed: j,
                });
            } else {
                rejected.push((i, j));
            }
        }

        let mut skip = Vec::new();
        loop {
            let counts = m.counts(dataset)?;
            let candidate = (0..m.len()).find(|&r| {
                m.len() > 1
                    && counts[r] == 0
                    && !skip.contains(&r)
                    && !m.region_contains(r, &m.anchors[r])
            });
            let Some(r) = candidate else {
                break;
            };
            let trial = m.without(r);
            if trial.validate().is_ok() && keeps_predictions(&trial, dataset, &base, eps) {
                m = trial;
                skip.clear();
                events.push(ModelEvent::Prune {
                    neuron: r,
                    reason: "empty region".into(),
                });
            } else {
                skip.push(r);
            }
        }
        Ok((m, events))
    }

    /// Neuron `j` folded into `i`: union of neighbours, anchor at the
    /// midpoint, free edges re-oriented from the new anchor.
    fn merged(&self, i: usize, j: usize) -> Self {
        let mut m = self.clone();
        m.anchors[i] = self.anchors[i]
            .iter()
            .zip(&self.anchors[j])
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let mut nbrs = self.neighbors(i);
        nbrs.extend(self.neighbors(j));
        nbrs.sort_unstable();
        nbrs.dedup();
        let xa = augment(&m.anchors[i]);
        for k in nbrs.into_iter().filter(|&k| k != i && k != j) {
            let from_i = self.edge_from(i, k);
            let from_j = self.edge_from(j, k);
            let edge = match (&from_i, &from_j) {
                (Some(e @ Edge::Pinned { .. }), _) | (_, Some(e @ Edge::Pinned { .. })) => {
                    e.clone()
                }
                _ => {
                    let s = signum(m.neurons[i].value(&xa) - m.neurons[k].value(&xa));
                    let fallback = from_i.or(from_j).and_then(|e| match e {
                        Edge::Free { sign } => Some(sign),
                        Edge::Pinned { .. } => None,
                    });
                    Edge::Free {
                        sign: if s != 0.0 { s } else { fallback.unwrap_or(1.0) },
                    }
                }
            };
            m.set_edge_from(i, k, edge);
        }
        m.without(j)
    }

    /// Neuron `r` removed. Former neighbours become adjacent where their
    /// anchors orient the new edge consistently.
    fn without(&self, r: usize) -> Self {
        let mut m = self.clone();
        let nbrs = self.neighbors(r);
        for (a, &p) in nbrs.iter().enumerate() {
            for &q in &nbrs[a + 1..] {
                if !m.are_adjacent(p, q) {
                    if let Some(s) = m.anchor_sign(p, q) {
                        m.set_edge_from(p, q, Edge::Free { sign: s });
                    }
                }
            }
        }
        m.neurons.remove(r);
        m.anchors.remove(r);
        let shift = |v: usize| if v > r { v - 1 } else { v };
        m.edges = std::mem::take(&mut m.edges)
            .into_iter()
            .filter(|&((a, b), _)| a != r && b != r)
            .map(|((a, b), e)| ((shift(a), shift(b)), e))
            .collect();
        m
    }

    /// Measurements owned by each neuron.
    pub fn counts(&self, dataset: &Dataset) -> Result<Vec<usize>> {
        let mut counts = vec![0; self.len()];
        for (x, _) in dataset.iter() {
            counts[self.locate_aug(x)?.neuron] += 1;
        }
        Ok(counts)
    }

    /// Upkeep applied to every trial state during learning.
    pub(crate) fn settle_nd(&mut self, dataset: &Dataset) -> Result<Vec<ModelEvent>> {
        let mut events = self.release_pins(dataset, PinRule::KeepPredictions)?;
        events.extend(self.recenter_anchors(dataset)?);
        for (x, _) in dataset.iter() {
            self.locate_aug(x)?;
        }
        Ok(events)
    }

    /// Release pins whose replacement free edge does not raise the cost.
    pub fn release_pins_if_cheaper(&mut self, dataset: &Dataset) -> Result<Vec<ModelEvent>> {
        self.release_pins(dataset, PinRule::NoCostIncrease)
    }

    fn release_pins(&mut self, dataset: &Dataset, rule: PinRule) -> Result<Vec<ModelEvent>> {
        let mut events = Vec::new();
        let pinned: Vec<(usize, usize)> = self
            .edges
            .iter()
            .filter(|(_, e)| matches!(e, Edge::Pinned { .. }))
            .map(|(&k, _)| k)
            .collect();
        if pinned.is_empty() {
            return Ok(events);
        }
        let base = predictions(self, dataset)?;
        for (lo, hi) in pinned {
            if self.neurons[lo].max_abs_diff(&self.neurons[hi]) <= SEPARATION_EPS {
                continue;
            }
            let Some(s) = self.anchor_sign(lo, hi) else {
                continue;
            };
            let mut trial = self.clone();
            trial.edges.insert((lo, hi), Edge::Free { sign: s });
            if !(trial.region_contains(lo, &trial.anchors[lo])
                && trial.region_contains(hi, &trial.anchors[hi]))
            {
                continue;
            }
            let accept = match rule {
                PinRule::KeepPredictions => keeps_predictions(&trial, dataset, &base, RELEASE_TOL),
                PinRule::NoCostIncrease => match (cost(&trial, dataset), cost(self, dataset)) {
                    (Ok(after), Ok(before)) => after <= before,
                    _ => false,
                },
            };
            if accept {
                *self = trial;
                events.push(ModelEvent::PinReleased {
                    left: lo,
                    right: hi,
                });
            }
        }
        Ok(events)
    }

    /// Move every anchor that has left its region to the mean of the
    /// measurements its neuron owns.
    fn recenter_anchors(&mut self, dataset: &Dataset) -> Result<Vec<ModelEvent>> {
        let mut events = Vec::new();
        for i in 0..self.len() {
            if self.region_contains(i, &self.anchors[i]) {
                continue;
            }
            let mut sum = vec![0.0; self.input_dim()];
            let mut count = 0usize;
            for (x, _) in dataset.iter() {
                if self.locate_aug(x)?.neuron == i {
                    for (s, v) in sum.iter_mut().zip(&x[1..]) {
                        *s += v;
                    }
                    count += 1;
                }
            }
            if count == 0 {
                continue;
            }
            let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
            if self.region_contains(i, &mean) {
                self.anchors[i] = mean;
                events.push(ModelEvent::AnchorRecentered { neuron: i });
            }
        }
        Ok(events)
    }
}

#[derive(Debug, Clone, Copy)]
enum PinRule {
    KeepPredictions,
    NoCostIncrease,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

fn predictions(m: &PwlModelND, dataset: &Dataset) -> Result<Vec<f64>> {
    dataset
        .iter()
        .map(|(x, _)| {
            let i = m.locate_aug(x)?.neuron;
            Ok(m.neurons[i].value(x))
        })
        .collect()
}

fn keeps_predictions(m: &PwlModelND, dataset: &Dataset, base: &[f64], eps: f64) -> bool {
    predictions(m, dataset).is_ok_and(|p| {
        p.iter()
            .zip(base)
            .all(|(a, b)| (a - b).abs() < eps || a == b)
    })
}
