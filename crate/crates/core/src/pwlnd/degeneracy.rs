//! Detection of corners shared by more than `N + 1` neurons and of anchors
//! that left their regions. Nothing here repairs the model.

use serde::Serialize;

use super::PwlModelND;
use crate::dataset::augment;
use crate::error::{Error, Result};

/// Corner points closer than this coincide.
pub const CORNER_TOL: f64 = 1e-6;

/// Neurons whose pairwise corners meet in one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverdeterminedCorner {
    pub neurons: Vec<usize>,
    pub point: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DegeneracyReport {
    pub overdetermined: Vec<OverdeterminedCorner>,
    /// Neurons whose anchor violates their own region; the neighbour table
    /// may need an update.
    pub anchor_violations: Vec<usize>,
}

impl DegeneracyReport {
    pub fn is_clean(&self) -> bool {
        self.overdetermined.is_empty() && self.anchor_violations.is_empty()
    }
}

impl PwlModelND {
    /// Corners of every triple in which at least two pairs are adjacent and
    /// whose meeting point lies on all three regions; points shared by more
    /// than three neurons are reported. Two-dimensional inputs only.
    pub fn check_corner_degeneracy(&self) -> Result<DegeneracyReport> {
        if self.input_dim() != 2 {
            return Err(Error::InvalidInput(
                "corner degeneracy is checked for two-dimensional inputs only".into(),
            ));
        }
        let mut corners: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
        let n = self.len();
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    let ids = [a, b, c];
                    let links = [(a, b), (a, c), (b, c)]
                        .iter()
                        .filter(|&&(p, q)| self.are_adjacent(p, q))
                        .count();
                    if links < 2 {
                        continue;
                    }
                    let Ok((point, _)) = self.planes_meet(&ids) else {
                        continue;
                    };
                    if !ids.iter().all(|&i| self.near_region(i, &point)) {
                        continue;
                    }
                    match corners
                        .iter_mut()
                        .find(|(p, _)| dist_inf(p, &point) < CORNER_TOL)
                    {
                        Some((_, members)) => members.extend(ids),
                        None => corners.push((point, ids.to_vec())),
                    }
                }
            }
        }
        let overdetermined = corners
            .into_iter()
            .filter_map(|(point, mut members)| {
                members.sort_unstable();
                members.dedup();
                (members.len() > self.input_dim() + 1).then_some(OverdeterminedCorner {
                    neurons: members,
                    point,
                })
            })
            .collect();
        let anchor_violations = (0..n)
            .filter(|&i| !self.region_contains(i, &self.anchors[i]))
            .collect();
        Ok(DegeneracyReport {
            overdetermined,
            anchor_violations,
        })
    }

    /// Region membership with the corner tolerance instead of the strict one.
    fn near_region(&self, i: usize, x: &[f64]) -> bool {
        let xa = augment(x);
        self.neighbors(i)
            .into_iter()
            .all(|j| self.edge_value(i, j, &xa).is_some_and(|h| h >= -CORNER_TOL))
    }
}

fn dist_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
}
