//! Sliding velocity along switching surfaces.
//!
//! When a free boundary between neurons `a` and `b` sits on measurement `k`
//! and the flow pushes it from both sides, Euler steps chatter across it and
//! no step size descends. The continuous flow instead slides: measurement
//! `k` feeds its gradient to `a` with weight `α_k` and to `b` with weight
//! `1 − α_k`, where the weights are chosen so that `(v_a − v_b)·x_k = 0`
//! and both outputs stay equal at `x_k`. That constraint is linear in the
//! weights, so an Euler step along the sliding velocity stays on the surface.

use super::{rhs_from_evaluation, Evaluation};
use crate::dataset::Dataset;
use crate::learner::Learner;
use crate::linalg::least_squares;

/// Measurement `k` switching from neuron `from` to neuron `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Crossing {
    pub k: usize,
    pub from: usize,
    pub to: usize,
}

pub(crate) struct Slide {
    pub velocity: Vec<Vec<f64>>,
    /// Crossings whose unclamped share lies in `[0, 1]`, i.e. still sliding.
    pub holding: Vec<Crossing>,
}

/// Velocity with the crossing measurements' contributions split so that each
/// crossing surface is preserved to first order. `None` if nothing crosses.
pub(crate) fn sliding_velocity<M: Learner>(
    model: &M,
    dataset: &Dataset,
    eval: &Evaluation,
    crossings: &[Crossing],
    time_constant: f64,
) -> Option<Slide> {
    if crossings.is_empty() {
        return None;
    }
    let mut rest = eval.clone();
    for c in crossings {
        rest.residuals[c.k] = 0.0;
    }
    let base = rhs_from_evaluation(model, dataset, &rest, time_constant);
    let shares: Vec<Vec<f64>> = crossings
        .iter()
        .map(|c| {
            let r = eval.residuals[c.k];
            dataset
                .x_aug(c.k)
                .iter()
                .map(|x| -r * x / time_constant)
                .collect()
        })
        .collect();

    let velocity = |alpha: &[f64]| {
        let mut v = base.clone();
        for ((c, share), &a) in crossings.iter().zip(&shares).zip(alpha) {
            for (j, s) in share.iter().enumerate() {
                v[c.from][j] += a * s;
                v[c.to][j] += (1.0 - a) * s;
            }
        }
        v
    };
    let gaps = |alpha: &[f64]| -> Vec<f64> {
        let v = velocity(alpha);
        crossings
            .iter()
            .map(|c| {
                dataset
                    .x_aug(c.k)
                    .iter()
                    .enumerate()
                    .map(|(j, x)| (v[c.from][j] - v[c.to][j]) * x)
                    .sum()
            })
            .collect()
    };

    // The gaps are affine in α; recover the matrix column by column.
    let m = crossings.len();
    let g0 = gaps(&vec![0.0; m]);
    let mut jac = vec![vec![0.0; m]; m];
    for col in 0..m {
        let mut unit = vec![0.0; m];
        unit[col] = 1.0;
        for (row, g) in gaps(&unit).iter().enumerate() {
            jac[row][col] = g - g0[row];
        }
    }
    let rhs: Vec<f64> = g0.iter().map(|g| -g).collect();
    let raw = least_squares(jac.iter().map(|r| r.as_slice()), &rhs)?;
    let holding = crossings
        .iter()
        .zip(&raw)
        .filter(|(_, a)| (0.0..=1.0).contains(*a))
        .map(|(c, _)| *c)
        .collect();
    let alpha: Vec<f64> = raw.iter().map(|a| a.clamp(0.0, 1.0)).collect();
    Some(Slide {
        velocity: velocity(&alpha),
        holding,
    })
}
