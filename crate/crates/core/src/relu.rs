//! Sum of saturating neurons, `ŷ = Σᵢ max(0, ŵᵢᵀx)`.
//!
//! Kept as a comparison baseline: under the same gradient law its state
//! space contains dead regions in which every gradient vanishes while the
//! residual does not, so learning freezes at a wrong answer.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::dynamics::{evaluate, rhs_from_evaluation};
use crate::error::Result;
use crate::learner::{ActiveSet, Activity, Learner, ModelKind};
use crate::neuron::Neuron;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReluModel {
    pub neurons: Vec<Neuron>,
}

impl ReluModel {
    pub fn new(neurons: Vec<Neuron>) -> Self {
        ReluModel { neurons }
    }

    pub fn outputs(&self, x_aug: &[f64]) -> Vec<f64> {
        self.neurons.iter().map(|n| n.value(x_aug)).collect()
    }

    pub fn predict_relu(&self, x_aug: &[f64]) -> f64 {
        self.neurons.iter().map(|n| n.value(x_aug).max(0.0)).sum()
    }

    /// `∂ŷ/∂ẑᵢ`: 1 where `ẑᵢ > 0`, 0 otherwise (including `ẑᵢ = 0`).
    pub fn grad_relu(&self, x_aug: &[f64]) -> Vec<f64> {
        self.neurons
            .iter()
            .map(|n| if n.value(x_aug) > 0.0 { 1.0 } else { 0.0 })
            .collect()
    }
}

impl Learner for ReluModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Relu
    }

    fn neurons(&self) -> &[Neuron] {
        &self.neurons
    }

    fn neurons_mut(&mut self) -> &mut [Neuron] {
        &mut self.neurons
    }

    fn activity(&self, x_aug: &[f64]) -> Result<Activity> {
        let mut prediction = 0.0;
        let mut active = Vec::new();
        for (i, n) in self.neurons.iter().enumerate() {
            let z = n.value(x_aug);
            if z > 0.0 {
                prediction += z;
                active.push(i);
            }
        }
        Ok(Activity {
            prediction,
            active: ActiveSet::Several(active),
        })
    }

    fn switch_margin(&self, x_aug: &[f64]) -> Result<f64> {
        Ok(self
            .neurons
            .iter()
            .map(|n| n.value(x_aug).abs())
            .fold(f64::INFINITY, f64::min))
    }
}

/// Which saturating neurons are active.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionCode {
    Both,
    Only1,
    Only2,
    None,
    /// Activity flags for `I != 2`.
    Pattern(Vec<bool>),
}

/// Label of the output-space region containing `z` (same `> 0` convention
/// as [`ReluModel::grad_relu`]).
pub fn region_code(z: &[f64]) -> RegionCode {
    match z {
        [a, b] => match (*a > 0.0, *b > 0.0) {
            (true, true) => RegionCode::Both,
            (true, false) => RegionCode::Only1,
            (false, true) => RegionCode::Only2,
            (false, false) => RegionCode::None,
        },
        _ => RegionCode::Pattern(z.iter().map(|v| *v > 0.0).collect()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrozenReport {
    pub frozen: bool,
    pub cost: f64,
    /// Measurements with no active neuron and a nonzero residual.
    pub dead_measurements: Vec<usize>,
}

/// Frozen means the learning velocity is exactly zero while the cost is
/// still above `tolerance`.
pub fn detect_frozen(model: &ReluModel, dataset: &Dataset, tolerance: f64) -> Result<FrozenReport> {
    let eval = evaluate(model, dataset)?;
    let rhs = rhs_from_evaluation(model, dataset, &eval, 1.0);
    let still = rhs.iter().flatten().all(|v| *v == 0.0);
    let dead_measurements = eval
        .assignment
        .iter()
        .zip(&eval.residuals)
        .enumerate()
        .filter(|(_, (a, r))| a.as_slice().is_empty() && **r != 0.0)
        .map(|(k, _)| k)
        .collect();
    Ok(FrozenReport {
        frozen: still && eval.cost > tolerance,
        cost: eval.cost,
        dead_measurements,
    })
}
