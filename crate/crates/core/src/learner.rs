//! The interface every model kind offers to the learning dynamics.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::Result;
use crate::neuron::Neuron;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Pwl1d,
    Pwlnd,
    Relu,
}

impl ModelKind {
    /// Local (switching-linear) models have exactly one active neuron per input.
    pub fn is_local(self) -> bool {
        !matches!(self, ModelKind::Relu)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Pwl1d => "pwl1d",
            ModelKind::Pwlnd => "pwlnd",
            ModelKind::Relu => "relu",
        })
    }
}

/// Neurons with `∂ŷ/∂ẑᵢ = 1` at an input; all others have zero gradient.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActiveSet {
    One(usize),
    Several(Vec<usize>),
}

impl ActiveSet {
    pub fn as_slice(&self) -> &[usize] {
        match self {
            ActiveSet::One(i) => std::slice::from_ref(i),
            ActiveSet::Several(v) => v,
        }
    }

    pub fn contains(&self, neuron: usize) -> bool {
        self.as_slice().contains(&neuron)
    }

    /// The single active neuron of a local model.
    pub fn single(&self) -> Option<usize> {
        match self.as_slice() {
            [i] => Some(*i),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Activity {
    pub prediction: f64,
    pub active: ActiveSet,
}

/// Structural changes a model makes to itself; recorded in trajectory logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelEvent {
    Split {
        neuron: usize,
        new_neuron: usize,
        at: Vec<f64>,
    },
    Prune {
        neuron: usize,
        reason: String,
    },
    Merge {
        kept: usize,
        removed: usize,
    },
    PinReleased {
        left: usize,
        right: usize,
    },
    AnchorRecentered {
        neuron: usize,
    },
    Transition {
        measurements: usize,
    },
    Forced {
        h: f64,
    },
    NearSwitch {
        margin: f64,
    },
    PhaseStart {
        phase: usize,
    },
    /// Step taken along a switching surface shared with `measurements` data.
    Sliding {
        measurements: usize,
    },
    /// Integration abandoned after repeated forced steps.
    Stalled {
        time: f64,
    },
}

pub trait Learner: Clone {
    fn kind(&self) -> ModelKind;

    fn neurons(&self) -> &[Neuron];

    fn neurons_mut(&mut self) -> &mut [Neuron];

    /// Prediction and active neurons at an augmented input.
    fn activity(&self, x_aug: &[f64]) -> Result<Activity>;

    /// Distance-like margin to the nearest activity switch at `x_aug`.
    /// Zero means the input sits on a boundary.
    fn switch_margin(&self, x_aug: &[f64]) -> Result<f64>;

    /// Structural upkeep after the weights moved: pin release, removal of
    /// squeezed regions, anchor repair. Must not change the prediction at
    /// any dataset measurement by more than 1e-9.
    fn settle(&mut self, _dataset: &Dataset) -> Result<Vec<ModelEvent>> {
        Ok(Vec::new())
    }

    fn num_neurons(&self) -> usize {
        self.neurons().len()
    }

    fn predict(&self, x_aug: &[f64]) -> Result<f64> {
        Ok(self.activity(x_aug)?.prediction)
    }

    fn weights_finite(&self) -> bool {
        self.neurons().iter().all(Neuron::is_finite)
    }

    /// All weights, neuron by neuron.
    fn flat_weights(&self) -> Vec<f64> {
        self.neurons()
            .iter()
            .flat_map(|n| n.0.iter().copied())
            .collect()
    }

    fn set_flat_weights(&mut self, flat: &[f64]) {
        let mut it = flat.iter();
        for n in self.neurons_mut() {
            for w in n.weights_mut() {
                *w = *it.next().expect("flat weight vector too short");
            }
        }
        debug_assert!(it.next().is_none());
    }
}
