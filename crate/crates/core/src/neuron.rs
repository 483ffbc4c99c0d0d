use serde::{Deserialize, Serialize};

/// Affine neuron `ẑ = ŵᵀx` over an offset-augmented input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Neuron(pub Vec<f64>);

impl Neuron {
    pub fn new(weights: Vec<f64>) -> Self {
        Neuron(weights)
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    /// Length of the augmented input this neuron expects (`N + 1`).
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `ŵᵀx`, summed in index order.
    pub fn value(&self, x_aug: &[f64]) -> f64 {
        debug_assert_eq!(x_aug.len(), self.0.len());
        self.0.iter().zip(x_aug).map(|(w, x)| w * x).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|w| w.is_finite())
    }

    /// Largest componentwise difference.
    pub fn max_abs_diff(&self, other: &Neuron) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl From<Vec<f64>> for Neuron {
    fn from(w: Vec<f64>) -> Self {
        Neuron(w)
    }
}
