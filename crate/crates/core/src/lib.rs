//! Stable learning of piecewise-linear functions with local linear neurons.
//!
//! Each neuron is an affine map `ẑᵢ = ŵᵢᵀx` over the offset-augmented input
//! `x = (1, x₁, …, x_N)` and is active on its own region only, so the
//! prediction is the output of the single active neuron rather than a sum.
//! Weights follow the gradient law `dŵᵢ/dt = −(1/T) Σ_k ỹ_k (∂ŷ_k/∂ẑᵢ) x_k`,
//! whose Jacobian is negative semi-definite inside every region. Neurons are
//! split where the residual persists and pruned where they become redundant.
//!
//! [`relu`] provides the saturating baseline with its frozen dead regions;
//! [`diagnostics`] checks the contraction structure numerically.

pub mod dataset;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod learner;
mod linalg;
pub mod model;
pub mod neuron;
pub mod pwl1d;
pub mod pwlnd;
pub mod relu;
pub mod schedule;

pub use dataset::{augment, load_dataset, Dataset, Measurement};
pub use error::{Error, Result};
pub use learner::{ActiveSet, Activity, Learner, ModelEvent, ModelKind};
pub use model::{Model, ModelRecord};
pub use neuron::Neuron;
pub use pwl1d::PwlModel1D;
pub use pwlnd::PwlModelND;
pub use relu::ReluModel;
pub use schedule::{FitPhase, FitSchedule};
