use serde::Serialize;

use super::TrajectoryLog;
use crate::dataset::Dataset;

/// A measurement whose time-averaged absolute residual over the last phase
/// exceeded the split threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PersistentError {
    /// Neuron active for the measurement at the end of the phase.
    pub neuron: usize,
    /// 0-based measurement position.
    pub measurement: usize,
    pub x: Vec<f64>,
    pub mean_abs_residual: f64,
}

/// Measurements with `∫|ỹ_k| dt / duration > threshold` over the current
/// phase, largest average first (ties by measurement order).
pub fn persistent_error_monitor(
    log: &TrajectoryLog,
    dataset: &Dataset,
    threshold: f64,
) -> Vec<PersistentError> {
    let Some(means) = log.mean_abs_residuals() else {
        return Vec::new();
    };
    let assignment = log.last_assignment();
    let mut out: Vec<PersistentError> = means
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > threshold)
        .map(|(idx, &m)| PersistentError {
            neuron: assignment[idx].as_slice().first().copied().unwrap_or(0),
            measurement: idx,
            x: dataset.measurements()[idx].x_raw.clone(),
            mean_abs_residual: m,
        })
        .collect();
    out.sort_by(|a, b| {
        b.mean_abs_residual
            .total_cmp(&a.mean_abs_residual)
            .then(a.measurement.cmp(&b.measurement))
    });
    out
}
