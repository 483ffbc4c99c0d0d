use serde::Serialize;

use super::PwlModel1D;
use crate::dataset::Dataset;
use crate::dynamics::{
    cost, integrate_phase, persistent_error_monitor, start_log, IntegratorConfig, NoHooks,
    TrajectoryLog,
};
use crate::error::{Error, Result};
use crate::learner::ModelEvent;
use crate::neuron::Neuron;
use crate::schedule::FitSchedule;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseSummary {
    pub phase: usize,
    pub t_end: f64,
    pub cost: f64,
    pub neurons: usize,
    pub corners: Vec<f64>,
    pub pinned_pairs: Vec<usize>,
    pub weights: Vec<Neuron>,
    /// Corner added after this phase.
    pub split_at: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Fit1d {
    pub model: PwlModel1D,
    pub log: TrajectoryLog,
    pub phases: Vec<PhaseSummary>,
}

/// Start from the least-squares line and alternate integration phases with
/// splits at the measurement of largest persistent error.
pub fn fit1d(
    dataset: &Dataset,
    schedule: &FitSchedule,
    config: &IntegratorConfig,
) -> Result<Fit1d> {
    config.validate()?;
    if dataset.input_dim() != 1 {
        return Err(Error::InvalidInput(
            "fit1d needs a one-dimensional dataset".into(),
        ));
    }
    let mut model = PwlModel1D::from_least_squares(dataset)?;
    let mut log = start_log(&model, dataset, 0.0)?;
    let mut phases = Vec::new();

    for (idx, phase) in schedule.phases.iter().enumerate() {
        log.begin_phase(idx);
        integrate_phase(
            &mut model,
            dataset,
            config,
            phase.horizon,
            &mut NoHooks,
            &mut log,
        )?;

        let (pruned, events) = model.prune1d(dataset)?;
        model = pruned;
        events.into_iter().for_each(|e| log.push_event(e));

        let summary_model = model.clone();
        let v = cost(&model, dataset)?;
        let mut split_at = None;
        if phase.split_after && v >= schedule.cost_tol {
            if let Some((i, x)) = choose_split(&model, dataset, &log, schedule.split_threshold)? {
                model = model.split1d(i, x)?;
                log.push_event(ModelEvent::Split {
                    neuron: i,
                    new_neuron: i + 1,
                    at: vec![x],
                });
                split_at = Some(x);
            }
        }
        phases.push(PhaseSummary {
            phase: idx,
            t_end: log.last_time(),
            cost: v,
            neurons: summary_model.len(),
            corners: summary_model.corners()?,
            pinned_pairs: summary_model.pins().keys().copied().collect(),
            weights: summary_model.neurons().to_vec(),
            split_at,
        });
        if v < schedule.cost_tol {
            break;
        }
    }
    Ok(Fit1d { model, log, phases })
}

/// Largest persistent error whose measurement lies strictly inside its
/// neuron's interval with at least one measurement to its right there.
fn choose_split(
    model: &PwlModel1D,
    dataset: &Dataset,
    log: &TrajectoryLog,
    threshold: f64,
) -> Result<Option<(usize, f64)>> {
    for cand in persistent_error_monitor(log, dataset, threshold) {
        let x = cand.x[0];
        let i = model.active_index(x)?;
        let (lo, hi) = model.interval(i)?;
        if !(x > lo && x < hi) {
            continue;
        }
        if dataset.iter().any(|(xa, _)| xa[1] > x && xa[1] <= hi) {
            return Ok(Some((i, x)));
        }
    }
    Ok(None)
}
