use serde::Serialize;

use super::{DegeneracyReport, PwlModelND, SEPARATION_EPS};
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
pub struct NdPhaseSummary {
    pub phase: usize,
    pub t_end: f64,
    pub cost: f64,
    pub neurons: usize,
    pub weights: Vec<Neuron>,
    pub neighbors: Vec<Vec<usize>>,
    /// Absent for inputs other than two-dimensional.
    pub degeneracy: Option<DegeneracyReport>,
    /// Neuron split after this phase and the measurement it was split at.
    pub split: Option<(usize, Vec<f64>)>,
}

#[derive(Debug, Clone)]
pub struct FitNd {
    pub model: PwlModelND,
    pub log: TrajectoryLog,
    pub phases: Vec<NdPhaseSummary>,
}

/// Integrate `initial` (or the least-squares plane) through the schedule.
/// After each phase, duplicates are merged, empty regions removed, pins
/// released where that does not raise the cost, and, for split phases, the
/// neuron owning the largest persistent error is split at that measurement.
pub fn fitnd(
    dataset: &Dataset,
    initial: Option<PwlModelND>,
    schedule: &FitSchedule,
    config: &IntegratorConfig,
) -> Result<FitNd> {
    config.validate()?;
    let mut model = match initial {
        Some(m) if m.input_dim() != dataset.input_dim() => {
            return Err(Error::InvalidInput(format!(
                "model takes {} inputs but the dataset has {}",
                m.input_dim(),
                dataset.input_dim()
            )))
        }
        Some(m) => m,
        None => PwlModelND::from_least_squares(dataset)?,
    };
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

        let (pruned, events) = model.merge_prune_nd(dataset, SEPARATION_EPS)?;
        model = pruned;
        events.into_iter().for_each(|e| log.push_event(e));
        for e in model.release_pins_if_cheaper(dataset)? {
            log.push_event(e);
        }

        let summary_model = model.clone();
        let v = cost(&model, dataset)?;
        let mut split = None;
        if phase.split_after && v >= schedule.cost_tol {
            for cand in persistent_error_monitor(&log, dataset, schedule.split_threshold) {
                let i = model.active_neuron_nd(&cand.x)?;
                if let Ok(next) = model.split_nd(i, &cand.x, Some(dataset)) {
                    log.push_event(ModelEvent::Split {
                        neuron: i,
                        new_neuron: model.len(),
                        at: cand.x.clone(),
                    });
                    model = next;
                    split = Some((i, cand.x));
                    break;
                }
            }
        }
        phases.push(NdPhaseSummary {
            phase: idx,
            t_end: log.last_time(),
            cost: v,
            neurons: summary_model.len(),
            weights: summary_model.neurons().to_vec(),
            neighbors: summary_model.neighbor_table(),
            degeneracy: if summary_model.input_dim() == 2 {
                Some(summary_model.check_corner_degeneracy()?)
            } else {
                None
            },
            split,
        });
        if v < schedule.cost_tol {
            break;
        }
    }
    Ok(FitNd { model, log, phases })
}
