use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{ActiveSet, ModelEvent};
use crate::neuron::Neuron;

/// One accepted integration step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub cost: f64,
    pub h_used: f64,
    pub forced: bool,
    pub weights: Vec<Neuron>,
    /// Shared with the previous record while the activity pattern is unchanged.
    pub assignment: Arc<Vec<ActiveSet>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedEvent {
    pub step: usize,
    pub time: f64,
    #[serde(flatten)]
    pub event: ModelEvent,
}

/// State the log starts from; not itself an accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub cost: f64,
    pub weights: Vec<Neuron>,
    pub assignment: Arc<Vec<ActiveSet>>,
}

/// Per-step history of a run plus running `∫|ỹ_k| dt` over the current phase.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    start: Snapshot,
    records: Vec<StepRecord>,
    events: Vec<LoggedEvent>,
    phase_start: f64,
    abs_residual_integral: Vec<f64>,
    last_abs_residuals: Vec<f64>,
    last_time: f64,
}

impl TrajectoryLog {
    pub fn new(start: Snapshot, residuals: &[f64]) -> Self {
        let time = start.time;
        TrajectoryLog {
            start,
            records: Vec::new(),
            events: Vec::new(),
            phase_start: time,
            abs_residual_integral: vec![0.0; residuals.len()],
            last_abs_residuals: residuals.iter().map(|r| r.abs()).collect(),
            last_time: time,
        }
    }

    pub fn start(&self) -> &Snapshot {
        &self.start
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn events(&self) -> &[LoggedEvent] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn last_time(&self) -> f64 {
        self.last_time
    }

    pub fn last_cost(&self) -> f64 {
        self.records.last().map_or(self.start.cost, |r| r.cost)
    }

    pub fn last_assignment(&self) -> &Arc<Vec<ActiveSet>> {
        self.records
            .last()
            .map_or(&self.start.assignment, |r| &r.assignment)
    }

    pub fn next_step_index(&self) -> usize {
        self.records.len() + 1
    }

    /// Append an accepted step and advance the residual integral by the
    /// trapezoidal rule.
    pub fn push(&mut self, record: StepRecord, residuals: &[f64]) {
        debug_assert!(record.time > self.last_time);
        debug_assert_eq!(residuals.len(), self.last_abs_residuals.len());
        let dt = record.time - self.last_time;
        for ((acc, prev), r) in self
            .abs_residual_integral
            .iter_mut()
            .zip(self.last_abs_residuals.iter_mut())
            .zip(residuals)
        {
            let cur = r.abs();
            *acc += 0.5 * (*prev + cur) * dt;
            *prev = cur;
        }
        self.last_time = record.time;
        self.records.push(record);
    }

    pub fn push_event(&mut self, event: ModelEvent) {
        self.events.push(LoggedEvent {
            step: self.records.len(),
            time: self.last_time,
            event,
        });
    }

    /// Reset the residual integral; later averages cover only the new phase.
    pub fn begin_phase(&mut self, phase: usize) {
        self.phase_start = self.last_time;
        self.abs_residual_integral.iter_mut().for_each(|a| *a = 0.0);
        self.push_event(ModelEvent::PhaseStart { phase });
    }

    pub fn phase_duration(&self) -> f64 {
        self.last_time - self.phase_start
    }

    /// `∫|ỹ_k| dt / duration` over the current phase, `None` for an empty phase.
    pub fn mean_abs_residuals(&self) -> Option<Vec<f64>> {
        let d = self.phase_duration();
        (d > 0.0).then(|| self.abs_residual_integral.iter().map(|a| a / d).collect())
    }

    /// One row per accepted step (every `stride`-th plus the last). Weights
    /// are `;`-separated neurons of space-separated components; the
    /// assignment lists each measurement's active neurons joined by `|`.
    pub fn write_csv<W: Write>(&self, mut out: W, stride: usize) -> Result<()> {
        let stride = stride.max(1);
        let io = |e| Error::io("trajectory csv", e);
        writeln!(out, "step,time,V,h,forced,neurons,weights,active").map_err(io)?;
        let n = self.records.len();
        for (idx, r) in self.records.iter().enumerate() {
            if idx % stride != 0 && idx + 1 != n {
                continue;
            }
            let weights = r
                .weights
                .iter()
                .map(|w| {
                    w.0.iter()
                        .map(|v| v.to_string())
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect::<Vec<_>>()
                .join(";");
            let active = r
                .assignment
                .iter()
                .map(|a| {
                    a.as_slice()
                        .iter()
                        .map(|i| i.to_string())
                        .collect::<Vec<_>>()
                        .join("|")
                })
                .collect::<Vec<_>>()
                .join(" ");
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.step,
                r.time,
                r.cost,
                r.h_used,
                u8::from(r.forced),
                r.weights.len(),
                weights,
                active
            )
            .map_err(io)?;
        }
        Ok(())
    }

    pub fn events_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.events)?)
    }
}
