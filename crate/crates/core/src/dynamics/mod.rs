//! Cost, the gradient learning law, and its discrete-time integration.
//!
//! The continuous law is
//!
//! ```text
//! dŵᵢ/dt = −(1/T) Σ_k ỹ_k (∂ŷ_k/∂ẑ_ik) x_k,     ỹ_k = ŷ_k − y_k
//! ```
//!
//! It is integrated with explicit Euler steps that are halved (by
//! `backtrack_factor`) until the cost does not increase. When no step size
//! descends because a free boundary chatters across a measurement, the
//! sliding velocity along that boundary is tried next. A step that still
//! fails at `h_min` is accepted regardless and tagged `forced` in the log.

mod log;
mod monitor;
mod sliding;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use self::log::{LoggedEvent, Snapshot, StepRecord, TrajectoryLog};
pub use self::monitor::{persistent_error_monitor, PersistentError};
use self::sliding::{sliding_velocity, Crossing};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::learner::{ActiveSet, Learner, ModelEvent, ModelKind};

/// Slack allowed in the descent test.
pub const DESCENT_SLACK: f64 = 1e-12;

/// Residuals, activity pattern and cost of a model on a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub residuals: Vec<f64>,
    pub assignment: Vec<ActiveSet>,
    pub cost: f64,
}

pub fn evaluate<M: Learner>(model: &M, dataset: &Dataset) -> Result<Evaluation> {
    let mut residuals = Vec::with_capacity(dataset.len());
    let mut assignment = Vec::with_capacity(dataset.len());
    for (x, y) in dataset.iter() {
        let a = model.activity(x)?;
        residuals.push(a.prediction - y);
        assignment.push(a.active);
    }
    let cost = cost_of_residuals(&residuals);
    Ok(Evaluation {
        residuals,
        assignment,
        cost,
    })
}

/// `ŷ_k − y_k` for the measurement at 0-based position `idx`.
pub fn residual<M: Learner>(model: &M, dataset: &Dataset, idx: usize) -> Result<f64> {
    Ok(model.predict(dataset.x_aug(idx))? - dataset.y(idx))
}

pub fn cost_of_residuals(residuals: &[f64]) -> f64 {
    0.5 * residuals.iter().map(|r| r * r).sum::<f64>()
}

/// `V = ½ Σ_k ỹ_k²`.
pub fn cost<M: Learner>(model: &M, dataset: &Dataset) -> Result<f64> {
    Ok(evaluate(model, dataset)?.cost)
}

/// Velocity of every neuron's weights under the learning law.
pub fn learning_rhs<M: Learner>(
    model: &M,
    dataset: &Dataset,
    time_constant: f64,
) -> Result<Vec<Vec<f64>>> {
    let eval = evaluate(model, dataset)?;
    Ok(rhs_from_evaluation(model, dataset, &eval, time_constant))
}

pub(crate) fn rhs_from_evaluation<M: Learner>(
    model: &M,
    dataset: &Dataset,
    eval: &Evaluation,
    time_constant: f64,
) -> Vec<Vec<f64>> {
    let mut sums: Vec<Vec<f64>> = model.neurons().iter().map(|n| vec![0.0; n.len()]).collect();
    // Fixed accumulation order over k keeps the result deterministic.
    for (idx, (x, _)) in dataset.iter().enumerate() {
        let r = eval.residuals[idx];
        for &i in eval.assignment[idx].as_slice() {
            for (s, xj) in sums[i].iter_mut().zip(x) {
                *s += r * xj;
            }
        }
    }
    for s in &mut sums {
        for v in s.iter_mut() {
            *v = -*v / time_constant;
        }
    }
    sums
}

/// Simplified single-measurement law in neuron-output coordinates,
/// `żᵢ = −ỹ ∂ŷ/∂ẑᵢ`, used for phase portraits.
///
/// For `Relu`, `ŷ = Σ max(0, zᵢ)` with zero gradient at `zᵢ = 0`. For the
/// local kinds the neurons form a convex kink at the probe input, so
/// `ŷ = max zᵢ`; when several outputs tie for the maximum the unit gradient
/// is shared equally among them.
pub fn z_rhs(z: &[f64], y: f64, kind: ModelKind) -> Vec<f64> {
    let (prediction, grad) = z_gradient(z, kind);
    let ytilde = prediction - y;
    grad.into_iter().map(|g| -ytilde * g).collect()
}

/// `(ŷ, ∂ŷ/∂z)` for the simplified law.
pub fn z_gradient(z: &[f64], kind: ModelKind) -> (f64, Vec<f64>) {
    match kind {
        ModelKind::Relu => {
            let y = z.iter().map(|v| v.max(0.0)).sum();
            let g = z.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
            (y, g)
        }
        ModelKind::Pwl1d | ModelKind::Pwlnd => {
            let top = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let ties = z.iter().filter(|&&v| v == top).count() as f64;
            let g = z
                .iter()
                .map(|&v| if v == top { 1.0 / ties } else { 0.0 })
                .collect();
            (top, g)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Learning time constant `T`.
    pub time_constant: f64,
    pub h0: f64,
    pub h_min: f64,
    pub t_end: f64,
    pub backtrack_factor: f64,
    /// Consecutive stalling steps after which a phase is abandoned.
    #[serde(default = "default_stall_limit")]
    pub stall_limit: usize,
    /// Accepted steps shorter than this count as stalling, as do forced steps.
    #[serde(default = "default_stall_step")]
    pub stall_step: f64,
}

fn default_stall_limit() -> usize {
    64
}

fn default_stall_step() -> f64 {
    1e-6
}

impl IntegratorConfig {
    /// Defaults with `T = K`.
    pub fn for_dataset(dataset: &Dataset) -> Self {
        IntegratorConfig {
            time_constant: dataset.len() as f64,
            h0: 0.05,
            h_min: 1e-10,
            t_end: 100.0,
            backtrack_factor: 0.5,
            stall_limit: default_stall_limit(),
            stall_step: default_stall_step(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if !(self.time_constant > 0.0 && self.time_constant.is_finite()) {
            return bad("time constant T must be positive and finite");
        }
        if !(self.h_min > 0.0 && self.h_min <= self.h0 && self.h0.is_finite()) {
            return bad("step sizes must satisfy 0 < h_min <= h0");
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be non-negative and finite");
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad("backtrack factor must lie in (0, 1)");
        }
        if self.stall_limit == 0 || self.stall_step.is_nan() || self.stall_step < 0.0 {
            return bad("stall limit must be at least 1 and stall step non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub h_used: f64,
    /// Every step is eventually accepted; `forced` marks acceptance at `h_min`
    /// without the descent test passing.
    pub accepted: bool,
    pub forced: bool,
    pub cost_before: f64,
    pub cost_after: f64,
    pub events: Vec<ModelEvent>,
}

/// One backtracking Euler step of size at most `h`.
pub fn step<M: Learner>(
    model: &mut M,
    dataset: &Dataset,
    h: f64,
    config: &IntegratorConfig,
) -> Result<StepOutcome> {
    config.validate()?;
    if h < config.h_min {
        return Err(Error::InvalidInput(format!(
            "step {h} below h_min {}",
            config.h_min
        )));
    }
    let eval = evaluate(model, dataset)?;
    let mut sliding = Vec::new();
    let (next, _, outcome) = advance(
        model,
        &eval,
        dataset,
        h,
        config.h_min,
        config,
        0.0,
        &mut sliding,
    )?;
    *model = next;
    Ok(outcome)
}

/// One accepted step. `sliding` holds the crossings of an active sliding
/// mode and is updated in place.
#[allow(clippy::too_many_arguments)]
fn advance<M: Learner>(
    model: &M,
    eval: &Evaluation,
    dataset: &Dataset,
    h: f64,
    h_min: f64,
    config: &IntegratorConfig,
    time: f64,
    sliding: &mut Vec<Crossing>,
) -> Result<(M, Evaluation, StepOutcome)> {
    let t_const = config.time_constant;
    let local = model.kind().is_local();

    // Stay in an active sliding mode while every share stays admissible.
    if !sliding.is_empty() {
        let slide = sliding_velocity(model, dataset, eval, sliding, t_const);
        match slide {
            Some(slide) if slide.holding.len() == sliding.len() => {
                if let Attempt::Descended(m, e, events, h_used) = backtrack(
                    model,
                    eval,
                    dataset,
                    &slide.velocity,
                    h,
                    h_min,
                    config,
                    time,
                )? {
                    if !events.is_empty() || m.neurons().len() != model.neurons().len() {
                        sliding.clear();
                    }
                    return Ok(accepted(eval, m, e, events, h_used, false));
                }
                sliding.clear();
            }
            _ => sliding.clear(),
        }
    }

    let velocity = rhs_from_evaluation(model, dataset, eval, t_const);
    let (standard, first_crossings) = backtrack_tracking(
        model, eval, dataset, &velocity, h, h_min, config, time, local,
    )?;
    if let Attempt::Descended(m, e, events, h_used) = standard {
        if h_used >= h || first_crossings.is_empty() {
            return Ok(accepted(eval, m, e, events, h_used, false));
        }
        // Backtracked because a boundary crossed a measurement. Sliding
        // along it may allow a longer step.
        if let Some((slide, crossings)) = try_slide(
            model,
            eval,
            dataset,
            &first_crossings,
            h,
            h_min,
            config,
            time,
        )? {
            if slide.3 > h_used {
                *sliding = crossings;
                let (m, e, mut events, h_used) = slide;
                events.push(ModelEvent::Sliding {
                    measurements: sliding.len(),
                });
                return Ok(accepted(eval, m, e, events, h_used, false));
            }
        }
        return Ok(accepted(eval, m, e, events, h_used, false));
    }
    let Attempt::Floor(candidate, cand_eval, mut events, h_used) = standard else {
        unreachable!("descended attempts returned above")
    };

    if let Some((slide, crossings)) = try_slide(
        model,
        eval,
        dataset,
        &first_crossings,
        h,
        h_min,
        config,
        time,
    )? {
        *sliding = crossings;
        let (m, e, mut slide_events, h_used) = slide;
        slide_events.push(ModelEvent::Sliding {
            measurements: sliding.len(),
        });
        return Ok(accepted(eval, m, e, slide_events, h_used, false));
    }

    events.push(ModelEvent::Forced { h: h_used });
    let margin = min_switch_margin(&candidate, dataset)?;
    if margin < 1e-12 {
        events.push(ModelEvent::NearSwitch { margin });
    }
    Ok(accepted(eval, candidate, cand_eval, events, h_used, true))
}

type Candidate<M> = (M, Evaluation, Vec<ModelEvent>, f64);

/// Backtrack along the sliding velocity for `crossings`; returns the
/// accepted candidate and the crossings that keep sliding.
#[allow(clippy::too_many_arguments)]
fn try_slide<M: Learner>(
    model: &M,
    eval: &Evaluation,
    dataset: &Dataset,
    crossings: &[Crossing],
    h: f64,
    h_min: f64,
    config: &IntegratorConfig,
    time: f64,
) -> Result<Option<(Candidate<M>, Vec<Crossing>)>> {
    let Some(slide) = sliding_velocity(model, dataset, eval, crossings, config.time_constant)
    else {
        return Ok(None);
    };
    if slide.holding.is_empty() {
        return Ok(None);
    }
    match backtrack(
        model,
        eval,
        dataset,
        &slide.velocity,
        h,
        h_min,
        config,
        time,
    )? {
        Attempt::Descended(m, e, events, h_used) => {
            let keep = if events.is_empty() && m.neurons().len() == model.neurons().len() {
                slide.holding
            } else {
                Vec::new()
            };
            Ok(Some(((m, e, events, h_used), keep)))
        }
        Attempt::Floor(..) => Ok(None),
    }
}

fn accepted<M>(
    before: &Evaluation,
    model: M,
    eval: Evaluation,
    events: Vec<ModelEvent>,
    h_used: f64,
    forced: bool,
) -> (M, Evaluation, StepOutcome) {
    let outcome = StepOutcome {
        h_used,
        accepted: true,
        forced,
        cost_before: before.cost,
        cost_after: eval.cost,
        events,
    };
    (model, eval, outcome)
}

enum Attempt<M> {
    Descended(M, Evaluation, Vec<ModelEvent>, f64),
    /// Candidate at the smallest step, which did not descend.
    Floor(M, Evaluation, Vec<ModelEvent>, f64),
}

/// Shrink `h` from its initial value until the Euler candidate along
/// `velocity` does not raise the cost, stopping at `h_min`.
#[allow(clippy::too_many_arguments)]
fn backtrack<M: Learner>(
    model: &M,
    eval: &Evaluation,
    dataset: &Dataset,
    velocity: &[Vec<f64>],
    h: f64,
    h_min: f64,
    config: &IntegratorConfig,
    time: f64,
) -> Result<Attempt<M>> {
    let mut h = h;
    loop {
        let at_floor = h <= h_min;
        let mut candidate = model.clone();
        for (n, v) in candidate.neurons_mut().iter_mut().zip(velocity) {
            for (w, dw) in n.weights_mut().iter_mut().zip(v) {
                *w += h * dw;
            }
        }
        if !candidate.weights_finite() {
            return Err(Error::NonFinite {
                time: time + h,
                detail: format!("Euler candidate with h = {h}"),
            });
        }
        let trial = candidate
            .settle(dataset)
            .and_then(|events| Ok((events, evaluate(&candidate, dataset)?)));
        match trial {
            Ok((events, cand_eval)) => {
                if cand_eval.cost <= eval.cost + DESCENT_SLACK {
                    return Ok(Attempt::Descended(candidate, cand_eval, events, h));
                }
                if at_floor {
                    return Ok(Attempt::Floor(candidate, cand_eval, events, h));
                }
            }
            Err(e) if at_floor => return Err(e),
            Err(_) => {}
        }
        h = (h * config.backtrack_factor).max(h_min);
    }
}

/// [`backtrack`] that also reports the crossings of the first rejected
/// candidate whose pattern changed.
#[allow(clippy::too_many_arguments)]
fn backtrack_tracking<M: Learner>(
    model: &M,
    eval: &Evaluation,
    dataset: &Dataset,
    velocity: &[Vec<f64>],
    h: f64,
    h_min: f64,
    config: &IntegratorConfig,
    time: f64,
    track: bool,
) -> Result<(Attempt<M>, Vec<Crossing>)> {
    let mut first = Vec::new();
    let mut h = h;
    loop {
        let attempt = backtrack(model, eval, dataset, velocity, h, h, config, time);
        match attempt {
            Ok(Attempt::Descended(m, e, events, h_used)) => {
                return Ok((Attempt::Descended(m, e, events, h_used), first));
            }
            Ok(Attempt::Floor(m, e, events, h_used)) => {
                if track && first.is_empty() && m.neurons().len() == model.neurons().len() {
                    first = crossings(&eval.assignment, &e.assignment);
                }
                if h <= h_min {
                    return Ok((Attempt::Floor(m, e, events, h_used), first));
                }
            }
            Err(e) if h <= h_min => return Err(e),
            Err(_) => {}
        }
        h = (h * config.backtrack_factor).max(h_min);
    }
}

/// Measurements whose single active neuron changed between two patterns.
fn crossings(before: &[ActiveSet], after: &[ActiveSet]) -> Vec<Crossing> {
    if before.len() != after.len() {
        return Vec::new();
    }
    before
        .iter()
        .zip(after)
        .enumerate()
        .filter_map(|(k, (a, b))| match (a.single(), b.single()) {
            (Some(from), Some(to)) if from != to => Some(Crossing { k, from, to }),
            _ => None,
        })
        .collect()
}

fn min_switch_margin<M: Learner>(model: &M, dataset: &Dataset) -> Result<f64> {
    let mut m = f64::INFINITY;
    for (x, _) in dataset.iter() {
        m = m.min(model.switch_margin(x)?);
    }
    Ok(m)
}

/// Called between accepted steps; may restructure the model.
pub trait StepHook<M> {
    fn after_step(
        &mut self,
        model: &mut M,
        dataset: &Dataset,
        log: &TrajectoryLog,
    ) -> Result<Vec<ModelEvent>>;
}

pub struct NoHooks;

impl<M> StepHook<M> for NoHooks {
    fn after_step(&mut self, _: &mut M, _: &Dataset, _: &TrajectoryLog) -> Result<Vec<ModelEvent>> {
        Ok(Vec::new())
    }
}

impl<M, F> StepHook<M> for F
where
    F: FnMut(&mut M, &Dataset, &TrajectoryLog) -> Result<Vec<ModelEvent>>,
{
    fn after_step(
        &mut self,
        model: &mut M,
        dataset: &Dataset,
        log: &TrajectoryLog,
    ) -> Result<Vec<ModelEvent>> {
        self(model, dataset, log)
    }
}

/// Empty log positioned at `time` with the model's current state.
pub fn start_log<M: Learner>(model: &M, dataset: &Dataset, time: f64) -> Result<TrajectoryLog> {
    let eval = evaluate(model, dataset)?;
    Ok(TrajectoryLog::new(
        Snapshot {
            time,
            cost: eval.cost,
            weights: model.neurons().to_vec(),
            assignment: Arc::new(eval.assignment),
        },
        &eval.residuals,
    ))
}

/// Integrate from `t = 0` to `config.t_end`.
pub fn integrate<M: Learner>(
    mut model: M,
    dataset: &Dataset,
    config: &IntegratorConfig,
    hooks: &mut dyn StepHook<M>,
) -> Result<(M, TrajectoryLog)> {
    config.validate()?;
    let mut log = start_log(&model, dataset, 0.0)?;
    integrate_phase(&mut model, dataset, config, config.t_end, hooks, &mut log)?;
    Ok((model, log))
}

/// Continue integrating for `horizon` time units, appending to `log`.
///
/// Stops early, logging [`ModelEvent::Stalled`], once `stall_limit`
/// consecutive steps were forced or shorter than `stall_step`. This is how
/// chattering across a switching surface ends.
pub fn integrate_phase<M: Learner>(
    model: &mut M,
    dataset: &Dataset,
    config: &IntegratorConfig,
    horizon: f64,
    hooks: &mut dyn StepHook<M>,
    log: &mut TrajectoryLog,
) -> Result<()> {
    config.validate()?;
    let t_stop = log.last_time() + horizon;
    let mut t = log.last_time();
    let mut h_next = config.h0;
    let mut eval = evaluate(model, dataset)?;
    let mut stall_streak = 0usize;
    let mut sliding = Vec::new();
    while t < t_stop {
        let remaining = t_stop - t;
        let h_try = h_next.min(remaining);
        let h_min = config.h_min.min(h_try);
        let (next, next_eval, outcome) =
            advance(model, &eval, dataset, h_try, h_min, config, t, &mut sliding)?;
        t = if outcome.h_used >= remaining {
            t_stop
        } else {
            t + outcome.h_used
        };
        *model = next;

        let previous = log.last_assignment();
        let changed = previous
            .iter()
            .zip(&next_eval.assignment)
            .filter(|(a, b)| a != b)
            .count()
            + previous.len().abs_diff(next_eval.assignment.len());
        let assignment = if changed == 0 {
            Arc::clone(previous)
        } else {
            Arc::new(next_eval.assignment.clone())
        };
        log.push(
            StepRecord {
                step: log.next_step_index(),
                time: t,
                cost: next_eval.cost,
                h_used: outcome.h_used,
                forced: outcome.forced,
                weights: model.neurons().to_vec(),
                assignment,
            },
            &next_eval.residuals,
        );
        if changed > 0 {
            log.push_event(ModelEvent::Transition {
                measurements: changed,
            });
        }
        for e in outcome.events {
            log.push_event(e);
        }
        eval = next_eval;

        let hook_events = hooks.after_step(model, dataset, log)?;
        if !hook_events.is_empty() {
            for e in hook_events {
                log.push_event(e);
            }
            eval = evaluate(model, dataset)?;
            sliding.clear();
        }
        let clipped = outcome.h_used >= remaining;
        if (outcome.forced || outcome.h_used < config.stall_step) && !clipped {
            stall_streak += 1;
            if stall_streak >= config.stall_limit {
                log.push_event(ModelEvent::Stalled { time: t });
                break;
            }
        } else {
            stall_streak = 0;
        }
        h_next = if outcome.forced {
            // A larger step may carry the state across the switching surface.
            config.h0
        } else {
            (2.0 * outcome.h_used).min(config.h0)
        };
    }
    Ok(())
}
