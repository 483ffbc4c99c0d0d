//! Alternation of integration phases and structural edits used by the fit
//! loops.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitPhase {
    pub horizon: f64,
    /// Apply the split policy once this phase has been integrated.
    #[serde(default)]
    pub split_after: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSchedule {
    pub phases: Vec<FitPhase>,
    /// Minimum time-averaged `|ỹ_k|` over a phase that triggers a split.
    #[serde(default = "default_split_threshold")]
    pub split_threshold: f64,
    /// Stop once the cost falls below this.
    #[serde(default = "default_cost_tol")]
    pub cost_tol: f64,
}

fn default_split_threshold() -> f64 {
    1e-3
}

fn default_cost_tol() -> f64 {
    1e-12
}

impl FitSchedule {
    /// `splits` split phases followed by one final phase, all of length `horizon`.
    pub fn uniform(splits: usize, horizon: f64) -> Self {
        let mut phases: Vec<FitPhase> = (0..splits)
            .map(|_| FitPhase {
                horizon,
                split_after: true,
            })
            .collect();
        phases.push(FitPhase {
            horizon,
            split_after: false,
        });
        FitSchedule {
            phases,
            split_threshold: default_split_threshold(),
            cost_tol: default_cost_tol(),
        }
    }
}
