//! Run configuration: one JSON file per run, overridden field by field by
//! command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use stablepwl::diagnostics::FlowGrid;
use stablepwl::dynamics::IntegratorConfig;
use stablepwl::{Dataset, FitPhase, FitSchedule, ModelKind};

/// Every recognised key. Keys a command does not use are ignored by it.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub input_dim: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,

    pub time_constant: Option<f64>,
    pub h0: Option<f64>,
    pub h_min: Option<f64>,
    pub backtrack_factor: Option<f64>,
    pub stall_limit: Option<usize>,
    pub stall_step: Option<f64>,

    /// Cap on the total integration time over all phases.
    pub t_end: Option<f64>,
    pub phases: Option<Vec<FitPhase>>,
    pub splits: Option<usize>,
    pub horizon: Option<f64>,
    pub final_horizon: Option<f64>,
    pub split_threshold: Option<f64>,
    pub cost_tol: Option<f64>,
    pub trajectory_stride: Option<usize>,

    /// Initial model JSON.
    pub model: Option<PathBuf>,
    /// Neighbour table text, used with `neurons` and `anchors`.
    pub table: Option<PathBuf>,
    pub neurons: Option<Vec<Vec<f64>>>,
    pub anchors: Option<Vec<Vec<f64>>>,

    pub kinds: Option<Vec<FlowKind>>,
    pub targets: Option<Vec<f64>>,
    pub grid: Option<FlowGrid>,

    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    Relu,
    Switching,
}

impl FlowKind {
    pub fn model_kind(self) -> ModelKind {
        match self {
            FlowKind::Relu => ModelKind::Relu,
            FlowKind::Switching => ModelKind::Pwl1d,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FlowKind::Relu => "relu",
            FlowKind::Switching => "switching",
        }
    }
}

impl RunConfig {
    /// Parse `path`, resolving relative file paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.dataset,
            &mut cfg.out,
            &mut cfg.model,
            &mut cfg.table,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn load_dataset(&self, default_dim: usize) -> Result<Dataset> {
        let path = self
            .dataset
            .as_ref()
            .context("no dataset given (config key `dataset` or --dataset)")?;
        Ok(stablepwl::load_dataset(
            path,
            self.input_dim.unwrap_or(default_dim),
        )?)
    }

    pub fn integrator(&self, dataset: &Dataset) -> Result<IntegratorConfig> {
        let mut c = IntegratorConfig::for_dataset(dataset);
        c.time_constant = self.time_constant.unwrap_or(c.time_constant);
        c.h0 = self.h0.unwrap_or(c.h0);
        c.h_min = self.h_min.unwrap_or(c.h_min);
        c.backtrack_factor = self.backtrack_factor.unwrap_or(c.backtrack_factor);
        c.stall_limit = self.stall_limit.unwrap_or(c.stall_limit);
        c.stall_step = self.stall_step.unwrap_or(c.stall_step);
        c.validate()?;
        Ok(c)
    }

    /// Explicit `phases`, else `splits` split phases of `horizon` and a
    /// final phase of `final_horizon`; then truncated to `t_end` in total.
    pub fn schedule(&self) -> Result<FitSchedule> {
        let horizon = self.horizon.unwrap_or(1000.0);
        let mut schedule = FitSchedule::uniform(self.splits.unwrap_or(0), horizon);
        if let Some(phases) = &self.phases {
            schedule.phases = phases.clone();
        } else if let Some(last) = self.final_horizon {
            schedule
                .phases
                .last_mut()
                .expect("uniform schedule has a final phase")
                .horizon = last;
        }
        schedule.split_threshold = self.split_threshold.unwrap_or(schedule.split_threshold);
        schedule.cost_tol = self.cost_tol.unwrap_or(schedule.cost_tol);
        if schedule
            .phases
            .iter()
            .any(|p| !(p.horizon.is_finite() && p.horizon >= 0.0))
        {
            bail!("phase horizons must be finite and non-negative");
        }
        if !(schedule.split_threshold >= 0.0 && schedule.cost_tol >= 0.0) {
            bail!("split_threshold and cost_tol must be non-negative");
        }
        if let Some(t_end) = self.t_end {
            if !(t_end.is_finite() && t_end >= 0.0) {
                bail!("t_end must be finite and non-negative, got {t_end}");
            }
            let mut left = t_end;
            let mut kept = Vec::new();
            for mut p in schedule.phases {
                if left <= 0.0 {
                    break;
                }
                p.horizon = p.horizon.min(left);
                left -= p.horizon;
                kept.push(p);
            }
            schedule.phases = kept;
        }
        Ok(schedule)
    }

    pub fn stride(&self) -> Result<usize> {
        match self.trajectory_stride {
            Some(0) => bail!("trajectory_stride must be positive"),
            s => Ok(s.unwrap_or(1)),
        }
    }
}
