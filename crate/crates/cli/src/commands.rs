//! The four subcommands. Each one computes every output in memory and only
//! then creates the output directory, so a rejected run leaves no files.

use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use stablepwl::diagnostics::{
    fd_gradient_check, flow_field, gradient_comparison, jacobian_blocks_check,
    observability_matrix, write_flow_csv, FlowGrid, GradientCheck, GradientComparison,
    JacobianReport, ObservabilityReport,
};
use stablepwl::dynamics::{cost, TrajectoryLog};
use stablepwl::pwl1d::fit1d;
use stablepwl::pwlnd::{fitnd, format_neighbor_table, parse_neighbor_table, DegeneracyReport};
use stablepwl::{Learner, Model, Neuron, PwlModel1D, PwlModelND};

use crate::config::{FlowKind, RunConfig};

/// Named file contents, written in order.
pub struct Outputs(Vec<(String, Vec<u8>)>);

impl Outputs {
    fn new() -> Self {
        Outputs(Vec::new())
    }

    fn text(&mut self, name: &str, text: String) {
        self.0.push((name.to_string(), text.into_bytes()));
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.text(name, text);
        Ok(())
    }

    fn trajectory(&mut self, log: &TrajectoryLog, stride: usize) -> Result<()> {
        let mut buf = Vec::new();
        log.write_csv(&mut buf, stride)?;
        self.0.push(("trajectory.csv".into(), buf));
        let mut events = log.events_json()?;
        events.push('\n');
        self.text("events.json", events);
        Ok(())
    }

    pub fn write(self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (name, bytes) in self.0 {
            let path = dir.join(&name);
            std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct FitSummary {
    cost: f64,
    neurons: usize,
    t_end: f64,
    steps: usize,
    phases: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    corners: Option<Vec<f64>>,
}

pub fn fit1d_cmd(cfg: &RunConfig) -> Result<(Outputs, String)> {
    let dataset = cfg.load_dataset(1)?;
    if dataset.input_dim() != 1 {
        bail!("fit1d needs a one-dimensional dataset");
    }
    let integrator = cfg.integrator(&dataset)?;
    let schedule = cfg.schedule()?;
    let stride = cfg.stride()?;

    let fit = fit1d(&dataset, &schedule, &integrator)?;
    let summary = FitSummary {
        cost: cost(&fit.model, &dataset)?,
        neurons: fit.model.len(),
        t_end: fit.log.last_time(),
        steps: fit.log.len(),
        phases: fit.phases.len(),
        corners: Some(fit.model.corners()?),
    };
    let line = format!(
        "fit1d: V = {:.6e}, {} neurons, t = {}",
        summary.cost, summary.neurons, summary.t_end
    );

    let mut out = Outputs::new();
    out.text("model.json", Model::Pwl1d(fit.model).to_json()? + "\n");
    out.trajectory(&fit.log, stride)?;
    out.json("phases.json", &fit.phases)?;
    out.json("summary.json", &summary)?;
    Ok((out, line))
}

/// The starting model: a model file, or a neighbour table with weights and
/// anchors from the config, or the least-squares plane when neither is given.
fn initial_nd(cfg: &RunConfig) -> Result<Option<PwlModelND>> {
    match (&cfg.model, &cfg.table) {
        (Some(_), Some(_)) => bail!("give either an initial model or a neighbour table, not both"),
        (Some(path), None) => match Model::load(path)? {
            Model::Pwlnd(m) => Ok(Some(m)),
            other => bail!(
                "{} holds a {} model, expected pwlnd",
                path.display(),
                other.kind()
            ),
        },
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let table =
                parse_neighbor_table(&text).with_context(|| format!("in {}", path.display()))?;
            let (Some(neurons), Some(anchors)) = (&cfg.neurons, &cfg.anchors) else {
                bail!("a neighbour table needs `neurons` and `anchors` in the config");
            };
            let neurons = neurons.iter().cloned().map(Neuron).collect();
            Ok(Some(PwlModelND::new(neurons, anchors.clone(), &table)?))
        }
        (None, None) => {
            if cfg.neurons.is_some() || cfg.anchors.is_some() {
                bail!("`neurons` and `anchors` need a neighbour table");
            }
            Ok(None)
        }
    }
}

pub fn fitnd_cmd(cfg: &RunConfig) -> Result<(Outputs, String)> {
    let dataset = cfg.load_dataset(2)?;
    let integrator = cfg.integrator(&dataset)?;
    let schedule = cfg.schedule()?;
    let stride = cfg.stride()?;
    let initial = initial_nd(cfg)?;

    let fit = fitnd(&dataset, initial, &schedule, &integrator)?;
    let degeneracy: Option<DegeneracyReport> = if dataset.input_dim() == 2 {
        Some(fit.model.check_corner_degeneracy()?)
    } else {
        None
    };
    let summary = FitSummary {
        cost: cost(&fit.model, &dataset)?,
        neurons: fit.model.len(),
        t_end: fit.log.last_time(),
        steps: fit.log.len(),
        phases: fit.phases.len(),
        corners: None,
    };
    let mut line = format!(
        "fitnd: V = {:.6e}, {} neurons, t = {}",
        summary.cost, summary.neurons, summary.t_end
    );
    if let Some(report) = &degeneracy {
        if !report.is_clean() {
            line.push_str(&format!(
                ", {} overdetermined corners, {} anchor violations",
                report.overdetermined.len(),
                report.anchor_violations.len()
            ));
        }
    }

    let mut out = Outputs::new();
    let table: Vec<Vec<usize>> = (0..fit.model.len())
        .map(|i| fit.model.neighbors(i))
        .collect();
    out.text("neighbors.txt", format_neighbor_table(&table));
    out.text("model.json", Model::Pwlnd(fit.model).to_json()? + "\n");
    out.trajectory(&fit.log, stride)?;
    out.json("phases.json", &fit.phases)?;
    out.json("summary.json", &summary)?;
    if let Some(report) = &degeneracy {
        out.json("degeneracy.json", report)?;
    }
    Ok((out, line))
}

#[derive(Serialize)]
struct FlowIndexEntry {
    kind: &'static str,
    target: f64,
    file: String,
}

pub fn flow_cmd(cfg: &RunConfig) -> Result<(Outputs, String)> {
    let kinds = cfg
        .kinds
        .clone()
        .unwrap_or_else(|| vec![FlowKind::Relu, FlowKind::Switching]);
    let targets = cfg.targets.clone().unwrap_or_else(|| vec![1.0, -1.0]);
    let grid = cfg
        .grid
        .clone()
        .unwrap_or_else(|| FlowGrid::square(-2.0, 2.0, 21));
    if kinds.is_empty() || targets.is_empty() {
        bail!("flow needs at least one kind and one target");
    }

    let mut out = Outputs::new();
    let mut index = Vec::new();
    for &kind in &kinds {
        for &y in &targets {
            let samples = flow_field(kind.model_kind(), y, &grid)?;
            let file = format!("flow_{}_y{}.csv", kind.name(), y);
            let mut buf = Vec::new();
            write_flow_csv(&samples, &mut buf)?;
            out.0.push((file.clone(), buf));
            index.push(FlowIndexEntry {
                kind: kind.name(),
                target: y,
                file,
            });
        }
    }
    out.json("flow_index.json", &index)?;
    let line = format!(
        "flow: {} fields of {}x{} samples",
        index.len(),
        grid.resolution[0],
        grid.resolution[1]
    );
    Ok((out, line))
}

#[derive(Serialize)]
struct GradientReport {
    seed: u64,
    /// At the given model, absent when it sits too close to a switch.
    at_model: Option<GradientComparison>,
    /// Over random perturbations of the given model.
    random: GradientCheck,
}

pub fn diag_cmd(cfg: &RunConfig) -> Result<(Outputs, String)> {
    let given = cfg.model.as_ref().map(Model::load).transpose()?;
    let dataset = cfg.load_dataset(given.as_ref().map_or(1, Model::input_dim))?;
    let model = match given {
        Some(m) => m,
        None if dataset.input_dim() == 1 => Model::Pwl1d(PwlModel1D::from_least_squares(&dataset)?),
        None => Model::Pwlnd(PwlModelND::from_least_squares(&dataset)?),
    };
    if model.input_dim() != dataset.input_dim() {
        bail!(
            "model takes {} inputs but the dataset has {}",
            model.input_dim(),
            dataset.input_dim()
        );
    }
    let t = cfg.time_constant.unwrap_or(dataset.len() as f64);
    if !(t > 0.0 && t.is_finite()) {
        bail!("time_constant must be positive, got {t}");
    }
    let seed = cfg.seed.unwrap_or(0);
    let trials = cfg.trials.unwrap_or(100);

    let observability: ObservabilityReport = observability_matrix(&model, &dataset)?.report();
    let jacobian: JacobianReport = jacobian_blocks_check(&model, &dataset, t)?;
    let at_model = gradient_comparison(&model, &dataset, t)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random = fd_gradient_check(trials, || loop {
        let mut probe = model.clone();
        let w: Vec<f64> = probe
            .flat_weights()
            .iter()
            .map(|v| v + rng.gen_range(-0.1..0.1))
            .collect();
        probe.set_flat_weights(&w);
        if cost(&probe, &dataset).is_ok() {
            return Ok((probe, dataset.clone(), t));
        }
    })?;
    let gradient = GradientReport {
        seed,
        at_model,
        random,
    };

    let line = format!(
        "diag: rank {} of {}, jacobian {}, gradient max rel error {:.3e}",
        observability.rank,
        observability.eigenvalues.len(),
        match (&jacobian.skipped, jacobian.passed) {
            (Some(reason), _) => format!("skipped ({reason})"),
            (None, true) => "passed".into(),
            (None, false) => "FAILED".into(),
        },
        gradient.random.max_rel_error
    );
    let mut out = Outputs::new();
    out.json("observability.json", &observability)?;
    out.json("jacobian.json", &jacobian)?;
    out.json("gradient.json", &gradient)?;
    Ok((out, line))
}
