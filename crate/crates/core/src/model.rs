//! Any model kind behind one type, with a tagged JSON form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::learner::{Activity, Learner, ModelEvent, ModelKind};
use crate::neuron::Neuron;
use crate::pwl1d::{Pwl1dRecord, PwlModel1D};
use crate::pwlnd::{PwlModelND, PwlNdRecord};
use crate::relu::ReluModel;

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Pwl1d(PwlModel1D),
    Pwlnd(PwlModelND),
    Relu(ReluModel),
}

/// JSON shape of [`Model`], tagged by `model_kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_kind", rename_all = "lowercase")]
pub enum ModelRecord {
    Pwl1d(Pwl1dRecord),
    Pwlnd(PwlNdRecord),
    Relu(ReluModel),
}

impl Model {
    pub fn to_record(&self) -> ModelRecord {
        match self {
            Model::Pwl1d(m) => ModelRecord::Pwl1d(m.to_record()),
            Model::Pwlnd(m) => ModelRecord::Pwlnd(m.to_record()),
            Model::Relu(m) => ModelRecord::Relu(m.clone()),
        }
    }

    pub fn from_record(rec: ModelRecord) -> Result<Self> {
        Ok(match rec {
            ModelRecord::Pwl1d(r) => Model::Pwl1d(PwlModel1D::from_record(r)?),
            ModelRecord::Pwlnd(r) => Model::Pwlnd(PwlModelND::from_record(r)?),
            ModelRecord::Relu(m) => {
                let width = m.neurons.first().map_or(0, Neuron::len);
                if width < 1 || m.neurons.iter().any(|n| n.len() != width || !n.is_finite()) {
                    return Err(Error::InvalidInput(
                        "relu neurons must share a finite width".into(),
                    ));
                }
                Model::Relu(m)
            }
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_record())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_record(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// `N`, the raw input dimension.
    pub fn input_dim(&self) -> usize {
        self.neurons()
            .first()
            .map_or(0, |n| n.len().saturating_sub(1))
    }
}

impl From<PwlModel1D> for Model {
    fn from(m: PwlModel1D) -> Self {
        Model::Pwl1d(m)
    }
}

impl From<PwlModelND> for Model {
    fn from(m: PwlModelND) -> Self {
        Model::Pwlnd(m)
    }
}

impl From<ReluModel> for Model {
    fn from(m: ReluModel) -> Self {
        Model::Relu(m)
    }
}

macro_rules! each {
    ($self:expr, $m:ident => $body:expr) => {
        match $self {
            Model::Pwl1d($m) => $body,
            Model::Pwlnd($m) => $body,
            Model::Relu($m) => $body,
        }
    };
}

impl Learner for Model {
    fn kind(&self) -> ModelKind {
        each!(self, m => m.kind())
    }

    fn neurons(&self) -> &[Neuron] {
        each!(self, m => m.neurons())
    }

    fn neurons_mut(&mut self) -> &mut [Neuron] {
        each!(self, m => m.neurons_mut())
    }

    fn activity(&self, x_aug: &[f64]) -> Result<Activity> {
        each!(self, m => m.activity(x_aug))
    }

    fn switch_margin(&self, x_aug: &[f64]) -> Result<f64> {
        each!(self, m => m.switch_margin(x_aug))
    }

    fn settle(&mut self, dataset: &Dataset) -> Result<Vec<ModelEvent>> {
        each!(self, m => m.settle(dataset))
    }
}
