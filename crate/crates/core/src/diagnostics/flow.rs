//! Phase portraits of two neurons fed a single measurement, sampled in the
//! neuron-output coordinates `(ẑ₁, ẑ₂)`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::{z_gradient, z_rhs};
use crate::error::{Error, Result};
use crate::learner::ModelKind;

/// Box `[lo, hi]` in `(ẑ₁, ẑ₂)` sampled at `resolution` points per axis,
/// end points included. An axis with one point samples its midpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowGrid {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub resolution: [usize; 2],
}

impl FlowGrid {
    pub fn square(lo: f64, hi: f64, resolution: usize) -> Self {
        FlowGrid {
            lo: [lo, lo],
            hi: [hi, hi],
            resolution: [resolution, resolution],
        }
    }

    fn coordinate(&self, axis: usize, idx: usize) -> f64 {
        let n = self.resolution[axis];
        let (lo, hi) = (self.lo[axis], self.hi[axis]);
        if n == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * idx as f64 / (n - 1) as f64
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = self.lo.iter().chain(&self.hi).all(|v| v.is_finite());
        if !finite || self.lo[0] > self.hi[0] || self.lo[1] > self.hi[1] {
            return Err(Error::InvalidInput(format!(
                "bad flow box {:?}..{:?}",
                self.lo, self.hi
            )));
        }
        if self.resolution.contains(&0) {
            return Err(Error::InvalidInput(
                "flow grid resolution must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowLabel {
    Positive,
    Negative,
    Zero,
    /// On `ẑ₁ = ẑ₂` of a switching pair with `ỹ < 0`, where the flow pushes
    /// the two outputs apart.
    Excluded,
}

impl FlowLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            FlowLabel::Positive => "positive",
            FlowLabel::Negative => "negative",
            FlowLabel::Zero => "zero",
            FlowLabel::Excluded => "excluded",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowFieldSample {
    pub z1: f64,
    pub z2: f64,
    pub vz1: f64,
    pub vz2: f64,
    pub ytilde: f64,
    pub label: FlowLabel,
}

/// Samples ordered with `ẑ₂` as the outer and `ẑ₁` as the inner index.
pub fn flow_field(kind: ModelKind, y: f64, grid: &FlowGrid) -> Result<Vec<FlowFieldSample>> {
    grid.validate()?;
    if !y.is_finite() {
        return Err(Error::InvalidInput(format!(
            "target must be finite, got {y}"
        )));
    }
    let mut out = Vec::with_capacity(grid.resolution[0] * grid.resolution[1]);
    for b in 0..grid.resolution[1] {
        for a in 0..grid.resolution[0] {
            let z = [grid.coordinate(0, a), grid.coordinate(1, b)];
            let (prediction, _) = z_gradient(&z, kind);
            let v = z_rhs(&z, y, kind);
            // Adding zero turns −0 into 0 in the exported values.
            let ytilde = prediction - y + 0.0;
            let label = if kind.is_local() && z[0] == z[1] && ytilde < 0.0 {
                FlowLabel::Excluded
            } else if ytilde > 0.0 {
                FlowLabel::Positive
            } else if ytilde < 0.0 {
                FlowLabel::Negative
            } else {
                FlowLabel::Zero
            };
            out.push(FlowFieldSample {
                z1: z[0],
                z2: z[1],
                vz1: v[0] + 0.0,
                vz2: v[1] + 0.0,
                ytilde,
                label,
            });
        }
    }
    Ok(out)
}

/// CSV with columns `z1,z2,vz1,vz2,ytilde,label`.
pub fn write_flow_csv<W: Write>(samples: &[FlowFieldSample], mut out: W) -> Result<()> {
    let io = |e| Error::io("flow field csv", e);
    writeln!(out, "z1,z2,vz1,vz2,ytilde,label").map_err(io)?;
    for s in samples {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            s.z1,
            s.z2,
            s.vz1,
            s.vz2,
            s.ytilde,
            s.label.as_str()
        )
        .map_err(io)?;
    }
    Ok(())
}
