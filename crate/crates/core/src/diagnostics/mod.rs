//! Numerical checks of the contraction structure of the learning law.
//!
//! Inside a fixed activity pattern the law is linear in the weights with
//! Jacobian `−(1/T) M`, where `M = Σ_k (∂ŷ_k/∂ẑ)(∂ŷ_k/∂ẑ)ᵀ ⊗ x_k x_kᵀ` is
//! the observability matrix. `M` is positive semi-definite, so the flow
//! contracts along its range and leaves its null-space untouched. The
//! helpers here assemble `M`, compare it with finite differences of the law
//! and of the cost, and sample phase portraits of the two-neuron case.

mod flow;
mod random;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

pub use self::flow::{flow_field, write_flow_csv, FlowFieldSample, FlowGrid, FlowLabel};
pub use self::random::{max_adjacency, random_dataset, random_model, voronoi_model};
use crate::dataset::Dataset;
use crate::dynamics::{evaluate, learning_rhs, TrajectoryLog};
use crate::error::{Error, Result};
use crate::learner::Learner;

/// Relative eigenvalue threshold below which a direction counts as null.
pub const RANK_TOL: f64 = 1e-8;
/// Inputs closer than this to an activity switch make a state unusable for
/// finite differences.
pub const BOUNDARY_MARGIN: f64 = 1e-6;
/// Step of the central differences of the cost.
pub const FD_STEP: f64 = 1e-6;

/// `M` as a dense `I(N+1)` square matrix, neuron-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservabilityMatrix {
    pub neurons: usize,
    pub block: usize,
    pub matrix: DMatrix<f64>,
}

impl ObservabilityMatrix {
    /// Block `(i, j)` of size `(N+1) × (N+1)`.
    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        self.matrix
            .view((i * self.block, j * self.block), (self.block, self.block))
            .into_owned()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn max_asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    /// Largest entry outside the diagonal blocks.
    pub fn max_off_diagonal_block(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.neurons {
            for j in (0..self.neurons).filter(|&j| j != i) {
                worst = worst.max(self.block(i, j).amax());
            }
        }
        worst
    }

    pub fn report(&self) -> ObservabilityReport {
        let (rank, null_basis) = rank_nullspace(&self.matrix, RANK_TOL);
        ObservabilityReport {
            neurons: self.neurons,
            block_size: self.block,
            blocks: (0..self.neurons)
                .map(|i| (0..self.neurons).map(|j| rows(&self.block(i, j))).collect())
                .collect(),
            eigenvalues: self.eigenvalues(),
            rank,
            null_basis,
        }
    }
}

/// JSON form of an observability matrix and its spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservabilityReport {
    pub neurons: usize,
    pub block_size: usize,
    /// `blocks[i][j]` is the `(i, j)` block as rows.
    pub blocks: Vec<Vec<Vec<Vec<f64>>>>,
    pub eigenvalues: Vec<f64>,
    pub rank: usize,
    pub null_basis: Vec<Vec<f64>>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| m.row(r).iter().copied().collect())
        .collect()
}

/// Assemble `Σ_k (∂ŷ_k/∂ẑᵢ)(∂ŷ_k/∂ẑⱼ) x_k x_kᵀ` into block `(i, j)`. Every
/// active neuron has unit gradient, so each measurement adds `x_k x_kᵀ` to
/// the blocks of all pairs of its active neurons.
pub fn observability_matrix<M: Learner>(
    model: &M,
    dataset: &Dataset,
) -> Result<ObservabilityMatrix> {
    let neurons = model.num_neurons();
    let block = dataset.input_dim() + 1;
    let mut matrix = DMatrix::zeros(neurons * block, neurons * block);
    for (x, _) in dataset.iter() {
        let active = model.activity(x)?.active;
        for &i in active.as_slice() {
            for &j in active.as_slice() {
                for (a, xa) in x.iter().enumerate() {
                    for (b, xb) in x.iter().enumerate() {
                        matrix[(i * block + a, j * block + b)] += xa * xb;
                    }
                }
            }
        }
    }
    Ok(ObservabilityMatrix {
        neurons,
        block,
        matrix,
    })
}

/// Rank with threshold `tol · λ_max` and an orthonormal basis of the
/// eigenvectors below it, ordered by eigenvalue. Each basis vector has its
/// largest-magnitude entry positive.
pub fn rank_nullspace(m: &DMatrix<f64>, tol: f64) -> (usize, Vec<Vec<f64>>) {
    let eig = SymmetricEigen::new(m.clone());
    let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let cut = tol * lmax;
    let mut null: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut rank = 0;
    for (idx, &l) in eig.eigenvalues.iter().enumerate() {
        if lmax > 0.0 && l > cut {
            rank += 1;
        } else {
            let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
            let lead = v
                .iter()
                .copied()
                .fold(0.0, |a: f64, b| if b.abs() > a.abs() { b } else { a });
            if lead < 0.0 {
                v.iter_mut().for_each(|c| *c = -*c);
            }
            null.push((l, v));
        }
    }
    null.sort_by(|a, b| a.0.total_cmp(&b.0));
    (rank, null.into_iter().map(|(_, v)| v).collect())
}

/// Largest change, over the logged states, of the flat weight vector
/// projected onto the null-space of `m`. Zero when `m` has full rank.
pub fn nullspace_drift(log: &TrajectoryLog, m: &ObservabilityMatrix) -> f64 {
    let (_, basis) = rank_nullspace(&m.matrix, RANK_TOL);
    if basis.is_empty() {
        return 0.0;
    }
    let flat = |w: &[crate::neuron::Neuron]| -> Vec<f64> {
        w.iter().flat_map(|n| n.0.iter().copied()).collect()
    };
    let project = |w: &[f64]| -> Vec<f64> {
        basis
            .iter()
            .map(|v| v.iter().zip(w).map(|(a, b)| a * b).sum())
            .collect()
    };
    let start = project(&flat(&log.start().weights));
    log.records()
        .iter()
        .filter(|r| r.weights.len() * m.block == m.matrix.nrows())
        .map(|r| {
            project(&flat(&r.weights))
                .iter()
                .zip(&start)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// Outcome of comparing the law's finite-difference Jacobian with `−M/T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JacobianReport {
    /// Why the check did not run, if it did not.
    pub skipped: Option<String>,
    /// Largest eigenvalue of the symmetric part of the Jacobian.
    pub max_symmetric_eigenvalue: f64,
    /// `max |J_fd + M/T| / max |M/T|`.
    pub rel_error: f64,
    pub passed: bool,
}

impl JacobianReport {
    fn skipped(reason: &str) -> Self {
        JacobianReport {
            skipped: Some(reason.into()),
            max_symmetric_eigenvalue: 0.0,
            rel_error: 0.0,
            passed: false,
        }
    }
}

/// Central-difference Jacobian of the learning law, which must be
/// negative semi-definite and equal to `−M/T` inside an activity pattern.
pub fn jacobian_blocks_check<M: Learner>(
    model: &M,
    dataset: &Dataset,
    time_constant: f64,
) -> Result<JacobianReport> {
    positive_t(time_constant)?;
    let Some(step) = safe_step(model, dataset)? else {
        return Ok(JacobianReport::skipped("near transition"));
    };
    let base = evaluate(model, dataset)?;
    let w0 = model.flat_weights();
    let n = w0.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut probe = model.clone();
    for col in 0..n {
        let mut rhs = [Vec::new(), Vec::new()];
        for (slot, sign) in [1.0, -1.0].into_iter().enumerate() {
            let mut w = w0.clone();
            w[col] += sign * step;
            probe.set_flat_weights(&w);
            if evaluate(&probe, dataset)?.assignment != base.assignment {
                return Ok(JacobianReport::skipped("near transition"));
            }
            rhs[slot] = learning_rhs(&probe, dataset, time_constant)?.concat();
        }
        for row in 0..n {
            jac[(row, col)] = (rhs[0][row] - rhs[1][row]) / (2.0 * step);
        }
    }
    let expected = -observability_matrix(model, dataset)?.matrix / time_constant;
    let scale = expected.amax();
    let rel_error = if scale > 0.0 {
        (&jac - &expected).amax() / scale
    } else {
        jac.amax()
    };
    let sym = (&jac + jac.transpose()) * 0.5;
    let max_symmetric_eigenvalue = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(JacobianReport {
        skipped: None,
        max_symmetric_eigenvalue,
        rel_error,
        passed: max_symmetric_eigenvalue <= 1e-8 && rel_error < 1e-4,
    })
}

/// A finite-difference step that keeps every measurement's activity fixed,
/// or `None` if some measurement sits within [`BOUNDARY_MARGIN`] of a switch.
fn safe_step<M: Learner>(model: &M, dataset: &Dataset) -> Result<Option<f64>> {
    let mut margin = f64::INFINITY;
    let mut reach: f64 = 1.0;
    for (x, _) in dataset.iter() {
        margin = margin.min(model.switch_margin(x)?);
        reach = reach.max(x.iter().map(|v| v.abs()).sum());
    }
    if margin < BOUNDARY_MARGIN {
        return Ok(None);
    }
    Ok(Some((1e-3 * margin / reach).min(FD_STEP)))
}

fn positive_t(time_constant: f64) -> Result<()> {
    if time_constant > 0.0 && time_constant.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "time constant must be positive, got {time_constant}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradientComparison {
    pub abs_error: f64,
    /// `abs_error / max |velocity|`, or `0` when both sides vanish.
    pub rel_error: f64,
}

/// Learning velocity against `−(1/T)` times the central difference of the
/// cost with step [`FD_STEP`]. `None` when the state is too close to a
/// switch for the difference to stay inside one activity pattern.
pub fn gradient_comparison<M: Learner>(
    model: &M,
    dataset: &Dataset,
    time_constant: f64,
) -> Result<Option<GradientComparison>> {
    positive_t(time_constant)?;
    let base = evaluate(model, dataset)?;
    let mut reach: f64 = 1.0;
    let mut margin = f64::INFINITY;
    for (x, _) in dataset.iter() {
        margin = margin.min(model.switch_margin(x)?);
        reach = reach.max(x.iter().map(|v| v.abs()).sum());
    }
    if margin < 10.0 * FD_STEP * reach {
        return Ok(None);
    }
    let rhs = learning_rhs(model, dataset, time_constant)?.concat();
    let w0 = model.flat_weights();
    let mut probe = model.clone();
    let mut abs_error: f64 = 0.0;
    for (idx, v) in rhs.iter().enumerate() {
        let mut side = [0.0; 2];
        for (slot, sign) in [1.0, -1.0].into_iter().enumerate() {
            let mut w = w0.clone();
            w[idx] += sign * FD_STEP;
            probe.set_flat_weights(&w);
            let eval = evaluate(&probe, dataset)?;
            if eval.assignment != base.assignment {
                return Ok(None);
            }
            side[slot] = eval.cost;
        }
        let fd = -(side[0] - side[1]) / (2.0 * FD_STEP) / time_constant;
        abs_error = abs_error.max((fd - v).abs());
    }
    let scale = rhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let rel_error = if scale > 0.0 { abs_error / scale } else { 0.0 };
    Ok(Some(GradientComparison {
        abs_error,
        rel_error,
    }))
}

/// Worst gradient agreement over random interior states.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientCheck {
    pub trials: usize,
    /// Sampled states discarded for lying near a switch.
    pub rejected: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

/// Run [`gradient_comparison`] on `trials` accepted states drawn by
/// `sample`, giving up after `10 · trials` rejections.
pub fn fd_gradient_check<M, F>(trials: usize, mut sample: F) -> Result<GradientCheck>
where
    M: Learner,
    F: FnMut() -> Result<(M, Dataset, f64)>,
{
    let mut out = GradientCheck {
        trials: 0,
        rejected: 0,
        max_rel_error: 0.0,
        max_abs_error: 0.0,
    };
    while out.trials < trials {
        if out.rejected > 10 * trials.max(1) {
            return Err(Error::InvalidInput(format!(
                "only {} of {trials} sampled states were away from switches",
                out.trials
            )));
        }
        let (model, dataset, t) = sample()?;
        match gradient_comparison(&model, &dataset, t)? {
            Some(c) => {
                out.trials += 1;
                out.max_rel_error = out.max_rel_error.max(c.rel_error);
                out.max_abs_error = out.max_abs_error.max(c.abs_error);
            }
            None => out.rejected += 1,
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
