//! Seeded random models and datasets for the property checks.

use rand::Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::learner::ModelKind;
use crate::model::Model;
use crate::neuron::Neuron;
use crate::pwl1d::PwlModel1D;
use crate::pwlnd::PwlModelND;
use crate::relu::ReluModel;

/// `k` measurements with inputs and outputs uniform in `[−2, 2]`.
pub fn random_dataset<R: Rng>(rng: &mut R, input_dim: usize, k: usize) -> Result<Dataset> {
    let rows: Vec<(Vec<f64>, f64)> = (0..k)
        .map(|_| {
            let x = (0..input_dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            (x, rng.gen_range(-2.0..2.0))
        })
        .collect();
    Dataset::from_rows(input_dim, rows)
}

/// A small random model of the given kind: 2 or 3 saturating neurons, a
/// continuous chain of up to 4 lines with corners in `[−2, 2]`, or a
/// Voronoi layout of up to 5 sites in `[−2, 2]²`.
pub fn random_model<R: Rng>(kind: ModelKind, input_dim: usize, rng: &mut R) -> Result<Model> {
    match kind {
        ModelKind::Relu => {
            let count = rng.gen_range(2..=3);
            let neurons = (0..count)
                .map(|_| Neuron((0..=input_dim).map(|_| rng.gen_range(-1.5..1.5)).collect()))
                .collect();
            Ok(Model::Relu(ReluModel::new(neurons)))
        }
        ModelKind::Pwl1d => {
            if input_dim != 1 {
                return Err(Error::InvalidInput("pwl1d models take one input".into()));
            }
            let count = rng.gen_range(1..=4);
            let corners = spaced(rng, count - 1, 0.4, |r| r.gen_range(-2.0..2.0));
            let mut slope = rng.gen_range(-2.0..2.0);
            let mut neurons = vec![Neuron(vec![rng.gen_range(-1.0..1.0), slope])];
            for c in corners {
                let prev = neurons.last().expect("first line").0.clone();
                slope = loop {
                    let s: f64 = rng.gen_range(-2.0..2.0);
                    if (s - prev[1]).abs() >= 0.3 {
                        break s;
                    }
                };
                neurons.push(Neuron(vec![prev[0] + (prev[1] - slope) * c, slope]));
            }
            Ok(Model::Pwl1d(PwlModel1D::new(neurons)?))
        }
        ModelKind::Pwlnd => {
            if input_dim != 2 {
                return Err(Error::InvalidInput(
                    "random pwlnd models take two inputs".into(),
                ));
            }
            let count = rng.gen_range(2..=5);
            let sites: Vec<[f64; 2]> = spaced_points(rng, count, 0.5);
            Ok(Model::Pwlnd(voronoi_model(&sites)?))
        }
    }
}

/// `count` sorted values at least `gap` apart.
fn spaced<R: Rng>(rng: &mut R, count: usize, gap: f64, draw: impl Fn(&mut R) -> f64) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..count).map(|_| draw(rng)).collect();
        v.sort_by(f64::total_cmp);
        if v.windows(2).all(|w| w[1] - w[0] >= gap) {
            return v;
        }
    }
}

fn spaced_points<R: Rng>(rng: &mut R, count: usize, gap: f64) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = Vec::with_capacity(count);
    while pts.len() < count {
        let p = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        if pts.iter().all(|q| (p[0] - q[0]).hypot(p[1] - q[1]) >= gap) {
            pts.push(p);
        }
    }
    pts
}

/// `ŷ = max_i (2pᵢ·x − |pᵢ|²)`, whose regions are the Voronoi cells of the
/// sites; each site anchors its own cell.
pub fn voronoi_model(sites: &[[f64; 2]]) -> Result<PwlModelND> {
    let neurons: Vec<Neuron> = sites
        .iter()
        .map(|p| Neuron(vec![-(p[0] * p[0] + p[1] * p[1]), 2.0 * p[0], 2.0 * p[1]]))
        .collect();
    let table = max_adjacency(&neurons);
    PwlModelND::new(neurons, sites.iter().map(|p| p.to_vec()).collect(), &table)
}

/// Adjacency of the regions of `max_i ẑᵢ` over two inputs: `i` and `j` are
/// neighbours when a piece of positive length of the line `ẑᵢ = ẑⱼ` has
/// both on top.
pub fn max_adjacency(neurons: &[Neuron]) -> Vec<Vec<usize>> {
    let m = neurons.len();
    let mut table = vec![Vec::new(); m];
    for i in 0..m {
        for j in i + 1..m {
            let (wi, wj) = (&neurons[i].0, &neurons[j].0);
            let a = [wi[1] - wj[1], wi[2] - wj[2]];
            let aa = a[0] * a[0] + a[1] * a[1];
            if aa < 1e-18 {
                continue;
            }
            // Parametrize the line as p0 + t·d and clip by ẑᵢ ≥ ẑₖ.
            let b = wj[0] - wi[0];
            let p0 = [a[0] * b / aa, a[1] * b / aa];
            let d = [-a[1], a[0]];
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for (k, wk) in neurons.iter().enumerate() {
                if k == i || k == j {
                    continue;
                }
                let g = [wi[0] - wk.0[0], wi[1] - wk.0[1], wi[2] - wk.0[2]];
                let c0 = g[0] + g[1] * p0[0] + g[2] * p0[1];
                let c1 = g[1] * d[0] + g[2] * d[1];
                if c1.abs() < 1e-15 {
                    if c0 < 0.0 {
                        hi = lo;
                    }
                } else if c1 > 0.0 {
                    lo = lo.max(-c0 / c1);
                } else {
                    hi = hi.min(-c0 / c1);
                }
            }
            if hi - lo > 1e-9 {
                table[i].push(j);
                table[j].push(i);
            }
        }
    }
    table
}
