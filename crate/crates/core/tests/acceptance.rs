//! Acceptance suite: one PASS/FAIL line per criterion with its runtime.
//! Exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stablepwl::diagnostics::{
    fd_gradient_check, flow_field, jacobian_blocks_check, nullspace_drift, observability_matrix,
    random_dataset, random_model, voronoi_model, FlowGrid,
};
use stablepwl::dynamics::{cost, integrate, step, IntegratorConfig, NoHooks};
use stablepwl::pwl1d::fit1d;
use stablepwl::pwlnd::{fitnd, SEPARATION_EPS};
use stablepwl::relu::detect_frozen;
use stablepwl::{
    augment, Dataset, FitPhase, FitSchedule, Learner, Model, ModelKind, Neuron, PwlModel1D,
    PwlModelND, ReluModel,
};

type Outcome = Result<String, String>;

/// Name, check and runtime limit in seconds.
type Criterion = (&'static str, fn() -> Outcome, Option<u64>);

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

/// W-shaped polygon through (0,2), (2,0), (4,2), (6,0), (8,2).
fn polygon(x: f64) -> f64 {
    let m = x.rem_euclid(4.0);
    if m <= 2.0 {
        2.0 - m
    } else {
        m - 2.0
    }
}

/// Ordinary least-squares line through the points.
fn ols(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

fn a1() -> Outcome {
    let xs: Vec<f64> = (0..=8).map(f64::from).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| polygon(x)).collect();
    let ds = ok(Dataset::from_1d(&xs, &ys))?;
    let breaks = [2.0, 4.0, 6.0];

    // Piecewise least squares at the true breakpoints reproduces the data.
    let bounds = [0.0, 2.0, 4.0, 6.0, 8.0];
    let oracle: Vec<(f64, f64)> = bounds
        .windows(2)
        .map(|w| {
            let pts: Vec<(f64, f64)> = xs
                .iter()
                .zip(&ys)
                .filter(|(x, _)| **x >= w[0] && **x <= w[1])
                .map(|(x, y)| (*x, *y))
                .collect();
            ols(&pts)
        })
        .collect();
    for (x, y) in xs.iter().zip(&ys) {
        let seg = ((x / 2.0) as usize).min(3);
        check(
            (oracle[seg].0 + oracle[seg].1 * x - y).abs() < 1e-12,
            "oracle does not reproduce the polygon",
        )?;
    }

    let mut schedule = FitSchedule::uniform(3, 2000.0);
    schedule.phases[3].horizon = 20000.0;
    let config = IntegratorConfig {
        h0: 0.3,
        ..IntegratorConfig::for_dataset(&ds)
    };
    let fit = ok(fit1d(&ds, &schedule, &config))?;
    let v = ok(cost(&fit.model, &ds))?;
    check(v < 1e-6, format!("V = {v:e}"))?;
    let corners = ok(fit.model.ordered_corners())?;
    check(corners.len() == 3, format!("corners {corners:?}"))?;
    for c in &corners {
        let d = breaks
            .iter()
            .map(|b| (b - c).abs())
            .fold(f64::INFINITY, f64::min);
        check(d < 1e-2, format!("corner {c} is {d} from a breakpoint"))?;
    }
    for (w, (a, b)) in fit.model.neurons().iter().zip(&oracle) {
        check(
            (w.0[0] - a).abs() < 1e-3 && (w.0[1] - b).abs() < 1e-3,
            format!("neuron {:?} vs oracle ({a}, {b})", w.0),
        )?;
    }
    Ok(format!("V = {v:.2e}, corners {corners:.4?}"))
}

fn a2() -> Outcome {
    let ds = ok(Dataset::from_1d(&[0.0], &[1.0]))?;
    let config = IntegratorConfig::for_dataset(&ds);
    let mut relu = ReluModel::new(vec![Neuron(vec![-1.0, 0.3]), Neuron(vec![-1.0, -0.2])]);
    let start = relu.clone();
    for k in 0..1000 {
        let out = ok(step(&mut relu, &ds, config.h0, &config))?;
        check(
            out.cost_after == 0.5,
            format!("relu cost {} at step {k}", out.cost_after),
        )?;
        check(relu == start, format!("relu weights moved at step {k}"))?;
    }
    check(
        ok(detect_frozen(&relu, &ds, 1e-12))?.frozen,
        "relu not reported frozen",
    )?;

    let local = ok(PwlModel1D::new(vec![
        Neuron(vec![-1.0, 0.3]),
        Neuron(vec![-1.2, -0.2]),
    ]))?;
    let config = IntegratorConfig {
        t_end: 50.0,
        ..config
    };
    let (end, _) = ok(integrate(local, &ds, &config, &mut NoHooks))?;
    let v = ok(cost(&end, &ds))?;
    check(v < 1e-8, format!("local V = {v:e}"))?;
    Ok(format!("relu V = 0.5 for 1000 steps, local V = {v:.2e}"))
}

fn a3() -> Outcome {
    let grid = FlowGrid::square(-2.0, 2.0, 41);
    let relu = ok(flow_field(ModelKind::Relu, 1.0, &grid))?;
    let dead = relu
        .iter()
        .filter(|s| s.z1 < 0.0 && s.z2 < 0.0)
        .collect::<Vec<_>>();
    check(dead.len() == 400, format!("{} dead samples", dead.len()))?;
    check(
        dead.iter().all(|s| s.vz1 == 0.0 && s.vz2 == 0.0),
        "relu moves in the dead quadrant",
    )?;

    let y = 1.0;
    let half_cell = 0.5 * 4.0 / 40.0;
    let pair = ok(flow_field(ModelKind::Pwl1d, y, &grid))?;
    for s in &pair {
        // Inside each region only the top output moves, toward y; at rest
        // exactly when the top output equals y.
        let on_solution = (s.z1.max(s.z2) - y).abs() < half_cell;
        let at_rest = s.vz1 == 0.0 && s.vz2 == 0.0;
        check(
            on_solution == at_rest,
            format!("rest set mismatch at ({}, {})", s.z1, s.z2),
        )?;
    }
    for a in 0..41 {
        for b in 0..41 {
            let (s, t) = (&pair[b * 41 + a], &pair[a * 41 + b]);
            check(
                (s.z1, s.z2, s.vz1, s.vz2) == (t.z2, t.z1, t.vz2, t.vz1),
                format!("asymmetric at ({}, {})", s.z1, s.z2),
            )?;
        }
    }
    Ok("dead quadrant still, rest set = {max(z) = y}, exchange symmetric".into())
}

fn cone(q: [f64; 2], v: f64) -> Vec<Neuron> {
    let s = 3f64.sqrt() / 2.0;
    [[1.0, 0.0], [-0.5, s], [-0.5, -s]]
        .iter()
        .map(|g| Neuron(vec![v - g[0] * q[0] - g[1] * q[1], g[0], g[1]]))
        .collect()
}

fn a4() -> Outcome {
    let q = [0.3, -0.2];
    let truth = cone(q, 0.5);
    let table = [vec![1, 2], vec![0, 2], vec![0, 1]];
    let anchors: Vec<Vec<f64>> = truth
        .iter()
        .map(|w| vec![q[0] + 0.5 * w.0[1], q[1] + 0.5 * w.0[2]])
        .collect();
    let exact = ok(PwlModelND::new(truth.clone(), anchors.clone(), &table))?;
    let (c, _) = ok(exact.corner_nd(&[0, 1, 2]))?;
    check(
        (c[0] - q[0]).abs() < 1e-12 && (c[1] - q[1]).abs() < 1e-12,
        "oracle corner",
    )?;

    let rows = (0..20).flat_map(|a| {
        let exact = &exact;
        (0..10).map(move |b| {
            let x = vec![-1.0 + a as f64 * 2.0 / 19.0, -1.0 + b as f64 * 2.0 / 9.0];
            let y = exact.predict(&augment(&x)).expect("covered");
            (x, y)
        })
    });
    let ds = ok(Dataset::from_rows(2, rows))?;
    let perturbed: Vec<Neuron> = truth
        .iter()
        .zip([[0.1, -0.05, 0.08], [-0.07, 0.1, 0.05], [0.05, 0.06, -0.1]])
        .map(|(w, d)| Neuron(vec![w.0[0] + d[0], w.0[1] + d[1], w.0[2] + d[2]]))
        .collect();
    let model = ok(PwlModelND::new(perturbed, anchors, &table))?;
    let config = IntegratorConfig {
        h0: 1.0,
        ..IntegratorConfig::for_dataset(&ds)
    };
    let schedule = FitSchedule {
        phases: vec![FitPhase {
            horizon: 3000.0,
            split_after: false,
        }],
        ..FitSchedule::uniform(0, 1.0)
    };
    let fit = ok(fitnd(&ds, Some(model), &schedule, &config))?;
    let rms = (2.0 * ok(cost(&fit.model, &ds))? / ds.len() as f64).sqrt();
    check(rms < 1e-3, format!("rms {rms:e}"))?;
    let (corner, _) = ok(fit.model.corner_nd(&[0, 1, 2]))?;
    let err = (corner[0] - q[0]).abs().max((corner[1] - q[1]).abs());
    check(err < 1e-2, format!("corner {corner:?}"))?;
    Ok(format!("rms {rms:.2e}, corner error {err:.2e}"))
}

fn sample(kind: ModelKind, rng: &mut ChaCha8Rng) -> Result<(Model, Dataset, f64), String> {
    let dim = if kind == ModelKind::Pwlnd { 2 } else { 1 };
    let model = ok(random_model(kind, dim, rng))?;
    let k = rng.gen_range(1..=8);
    let ds = ok(random_dataset(rng, dim, k))?;
    Ok((model, ds, k as f64))
}

const KINDS: [ModelKind; 3] = [ModelKind::Relu, ModelKind::Pwl1d, ModelKind::Pwlnd];

fn a5() -> Outcome {
    let mut worst: f64 = 0.0;
    for kind in KINDS {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let check_ = ok(fd_gradient_check(100, || {
            sample(kind, &mut rng).map_err(stablepwl::Error::InvalidInput)
        }))?;
        check(check_.trials == 100, "too few trials")?;
        check(
            check_.max_rel_error < 1e-5,
            format!("{kind}: {:e}", check_.max_rel_error),
        )?;
        worst = worst.max(check_.max_rel_error);
    }
    Ok(format!("max rel error {worst:.2e} over 3 x 100 states"))
}

fn a6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let mut min_eig = f64::INFINITY;
    for idx in 0..50 {
        let kind = KINDS[idx % 3];
        let (m, ds, _) = sample(kind, &mut rng)?;
        let obs = ok(observability_matrix(&m, &ds))?;
        min_eig = min_eig.min(obs.min_eigenvalue());
        check(
            obs.min_eigenvalue() >= -1e-9,
            format!("{kind}: min eigenvalue {:e}", obs.min_eigenvalue()),
        )?;
        if kind.is_local() {
            check(
                obs.max_off_diagonal_block() == 0.0,
                format!("{kind}: coupled blocks"),
            )?;
        }
    }
    let mut passed = 0;
    let mut skipped = 0;
    while passed < 100 {
        let kind = KINDS[passed % 3];
        let (m, ds, t) = sample(kind, &mut rng)?;
        let report = ok(jacobian_blocks_check(&m, &ds, t))?;
        if report.skipped.is_some() {
            skipped += 1;
            check(skipped < 1000, "too many states near a switch")?;
            continue;
        }
        check(report.passed, format!("{kind}: {report:?}"))?;
        passed += 1;
    }
    Ok(format!(
        "min eigenvalue {min_eig:.2e}, 100 Jacobians pass ({skipped} skipped near switches)"
    ))
}

fn a7() -> Outcome {
    let ds = ok(Dataset::from_1d(&[0.5], &[2.0]))?;
    let config = IntegratorConfig {
        t_end: 20.0,
        h0: 0.1,
        ..IntegratorConfig::for_dataset(&ds)
    };
    let start = PwlModel1D::line(-1.0, 3.0);
    let (_, log) = ok(integrate(start.clone(), &ds, &config, &mut NoHooks))?;
    let obs = ok(observability_matrix(&start, &ds))?;
    let drift = nullspace_drift(&log, &obs);
    check(drift < 1e-8, format!("drift {drift:e}"))?;
    Ok(format!("drift {drift:.2e} over {} steps", log.len()))
}

fn a8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    let grid1: Vec<f64> = (0..=400).map(|i| -4.0 + i as f64 * 0.02).collect();
    let mut worst_prune: f64 = 0.0;
    let mut edits = 0;
    for _ in 0..50 {
        let Model::Pwl1d(m) = ok(random_model(ModelKind::Pwl1d, 1, &mut rng))? else {
            unreachable!()
        };
        let x_s = rng.gen_range(-3.0..3.0);
        let i = ok(m.active_index(x_s))?;
        let s = ok(m.split1d(i, x_s))?;
        for &x in &grid1 {
            let (a, b) = (ok(m.predict1d(x))?, ok(s.predict1d(x))?);
            check(
                a.to_bits() == b.to_bits(),
                format!("split1d changed {a} to {b} at {x}"),
            )?;
        }
        let xs: Vec<f64> = (0..6).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let ds = ok(Dataset::from_1d(&xs, &ys))?;
        let (p, events) = ok(s.prune1d(&ds))?;
        edits += events.len();
        for &x in &xs {
            worst_prune = worst_prune.max((ok(p.predict1d(x))? - ok(s.predict1d(x))?).abs());
        }
    }

    let grid2: Vec<Vec<f64>> = (0..41)
        .flat_map(|a| (0..41).map(move |b| vec![-2.0 + a as f64 * 0.1, -2.0 + b as f64 * 0.1]))
        .collect();
    for _ in 0..20 {
        let sites: Vec<[f64; 2]> = (0..4)
            .map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
            .collect();
        let Ok(m) = voronoi_model(&sites) else {
            continue;
        };
        let ds = ok(random_dataset(&mut rng, 2, 12))?;
        let x_k = ds.measurements()[0].x_raw.clone();
        let i = ok(m.activity(&augment(&x_k)))?.active.as_slice()[0];
        let s = ok(m.split_nd(i, &x_k, Some(&ds)))?;
        for x in &grid2 {
            let xa = augment(x);
            let (a, b) = (ok(m.predict(&xa))?, ok(s.predict(&xa))?);
            check(
                a.to_bits() == b.to_bits(),
                format!("split_nd changed {a} to {b} at {x:?}"),
            )?;
        }
        let (merged, events) = ok(s.merge_prune_nd(&ds, SEPARATION_EPS))?;
        edits += events.len();
        for (x, _) in ds.iter() {
            worst_prune = worst_prune.max((ok(merged.predict(x))? - ok(s.predict(x))?).abs());
        }
    }
    check(
        worst_prune < 1e-9,
        format!("prune/merge moved a prediction by {worst_prune:e}"),
    )?;
    check(edits > 0, "no prune or merge happened")?;
    Ok(format!(
        "splits bitwise exact, {edits} prunes/merges change predictions by {worst_prune:.1e}"
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("A1", a1, Some(30)),
        ("A2", a2, Some(5)),
        ("A3", a3, Some(5)),
        ("A4", a4, Some(60)),
        ("A5", a5, Some(10)),
        ("A6", a6, None),
        ("A7", a7, None),
        ("A8", a8, None),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let outcome =
            catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match (outcome, limit) {
            (Ok(_), Some(l)) if elapsed > Duration::from_secs(l) => {
                Err(format!("took longer than {l} s"))
            }
            (o, _) => o,
        };
        let timing = match limit {
            Some(l) => format!("{:.2} s, limit {l} s", elapsed.as_secs_f64()),
            None => format!("{:.2} s", elapsed.as_secs_f64()),
        };
        match outcome {
            Ok(detail) => println!("{name} PASS ({timing}): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{name} FAIL ({timing}): {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
