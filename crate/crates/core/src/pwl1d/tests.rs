use proptest::prelude::*;

use super::*;
use crate::dynamics::{cost, IntegratorConfig};
use crate::schedule::FitSchedule;

fn model(ws: &[(f64, f64)]) -> PwlModel1D {
    PwlModel1D::new(ws.iter().map(|&(a, b)| Neuron(vec![a, b])).collect()).unwrap()
}

/// Normal equations for a line through `(xs, ys)`, solved by Cramer's rule.
fn ols_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sy: f64 = ys.iter().sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let det = n * sxx - sx * sx;
    ((sy * sxx - sx * sxy) / det, (n * sxy - sx * sy) / det)
}

/// W-shaped polygon through (0,2), (2,0), (4,2), (6,0), (8,2).
fn polygon(x: f64) -> f64 {
    let pts = [(0.0, 2.0), (2.0, 0.0), (4.0, 2.0), (6.0, 0.0), (8.0, 2.0)];
    for s in pts.windows(2) {
        if x <= s[1].0 {
            return s[0].1 + (s[1].1 - s[0].1) * (x - s[0].0) / (s[1].0 - s[0].0);
        }
    }
    pts[4].1
}

fn fit_config(ds: &Dataset) -> IntegratorConfig {
    IntegratorConfig {
        h0: 0.3,
        ..IntegratorConfig::for_dataset(ds)
    }
}

#[test]
fn corner_examples() {
    assert_eq!(model(&[(0.0, 1.0), (2.0, -1.0)]).corner(0).unwrap(), 1.0);

    let mut m = model(&[(0.0, 1.0), (0.0, 1.0)]);
    m.pin(0, 2.0).unwrap();
    assert_eq!(m.corner(0).unwrap(), 2.0);

    assert!(matches!(
        model(&[(0.0, 1.0), (1.0, 1.0)]).corner(0),
        Err(Error::DegenerateParallel { left: 0, right: 1 })
    ));
    assert!(model(&[(0.0, 1.0)]).corner(0).is_err());
}

#[test]
fn active_index_examples() {
    let m = model(&[(0.0, 1.0), (2.0, -1.0)]);
    assert_eq!(m.active_index(0.5).unwrap(), 0);
    assert_eq!(m.active_index(1.0).unwrap(), 0);
    assert_eq!(m.active_index(10.0).unwrap(), 1);
}

#[test]
fn inconsistent_corners_are_rejected() {
    // Corners at 2 and 1.
    let m = model(&[(0.0, 0.0), (-2.0, 1.0), (1.0, -2.0)]);
    assert!(!m.is_consistent());
    assert!(matches!(
        m.active_index(0.0),
        Err(Error::InconsistentCorners { pair: 0, next: 1 })
    ));
}

#[test]
fn predict_examples() {
    assert_eq!(PwlModel1D::line(0.0, 1.0).predict1d(3.0).unwrap(), 3.0);
    let m = model(&[(0.0, 1.0), (2.0, -1.0)]);
    assert_eq!(m.predict1d(1.5).unwrap(), 0.5);
    assert_eq!(m.neurons()[0].value(&[1.0, 1.0]), 1.0);
    assert_eq!(m.neurons()[1].value(&[1.0, 1.0]), 1.0);
}

#[test]
fn split_preserves_function() {
    let m = PwlModel1D::line(0.0, 1.0);
    let s = m.split1d(0, 2.0).unwrap();
    assert_eq!(s.len(), 2);
    assert_eq!(s.pins().get(&0), Some(&2.0));
    for x in -5..=5 {
        let x = x as f64;
        assert_eq!(
            s.predict1d(x).unwrap().to_bits(),
            m.predict1d(x).unwrap().to_bits()
        );
    }

    let s2 = s.split1d(0, -1.0).unwrap();
    assert_eq!(s2.len(), 3);
    assert_eq!(s2.corners().unwrap(), vec![-1.0, 2.0]);
    for x in -5..=5 {
        let x = x as f64 + 0.25;
        assert_eq!(
            s2.predict1d(x).unwrap().to_bits(),
            m.predict1d(x).unwrap().to_bits()
        );
    }
}

#[test]
fn split_outside_interval_fails() {
    let m = model(&[(0.0, 1.0), (2.0, -1.0)]);
    assert!(m.split1d(0, 1.0).is_err());
    assert!(m.split1d(1, 0.5).is_err());
    assert!(m.split1d(1, 3.0).is_ok());
}

#[test]
fn split_shifts_later_pins() {
    let mut m = model(&[(0.0, 1.0), (0.0, 1.0)]);
    m.pin(0, 1.0).unwrap();
    let s = m.split1d(0, -2.0).unwrap();
    assert_eq!(
        s.pins().iter().map(|(&p, &x)| (p, x)).collect::<Vec<_>>(),
        vec![(0, -2.0), (1, 1.0)]
    );
}

#[test]
fn prune_removes_empty_middle_neuron() {
    // Corners at 1 and 2, no data in (1, 2].
    let m = model(&[(0.0, 1.0), (-1.0, 2.0), (5.0, -1.0)]);
    let ds = Dataset::from_1d(&[0.0, 0.5, 1.0, 2.5, 3.0], &[0.0; 5]).unwrap();
    let before: Vec<f64> = (0..ds.len())
        .map(|k| m.predict1d(ds.x_aug(k)[1]).unwrap())
        .collect();
    let (p, events) = m.prune1d(&ds).unwrap();
    assert_eq!(p.len(), 2);
    assert!(matches!(events[0], ModelEvent::Prune { neuron: 1, .. }));
    for (k, b) in before.iter().enumerate() {
        assert!((p.predict1d(ds.x_aug(k)[1]).unwrap() - b).abs() < 1e-9);
    }
}

#[test]
fn prune_merges_identical_neighbours() {
    let mut m = model(&[(1.0, 0.5), (1.0, 0.5)]);
    m.pin(0, 2.0).unwrap();
    let ds = Dataset::from_1d(&[0.0, 1.0, 3.0], &[1.0, 2.0, 0.0]).unwrap();
    let (p, events) = m.prune1d(&ds).unwrap();
    assert_eq!(p, PwlModel1D::line(1.0, 0.5));
    assert_eq!(
        events,
        vec![ModelEvent::Merge {
            kept: 0,
            removed: 1
        }]
    );
}

#[test]
fn prune_without_work_is_identity() {
    let m = model(&[(0.0, 1.0), (2.0, -1.0)]);
    let ds = Dataset::from_1d(&[0.0, 2.0], &[0.0, 0.0]).unwrap();
    let (p, events) = m.prune1d(&ds).unwrap();
    assert_eq!(p, m);
    assert!(events.is_empty());
}

#[test]
fn pin_released_once_assignment_is_kept() {
    // Lines meet at 2.5 while the pin says 2; the measurement at 2 stays left.
    let mut m = model(&[(2.0, -1.0), (-3.0, 1.0)]);
    m.pin(0, 2.0).unwrap();
    let ds = Dataset::from_1d(&[0.0, 2.0, 3.0], &[2.0, 0.0, 0.0]).unwrap();
    let events = m.settle(&ds).unwrap();
    assert_eq!(events, vec![ModelEvent::PinReleased { left: 0, right: 1 }]);
    assert_eq!(m.corner(0).unwrap(), 2.5);

    // Lines meet at 1.5: the measurement at 2 would switch to a line that
    // disagrees there, so the pin holds.
    let mut m = model(&[(1.5, -1.0), (-1.5, 1.0)]);
    m.pin(0, 2.0).unwrap();
    assert!(m.settle(&ds).unwrap().is_empty());
    assert_eq!(m.corner(0).unwrap(), 2.0);
}

#[test]
fn parallel_pair_drops_the_unused_neuron() {
    let ds = Dataset::from_1d(&[0.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
    let mut m = model(&[(1.0, 1.0), (5.0, 1.0)]);
    let events = m.settle(&ds).unwrap();
    assert_eq!(m, PwlModel1D::line(1.0, 1.0));
    assert_eq!(events.len(), 1);
}

#[test]
fn squeezed_neuron_is_removed_in_settle() {
    let ds = Dataset::from_1d(&[0.0, 3.0], &[0.0, 0.0]).unwrap();
    let mut m = model(&[(0.0, 0.0), (-2.0, 1.0), (1.0, -2.0)]);
    let events = m.settle(&ds).unwrap();
    assert_eq!(m.len(), 2);
    assert!(matches!(events[0], ModelEvent::Prune { neuron: 1, .. }));
    assert!(m.is_consistent());
}

#[test]
fn record_round_trip() {
    let mut m = model(&[(0.0, 1.0), (0.0, 1.0), (3.0, -1.0)]);
    m.pin(0, 0.5).unwrap();
    let json = serde_json::to_string(&m.to_record()).unwrap();
    let back = PwlModel1D::from_record(serde_json::from_str(&json).unwrap()).unwrap();
    assert_eq!(back, m);
}

#[test]
fn fit_absolute_value() {
    let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
    let ys: Vec<f64> = xs.iter().map(|x| (x - 2.0f64).abs()).collect();
    let ds = Dataset::from_1d(&xs, &ys).unwrap();
    let fit = fit1d(&ds, &FitSchedule::uniform(1, 2000.0), &fit_config(&ds)).unwrap();
    assert_eq!(fit.model.len(), 2);
    assert!(cost(&fit.model, &ds).unwrap() < 1e-8);
    assert!((fit.model.corner(0).unwrap() - 2.0).abs() < 1e-3);

    // Two-segment oracle with the breakpoint at 2.
    let (a0, b0) = ols_line(&xs[..3], &ys[..3]);
    let (a1, b1) = ols_line(&xs[3..], &ys[3..]);
    let w = fit.model.neurons();
    assert!((w[0].0[0] - a0).abs() < 1e-3 && (w[0].0[1] - b0).abs() < 1e-3);
    assert!((w[1].0[0] - a1).abs() < 1e-3 && (w[1].0[1] - b1).abs() < 1e-3);
}

#[test]
fn fit_realizable_line_does_not_split() {
    let xs = [0.0, 1.0, 2.0, 3.0];
    let ys: Vec<f64> = xs.iter().map(|x| 0.5 - 1.5 * x).collect();
    let ds = Dataset::from_1d(&xs, &ys).unwrap();
    let fit = fit1d(&ds, &FitSchedule::uniform(2, 10.0), &fit_config(&ds)).unwrap();
    assert_eq!(fit.model.len(), 1);
    assert!(cost(&fit.model, &ds).unwrap() < 1e-10);
    assert!(fit.phases.iter().all(|p| p.split_at.is_none()));
}

#[test]
fn fit_polygon() {
    let xs: Vec<f64> = (0..=8).map(f64::from).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| polygon(x)).collect();
    let ds = Dataset::from_1d(&xs, &ys).unwrap();
    // Two measurements per end segment make the slowest mode decay over
    // about a thousand time units, so the last phase runs long.
    let mut schedule = FitSchedule::uniform(3, 2000.0);
    schedule.phases[3].horizon = 20000.0;
    let fit = fit1d(&ds, &schedule, &fit_config(&ds)).unwrap();
    assert!(cost(&fit.model, &ds).unwrap() < 1e-6);
    let corners = fit.model.ordered_corners().unwrap();
    assert_eq!(corners.len(), 3);
    for (c, want) in corners.iter().zip([2.0, 4.0, 6.0]) {
        assert!((c - want).abs() < 1e-2, "corner {c} vs {want}");
    }

    // Region-wise least squares on the learned assignment.
    for i in 0..fit.model.len() {
        let (rx, ry): (Vec<f64>, Vec<f64>) = xs
            .iter()
            .zip(&ys)
            .filter(|(x, _)| fit.model.active_index(**x).unwrap() == i)
            .map(|(x, y)| (*x, *y))
            .unzip();
        let w = &fit.model.neurons()[i].0;
        if rx.len() < 2 {
            // A lone measurement only fixes the line's value there.
            for (x, y) in rx.iter().zip(&ry) {
                assert!((w[0] + w[1] * x - y).abs() < 1e-3, "region {i}");
            }
            continue;
        }
        let (a, b) = ols_line(&rx, &ry);
        assert!(
            (w[0] - a).abs() < 1e-3 && (w[1] - b).abs() < 1e-3,
            "region {i}: {w:?} vs {a} {b} corners {:?}",
            fit.model.corners()
        );
    }
}

#[test]
fn fit_rejects_multivariate_data() {
    let ds = Dataset::from_rows(2, vec![(vec![0.0, 1.0], 1.0)]).unwrap();
    let schedule = FitSchedule::uniform(0, 1.0);
    assert!(fit1d(&ds, &schedule, &IntegratorConfig::for_dataset(&ds)).is_err());
}

fn continuous_model() -> impl Strategy<Value = PwlModel1D> {
    (
        -3.0f64..3.0,
        proptest::collection::vec(-3.0f64..3.0, 2..5),
        proptest::collection::vec(0.3f64..2.0, 4),
        -3.0f64..0.0,
    )
        .prop_map(|(a, slopes, gaps, first)| {
            // Continuous chain through corners `first`, `first + gaps[0]`, ...
            let mut neurons = vec![Neuron(vec![a, slopes[0]])];
            let mut c = first;
            for (p, s) in slopes.iter().enumerate().skip(1) {
                let prev = &neurons[p - 1].0;
                let y = prev[0] + prev[1] * c;
                neurons.push(Neuron(vec![y - s * c, *s]));
                c += gaps[p - 1];
            }
            PwlModel1D::new(neurons).unwrap()
        })
}

proptest! {
    #[test]
    fn corners_are_continuous(m in continuous_model()) {
        prop_assume!(m.is_consistent());
        for (p, c) in m.corners().unwrap().iter().enumerate() {
            let l = m.neurons()[p].value(&[1.0, *c]);
            let r = m.neurons()[p + 1].value(&[1.0, *c]);
            prop_assert!((l - r).abs() < 1e-9);
        }
    }

    #[test]
    fn exactly_one_active_neuron(m in continuous_model(), x in -10.0f64..10.0) {
        prop_assume!(m.is_consistent());
        let a = m.activity(&[1.0, x]).unwrap();
        prop_assert_eq!(a.active.as_slice().len(), 1);
    }

    #[test]
    fn split_is_pointwise_exact(m in continuous_model(), t in 0.01f64..0.99, probe in -10.0f64..10.0) {
        prop_assume!(m.is_consistent());
        let cs = m.corners().unwrap();
        let (lo, hi) = (cs.first().copied().unwrap_or(0.0) - 5.0, cs.first().copied().unwrap_or(0.0));
        let s = m.split1d(0, lo + t * (hi - lo)).unwrap();
        prop_assert_eq!(s.predict1d(probe).unwrap().to_bits(), m.predict1d(probe).unwrap().to_bits());
    }

    #[test]
    fn prune_never_raises_cost(
        m in continuous_model(),
        xs in proptest::collection::vec(-6.0f64..6.0, 1..12),
    ) {
        prop_assume!(m.is_consistent());
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let ds = Dataset::from_1d(&xs, &ys).unwrap();
        let (p, _) = m.prune1d(&ds).unwrap();
        let before = cost(&m, &ds).unwrap();
        let after = cost(&p, &ds).unwrap();
        prop_assert!(after <= before + 1e-9);
        for x in &xs {
            prop_assert!((p.predict1d(*x).unwrap() - m.predict1d(*x).unwrap()).abs() < 1e-9);
        }
    }
}
