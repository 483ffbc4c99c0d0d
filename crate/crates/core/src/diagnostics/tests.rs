use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dynamics::{integrate, IntegratorConfig, NoHooks};
use crate::learner::ModelKind;
use crate::model::Model;
use crate::neuron::Neuron;
use crate::pwl1d::PwlModel1D;
use crate::relu::ReluModel;

fn single_line(a: f64, b: f64) -> PwlModel1D {
    PwlModel1D::line(a, b)
}

#[test]
fn single_dyad() {
    let ds = Dataset::from_1d(&[1.0], &[0.0]).unwrap();
    let m = observability_matrix(&single_line(0.3, 0.2), &ds).unwrap();
    assert_eq!(
        m.matrix,
        DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])
    );
    let (rank, null) = rank_nullspace(&m.matrix, RANK_TOL);
    assert_eq!(rank, 1);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!((null[0][0].abs() - h).abs() < 1e-12 && (null[0][0] + null[0][1]).abs() < 1e-12);
}

#[test]
fn two_inputs_give_full_rank() {
    let ds = Dataset::from_1d(&[0.0, 1.0], &[0.0, 0.0]).unwrap();
    let m = observability_matrix(&single_line(0.0, 0.0), &ds).unwrap();
    // [[2, 1], [1, 1]] has determinant 1.
    assert_eq!(
        m.matrix,
        DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0])
    );
    let (rank, null) = rank_nullspace(&m.matrix, RANK_TOL);
    assert_eq!((rank, null.len()), (2, 0));
}

#[test]
fn idle_neuron_has_zero_block() {
    // Corner at 0: measurements at x > 0 only reach neuron 1.
    let m = PwlModel1D::new(vec![Neuron(vec![0.0, -1.0]), Neuron(vec![0.0, 1.0])]).unwrap();
    let ds = Dataset::from_1d(&[1.0, 2.0], &[0.0, 0.0]).unwrap();
    let obs = observability_matrix(&m, &ds).unwrap();
    assert_eq!(obs.block(0, 0).amax(), 0.0);
    assert_eq!(obs.max_off_diagonal_block(), 0.0);
    assert!(obs.block(1, 1).amax() > 0.0);
}

#[test]
fn overlapping_relu_neurons_couple() {
    let m = ReluModel::new(vec![Neuron(vec![1.0, 0.5]), Neuron(vec![2.0, -0.5])]);
    let ds = Dataset::from_1d(&[1.0], &[0.0]).unwrap();
    let obs = observability_matrix(&m, &ds).unwrap();
    let dyad = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
    for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        assert_eq!(obs.block(i, j), dyad);
    }
}

#[test]
fn zero_matrix_is_all_null() {
    let (rank, null) = rank_nullspace(&DMatrix::zeros(3, 3), RANK_TOL);
    assert_eq!(rank, 0);
    assert_eq!(null.len(), 3);
}

#[test]
fn report_matches_matrix() {
    let ds = Dataset::from_1d(&[1.0], &[0.0]).unwrap();
    let obs = observability_matrix(&single_line(0.0, 0.0), &ds).unwrap();
    let report = obs.report();
    assert_eq!(report.rank, 1);
    assert_eq!(
        report.blocks,
        vec![vec![vec![vec![1.0, 1.0], vec![1.0, 1.0]]]]
    );
    assert!((report.eigenvalues[1] - 2.0).abs() < 1e-12);
}

#[test]
fn single_measurement_run_stays_on_its_null_line() {
    let ds = Dataset::from_1d(&[0.5], &[2.0]).unwrap();
    let config = IntegratorConfig {
        t_end: 20.0,
        h0: 0.1,
        ..IntegratorConfig::for_dataset(&ds)
    };
    let (_, log) = integrate(single_line(-1.0, 3.0), &ds, &config, &mut NoHooks).unwrap();
    let obs = observability_matrix(&single_line(0.0, 0.0), &ds).unwrap();
    assert!(nullspace_drift(&log, &obs) < 1e-8);
    assert!(log.last_cost() < 1e-12);
}

#[test]
fn full_rank_drift_is_vacuous() {
    let ds = Dataset::from_1d(&[0.0, 1.0], &[1.0, 0.0]).unwrap();
    let (_, log) = integrate(
        single_line(0.0, 0.0),
        &ds,
        &IntegratorConfig::for_dataset(&ds),
        &mut NoHooks,
    )
    .unwrap();
    let obs = observability_matrix(&single_line(0.0, 0.0), &ds).unwrap();
    assert_eq!(nullspace_drift(&log, &obs), 0.0);
}

#[test]
fn dead_relu_does_not_drift() {
    let ds = Dataset::from_1d(&[0.0], &[1.0]).unwrap();
    let m = ReluModel::new(vec![Neuron(vec![-1.0, 0.3]), Neuron(vec![-1.0, -0.2])]);
    let (end, log) = integrate(
        m.clone(),
        &ds,
        &IntegratorConfig::for_dataset(&ds),
        &mut NoHooks,
    )
    .unwrap();
    assert_eq!(end, m);
    let obs = observability_matrix(&m, &ds).unwrap();
    assert_eq!(obs.matrix.amax(), 0.0);
    assert_eq!(nullspace_drift(&log, &obs), 0.0);
}

#[test]
fn jacobian_of_one_neuron() {
    let ds = Dataset::from_1d(&[0.5, 2.0], &[1.0, -1.0]).unwrap();
    let report = jacobian_blocks_check(&single_line(0.2, 0.1), &ds, 2.0).unwrap();
    assert!(report.passed, "{report:?}");
    assert!(report.rel_error < 1e-6);
    // Perfect fit: the Jacobian does not depend on the residual.
    let fit = Dataset::from_1d(&[0.5, 2.0], &[0.25, 0.4]).unwrap();
    assert!(
        jacobian_blocks_check(&single_line(0.2, 0.1), &fit, 2.0)
            .unwrap()
            .passed
    );
}

#[test]
fn jacobian_skipped_near_switch() {
    let m = PwlModel1D::new(vec![Neuron(vec![0.0, -1.0]), Neuron(vec![0.0, 1.0])]).unwrap();
    let ds = Dataset::from_1d(&[1e-9, 1.0], &[0.0, 0.0]).unwrap();
    let report = jacobian_blocks_check(&m, &ds, 1.0).unwrap();
    assert_eq!(report.skipped.as_deref(), Some("near transition"));
    assert!(!report.passed);
    assert!(jacobian_blocks_check(&m, &ds, 0.0).is_err());
}

#[test]
fn zero_residual_gradient_vanishes() {
    let ds = Dataset::from_1d(&[0.0, 1.0], &[1.0, 3.0]).unwrap();
    let c = gradient_comparison(&single_line(1.0, 2.0), &ds, 2.0)
        .unwrap()
        .unwrap();
    assert!(c.abs_error < 1e-10);
}

#[test]
fn boundary_states_are_rejected() {
    let m = PwlModel1D::new(vec![Neuron(vec![0.0, -1.0]), Neuron(vec![0.0, 1.0])]).unwrap();
    let ds = Dataset::from_1d(&[0.0, 1.0], &[1.0, 0.0]).unwrap();
    assert!(gradient_comparison(&m, &ds, 1.0).unwrap().is_none());
    let mut calls = 0;
    let check = fd_gradient_check(3, || {
        calls += 1;
        let x = if calls % 2 == 0 { 0.0 } else { 0.5 };
        Ok((m.clone(), Dataset::from_1d(&[x, 1.0], &[1.0, 0.0])?, 1.0))
    })
    .unwrap();
    assert_eq!((check.trials, check.rejected), (3, 2));
}

fn sample(kind: ModelKind, rng: &mut ChaCha8Rng) -> (Model, Dataset, f64) {
    let dim = if kind == ModelKind::Pwlnd { 2 } else { 1 };
    let model = random_model(kind, dim, rng).unwrap();
    let k = rand::Rng::gen_range(rng, 1..=8);
    let ds = random_dataset(rng, dim, k).unwrap();
    (model, ds, k as f64)
}

#[test]
fn gradient_check_per_kind() {
    for kind in [ModelKind::Relu, ModelKind::Pwl1d, ModelKind::Pwlnd] {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let check = fd_gradient_check(100, || Ok(sample(kind, &mut rng))).unwrap();
        assert!(check.max_rel_error < 1e-5, "{kind}: {check:?}");
    }
}

#[test]
fn jacobian_check_per_kind() {
    for kind in [ModelKind::Relu, ModelKind::Pwl1d, ModelKind::Pwlnd] {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut passed = 0;
        while passed < 100 {
            let (m, ds, t) = sample(kind, &mut rng);
            let report = jacobian_blocks_check(&m, &ds, t).unwrap();
            if report.skipped.is_none() {
                assert!(report.passed, "{kind}: {report:?}");
                passed += 1;
            }
        }
    }
}

#[test]
fn random_models_are_valid() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let Model::Pwl1d(m) = random_model(ModelKind::Pwl1d, 1, &mut rng).unwrap() else {
            unreachable!()
        };
        assert!(m.is_consistent());
        let Model::Pwlnd(m) = random_model(ModelKind::Pwlnd, 2, &mut rng).unwrap() else {
            unreachable!()
        };
        assert!(m
            .check_corner_degeneracy()
            .unwrap()
            .anchor_violations
            .is_empty());
    }
    assert!(random_model(ModelKind::Pwlnd, 1, &mut rng).is_err());
}

#[test]
fn relu_dead_quadrant_is_still() {
    let samples = flow_field(ModelKind::Relu, 1.0, &FlowGrid::square(-2.0, 2.0, 41)).unwrap();
    assert_eq!(samples.len(), 41 * 41);
    for s in samples.iter().filter(|s| s.z1 < 0.0 && s.z2 < 0.0) {
        assert_eq!((s.vz1, s.vz2), (0.0, 0.0));
        assert_eq!(s.label, FlowLabel::Negative);
    }
}

#[test]
fn relu_below_zero_target_has_no_negative_residual() {
    let samples = flow_field(ModelKind::Relu, -1.0, &FlowGrid::square(-2.0, 2.0, 21)).unwrap();
    assert!(samples
        .iter()
        .all(|s| s.ytilde >= 0.0 && s.label == FlowLabel::Positive));
}

#[test]
fn switching_pair_rests_only_on_the_solution_set() {
    let samples = flow_field(ModelKind::Pwl1d, 1.0, &FlowGrid::square(-2.0, 2.0, 41)).unwrap();
    for s in &samples {
        let at_rest = s.vz1 == 0.0 && s.vz2 == 0.0;
        assert_eq!(at_rest, s.z1.max(s.z2) == 1.0, "at ({}, {})", s.z1, s.z2);
    }
}

#[test]
fn switching_pair_exchange_symmetry() {
    let grid = FlowGrid::square(-2.0, 2.0, 41);
    for y in [1.0, -1.0] {
        let samples = flow_field(ModelKind::Pwl1d, y, &grid).unwrap();
        for a in 0..41 {
            for b in 0..41 {
                let s = &samples[b * 41 + a];
                let t = &samples[a * 41 + b];
                assert_eq!((s.z1, s.z2, s.vz1, s.vz2), (t.z2, t.z1, t.vz2, t.vz1));
            }
        }
    }
}

#[test]
fn diverging_line_is_labelled() {
    let samples = flow_field(ModelKind::Pwl1d, 1.0, &FlowGrid::square(-1.0, 0.0, 3)).unwrap();
    let excluded: Vec<_> = samples
        .iter()
        .filter(|s| s.label == FlowLabel::Excluded)
        .collect();
    assert_eq!(excluded.len(), 3);
    assert!(excluded.iter().all(|s| s.z1 == s.z2));
}

#[test]
fn single_point_grid_and_csv() {
    let samples = flow_field(ModelKind::Relu, 1.0, &FlowGrid::square(-1.0, 3.0, 1)).unwrap();
    assert_eq!(samples.len(), 1);
    assert_eq!((samples[0].z1, samples[0].z2), (1.0, 1.0));
    let mut out = Vec::new();
    write_flow_csv(&samples, &mut out).unwrap();
    assert_eq!(
        String::from_utf8(out).unwrap(),
        "z1,z2,vz1,vz2,ytilde,label\n1,1,-1,-1,1,positive\n"
    );
    assert!(flow_field(ModelKind::Relu, 1.0, &FlowGrid::square(1.0, -1.0, 3)).is_err());
    assert!(flow_field(ModelKind::Relu, 1.0, &FlowGrid::square(-1.0, 1.0, 0)).is_err());
}

proptest! {
    #[test]
    fn observability_is_symmetric_psd(seed in 0u64..1000, kind in 0usize..3) {
        let kind = [ModelKind::Relu, ModelKind::Pwl1d, ModelKind::Pwlnd][kind];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, ds, _) = sample(kind, &mut rng);
        let obs = observability_matrix(&m, &ds).unwrap();
        prop_assert!(obs.max_asymmetry() <= 1e-12);
        prop_assert!(obs.min_eigenvalue() >= -1e-9);
        if kind.is_local() {
            prop_assert_eq!(obs.max_off_diagonal_block(), 0.0);
        }
    }
}
