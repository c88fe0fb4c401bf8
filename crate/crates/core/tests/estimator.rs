use osp_core::estimator::{monte_carlo_mse, paired_difference, GridSpec};
use osp_core::geometry::{balance_signs, positions_from_orientation, uniform_circle};
use osp_core::mm::{solve, SolverOptions};
use osp_core::{
    Criterion, DesignProblem, DistanceProfile, ModelConstants, NoiseModel, Orientation, TargetSensorConfig,
};

const ETA: f64 = -4.343;

fn designed_placement(m: usize, noise: &NoiseModel, design_target: &[f64], true_target: &[f64]) -> TargetSensorConfig {
    let p = DesignProblem::new(
        2,
        DistanceProfile::uniform(m, 1.0).unwrap(),
        ModelConstants::from_eta(ETA).unwrap(),
        noise.clone(),
        Criterion::A,
    )
    .unwrap();
    let init = Orientation::from_azimuths(&[0.3, 1.9, -2.2][..m]).unwrap();
    let r = solve(&p, &init, &SolverOptions::default()).unwrap();
    let placed = positions_from_orientation(&balance_signs(&r.orientation), p.distances(), design_target).unwrap();
    placed.with_target(true_target.to_vec()).unwrap()
}

// Sensors placed around a wrong target estimate lose little accuracy.
#[test]
fn target_mismatch_degrades_mse_by_at_most_thirty_percent() {
    let m = 3;
    let noise = NoiseModel::uniform(m, 1.0, 1.0, Some(1.0)).unwrap();
    let k = ModelConstants::from_eta(ETA).unwrap();
    let truth = [0.0, 0.0];
    let guess = [0.1, -0.2];
    let matched = designed_placement(m, &noise, &truth, &truth);
    let mismatched = designed_placement(m, &noise, &guess, &truth);
    let grid = GridSpec::covering(guess, 1.0).unwrap();
    let a = monte_carlo_mse(&matched, &noise, &k, 500, &grid, 11).unwrap();
    let b = monte_carlo_mse(&mismatched, &noise, &k, 500, &grid, 11).unwrap();
    assert!(!a.invalid && !b.invalid);
    assert!(b.mse <= 1.3 * a.mse, "matched {} mismatched {}", a.mse, b.mse);
}

#[test]
fn designed_placement_is_no_worse_than_uniform_circle() {
    let m = 5;
    let noise = NoiseModel::uniform(m, 1.0, 1.0, Some(1.0)).unwrap();
    let k = ModelConstants::from_eta(ETA).unwrap();
    let p = DesignProblem::new(
        2,
        DistanceProfile::uniform(m, 1.0).unwrap(),
        k,
        noise.clone(),
        Criterion::A,
    )
    .unwrap();
    let init = Orientation::from_azimuths(&[0.1, 0.2, 0.3, 2.0, -1.0]).unwrap();
    let r = solve(&p, &init, &SolverOptions::default()).unwrap();
    let designed = positions_from_orientation(&balance_signs(&r.orientation), p.distances(), &[0.0, 0.0]).unwrap();
    let uniform = uniform_circle(&[0.0, 0.0], 1.0, m).unwrap();
    let grid = GridSpec::covering([0.0, 0.0], 1.0).unwrap();
    let a = monte_carlo_mse(&designed, &noise, &k, 400, &grid, 3).unwrap();
    let b = monte_carlo_mse(&uniform, &noise, &k, 400, &grid, 3).unwrap();
    let (diff, se) = paired_difference(&a, &b).unwrap();
    assert!(diff <= 2.0 * se, "designed minus uniform {diff} (se {se})");
}

// Small noise puts the estimator in its asymptotic regime.
#[test]
fn small_noise_mse_approaches_the_bound() {
    let m = 3;
    let scale = 1e-4;
    let noise = NoiseModel::uniform(m, 1.0, 1.0, Some(1.0)).unwrap();
    let k = ModelConstants::from_eta(ETA).unwrap();
    let p = DesignProblem::new(
        2,
        DistanceProfile::uniform(m, 1.0).unwrap(),
        k,
        noise.clone(),
        Criterion::A,
    )
    .unwrap();
    let placement = designed_placement(m, &noise, &[0.0, 0.0], &[0.0, 0.0]);
    let j = osp_core::geometry::orientation_from_positions(&placement).unwrap().0;
    let bound = scale * osp_core::criterion_value(&p, &j, Criterion::A).unwrap();
    let grid = GridSpec::covering([0.0, 0.0], 1.0).unwrap();
    let r = monte_carlo_mse(&placement, &noise.scaled(scale).unwrap(), &k, 1000, &grid, 5).unwrap();
    assert!((r.mse / bound - 1.0).abs() <= 0.25, "mse {} bound {bound}", r.mse);
}
