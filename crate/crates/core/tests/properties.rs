use bearing_core::fim::{dopt_gradient, dopt_objective, per_sensor_fim, total_source_fim};
use bearing_core::maxent::{exponential_tilt, solve_lambda, CostVector};
use bearing_core::particle_filter::{systematic_resample, weighted_mean};
use bearing_core::placement::optimize_placement;
use bearing_core::{AccuracyBudget, DomainBox, NoiseModel, ParticleCloud, Point2, WeightVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn domain() -> DomainBox {
    DomainBox::square(20.0).unwrap()
}

fn cloud_from(rng: &mut ChaCha8Rng, n: usize) -> ParticleCloud {
    let pos = (0..n)
        .map(|_| Point2::new(rng.random_range(0.0..20.0), rng.random_range(0.0..20.0)))
        .collect();
    let w = WeightVector::normalized((0..n).map(|_| rng.random_range(0.05..1.0)).collect()).unwrap();
    ParticleCloud::new(pos, w).unwrap()
}

fn points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point2> {
    (0..n)
        .map(|_| Point2::new(rng.random_range(0.0..20.0), rng.random_range(0.0..20.0)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn objective_is_rotation_invariant(seed in any::<u64>(), angle in 0.0..std::f64::consts::TAU) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cloud = cloud_from(&mut rng, 30);
        let sensors = points(&mut rng, 3);
        let c = domain().center();
        let rot_cloud = ParticleCloud::new(
            cloud.positions().iter().map(|p| p.rotate_about(c, angle)).collect(),
            cloud.weights().clone(),
        ).unwrap();
        let rot_sensors: Vec<Point2> = sensors.iter().map(|p| p.rotate_about(c, angle)).collect();
        let noise = NoiseModel::new(0.2).unwrap();
        let a = dopt_objective(&sensors, std::slice::from_ref(&cloud), noise);
        let b = dopt_objective(&rot_sensors, &[rot_cloud], noise);
        prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn fim_is_linear_in_weights(seed in any::<u64>(), t in 0.0..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 12;
        let pts = points(&mut rng, n);
        let sensors = points(&mut rng, 2);
        let a = WeightVector::normalized((0..n).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let b = WeightVector::normalized((0..n).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let mix = WeightVector::normalized(
            a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| t * x + (1.0 - t) * y).collect(),
        ).unwrap();
        let noise = NoiseModel::new(0.3).unwrap();
        let fa = total_source_fim(&pts, &a, &sensors, noise);
        let fb = total_source_fim(&pts, &b, &sensors, noise);
        let fm = total_source_fim(&pts, &mix, &sensors, noise);
        let lin = fa * t + fb * (1.0 - t);
        prop_assert!(fm.max_abs_diff(&lin) <= 1e-9 * lin.nuclear_norm().max(1e-300));
    }

    #[test]
    fn tilt_preserves_cost_ordering(seed in any::<u64>(), lambda in 0.001..50.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 20;
        let prior = WeightVector::normalized((0..n).map(|_| rng.random_range(0.05..1.0)).collect()).unwrap();
        let g = CostVector::new((0..n).map(|_| rng.random_range(0.0..4.0)).collect()).unwrap();
        let w = exponential_tilt(&prior, &g, lambda);
        for i in 0..n {
            for j in 0..n {
                if g.as_slice()[i] < g.as_slice()[j] {
                    let ri = w.as_slice()[i] / prior.as_slice()[i];
                    let rj = w.as_slice()[j] / prior.as_slice()[j];
                    prop_assert!(ri >= rj * (1.0 - 1e-12));
                }
            }
        }
    }
}

#[test]
fn kl_grows_and_cost_falls_with_lambda() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let n = 40;
        let prior = WeightVector::normalized((0..n).map(|_| rng.random_range(0.05..1.0)).collect()).unwrap();
        let g = CostVector::new((0..n).map(|_| rng.random_range(0.0..4.0)).collect()).unwrap();
        let mut last_kl = 0.0;
        let mut last_cost = g.expectation(&prior);
        for k in 1..60 {
            let lambda = 0.05 * k as f64;
            let w = exponential_tilt(&prior, &g, lambda);
            let kl = w.kl_divergence(&prior);
            let cost = g.expectation(&w);
            assert!(kl >= last_kl - 1e-12, "KL fell at λ = {lambda}");
            assert!(cost <= last_cost + 1e-12, "cost rose at λ = {lambda}");
            last_kl = kl;
            last_cost = cost;
        }
    }
}

#[test]
fn tilted_cost_slope_is_minus_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let n = 30;
        let prior = WeightVector::normalized((0..n).map(|_| rng.random_range(0.05..1.0)).collect()).unwrap();
        let g = CostVector::new((0..n).map(|_| rng.random_range(0.0..3.0)).collect()).unwrap();
        let lambda = rng.random_range(0.0..5.0);
        let h = |l: f64| g.expectation(&exponential_tilt(&prior, &g, l));
        let d = 1e-5;
        let slope = (h(lambda + d) - h((lambda - d).max(0.0))) / (lambda + d - (lambda - d).max(0.0));
        let w = exponential_tilt(&prior, &g, lambda);
        let mean = g.expectation(&w);
        let var: f64 = w.as_slice().iter().zip(g.as_slice()).map(|(wi, gi)| wi * (gi - mean).powi(2)).sum();
        assert!((slope + var).abs() <= 1e-5 * var.max(1e-3), "{slope} vs {}", -var);
    }
}

#[test]
fn smaller_budget_costs_more_divergence() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let n = 100;
    let prior = WeightVector::uniform(n).unwrap();
    let g = CostVector::new((0..n).map(|_| rng.random_range(0.0..10.0)).collect()).unwrap();
    let mut last_kl = 0.0;
    let gmin = g.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
    for eps in [3.0, 2.5, 2.0, 1.5, 1.0, 0.5] {
        let sol = solve_lambda(&prior, &g, AccuracyBudget::new(eps).unwrap());
        assert!(sol.kl_divergence >= last_kl);
        assert_eq!(sol.unreachable, eps * eps <= gmin);
        if !sol.unreachable {
            assert!(sol.achieved_cost <= eps * eps * (1.0 + 1e-8));
        }
        last_kl = sol.kl_divergence;
    }
}

#[test]
fn gradient_does_not_depend_on_sigma() {
    // log det(F/σ²) only shifts by a constant, up to the tiny jitter
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..20 {
        let clouds = vec![cloud_from(&mut rng, 50), cloud_from(&mut rng, 50)];
        let sensors = points(&mut rng, 3);
        let a = dopt_gradient(&sensors, &clouds, NoiseModel::new(0.1).unwrap());
        let b = dopt_gradient(&sensors, &clouds, NoiseModel::new(0.3).unwrap());
        for (ga, gb) in a.iter().zip(&b) {
            for k in 0..2 {
                assert!((ga[k] - gb[k]).abs() <= 1e-6 * ga[k].abs().max(1e-3));
            }
        }
    }
}

#[test]
fn per_sensor_fims_add_up() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let cloud = cloud_from(&mut rng, 40);
    let sensors = points(&mut rng, 4);
    let noise = NoiseModel::new(0.2).unwrap();
    let total = total_source_fim(cloud.positions(), cloud.weights(), &sensors, noise);
    let sum = sensors
        .iter()
        .map(|&s| per_sensor_fim(cloud.positions(), cloud.weights(), s, noise))
        .fold(None, |acc: Option<bearing_core::Matrix2>, f| Some(acc.map_or(f, |a| a + f)))
        .unwrap();
    assert!(total.max_abs_diff(&sum) <= 1e-12 * total.nuclear_norm());
}

#[test]
fn more_restarts_never_hurt() {
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let clouds = vec![cloud_from(&mut rng, 60)];
        let noise = NoiseModel::new(0.25).unwrap();
        let one = optimize_placement(&clouds, noise, &domain(), 2, 1, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let three = optimize_placement(&clouds, noise, &domain(), 2, 3, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert!(three.objective >= one.objective, "seed {seed}");
    }
}

#[test]
fn resampling_preserves_the_mean_on_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let cloud = cloud_from(&mut rng, 200);
    let target = weighted_mean(&cloud);
    let reps = 2000;
    let mut acc = Point2::ORIGIN;
    for _ in 0..reps {
        acc = acc + weighted_mean(&systematic_resample(&mut rng, &cloud)) * (1.0 / reps as f64);
    }
    assert!(acc.distance(target) < 0.02, "{acc:?} vs {target:?}");
}
