mod common;

use approx::assert_relative_eq;
use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use teleop_otg_core::spline::*;
use teleop_otg_core::Waypoints;

fn boundary(inst: &Instance) -> BoundaryState {
    BoundaryState {
        v0: inst.bnd[0].clone(),
        a0: inst.bnd[1].clone(),
        vf: inst.bnd[2].clone(),
        af: inst.bnd[3].clone(),
    }
}

fn bnd_col(inst: &Instance, j: usize) -> [f64; 4] {
    [inst.bnd[0][j], inst.bnd[1][j], inst.bnd[2][j], inst.bnd[3][j]]
}

#[test]
fn time_vector_examples() {
    let k = build_time_vector(&[1.0, 1.0], 0.5).unwrap();
    assert_eq!(k.augmented(), &[0.5, 0.5, 0.5, 0.5]);
    let k = build_time_vector(&[1.0, 2.0, 1.0], 0.25).unwrap();
    assert_eq!(k.augmented(), &[0.25, 0.75, 2.0, 0.75, 0.25]);
    assert_relative_eq!(k.augmented().iter().sum::<f64>(), 4.0);
    let k = build_time_vector(&[2.0], 0.5).unwrap();
    assert_eq!(k.augmented(), &[0.5, 1.0, 0.5]);
}

#[test]
fn time_vector_rejects_bad_input() {
    assert!(build_time_vector(&[1.0, 0.0], 0.5).is_err());
    assert!(build_time_vector(&[1.0, -1.0], 0.5).is_err());
    assert!(build_time_vector(&[1.0], 0.0).is_err());
    assert!(build_time_vector(&[1.0], 1.0).is_err());
    assert!(build_time_vector(&[], 0.5).is_err());
}

#[test]
fn a_matrix_corner_entries() {
    let k = build_time_vector(&[1.0, 1.0, 1.0], 0.5).unwrap();
    let a = assemble_a(&k);
    assert_relative_eq!(a.get(0, 0), 0.5, epsilon = 1e-15);
    assert_relative_eq!(a.get(1, 0), 0.0, epsilon = 1e-15);

    let beta = 0.3;
    let t = [1.3, 0.7, 2.1, 0.9];
    let k = build_time_vector(&t, beta).unwrap();
    let a = assemble_a(&k);
    let n = t.len();
    assert_relative_eq!(a.get(0, 0), (2.0 - beta) / (1.0 - beta) * t[0] / 6.0, epsilon = 1e-14);
    assert_relative_eq!(a.get(0, 1), (1.0 - beta) * t[0] / 6.0, epsilon = 1e-14);
    assert_relative_eq!(a.get(1, 0), (1.0 - 2.0 * beta) / (1.0 - beta) * t[0] / 6.0, epsilon = 1e-14);
    assert_relative_eq!(a.get(1, 1), (2.0 * (1.0 - beta) * t[0] + 2.0 * t[1]) / 6.0, epsilon = 1e-14);
    assert_relative_eq!(a.get(2, 1), t[1] / 6.0, epsilon = 1e-14);
    assert_relative_eq!(a.get(n, n), (2.0 - beta) / (1.0 - beta) * t[n - 1] / 6.0, epsilon = 1e-14);
    assert_relative_eq!(
        a.get(n - 1, n),
        (1.0 - 2.0 * beta) / (1.0 - beta) * t[n - 1] / 6.0,
        epsilon = 1e-14
    );
}

#[test]
fn c_matrix_entries() {
    let k = build_time_vector(&[1.0, 1.0, 1.0], 0.5).unwrap();
    let c = assemble_c(&k);
    assert_relative_eq!(c.get(0, 0), -2.0, epsilon = 1e-14);
    assert_relative_eq!(c.get(0, 1), 2.0, epsilon = 1e-14);

    let t = [1.3, 0.7, 2.1, 0.9];
    let beta = 0.35;
    let c = assemble_c(&build_time_vector(&t, beta).unwrap());
    assert_relative_eq!(c.get(1, 1), -1.0 / ((1.0 - beta) * t[0]) - 1.0 / t[1], epsilon = 1e-13);
    assert_relative_eq!(c.get(2, 1), 1.0 / t[1], epsilon = 1e-13);
    assert_relative_eq!(c.get(2, 2), -1.0 / t[1] - 1.0 / t[2], epsilon = 1e-13);
    assert_relative_eq!(c.get(2, 3), 1.0 / t[2], epsilon = 1e-13);
    for i in 0..5 {
        let sum: f64 = (0..5).map(|j| c.get(i, j)).sum();
        assert!(sum.abs() < 1e-12, "row {i} sums to {sum}");
    }
    assert!(c.is_symmetric(1e-12));
}

#[test]
fn abar_examples() {
    let e = assemble_abar(&[1.0, 1.0]);
    let expect = [[2.0, 1.0, 0.0], [1.0, 4.0, 1.0], [0.0, 1.0, 2.0]];
    for i in 0..3 {
        for j in 0..3 {
            assert_relative_eq!(e.get(i, j), expect[i][j] / 6.0, epsilon = 1e-15);
        }
    }
    let e = assemble_abar(&[6.0]);
    assert_eq!(e.to_dense(), vec![vec![2.0, 1.0], vec![1.0, 2.0]]);
}

#[test]
fn abar_positive_definite() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let inst = random_instance(&mut rng, 15, 1);
        let e = dense(&assemble_abar(&inst.raw));
        let eig = e.symmetric_eigen().eigenvalues;
        assert!(eig.iter().all(|x| *x > 0.0), "{eig}");
    }
}

#[test]
fn constant_waypoints_give_constant_spline() {
    let q = Waypoints::from_rows(&[[0.3, -1.0], [0.3, -1.0]]).unwrap();
    let k = build_time_vector(&[0.8], 0.5).unwrap();
    let tr = interpolating_spline(&q, &BoundaryState::rest(2), &k).unwrap();
    assert!(tr.knot_second_derivatives().as_slice().iter().all(|m| m.abs() < 1e-14));
    for i in 0..=20 {
        let s = tr.eval(0.04 * i as f64);
        assert!(s.velocity.iter().chain(&s.acceleration).all(|x| x.abs() < 1e-13));
        assert_relative_eq!(s.position[0], 0.3, epsilon = 1e-14);
    }
    assert_eq!(tr.stretch_energy(), 0.0);
}

#[test]
fn unit_step_matches_dense_oracle() {
    let q = Waypoints::from_rows(&[[0.0], [1.0]]).unwrap();
    let k = build_time_vector(&[1.0], 0.5).unwrap();
    let tr = interpolating_spline(&q, &BoundaryState::rest(1), &k).unwrap();
    let s0 = tr.eval(0.0);
    let s1 = tr.eval(1.0);
    assert_eq!(s0.position[0], 0.0);
    assert_relative_eq!(s1.position[0], 1.0, epsilon = 1e-14);
    for x in [s0.velocity[0], s0.acceleration[0], s1.velocity[0], s1.acceleration[0]] {
        assert!(x.abs() < 1e-12);
    }
    let oracle = dense_spline(&[0.0, 1.0], &[1.0], 0.5, [0.0; 4]);
    assert_relative_eq!(tr.eval(0.5).position[0], oracle.eval(0.5).0, epsilon = 1e-12);
}

#[test]
fn eval_clamps_outside_range() {
    let q = Waypoints::from_rows(&[[0.0], [1.0], [0.5]]).unwrap();
    let tr = interpolating_spline(&q, &BoundaryState::rest(1), &build_time_vector(&[1.0, 1.0], 0.5).unwrap())
        .unwrap();
    let before = tr.eval(-0.3);
    assert!(before.clamped);
    assert_eq!(before.position, tr.eval(0.0).position);
    let after = tr.eval(5.0);
    assert!(after.clamped);
    assert_eq!(after.position, tr.eval(2.0).position);
    assert!(!tr.eval(1.0).clamped);
}

#[test]
fn interpolating_spline_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..60 {
        let inst = random_instance(&mut rng, 12, 3);
        let q = Waypoints::from_rows(&inst.q).unwrap();
        let k = build_time_vector(&inst.raw, inst.beta).unwrap();
        let tr = interpolating_spline(&q, &boundary(&inst), &k).unwrap();
        let total = k.total();
        for j in 0..q.cols() {
            let col = q.column(j);
            let oracle = dense_spline(&col, &inst.raw, inst.beta, bnd_col(&inst, j));
            for i in 0..=40 {
                let t = total * i as f64 / 40.0;
                let s = tr.eval(t);
                let (p, v, a) = oracle.eval(t);
                assert_relative_eq!(s.position[j], p, epsilon = 1e-8, max_relative = 1e-8);
                assert_relative_eq!(s.velocity[j], v, epsilon = 1e-7, max_relative = 1e-7);
                assert_relative_eq!(s.acceleration[j], a, epsilon = 1e-6, max_relative = 1e-7);
            }
        }
    }
}

#[test]
fn min_stretch_mu_one_is_interpolation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let inst = random_instance(&mut rng, 8, 3);
    let q = Waypoints::from_rows(&inst.q).unwrap();
    let k = build_time_vector(&inst.raw, inst.beta).unwrap();
    let w = StretchWeights::new(1.0, q.rows()).unwrap();
    let tr = min_stretch_spline(&q, &w, &boundary(&inst), &k).unwrap();
    let s = tr.issued_positions();
    for (a, b) in s.as_slice().iter().zip(q.as_slice()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn min_stretch_constant_is_fixed_point() {
    let q = Waypoints::from_rows(&[[1.0, 2.0]; 6]).unwrap();
    let k = build_time_vector(&[0.1, 0.2, 0.1, 0.3, 0.2], 0.5).unwrap();
    let w = StretchWeights::new(0.3, 6).unwrap();
    let tr = min_stretch_spline(&q, &w, &BoundaryState::rest(2), &k).unwrap();
    for (a, b) in tr.issued_positions().as_slice().iter().zip(q.as_slice()) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(tr.stretch_energy() < 1e-20);
}

#[test]
fn mu_zero_rejected_and_tiny_mu_floored() {
    assert!(StretchWeights::new(0.0, 3).is_err());
    assert!(StretchWeights::new(1.5, 3).is_err());
    let w = StretchWeights::new(1e-9, 3).unwrap();
    assert_eq!(w.mu(), MU_FLOOR);
    let w = StretchWeights::new(0.25, 3).unwrap();
    assert_relative_eq!(w.lambda() * w.mu(), 1.0 - w.mu(), epsilon = 1e-16);
}

#[test]
fn min_stretch_matches_brute_force_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..30 {
        let mut inst = random_instance(&mut rng, 6, 2);
        if case == 0 {
            inst.raw = vec![0.4, 0.7, 0.5, 0.6];
            inst.q = (0..5).map(|i| vec![(i as f64 * 0.9).sin()]).collect();
            inst.bnd = [vec![0.0], vec![0.0], vec![0.0], vec![0.0]];
        }
        let q = Waypoints::from_rows(&inst.q).unwrap();
        let k = build_time_vector(&inst.raw, inst.beta).unwrap();
        let mut w = StretchWeights::new(if case == 0 { 0.9 } else { rand::Rng::gen_range(&mut rng, 0.05..1.0) }, q.rows()).unwrap();
        if case % 3 == 1 {
            w = w.pin(0);
        }
        if case % 3 == 2 {
            let last = q.rows() - 1;
            w = w.pin(0).pin(last);
            w.w[1.min(last - 1)] = 2.5;
        }
        let tr = min_stretch_spline(&q, &w, &boundary(&inst), &k).unwrap();
        let s = tr.issued_positions();
        for j in 0..q.cols() {
            let expect = brute_force_min_stretch(&q.column(j), &w.w, w.lambda(), &inst.raw, inst.beta, bnd_col(&inst, j));
            for i in 0..q.rows() {
                assert!(
                    (s[(i, j)] - expect[i]).abs() < 1e-8 * (1.0 + expect[i].abs()),
                    "case {case} knot {i}: {} vs {}",
                    s[(i, j)],
                    expect[i]
                );
            }
        }
    }
}

#[test]
fn static_closed_form_matches_general_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let inst = random_instance(&mut rng, 10, 3);
        let q = Waypoints::from_rows(&inst.q).unwrap();
        let k = build_time_vector(&inst.raw, inst.beta).unwrap();
        let lambda = rand::Rng::gen_range(&mut rng, 0.0..5.0);
        let closed = static_min_stretch(&q, lambda, &k).unwrap();
        let w = StretchWeights::from_lambda(lambda, q.rows()).unwrap().with_metric(StretchMetric::SystemMatrix);
        let general = min_stretch_spline(&q, &w, &BoundaryState::rest(q.cols()), &k).unwrap();
        for (a, b) in closed.issued_positions().as_slice().iter().zip(general.issued_positions().as_slice()) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        let (m1, m2) = (closed.knot_second_derivatives(), general.knot_second_derivatives());
        for (a, b) in m1.as_slice().iter().zip(m2.as_slice()) {
            assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()));
        }
    }
}

#[test]
fn static_lambda_zero_is_interpolation() {
    let q = Waypoints::from_rows(&[[0.0], [0.4], [-0.2], [1.0]]).unwrap();
    let k = build_time_vector(&[0.5, 0.3, 0.6], 0.5).unwrap();
    let a = static_min_stretch(&q, 0.0, &k).unwrap();
    let b = interpolating_spline(&q, &BoundaryState::rest(1), &k).unwrap();
    for (x, y) in a.knot_second_derivatives().as_slice().iter().zip(b.knot_second_derivatives().as_slice()) {
        assert!((x - y).abs() < 1e-12);
    }
    let c = static_min_stretch(&Waypoints::from_rows(&[[2.0]; 4]).unwrap(), 3.0, &k).unwrap();
    assert!(c.knot_second_derivatives().as_slice().iter().all(|m| m.abs() < 1e-14));
}

#[test]
fn energy_matches_simpson_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..40 {
        let inst = random_instance(&mut rng, 10, 3);
        let q = Waypoints::from_rows(&inst.q).unwrap();
        let k = build_time_vector(&inst.raw, inst.beta).unwrap();
        let tr = interpolating_spline(&q, &boundary(&inst), &k).unwrap();
        let quad: f64 = (0..q.cols())
            .map(|j| dense_spline(&q.column(j), &inst.raw, inst.beta, bnd_col(&inst, j)).simpson_energy(8))
            .sum();
        assert_relative_eq!(tr.stretch_energy(), quad, max_relative = 1e-6);
    }
}

#[test]
fn energy_decreases_along_lambda_sweep() {
    let q = Waypoints::from_rows(&[[0.0], [1.0], [-0.5], [0.7], [0.1]]).unwrap();
    let k = build_time_vector(&[0.3, 0.4, 0.3, 0.5], 0.5).unwrap();
    let mut last = f64::INFINITY;
    for lambda in [0.0, 0.1, 1.0, 10.0] {
        let w = StretchWeights::from_lambda(lambda, 5).unwrap();
        let e = min_stretch_spline(&q, &w, &BoundaryState::rest(1), &k).unwrap().stretch_energy();
        assert!(e <= last + 1e-12);
        last = e;
    }
}

#[test]
fn time_scaling_covariance() {
    let q = Waypoints::from_rows(&[[0.0, 1.0], [1.0, 0.0], [-0.5, 0.3], [0.7, 0.2]]).unwrap();
    let raw = [0.3, 0.4, 0.5];
    let c = 2.5;
    let scaled: Vec<f64> = raw.iter().map(|t| t * c).collect();
    let a = interpolating_spline(&q, &BoundaryState::rest(2), &build_time_vector(&raw, 0.4).unwrap()).unwrap();
    let b = interpolating_spline(&q, &BoundaryState::rest(2), &build_time_vector(&scaled, 0.4).unwrap()).unwrap();
    for i in 0..=30 {
        let t = a.duration() * i as f64 / 30.0;
        let (sa, sb) = (a.eval(t), b.eval(t * c));
        for j in 0..2 {
            assert_relative_eq!(sa.position[j], sb.position[j], epsilon = 1e-12);
            assert_relative_eq!(sa.velocity[j] / c, sb.velocity[j], epsilon = 1e-11);
            assert_relative_eq!(sa.acceleration[j] / (c * c), sb.acceleration[j], epsilon = 1e-10);
        }
    }
}

#[test]
fn hold_trajectory_is_still() {
    let tr = CubicSplineTrajectory::hold(&[0.1, 0.2], 0.005);
    let s = tr.eval(0.003);
    assert_eq!(s.position, vec![0.1, 0.2]);
    assert_eq!(s.velocity, vec![0.0, 0.0]);
    assert_eq!(tr.duration(), 0.005);
}

fn instance_strategy() -> impl Strategy<Value = Instance> {
    any::<u64>().prop_map(|seed| random_instance(&mut ChaCha8Rng::seed_from_u64(seed), 20, 7))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn continuity_interpolation_and_boundary(inst in instance_strategy()) {
        let q = Waypoints::from_rows(&inst.q).unwrap();
        let k = build_time_vector(&inst.raw, inst.beta).unwrap();
        let b = boundary(&inst);
        let tr = interpolating_spline(&q, &b, &k).unwrap();
        for (t, row) in tr.issued_times().iter().zip(q.iter_rows()) {
            let s = tr.eval(*t);
            for (x, y) in s.position.iter().zip(row) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
        let start = tr.eval(0.0);
        let end = tr.eval(tr.duration());
        for j in 0..q.cols() {
            prop_assert!((start.velocity[j] - b.v0[j]).abs() < 1e-8);
            prop_assert!((start.acceleration[j] - b.a0[j]).abs() < 1e-8);
            prop_assert!((end.velocity[j] - b.vf[j]).abs() < 1e-8);
            prop_assert!((end.acceleration[j] - b.af[j]).abs() < 1e-8);
        }
        let h = tr.durations();
        for seg in 0..h.len() - 1 {
            for j in 0..q.cols() {
                let [a0, b0, c0, d0] = tr.coefficients(seg, j);
                let [a1, b1, c1, _] = tr.coefficients(seg + 1, j);
                let t = h[seg];
                prop_assert!((a0 + t * (b0 + t * (c0 + t * d0)) - a1).abs() < 1e-9);
                prop_assert!((b0 + t * (2.0 * c0 + 3.0 * d0 * t) - b1).abs() < 1e-9);
                prop_assert!((2.0 * c0 + 6.0 * d0 * t - 2.0 * c1).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences(inst in instance_strategy(), frac in 0.01f64..0.99) {
        let q = Waypoints::from_rows(&inst.q).unwrap();
        let k = build_time_vector(&inst.raw, inst.beta).unwrap();
        let tr = interpolating_spline(&q, &boundary(&inst), &k).unwrap();
        let starts = tr.segment_starts();
        let seg = ((frac * starts.len() as f64) as usize).min(starts.len() - 1);
        let t = starts[seg] + tr.durations()[seg] * 0.5;
        let eps = 1e-6;
        let (p, m) = (tr.eval(t + eps), tr.eval(t - eps));
        let s = tr.eval(t);
        for j in 0..q.cols() {
            let fd = (p.position[j] - m.position[j]) / (2.0 * eps);
            prop_assert!((fd - s.velocity[j]).abs() <= 1e-5 * s.velocity[j].abs().max(1.0));
            let fda = (p.velocity[j] - m.velocity[j]) / (2.0 * eps);
            prop_assert!((fda - s.acceleration[j]).abs() <= 1e-5 * s.acceleration[j].abs().max(1.0));
        }
    }

    #[test]
    fn lambda_monotonicity(inst in instance_strategy()) {
        let q = Waypoints::from_rows(&inst.q).unwrap();
        let k = build_time_vector(&inst.raw, inst.beta).unwrap();
        let b = boundary(&inst);
        let mut last_e = f64::INFINITY;
        let mut last_fit = -1.0;
        for lambda in [0.0, 0.01, 0.1, 1.0, 10.0, 100.0] {
            let w = StretchWeights::from_lambda(lambda, q.rows()).unwrap();
            let tr = min_stretch_spline(&q, &w, &b, &k).unwrap();
            let e = tr.stretch_energy();
            let s = tr.issued_positions();
            let fit: f64 = s.as_slice().iter().zip(q.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum();
            prop_assert!(e <= last_e + 1e-10 * last_e.abs().max(1.0));
            prop_assert!(fit >= last_fit - 1e-10);
            last_e = e;
            last_fit = fit;
        }
    }
}
