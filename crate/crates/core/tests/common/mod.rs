//! Test oracles built without the crate's band machinery.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Dense cubic spline for one joint: `[a, b, c, d]` per augmented segment.
pub struct DenseSpline {
    pub h: Vec<f64>,
    pub coeffs: Vec<[f64; 4]>,
}

impl DenseSpline {
    pub fn eval(&self, mut t: f64) -> (f64, f64, f64) {
        let last = self.h.len() - 1;
        for (k, &hk) in self.h.iter().enumerate() {
            if t <= hk || k == last {
                let [a, b, c, d] = self.coeffs[k];
                return (
                    a + b * t + c * t * t + d * t * t * t,
                    b + 2.0 * c * t + 3.0 * d * t * t,
                    2.0 * c + 6.0 * d * t,
                );
            }
            t -= hk;
        }
        unreachable!()
    }

    /// Composite Simpson on squared acceleration, `panels` per segment.
    pub fn simpson_energy(&self, panels: usize) -> f64 {
        let mut total = 0.0;
        for (k, &hk) in self.h.iter().enumerate() {
            let [_, _, c, d] = self.coeffs[k];
            let f = |t: f64| (2.0 * c + 6.0 * d * t).powi(2);
            let n = 2 * panels;
            let dx = hk / n as f64;
            let mut s = f(0.0) + f(hk);
            for i in 1..n {
                s += f(i as f64 * dx) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            total += s * dx / 3.0;
        }
        total
    }
}

/// Augmented durations written out directly from the split rule.
pub fn augment(raw: &[f64], beta: f64) -> Vec<f64> {
    let n = raw.len();
    if n == 1 {
        return vec![beta * raw[0] / 2.0, (1.0 - beta) * raw[0], beta * raw[0] / 2.0];
    }
    let mut h = vec![beta * raw[0], (1.0 - beta) * raw[0]];
    h.extend_from_slice(&raw[1..n - 1]);
    h.push((1.0 - beta) * raw[n - 1]);
    h.push(beta * raw[n - 1]);
    h
}

/// Global solve of every interpolation, continuity and boundary equation.
/// `q` lists the issued positions, `bnd` is `[v0, a0, vf, af]`.
pub fn dense_spline(q: &[f64], raw: &[f64], beta: f64, bnd: [f64; 4]) -> DenseSpline {
    let h = augment(raw, beta);
    let big_n = h.len();
    let dim = 4 * big_n;
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    let mut r = DVector::<f64>::zeros(dim);
    let mut row = 0;
    let col = |k: usize, c: usize| 4 * k + c;
    // Continuity of s, s', s'' at interior knots.
    for k in 0..big_n - 1 {
        let t = h[k];
        let vals = [[1.0, t, t * t, t * t * t], [0.0, 1.0, 2.0 * t, 3.0 * t * t], [0.0, 0.0, 2.0, 6.0 * t]];
        for (deriv, v) in vals.iter().enumerate() {
            for c in 0..4 {
                m[(row, col(k, c))] = v[c];
            }
            let next = match deriv {
                0 => col(k + 1, 0),
                1 => col(k + 1, 1),
                _ => col(k + 1, 2),
            };
            m[(row, next)] = -if deriv == 2 { 2.0 } else { 1.0 };
            row += 1;
        }
    }
    // Interpolation at issued knots: 0, 2..N-2, N.
    let mut issued: Vec<usize> = vec![0];
    issued.extend(2..big_n - 1);
    issued.push(big_n);
    for (i, &k) in issued.iter().enumerate() {
        if k < big_n {
            m[(row, col(k, 0))] = 1.0;
        } else {
            let t = h[big_n - 1];
            for (c, v) in [1.0, t, t * t, t * t * t].iter().enumerate() {
                m[(row, col(big_n - 1, c))] = *v;
            }
        }
        r[row] = q[i];
        row += 1;
    }
    // Boundary velocity and acceleration.
    m[(row, col(0, 1))] = 1.0;
    r[row] = bnd[0];
    row += 1;
    m[(row, col(0, 2))] = 2.0;
    r[row] = bnd[1];
    row += 1;
    let t = h[big_n - 1];
    let k = big_n - 1;
    m[(row, col(k, 1))] = 1.0;
    m[(row, col(k, 2))] = 2.0 * t;
    m[(row, col(k, 3))] = 3.0 * t * t;
    r[row] = bnd[2];
    row += 1;
    m[(row, col(k, 2))] = 2.0;
    m[(row, col(k, 3))] = 6.0 * t;
    r[row] = bnd[3];
    row += 1;
    assert_eq!(row, dim);
    let x = m.lu().solve(&r).expect("dense spline system singular");
    DenseSpline { h, coeffs: (0..big_n).map(|k| [x[4 * k], x[4 * k + 1], x[4 * k + 2], x[4 * k + 3]]).collect() }
}

/// Brute-force minimizer of `½Σw(S−Q)² + ½λ·∫s̈²` for one joint.
///
/// The objective is quadratic in the free knot values, so its Hessian and
/// gradient are recovered exactly from a handful of evaluations. Entries of
/// `w` equal to infinity pin the knot to `q`.
pub fn brute_force_min_stretch(q: &[f64], w: &[f64], lambda: f64, raw: &[f64], beta: f64, bnd: [f64; 4]) -> Vec<f64> {
    let free: Vec<usize> = (0..q.len()).filter(|&i| w[i].is_finite()).collect();
    let objective = |x: &[f64]| {
        let mut s = q.to_vec();
        for (k, &i) in free.iter().enumerate() {
            s[i] = x[k];
        }
        let fit: f64 = free.iter().map(|&i| w[i] * (s[i] - q[i]).powi(2)).sum();
        0.5 * fit + 0.5 * lambda * dense_spline(&s, raw, beta, bnd).simpson_energy(1)
    };
    let nf = free.len();
    let zero = vec![0.0; nf];
    let f0 = objective(&zero);
    let unit = |i: usize| {
        let mut e = vec![0.0; nf];
        e[i] = 1.0;
        e
    };
    let fi: Vec<f64> = (0..nf).map(|i| objective(&unit(i))).collect();
    let mut hess = DMatrix::<f64>::zeros(nf, nf);
    for i in 0..nf {
        for j in 0..nf {
            let mut e = unit(i);
            e[j] += 1.0;
            hess[(i, j)] = objective(&e) - fi[i] - fi[j] + f0;
        }
    }
    let hsym = (&hess + hess.transpose()) * 0.5;
    let g = DVector::from_iterator(nf, (0..nf).map(|i| fi[i] - f0 - 0.5 * hsym[(i, i)]));
    let x = hsym.lu().solve(&(-g)).expect("oracle Hessian singular");
    let mut s = q.to_vec();
    for (k, &i) in free.iter().enumerate() {
        s[i] = x[k];
    }
    s
}

pub fn dense(m: &teleop_otg_core::band::BandMatrix) -> DMatrix<f64> {
    let n = m.dim();
    DMatrix::from_fn(n, n, |i, j| m.get(i, j))
}

/// Random instance: raw durations, issued positions (rows = knots), boundary rows.
#[derive(Debug, Clone)]
pub struct Instance {
    pub raw: Vec<f64>,
    pub beta: f64,
    pub q: Vec<Vec<f64>>,
    pub bnd: [Vec<f64>; 4],
}

pub fn random_instance(rng: &mut ChaCha8Rng, max_segments: usize, max_dof: usize) -> Instance {
    let n = rng.gen_range(1..=max_segments);
    let dof = rng.gen_range(1..=max_dof);
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..2.0)).collect();
    let beta = rng.gen_range(0.1..0.9);
    let q = (0..=n).map(|_| (0..dof).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let mut v = || (0..dof).map(|_| rng.gen_range(-1.5..1.5)).collect::<Vec<f64>>();
    let bnd = [v(), v(), v(), v()];
    Instance { raw, beta, q, bnd }
}

/// Planar two-link arm: unit links along x, rotations about z, plus a fixed flange.
#[allow(clippy::approx_constant)]
pub fn planar_config(velocity: f64, accel_scale: f64) -> teleop_otg_core::robot::RobotConfig {
    use teleop_otg_core::robot::*;
    let link = |name: &str, parent: &str, child: &str, x: f64, t: JointType| ModelJoint {
        name: name.into(),
        joint_type: t,
        parent: parent.into(),
        child: child.into(),
        origin: Origin { xyz: [x, 0.0, 0.0], rpy: [0.0; 3] },
        axis: [0.0, 0.0, 1.0],
        limits: (t != JointType::Fixed).then_some(ModelLimits {
            lower: -3.1416,
            upper: 3.1416,
            velocity,
            effort: 10.0,
        }),
    };
    let model = RobotModel {
        name: "planar".into(),
        links: vec!["base".into(), "l1".into(), "l2".into(), "flange".into()],
        joints: vec![
            link("j1", "base", "l1", 0.0, JointType::Revolute),
            link("j2", "l1", "l2", 1.0, JointType::Revolute),
            link("flange", "l2", "flange", 1.0, JointType::Fixed),
        ],
    };
    generate_config(&model, "base", "flange", accel_scale).unwrap()
}

/// Seven revolute joints with the link offsets of a common research arm.
pub fn seven_dof_model() -> teleop_otg_core::robot::RobotModel {
    use core::f64::consts::FRAC_PI_2 as H;
    use teleop_otg_core::robot::*;
    #[allow(clippy::type_complexity)]
    let table: [([f64; 3], [f64; 3], f64, f64, f64); 7] = [
        ([0.0, 0.0, 0.333], [0.0, 0.0, 0.0], -2.897, 2.897, 2.175),
        ([0.0, 0.0, 0.0], [-H, 0.0, 0.0], -1.7628, 1.7628, 2.175),
        ([0.0, -0.316, 0.0], [H, 0.0, 0.0], -2.897, 2.897, 2.175),
        ([0.0825, 0.0, 0.0], [H, 0.0, 0.0], -3.0718, -0.0698, 2.175),
        ([-0.0825, 0.384, 0.0], [-H, 0.0, 0.0], -2.897, 2.897, 2.61),
        ([0.0, 0.0, 0.0], [H, 0.0, 0.0], -0.0175, 3.7525, 2.61),
        ([0.088, 0.0, 0.0], [H, 0.0, 0.0], -2.897, 2.897, 2.61),
    ];
    let mut links = vec!["link0".to_string()];
    let mut joints = Vec::new();
    for (i, (xyz, rpy, lower, upper, velocity)) in table.into_iter().enumerate() {
        links.push(format!("link{}", i + 1));
        joints.push(ModelJoint {
            name: format!("joint{}", i + 1),
            joint_type: JointType::Revolute,
            parent: format!("link{i}"),
            child: format!("link{}", i + 1),
            origin: Origin { xyz, rpy },
            axis: [0.0, 0.0, 1.0],
            limits: Some(ModelLimits { lower, upper, velocity, effort: 87.0 }),
        });
    }
    links.push("flange".into());
    joints.push(ModelJoint {
        name: "joint8".into(),
        joint_type: JointType::Fixed,
        parent: "link7".into(),
        child: "flange".into(),
        origin: Origin { xyz: [0.0, 0.0, 0.107], rpy: [0.0; 3] },
        axis: [0.0, 0.0, 1.0],
        limits: None,
    });
    RobotModel { name: "arm7".into(), links, joints }
}
