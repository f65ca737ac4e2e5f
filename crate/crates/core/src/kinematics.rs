//! Forward kinematics, geometric Jacobian and damped-least-squares IK.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, Isometry3, Translation3, Unit, UnitQuaternion, Vector3, Vector6};

use crate::robot::{JointType, Origin, RobotConfig};
use crate::{Error, JointVector, Result};

/// End-effector pose in the base frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub translation: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn new(translation: Vector3<f64>, rotation: UnitQuaternion<f64>) -> Self {
        Self { translation, rotation }
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Self { translation: iso.translation.vector, rotation: iso.rotation }
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.translation), self.rotation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSettings {
    pub damping: f64,
    pub max_iters: usize,
    pub pos_tol: f64,
    pub rot_tol: f64,
    /// Largest per-joint change in one iteration.
    pub step_clamp: f64,
    /// Ignore orientation, for arms with fewer than six joints.
    pub position_only: bool,
}

impl Default for IkSettings {
    fn default() -> Self {
        Self {
            damping: 0.05,
            max_iters: 200,
            pos_tol: 1e-7,
            rot_tol: 1e-6,
            step_clamp: 0.2,
            position_only: false,
        }
    }
}

/// Outcome of an IK query. Failure to converge is a value, not an error.
#[derive(Debug, Clone, PartialEq)]
pub enum IkOutcome {
    Converged { q: JointVector, iterations: usize },
    Unreachable { best: JointVector, position_error: f64 },
}

impl IkOutcome {
    pub fn solution(&self) -> Option<&JointVector> {
        match self {
            IkOutcome::Converged { q, .. } => Some(q),
            IkOutcome::Unreachable { .. } => None,
        }
    }
}

fn origin_isometry(o: &Origin) -> Isometry3<f64> {
    Isometry3::from_parts(
        Translation3::new(o.xyz[0], o.xyz[1], o.xyz[2]),
        UnitQuaternion::from_euler_angles(o.rpy[0], o.rpy[1], o.rpy[2]),
    )
}

fn axis_of(a: &[f64; 3]) -> Unit<Vector3<f64>> {
    Unit::try_new(Vector3::new(a[0], a[1], a[2]), 1e-12).unwrap_or_else(Vector3::x_axis)
}

fn check_dof(config: &RobotConfig, q: &[f64]) -> Result<()> {
    if q.len() != config.dof() {
        return Err(Error::DimensionMismatch { expected: config.dof(), found: q.len() });
    }
    Ok(())
}

/// Frames before each joint's motion plus the tip frame.
fn frames(config: &RobotConfig, q: &[f64]) -> (Vec<Isometry3<f64>>, Isometry3<f64>) {
    let mut t = Isometry3::identity();
    let mut pre = Vec::with_capacity(config.chain.len());
    for j in &config.chain {
        t *= origin_isometry(&j.origin);
        pre.push(t);
        if let Some(i) = j.dof_index {
            let axis = axis_of(&j.axis);
            match j.joint_type {
                JointType::Revolute | JointType::Continuous => {
                    t *= UnitQuaternion::from_axis_angle(&axis, q[i]);
                }
                JointType::Prismatic => t *= Translation3::from(axis.into_inner() * q[i]),
                JointType::Fixed => {}
            }
        }
    }
    (pre, t)
}

/// Tip pose for joint vector `q`.
pub fn forward_kinematics(config: &RobotConfig, q: &[f64]) -> Result<Pose> {
    check_dof(config, q)?;
    Ok(Pose::from_isometry(&frames(config, q).1))
}

/// Geometric Jacobian, rows `[linear; angular]`, one column per DoF.
pub fn jacobian(config: &RobotConfig, q: &[f64]) -> Result<DMatrix<f64>> {
    check_dof(config, q)?;
    let (pre, tip) = frames(config, q);
    let pe = tip.translation.vector;
    let mut jac = DMatrix::zeros(6, config.dof());
    for (j, frame) in config.chain.iter().zip(&pre) {
        let Some(i) = j.dof_index else { continue };
        let z = frame.rotation * axis_of(&j.axis).into_inner();
        let (lin, ang) = match j.joint_type {
            JointType::Revolute | JointType::Continuous => {
                (z.cross(&(pe - frame.translation.vector)), z)
            }
            JointType::Prismatic => (z, Vector3::zeros()),
            JointType::Fixed => continue,
        };
        jac.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
        jac.fixed_view_mut::<3, 1>(3, i).copy_from(&ang);
    }
    Ok(jac)
}

fn pose_error(target: &Pose, current: &Pose) -> Vector6<f64> {
    let dp = target.translation - current.translation;
    let dr = (target.rotation * current.rotation.inverse()).scaled_axis();
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

/// Damped least squares from `seed`; iterates stay inside the position limits.
pub fn ik_solve(
    config: &RobotConfig,
    target: &Pose,
    seed: &[f64],
    settings: &IkSettings,
) -> Result<IkOutcome> {
    check_dof(config, seed)?;
    let n = config.dof();
    let mut q: JointVector = seed.to_vec();
    config.limits.clamp_position(&mut q);
    let rows = if settings.position_only { 3 } else { 6 };
    for iter in 0..=settings.max_iters {
        let cur = forward_kinematics(config, &q)?;
        let e = pose_error(target, &cur);
        let ep = e.fixed_rows::<3>(0).norm();
        let er = e.fixed_rows::<3>(3).norm();
        if ep < settings.pos_tol && (settings.position_only || er < settings.rot_tol) {
            return Ok(IkOutcome::Converged { q, iterations: iter });
        }
        if iter == settings.max_iters {
            return Ok(IkOutcome::Unreachable { best: q, position_error: ep });
        }
        let jac = jacobian(config, &q)?;
        let j = jac.rows(0, rows).into_owned();
        let err = DVector::from_iterator(rows, e.iter().take(rows).copied());
        // Damping fades with the error so the last iterations are Gauss-Newton steps.
        let norm = err.norm();
        let lambda2 = settings.damping * settings.damping * norm.min(1.0) + 1e-12;
        let jjt = &j * j.transpose() + DMatrix::identity(rows, rows) * lambda2;
        let Some(y) = jjt.lu().solve(&err) else {
            return Ok(IkOutcome::Unreachable { best: q, position_error: ep });
        };
        let mut dq = j.transpose() * y;
        let peak = dq.amax();
        if peak > settings.step_clamp {
            dq *= settings.step_clamp / peak;
        }
        for k in 0..n {
            q[k] += dq[k];
        }
        config.limits.clamp_position(&mut q);
    }
    unreachable!("loop returns on its last iteration")
}
