//! Levenberg-Marquardt fitting of the hand pose to 2D detections.
//!
//! The pose is updated in a 26-dimensional tangent space: translation (mm),
//! a rotation vector applied on the left of the current orientation, and
//! the 20 finger angles. Jacobians come from forward-mode dual numbers
//! pushed through kinematics, extrinsics, distortion and weighting.
//!
//! Joint limits are enforced by projection: every trial pose is clamped
//! into the limit box and scored after clamping. Parameters sitting on a
//! bound whose descent direction points outward are frozen for that step.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::camera::Rig;
use crate::dual::{Dual, TANGENT_DIM};
use crate::error::{Error, Result};
use crate::geometry::{lift_mat, mat_mul, Mat3, Quat, Vec3};
use crate::kinematics::{
    clamp_to_limits, forward_kinematics_unchecked, HandModel, JointSet3D, PoseParams, NUM_ARTICULATIONS,
    NUM_KEYPOINTS,
};
use crate::objective::{total_cost, Observation, Problem, ResidualVector, SolverConfig, MIN_ACTIVE_JOINTS};
use crate::scalar::Scalar;

type Matrix26 = SMatrix<f64, TANGENT_DIM, TANGENT_DIM>;
type Vector26 = SVector<f64, TANGENT_DIM>;

const MIN_DAMPING: f64 = 1e-12;
const MAX_DAMPING: f64 = 1e16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    ConvergedByCost,
    ConvergedByStep,
    MaxIterations,
    Unsolvable,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::ConvergedByCost => "converged-by-cost",
            Termination::ConvergedByStep => "converged-by-step",
            Termination::MaxIterations => "max-iterations",
            Termination::Unsolvable => "unsolvable",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Termination::ConvergedByCost,
            Termination::ConvergedByStep,
            Termination::MaxIterations,
            Termination::Unsolvable,
        ]
        .into_iter()
        .find(|t| t.as_str() == s)
    }

    pub fn is_converged(self) -> bool {
        matches!(self, Termination::ConvergedByCost | Termination::ConvergedByStep)
    }
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Unweighted reprojection error of each joint in one camera; `None` for
/// joints that were not active at the final pose.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraPixelErrors {
    pub camera_id: String,
    pub errors: [Option<f64>; NUM_KEYPOINTS],
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub pose: PoseParams,
    pub joints3d: JointSet3D,
    pub final_cost: f64,
    pub initial_cost: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub per_joint_pixel_error: Vec<CameraPixelErrors>,
}

/// `exp(delta) * q`, renormalized. A zero increment returns `q` untouched.
pub fn step_quaternion(q: Quat, delta: Vec3) -> Quat {
    if delta == [0.0; 3] {
        return q;
    }
    Quat::from_rotation_vector(delta).mul(q).normalized()
}

/// Active residuals at a pose and their derivatives along the tangent.
#[derive(Clone, Debug, PartialEq)]
pub struct Jacobian {
    pub residuals: ResidualVector,
    /// One row per residual entry.
    pub rows: Vec<[f64; TANGENT_DIM]>,
}

impl Jacobian {
    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.rows.len(), TANGENT_DIM, |r, c| self.rows[r][c])
    }
}

pub fn jacobian(
    model: &HandModel,
    rig: &Rig,
    observations: &[Observation],
    pose: &PoseParams,
    config: &SolverConfig,
) -> Result<Jacobian> {
    pose.validate(model)?;
    let problem = Problem::new(model, rig, observations, config)?;
    let jac = evaluate_jacobian(&problem, pose);
    problem.check_solvable(&jac.residuals)?;
    Ok(jac)
}

pub(crate) fn evaluate_jacobian(problem: &Problem<'_>, pose: &PoseParams) -> Jacobian {
    let translation: [Dual; 3] = std::array::from_fn(|i| Dual::variable(pose.translation[i], i));
    let delta: [Dual; 3] = std::array::from_fn(|i| Dual::variable(0.0, 3 + i));
    let one = Dual::one();
    // First-order left perturbation (I + [delta]x) R.
    let perturb: Mat3<Dual> = [
        [one, -delta[2], delta[1]],
        [delta[2], one, -delta[0]],
        [-delta[1], delta[0], one],
    ];
    let rotation = mat_mul(&perturb, &lift_mat(&pose.rotation.to_matrix()));
    let articulation: [Dual; NUM_ARTICULATIONS] =
        std::array::from_fn(|j| Dual::variable(pose.articulation[j], 6 + j));

    let mut out = Vec::with_capacity(2 * NUM_KEYPOINTS * problem.views.len());
    let active_mask = problem.evaluate(translation, &rotation, &articulation, &mut out);
    Jacobian {
        residuals: ResidualVector {
            values: out.iter().map(|d| d.value).collect(),
            camera_ids: problem.views.iter().map(|(id, _, _)| id.to_string()).collect(),
            active_mask,
        },
        rows: out.iter().map(|d| d.partials).collect(),
    }
}

fn normal_equations(jac: &Jacobian) -> (Matrix26, Vector26) {
    let mut a = Matrix26::zeros();
    let mut g = Vector26::zeros();
    for (row, &r) in jac.rows.iter().zip(&jac.residuals.values) {
        for i in 0..TANGENT_DIM {
            let ri = row[i];
            if ri == 0.0 {
                continue;
            }
            g[i] += ri * r;
            for j in i..TANGENT_DIM {
                a[(i, j)] += ri * row[j];
            }
        }
    }
    for i in 0..TANGENT_DIM {
        for j in 0..i {
            a[(i, j)] = a[(j, i)];
        }
    }
    (a, g)
}

/// Articulation slots pinned at a bound with the descent direction pointing out.
fn frozen_mask(model: &HandModel, pose: &PoseParams, gradient: &Vector26) -> [bool; TANGENT_DIM] {
    let mut frozen = [false; TANGENT_DIM];
    for (j, limit) in model.limits().iter().enumerate() {
        let a = pose.articulation[j];
        let g = gradient[6 + j];
        if (a <= limit.lo && g > 0.0) || (a >= limit.hi && g < 0.0) {
            frozen[6 + j] = true;
        }
    }
    frozen
}

fn damped_step(
    a: &Matrix26,
    g: &Vector26,
    lambda: f64,
    frozen: &[bool; TANGENT_DIM],
) -> Option<Vector26> {
    let mut m = *a;
    let mut rhs = -g;
    let max_diag = (0..TANGENT_DIM).map(|i| a[(i, i)]).fold(0.0, f64::max);
    let floor = (max_diag * 1e-12).max(f64::MIN_POSITIVE);
    for i in 0..TANGENT_DIM {
        if frozen[i] {
            for j in 0..TANGENT_DIM {
                m[(i, j)] = 0.0;
                m[(j, i)] = 0.0;
            }
            m[(i, i)] = 1.0;
            rhs[i] = 0.0;
        } else {
            m[(i, i)] += lambda * a[(i, i)].max(floor);
        }
    }
    let step = m.cholesky()?.solve(&rhs);
    step.iter().all(|v| v.is_finite()).then_some(step)
}

/// True when every joint active in `current` is still active in `candidate`.
fn keeps_active_set(current: &ResidualVector, candidate: &ResidualVector) -> bool {
    current
        .active_mask
        .iter()
        .zip(&candidate.active_mask)
        .all(|(a, b)| a.iter().zip(b).all(|(&was, &is)| !was || is))
}

/// Fits the pose to the observations starting from `initial`.
pub fn solve(
    model: &HandModel,
    rig: &Rig,
    observations: &[Observation],
    initial: &PoseParams,
    config: &SolverConfig,
) -> Result<SolveResult> {
    initial.validate(model)?;
    let problem = Problem::new(model, rig, observations, config)?;
    let residuals = problem.residuals(initial);
    problem.check_solvable(&residuals)?;
    let initial_cost = total_cost(&residuals);
    if !initial_cost.is_finite() {
        return Err(Error::NonFiniteCost);
    }

    let mut pose = *initial;
    let mut current = residuals;
    let mut cost = initial_cost;
    let mut lambda = config.initial_damping;
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;
    let mut linearization: Option<(Matrix26, Vector26)> = None;

    while iterations < config.max_iterations {
        if cost == 0.0 {
            termination = Termination::ConvergedByCost;
            break;
        }
        let (a, g) = linearization.get_or_insert_with(|| {
            let jac = evaluate_jacobian(&problem, &pose);
            debug_assert_eq!(jac.residuals.values, current.values);
            normal_equations(&jac)
        });
        iterations += 1;

        let frozen = frozen_mask(model, &pose, g);
        let Some(delta) = damped_step(a, g, lambda, &frozen) else {
            lambda *= config.damping_up_factor;
            if lambda > MAX_DAMPING {
                termination = Termination::ConvergedByStep;
                break;
            }
            continue;
        };
        if delta.norm() < config.parameter_tolerance {
            termination = Termination::ConvergedByStep;
            break;
        }

        let candidate = clamp_to_limits(model, &pose.retract(delta.as_slice()))?;
        if candidate == pose {
            termination = Termination::ConvergedByStep;
            break;
        }
        let trial = problem.residuals(&candidate);
        let trial_cost = total_cost(&trial);
        let acceptable = trial.active_count() >= MIN_ACTIVE_JOINTS
            && trial_cost.is_finite()
            && trial_cost < cost
            && keeps_active_set(&current, &trial);

        if acceptable {
            let relative_decrease = (cost - trial_cost) / cost;
            pose = candidate;
            current = trial;
            cost = trial_cost;
            linearization = None;
            lambda = (lambda * config.damping_down_factor).max(MIN_DAMPING);
            if relative_decrease < config.cost_tolerance {
                termination = Termination::ConvergedByCost;
                break;
            }
        } else {
            lambda *= config.damping_up_factor;
            if lambda > MAX_DAMPING {
                termination = Termination::ConvergedByStep;
                break;
            }
        }
    }

    let per_joint_pixel_error = problem
        .views
        .iter()
        .zip(problem.pixel_errors(&pose))
        .map(|((id, _, _), errors)| CameraPixelErrors {
            camera_id: id.to_string(),
            errors,
        })
        .collect();

    Ok(SolveResult {
        joints3d: forward_kinematics_unchecked(model, &pose),
        pose,
        final_cost: cost,
        initial_cost,
        iterations,
        termination,
        per_joint_pixel_error,
    })
}
