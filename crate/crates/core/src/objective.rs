//! Confidence-weighted multi-view reprojection objective.
//!
//! Each active joint contributes the pair `(p^3 (x - u), p^3 (y - v))`,
//! where `(x, y)` is the projected model keypoint and `(u, v, p)` the
//! detection. Joints with `p` below the confidence threshold, or whose
//! model keypoint falls behind the camera, contribute nothing. The cost is
//! the plain sum of squares over all cameras.

use serde::{Deserialize, Serialize};

use crate::camera::{Camera, Rig};
use crate::error::{Error, Result};
use crate::geometry::{lift_mat, Mat3};
use crate::kinematics::{forward_kinematics_generic, HandModel, Handedness, PoseParams, NUM_ARTICULATIONS, NUM_KEYPOINTS};
use crate::scalar::Scalar;

/// Fewer active joints than this makes a frame unsolvable.
pub const MIN_ACTIVE_JOINTS: usize = 3;

/// One detected 2D joint: pixel position and detector confidence in [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub u: f64,
    pub v: f64,
    pub p: f64,
}

impl Keypoint {
    pub const fn new(u: f64, v: f64, p: f64) -> Self {
        Keypoint { u, v, p }
    }
}

/// The 21 detected joints of one hand in one camera.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub joints: [Keypoint; NUM_KEYPOINTS],
    pub hand_id: String,
    pub handedness: Handedness,
    pub camera_id: String,
}

impl Observation {
    pub fn new(
        joints: [Keypoint; NUM_KEYPOINTS],
        hand_id: impl Into<String>,
        handedness: Handedness,
        camera_id: impl Into<String>,
    ) -> Result<Self> {
        let obs = Observation {
            joints,
            hand_id: hand_id.into(),
            handedness,
            camera_id: camera_id.into(),
        };
        obs.validate()?;
        Ok(obs)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, j) in self.joints.iter().enumerate() {
            if !(j.u.is_finite() && j.v.is_finite()) {
                return Err(Error::InvalidObservation(format!("joint {i} has non-finite pixel coordinates")));
            }
            if !(0.0..=1.0).contains(&j.p) {
                return Err(Error::InvalidObservation(format!(
                    "joint {i} confidence {} outside [0, 1]",
                    j.p
                )));
            }
        }
        Ok(())
    }

    pub fn confident_count(&self, threshold: f64) -> usize {
        self.joints.iter().filter(|j| j.p >= threshold).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Joints with confidence below this are ignored.
    pub confidence_threshold: f64,
    pub max_iterations: usize,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub cost_tolerance: f64,
    /// Stop when the tangent step norm falls below this.
    pub parameter_tolerance: f64,
    pub initial_damping: f64,
    /// Damping multiplier after a rejected step.
    pub damping_up_factor: f64,
    /// Damping multiplier after an accepted step.
    pub damping_down_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            confidence_threshold: 0.1,
            max_iterations: 50,
            cost_tolerance: 1e-8,
            parameter_tolerance: 1e-10,
            initial_damping: 1e-3,
            damping_up_factor: 10.0,
            damping_down_factor: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(0.0..1.0).contains(&self.confidence_threshold) {
            return bad("confidence_threshold must lie in [0, 1)");
        }
        if !(self.cost_tolerance > 0.0 && self.parameter_tolerance > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.initial_damping > 0.0 && self.initial_damping.is_finite()) {
            return bad("initial_damping must be positive");
        }
        if !(self.damping_up_factor > 1.0 && self.damping_up_factor.is_finite()) {
            return bad("damping_up_factor must exceed 1");
        }
        if !(self.damping_down_factor > 0.0 && self.damping_down_factor < 1.0) {
            return bad("damping_down_factor must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Weighted residual pair for one joint.
#[inline]
pub fn joint_residual(projected: [f64; 2], observed: &Keypoint) -> [f64; 2] {
    let w = observed.p * observed.p * observed.p;
    [(projected[0] - observed.u) * w, (projected[1] - observed.v) * w]
}

/// Stacked residuals in camera order, then joint order.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualVector {
    pub values: Vec<f64>,
    /// Camera ids in evaluation (rig) order.
    pub camera_ids: Vec<String>,
    /// Per camera, which joints produced a residual pair.
    pub active_mask: Vec<[bool; NUM_KEYPOINTS]>,
}

impl ResidualVector {
    pub fn active_count(&self) -> usize {
        self.values.len() / 2
    }
}

pub fn total_cost(residuals: &ResidualVector) -> f64 {
    residuals.values.iter().map(|r| r * r).sum()
}

/// Residuals of `pose` against `observations`. Errors on unknown cameras or
/// when fewer than [`MIN_ACTIVE_JOINTS`] joints are active.
pub fn build_residuals(
    model: &HandModel,
    pose: &PoseParams,
    rig: &Rig,
    observations: &[Observation],
    config: &SolverConfig,
) -> Result<ResidualVector> {
    pose.validate(model)?;
    let problem = Problem::new(model, rig, observations, config)?;
    let residuals = problem.residuals(pose);
    problem.check_solvable(&residuals)?;
    Ok(residuals)
}

/// Observations resolved against a rig, ready for repeated evaluation.
pub(crate) struct Problem<'a> {
    pub model: &'a HandModel,
    pub threshold: f64,
    /// (camera id, camera, observation) in rig order.
    pub views: Vec<(&'a str, &'a Camera, &'a Observation)>,
}

impl<'a> Problem<'a> {
    pub fn new(
        model: &'a HandModel,
        rig: &'a Rig,
        observations: &'a [Observation],
        config: &SolverConfig,
    ) -> Result<Self> {
        config.validate()?;
        let mut views = Vec::with_capacity(observations.len());
        for obs in observations {
            obs.validate()?;
            let idx = rig.index_of(&obs.camera_id)?;
            views.push((idx, obs));
        }
        // Stable: observations sharing a camera keep their input order.
        views.sort_by_key(|(idx, _)| *idx);
        let views = views
            .into_iter()
            .map(|(idx, obs)| {
                let rc = &rig.cameras()[idx];
                (rc.id.as_str(), &rc.camera, obs)
            })
            .collect();
        Ok(Problem {
            model,
            threshold: config.confidence_threshold,
            views,
        })
    }

    pub fn check_solvable(&self, residuals: &ResidualVector) -> Result<()> {
        let active = residuals.active_count();
        if active < MIN_ACTIVE_JOINTS {
            return Err(Error::Unsolvable {
                active,
                required: MIN_ACTIVE_JOINTS,
            });
        }
        Ok(())
    }

    /// Generic evaluation; appends residuals to `out` and returns the
    /// per-camera activity masks.
    pub fn evaluate<S: Scalar>(
        &self,
        translation: [S; 3],
        rotation: &Mat3<S>,
        articulation: &[S; NUM_ARTICULATIONS],
        out: &mut Vec<S>,
    ) -> Vec<[bool; NUM_KEYPOINTS]> {
        let points = forward_kinematics_generic(self.model, translation, rotation, articulation);
        let mut masks = Vec::with_capacity(self.views.len());
        for (_, camera, obs) in &self.views {
            let cam_rotation = camera.lifted_rotation::<S>();
            let mut mask = [false; NUM_KEYPOINTS];
            for (i, kp) in obs.joints.iter().enumerate() {
                if kp.p < self.threshold {
                    continue;
                }
                let (x, y, z) = camera.project_with(&cam_rotation, points[i]);
                if z.value() <= 0.0 {
                    continue;
                }
                let w = kp.p * kp.p * kp.p;
                out.push((x - S::constant(kp.u)).scale(w));
                out.push((y - S::constant(kp.v)).scale(w));
                mask[i] = true;
            }
            masks.push(mask);
        }
        masks
    }

    pub fn residuals(&self, pose: &PoseParams) -> ResidualVector {
        let rotation = lift_mat::<f64>(&pose.rotation.to_matrix());
        let mut values = Vec::with_capacity(2 * NUM_KEYPOINTS * self.views.len());
        let active_mask = self.evaluate(pose.translation, &rotation, &pose.articulation, &mut values);
        ResidualVector {
            values,
            camera_ids: self.views.iter().map(|(id, _, _)| id.to_string()).collect(),
            active_mask,
        }
    }

    /// Unweighted pixel distance for each active joint, per camera.
    pub fn pixel_errors(&self, pose: &PoseParams) -> Vec<[Option<f64>; NUM_KEYPOINTS]> {
        let points = crate::kinematics::forward_kinematics_unchecked(self.model, pose).points;
        self.views
            .iter()
            .map(|(_, camera, obs)| {
                let r = camera.rotation_matrix();
                let mut errs = [None; NUM_KEYPOINTS];
                for (i, kp) in obs.joints.iter().enumerate() {
                    if kp.p < self.threshold {
                        continue;
                    }
                    let (x, y, z) = camera.project_with(&r, points[i]);
                    if z > 0.0 {
                        errs[i] = Some((x - kp.u).hypot(y - kp.v));
                    }
                }
                errs
            })
            .collect()
    }
}
