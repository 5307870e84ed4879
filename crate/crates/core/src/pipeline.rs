//! Per-frame orchestration: cold start, warm-started tracking, occluded
//! joint substitution and handedness routing.

use serde::{Deserialize, Serialize};

use crate::camera::{Camera, Rig};
use crate::error::{Error, Result};
use crate::geometry::{self, mat_vec, transpose};
use crate::kinematics::{forward_kinematics_unchecked, HandModel, Handedness, JointSet3D, PoseParams, NUM_KEYPOINTS};
use crate::objective::{Observation, SolverConfig, MIN_ACTIVE_JOINTS};
use crate::solver::{solve, CameraPixelErrors, SolveResult, Termination};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub solver: SolverConfig,
    /// Confidence given to joints filled in from the previous solution.
    pub substitution_confidence: f64,
    /// Consecutive unsolvable frames after which the track is dropped.
    pub max_stale_frames: usize,
    /// Warm start from the previous solution when one exists.
    pub tracking: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            solver: SolverConfig::default(),
            substitution_confidence: 0.15,
            max_stale_frames: 30,
            tracking: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if !(self.solver.confidence_threshold..=1.0).contains(&self.substitution_confidence) {
            return Err(Error::InvalidConfig(
                "substitution_confidence must lie in [confidence_threshold, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// What a hand track remembers between frames.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrackState {
    pub last_pose: Option<PoseParams>,
    pub last_joints: Option<JointSet3D>,
    pub frames_since_success: usize,
}

impl TrackState {
    pub fn new() -> Self {
        TrackState::default()
    }

    pub fn from_pose(model: &HandModel, pose: PoseParams) -> Self {
        TrackState {
            last_pose: Some(pose),
            last_joints: Some(forward_kinematics_unchecked(model, &pose)),
            frames_since_success: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.last_pose.is_none()
    }
}

/// All observations of one hand in one frame, one per camera.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameInput {
    pub frame_id: u64,
    pub observations: Vec<Observation>,
}

impl FrameInput {
    pub fn hand_id(&self) -> Option<&str> {
        self.observations.first().map(|o| o.hand_id.as_str())
    }

    pub fn handedness(&self) -> Option<Handedness> {
        self.observations.first().map(|o| o.handedness)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.observations.first() else {
            return Err(Error::InvalidObservation(format!("frame {} has no observations", self.frame_id)));
        };
        for o in &self.observations {
            o.validate()?;
            if o.hand_id != first.hand_id || o.handedness != first.handedness {
                return Err(Error::InvalidObservation(format!(
                    "frame {} mixes hands `{}` and `{}`",
                    self.frame_id, first.hand_id, o.hand_id
                )));
            }
        }
        Ok(())
    }
}

/// Initial pose from one view: rest articulation, palm facing the camera,
/// wrist on the back-projected ray of its detection at a depth from
/// similar triangles (`focal * hand span / keypoint bounding-box diagonal`).
pub fn cold_start(
    model: &HandModel,
    camera: &Camera,
    observation: &Observation,
    config: &SolverConfig,
) -> Result<PoseParams> {
    let threshold = config.confidence_threshold;
    let confident: Vec<_> = observation.joints.iter().enumerate().filter(|(_, j)| j.p >= threshold).collect();
    if confident.len() < MIN_ACTIVE_JOINTS {
        return Err(Error::Unsolvable {
            active: confident.len(),
            required: MIN_ACTIVE_JOINTS,
        });
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for (_, j) in &confident {
        lo = [lo[0].min(j.u), lo[1].min(j.v)];
        hi = [hi[0].max(j.u), hi[1].max(j.v)];
    }
    let diagonal = (hi[0] - lo[0]).hypot(hi[1] - lo[1]);
    if diagonal <= 0.0 {
        return Err(Error::Unsolvable {
            active: confident.len(),
            required: MIN_ACTIVE_JOINTS,
        });
    }
    let depth = camera.mean_focal() * model.hand_span() / diagonal;

    let anchor = if observation.joints[0].p >= threshold {
        (observation.joints[0].u, observation.joints[0].v)
    } else {
        let n = confident.len() as f64;
        let su: f64 = confident.iter().map(|(_, j)| j.u).sum();
        let sv: f64 = confident.iter().map(|(_, j)| j.v).sum();
        (su / n, sv / n)
    };
    let ray = [
        (anchor.0 - camera.center[0]) / camera.focal[0],
        (anchor.1 - camera.center[1]) / camera.focal[1],
        1.0,
    ];
    let in_camera = geometry::scale(ray, depth);
    let rt = transpose(&camera.rotation_matrix());
    let translation = mat_vec(&rt, geometry::sub(in_camera, camera.translation));

    Ok(PoseParams {
        translation,
        rotation: camera.rotation.conjugate(),
        articulation: model.rest_articulation(),
    })
}

/// Fills joints below the confidence threshold with their last known 3D
/// position carried along by the root motion from the previous pose to
/// `current`, reprojected into `camera`, at the substitution confidence.
pub fn substitute_occluded(
    observation: &Observation,
    state: &TrackState,
    current: &PoseParams,
    camera: &Camera,
    config: &PipelineConfig,
) -> Observation {
    let mut out = observation.clone();
    let (Some(last_pose), Some(last_joints)) = (state.last_pose.as_ref(), state.last_joints.as_ref()) else {
        return out;
    };
    let last_inv = transpose(&last_pose.rotation.to_matrix());
    let current_rot = current.rotation.to_matrix();
    for (i, kp) in out.joints.iter_mut().enumerate() {
        if kp.p >= config.solver.confidence_threshold {
            continue;
        }
        let local = mat_vec(&last_inv, geometry::sub(last_joints.points[i], last_pose.translation));
        let carried = geometry::add(mat_vec(&current_rot, local), current.translation);
        if let Some([u, v]) = camera.project_point(carried) {
            kp.u = u;
            kp.v = v;
            kp.p = config.substitution_confidence;
        }
    }
    out
}

/// Picks the skeleton matching the frame's handedness.
pub fn route_handedness<'m>(
    model_left: &'m HandModel,
    model_right: &'m HandModel,
    frame: &FrameInput,
) -> Result<&'m HandModel> {
    let handedness = frame
        .handedness()
        .ok_or_else(|| Error::MissingHandedness(format!("frame {}", frame.frame_id)))?;
    let model = match handedness {
        Handedness::Left => model_left,
        Handedness::Right => model_right,
    };
    if model.handedness() != handedness {
        return Err(Error::InvalidModel(format!(
            "{handedness} frame routed to a {} model",
            model.handedness()
        )));
    }
    Ok(model)
}

fn stale_result(model: &HandModel, frame: &FrameInput, pose: PoseParams) -> SolveResult {
    SolveResult {
        joints3d: forward_kinematics_unchecked(model, &pose),
        pose,
        final_cost: 0.0,
        initial_cost: 0.0,
        iterations: 0,
        termination: Termination::Unsolvable,
        per_joint_pixel_error: frame
            .observations
            .iter()
            .map(|o| CameraPixelErrors {
                camera_id: o.camera_id.clone(),
                errors: [None; NUM_KEYPOINTS],
            })
            .collect(),
    }
}

/// Solves one frame of one hand and advances its track.
///
/// With a previous pose the solve is warm-started from it; otherwise the
/// first observation's camera provides a cold start. When the frame is
/// solvable and some joints were gated, they are filled in from the track
/// and the fit is refined once. An unsolvable frame with a live track
/// returns the previous pose with [`Termination::Unsolvable`].
pub fn estimate_frame(
    model: &HandModel,
    rig: &Rig,
    frame: &FrameInput,
    state: &TrackState,
    config: &PipelineConfig,
) -> Result<(SolveResult, TrackState)> {
    config.validate()?;
    frame.validate()?;
    let state = if state.frames_since_success >= config.max_stale_frames || !config.tracking {
        TrackState::new()
    } else {
        state.clone()
    };
    let observations = &frame.observations;

    let Some(last_pose) = state.last_pose else {
        let camera = rig.camera(&observations[0].camera_id)?;
        let initial = cold_start(model, camera, &observations[0], &config.solver)?;
        let result = solve(model, rig, observations, &initial, &config.solver)?;
        let next = TrackState::from_pose(model, result.pose);
        return Ok((result, next));
    };

    let first = match solve(model, rig, observations, &last_pose, &config.solver) {
        Ok(r) => r,
        Err(Error::Unsolvable { .. }) => {
            let mut next = state.clone();
            next.frames_since_success += 1;
            return Ok((stale_result(model, frame, last_pose), next));
        }
        Err(e) => return Err(e),
    };

    let threshold = config.solver.confidence_threshold;
    let any_gated = observations.iter().any(|o| o.joints.iter().any(|j| j.p < threshold));
    let result = if any_gated && state.last_joints.is_some() {
        let substituted = observations
            .iter()
            .map(|o| {
                let camera = rig.camera(&o.camera_id)?;
                Ok(substitute_occluded(o, &state, &first.pose, camera, config))
            })
            .collect::<Result<Vec<_>>>()?;
        let refined = solve(model, rig, &substituted, &first.pose, &config.solver)?;
        SolveResult {
            iterations: first.iterations + refined.iterations,
            ..refined
        }
    } else {
        first
    };
    let next = TrackState::from_pose(model, result.pose);
    Ok((result, next))
}
