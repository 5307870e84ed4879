//! Absolute 3D hand pose from 2D keypoint detections in calibrated views.
//!
//! A 26-DoF kinematic hand model is fitted to confidence-weighted 2D joint
//! detections from one or more cameras by Levenberg-Marquardt, with exact
//! Jacobians from forward-mode dual numbers. Around the solver sit a
//! tracking pipeline, a synthetic ground-truth generator, file formats and
//! evaluation metrics.

pub mod camera;
pub mod dual;
pub mod error;
pub mod geometry;
pub mod kinematics;
pub mod objective;
pub mod scalar;
pub mod solver;

pub use camera::{identity_view, project, Camera, Distortion, Projection2D, Rig, RigCamera};
pub use error::{Error, Result};
pub use geometry::Quat;
pub use kinematics::{
    clamp_to_limits, forward_kinematics, mirror_model, Bone, HandModel, Handedness, JointLimit, JointSet3D,
    PoseParams,
};
pub use objective::{build_residuals, joint_residual, total_cost, Keypoint, Observation, ResidualVector, SolverConfig};
pub use solver::{jacobian, solve, step_quaternion, CameraPixelErrors, Jacobian, SolveResult, Termination};

pub mod batch;
pub mod gradcheck;
pub mod io;
pub mod metrics;
pub mod par;
pub mod pipeline;
pub mod synth;

pub use batch::{solve_independent, track, FrameOutcome, HandModels};
pub use metrics::{aligned_error, per_axis_mae, threshold_curve, MetricsReport};
pub use par::Execution;
pub use pipeline::{
    cold_start, estimate_frame, route_handedness, substitute_occluded, FrameInput, PipelineConfig, TrackState,
};
pub use synth::{generate_sequence, sample_pose, SynthConfig};
