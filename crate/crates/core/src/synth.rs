//! Synthetic ground truth: random hand poses and smooth motions projected
//! through a rig, with pixel noise, a confidence model and dropout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::camera::{project, Camera, Rig, RigCamera};
use crate::error::{Error, Result};
use crate::geometry::{Quat, Vec3};
use crate::kinematics::{
    forward_kinematics, HandModel, JointLimit, PoseParams, NUM_ARTICULATIONS, NUM_KEYPOINTS,
};
use crate::objective::{Keypoint, Observation};
use crate::par::{self, Execution};
use crate::pipeline::FrameInput;

/// Sampling box for poses. Angles in degrees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoseRanges {
    pub translation_min: Vec3,
    pub translation_max: Vec3,
    /// Half-width of each rotation-vector component around identity.
    pub rotation_deg: Vec3,
    /// Explicit per-articulation `[lo, hi]`; when absent, derived from the
    /// joint limits with `articulation_fraction`.
    pub articulation_deg: Option<Vec<[f64; 2]>>,
    /// Fraction of the distance from rest to each limit that is sampled.
    pub articulation_fraction: f64,
}

impl Default for PoseRanges {
    fn default() -> Self {
        PoseRanges {
            translation_min: [-60.0, 40.0, 420.0],
            translation_max: [60.0, 120.0, 580.0],
            rotation_deg: [25.0, 25.0, 25.0],
            articulation_deg: None,
            articulation_fraction: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionModel {
    /// Largest per-frame change of any angle, degrees.
    pub max_angle_step_deg: f64,
    /// Largest per-frame change of any translation component, millimeters.
    pub max_translation_step_mm: f64,
}

impl Default for MotionModel {
    fn default() -> Self {
        MotionModel {
            max_angle_step_deg: 2.0,
            max_translation_step_mm: 5.0,
        }
    }
}

/// `p = base * exp(-|noise| / decay_px)`, clipped to [0, 1]; each joint is
/// independently dropped (p = 0) with probability `dropout`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConfidenceModel {
    pub base: f64,
    pub decay_px: f64,
    pub dropout: f64,
}

impl Default for ConfidenceModel {
    fn default() -> Self {
        ConfidenceModel {
            base: 1.0,
            decay_px: 10.0,
            dropout: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub frames: usize,
    pub hand_id: String,
    pub ranges: PoseRanges,
    pub motion: MotionModel,
    /// Isotropic Gaussian pixel noise, standard deviation in pixels.
    pub pixel_sigma: f64,
    pub confidence: ConfidenceModel,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            frames: 100,
            hand_id: "hand0".into(),
            ranges: PoseRanges::default(),
            motion: MotionModel::default(),
            pixel_sigma: 0.0,
            confidence: ConfidenceModel::default(),
        }
    }
}

/// Sampling intervals in internal units (mm, radians).
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedRanges {
    pub translation: [(f64, f64); 3],
    pub rotation: [(f64, f64); 3],
    pub articulation: [(f64, f64); NUM_ARTICULATIONS],
}

impl ResolvedRanges {
    fn intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.translation
            .iter()
            .chain(&self.rotation)
            .chain(&self.articulation)
            .copied()
    }
}

fn ordered(lo: f64, hi: f64) -> bool {
    lo.is_finite() && hi.is_finite() && lo <= hi
}

impl SynthConfig {
    pub fn validate(&self, model: &HandModel) -> Result<ResolvedRanges> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.pixel_sigma >= 0.0 && self.pixel_sigma.is_finite()) {
            return bad(format!("pixel_sigma must be >= 0, got {}", self.pixel_sigma));
        }
        let c = &self.confidence;
        if !(0.0..=1.0).contains(&c.dropout) {
            return bad(format!("dropout must lie in [0, 1], got {}", c.dropout));
        }
        if !(0.0..=1.0).contains(&c.base) {
            return bad(format!("base confidence must lie in [0, 1], got {}", c.base));
        }
        if !(c.decay_px > 0.0) {
            return bad("decay_px must be positive".into());
        }
        let m = &self.motion;
        if !(m.max_angle_step_deg >= 0.0 && m.max_translation_step_mm >= 0.0) {
            return bad("motion steps must be non-negative".into());
        }
        self.ranges.resolve(model)
    }
}

impl PoseRanges {
    pub fn resolve(&self, model: &HandModel) -> Result<ResolvedRanges> {
        let translation: [(f64, f64); 3] =
            std::array::from_fn(|i| (self.translation_min[i], self.translation_max[i]));
        let rotation: [(f64, f64); 3] = std::array::from_fn(|i| {
            let r = self.rotation_deg[i].to_radians();
            (-r, r)
        });
        let articulation: [(f64, f64); NUM_ARTICULATIONS] = match &self.articulation_deg {
            Some(list) => {
                if list.len() != NUM_ARTICULATIONS {
                    return Err(Error::InvalidConfig(format!(
                        "articulation_deg needs {NUM_ARTICULATIONS} entries, got {}",
                        list.len()
                    )));
                }
                std::array::from_fn(|j| (list[j][0].to_radians(), list[j][1].to_radians()))
            }
            None => {
                let f = self.articulation_fraction;
                if !(0.0..=1.0).contains(&f) {
                    return Err(Error::InvalidConfig("articulation_fraction must lie in [0, 1]".into()));
                }
                let rest = model.rest_articulation();
                std::array::from_fn(|j| {
                    let JointLimit { lo, hi } = model.limits()[j];
                    (rest[j] - f * (rest[j] - lo), rest[j] + f * (hi - rest[j]))
                })
            }
        };
        for (i, &(lo, hi)) in translation.iter().chain(&rotation).enumerate() {
            if !ordered(lo, hi) {
                return Err(Error::InvalidConfig(format!("range {i} has lo > hi")));
            }
        }
        for (j, &(lo, hi)) in articulation.iter().enumerate() {
            let limit = model.limits()[j];
            if !ordered(lo, hi) || lo < limit.lo || hi > limit.hi {
                return Err(Error::InvalidConfig(format!(
                    "articulation range {j} [{lo}, {hi}] is not inside the joint limits"
                )));
            }
        }
        Ok(ResolvedRanges {
            translation,
            rotation,
            articulation,
        })
    }
}

fn draw(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// State of the walk: translation, rotation vector, articulation.
fn pose_from_state(state: &[f64]) -> PoseParams {
    PoseParams {
        translation: [state[0], state[1], state[2]],
        rotation: Quat::from_rotation_vector([state[3], state[4], state[5]]),
        articulation: state[6..].try_into().expect("20 articulation values"),
    }
}

fn sample_state(ranges: &ResolvedRanges, rng: &mut impl Rng) -> Vec<f64> {
    ranges.intervals().map(|iv| draw(rng, iv)).collect()
}

/// Uniform pose inside the ranges; always within the joint limits.
pub fn sample_pose(ranges: &ResolvedRanges, rng: &mut impl Rng) -> PoseParams {
    pose_from_state(&sample_state(ranges, rng))
}

fn reflect(x: f64, (lo, hi): (f64, f64)) -> f64 {
    let y = if x > hi {
        2.0 * hi - x
    } else if x < lo {
        2.0 * lo - x
    } else {
        x
    };
    y.clamp(lo, hi)
}

fn walk_step(state: &mut [f64], ranges: &ResolvedRanges, motion: &MotionModel, rng: &mut impl Rng) {
    let angle = motion.max_angle_step_deg.to_radians();
    for (k, (x, iv)) in state.iter_mut().zip(ranges.intervals()).enumerate() {
        let max = if k < 3 { motion.max_translation_step_mm } else { angle };
        let step = if max > 0.0 { rng.random_range(-max..=max) } else { 0.0 };
        *x = reflect(*x + step, iv);
    }
}

/// Projects `pose` into every rig camera and corrupts the detections.
pub fn observe_pose(
    model: &HandModel,
    rig: &Rig,
    pose: &PoseParams,
    frame_id: u64,
    config: &SynthConfig,
    rng: &mut impl Rng,
) -> Result<FrameInput> {
    let joints = forward_kinematics(model, pose)?;
    let noise = Normal::new(0.0, config.pixel_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let conf = &config.confidence;
    let mut observations = Vec::with_capacity(rig.len());
    for RigCamera { id, camera } in rig.cameras() {
        let proj = project(camera, &joints);
        let mut keypoints = [Keypoint::new(0.0, 0.0, 0.0); NUM_KEYPOINTS];
        for (kp, point) in keypoints.iter_mut().zip(proj.points) {
            let (nx, ny): (f64, f64) = (noise.sample(rng), noise.sample(rng));
            let dropped = rng.random::<f64>() < conf.dropout;
            let Some([u, v]) = point else { continue };
            let p = (conf.base * (-(nx.hypot(ny)) / conf.decay_px).exp()).clamp(0.0, 1.0);
            *kp = Keypoint::new(u + nx, v + ny, if dropped { 0.0 } else { p });
        }
        observations.push(Observation::new(
            keypoints,
            config.hand_id.clone(),
            model.handedness(),
            id.clone(),
        )?);
    }
    Ok(FrameInput {
        frame_id,
        observations,
    })
}

/// Ground-truth pose and observations for one frame.
pub type SyntheticFrame = (PoseParams, FrameInput);

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn generate_with(model: &HandModel, rig: &Rig, config: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Vec<SyntheticFrame>> {
    let ranges = config.validate(model)?;
    let mut state = sample_state(&ranges, rng);
    let mut out = Vec::with_capacity(config.frames);
    for k in 0..config.frames {
        if k > 0 {
            walk_step(&mut state, &ranges, &config.motion, rng);
        }
        let pose = pose_from_state(&state);
        let frame = observe_pose(model, rig, &pose, k as u64, config, rng)?;
        out.push((pose, frame));
    }
    Ok(out)
}

/// A smooth sequence: first pose sampled, then a reflected random walk.
pub fn generate_sequence(model: &HandModel, rig: &Rig, config: &SynthConfig) -> Result<Vec<SyntheticFrame>> {
    generate_with(model, rig, config, &mut rng_for(config.seed, 0))
}

/// Frames with independently sampled poses (no temporal continuity).
pub fn generate_independent(
    model: &HandModel,
    rig: &Rig,
    config: &SynthConfig,
    exec: Execution,
) -> Result<Vec<SyntheticFrame>> {
    let ranges = config.validate(model)?;
    par::map_range(exec, config.frames, |k| {
        let mut rng = rng_for(config.seed, 1 + k as u64);
        let pose = sample_pose(&ranges, &mut rng);
        observe_pose(model, rig, &pose, k as u64, config, &mut rng).map(|f| (pose, f))
    })
    .into_iter()
    .collect()
}

/// Several independent sequences, one random stream each; sequence `i`
/// uses hand id `{hand_id}{i}`.
pub fn generate_sequences(
    model: &HandModel,
    rig: &Rig,
    config: &SynthConfig,
    count: usize,
    exec: Execution,
) -> Result<Vec<Vec<SyntheticFrame>>> {
    par::map_range(exec, count, |i| {
        let mut cfg = config.clone();
        cfg.hand_id = format!("{}{i}", config.hand_id);
        generate_with(model, rig, &cfg, &mut rng_for(config.seed, 1 << 32 | i as u64))
    })
    .into_iter()
    .collect()
}

/// 640x480 cameras with 600 px focal length, the first at the origin
/// looking down +Z. The stereo variant adds a second camera 200 mm to the
/// right, verged on a point 500 mm ahead.
pub fn default_rig(stereo: bool) -> Rig {
    let base = Camera::pinhole(600.0, 600.0, 320.0, 240.0, [640, 480]).expect("valid intrinsics");
    let mut cameras = vec![RigCamera {
        id: "cam0".into(),
        camera: base.clone(),
    }];
    if stereo {
        let second = base
            .look_at([200.0, 0.0, 0.0], [0.0, -10.0, 500.0], [0.0, 1.0, 0.0])
            .expect("valid extrinsics");
        cameras.push(RigCamera {
            id: "cam1".into(),
            camera: second,
        });
    }
    Rig::new(cameras).expect("valid rig")
}
