#![allow(dead_code)]

pub mod invariants;

use handpose::kinematics::NUM_KEYPOINTS;
use handpose::synth::default_rig;
use handpose::{
    build_residuals, forward_kinematics, project, HandModel, Keypoint, Observation, PoseParams, Quat, Rig, SolverConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform over the full joint-limit box, uniform-ish rotation, hand
/// 300 to 700 mm in front of the default cameras.
pub fn random_pose(model: &HandModel, rng: &mut impl Rng) -> PoseParams {
    let mut pose = PoseParams::rest(model);
    for (a, l) in pose.articulation.iter_mut().zip(model.limits()) {
        *a = rng.random_range(l.lo..=l.hi);
    }
    let q = Quat::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    pose.rotation = q.normalized();
    pose.translation = [
        rng.random_range(-50.0..50.0),
        rng.random_range(-50.0..50.0),
        rng.random_range(300.0..700.0),
    ];
    pose
}

/// Rotation within `max_deg` of facing the default camera.
pub fn frontal_pose(model: &HandModel, rng: &mut impl Rng, max_deg: f64) -> PoseParams {
    let mut pose = random_pose(model, rng);
    let r = max_deg.to_radians();
    pose.rotation = Quat::from_rotation_vector([
        rng.random_range(-r..r),
        rng.random_range(-r..r),
        rng.random_range(-r..r),
    ]);
    pose.translation = [
        rng.random_range(-40.0..40.0),
        rng.random_range(40.0..100.0),
        rng.random_range(420.0..580.0),
    ];
    pose
}

/// Noiseless, fully confident observations of `pose` in every rig camera.
pub fn observe(model: &HandModel, rig: &Rig, pose: &PoseParams) -> Vec<Observation> {
    let joints = forward_kinematics(model, pose).unwrap();
    rig.cameras()
        .iter()
        .map(|rc| {
            let proj = project(&rc.camera, &joints);
            let kps: [Keypoint; NUM_KEYPOINTS] = std::array::from_fn(|i| {
                let [u, v] = proj.points[i].expect("in front");
                Keypoint::new(u, v, 1.0)
            });
            Observation::new(kps, "h0", model.handedness(), rc.id.clone()).unwrap()
        })
        .collect()
}

pub fn mono() -> Rig {
    default_rig(false)
}

pub fn stereo() -> Rig {
    default_rig(true)
}

pub fn mean_distance(a: &[[f64; 3]; NUM_KEYPOINTS], b: &[[f64; 3]; NUM_KEYPOINTS]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt())
        .sum::<f64>()
        / NUM_KEYPOINTS as f64
}

/// Central differences of the residuals along each tangent direction,
/// through the public residual builder only.
pub fn numeric_jacobian(model: &HandModel, rig: &Rig, obs: &[Observation], pose: &PoseParams) -> Vec<[f64; 26]> {
    let cfg = SolverConfig::default();
    let h = 1e-6;
    let n = build_residuals(model, pose, rig, obs, &cfg).unwrap().values.len();
    let mut rows = vec![[0.0; 26]; n];
    for k in 0..26 {
        let mut d = [0.0; 26];
        d[k] = h;
        let plus = build_residuals(model, &pose.retract(&d), rig, obs, &cfg).unwrap();
        d[k] = -h;
        let minus = build_residuals(model, &pose.retract(&d), rig, obs, &cfg).unwrap();
        assert_eq!(plus.active_mask, minus.active_mask, "active set changed inside the stencil");
        for j in 0..n {
            rows[j][k] = (plus.values[j] - minus.values[j]) / (2.0 * h);
        }
    }
    rows
}

/// `|a - b| / max(1, |b|)`, worst per block: translation, rotation, articulation.
pub fn block_errors(analytic: &[[f64; 26]], numeric: &[[f64; 26]]) -> [f64; 3] {
    let mut worst = [0.0f64; 3];
    for (a, n) in analytic.iter().zip(numeric) {
        for k in 0..26 {
            let e = (a[k] - n[k]).abs() / n[k].abs().max(1.0);
            let b = match k {
                0..=2 => 0,
                3..=5 => 1,
                _ => 2,
            };
            worst[b] = worst[b].max(e);
        }
    }
    worst
}
