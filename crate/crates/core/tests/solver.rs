mod common;

use common::{frontal_pose, mean_distance, mono, numeric_jacobian, observe, random_pose, rng, stereo};
use handpose::kinematics::NUM_POSE_VALUES;
use handpose::{
    forward_kinematics, jacobian, solve, step_quaternion, Error, HandModel, PoseParams, Quat,
    SolverConfig, Termination,
};
use rand::Rng;

#[test]
fn translation_columns_match_pinhole_derivative() {
    let model = HandModel::default_left();
    let rig = mono();
    let cam = &rig.cameras()[0].camera;
    let cfg = SolverConfig::default();
    let mut r = rng(30);
    for _ in 0..20 {
        let pose = frontal_pose(&model, &mut r, 30.0);
        let obs = observe(&model, &rig, &random_pose(&model, &mut r));
        let jac = jacobian(&model, &rig, &obs, &pose, &cfg).unwrap();
        let k = forward_kinematics(&model, &pose).unwrap();
        let (fx, fy) = (cam.focal[0], cam.focal[1]);
        for (i, p) in k.points.iter().enumerate() {
            let [x, y, z] = *p;
            let du = [fx / z, 0.0, -fx * x / (z * z)];
            let dv = [0.0, fy / z, -fy * y / (z * z)];
            for c in 0..3 {
                assert!((jac.rows[2 * i][c] - du[c]).abs() < 1e-10 * du[c].abs().max(1.0));
                assert!((jac.rows[2 * i + 1][c] - dv[c]).abs() < 1e-10 * dv[c].abs().max(1.0));
            }
        }
    }
}

#[test]
fn jacobian_matches_central_differences() {
    let model = HandModel::default_left();
    let rig = stereo();
    let cfg = SolverConfig::default();
    let mut r = rng(31);
    let mut worst = [0.0f64; 3];
    for _ in 0..50 {
        // Interior poses, so the difference stencil never leaves the limits.
        let mut pose = frontal_pose(&model, &mut r, 25.0);
        for (a, l) in pose.articulation.iter_mut().zip(model.limits()) {
            *a = a.clamp(l.lo + 1e-3, l.hi - 1e-3);
        }
        let mut obs = observe(&model, &rig, &frontal_pose(&model, &mut r, 25.0));
        for o in &mut obs {
            for kp in o.joints.iter_mut() {
                kp.p = r.random_range(0.3..1.0);
            }
        }
        let jac = jacobian(&model, &rig, &obs, &pose, &cfg).unwrap();
        let num = numeric_jacobian(&model, &rig, &obs, &pose);
        assert_eq!(jac.rows.len(), num.len());
        let e = common::block_errors(&jac.rows, &num);
        for b in 0..3 {
            worst[b] = worst[b].max(e[b]);
        }
    }
    for (name, e) in ["translation", "rotation", "articulation"].iter().zip(worst) {
        assert!(e < 1e-5, "{name} block relative error {e}");
    }
}

#[test]
fn gated_joints_have_no_rows() {
    let model = HandModel::default_left();
    let rig = mono();
    let pose = frontal_pose(&model, &mut rng(32), 20.0);
    let mut obs = observe(&model, &rig, &pose);
    for i in [3, 7, 11] {
        obs[0].joints[i].p = 0.05;
    }
    let jac = jacobian(&model, &rig, &obs, &pose, &SolverConfig::default()).unwrap();
    assert_eq!(jac.rows.len(), 2 * 18);
    assert!(!jac.residuals.active_mask[0][3]);
}

#[test]
fn small_steps_compose() {
    let mut r = rng(33);
    for _ in 0..200 {
        let q = Quat::from_rotation_vector([r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)]);
        let eps = 1e-3;
        let a: [f64; 3] = std::array::from_fn(|_| r.random_range(-eps..eps));
        let b: [f64; 3] = std::array::from_fn(|_| r.random_range(-eps..eps));
        let two = step_quaternion(step_quaternion(q, a), b);
        let one = step_quaternion(q, [a[0] + b[0], a[1] + b[1], a[2] + b[2]]);
        // Product oracle: exp(b) * exp(a) * q.
        let oracle = Quat::from_rotation_vector(b).mul(Quat::from_rotation_vector(a)).mul(q);
        assert!(two.angle_to(oracle) < 1e-12);
        assert!(two.angle_to(one) < 4.0 * eps * eps);
        assert!((two.norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn starting_at_truth_converges_immediately() {
    let model = HandModel::default_left();
    let rig = mono();
    let mut r = rng(34);
    for _ in 0..20 {
        let truth = frontal_pose(&model, &mut r, 30.0);
        let obs = observe(&model, &rig, &truth);
        let res = solve(&model, &rig, &obs, &truth, &SolverConfig::default()).unwrap();
        assert!(res.iterations <= 2, "{} iterations", res.iterations);
        assert!(res.final_cost < 1e-10);
    }
}

#[test]
fn perturbed_start_recovers_truth_in_stereo() {
    let model = HandModel::default_left();
    let rig = stereo();
    let mut r = rng(35);
    for _ in 0..20 {
        let truth = frontal_pose(&model, &mut r, 25.0);
        let obs = observe(&model, &rig, &truth);
        let mut start = truth;
        for (a, l) in start.articulation.iter_mut().zip(model.limits()) {
            let s = if r.random_bool(0.5) { 1.0 } else { -1.0 };
            *a = l.clamp(*a + s * 5f64.to_radians());
        }
        let dir: [f64; 3] = std::array::from_fn(|_| r.random_range(-1.0..1.0));
        let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        for k in 0..3 {
            start.translation[k] += 20.0 * dir[k] / n;
        }
        let res = solve(&model, &rig, &obs, &start, &SolverConfig::default()).unwrap();
        let truth_k = forward_kinematics(&model, &truth).unwrap();
        let err = mean_distance(&res.joints3d.points, &truth_k.points);
        assert!(err < 1.0, "mean error {err} mm after {} iterations", res.iterations);
    }
}

#[test]
fn all_gated_is_unsolvable() {
    let model = HandModel::default_left();
    let rig = mono();
    let truth = frontal_pose(&model, &mut rng(36), 10.0);
    let mut obs = observe(&model, &rig, &truth);
    for kp in obs[0].joints.iter_mut() {
        kp.p = 0.0;
    }
    let err = solve(&model, &rig, &obs, &truth, &SolverConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Unsolvable { active: 0, .. }));
}

#[test]
fn outputs_respect_invariants_and_are_deterministic() {
    let model = HandModel::default_left();
    let rig = mono();
    let mut r = rng(37);
    for _ in 0..20 {
        let truth = random_pose(&model, &mut r);
        let start = frontal_pose(&model, &mut r, 30.0);
        let obs = observe(&model, &rig, &truth);
        let a = solve(&model, &rig, &obs, &start, &SolverConfig::default()).unwrap();
        let b = solve(&model, &rig, &obs, &start, &SolverConfig::default()).unwrap();
        let bits = |p: &PoseParams| p.to_values().map(f64::to_bits);
        assert_eq!(bits(&a.pose), bits(&b.pose));
        assert_eq!(a.final_cost.to_bits(), b.final_cost.to_bits());
        assert!(a.final_cost <= a.initial_cost);
        assert!((a.pose.rotation.norm() - 1.0).abs() < 1e-9);
        for (v, l) in a.pose.articulation.iter().zip(model.limits()) {
            assert!(l.contains(*v));
        }
        assert_ne!(a.termination, Termination::Unsolvable);
        assert_eq!(a.pose.to_values().len(), NUM_POSE_VALUES);
    }
}
