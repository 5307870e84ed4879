//! Structural invariants checked from a single random seed each, so the
//! property target and the acceptance suite share one definition.

use handpose::camera::Rig;
use handpose::kinematics::{Bone, JointLimit, NUM_ARTICULATIONS, NUM_BONES};
use handpose::{
    build_residuals, forward_kinematics, mirror_model, solve, threshold_curve, total_cost, Error, HandModel,
    SolverConfig,
};
use rand::Rng;

use super::{frontal_pose, observe, random_pose, rng, stereo};

pub type Check = fn(u64) -> Result<(), String>;

pub const ALL: [(&str, Check); 6] = [
    ("bone lengths conserved", bone_lengths),
    ("solve keeps unit quaternion and limits", solve_outputs),
    ("threshold curve monotone", curve_monotone),
    ("multi-view cost additive", cost_additive),
    ("mirror involution", mirror_involution),
    ("mirrored FK reflects", mirror_reflects),
];

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn random_model(r: &mut impl Rng) -> HandModel {
    let base = HandModel::default_left();
    let bones: Vec<Bone> = base
        .bones()
        .iter()
        .map(|b| {
            let d = [
                b.direction[0] + r.random_range(-0.2..0.2),
                b.direction[1] + r.random_range(-0.2..0.2),
                b.direction[2] + r.random_range(-0.2..0.2),
            ];
            let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            Bone {
                length: b.length * r.random_range(0.7..1.3),
                direction: d.map(|x| x / n),
                ..*b
            }
        })
        .collect();
    let limits: Vec<JointLimit> = base
        .limits()
        .iter()
        .map(|l| {
            let lo = l.lo + r.random_range(-0.1..0.1);
            JointLimit::new(lo, lo.max(l.hi + r.random_range(-0.1..0.1)) + 0.05)
        })
        .collect();
    assert_eq!((bones.len(), limits.len()), (NUM_BONES, NUM_ARTICULATIONS));
    HandModel::new(bones, limits, base.handedness()).expect("perturbed model stays valid")
}

pub fn bone_lengths(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let model = random_model(&mut r);
    let k = forward_kinematics(&model, &random_pose(&model, &mut r)).map_err(|e| e.to_string())?;
    for b in model.bones() {
        let (p, c) = (k.points[b.parent], k.points[b.child]);
        let d = ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2)).sqrt();
        ensure((d - b.length).abs() <= 1e-6 * b.length, || {
            format!("bone {}->{}: {d} vs {}", b.parent, b.child, b.length)
        })?;
    }
    Ok(())
}

pub fn solve_outputs(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let model = HandModel::default_left();
    let rig = Rig::single("cam0", stereo().cameras()[0].camera.clone()).unwrap();
    let truth = random_pose(&model, &mut r);
    let mut obs = observe(&model, &rig, &truth);
    for kp in obs[0].joints.iter_mut() {
        kp.u += r.random_range(-3.0..3.0);
        kp.v += r.random_range(-3.0..3.0);
        kp.p = r.random_range(0.0..1.0);
    }
    let start = frontal_pose(&model, &mut r, 30.0);
    let cfg = SolverConfig {
        max_iterations: 20,
        ..SolverConfig::default()
    };
    let res = match solve(&model, &rig, &obs, &start, &cfg) {
        Err(Error::Unsolvable { .. }) => return Ok(()),
        other => other.map_err(|e| e.to_string())?,
    };
    ensure((res.pose.rotation.norm() - 1.0).abs() <= 1e-9, || {
        format!("quaternion norm {}", res.pose.rotation.norm())
    })?;
    for (i, (a, l)) in res.pose.articulation.iter().zip(model.limits()).enumerate() {
        ensure(l.contains(*a), || format!("articulation {i} = {a} outside [{}, {}]", l.lo, l.hi))?;
    }
    ensure(res.final_cost <= res.initial_cost, || {
        format!("cost rose {} -> {}", res.initial_cost, res.final_cost)
    })
}

pub fn curve_monotone(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let n = r.random_range(1..50);
    let errors: Vec<f64> = (0..n).map(|_| r.random_range(0.0..80.0)).collect();
    let mut t: Vec<f64> = (0..r.random_range(1..30)).map(|_| r.random_range(0.0..100.0)).collect();
    t.sort_by(f64::total_cmp);
    let curve = threshold_curve(&errors, &t).map_err(|e| e.to_string())?;
    for w in curve.windows(2) {
        ensure(w[0].fraction <= w[1].fraction, || format!("{:?} then {:?}", w[0], w[1]))?;
    }
    ensure(curve.iter().all(|c| (0.0..=1.0).contains(&c.fraction)), || "fraction out of range".into())
}

pub fn cost_additive(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let model = HandModel::default_left();
    let rig = stereo();
    let cfg = SolverConfig::default();
    let mut obs = observe(&model, &rig, &frontal_pose(&model, &mut r, 30.0));
    for o in &mut obs {
        for kp in o.joints.iter_mut() {
            kp.p = r.random_range(0.0..1.0);
        }
    }
    let probe = frontal_pose(&model, &mut r, 30.0);
    let cost = |rig: &Rig, obs: &[handpose::Observation]| match build_residuals(&model, &probe, rig, obs, &cfg) {
        Ok(res) => Ok(Some(total_cost(&res))),
        Err(Error::Unsolvable { .. }) => Ok(None),
        Err(e) => Err(e.to_string()),
    };
    // A view below the solvability floor cannot be scored on its own.
    let Some(both) = cost(&rig, &obs)? else { return Ok(()) };
    let mut sum = 0.0;
    for rc in rig.cameras() {
        let one = Rig::single(rc.id.clone(), rc.camera.clone()).unwrap();
        let o: Vec<_> = obs.iter().filter(|o| o.camera_id == rc.id).cloned().collect();
        let Some(c) = cost(&one, &o)? else { return Ok(()) };
        sum += c;
    }
    ensure((both - sum).abs() <= 1e-9 * both.max(1.0), || format!("{both} vs {sum}"))
}

pub fn mirror_involution(seed: u64) -> Result<(), String> {
    let model = random_model(&mut rng(seed));
    let twice = mirror_model(&mirror_model(&model));
    ensure(twice == model, || "mirror twice differs".into())
}

pub fn mirror_reflects(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let model = random_model(&mut r);
    let pose = random_pose(&model, &mut r);
    let a = forward_kinematics(&model, &pose).map_err(|e| e.to_string())?;
    let b = forward_kinematics(&mirror_model(&model), &pose.mirrored()).map_err(|e| e.to_string())?;
    for (p, q) in a.points.iter().zip(&b.points) {
        let want = [-p[0], p[1], p[2]];
        for k in 0..3 {
            ensure((q[k] - want[k]).abs() <= 1e-9 * want[k].abs().max(1.0), || {
                format!("{q:?} vs {want:?}")
            })?;
        }
    }
    Ok(())
}
