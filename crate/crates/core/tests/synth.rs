mod common;

use common::{mono, stereo};
use handpose::synth::{generate_independent, generate_sequences, sample_pose, ConfidenceModel, PoseRanges};
use handpose::{clamp_to_limits, forward_kinematics, generate_sequence, project, Execution, HandModel, SynthConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn pixel_noise_has_requested_spread() {
    let model = HandModel::default_left();
    let rig = mono();
    let cfg = SynthConfig {
        frames: 500,
        seed: 50,
        pixel_sigma: 1.0,
        ..SynthConfig::default()
    };
    let mut residuals = Vec::new();
    for (pose, input) in generate_sequence(&model, &rig, &cfg).unwrap() {
        let proj = project(&rig.cameras()[0].camera, &forward_kinematics(&model, &pose).unwrap());
        for (kp, p) in input.observations[0].joints.iter().zip(proj.points) {
            let [u, v] = p.unwrap();
            residuals.push(kp.u - u);
            residuals.push(kp.v - v);
        }
    }
    assert!(residuals.len() >= 20_000);
    let n = residuals.len() as f64;
    let mean = residuals.iter().sum::<f64>() / n;
    let std = (residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((std - 1.0).abs() < 0.05, "std {std}");
}

#[test]
fn dropout_fraction_matches_probability() {
    let model = HandModel::default_left();
    let rig = mono();
    let cfg = SynthConfig {
        frames: 500,
        seed: 51,
        confidence: ConfidenceModel {
            dropout: 0.1,
            ..ConfidenceModel::default()
        },
        ..SynthConfig::default()
    };
    let frames = generate_sequence(&model, &rig, &cfg).unwrap();
    let joints: Vec<f64> = frames
        .iter()
        .flat_map(|(_, f)| f.observations[0].joints.iter().map(|k| k.p))
        .collect();
    assert!(joints.len() >= 10_000);
    let dropped = joints.iter().filter(|&&p| p == 0.0).count() as f64 / joints.len() as f64;
    assert!((dropped - 0.1).abs() < 0.02, "dropout {dropped}");
}

#[test]
fn noiseless_observations_equal_projections() {
    let model = HandModel::default_left();
    let rig = stereo();
    let cfg = SynthConfig {
        frames: 20,
        ..SynthConfig::default()
    };
    for (pose, input) in generate_sequence(&model, &rig, &cfg).unwrap() {
        let k = forward_kinematics(&model, &pose).unwrap();
        for (o, rc) in input.observations.iter().zip(rig.cameras()) {
            let proj = project(&rc.camera, &k);
            for (kp, p) in o.joints.iter().zip(proj.points) {
                assert_eq!([kp.u, kp.v], p.unwrap());
                assert_eq!(kp.p, 1.0);
            }
        }
    }
}

#[test]
fn samples_are_fixpoints_of_clamping() {
    let model = HandModel::default_left();
    let ranges = SynthConfig {
        ranges: PoseRanges {
            articulation_fraction: 1.0,
            ..PoseRanges::default()
        },
        ..SynthConfig::default()
    }
    .validate(&model)
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    for _ in 0..1000 {
        let p = sample_pose(&ranges, &mut rng);
        assert_eq!(clamp_to_limits(&model, &p).unwrap(), p);
    }
}

#[test]
fn degenerate_ranges_give_one_pose() {
    let model = HandModel::default_left();
    let ranges = SynthConfig {
        ranges: PoseRanges {
            translation_min: [1.0, 2.0, 500.0],
            translation_max: [1.0, 2.0, 500.0],
            rotation_deg: [0.0; 3],
            articulation_deg: Some(vec![[3.0, 3.0]; 20]),
            ..PoseRanges::default()
        },
        ..SynthConfig::default()
    }
    .validate(&model)
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let first = sample_pose(&ranges, &mut rng);
    for _ in 0..10 {
        assert_eq!(sample_pose(&ranges, &mut rng), first);
    }
    assert_eq!(first.translation, [1.0, 2.0, 500.0]);
}

#[test]
fn generation_is_deterministic_and_execution_independent() {
    let model = HandModel::default_left();
    let rig = stereo();
    let cfg = SynthConfig {
        frames: 30,
        seed: 54,
        pixel_sigma: 2.0,
        ..SynthConfig::default()
    };
    assert_eq!(generate_sequence(&model, &rig, &cfg).unwrap(), generate_sequence(&model, &rig, &cfg).unwrap());
    assert_eq!(
        generate_independent(&model, &rig, &cfg, Execution::Parallel).unwrap(),
        generate_independent(&model, &rig, &cfg, Execution::Sequential).unwrap()
    );
    let par = generate_sequences(&model, &rig, &cfg, 4, Execution::Parallel).unwrap();
    assert_eq!(par, generate_sequences(&model, &rig, &cfg, 4, Execution::Sequential).unwrap());
    assert_ne!(par[0][0].0, par[1][0].0);
}
