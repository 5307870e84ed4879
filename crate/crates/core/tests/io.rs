mod common;

use std::path::Path;

use handpose::io::{self, Dataset, PoseRecord};
use handpose::metrics::{default_thresholds, evaluate, EvalFrame};
use handpose::synth::{default_rig, generate_sequence, ConfidenceModel};
use handpose::{forward_kinematics, Execution, HandModel, Handedness, SynthConfig, Termination};
use tempfile::TempDir;

fn dataset(frames: usize) -> (HandModel, Dataset) {
    let model = HandModel::default_left();
    let rig = default_rig(true);
    let cfg = SynthConfig {
        frames,
        seed: 70,
        pixel_sigma: 1.5,
        confidence: ConfidenceModel {
            dropout: 0.2,
            ..ConfidenceModel::default()
        },
        ..SynthConfig::default()
    };
    let seq = generate_sequence(&model, &rig, &cfg).unwrap();
    let records = io::records_from_synthetic(&model, &seq).unwrap();
    (
        model.clone(),
        Dataset {
            rig,
            model: Some(model),
            records,
        },
    )
}

#[test]
fn synthetic_dataset_round_trips_exactly() {
    let tmp = TempDir::new().unwrap();
    let (_, ds) = dataset(25);
    io::write_dataset(tmp.path(), &ds).unwrap();
    let back = io::read_dataset(tmp.path()).unwrap();
    assert_eq!(back.rig, ds.rig);
    assert_eq!(back.records, ds.records);
    // Degrees on disk make the model round trip approximate.
    let m = back.model.unwrap();
    for (a, b) in m.limits().iter().zip(ds.model.unwrap().limits()) {
        assert!((a.lo - b.lo).abs() < 1e-12 && (a.hi - b.hi).abs() < 1e-12);
    }
}

#[test]
fn missing_rig_is_reported() {
    let tmp = TempDir::new().unwrap();
    let (_, ds) = dataset(2);
    io::write_dataset(tmp.path(), &ds).unwrap();
    std::fs::remove_file(tmp.path().join(io::RIG_FILE)).unwrap();
    let err = io::read_dataset(tmp.path()).unwrap_err().to_string();
    assert!(err.contains("rig.toml"), "{err}");
}

#[test]
fn poses_and_metrics_round_trip() {
    let tmp = TempDir::new().unwrap();
    let (model, ds) = dataset(6);
    let mut poses = Vec::new();
    let mut frames = Vec::new();
    for (i, r) in ds.records.iter().enumerate() {
        let truth = r.truth.unwrap();
        if i == 3 {
            poses.push(PoseRecord::failed(r.frame_id, &r.hand_id, r.handedness));
        } else {
            let mut pose = handpose::PoseParams::rest(&model);
            pose.translation = [i as f64 / 3.0, 50.0, 500.0];
            let joints = forward_kinematics(&model, &pose).unwrap();
            poses.push(PoseRecord {
                frame_id: r.frame_id,
                hand_id: r.hand_id.clone(),
                handedness: Handedness::Left,
                termination: Termination::ConvergedByStep,
                iterations: i,
                initial_cost: 1.0 / 7.0,
                final_cost: 1e-300,
                pose,
                joints,
            });
        }
        frames.push(EvalFrame {
            frame_id: r.frame_id,
            hand_id: r.hand_id.clone(),
            estimated: poses[i].estimate().copied(),
            truth,
        });
    }
    let path = io::poses_path(tmp.path());
    io::write_poses(&path, &poses).unwrap();
    assert_eq!(io::read_poses(&path).unwrap(), poses);

    let report = evaluate(&frames, &default_thresholds(), Execution::Sequential).unwrap();
    io::write_metrics(tmp.path(), &report).unwrap();
    assert_eq!(io::read_metrics(tmp.path()).unwrap(), report);
}

#[test]
fn shipped_model_file_is_the_default_model() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/default_left_hand.toml");
    let shipped = io::read_model(&path).unwrap();
    let builtin = HandModel::default_left();
    assert_eq!(shipped.bones(), builtin.bones());
    assert_eq!(shipped.handedness(), builtin.handedness());
    for (a, b) in shipped.limits().iter().zip(builtin.limits()) {
        assert!((a.lo - b.lo).abs() < 1e-12 && (a.hi - b.hi).abs() < 1e-12);
    }
}

#[test]
fn synth_config_file_round_trip() {
    let tmp = TempDir::new().unwrap();
    let cfg = SynthConfig {
        seed: 9,
        frames: 3,
        pixel_sigma: 0.75,
        ..SynthConfig::default()
    };
    let path = tmp.path().join("synth.toml");
    std::fs::write(&path, io::synth_config_to_string(&cfg)).unwrap();
    assert_eq!(io::read_synth_config(&path).unwrap(), cfg);
}
