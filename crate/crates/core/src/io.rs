//! On-disk formats.
//!
//! Structured files (hand model, rig, synthetic config) are TOML with a
//! leading `format` key. Tabular files (observations, ground truth, poses,
//! metrics) are comma-separated with a `# <format-tag>` first line, a
//! header row and one record per line. Floats are written in Rust's
//! shortest round-trip form, so write-then-read is lossless.
//!
//! A dataset directory holds `rig.toml`, `observations.csv`, optionally
//! `truth.csv` and `model.toml`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::camera::{Camera, Distortion, Rig, RigCamera};
use crate::error::{Error, Result};
use crate::geometry::{Quat, Vec3};
use crate::kinematics::{
    articulation_name, forward_kinematics, Bone, HandModel, Handedness, JointLimit, JointSet3D, PoseParams, NUM_ARTICULATIONS,
    NUM_KEYPOINTS, NUM_POSE_VALUES,
};
use crate::metrics::{CurvePoint, FrameMetrics, MetricsReport};
use crate::objective::{Keypoint, Observation};
use crate::pipeline::FrameInput;
use crate::solver::{SolveResult, Termination};
use crate::synth::{SynthConfig, SyntheticFrame};

pub const MODEL_FORMAT: &str = "handpose-model/1";
pub const RIG_FORMAT: &str = "handpose-rig/1";
pub const SYNTH_FORMAT: &str = "handpose-synth/1";
pub const OBSERVATIONS_FORMAT: &str = "handpose-observations/1";
pub const TRUTH_FORMAT: &str = "handpose-truth/1";
pub const POSES_FORMAT: &str = "handpose-poses/1";
pub const METRICS_FORMAT: &str = "handpose-metrics/1";
pub const CURVE_FORMAT: &str = "handpose-curve/1";
pub const SUMMARY_FORMAT: &str = "handpose-summary/1";

pub const RIG_FILE: &str = "rig.toml";
pub const MODEL_FILE: &str = "model.toml";
pub const OBSERVATIONS_FILE: &str = "observations.csv";
pub const TRUTH_FILE: &str = "truth.csv";
pub const POSES_FILE: &str = "poses.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CURVE_FILE: &str = "curve.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

// ---------------------------------------------------------------------------
// TOML documents

fn line_of(text: &str, offset: usize) -> u64 {
    1 + text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() as u64
}

fn parse_toml<T: DeserializeOwned>(path: &Path, text: &str, format: &str) -> Result<T> {
    #[derive(Deserialize)]
    struct Tag {
        format: Option<String>,
    }
    let to_err = |e: toml::de::Error| {
        let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(0);
        Error::format(path, line, e.message().to_string())
    };
    let tag: Tag = toml::from_str(text).map_err(to_err)?;
    match tag.format.as_deref() {
        Some(f) if f == format => {}
        Some(f) => return Err(Error::format(path, 1, format!("expected format `{format}`, found `{f}`"))),
        None => return Err(Error::format(path, 1, format!("missing `format = \"{format}\"`"))),
    }
    toml::from_str(text).map_err(to_err)
}

fn to_toml<T: Serialize>(value: &T) -> String {
    toml::to_string(value).expect("plain data serializes")
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    format: String,
    handedness: Handedness,
    bones: Vec<BoneDoc>,
    limits: Vec<LimitDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoneDoc {
    parent: usize,
    child: usize,
    length_mm: f64,
    direction: Vec3,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LimitDoc {
    joint: String,
    lo_deg: f64,
    hi_deg: f64,
}

pub fn model_to_string(model: &HandModel) -> String {
    let doc = ModelDoc {
        format: MODEL_FORMAT.into(),
        handedness: model.handedness(),
        bones: model
            .bones()
            .iter()
            .map(|b| BoneDoc {
                parent: b.parent,
                child: b.child,
                length_mm: b.length,
                direction: b.direction,
            })
            .collect(),
        limits: model
            .limits()
            .iter()
            .enumerate()
            .map(|(i, l)| LimitDoc {
                joint: articulation_name(i),
                lo_deg: l.lo.to_degrees(),
                hi_deg: l.hi.to_degrees(),
            })
            .collect(),
    };
    to_toml(&doc)
}

pub fn parse_model(path: &Path, text: &str) -> Result<HandModel> {
    let doc: ModelDoc = parse_toml(path, text, MODEL_FORMAT)?;
    let mut by_name: HashMap<&str, &LimitDoc> = HashMap::new();
    for l in &doc.limits {
        if by_name.insert(l.joint.as_str(), l).is_some() {
            return Err(Error::format(path, 0, format!("limit for `{}` given twice", l.joint)));
        }
    }
    let mut limits = Vec::with_capacity(NUM_ARTICULATIONS);
    for i in 0..NUM_ARTICULATIONS {
        let name = articulation_name(i);
        let l = by_name
            .remove(name.as_str())
            .ok_or_else(|| Error::format(path, 0, format!("missing limit for `{name}`")))?;
        limits.push(JointLimit::from_degrees(l.lo_deg, l.hi_deg));
    }
    if let Some(extra) = by_name.keys().next() {
        return Err(Error::format(path, 0, format!("unknown joint `{extra}`")));
    }
    let bones = doc
        .bones
        .iter()
        .map(|b| Bone {
            parent: b.parent,
            child: b.child,
            length: b.length_mm,
            direction: b.direction,
        })
        .collect();
    HandModel::new(bones, limits, doc.handedness).map_err(|e| Error::format(path, 0, e.to_string()))
}

pub fn read_model(path: &Path) -> Result<HandModel> {
    parse_model(path, &read_text(path)?)
}

pub fn write_model(path: &Path, model: &HandModel) -> Result<()> {
    write_text(path, &model_to_string(model))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RigDoc {
    format: String,
    cameras: Vec<CameraDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraDoc {
    id: String,
    focal: [f64; 2],
    center: [f64; 2],
    /// k1, k2, p1, p2, k3
    distortion: [f64; 5],
    /// World to camera, (w, x, y, z).
    rotation: [f64; 4],
    /// World to camera, millimeters.
    translation: Vec3,
    image_size: [u32; 2],
}

pub fn rig_to_string(rig: &Rig) -> String {
    let doc = RigDoc {
        format: RIG_FORMAT.into(),
        cameras: rig
            .cameras()
            .iter()
            .map(|RigCamera { id, camera: c }| CameraDoc {
                id: id.clone(),
                focal: c.focal,
                center: c.center,
                distortion: c.distortion.to_array(),
                rotation: c.rotation.to_array(),
                translation: c.translation,
                image_size: c.image_size,
            })
            .collect(),
    };
    to_toml(&doc)
}

pub fn parse_rig(path: &Path, text: &str) -> Result<Rig> {
    let doc: RigDoc = parse_toml(path, text, RIG_FORMAT)?;
    let cameras = doc
        .cameras
        .into_iter()
        .map(|c| {
            let id = c.id.clone();
            Camera::new(
                c.focal,
                c.center,
                Distortion::from_array(c.distortion),
                Quat::from_array(c.rotation),
                c.translation,
                c.image_size,
            )
            .map(|camera| RigCamera { id, camera })
        })
        .collect::<Result<Vec<_>>>()
        .and_then(Rig::new)
        .map_err(|e| Error::format(path, 0, e.to_string()))?;
    Ok(cameras)
}

pub fn read_rig(path: &Path) -> Result<Rig> {
    parse_rig(path, &read_text(path)?)
}

pub fn write_rig(path: &Path, rig: &Rig) -> Result<()> {
    write_text(path, &rig_to_string(rig))
}

#[derive(Serialize, Deserialize)]
struct SynthDoc {
    format: String,
    #[serde(flatten)]
    config: SynthConfig,
}

pub fn synth_config_to_string(config: &SynthConfig) -> String {
    to_toml(&SynthDoc {
        format: SYNTH_FORMAT.into(),
        config: config.clone(),
    })
}

pub fn parse_synth_config(path: &Path, text: &str) -> Result<SynthConfig> {
    let doc: SynthDoc = parse_toml(path, text, SYNTH_FORMAT)?;
    Ok(doc.config)
}

pub fn read_synth_config(path: &Path) -> Result<SynthConfig> {
    parse_synth_config(path, &read_text(path)?)
}

// ---------------------------------------------------------------------------
// Tables

/// A parsed table row with its 1-based line number in the file.
struct Row {
    line: u64,
    fields: Vec<String>,
}

fn parse_table(path: &Path, text: &str, format: &str, header: &[String]) -> Result<Vec<Row>> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let tag = first.trim_end_matches('\r').strip_prefix('#').map(str::trim);
    if tag != Some(format) {
        return Err(Error::format(path, 1, format!("expected `# {format}` on the first line")));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(rest.as_bytes());
    let found = reader
        .headers()
        .map_err(|e| Error::format(path, 2, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect::<Vec<_>>();
    if found != header {
        return Err(Error::format(path, 2, "unexpected header row"));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() + 1).unwrap_or(0);
            Error::format(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() + 1).unwrap_or(0);
        rows.push(Row {
            line,
            fields: record.iter().map(str::to_string).collect(),
        });
    }
    Ok(rows)
}

fn render_table(format: &str, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = format!("# {format}\n{}\n", header.join(","));
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn field<T: FromStr>(path: &Path, row: &Row, index: usize, name: &str) -> Result<T> {
    row.fields[index]
        .trim()
        .parse()
        .map_err(|_| Error::format(path, row.line, format!("invalid {name} `{}`", row.fields[index])))
}

fn floats(path: &Path, row: &Row, start: usize, count: usize) -> Result<Vec<f64>> {
    (start..start + count)
        .map(|i| field::<f64>(path, row, i, &format!("column {}", i + 1)))
        .collect()
}

fn require_width(path: &Path, row: &Row, width: usize, what: impl FnOnce(usize) -> String) -> Result<()> {
    if row.fields.len() != width {
        return Err(Error::format(path, row.line, what(row.fields.len())));
    }
    Ok(())
}

fn joint_columns(axes: &[&str]) -> Vec<String> {
    (0..NUM_KEYPOINTS)
        .flat_map(|i| axes.iter().map(move |a| format!("{a}{i}")))
        .collect()
}

fn fmt_f64(x: f64) -> String {
    let mut s = String::new();
    write!(s, "{x}").expect("write to string");
    s
}

fn joints_from(values: &[f64]) -> JointSet3D {
    JointSet3D {
        points: std::array::from_fn(|i| [values[3 * i], values[3 * i + 1], values[3 * i + 2]]),
    }
}

fn joint_fields(joints: &JointSet3D) -> impl Iterator<Item = String> + '_ {
    joints.points.iter().flatten().map(|&v| fmt_f64(v))
}

// ---------------------------------------------------------------------------
// Datasets

/// Observations of one hand in one frame across cameras, with optional
/// ground-truth keypoints.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameRecord {
    pub frame_id: u64,
    pub hand_id: String,
    pub handedness: Handedness,
    pub observations: Vec<Observation>,
    pub truth: Option<JointSet3D>,
}

impl FrameRecord {
    pub fn to_frame_input(&self) -> FrameInput {
        FrameInput {
            frame_id: self.frame_id,
            observations: self.observations.clone(),
        }
    }
}

/// Dataset records for synthetic frames, with ground truth from the model.
pub fn records_from_synthetic(model: &HandModel, frames: &[SyntheticFrame]) -> Result<Vec<FrameRecord>> {
    frames
        .iter()
        .map(|(pose, input)| {
            input.validate()?;
            let first = &input.observations[0];
            Ok(FrameRecord {
                frame_id: input.frame_id,
                hand_id: first.hand_id.clone(),
                handedness: first.handedness,
                observations: input.observations.clone(),
                truth: Some(forward_kinematics(model, pose)?),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub rig: Rig,
    pub model: Option<HandModel>,
    pub records: Vec<FrameRecord>,
}

fn observation_header() -> Vec<String> {
    let mut h: Vec<String> = ["frame_id", "hand_id", "handedness", "camera_id"].map(String::from).into();
    h.extend(joint_columns(&["u", "v", "p"]));
    h
}

fn truth_header() -> Vec<String> {
    let mut h: Vec<String> = ["frame_id", "hand_id"].map(String::from).into();
    h.extend(joint_columns(&["x", "y", "z"]));
    h
}

pub fn observations_to_string(records: &[FrameRecord]) -> String {
    let rows = records.iter().flat_map(|r| {
        r.observations.iter().map(move |o| {
            let mut row = vec![
                r.frame_id.to_string(),
                r.hand_id.clone(),
                r.handedness.to_string(),
                o.camera_id.clone(),
            ];
            row.extend(o.joints.iter().flat_map(|k| [fmt_f64(k.u), fmt_f64(k.v), fmt_f64(k.p)]));
            row
        })
    });
    render_table(OBSERVATIONS_FORMAT, &observation_header(), rows)
}

pub fn truth_to_string(records: &[FrameRecord]) -> String {
    let rows = records.iter().filter_map(|r| {
        r.truth.as_ref().map(|t| {
            let mut row = vec![r.frame_id.to_string(), r.hand_id.clone()];
            row.extend(joint_fields(t));
            row
        })
    });
    render_table(TRUTH_FORMAT, &truth_header(), rows)
}

/// Groups observation rows into frame records, in order of first appearance.
pub fn parse_observations(path: &Path, text: &str, rig: &Rig) -> Result<Vec<FrameRecord>> {
    let width = 4 + 3 * NUM_KEYPOINTS;
    let mut records: Vec<FrameRecord> = Vec::new();
    let mut index: HashMap<(u64, String), usize> = HashMap::new();
    for row in parse_table(path, text, OBSERVATIONS_FORMAT, &observation_header())? {
        let frame_id: u64 = field(path, &row, 0, "frame_id")?;
        require_width(path, &row, width, |n| {
            let n = n.saturating_sub(4);
            format!(
                "frame {frame_id}: expected {NUM_KEYPOINTS} keypoints ({} values), found {} values ({} keypoints)",
                3 * NUM_KEYPOINTS,
                n,
                n / 3
            )
        })?;
        let hand_id = row.fields[1].clone();
        let handedness: Handedness = row.fields[2]
            .parse()
            .map_err(|e: String| Error::format(path, row.line, format!("frame {frame_id}: {e}")))?;
        let camera_id = row.fields[3].clone();
        rig.index_of(&camera_id)
            .map_err(|_| Error::format(path, row.line, format!("frame {frame_id}: unknown camera id `{camera_id}`")))?;
        let values = floats(path, &row, 4, 3 * NUM_KEYPOINTS)?;
        let joints: [Keypoint; NUM_KEYPOINTS] =
            std::array::from_fn(|i| Keypoint::new(values[3 * i], values[3 * i + 1], values[3 * i + 2]));
        let obs = Observation::new(joints, hand_id.clone(), handedness, camera_id)
            .map_err(|e| Error::format(path, row.line, format!("frame {frame_id}: {e}")))?;

        match index.get(&(frame_id, hand_id.clone())) {
            Some(&i) => {
                let rec = &mut records[i];
                if rec.handedness != handedness {
                    return Err(Error::format(
                        path,
                        row.line,
                        format!("frame {frame_id}: hand `{hand_id}` changes handedness"),
                    ));
                }
                if rec.observations.iter().any(|o| o.camera_id == obs.camera_id) {
                    return Err(Error::format(
                        path,
                        row.line,
                        format!("frame {frame_id}: camera `{}` repeated for hand `{hand_id}`", obs.camera_id),
                    ));
                }
                rec.observations.push(obs);
            }
            None => {
                index.insert((frame_id, hand_id.clone()), records.len());
                records.push(FrameRecord {
                    frame_id,
                    hand_id,
                    handedness,
                    observations: vec![obs],
                    truth: None,
                });
            }
        }
    }
    Ok(records)
}

pub fn parse_truth(path: &Path, text: &str) -> Result<Vec<(u64, String, JointSet3D)>> {
    let width = 2 + 3 * NUM_KEYPOINTS;
    parse_table(path, text, TRUTH_FORMAT, &truth_header())?
        .into_iter()
        .map(|row| {
            let frame_id: u64 = field(path, &row, 0, "frame_id")?;
            require_width(path, &row, width, |n| {
                format!("frame {frame_id}: expected {} values, found {}", width, n)
            })?;
            let values = floats(path, &row, 2, 3 * NUM_KEYPOINTS)?;
            Ok((frame_id, row.fields[1].clone(), joints_from(&values)))
        })
        .collect()
}

/// Reads `rig.toml`, `observations.csv` and, when present, `truth.csv` and
/// `model.toml`.
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let rig_path = dir.join(RIG_FILE);
    if !rig_path.is_file() {
        return Err(Error::format(&rig_path, 0, "missing rig file"));
    }
    let rig = read_rig(&rig_path)?;
    read_dataset_with_rig(dir, rig)
}

/// Like [`read_dataset`] with the rig supplied by the caller.
pub fn read_dataset_with_rig(dir: &Path, rig: Rig) -> Result<Dataset> {
    let obs_path = dir.join(OBSERVATIONS_FILE);
    if !obs_path.is_file() {
        return Err(Error::format(&obs_path, 0, "no frames: missing observations file"));
    }
    let mut records = parse_observations(&obs_path, &read_text(&obs_path)?, &rig)?;

    let truth_path = dir.join(TRUTH_FILE);
    if truth_path.is_file() {
        let lookup: HashMap<(u64, String), usize> = records
            .iter()
            .enumerate()
            .map(|(i, r)| ((r.frame_id, r.hand_id.clone()), i))
            .collect();
        for (frame_id, hand_id, joints) in parse_truth(&truth_path, &read_text(&truth_path)?)? {
            let i = lookup.get(&(frame_id, hand_id.clone())).ok_or_else(|| {
                Error::format(
                    &truth_path,
                    0,
                    format!("ground truth for frame {frame_id} hand `{hand_id}` has no observations"),
                )
            })?;
            records[*i].truth = Some(joints);
        }
    }

    let model_path = dir.join(MODEL_FILE);
    let model = if model_path.is_file() {
        Some(read_model(&model_path)?)
    } else {
        None
    };
    Ok(Dataset { rig, model, records })
}

pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<()> {
    ensure_dir(dir)?;
    write_rig(&dir.join(RIG_FILE), &dataset.rig)?;
    write_text(&dir.join(OBSERVATIONS_FILE), &observations_to_string(&dataset.records))?;
    if dataset.records.iter().any(|r| r.truth.is_some()) {
        write_text(&dir.join(TRUTH_FILE), &truth_to_string(&dataset.records))?;
    }
    if let Some(model) = &dataset.model {
        write_model(&dir.join(MODEL_FILE), model)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Poses

/// One solved (or failed) frame as written by `solve`. Failed frames carry
/// NaN pose and joints.
#[derive(Clone, Debug)]
pub struct PoseRecord {
    pub frame_id: u64,
    pub hand_id: String,
    pub handedness: Handedness,
    pub termination: Termination,
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub pose: PoseParams,
    pub joints: JointSet3D,
}

impl PartialEq for PoseRecord {
    /// Bitwise float comparison, so NaN rows compare equal to themselves.
    fn eq(&self, other: &Self) -> bool {
        let bits = |r: &PoseRecord| {
            let mut v: Vec<u64> = vec![r.initial_cost.to_bits(), r.final_cost.to_bits()];
            v.extend(r.pose.to_values().iter().map(|x| x.to_bits()));
            v.extend(r.joints.points.iter().flatten().map(|x| x.to_bits()));
            v
        };
        self.frame_id == other.frame_id
            && self.hand_id == other.hand_id
            && self.handedness == other.handedness
            && self.termination == other.termination
            && self.iterations == other.iterations
            && bits(self) == bits(other)
    }
}

impl PoseRecord {
    pub fn from_result(frame_id: u64, hand_id: &str, handedness: Handedness, r: &SolveResult) -> Self {
        PoseRecord {
            frame_id,
            hand_id: hand_id.to_string(),
            handedness,
            termination: r.termination,
            iterations: r.iterations,
            initial_cost: r.initial_cost,
            final_cost: r.final_cost,
            pose: r.pose,
            joints: r.joints3d,
        }
    }

    pub fn failed(frame_id: u64, hand_id: &str, handedness: Handedness) -> Self {
        PoseRecord {
            frame_id,
            hand_id: hand_id.to_string(),
            handedness,
            termination: Termination::Unsolvable,
            iterations: 0,
            initial_cost: f64::NAN,
            final_cost: f64::NAN,
            pose: PoseParams::from_values(&[f64::NAN; NUM_POSE_VALUES]),
            joints: JointSet3D {
                points: [[f64::NAN; 3]; NUM_KEYPOINTS],
            },
        }
    }

    /// Keypoints, unless the frame failed.
    pub fn estimate(&self) -> Option<&JointSet3D> {
        self.joints.points.iter().flatten().all(|v| v.is_finite()).then_some(&self.joints)
    }
}

fn poses_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "frame_id",
        "hand_id",
        "handedness",
        "termination",
        "iterations",
        "initial_cost",
        "final_cost",
        "tx",
        "ty",
        "tz",
        "qw",
        "qx",
        "qy",
        "qz",
    ]
    .map(String::from)
    .into();
    h.extend((0..NUM_ARTICULATIONS).map(articulation_name));
    h.extend(joint_columns(&["x", "y", "z"]));
    h
}

pub fn poses_to_string(records: &[PoseRecord]) -> String {
    let rows = records.iter().map(|r| {
        let mut row = vec![
            r.frame_id.to_string(),
            r.hand_id.clone(),
            r.handedness.to_string(),
            r.termination.to_string(),
            r.iterations.to_string(),
            fmt_f64(r.initial_cost),
            fmt_f64(r.final_cost),
        ];
        row.extend(r.pose.to_values().iter().map(|&v| fmt_f64(v)));
        row.extend(joint_fields(&r.joints));
        row
    });
    render_table(POSES_FORMAT, &poses_header(), rows)
}

pub fn parse_poses(path: &Path, text: &str) -> Result<Vec<PoseRecord>> {
    let header = poses_header();
    parse_table(path, text, POSES_FORMAT, &header)?
        .into_iter()
        .map(|row| {
            let frame_id: u64 = field(path, &row, 0, "frame_id")?;
            require_width(path, &row, header.len(), |n| {
                format!("frame {frame_id}: expected {} columns, found {n}", header.len())
            })?;
            let handedness = row.fields[2]
                .parse()
                .map_err(|e: String| Error::format(path, row.line, e))?;
            let termination = Termination::parse(&row.fields[3])
                .ok_or_else(|| Error::format(path, row.line, format!("unknown termination `{}`", row.fields[3])))?;
            let pose_values: [f64; NUM_POSE_VALUES] =
                floats(path, &row, 7, NUM_POSE_VALUES)?.try_into().expect("27 values");
            let joints = joints_from(&floats(path, &row, 7 + NUM_POSE_VALUES, 3 * NUM_KEYPOINTS)?);
            Ok(PoseRecord {
                frame_id,
                hand_id: row.fields[1].clone(),
                handedness,
                termination,
                iterations: field(path, &row, 4, "iterations")?,
                initial_cost: field(path, &row, 5, "initial_cost")?,
                final_cost: field(path, &row, 6, "final_cost")?,
                pose: PoseParams::from_values(&pose_values),
                joints,
            })
        })
        .collect()
}

pub fn read_poses(path: &Path) -> Result<Vec<PoseRecord>> {
    parse_poses(path, &read_text(path)?)
}

pub fn write_poses(path: &Path, records: &[PoseRecord]) -> Result<()> {
    write_text(path, &poses_to_string(records))
}

// ---------------------------------------------------------------------------
// Metrics

fn metrics_header() -> Vec<String> {
    ["frame_id", "hand_id", "mean_error_mm", "aligned_error_mm", "mae_x_mm", "mae_y_mm", "mae_z_mm"]
        .map(String::from)
        .into()
}

fn curve_header() -> Vec<String> {
    ["threshold_mm", "fraction", "aligned_fraction"].map(String::from).into()
}

fn summary_header() -> Vec<String> {
    ["key", "value"].map(String::from).into()
}

const SUMMARY_KEYS: [&str; 7] = [
    "frames",
    "failed_frames",
    "mean_error_mm",
    "aligned_mean_error_mm",
    "mae_x_mm",
    "mae_y_mm",
    "mae_z_mm",
];

/// The three metric tables: per-frame, threshold curve, summary.
pub fn metrics_to_strings(report: &MetricsReport) -> [String; 3] {
    let frames = render_table(
        METRICS_FORMAT,
        &metrics_header(),
        report.frames.iter().map(|f| {
            vec![
                f.frame_id.to_string(),
                f.hand_id.clone(),
                fmt_f64(f.mean_error_mm),
                fmt_f64(f.aligned_error_mm),
                fmt_f64(f.axis_error_mm[0]),
                fmt_f64(f.axis_error_mm[1]),
                fmt_f64(f.axis_error_mm[2]),
            ]
        }),
    );
    let curve = render_table(
        CURVE_FORMAT,
        &curve_header(),
        report
            .threshold_curve
            .iter()
            .zip(&report.aligned_threshold_curve)
            .map(|(c, a)| vec![fmt_f64(c.threshold_mm), fmt_f64(c.fraction), fmt_f64(a.fraction)]),
    );
    let values = [
        report.frames.len() as f64,
        report.failed_frames as f64,
        report.mean_error_mm,
        report.aligned_mean_error_mm,
        report.per_axis_mae[0],
        report.per_axis_mae[1],
        report.per_axis_mae[2],
    ];
    let summary = render_table(
        SUMMARY_FORMAT,
        &summary_header(),
        SUMMARY_KEYS.iter().zip(values).map(|(k, v)| vec![k.to_string(), fmt_f64(v)]),
    );
    [frames, curve, summary]
}

pub fn write_metrics(dir: &Path, report: &MetricsReport) -> Result<()> {
    ensure_dir(dir)?;
    let [frames, curve, summary] = metrics_to_strings(report);
    write_text(&dir.join(METRICS_FILE), &frames)?;
    write_text(&dir.join(CURVE_FILE), &curve)?;
    write_text(&dir.join(SUMMARY_FILE), &summary)
}

pub fn read_metrics(dir: &Path) -> Result<MetricsReport> {
    let path = dir.join(METRICS_FILE);
    let frames = parse_table(&path, &read_text(&path)?, METRICS_FORMAT, &metrics_header())?
        .into_iter()
        .map(|row| {
            require_width(&path, &row, 7, |n| format!("expected 7 columns, found {n}"))?;
            let v = floats(&path, &row, 2, 5)?;
            Ok(FrameMetrics {
                frame_id: field(&path, &row, 0, "frame_id")?,
                hand_id: row.fields[1].clone(),
                mean_error_mm: v[0],
                aligned_error_mm: v[1],
                axis_error_mm: [v[2], v[3], v[4]],
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let path = dir.join(CURVE_FILE);
    let mut curve = Vec::new();
    let mut aligned = Vec::new();
    for row in parse_table(&path, &read_text(&path)?, CURVE_FORMAT, &curve_header())? {
        require_width(&path, &row, 3, |n| format!("expected 3 columns, found {n}"))?;
        let v = floats(&path, &row, 0, 3)?;
        curve.push(CurvePoint { threshold_mm: v[0], fraction: v[1] });
        aligned.push(CurvePoint { threshold_mm: v[0], fraction: v[2] });
    }

    let path = dir.join(SUMMARY_FILE);
    let mut summary: HashMap<String, f64> = HashMap::new();
    for row in parse_table(&path, &read_text(&path)?, SUMMARY_FORMAT, &summary_header())? {
        require_width(&path, &row, 2, |n| format!("expected 2 columns, found {n}"))?;
        summary.insert(row.fields[0].clone(), field(&path, &row, 1, "value")?);
    }
    let get = |k: &str| {
        summary
            .get(k)
            .copied()
            .ok_or_else(|| Error::format(&path, 0, format!("missing summary key `{k}`")))
    };
    Ok(MetricsReport {
        threshold_curve: curve,
        aligned_threshold_curve: aligned,
        per_axis_mae: [get("mae_x_mm")?, get("mae_y_mm")?, get("mae_z_mm")?],
        mean_error_mm: get("mean_error_mm")?,
        aligned_mean_error_mm: get("aligned_mean_error_mm")?,
        failed_frames: get("failed_frames")? as usize,
        frames,
    })
}

/// Path of the poses table inside an output directory.
pub fn poses_path(dir: &Path) -> PathBuf {
    dir.join(POSES_FILE)
}
