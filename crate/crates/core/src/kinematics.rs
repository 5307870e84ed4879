//! Parametric 21-keypoint hand skeleton and its forward kinematics.
//!
//! Keypoints follow the OpenPose hand layout: 0 is the wrist, then four
//! keypoints per finger ordered base to tip (thumb 1-4, index 5-8, middle
//! 9-12, ring 13-16, pinky 17-20). The wrist is the skeleton root, so the
//! pose translation is the wrist position.
//!
//! Each finger has four articulation parameters, stored finger-major:
//! base flexion, base abduction, middle flexion, distal flexion. The base
//! joint rotates about the parent frame's Z axis (abduction) and then its X
//! axis (flexion); the two distal joints flex about X. At rest all joint
//! frames are aligned with the root frame.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, lift_mat, mat_vec_const, post_rotate_x, post_rotate_z, Mat3, Quat, Vec3};
use crate::scalar::Scalar;

pub const NUM_KEYPOINTS: usize = 21;
pub const NUM_BONES: usize = 20;
pub const NUM_FINGERS: usize = 5;
pub const NUM_ARTICULATIONS: usize = 20;
/// Stored pose values: 3 translation + 4 quaternion + 20 articulation.
pub const NUM_POSE_VALUES: usize = 27;

/// Tolerance on unit-quaternion norms.
pub const QUAT_NORM_TOLERANCE: f64 = 1e-9;

pub const FINGER_NAMES: [&str; NUM_FINGERS] = ["thumb", "index", "middle", "ring", "pinky"];
pub const DOF_NAMES: [&str; 4] = ["base_flexion", "base_abduction", "middle_flexion", "distal_flexion"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Handedness {
    Left,
    Right,
}

impl Handedness {
    pub fn opposite(self) -> Self {
        match self {
            Handedness::Left => Handedness::Right,
            Handedness::Right => Handedness::Left,
        }
    }
}

impl fmt::Display for Handedness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Handedness::Left => "left",
            Handedness::Right => "right",
        })
    }
}

impl FromStr for Handedness {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "left" => Ok(Handedness::Left),
            "right" => Ok(Handedness::Right),
            other => Err(format!("unknown handedness `{other}`")),
        }
    }
}

/// Index of the articulation parameter for `finger` (0..5) and `dof` (0..4).
pub const fn articulation_index(finger: usize, dof: usize) -> usize {
    finger * 4 + dof
}

pub fn is_abduction(articulation: usize) -> bool {
    articulation % 4 == 1
}

pub fn articulation_name(articulation: usize) -> String {
    format!(
        "{}_{}",
        FINGER_NAMES[articulation / 4],
        DOF_NAMES[articulation % 4]
    )
}

/// Parent keypoint of `child` in the fixed topology.
pub const fn parent_of(child: usize) -> usize {
    if (child - 1) % 4 == 0 {
        0
    } else {
        child - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bone {
    pub parent: usize,
    pub child: usize,
    /// Rest length, millimeters.
    pub length: f64,
    /// Unit rest direction in the parent joint frame.
    pub direction: Vec3,
}

impl Bone {
    fn offset(&self) -> Vec3 {
        geometry::scale(self.direction, self.length)
    }
}

/// Closed interval of admissible values for one articulation, radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointLimit {
    pub lo: f64,
    pub hi: f64,
}

impl JointLimit {
    pub fn new(lo: f64, hi: f64) -> Self {
        JointLimit { lo, hi }
    }

    pub fn from_degrees(lo: f64, hi: f64) -> Self {
        JointLimit::new(lo.to_radians(), hi.to_radians())
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.lo && value <= self.hi
    }

    pub fn clamp(&self, value: f64) -> f64 {
        value.clamp(self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HandModel {
    bones: [Bone; NUM_BONES],
    limits: [JointLimit; NUM_ARTICULATIONS],
    handedness: Handedness,
}

impl HandModel {
    /// Builds a model from a bone table in any order; validates topology,
    /// lengths, directions and limits.
    pub fn new(bones: Vec<Bone>, limits: Vec<JointLimit>, handedness: Handedness) -> Result<Self> {
        if bones.len() != NUM_BONES {
            return Err(Error::InvalidModel(format!(
                "expected {NUM_BONES} bones, got {}",
                bones.len()
            )));
        }
        if limits.len() != NUM_ARTICULATIONS {
            return Err(Error::InvalidModel(format!(
                "expected {NUM_ARTICULATIONS} joint limits, got {}",
                limits.len()
            )));
        }
        let mut slots: [Option<Bone>; NUM_BONES] = [None; NUM_BONES];
        for bone in bones {
            if bone.child == 0 || bone.child >= NUM_KEYPOINTS {
                return Err(Error::InvalidModel(format!(
                    "bone child index {} out of range 1..={}",
                    bone.child,
                    NUM_KEYPOINTS - 1
                )));
            }
            if bone.parent != parent_of(bone.child) {
                return Err(Error::InvalidModel(format!(
                    "keypoint {} must hang from keypoint {}, not {}",
                    bone.child,
                    parent_of(bone.child),
                    bone.parent
                )));
            }
            if !(bone.length.is_finite() && bone.length > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "bone {}->{} has non-positive length {}",
                    bone.parent, bone.child, bone.length
                )));
            }
            let n = geometry::norm(bone.direction);
            if !n.is_finite() || (n - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidModel(format!(
                    "bone {}->{} direction is not a unit vector (norm {n})",
                    bone.parent, bone.child
                )));
            }
            let slot = &mut slots[bone.child - 1];
            if slot.is_some() {
                return Err(Error::InvalidModel(format!(
                    "keypoint {} has two parent bones",
                    bone.child
                )));
            }
            *slot = Some(bone);
        }
        // 20 distinct children in 1..=20 fill every slot.
        let bones = slots.map(|b| b.expect("every slot filled"));

        for (i, l) in limits.iter().enumerate() {
            if !(l.lo.is_finite() && l.hi.is_finite() && l.lo < l.hi) {
                return Err(Error::InvalidModel(format!(
                    "limit for {} must satisfy lo < hi (got [{}, {}])",
                    articulation_name(i),
                    l.lo,
                    l.hi
                )));
            }
            if l.lo < -PI || l.hi > PI {
                return Err(Error::InvalidModel(format!(
                    "limit for {} leaves [-pi, pi]",
                    articulation_name(i)
                )));
            }
        }
        let limits: [JointLimit; NUM_ARTICULATIONS] = limits.try_into().expect("length checked");

        Ok(HandModel {
            bones,
            limits,
            handedness,
        })
    }

    /// Average adult left hand, lengths in millimeters.
    ///
    /// In the root frame at rest the palm faces -Z, fingers point along -Y
    /// and the thumb sits on the +X side.
    pub fn default_left() -> Self {
        // (metacarpal offset from wrist, phalanx direction, phalanx lengths)
        let fingers: [(Vec3, Vec3, [f64; 3]); NUM_FINGERS] = [
            ([22.0, -18.0, -8.0], [0.6, -0.75, -0.28], [38.0, 32.0, 27.0]),
            ([25.0, -82.0, 0.0], [0.05, -1.0, 0.0], [40.0, 23.0, 20.0]),
            ([5.0, -84.0, 0.0], [0.0, -1.0, 0.0], [45.0, 27.0, 22.0]),
            ([-13.0, -78.0, 0.0], [-0.05, -1.0, 0.0], [42.0, 26.0, 21.0]),
            ([-28.0, -70.0, 0.0], [-0.12, -1.0, 0.0], [33.0, 19.0, 19.0]),
        ];
        let mut bones = Vec::with_capacity(NUM_BONES);
        for (f, (meta, dir, lengths)) in fingers.iter().enumerate() {
            let base = 1 + 4 * f;
            bones.push(Bone {
                parent: 0,
                child: base,
                length: geometry::norm(*meta),
                direction: geometry::normalize(*meta),
            });
            for (k, &length) in lengths.iter().enumerate() {
                bones.push(Bone {
                    parent: base + k,
                    child: base + k + 1,
                    length,
                    direction: geometry::normalize(*dir),
                });
            }
        }

        let thumb = [(-40.0, 70.0), (-45.0, 45.0), (-15.0, 90.0), (-20.0, 90.0)];
        let finger = [(-10.0, 90.0), (-25.0, 25.0), (-5.0, 100.0), (-5.0, 90.0)];
        let limits = (0..NUM_ARTICULATIONS)
            .map(|i| {
                let (lo, hi) = if i < 4 { thumb[i] } else { finger[i % 4] };
                JointLimit::from_degrees(lo, hi)
            })
            .collect();
        HandModel::new(bones, limits, Handedness::Left).expect("default model is valid")
    }

    pub fn default_for(handedness: Handedness) -> Self {
        match handedness {
            Handedness::Left => HandModel::default_left(),
            Handedness::Right => mirror_model(&HandModel::default_left()),
        }
    }

    /// Bones ordered by child keypoint (bone `k - 1` ends at keypoint `k`).
    pub fn bones(&self) -> &[Bone; NUM_BONES] {
        &self.bones
    }

    pub fn limits(&self) -> &[JointLimit; NUM_ARTICULATIONS] {
        &self.limits
    }

    pub fn handedness(&self) -> Handedness {
        self.handedness
    }

    /// Rest value of each articulation: zero, pulled into the limits.
    pub fn rest_articulation(&self) -> [f64; NUM_ARTICULATIONS] {
        self.limits.map(|l| l.clamp(0.0))
    }

    /// Wrist to middle fingertip distance in the rest pose, millimeters.
    pub fn hand_span(&self) -> f64 {
        let rest = forward_kinematics(self, &PoseParams::rest(self)).expect("rest pose is valid");
        geometry::distance(rest.points[0], rest.points[12])
    }
}

/// Pose vector: wrist translation (mm), root orientation, finger angles (rad).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseParams {
    pub translation: Vec3,
    pub rotation: Quat,
    pub articulation: [f64; NUM_ARTICULATIONS],
}

impl PoseParams {
    /// Rest articulation, identity rotation, wrist at the origin.
    pub fn rest(model: &HandModel) -> Self {
        PoseParams {
            translation: [0.0; 3],
            rotation: Quat::IDENTITY,
            articulation: model.rest_articulation(),
        }
    }

    pub fn to_values(&self) -> [f64; NUM_POSE_VALUES] {
        let mut out = [0.0; NUM_POSE_VALUES];
        out[..3].copy_from_slice(&self.translation);
        out[3..7].copy_from_slice(&self.rotation.to_array());
        out[7..].copy_from_slice(&self.articulation);
        out
    }

    pub fn from_values(values: &[f64; NUM_POSE_VALUES]) -> Self {
        PoseParams {
            translation: [values[0], values[1], values[2]],
            rotation: Quat::new(values[3], values[4], values[5], values[6]),
            articulation: values[7..].try_into().expect("20 values"),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_values().iter().all(|v| v.is_finite())
    }

    /// Checks the quaternion norm and joint limits against `model`.
    pub fn validate(&self, model: &HandModel) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::InvalidPose("non-finite pose value".into()));
        }
        let n = self.rotation.norm();
        if (n - 1.0).abs() > QUAT_NORM_TOLERANCE {
            return Err(Error::InvalidPose(format!("quaternion norm {n} is not 1")));
        }
        for (i, (&a, l)) in self.articulation.iter().zip(model.limits()).enumerate() {
            if !l.contains(a) {
                return Err(Error::InvalidPose(format!(
                    "{} = {a} outside [{}, {}]",
                    articulation_name(i),
                    l.lo,
                    l.hi
                )));
            }
        }
        Ok(())
    }

    /// Applies a tangent increment: translation and articulation add,
    /// rotation takes an exponential-map step. No clamping.
    pub fn retract(&self, delta: &[f64]) -> PoseParams {
        debug_assert_eq!(delta.len(), crate::dual::TANGENT_DIM);
        let mut out = *self;
        for i in 0..3 {
            out.translation[i] += delta[i];
        }
        out.rotation = crate::solver::step_quaternion(self.rotation, [delta[3], delta[4], delta[5]]);
        for (a, d) in out.articulation.iter_mut().zip(&delta[6..]) {
            *a += d;
        }
        out
    }

    /// The same hand motion seen through the X = 0 mirror; pairs with
    /// [`mirror_model`].
    pub fn mirrored(&self) -> PoseParams {
        let mut out = *self;
        out.translation[0] = -self.translation[0];
        let q = self.rotation;
        out.rotation = Quat::new(q.w, q.x, -q.y, -q.z);
        for (i, a) in out.articulation.iter_mut().enumerate() {
            if is_abduction(i) {
                *a = -*a;
            }
        }
        out
    }
}

/// 21 keypoints, millimeters, world frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointSet3D {
    pub points: [Vec3; NUM_KEYPOINTS],
}

impl JointSet3D {
    pub fn map(&self, f: impl Fn(Vec3) -> Vec3) -> JointSet3D {
        JointSet3D {
            points: self.points.map(f),
        }
    }
}

/// Forward kinematics for any scalar type; `rotation` is the root rotation
/// matrix. Inputs are not validated.
pub fn forward_kinematics_generic<S: Scalar>(
    model: &HandModel,
    translation: [S; 3],
    rotation: &Mat3<S>,
    articulation: &[S; NUM_ARTICULATIONS],
) -> [[S; 3]; NUM_KEYPOINTS] {
    let mut points = [[S::zero(); 3]; NUM_KEYPOINTS];
    points[0] = translation;
    for finger in 0..NUM_FINGERS {
        let base = 1 + 4 * finger;
        let a = &articulation[4 * finger..4 * finger + 4];
        points[base] = geometry::add(
            translation,
            mat_vec_const(rotation, model.bones[base - 1].offset()),
        );

        let mut frame = post_rotate_z(rotation, a[1].cos(), a[1].sin());
        frame = post_rotate_x(&frame, a[0].cos(), a[0].sin());
        points[base + 1] = geometry::add(points[base], mat_vec_const(&frame, model.bones[base].offset()));

        frame = post_rotate_x(&frame, a[2].cos(), a[2].sin());
        points[base + 2] = geometry::add(
            points[base + 1],
            mat_vec_const(&frame, model.bones[base + 1].offset()),
        );

        frame = post_rotate_x(&frame, a[3].cos(), a[3].sin());
        points[base + 3] = geometry::add(
            points[base + 2],
            mat_vec_const(&frame, model.bones[base + 2].offset()),
        );
    }
    points
}

/// Unchecked `f64` forward kinematics; used inside the optimizer where the
/// pose is valid by construction.
pub(crate) fn forward_kinematics_unchecked(model: &HandModel, pose: &PoseParams) -> JointSet3D {
    let rotation = lift_mat::<f64>(&pose.rotation.to_matrix());
    JointSet3D {
        points: forward_kinematics_generic(model, pose.translation, &rotation, &pose.articulation),
    }
}

/// World-frame keypoints of `pose`.
pub fn forward_kinematics(model: &HandModel, pose: &PoseParams) -> Result<JointSet3D> {
    pose.validate(model)?;
    Ok(forward_kinematics_unchecked(model, pose))
}

/// Opposite-handed copy: rest directions reflected across X = 0, abduction
/// limits negated.
pub fn mirror_model(model: &HandModel) -> HandModel {
    let mut bones = model.bones;
    for b in &mut bones {
        b.direction[0] = -b.direction[0];
    }
    let mut limits = model.limits;
    for (i, l) in limits.iter_mut().enumerate() {
        if is_abduction(i) {
            *l = JointLimit::new(-l.hi, -l.lo);
        }
    }
    HandModel {
        bones,
        limits,
        handedness: model.handedness.opposite(),
    }
}

/// Pulls articulation into the limits and renormalizes the quaternion.
pub fn clamp_to_limits(model: &HandModel, pose: &PoseParams) -> Result<PoseParams> {
    if !pose.is_finite() {
        return Err(Error::InvalidPose("non-finite pose value".into()));
    }
    let n = pose.rotation.norm();
    if n == 0.0 {
        return Err(Error::InvalidPose("zero quaternion".into()));
    }
    let mut out = *pose;
    for (a, l) in out.articulation.iter_mut().zip(model.limits()) {
        *a = l.clamp(*a);
    }
    // Already-unit quaternions are left alone so clamping is idempotent.
    if (n - 1.0).abs() > 4.0 * f64::EPSILON {
        out.rotation = pose.rotation.normalized();
    }
    Ok(out)
}
