//! Calibrated pinhole camera with Brown-Conrady distortion.
//!
//! A world point is moved into the camera frame by the extrinsics
//! (`p_cam = R * p_world + t`), perspective-divided, distorted, and mapped to
//! pixels by the intrinsics. Camera axes: x right, y down, z forward.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, lift, lift_mat, mat_vec, Mat3, Quat, Vec3};
use crate::kinematics::{JointSet3D, NUM_KEYPOINTS, QUAT_NORM_TOLERANCE};
use crate::scalar::Scalar;

/// Radial (k1, k2, k3) and tangential (p1, p2) coefficients.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Distortion {
    pub k1: f64,
    pub k2: f64,
    pub p1: f64,
    pub p2: f64,
    pub k3: f64,
}

impl Distortion {
    pub const NONE: Distortion = Distortion {
        k1: 0.0,
        k2: 0.0,
        p1: 0.0,
        p2: 0.0,
        k3: 0.0,
    };

    pub fn to_array(self) -> [f64; 5] {
        [self.k1, self.k2, self.p1, self.p2, self.k3]
    }

    pub fn from_array(d: [f64; 5]) -> Self {
        Distortion {
            k1: d[0],
            k2: d[1],
            p1: d[2],
            p2: d[3],
            k3: d[4],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.to_array().iter().all(|&c| c == 0.0)
    }

    /// Distorts normalized image coordinates.
    #[inline]
    pub fn apply<S: Scalar>(&self, x: S, y: S) -> (S, S) {
        if self.is_zero() {
            return (x, y);
        }
        let r2 = x * x + y * y;
        let radial = S::one() + r2 * (S::constant(self.k1) + r2 * (S::constant(self.k2) + r2.scale(self.k3)));
        let xy = x * y;
        let xd = x * radial + xy.scale(2.0 * self.p1) + (r2 + (x * x).scale(2.0)).scale(self.p2);
        let yd = y * radial + (r2 + (y * y).scale(2.0)).scale(self.p1) + xy.scale(2.0 * self.p2);
        (xd, yd)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    /// (fx, fy), pixels.
    pub focal: [f64; 2],
    /// (cx, cy), pixels.
    pub center: [f64; 2],
    pub distortion: Distortion,
    /// World to camera rotation.
    pub rotation: Quat,
    /// World to camera translation, millimeters.
    pub translation: Vec3,
    /// (width, height), pixels.
    pub image_size: [u32; 2],
}

impl Camera {
    pub fn new(
        focal: [f64; 2],
        center: [f64; 2],
        distortion: Distortion,
        rotation: Quat,
        translation: Vec3,
        image_size: [u32; 2],
    ) -> Result<Self> {
        let camera = Camera {
            focal,
            center,
            distortion,
            rotation,
            translation,
            image_size,
        };
        camera.validate()?;
        Ok(camera)
    }

    /// Pinhole camera at the world origin looking down +Z.
    pub fn pinhole(fx: f64, fy: f64, cx: f64, cy: f64, image_size: [u32; 2]) -> Result<Self> {
        Camera::new([fx, fy], [cx, cy], Distortion::NONE, Quat::IDENTITY, [0.0; 3], image_size)
    }

    /// Camera placed at `eye` looking at `target`, with image-down roughly
    /// along `down`.
    pub fn look_at(&self, eye: Vec3, target: Vec3, down: Vec3) -> Result<Self> {
        let z = geometry::normalize(geometry::sub(target, eye));
        let x = geometry::normalize(geometry::cross(down, z));
        let y = geometry::cross(z, x);
        let rotation_matrix: Mat3 = [x, y, z];
        let rotation = Quat::from_matrix(&rotation_matrix);
        let r = rotation.to_matrix();
        let t = mat_vec(&r, eye);
        let mut out = self.clone();
        out.rotation = rotation;
        out.translation = [-t[0], -t[1], -t[2]];
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let [fx, fy] = self.focal;
        if !(fx.is_finite() && fy.is_finite() && fx > 0.0 && fy > 0.0) {
            return Err(Error::InvalidCamera(format!("focal lengths must be positive, got ({fx}, {fy})")));
        }
        if self.image_size[0] == 0 || self.image_size[1] == 0 {
            return Err(Error::InvalidCamera("image size must be positive".into()));
        }
        let finite = self.center.iter().all(|v| v.is_finite())
            && self.translation.iter().all(|v| v.is_finite())
            && self.distortion.to_array().iter().all(|v| v.is_finite())
            && self.rotation.is_finite();
        if !finite {
            return Err(Error::InvalidCamera("non-finite parameter".into()));
        }
        let n = self.rotation.norm();
        if (n - 1.0).abs() > QUAT_NORM_TOLERANCE {
            return Err(Error::InvalidCamera(format!("extrinsic quaternion norm {n} is not 1")));
        }
        Ok(())
    }

    pub fn rotation_matrix(&self) -> Mat3 {
        self.rotation.to_matrix()
    }

    /// Position of the optical center in world coordinates.
    pub fn center_in_world(&self) -> Vec3 {
        let rt = geometry::transpose(&self.rotation_matrix());
        let c = mat_vec(&rt, self.translation);
        [-c[0], -c[1], -c[2]]
    }

    pub fn mean_focal(&self) -> f64 {
        0.5 * (self.focal[0] + self.focal[1])
    }

    /// Pixel coordinates of a camera-frame point plus its depth. The pixel
    /// is meaningless when the depth is not positive.
    #[inline]
    pub fn project_camera_point<S: Scalar>(&self, p: [S; 3]) -> (S, S, S) {
        let x = p[0] / p[2];
        let y = p[1] / p[2];
        let (xd, yd) = self.distortion.apply(x, y);
        let u = xd.scale(self.focal[0]) + S::constant(self.center[0]);
        let v = yd.scale(self.focal[1]) + S::constant(self.center[1]);
        (u, v, p[2])
    }

    /// World to pixel for a batch of points, with a precomputed rotation
    /// matrix in the target scalar type.
    #[inline]
    pub(crate) fn project_with<S: Scalar>(&self, rotation: &Mat3<S>, p: [S; 3]) -> (S, S, S) {
        let pc = geometry::add(mat_vec(rotation, p), lift(self.translation));
        self.project_camera_point(pc)
    }

    pub(crate) fn lifted_rotation<S: Scalar>(&self) -> Mat3<S> {
        lift_mat(&self.rotation_matrix())
    }

    /// World-frame point to pixel; `None` behind the camera.
    pub fn project_point(&self, p: Vec3) -> Option<[f64; 2]> {
        let (u, v, z) = self.project_with(&self.rotation_matrix(), p);
        (z > 0.0).then_some([u, v])
    }
}

/// Projected keypoints of one hand in one camera.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection2D {
    /// Pixel coordinates; `None` for points at or behind the camera plane.
    pub points: [Option<[f64; 2]>; NUM_KEYPOINTS],
}

impl Projection2D {
    pub fn in_front(&self) -> [bool; NUM_KEYPOINTS] {
        self.points.map(|p| p.is_some())
    }
}

pub fn project(camera: &Camera, joints: &JointSet3D) -> Projection2D {
    let r = camera.rotation_matrix();
    Projection2D {
        points: joints.points.map(|p| {
            let (u, v, z) = camera.project_with(&r, p);
            (z > 0.0).then_some([u, v])
        }),
    }
}

/// Same intrinsics with identity extrinsics.
pub fn identity_view(camera: &Camera) -> Camera {
    let mut out = camera.clone();
    out.rotation = Quat::IDENTITY;
    out.translation = [0.0; 3];
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigCamera {
    pub id: String,
    #[serde(flatten)]
    pub camera: Camera,
}

/// One or more calibrated cameras with stable identifiers.
#[derive(Clone, Debug, PartialEq)]
pub struct Rig {
    cameras: Vec<RigCamera>,
}

impl Rig {
    pub fn new(cameras: Vec<RigCamera>) -> Result<Self> {
        if cameras.is_empty() {
            return Err(Error::InvalidCamera("rig has no cameras".into()));
        }
        for (i, c) in cameras.iter().enumerate() {
            c.camera.validate()?;
            if cameras[..i].iter().any(|o| o.id == c.id) {
                return Err(Error::InvalidCamera(format!("duplicate camera id `{}`", c.id)));
            }
        }
        Ok(Rig { cameras })
    }

    pub fn single(id: impl Into<String>, camera: Camera) -> Result<Self> {
        Rig::new(vec![RigCamera { id: id.into(), camera }])
    }

    pub fn cameras(&self) -> &[RigCamera] {
        &self.cameras
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.cameras
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| Error::UnknownCamera(id.to_string()))
    }

    pub fn camera(&self, id: &str) -> Result<&Camera> {
        Ok(&self.cameras[self.index_of(id)?].camera)
    }

    /// Rig restricted to the listed cameras, in the given order.
    pub fn subset(&self, ids: &[&str]) -> Result<Rig> {
        let cameras = ids
            .iter()
            .map(|id| self.index_of(id).map(|i| self.cameras[i].clone()))
            .collect::<Result<Vec<_>>>()?;
        Rig::new(cameras)
    }
}
