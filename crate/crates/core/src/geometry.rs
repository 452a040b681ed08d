//! Rigid transforms, weighted averaging and pinhole projection.
//!
//! # Conventions
//!
//! A [`Pose`] maps points expressed in a *child* frame into its *parent*
//! frame: `p_parent = R * p_child + t`. Composition reads right to left,
//! so `compose(a, b)` applies `b` first and then `a`:
//!
//! ```text
//! parent_T_grandchild = compose(parent_T_child, child_T_grandchild)
//! ```
//!
//! Quaternions are stored scalar-first (`w, x, y, z`) everywhere, including
//! files and the wire protocol.
//!
//! Camera frames follow the usual computer-vision layout: `+z` along the
//! optical axis, `+x` to the right of the image and `+y` down.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;
pub type Vec2 = Vector2<f64>;

/// Points closer to the camera plane than this (in meters) are not projected.
pub const Z_MIN: f64 = 1e-6;

/// Weighted quaternion means with a norm below this are rejected as degenerate.
pub const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("quaternion has zero norm")]
    ZeroQuaternion,
    #[error("cannot average an empty set")]
    Empty,
    #[error("{points} values but {weights} weights")]
    LengthMismatch { points: usize, weights: usize },
    #[error("weight {index} is not positive ({value})")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("quaternion average is degenerate (norm {norm:e})")]
    DegenerateAverage { norm: f64 },
    #[error("point is behind the camera (z = {z})")]
    BehindCamera { z: f64 },
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
}

/// Unit quaternion, scalar first.
///
/// Every constructor normalizes, so a value of this type always has unit
/// norm. `q` and `-q` describe the same rotation; use
/// [`Quaternion::rotation_eq`] or [`Quaternion::angle_to`] to compare
/// rotations rather than `==`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Normalizing constructor.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(GeometryError::ZeroQuaternion);
        }
        Ok(Self {
            w: w / norm,
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    pub fn from_wxyz(q: [f64; 4]) -> Result<Self, GeometryError> {
        Self::new(q[0], q[1], q[2], q[3])
    }

    /// Rotation of `angle` radians about `axis`. A zero axis yields identity.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::IDENTITY;
        }
        let (s, c) = (angle / 2.0).sin_cos();
        let a = axis / n;
        Self::new(c, a.x * s, a.y * s, a.z * s).unwrap_or(Self::IDENTITY)
    }

    /// Rotation by the vector `v`: axis `v / |v|`, angle `|v|`.
    pub fn from_rotation_vector(v: Vec3) -> Self {
        Self::from_axis_angle(v, v.norm())
    }

    pub fn rot_x(angle: f64) -> Self {
        Self::from_axis_angle(Vec3::x(), angle)
    }

    pub fn rot_y(angle: f64) -> Self {
        Self::from_axis_angle(Vec3::y(), angle)
    }

    pub fn rot_z(angle: f64) -> Self {
        Self::from_axis_angle(Vec3::z(), angle)
    }

    /// Builds a rotation whose columns are the given orthonormal axes.
    pub fn from_basis(x_axis: Vec3, y_axis: Vec3, z_axis: Vec3) -> Self {
        // Shepperd's method on the column matrix [x y z].
        let m = [
            [x_axis.x, y_axis.x, z_axis.x],
            [x_axis.y, y_axis.y, z_axis.y],
            [x_axis.z, y_axis.z, z_axis.z],
        ];
        let trace = m[0][0] + m[1][1] + m[2][2];
        let q = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            [
                0.25 * s,
                (m[2][1] - m[1][2]) / s,
                (m[0][2] - m[2][0]) / s,
                (m[1][0] - m[0][1]) / s,
            ]
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            [
                (m[2][1] - m[1][2]) / s,
                0.25 * s,
                (m[0][1] + m[1][0]) / s,
                (m[0][2] + m[2][0]) / s,
            ]
        } else if m[1][1] > m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            [
                (m[0][2] - m[2][0]) / s,
                (m[0][1] + m[1][0]) / s,
                0.25 * s,
                (m[1][2] + m[2][1]) / s,
            ]
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            [
                (m[1][0] - m[0][1]) / s,
                (m[0][2] + m[2][0]) / s,
                (m[1][2] + m[2][1]) / s,
                0.25 * s,
            ]
        };
        Self::from_wxyz(q).unwrap_or(Self::IDENTITY)
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_wxyz(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(&self, other: &Quaternion) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// The same rotation with the opposite sign.
    pub fn negated(&self) -> Self {
        Self {
            w: -self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    pub fn conjugate(&self) -> Self {
        Self {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Hamilton product `self * rhs` (apply `rhs` first).
    pub fn mul(&self, rhs: &Quaternion) -> Self {
        let (a, b) = (self, rhs);
        let raw = [
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        ];
        // Renormalize so drift never accumulates through long chains.
        Self::from_wxyz(raw).unwrap_or(Self::IDENTITY)
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = 2.0 * u.cross(v);
        v + self.w * t + u.cross(&t)
    }

    /// Rotation angle between two orientations in `[0, π]`.
    ///
    /// Equal to `2·acos(|q1·q2|)`, evaluated as
    /// `2·atan2(|q1 − s·q2|, |q1 + s·q2|)` with `s = sign(q1·q2)`, which keeps
    /// full precision for nearly identical rotations.
    pub fn angle_to(&self, other: &Quaternion) -> f64 {
        let s = if self.dot(other) < 0.0 { -1.0 } else { 1.0 };
        let a = self.to_wxyz();
        let b = other.to_wxyz();
        let mut diff = 0.0;
        let mut sum = 0.0;
        for i in 0..4 {
            diff += (a[i] - s * b[i]).powi(2);
            sum += (a[i] + s * b[i]).powi(2);
        }
        2.0 * diff.sqrt().atan2(sum.sqrt())
    }

    /// Rotation equality up to sign, within `tol` radians.
    pub fn rotation_eq(&self, other: &Quaternion, tol: f64) -> bool {
        self.angle_to(other) <= tol
    }
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Serialize for Quaternion {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_wxyz().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Quaternion {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = <[f64; 4]>::deserialize(d)?;
        // Unit values are kept verbatim so that files round-trip bit-exactly.
        let [w, x, y, z] = raw;
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        if (norm - 1.0).abs() <= 1e-12 {
            return Ok(Self { w, x, y, z });
        }
        Quaternion::from_wxyz(raw).map_err(serde::de::Error::custom)
    }
}

/// Rigid transform from a child frame into its parent frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    #[serde(rename = "p", with = "vec3_array")]
    pub position: Vec3,
    #[serde(rename = "q")]
    pub rotation: Quaternion,
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        position: Vec3::new(0.0, 0.0, 0.0),
        rotation: Quaternion::IDENTITY,
    };

    pub fn new(position: Vec3, rotation: Quaternion) -> Self {
        Self { position, rotation }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(Vec3::new(x, y, z), Quaternion::IDENTITY)
    }

    /// Camera-to-world pose for a camera at `eye` looking at `target`.
    ///
    /// `up` is a world direction that should appear towards the top of the
    /// image; it must not be parallel to the viewing direction.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Self {
        let forward = (target - eye).normalize();
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right);
        Self::new(eye, Quaternion::from_basis(right, down, forward))
    }

    /// Maps a point from the child frame into the parent frame.
    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.position
    }

    pub fn inverse(&self) -> Self {
        let r = self.rotation.conjugate();
        Self::new(-r.rotate(&self.position), r)
    }

    /// Translation distance and rotation angle to another pose.
    pub fn distance_to(&self, other: &Pose) -> (f64, f64) {
        (
            (self.position - other.position).norm(),
            self.rotation.angle_to(&other.rotation),
        )
    }
}

/// `a ∘ b`: applies `b`, then `a`.
pub fn compose(a: &Pose, b: &Pose) -> Pose {
    Pose::new(a.transform_point(&b.position), a.rotation.mul(&b.rotation))
}

pub fn invert(p: &Pose) -> Pose {
    p.inverse()
}

fn check_weights(len: usize, weights: &[f64]) -> Result<(), GeometryError> {
    if len == 0 {
        return Err(GeometryError::Empty);
    }
    if len != weights.len() {
        return Err(GeometryError::LengthMismatch {
            points: len,
            weights: weights.len(),
        });
    }
    if let Some((index, &value)) = weights
        .iter()
        .enumerate()
        .find(|(_, w)| !(**w > 0.0) || !w.is_finite())
    {
        return Err(GeometryError::NonPositiveWeight { index, value });
    }
    Ok(())
}

/// Weighted arithmetic mean `Σ wᵢ pᵢ / Σ wᵢ`.
///
/// A single input is returned unchanged.
pub fn weighted_mean_positions(points: &[Vec3], weights: &[f64]) -> Result<Vec3, GeometryError> {
    check_weights(points.len(), weights)?;
    if points.len() == 1 {
        return Ok(points[0]);
    }
    let total: f64 = weights.iter().sum();
    let sum = points
        .iter()
        .zip(weights)
        .fold(Vec3::zeros(), |acc, (p, w)| acc + p * *w);
    Ok(sum / total)
}

/// Weighted quaternion mean.
///
/// Every quaternion is sign-aligned to the first one (flipped when their dot
/// product is negative), the aligned components are averaged with the given
/// weights and the result is normalized. For the small spreads produced by
/// marker noise this agrees with the eigenvector formulation of the
/// quaternion average. A single input is returned unchanged.
pub fn weighted_mean_quaternions(
    quats: &[Quaternion],
    weights: &[f64],
) -> Result<Quaternion, GeometryError> {
    check_weights(quats.len(), weights)?;
    if quats.len() == 1 {
        return Ok(quats[0]);
    }
    let reference = quats[0];
    let mut acc = [0.0f64; 4];
    let mut total = 0.0;
    for (q, &w) in quats.iter().zip(weights) {
        let aligned = if q.dot(&reference) < 0.0 { q.negated() } else { *q };
        for (a, c) in acc.iter_mut().zip(aligned.to_wxyz()) {
            *a += w * c;
        }
        total += w;
    }
    let mean = acc.map(|c| c / total);
    let norm = mean.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm < DEGENERATE_NORM {
        return Err(GeometryError::DegenerateAverage { norm });
    }
    Quaternion::from_wxyz(mean)
}

/// Pinhole camera intrinsics without distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: f64,
    pub height: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: f64, height: f64) -> Result<Self, GeometryError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(GeometryError::InvalidIntrinsics("focal lengths must be positive"));
        }
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(GeometryError::InvalidIntrinsics("image size must be positive"));
        }
        if !(0.0..=self.width).contains(&self.cx) || !(0.0..=self.height).contains(&self.cy) {
            return Err(GeometryError::InvalidIntrinsics("principal point outside the image"));
        }
        Ok(())
    }

    pub fn contains(&self, px: &Vec2) -> bool {
        (0.0..=self.width).contains(&px.x) && (0.0..=self.height).contains(&px.y)
    }
}

/// Projects a camera-frame point to pixel coordinates with perspective division.
pub fn project_point(k: &CameraIntrinsics, p: &Vec3) -> Result<Vec2, GeometryError> {
    if !(p.z > Z_MIN) {
        return Err(GeometryError::BehindCamera { z: p.z });
    }
    Ok(Vec2::new(k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy))
}

pub(crate) mod vec3_array {
    use super::Vec3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vec3, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y, v.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec3, D::Error> {
        let [x, y, z] = <[f64; 3]>::deserialize(d)?;
        Ok(Vec3::new(x, y, z))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn k500() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640.0, 480.0).unwrap()
    }

    #[test]
    fn compose_identity_and_inverse() {
        let p = Pose::new(Vec3::new(0.3, -0.2, 1.1), Quaternion::new(0.9, 0.1, -0.3, 0.2).unwrap());
        assert_eq!(compose(&Pose::IDENTITY, &p), p);
        let round = compose(&p, &invert(&p));
        let (dt, dr) = round.distance_to(&Pose::IDENTITY);
        assert!(dt < 1e-12 && dr < 1e-9, "{dt} {dr}");
    }

    #[test]
    fn compose_translations() {
        let c = compose(&Pose::from_translation(1.0, 0.0, 0.0), &Pose::from_translation(0.0, 2.0, 0.0));
        assert_eq!(c.position, Vec3::new(1.0, 2.0, 0.0));
        assert_eq!(c.rotation, Quaternion::IDENTITY);
    }

    #[test]
    fn compose_applies_right_operand_first() {
        // Rotate 90° about z, then translate by +x.
        let a = Pose::from_translation(1.0, 0.0, 0.0);
        let b = Pose::new(Vec3::zeros(), Quaternion::rot_z(FRAC_PI_2));
        let p = compose(&a, &b).transform_point(&Vec3::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(p, Vec3::new(1.0, 1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn weighted_positions() {
        let p = Vec3::new(0.1, 0.2, 0.3);
        assert_eq!(weighted_mean_positions(&[p], &[5.0]).unwrap(), p);
        let two = [Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0)];
        assert_abs_diff_eq!(weighted_mean_positions(&two, &[1.0, 1.0]).unwrap(), Vec3::new(0.5, 0.0, 0.0));
        assert_abs_diff_eq!(
            weighted_mean_positions(&two, &[1.0, 0.25]).unwrap(),
            Vec3::new(0.2, 0.0, 0.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn weighted_positions_rejects_bad_input() {
        assert_eq!(weighted_mean_positions(&[], &[]), Err(GeometryError::Empty));
        assert!(matches!(
            weighted_mean_positions(&[Vec3::zeros()], &[1.0, 2.0]),
            Err(GeometryError::LengthMismatch { .. })
        ));
        assert!(matches!(
            weighted_mean_positions(&[Vec3::zeros(), Vec3::zeros()], &[1.0, 0.0]),
            Err(GeometryError::NonPositiveWeight { index: 1, .. })
        ));
    }

    #[test]
    fn quaternion_mean_cases() {
        let q = Quaternion::new(0.8, 0.1, 0.5, -0.2).unwrap();
        let m = weighted_mean_quaternions(&[q, q, q], &[0.3, 2.0, 7.0]).unwrap();
        assert!(m.rotation_eq(&q, 1e-9));
        let m = weighted_mean_quaternions(&[q, q.negated()], &[1.0, 1.0]).unwrap();
        assert!(m.rotation_eq(&q, 1e-9));

        let m = weighted_mean_quaternions(&[Quaternion::rot_z(0.0), Quaternion::rot_z(FRAC_PI_2)], &[1.0, 1.0])
            .unwrap();
        assert!(m.angle_to(&Quaternion::rot_z(FRAC_PI_4)) < 1e-9);
    }

    #[test]
    fn quaternion_mean_degenerate() {
        // After alignment the mean has a component >= w0/W along the first
        // quaternion, so degeneracy needs a negligible first weight and two
        // others that cancel exactly.
        let first = Quaternion::IDENTITY;
        let a = Quaternion::new(0.0, 1.0, 0.0, 0.0).unwrap();
        let b = a.negated();
        assert!(matches!(
            weighted_mean_quaternions(&[first, a, b], &[1e-20, 1.0, 1.0]),
            Err(GeometryError::DegenerateAverage { .. })
        ));
        assert!(weighted_mean_quaternions(&[first, a, b], &[1.0, 1.0, 1.0]).is_ok());
    }

    #[test]
    fn projection_cases() {
        let k = k500();
        assert_eq!(project_point(&k, &Vec3::new(0.0, 0.0, 1.0)).unwrap(), Vec2::new(320.0, 240.0));
        assert_abs_diff_eq!(
            project_point(&k, &Vec3::new(0.1, 0.0, 1.0)).unwrap(),
            Vec2::new(370.0, 240.0),
            epsilon = 1e-12
        );
        assert!(matches!(
            project_point(&k, &Vec3::new(0.0, 0.0, -1.0)),
            Err(GeometryError::BehindCamera { .. })
        ));
        assert!(project_point(&k, &Vec3::new(0.0, 0.0, Z_MIN)).is_err());
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0, 10.0, 10.0).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 11.0, 0.0, 10.0, 10.0).is_err());
    }

    #[test]
    fn look_at_points_optical_axis_at_target() {
        let eye = Vec3::new(0.0, 0.6, 0.5);
        let target = Vec3::new(0.0, 0.0, 0.1);
        let cam = Pose::look_at(eye, target, Vec3::z());
        let in_cam = cam.inverse().transform_point(&target);
        assert_abs_diff_eq!(in_cam.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(in_cam.y, 0.0, epsilon = 1e-12);
        assert!(in_cam.z > 0.0);
        // World up maps to image up (negative camera y).
        let above = cam.inverse().transform_point(&(target + Vec3::z() * 0.1));
        assert!(above.y < 0.0);
    }

    #[test]
    fn from_basis_roundtrip() {
        for q in [
            Quaternion::rot_x(2.9),
            Quaternion::rot_y(-3.0),
            Quaternion::rot_z(PI),
            Quaternion::new(0.1, 0.7, -0.7, 0.1).unwrap(),
        ] {
            let b = Quaternion::from_basis(q.rotate(&Vec3::x()), q.rotate(&Vec3::y()), q.rotate(&Vec3::z()));
            assert!(b.rotation_eq(&q, 1e-9), "{q:?} {b:?}");
        }
    }

    fn arb_quat() -> impl Strategy<Value = Quaternion> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("non-zero", |(w, x, y, z)| w * w + x * x + y * y + z * z > 1e-3)
            .prop_map(|(w, x, y, z)| Quaternion::new(w, x, y, z).unwrap())
    }

    fn arb_pose() -> impl Strategy<Value = Pose> {
        (prop::array::uniform3(-2.0..2.0f64), arb_quat()).prop_map(|(p, q)| Pose::new(Vec3::from(p), q))
    }

    proptest! {
        #[test]
        fn unit_norm_everywhere(a in arb_quat(), b in arb_quat()) {
            prop_assert!((a.norm() - 1.0).abs() <= 1e-9);
            prop_assert!((a.mul(&b).norm() - 1.0).abs() <= 1e-9);
            let m = weighted_mean_quaternions(&[a, b], &[1.0, 3.0]);
            if let Ok(m) = m {
                prop_assert!((m.norm() - 1.0).abs() <= 1e-9);
            }
        }

        #[test]
        fn compose_is_associative(a in arb_pose(), b in arb_pose(), c in arb_pose()) {
            let left = compose(&compose(&a, &b), &c);
            let right = compose(&a, &compose(&b, &c));
            let (dt, dr) = left.distance_to(&right);
            prop_assert!(dt <= 1e-9 && dr <= 1e-9);
        }

        #[test]
        fn inverse_cancels(p in arb_pose()) {
            let (dt, dr) = compose(&invert(&p), &p).distance_to(&Pose::IDENTITY);
            prop_assert!(dt <= 1e-9 && dr <= 1e-9);
        }

        #[test]
        fn position_mean_scale_invariant(
            pts in prop::collection::vec(prop::array::uniform3(-1.0..1.0f64), 1..6),
            seed_w in prop::collection::vec(0.01..10.0f64, 6),
            scale in 0.001..1000.0f64,
        ) {
            let pts: Vec<Vec3> = pts.into_iter().map(Vec3::from).collect();
            let w = &seed_w[..pts.len()];
            let scaled: Vec<f64> = w.iter().map(|x| x * scale).collect();
            let a = weighted_mean_positions(&pts, w).unwrap();
            let b = weighted_mean_positions(&pts, &scaled).unwrap();
            prop_assert!((a - b).norm() <= 1e-12);
        }

        #[test]
        fn quaternion_mean_sign_invariant(
            base in arb_quat(),
            spread in prop::collection::vec(prop::array::uniform3(-0.3..0.3f64), 1..6),
            flips in prop::collection::vec(any::<bool>(), 6),
            w in prop::collection::vec(0.1..5.0f64, 6),
        ) {
            let quats: Vec<Quaternion> = spread
                .iter()
                .map(|v| base.mul(&Quaternion::from_rotation_vector(Vec3::from(*v))))
                .collect();
            let flipped: Vec<Quaternion> = quats
                .iter()
                .zip(&flips)
                .map(|(q, f)| if *f { q.negated() } else { *q })
                .collect();
            let w = &w[..quats.len()];
            let a = weighted_mean_quaternions(&quats, w).unwrap();
            let b = weighted_mean_quaternions(&flipped, w).unwrap();
            prop_assert!(a.rotation_eq(&b, 1e-9));
        }

        #[test]
        fn projection_scale_invariant(
            x in -1.0..1.0f64, y in -1.0..1.0f64, z in 0.1..5.0f64, s in 0.01..100.0f64,
        ) {
            let k = k500();
            let p = Vec3::new(x, y, z);
            let a = project_point(&k, &p).unwrap();
            let b = project_point(&k, &(p * s)).unwrap();
            prop_assert!((a - b).norm() <= 1e-9);
        }
    }
}
