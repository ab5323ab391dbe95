//! Rigid-body primitives on SO(3) and SE(3).
//!
//! Rotations are kept as plain 3x3 matrices: the measurement Jacobian and the
//! propagation equations consume `R` directly.

use std::ops::Mul;

use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Below this angle `exp`/`log` switch to their Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-8;
/// Within this distance of pi, `log` recovers the axis from `(R + I) / 2`.
const NEAR_PI: f64 = 1e-6;

/// `[v]x` such that `skew(v) * w == v.cross(&w)`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`] applied to the antisymmetric part of `m`.
fn vee_antisym(m: &Mat3) -> Vec3 {
    Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Wraps a matrix the caller guarantees is a proper rotation.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Rotation(m)
    }

    /// Projects an approximately orthonormal matrix back onto SO(3) by
    /// Gram-Schmidt on its columns.
    pub fn from_matrix_orthonormalized(m: Mat3) -> Self {
        let x = m.column(0).normalize();
        let y = (m.column(1) - x * x.dot(&m.column(1))).normalize();
        let z = x.cross(&y);
        Rotation(Mat3::from_columns(&[x, y, z]))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    /// Exponential map from a rotation vector (Rodrigues).
    pub fn exp(theta: &Vec3) -> Self {
        let angle_sq = theta.norm_squared();
        let angle = angle_sq.sqrt();
        let k = skew(theta);
        if angle < SMALL_ANGLE {
            return Rotation(Mat3::identity() + k + k * k * 0.5);
        }
        let a = angle.sin() / angle;
        let b = (1.0 - angle.cos()) / angle_sq;
        Rotation(Mat3::identity() + k * a + k * k * b)
    }

    /// Logarithm map; the returned rotation vector has norm in `[0, pi]`.
    pub fn log(&self) -> Vec3 {
        let r = &self.0;
        let cos = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
        let w = vee_antisym(r);
        let sin = w.norm();
        let angle = sin.atan2(cos);
        if angle < SMALL_ANGLE {
            // first-order: R ~ I + [w]x
            return w;
        }
        if std::f64::consts::PI - angle < NEAR_PI {
            // the symmetric part of (R + I) / 2 tends to a a^T
            let b = (r + r.transpose()) * 0.25 + Mat3::identity() * 0.5;
            let i = (0..3)
                .max_by(|&i, &j| b[(i, i)].total_cmp(&b[(j, j)]))
                .unwrap_or(0);
            let mut axis = b.column(i) / b[(i, i)].max(0.0).sqrt();
            axis.normalize_mut();
            if axis.dot(&w) < 0.0 {
                axis = -axis;
            }
            return axis * angle;
        }
        w * (angle / sin)
    }

    pub fn angle(&self) -> f64 {
        self.log().norm()
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Minimal rotation taking direction `from` onto direction `to`.
    pub fn between(from: &Vec3, to: &Vec3) -> Self {
        let a = from.normalize();
        let b = to.normalize();
        let axis = a.cross(&b);
        let s = axis.norm();
        let c = a.dot(&b);
        if s < SMALL_ANGLE {
            if c > 0.0 {
                return Self::identity();
            }
            // antiparallel: half-turn about any axis orthogonal to a
            let helper = if a.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
            let ortho = a.cross(&helper).normalize();
            return Self::exp(&(ortho * std::f64::consts::PI));
        }
        Self::exp(&(axis / s * s.atan2(c)))
    }

    pub fn from_quaternion(qx: f64, qy: f64, qz: f64, qw: f64) -> Self {
        let q = UnitQuaternion::from_quaternion(Quaternion::new(qw, qx, qy, qz));
        Rotation(*q.to_rotation_matrix().matrix())
    }

    /// `(qx, qy, qz, qw)` with `qw >= 0`.
    pub fn to_quaternion(&self) -> [f64; 4] {
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.0));
        let q = if q.w < 0.0 { -q.into_inner() } else { q.into_inner() };
        [q.i, q.j, q.k, q.w]
    }

    pub fn orthogonality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Mat3::identity()).abs().max()
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for Rotation {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl Mul<&Vec3> for Rotation {
    type Output = Vec3;
    fn mul(self, rhs: &Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// Rigid transform `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl Pose {
    pub fn new(rotation: Rotation, translation: Vec3) -> Self {
        Pose {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn from_translation(t: Vec3) -> Self {
        Pose::new(Rotation::identity(), t)
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.0 * p + self.translation
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation.0 * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt.0 * self.translation),
        }
    }

    /// Geodesic-in-rotation, linear-in-translation blend; `alpha = 0` gives
    /// `self`, `alpha = 1` gives `other`.
    pub fn interpolate(&self, other: &Pose, alpha: f64) -> Pose {
        let delta = (self.rotation.transpose() * other.rotation).log();
        Pose {
            rotation: self.rotation * Rotation::exp(&(delta * alpha)),
            translation: self.translation + (other.translation - self.translation) * alpha,
        }
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}
