//! Error-state iterated Kalman filter on SO(3) x R^12.
//!
//! The nominal state is a rotation plus position, velocity and the two IMU
//! biases. Errors live in a 15-dimensional tangent space ordered
//! `(dtheta, dp, dv, dbg, dba)` with the rotation error applied on the right,
//! `R_true = R * Exp(dtheta)`.

mod iekf;
mod init;
mod propagate;

pub use iekf::{iekf_update, iekf_update_with, jacobian_row, residual, IekfConfig, IekfStats};
pub use init::{static_init, StaticInit, MIN_INIT_SAMPLES};
pub use propagate::{propagate, transition, MAX_DT};

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::geometry::{Pose, Rotation, Vec3};

pub const STATE_DIM: usize = 15;
pub type Vec15 = SVector<f64, STATE_DIM>;
pub type Mat15 = SMatrix<f64, STATE_DIM, STATE_DIM>;

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub stamp: f64,
    pub gyro: Vec3,
    pub accel: Vec3,
}

impl ImuSample {
    pub fn new(stamp: f64, gyro: Vec3, accel: Vec3) -> Self {
        ImuSample { stamp, gyro, accel }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavState {
    pub rotation: Rotation,
    pub position: Vec3,
    pub velocity: Vec3,
    pub gyro_bias: Vec3,
    pub accel_bias: Vec3,
    /// Calibrated gravity in the world frame; not estimated.
    pub gravity: Vec3,
    pub stamp: f64,
}

impl Default for NavState {
    fn default() -> Self {
        NavState {
            rotation: Rotation::identity(),
            position: Vec3::zeros(),
            velocity: Vec3::zeros(),
            gyro_bias: Vec3::zeros(),
            accel_bias: Vec3::zeros(),
            gravity: Vec3::new(0.0, 0.0, -GRAVITY),
            stamp: 0.0,
        }
    }
}

impl NavState {
    pub fn pose(&self) -> Pose {
        Pose::new(self.rotation, self.position)
    }

    /// `self [+] dx`: right-multiplicative on rotation, additive elsewhere.
    pub fn retract(&self, dx: &ErrorState) -> NavState {
        NavState {
            rotation: self.rotation * Rotation::exp(&dx.dtheta),
            position: self.position + dx.dp,
            velocity: self.velocity + dx.dv,
            gyro_bias: self.gyro_bias + dx.dbg,
            accel_bias: self.accel_bias + dx.dba,
            ..*self
        }
    }

    /// `self [-] other`, the error that retracts `other` onto `self`.
    pub fn local(&self, other: &NavState) -> ErrorState {
        ErrorState {
            dtheta: (other.rotation.transpose() * self.rotation).log(),
            dp: self.position - other.position,
            dv: self.velocity - other.velocity,
            dbg: self.gyro_bias - other.gyro_bias,
            dba: self.accel_bias - other.accel_bias,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorState {
    pub dtheta: Vec3,
    pub dp: Vec3,
    pub dv: Vec3,
    pub dbg: Vec3,
    pub dba: Vec3,
}

impl ErrorState {
    pub fn from_vector(v: &Vec15) -> Self {
        let b = |i: usize| Vec3::new(v[3 * i], v[3 * i + 1], v[3 * i + 2]);
        ErrorState { dtheta: b(0), dp: b(1), dv: b(2), dbg: b(3), dba: b(4) }
    }

    pub fn to_vector(&self) -> Vec15 {
        let mut v = Vec15::zeros();
        for (i, b) in [self.dtheta, self.dp, self.dv, self.dbg, self.dba].iter().enumerate() {
            v.fixed_rows_mut::<3>(3 * i).copy_from(b);
        }
        v
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateCovariance(pub Mat15);

impl StateCovariance {
    pub fn from_block_std(std: [f64; 5]) -> Self {
        let mut m = Mat15::zeros();
        for (b, s) in std.iter().enumerate() {
            for i in 0..3 {
                m[(3 * b + i, 3 * b + i)] = s * s;
            }
        }
        StateCovariance(m)
    }

    pub fn matrix(&self) -> &Mat15 {
        &self.0
    }

    pub fn symmetrize(&mut self) {
        self.0 = (self.0 + self.0.transpose()) * 0.5;
    }

    pub fn asymmetry(&self) -> f64 {
        (self.0 - self.0.transpose()).abs().max()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0.symmetric_eigenvalues().min()
    }
}

/// Continuous-time noise densities and the initial standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Gyro white noise, rad/s/sqrt(Hz).
    pub gyro_noise: f64,
    /// Accelerometer white noise, m/s^2/sqrt(Hz).
    pub accel_noise: f64,
    /// Gyro bias random walk, rad/s^2/sqrt(Hz).
    pub gyro_bias_walk: f64,
    /// Accelerometer bias random walk, m/s^3/sqrt(Hz).
    pub accel_bias_walk: f64,
    pub init_rot_std: f64,
    pub init_pos_std: f64,
    pub init_vel_std: f64,
    pub init_gyro_bias_std: f64,
    pub init_accel_bias_std: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            gyro_noise: 1e-3,
            accel_noise: 1e-2,
            gyro_bias_walk: 1e-5,
            accel_bias_walk: 1e-4,
            init_rot_std: 1e-2,
            init_pos_std: 1e-2,
            init_vel_std: 1e-2,
            init_gyro_bias_std: 1e-3,
            init_accel_bias_std: 5e-2,
        }
    }
}

impl NoiseConfig {
    pub fn initial_covariance(&self) -> StateCovariance {
        StateCovariance::from_block_std([
            self.init_rot_std,
            self.init_pos_std,
            self.init_vel_std,
            self.init_gyro_bias_std,
            self.init_accel_bias_std,
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn retract_local_roundtrip() {
        let x = NavState {
            rotation: Rotation::exp(&Vec3::new(0.3, -0.2, 1.0)),
            position: Vec3::new(1.0, 2.0, 3.0),
            ..Default::default()
        };
        let dx = ErrorState {
            dtheta: Vec3::new(0.01, 0.02, -0.03),
            dp: Vec3::new(0.1, 0.0, 0.0),
            dv: Vec3::new(0.0, -0.2, 0.0),
            dbg: Vec3::new(1e-3, 0.0, 0.0),
            dba: Vec3::new(0.0, 0.0, 2e-2),
        };
        let back = x.retract(&dx).local(&x);
        assert!((back.to_vector() - dx.to_vector()).norm() < 1e-12);
        assert_eq!(ErrorState::from_vector(&dx.to_vector()), dx);
    }
}
