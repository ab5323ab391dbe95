use crate::error::{Error, Result};
use crate::geometry::{Rotation, Vec3};

use super::{ImuSample, GRAVITY};

pub const MIN_INIT_SAMPLES: usize = 100;
/// Per-axis accelerometer standard deviation above which the platform is
/// considered to be moving.
pub const MAX_ACCEL_STD: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticInit {
    pub gravity: Vec3,
    pub gyro_bias: Vec3,
    /// Body-to-world rotation levelling the measured specific force.
    pub rotation: Rotation,
}

/// Gravity, gyro bias and attitude from a stationary IMU segment.
pub fn static_init(samples: &[ImuSample]) -> Result<StaticInit> {
    if samples.len() < MIN_INIT_SAMPLES {
        return Err(Error::InitFailure(format!(
            "{} samples, need at least {MIN_INIT_SAMPLES}",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let mean_g = samples.iter().map(|s| s.gyro).sum::<Vec3>() / n;
    let mean_a = samples.iter().map(|s| s.accel).sum::<Vec3>() / n;
    let var = samples
        .iter()
        .map(|s| (s.accel - mean_a).component_mul(&(s.accel - mean_a)))
        .sum::<Vec3>()
        / n;
    let std = var.map(f64::sqrt).max();
    if std > MAX_ACCEL_STD {
        return Err(Error::InitFailure(format!("platform moving: accel std {std:.3} m/s^2")));
    }
    if mean_a.norm() < 1e-3 {
        return Err(Error::InitFailure("no specific force measured".into()));
    }
    Ok(StaticInit {
        gravity: Vec3::new(0.0, 0.0, -GRAVITY),
        gyro_bias: mean_g,
        rotation: Rotation::between(&mean_a, &Vec3::z()),
    })
}
