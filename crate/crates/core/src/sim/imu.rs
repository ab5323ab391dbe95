use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::estimation::{ImuSample, NoiseConfig};
use crate::geometry::Vec3;

use super::trajectory::TrajectorySpec;

/// Constant biases plus white noise with the given per-sample standard
/// deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuNoise {
    pub gyro_bias: Vec3,
    pub accel_bias: Vec3,
    pub gyro_std: f64,
    pub accel_std: f64,
}

impl ImuNoise {
    pub fn none() -> Self {
        ImuNoise {
            gyro_bias: Vec3::zeros(),
            accel_bias: Vec3::zeros(),
            gyro_std: 0.0,
            accel_std: 0.0,
        }
    }

    /// Consumer MEMS grade at `rate` Hz, white noise derived from the default
    /// filter densities.
    pub fn mems(rate: f64) -> Self {
        let d = NoiseConfig::default();
        ImuNoise {
            gyro_bias: Vec3::new(2e-3, -1e-3, 1.5e-3),
            accel_bias: Vec3::new(0.02, -0.015, 0.03),
            gyro_std: d.gyro_noise * rate.sqrt(),
            accel_std: d.accel_noise * rate.sqrt(),
        }
    }
}

fn gaussian3(rng: &mut ChaCha8Rng, std: f64) -> Vec3 {
    if std == 0.0 {
        return Vec3::zeros();
    }
    let n = Normal::new(0.0, std).expect("finite std");
    Vec3::new(n.sample(rng), n.sample(rng), n.sample(rng))
}

/// Gyro and accelerometer readings along the analytic trajectory.
///
/// Each sample reports the increments over the interval to the next stamp,
/// the way delta-angle / delta-velocity IMUs do: the body rate is the mean
/// rotation rate `Log(R_k^T R_k+1) / dt` and the specific force is the mean
/// world acceleration minus gravity, expressed in the body frame at the
/// sample stamp. At rest this is exactly `w = 0`, `a = -R^T g`.
pub fn sample_imu(spec: &TrajectorySpec, gravity: &Vec3, noise: &ImuNoise, seed: u64) -> Vec<ImuSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = 1.0 / spec.imu_rate;
    spec.imu_stamps()
        .into_iter()
        .map(|t| {
            let k0 = spec.kinematics(t);
            let k1 = spec.kinematics(t + dt);
            let r0t = k0.pose.rotation.transpose();
            let omega = (r0t * k1.pose.rotation).log() / dt;
            let mean_accel = (k1.velocity - k0.velocity) / dt;
            ImuSample {
                stamp: t,
                gyro: omega + noise.gyro_bias + gaussian3(&mut rng, noise.gyro_std),
                accel: r0t * (mean_accel - gravity) + noise.accel_bias + gaussian3(&mut rng, noise.accel_std),
            }
        })
        .collect()
}
