use crate::error::{Error, Result};
use crate::geometry::{skew, Mat3, Rotation};

use super::{ImuSample, Mat15, NavState, NoiseConfig, StateCovariance};

/// Longest accepted integration step in seconds.
pub const MAX_DT: f64 = 0.1;

/// First-order error-state transition over one step with the given
/// bias-corrected body rate and specific force.
pub fn transition(state: &NavState, omega: &crate::Vec3, accel: &crate::Vec3, dt: f64) -> Mat15 {
    let r = *state.rotation.matrix();
    let ra_skew = r * skew(accel);
    let eye = Mat3::identity();
    let mut f = Mat15::identity();
    let set = |f: &mut Mat15, i: usize, j: usize, m: &Mat3| {
        f.fixed_view_mut::<3, 3>(3 * i, 3 * j).copy_from(m);
    };
    set(&mut f, 0, 0, Rotation::exp(&(-omega * dt)).matrix());
    set(&mut f, 0, 3, &(-eye * dt));
    set(&mut f, 1, 0, &(-ra_skew * (0.5 * dt * dt)));
    set(&mut f, 1, 2, &(eye * dt));
    set(&mut f, 1, 4, &(-r * (0.5 * dt * dt)));
    set(&mut f, 2, 0, &(-ra_skew * dt));
    set(&mut f, 2, 4, &(-r * dt));
    f
}

fn process_noise(noise: &NoiseConfig, dt: f64) -> [f64; 5] {
    [
        noise.gyro_noise.powi(2) * dt,
        0.0,
        noise.accel_noise.powi(2) * dt,
        noise.gyro_bias_walk.powi(2) * dt,
        noise.accel_bias_walk.powi(2) * dt,
    ]
}

/// One IMU integration step of length `dt` using `sample`'s readings.
pub fn propagate(
    state: &NavState,
    cov: &StateCovariance,
    sample: &ImuSample,
    dt: f64,
    noise: &NoiseConfig,
) -> Result<(NavState, StateCovariance)> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(Error::InvalidTimeStep(dt));
    }
    let omega = sample.gyro - state.gyro_bias;
    let accel = sample.accel - state.accel_bias;
    let acc_world = state.rotation * accel + state.gravity;

    let next = NavState {
        rotation: state.rotation * Rotation::exp(&(omega * dt)),
        velocity: state.velocity + acc_world * dt,
        position: state.position + state.velocity * dt + acc_world * (0.5 * dt * dt),
        stamp: state.stamp + dt,
        ..*state
    };

    let f = transition(state, &omega, &accel, dt);
    let mut p = f * cov.0 * f.transpose();
    for (b, q) in process_noise(noise, dt).iter().enumerate() {
        for i in 0..3 {
            p[(3 * b + i, 3 * b + i)] += q;
        }
    }
    let mut out = StateCovariance(p);
    out.symmetrize();
    Ok((next, out))
}
