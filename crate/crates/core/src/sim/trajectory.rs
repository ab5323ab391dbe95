use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{Pose, Rotation, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKind {
    Rest,
    Line,
    Circle,
    Figure8,
}

impl FromStr for TrajectoryKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rest" => Ok(TrajectoryKind::Rest),
            "line" => Ok(TrajectoryKind::Line),
            "circle" => Ok(TrajectoryKind::Circle),
            "figure8" | "figure-eight" => Ok(TrajectoryKind::Figure8),
            _ => Err(Error::InvalidInput(format!("unknown trajectory kind '{s}'"))),
        }
    }
}

impl fmt::Display for TrajectoryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrajectoryKind::Rest => "rest",
            TrajectoryKind::Line => "line",
            TrajectoryKind::Circle => "circle",
            TrajectoryKind::Figure8 => "figure8",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum YawPolicy {
    Fixed(f64),
    /// Heading follows the path tangent.
    Tangent,
}

/// Analytic trajectory. Every kind starts with `rest` seconds at standstill
/// and then eases into its nominal speed over `ramp` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    /// Circle radius or figure-eight amplitude in meters.
    pub size: f64,
    /// Nominal path speed in m/s (for the figure-eight, the speed scale
    /// `size * dphi/dt`).
    pub speed: f64,
    pub yaw: YawPolicy,
    pub duration: f64,
    pub imu_rate: f64,
    pub scan_rate: f64,
    pub height: f64,
    pub rest: f64,
    pub ramp: f64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        TrajectorySpec {
            kind: TrajectoryKind::Figure8,
            size: 6.0,
            speed: 1.2,
            yaw: YawPolicy::Tangent,
            duration: 60.0,
            imu_rate: 200.0,
            scan_rate: 10.0,
            height: 1.5,
            rest: 1.0,
            ramp: 1.0,
        }
    }
}

/// Kinematic state of the body at one instant, everything in the world frame
/// except `omega_body`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub pose: Pose,
    pub velocity: Vec3,
    pub accel: Vec3,
    pub omega_body: Vec3,
}

impl TrajectorySpec {
    pub fn of_kind(kind: TrajectoryKind, duration: f64) -> Self {
        let mut spec = TrajectorySpec { kind, duration, ..Default::default() };
        match kind {
            TrajectoryKind::Rest => spec.speed = 0.0,
            TrajectoryKind::Line => {
                spec.size = 0.0;
                spec.speed = 0.5;
            }
            TrajectoryKind::Circle => {
                spec.size = 5.0;
                spec.speed = 1.0;
            }
            TrajectoryKind::Figure8 => {}
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.imu_rate, self.scan_rate, self.duration];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidInput("rates and duration must be positive".into()));
        }
        if matches!(self.kind, TrajectoryKind::Circle | TrajectoryKind::Figure8) && !(self.size > 0.0) {
            return Err(Error::InvalidInput("size must be positive".into()));
        }
        if !(self.speed >= 0.0) || !(self.rest >= 0.0) || !(self.ramp >= 0.0) {
            return Err(Error::InvalidInput("speed, rest and ramp must be non-negative".into()));
        }
        Ok(())
    }

    pub fn scan_period(&self) -> f64 {
        1.0 / self.scan_rate
    }

    /// Path progress `g(t)` in seconds of nominal motion, with its first two
    /// derivatives. Smoothstep speed ramp after the rest segment.
    fn progress(&self, t: f64) -> (f64, f64, f64) {
        let t = t - self.rest;
        if t <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        if self.ramp <= 0.0 {
            return (t, 1.0, 0.0);
        }
        if t < self.ramp {
            let r = self.ramp;
            let u = t / r;
            (r * (u.powi(3) - 0.5 * u.powi(4)), 3.0 * u * u - 2.0 * u.powi(3), (6.0 * u - 6.0 * u * u) / r)
        } else {
            (t - 0.5 * self.ramp, 1.0, 0.0)
        }
    }

    /// Planar path `c(phi)` with derivatives, and the rate scale `dphi/dg`.
    fn curve(&self, phi: f64) -> ([f64; 2], [f64; 2], [f64; 2]) {
        let a = self.size;
        match self.kind {
            TrajectoryKind::Rest => ([0.0, 0.0], [1.0, 0.0], [0.0, 0.0]),
            TrajectoryKind::Line => ([phi, 0.0], [1.0, 0.0], [0.0, 0.0]),
            TrajectoryKind::Circle => (
                [a * phi.cos(), a * phi.sin()],
                [-a * phi.sin(), a * phi.cos()],
                [-a * phi.cos(), -a * phi.sin()],
            ),
            TrajectoryKind::Figure8 => (
                [a * phi.sin(), 0.5 * a * (2.0 * phi).sin()],
                [a * phi.cos(), a * (2.0 * phi).cos()],
                [-a * phi.sin(), -2.0 * a * (2.0 * phi).sin()],
            ),
        }
    }

    fn phi_rate(&self) -> f64 {
        match self.kind {
            TrajectoryKind::Rest => 0.0,
            TrajectoryKind::Line => self.speed,
            TrajectoryKind::Circle | TrajectoryKind::Figure8 => self.speed / self.size,
        }
    }

    pub fn kinematics(&self, t: f64) -> Kinematics {
        let (g, gd, gdd) = self.progress(t);
        let k = self.phi_rate();
        let (phi, phid, phidd) = (k * g, k * gd, k * gdd);
        let (c, c1, c2) = self.curve(phi);
        let start = match self.kind {
            TrajectoryKind::Line => [-7.0, 0.0],
            _ => [0.0, 0.0],
        };
        let position = Vec3::new(start[0] + c[0], start[1] + c[1], self.height);
        let velocity = Vec3::new(c1[0] * phid, c1[1] * phid, 0.0);
        let accel = Vec3::new(
            c2[0] * phid * phid + c1[0] * phidd,
            c2[1] * phid * phid + c1[1] * phidd,
            0.0,
        );
        let (yaw, yaw_rate) = match self.yaw {
            YawPolicy::Fixed(y) => (y, 0.0),
            YawPolicy::Tangent => {
                let n2 = c1[0] * c1[0] + c1[1] * c1[1];
                let cross = c1[0] * c2[1] - c1[1] * c2[0];
                (c1[1].atan2(c1[0]), cross / n2 * phid)
            }
        };
        Kinematics {
            pose: Pose::new(Rotation::exp(&Vec3::new(0.0, 0.0, yaw)), position),
            velocity,
            accel,
            omega_body: Vec3::new(0.0, 0.0, yaw_rate),
        }
    }

    pub fn pose(&self, t: f64) -> Pose {
        self.kinematics(t).pose
    }

    /// IMU sample stamps `0, 1/rate, ...` up to the duration.
    pub fn imu_stamps(&self) -> Vec<f64> {
        let n = (self.duration * self.imu_rate + 1e-9).floor() as usize;
        (0..=n).map(|i| i as f64 / self.imu_rate).collect()
    }

    /// Scan start stamps; every scan ends within the duration.
    pub fn scan_stamps(&self) -> Vec<f64> {
        let n = (self.duration * self.scan_rate + 1e-9).floor() as usize;
        (0..n).map(|i| i as f64 / self.scan_rate).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric(spec: &TrajectorySpec, t: f64) -> (Vec3, Vec3, f64) {
        let h = 1e-5;
        let p = |t| spec.pose(t).translation;
        let r = |t: f64| spec.pose(t).rotation;
        let v = (p(t + h) - p(t - h)) / (2.0 * h);
        let a = (p(t + h) - 2.0 * p(t) + p(t - h)) / (h * h);
        let dyaw = (r(t - h).transpose() * r(t + h)).log().z;
        (v, a, dyaw / (2.0 * h))
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for kind in [TrajectoryKind::Line, TrajectoryKind::Circle, TrajectoryKind::Figure8] {
            let spec = TrajectorySpec::of_kind(kind, 30.0);
            for &t in &[1.3, 1.7, 2.5, 7.1, 13.9] {
                let k = spec.kinematics(t);
                let (v, a, w) = numeric(&spec, t);
                assert!((k.velocity - v).norm() < 1e-6, "{kind} v at {t}");
                assert!((k.accel - a).norm() < 1e-3, "{kind} a at {t}");
                assert!((k.omega_body.z - w).abs() < 1e-6, "{kind} w at {t}");
            }
        }
    }

    #[test]
    fn rest_segment_is_static() {
        let spec = TrajectorySpec::default();
        for t in [0.0, 0.5, 1.0] {
            let k = spec.kinematics(t);
            assert_eq!(k.velocity, Vec3::zeros());
            assert_eq!(k.accel, Vec3::zeros());
            assert_eq!(k.pose, spec.pose(0.0));
        }
    }

    #[test]
    fn figure8_stays_in_the_room() {
        let spec = TrajectorySpec::default();
        for i in 0..6000 {
            let p = spec.pose(i as f64 * 0.01).translation;
            assert!(p.x.abs() <= 6.0 + 1e-9 && p.y.abs() <= 3.0 + 1e-9);
        }
    }

    #[test]
    fn stamps() {
        let spec = TrajectorySpec { duration: 2.0, ..Default::default() };
        assert_eq!(spec.imu_stamps().len(), 401);
        assert_eq!(spec.scan_stamps().len(), 20);
        assert!("spiral".parse::<TrajectoryKind>().is_err());
        assert_eq!("figure8".parse::<TrajectoryKind>().unwrap(), TrajectoryKind::Figure8);
    }
}
