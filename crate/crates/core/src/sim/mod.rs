//! Synthetic planar-world datasets with exact ground truth.
//!
//! Everything here is a pure function of its inputs and seed: the analytic
//! trajectory drives both the IMU model and the ray caster, and per-frame
//! RNG streams are derived from the frame stamp so frames can be rendered in
//! any order.

mod imu;
mod lidar;
mod trajectory;
mod world;

pub use imu::{sample_imu, ImuNoise};
pub use lidar::{render_scan, render_scan_labeled, LabeledScan, ScanPattern};
pub use trajectory::{Kinematics, TrajectoryKind, TrajectorySpec, YawPolicy};
pub use world::{Hit, Patch, PlanarWorld, WORLD_OFFSET};

use crate::dataset::Dataset;
use crate::error::Result;
use crate::estimation::GRAVITY;
use crate::eval::Trajectory;
use crate::exec::Exec;
use crate::geometry::{Pose, Vec3};
use crate::hvox::{HVoxConfig, HVoxMap};
use crate::morton::morton_of;
use crate::table::mix64;
use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub trajectory: TrajectorySpec,
    pub pattern: ScanPattern,
    pub range_noise: f64,
    pub imu: ImuNoise,
    pub gravity: Vec3,
    pub seed: u64,
}

impl SimConfig {
    pub fn noiseless(trajectory: TrajectorySpec, pattern: ScanPattern) -> Self {
        SimConfig {
            trajectory,
            pattern,
            range_noise: 0.0,
            imu: ImuNoise::none(),
            gravity: Vec3::new(0.0, 0.0, -GRAVITY),
            seed: 0,
        }
    }

    /// 2 cm range noise and MEMS-grade IMU errors.
    pub fn realistic(trajectory: TrajectorySpec, pattern: ScanPattern, seed: u64) -> Self {
        SimConfig {
            range_noise: 0.02,
            imu: ImuNoise::mems(trajectory.imu_rate),
            seed,
            ..Self::noiseless(trajectory, pattern)
        }
    }
}

/// Renders the full sequence: IMU stream, one scan per scan period and
/// ground truth at every IMU stamp.
pub fn simulate(cfg: &SimConfig, world: &PlanarWorld, exec: Exec) -> Result<Dataset> {
    let spec = &cfg.trajectory;
    spec.validate()?;
    let imu = sample_imu(spec, &cfg.gravity, &cfg.imu, mix64(cfg.seed));
    let scans = exec.map(&spec.scan_stamps(), |&t| {
        render_scan(spec, world, t, &cfg.pattern, cfg.range_noise, cfg.seed)
    });
    let ground_truth = Trajectory::new(spec.imu_stamps().into_iter().map(|t| (t, spec.pose(t))).collect())?;
    Ok(Dataset { imu, scans, ground_truth })
}

/// Map built from dense samples of every patch, keeping only the coarse
/// cells touched by a single patch. Each surviving surfel lies exactly on one
/// plane of `world`; cells at edges and corners stay empty.
pub fn reference_map(world: &PlanarWorld, cfg: HVoxConfig, spacing: f64) -> Result<HVoxMap> {
    let s1 = 3.0 * cfg.s0;
    let samples: Vec<(usize, Vec<Vec3>)> =
        world.patches.iter().enumerate().map(|(i, p)| (i, p.samples(spacing))).collect();
    let mut owner: HashMap<u64, Option<usize>> = HashMap::new();
    for (i, pts) in &samples {
        for p in pts {
            if let Some((_, m)) = morton_of(p, s1) {
                let e = owner.entry(m.0).or_insert(Some(*i));
                if *e != Some(*i) {
                    *e = None;
                }
            }
        }
    }
    let mut map = HVoxMap::new(cfg)?;
    for (i, pts) in &samples {
        let keep: Vec<Vec3> = pts
            .iter()
            .filter(|p| morton_of(p, s1).is_some_and(|(_, m)| owner.get(&m.0) == Some(&Some(*i))))
            .copied()
            .collect();
        map.insert_points(&keep, &Pose::identity());
    }
    map.recompute_dirty();
    Ok(map)
}
