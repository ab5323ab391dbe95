#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surfel_lio::estimation::{ErrorState, NavState};
use surfel_lio::geometry::{Mat3, Pose, Rotation, Vec3};
use surfel_lio::hvox::{HVoxConfig, HVoxMap};
use surfel_lio::pipeline::downsample;
use surfel_lio::sim::{render_scan, PlanarWorld, ScanPattern, TrajectorySpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn vec_in(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
    Vec3::new(rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-r..r))
}

/// Scan at `t` re-expressed in the base body frame with the true pose of
/// every point, so it carries no motion distortion.
pub fn ideal_body_scan(spec: &TrajectorySpec, world: &PlanarWorld, t: f64, pattern: &ScanPattern) -> Vec<Vec3> {
    let inv = spec.pose(t).inverse();
    render_scan(spec, world, t, pattern, 0.0, 0)
        .points
        .iter()
        .map(|p| inv.transform_point(&spec.pose(t + p.offset).transform_point(&p.point)))
        .collect()
}

pub fn true_state(spec: &TrajectorySpec, t: f64) -> NavState {
    let pose = spec.pose(t);
    NavState {
        rotation: pose.rotation,
        position: pose.translation,
        velocity: spec.kinematics(t).velocity,
        stamp: t,
        ..Default::default()
    }
}

/// `truth` moved by exactly `angle` radians and `dist` meters along seeded
/// random axes.
pub fn perturbed(truth: &NavState, angle: f64, dist: f64, rng: &mut ChaCha8Rng) -> NavState {
    truth.retract(&ErrorState { dtheta: unit(rng) * angle, dp: unit(rng) * dist, ..Default::default() })
}

pub fn downsampled(points: &[Vec3]) -> Vec<Vec3> {
    downsample(points, 0.5)
}

/// From-scratch surfels of every coarse cell: points binned by floor
/// division, plain means, then an independent symmetric eigensolver.
pub struct BatchSurfel {
    pub normal: Vec3,
    pub centroid: Vec3,
    pub planarity: f64,
    pub children: usize,
}

fn floor_key(p: &Vec3, s: f64) -> [i64; 3] {
    [(p.x / s).floor() as i64, (p.y / s).floor() as i64, (p.z / s).floor() as i64]
}

pub fn batch_surfels(points: &[Vec3], cfg: &HVoxConfig) -> BTreeMap<[i64; 3], Option<BatchSurfel>> {
    let mut fine: BTreeMap<[i64; 3], (Vec3, usize)> = BTreeMap::new();
    for p in points {
        let e = fine.entry(floor_key(p, cfg.s0)).or_insert((Vec3::zeros(), 0));
        e.0 += p;
        e.1 += 1;
    }
    let mut coarse: BTreeMap<[i64; 3], Vec<Vec3>> = BTreeMap::new();
    for (k, (sum, n)) in &fine {
        let parent = [k[0].div_euclid(3), k[1].div_euclid(3), k[2].div_euclid(3)];
        coarse.entry(parent).or_default().push(sum / *n as f64);
    }
    coarse
        .into_iter()
        .map(|(k, c)| {
            let s = (c.len() >= cfg.m_min).then(|| {
                let m = c.len() as f64;
                let mean = c.iter().sum::<Vec3>() / m;
                let cov = c.iter().map(|x| (x - mean) * (x - mean).transpose()).sum::<Mat3>() / m;
                let eig = SymmetricEigen::new(cov);
                let mut idx = [0usize, 1, 2];
                idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
                let l = idx.map(|i| eig.eigenvalues[i]);
                BatchSurfel {
                    normal: eig.eigenvectors.column(idx[2]).normalize(),
                    centroid: mean,
                    planarity: ((l[1] - l[2]) / (l[0] + cfg.eps)).max(0.0),
                    children: c.len(),
                }
            });
            (k, s)
        })
        .collect()
}

/// Points on a handful of random planes through a cube of side `extent`,
/// with small off-plane jitter so every coarse cell is well conditioned.
pub fn plane_cloud(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> Vec<Vec3> {
    let planes: Vec<(Vec3, Vec3)> = (0..4).map(|_| (vec_in(rng, 0.5 * extent), unit(rng))).collect();
    (0..n)
        .map(|i| {
            let (c, nrm) = planes[i % planes.len()];
            let u = nrm.cross(&Vec3::x()).try_normalize(1e-6).unwrap_or_else(|| nrm.cross(&Vec3::y()).normalize());
            let v = nrm.cross(&u);
            c + u * rng.random_range(-0.5 * extent..0.5 * extent)
                + v * rng.random_range(-0.5 * extent..0.5 * extent)
                + nrm * rng.random_range(-0.02..0.02)
        })
        .collect()
}

pub fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
    Pose::new(Rotation::exp(&vec_in(rng, 2.0)), vec_in(rng, 5.0))
}

/// Noiseless room map from ground-truth scans along `spec`.
pub fn scanned_map(spec: &TrajectorySpec, world: &PlanarWorld, pattern: &ScanPattern, stamps: &[f64]) -> HVoxMap {
    let mut map = HVoxMap::new(HVoxConfig::default()).unwrap();
    for &t in stamps {
        let world_pts: Vec<Vec3> = render_scan(spec, world, t, pattern, 0.0, 0)
            .points
            .iter()
            .map(|p| spec.pose(t + p.offset).transform_point(&p.point))
            .collect();
        map.insert_points(&world_pts, &Pose::identity());
    }
    map.recompute_dirty();
    map
}
