//! Query and map-update timing of the surfel map against the kNN baseline.
//!
//! Both structures are built from the same synthetic cloud: a horizontal
//! plane tiled by `n` coarse cells, each with a random subset of its nine
//! in-plane fine children occupied. Query latency is measured over a fixed
//! local window so the working set is the same at every map size, which is
//! what a sensor-centred odometry query stream looks like; uniformly random
//! queries over the whole map are reported alongside. Loops run on the
//! calling thread only, and every figure is the median of `reps` timed
//! passes after one untimed warm-up pass.

use std::fmt::Write as _;
use std::hint::black_box;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baseline::{fit_plane, Neighbors, PointVoxelMap, DEFAULT_CAP, DEFAULT_K};
use crate::error::{Error, Result};
use crate::geometry::{Pose, Rotation, Vec3};
use crate::hvox::{HVoxConfig, HVoxMap};
use crate::sim::ScanPattern;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Coarse cell counts, ascending.
    pub sizes: Vec<usize>,
    pub queries: usize,
    pub k: usize,
    pub seed: u64,
    pub reps: usize,
    /// Side of the square query window in meters.
    pub window: f64,
    /// Occupied fine children per coarse cell (of the nine in the plane).
    pub children: usize,
    /// Points per occupied fine cell.
    pub points_per_child: usize,
    pub cap: usize,
    /// Rays of the map-update frame.
    pub frame_points: usize,
    pub hvox: HVoxConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![10_000, 100_000, 1_000_000],
            queries: 100_000,
            k: DEFAULT_K,
            seed: 0,
            reps: 5,
            window: 50.0,
            children: 6,
            points_per_child: 2,
            cap: DEFAULT_CAP,
            frame_points: 24_000,
            hvox: HVoxConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub l1_cells: usize,
    pub l0_cells: usize,
    pub baseline_points: usize,
    pub queries: usize,
    pub hvox_query_us: f64,
    pub hvox_global_query_us: f64,
    pub hvox_hit_rate: f64,
    pub baseline_gather_us: f64,
    pub baseline_fit_us: f64,
    pub frame_points: usize,
    pub hvox_update_ms: f64,
    pub baseline_update_ms: f64,
    pub build_s: f64,
}

impl BenchRow {
    pub fn baseline_query_us(&self) -> f64 {
        self.baseline_gather_us + self.baseline_fit_us
    }
    pub fn speedup(&self) -> f64 {
        self.baseline_query_us() / self.hvox_query_us
    }
    pub fn update_ratio(&self) -> f64 {
        self.hvox_update_ms / self.baseline_update_ms
    }

    pub const CSV_HEADER: &'static str = "l1_cells,l0_cells,baseline_points,queries,hvox_query_us,\
hvox_global_query_us,hvox_hit_rate,baseline_gather_us,baseline_fit_us,baseline_query_us,speedup,\
frame_points,hvox_update_ms,baseline_update_ms,update_ratio,build_s";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.5},{:.5},{:.4},{:.5},{:.5},{:.5},{:.2},{},{:.4},{:.4},{:.3},{:.2}",
            self.l1_cells,
            self.l0_cells,
            self.baseline_points,
            self.queries,
            self.hvox_query_us,
            self.hvox_global_query_us,
            self.hvox_hit_rate,
            self.baseline_gather_us,
            self.baseline_fit_us,
            self.baseline_query_us(),
            self.speedup(),
            self.frame_points,
            self.hvox_update_ms,
            self.baseline_update_ms,
            self.update_ratio(),
            self.build_s
        )
    }
}

pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from(BenchRow::CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{}", r.csv_row());
    }
    s
}

/// Height of the benchmark plane, inside the middle fine layer of the
/// coarse layer at z = 0.
fn plane_z(s0: f64) -> f64 {
    1.5 * s0
}

/// Both maps over the same planar cloud of `n` coarse cells.
pub struct PlaneScene {
    pub hvox: HVoxMap,
    pub baseline: PointVoxelMap,
    /// Side of the square of coarse cells.
    pub side: usize,
    pub s1: f64,
}

impl PlaneScene {
    pub fn build(n: usize, cfg: &BenchConfig, seed: u64) -> Result<Self> {
        if !(1..=9).contains(&cfg.children) || cfg.points_per_child == 0 {
            return Err(Error::InvalidInput("children must be in 1..=9 and points_per_child > 0".into()));
        }
        let s0 = cfg.hvox.s0;
        let s1 = 3.0 * s0;
        let side = (n as f64).sqrt().ceil() as usize;
        let half = (side / 2) as i64;
        let mut hvox = HVoxMap::with_capacity(cfg.hvox, n)?;
        let mut baseline = PointVoxelMap::with_capacity(s1, cfg.cap, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::with_capacity(9 * cfg.points_per_child);
        for i in 0..n {
            let (ix, iy) = ((i % side) as i64 - half, (i / side) as i64 - half);
            pts.clear();
            for c in sample(&mut rng, 9, cfg.children) {
                let (cx, cy) = ((ix * 3 + (c % 3) as i64) as f64, (iy * 3 + (c / 3) as i64) as f64);
                for _ in 0..cfg.points_per_child {
                    pts.push(Vec3::new(
                        (cx + rng.random_range(0.05..0.95)) * s0,
                        (cy + rng.random_range(0.05..0.95)) * s0,
                        plane_z(s0) + rng.random_range(-0.01..0.01),
                    ));
                }
            }
            hvox.insert_points(&pts, &Pose::identity());
            baseline.insert_raw(&pts, &Pose::identity());
        }
        hvox.recompute_dirty();
        Ok(PlaneScene { hvox, baseline, side, s1 })
    }

    /// Half the side length of the mapped square in meters.
    pub fn half_width(&self) -> f64 {
        0.5 * self.side as f64 * self.s1
    }

    /// Query points on the plane, uniform over a centred square of side
    /// `window` (clipped to the map).
    pub fn queries(&self, count: usize, window: f64, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
        let h = (0.5 * window).min(self.half_width()) - 0.5 * self.s1;
        let z = plane_z(self.s1 / 3.0);
        (0..count)
            .map(|_| Vec3::new(rng.random_range(-h..h), rng.random_range(-h..h), z + rng.random_range(-0.02..0.02)))
            .collect()
    }

    /// One sweep of a forward cone sensor two meters above the plane at
    /// `(x, y)`, pitched down 45 degrees, intersected with the plane.
    pub fn frame(&self, x: f64, y: f64, rays: usize) -> Vec<Vec3> {
        let z = plane_z(self.s1 / 3.0);
        let origin = Vec3::new(x, y, z + 2.0);
        let pitch = Rotation::exp(&Vec3::new(0.0, std::f64::consts::FRAC_PI_4, 0.0));
        ScanPattern::cone70(rays)
            .directions()
            .into_iter()
            .filter_map(|d| {
                let d = pitch * d;
                (d.z < -1e-3).then(|| origin + d * ((z - origin.z) / d.z))
            })
            .filter(|p| p.x.abs() < self.half_width() && p.y.abs() < self.half_width())
            .collect()
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    v[v.len() / 2]
}

/// Median per-item microseconds of `f` over `reps` timed passes after one
/// warm-up pass.
fn time_per_item(reps: usize, items: usize, mut f: impl FnMut()) -> f64 {
    f();
    median(
        (0..reps.max(1))
            .map(|_| {
                let t = Instant::now();
                f();
                t.elapsed().as_secs_f64() * 1e6 / items.max(1) as f64
            })
            .collect(),
    )
}

pub fn hvox_query_pass(map: &HVoxMap, queries: &[Vec3]) -> usize {
    let mut hits = 0;
    for q in queries {
        if let Some(s) = map.query_surfel(black_box(q)) {
            hits += 1;
            black_box(s);
        }
    }
    hits
}

pub fn bench_size(n: usize, cfg: &BenchConfig) -> Result<BenchRow> {
    let t_build = Instant::now();
    let scene = PlaneScene::build(n, cfg, cfg.seed ^ n as u64)?;
    let build_s = t_build.elapsed().as_secs_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let local = scene.queries(cfg.queries, cfg.window, &mut rng);
    let global = scene.queries(cfg.queries, f64::INFINITY, &mut rng);

    let mut hits = 0;
    let hvox_query_us = time_per_item(cfg.reps, local.len(), || hits = hvox_query_pass(&scene.hvox, &local));
    let hvox_global_query_us = time_per_item(cfg.reps, global.len(), || {
        black_box(hvox_query_pass(&scene.hvox, &global));
    });

    let mut gathered: Vec<Neighbors> = (0..local.len()).map(|_| Neighbors::with_k(cfg.k)).collect();
    let baseline_gather_us = time_per_item(cfg.reps, local.len(), || {
        for (q, nb) in local.iter().zip(gathered.iter_mut()) {
            scene.baseline.gather_knn(black_box(q), nb);
        }
    });
    let baseline_fit_us = time_per_item(cfg.reps, local.len(), || {
        for nb in &gathered {
            black_box(fit_plane(black_box(nb), cfg.k));
        }
    });

    // each pass maps a fresh patch of the plane so no pass sees its own points
    let spacing = 15.0;
    let lanes = ((2.0 * (scene.half_width() - 12.0)) / spacing).floor().max(1.0) as usize;
    let frames: Vec<Vec<Vec3>> = (0..=cfg.reps.max(1))
        .map(|i| {
            let x = -scene.half_width() + 12.0 + spacing * (i % lanes) as f64;
            let y = -scene.half_width() + 12.0 + spacing * ((i / lanes) % lanes) as f64;
            scene.frame(x, y, cfg.frame_points)
        })
        .collect();
    let (mut hvox, mut baseline) = (scene.hvox, scene.baseline);
    let frame_points = frames[0].len();
    let mut hv = Vec::new();
    let mut bl = Vec::new();
    for (i, frame) in frames.iter().enumerate() {
        let t = Instant::now();
        hvox.insert_points(frame, &Pose::identity());
        hvox.recompute_dirty();
        let h = t.elapsed().as_secs_f64() * 1e3;
        let t = Instant::now();
        baseline.insert_raw(frame, &Pose::identity());
        let b = t.elapsed().as_secs_f64() * 1e3;
        if i > 0 {
            hv.push(h);
            bl.push(b);
        }
    }

    Ok(BenchRow {
        l1_cells: hvox.l1_len(),
        l0_cells: hvox.l0_len(),
        baseline_points: baseline.point_count(),
        queries: local.len(),
        hvox_query_us,
        hvox_global_query_us,
        hvox_hit_rate: hits as f64 / local.len().max(1) as f64,
        baseline_gather_us,
        baseline_fit_us,
        frame_points,
        hvox_update_ms: median(hv),
        baseline_update_ms: median(bl),
        build_s,
    })
}

pub fn bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.sizes.is_empty() || cfg.sizes.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput("sizes must be non-empty and ascending".into()));
    }
    if cfg.k < 3 || cfg.k > 64 {
        return Err(Error::InvalidInput("k must be in 3..=64".into()));
    }
    cfg.sizes.iter().map(|&n| bench_size(n, cfg)).collect()
}
