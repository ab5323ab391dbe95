use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{ScanFrame, ScanPoint};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::table::mix64;

use super::trajectory::TrajectorySpec;
use super::world::PlanarWorld;

const CONE_HALF_ANGLE_DEG: f64 = 35.0;
const RING_HALF_ELEVATION_DEG: f64 = 30.0;

/// Ray layout of one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanPattern {
    /// Forward-looking 70 degree cone along body +x, square grid masked to a
    /// disc.
    Cone70 { grid: usize },
    /// Full azimuth band of `rows` elevations within +-30 degrees, fired
    /// column by column.
    Ring360 { rows: usize, cols: usize },
}

impl ScanPattern {
    /// Cone layout with approximately `points` rays.
    pub fn cone70(points: usize) -> Self {
        let grid = ((points as f64 / std::f64::consts::FRAC_PI_4).sqrt().round() as usize).max(2);
        ScanPattern::Cone70 { grid }
    }

    /// Ring layout with approximately `points` rays, six columns per row.
    pub fn ring360(points: usize) -> Self {
        let rows = ((points as f64 / 6.0).sqrt().round() as usize).max(2);
        let cols = (points / rows).max(1);
        ScanPattern::Ring360 { rows, cols }
    }

    pub fn by_name(name: &str, points: usize) -> Result<Self> {
        match name {
            "cone70" => Ok(Self::cone70(points)),
            "ring360" => Ok(Self::ring360(points)),
            _ => Err(Error::InvalidInput(format!("unknown scan pattern '{name}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScanPattern::Cone70 { .. } => "cone70",
            ScanPattern::Ring360 { .. } => "ring360",
        }
    }

    /// Unit ray directions in the body frame, in firing order.
    pub fn directions(&self) -> Vec<Vec3> {
        let dir = |az: f64, el: f64| Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
        match *self {
            ScanPattern::Cone70 { grid } => {
                let half = CONE_HALF_ANGLE_DEG.to_radians();
                let step = 2.0 * half / (grid - 1) as f64;
                let mut out = Vec::with_capacity(grid * grid);
                for i in 0..grid {
                    let az = -half + step * i as f64;
                    for j in 0..grid {
                        let el = -half + step * j as f64;
                        if az * az + el * el <= half * half + 1e-12 {
                            out.push(dir(az, el));
                        }
                    }
                }
                out
            }
            ScanPattern::Ring360 { rows, cols } => {
                let half = RING_HALF_ELEVATION_DEG.to_radians();
                let mut out = Vec::with_capacity(rows * cols);
                for c in 0..cols {
                    let az = std::f64::consts::TAU * c as f64 / cols as f64;
                    for r in 0..rows {
                        let el = -half + 2.0 * half * r as f64 / (rows - 1) as f64;
                        out.push(dir(az, el));
                    }
                }
                out
            }
        }
    }
}

impl FromStr for ScanPattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ScanPattern::by_name(s, 15_000)
    }
}

impl fmt::Display for ScanPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Rendered sweep plus the index of the patch each point came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScan {
    pub frame: ScanFrame,
    pub patches: Vec<usize>,
}

/// Sweep starting at `t`. Ray `i` of `n` fires at offset `period * i / (n-1)`
/// from the pose at that instant; misses are dropped.
pub fn render_scan_labeled(
    spec: &TrajectorySpec,
    world: &PlanarWorld,
    t: f64,
    pattern: &ScanPattern,
    range_noise_std: f64,
    seed: u64,
) -> LabeledScan {
    let dirs = pattern.directions();
    let period = spec.scan_period();
    let n = dirs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ t.to_bits()));
    let noise = (range_noise_std > 0.0).then(|| Normal::new(0.0, range_noise_std).expect("finite std"));
    let mut points = Vec::with_capacity(n);
    let mut patches = Vec::with_capacity(n);
    for (i, d) in dirs.iter().enumerate() {
        let offset = if n > 1 { period * i as f64 / (n - 1) as f64 } else { 0.0 };
        let dr = noise.map_or(0.0, |nd| nd.sample(&mut rng));
        let pose = spec.pose(t + offset);
        if let Some(hit) = world.raycast(&pose.translation, &(pose.rotation * d)) {
            let range = hit.range + dr;
            if range > 0.0 {
                points.push(ScanPoint { offset, point: d * range });
                patches.push(hit.patch);
            }
        }
    }
    LabeledScan { frame: ScanFrame { base_stamp: t, points }, patches }
}

pub fn render_scan(
    spec: &TrajectorySpec,
    world: &PlanarWorld,
    t: f64,
    pattern: &ScanPattern,
    range_noise_std: f64,
    seed: u64,
) -> ScanFrame {
    render_scan_labeled(spec, world, t, pattern, range_noise_std, seed).frame
}
