//! Query-time plane fitting over a raw-point voxel map.
//!
//! This is the cost profile the surfel map is measured against: every query
//! walks the 27 cells around the query point, keeps the `k` nearest stored
//! points and runs PCA on them.

use crate::geometry::{Pose, Vec3};
use crate::hvox::{canonical_normal, mean_and_covariance, sym_eigen3};
use crate::morton::{morton_of, VoxelKey};
use crate::table::RobinHoodMap;

pub const DEFAULT_CAP: usize = 32;
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vec3,
    pub centroid: Vec3,
}

/// Neighbour buffer reused across queries; holds at most `k` entries sorted
/// by squared distance.
#[derive(Debug, Clone, Default)]
pub struct Neighbors {
    k: usize,
    items: Vec<(f64, Vec3)>,
}

impl Neighbors {
    pub fn with_k(k: usize) -> Self {
        Neighbors { k, items: Vec::with_capacity(k + 1) }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.items.iter().map(|(_, p)| *p)
    }

    pub fn distances_sq(&self) -> impl Iterator<Item = f64> + '_ {
        self.items.iter().map(|(d, _)| *d)
    }

    fn clear(&mut self) {
        self.items.clear();
    }

    #[inline]
    fn offer(&mut self, d2: f64, p: Vec3) {
        if self.items.len() == self.k {
            if d2 >= self.items[self.k - 1].0 {
                return;
            }
            self.items.pop();
        }
        let at = self.items.partition_point(|(d, _)| *d <= d2);
        self.items.insert(at, (d2, p));
    }
}

#[derive(Debug, Clone)]
pub struct PointVoxelMap {
    cells: RobinHoodMap<Vec<Vec3>>,
    s1: f64,
    cap: usize,
    points: usize,
}

impl PointVoxelMap {
    pub fn new(s1: f64, cap: usize) -> Self {
        assert!(s1 > 0.0 && cap > 0);
        PointVoxelMap { cells: RobinHoodMap::new(), s1, cap, points: 0 }
    }

    pub fn with_capacity(s1: f64, cap: usize, cells: usize) -> Self {
        let mut map = Self::new(s1, cap);
        map.cells = RobinHoodMap::with_capacity(cells);
        map
    }

    pub fn s1(&self) -> f64 {
        self.s1
    }
    pub fn cap(&self) -> usize {
        self.cap
    }
    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }
    pub fn point_count(&self) -> usize {
        self.points
    }

    pub fn cell(&self, key: VoxelKey) -> Option<&[Vec3]> {
        self.cells.get(key.encode()).map(|v| v.as_slice())
    }

    /// Bins transformed points into their cells; a full cell ignores further
    /// points. Returns how many points were stored.
    pub fn insert_raw(&mut self, points: &[Vec3], pose: &Pose) -> usize {
        let mut stored = 0;
        for p in points {
            let pw = pose.transform_point(p);
            let Some((_, m)) = morton_of(&pw, self.s1) else {
                continue;
            };
            let (cell, _) = self.cells.get_or_insert_with(m, Vec::new);
            if cell.len() < self.cap {
                cell.push(pw);
                stored += 1;
            }
        }
        self.points += stored;
        stored
    }

    /// Fills `out` with the nearest stored points among the query cell and
    /// its 26 neighbours.
    pub fn gather_knn(&self, p: &Vec3, out: &mut Neighbors) {
        out.clear();
        let Some((k, _)) = morton_of(p, self.s1) else {
            return;
        };
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let Some(cell) = self.cells.get(k.offset(dx, dy, dz).encode()) else {
                        continue;
                    };
                    for q in cell {
                        out.offer((q - p).norm_squared(), *q);
                    }
                }
            }
        }
    }

    /// Plane through the nearest `k` points around `p`, or `None` when fewer
    /// than `k` are stored nearby.
    pub fn knn_plane(&self, p: &Vec3, k: usize) -> Option<Plane> {
        let mut nb = Neighbors::with_k(k);
        self.gather_knn(p, &mut nb);
        fit_plane(&nb, k)
    }
}

/// PCA plane over a gathered neighbourhood.
pub fn fit_plane(nb: &Neighbors, k: usize) -> Option<Plane> {
    if k < 3 || nb.len() < k {
        return None;
    }
    let mut buf = [Vec3::zeros(); 64];
    let n = nb.len().min(buf.len());
    for (slot, q) in buf.iter_mut().zip(nb.points()) {
        *slot = q;
    }
    let (centroid, cov) = mean_and_covariance(&buf[..n]);
    let eig = sym_eigen3(&cov);
    Some(Plane {
        normal: canonical_normal(eig.vectors.column(2).into_owned()),
        centroid,
    })
}
