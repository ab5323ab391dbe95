//! Two-level voxel map with pre-computed surfels.
//!
//! Fine cells (edge `s0`) keep only the running centroid of the points that
//! fell into them. Coarse cells (edge `s1 = 3 * s0`) own a 3x3x3 block of fine
//! cells and cache one surfel fitted to their children's centroids. Insertion
//! only marks coarse cells dirty; [`HVoxMap::recompute_dirty`] refits them in
//! one batch. A correspondence query is one quantization, one Morton encode
//! and one table probe.

mod surfel;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::{self, Write};
use std::mem;

pub use surfel::{canonical_normal, compute_surfel, mean_and_covariance, sym_eigen3, Surfel, SymEigen3};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{Pose, Vec3};
use crate::morton::{morton_of, MortonCode, VoxelKey};
use crate::table::RobinHoodMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HVoxConfig {
    /// Fine cell edge length in meters.
    pub s0: f64,
    /// Surfels with planarity at or below this are not returned by queries.
    pub rho_min: f64,
    /// Minimum occupied children for a coarse cell to carry a surfel.
    pub m_min: usize,
    /// Stabilizer in the planarity denominator.
    pub eps: f64,
}

impl Default for HVoxConfig {
    fn default() -> Self {
        HVoxConfig {
            s0: 0.5 / 3.0,
            rho_min: 0.01,
            m_min: 5,
            eps: 1e-6,
        }
    }
}

impl HVoxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(Error::InvalidInput(format!("s0 must be positive, got {}", self.s0)));
        }
        if !(3..=27).contains(&self.m_min) {
            return Err(Error::InvalidInput(format!("m_min must be in 3..=27, got {}", self.m_min)));
        }
        if !(self.rho_min >= 0.0) || !(self.eps > 0.0) {
            return Err(Error::InvalidInput("rho_min must be >= 0 and eps > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct L0Voxel {
    pub centroid: Vec3,
    pub count: u32,
}

/// Occupancy of the 27 children of a coarse cell, one bit per
/// [`VoxelKey::child_index`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct ChildMask(u32);

impl ChildMask {
    pub fn insert(&mut self, i: usize) {
        self.0 |= 1 << i;
    }
    pub fn remove(&mut self, i: usize) {
        self.0 &= !(1 << i);
    }
    pub fn contains(self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }
    pub fn count(self) -> usize {
        self.0.count_ones() as usize
    }
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(i)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct L1Voxel {
    pub surfel: Option<Surfel>,
    pub children: ChildMask,
    pub dirty: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InsertStats {
    pub new_l0: usize,
    /// Coarse cells newly flagged dirty by this call.
    pub dirtied_l1: usize,
    /// Points whose key fell outside the 21-bit range.
    pub skipped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrimStats {
    pub l0_removed: usize,
    pub l1_removed: usize,
}

impl TrimStats {
    pub fn total(&self) -> usize {
        self.l0_removed + self.l1_removed
    }
}

#[derive(Debug, Clone)]
pub struct HVoxMap {
    l0: RobinHoodMap<L0Voxel>,
    l1: RobinHoodMap<L1Voxel>,
    cfg: HVoxConfig,
    s1: f64,
    dirty: Vec<MortonCode>,
}

impl HVoxMap {
    pub fn new(cfg: HVoxConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(HVoxMap {
            l0: RobinHoodMap::new(),
            l1: RobinHoodMap::new(),
            s1: 3.0 * cfg.s0,
            cfg,
            dirty: Vec::new(),
        })
    }

    pub fn with_capacity(cfg: HVoxConfig, l1_cells: usize) -> Result<Self> {
        let mut map = Self::new(cfg)?;
        map.l1 = RobinHoodMap::with_capacity(l1_cells);
        map.l0 = RobinHoodMap::with_capacity(l1_cells * 9);
        Ok(map)
    }

    pub fn config(&self) -> &HVoxConfig {
        &self.cfg
    }
    pub fn s0(&self) -> f64 {
        self.cfg.s0
    }
    pub fn s1(&self) -> f64 {
        self.s1
    }
    pub fn l0_len(&self) -> usize {
        self.l0.len()
    }
    pub fn l1_len(&self) -> usize {
        self.l1.len()
    }
    pub fn dirty_len(&self) -> usize {
        self.dirty.len()
    }
    pub fn is_empty(&self) -> bool {
        self.l1.is_empty()
    }

    pub fn l0(&self, key: VoxelKey) -> Option<&L0Voxel> {
        self.l0.get(key.encode())
    }
    pub fn l1(&self, key: VoxelKey) -> Option<&L1Voxel> {
        self.l1.get(key.encode())
    }
    pub fn l0_iter(&self) -> impl Iterator<Item = (VoxelKey, &L0Voxel)> + '_ {
        self.l0.iter().map(|(m, v)| (m.decode(), v))
    }
    pub fn l1_iter(&self) -> impl Iterator<Item = (VoxelKey, &L1Voxel)> + '_ {
        self.l1.iter().map(|(m, v)| (m.decode(), v))
    }

    /// Transforms `points` by `pose` and folds each into its fine cell.
    pub fn insert_points(&mut self, points: &[Vec3], pose: &Pose) -> InsertStats {
        let mut stats = InsertStats::default();
        // a cell flagged in this call stays dirty until the next recompute
        let mut last_dirty: Option<MortonCode> = None;
        for p in points {
            let pw = pose.transform_point(p);
            let Some((k0, m0)) = morton_of(&pw, self.cfg.s0) else {
                stats.skipped += 1;
                continue;
            };
            let (voxel, created) = self.l0.get_or_insert_with(m0, || L0Voxel {
                centroid: pw,
                count: 1,
            });
            if !created {
                let n = voxel.count as f64;
                voxel.centroid = (voxel.centroid * n + pw) / (n + 1.0);
                voxel.count += 1;
            } else {
                stats.new_l0 += 1;
            }
            let k1 = k0.parent();
            let m1 = k1.encode();
            if !created && last_dirty == Some(m1) {
                continue;
            }
            let (cell, _) = self.l1.get_or_insert_with(m1, L1Voxel::default);
            if created {
                cell.children.insert(k0.child_index());
            }
            if !cell.dirty {
                cell.dirty = true;
                self.dirty.push(m1);
                stats.dirtied_l1 += 1;
            }
            last_dirty = Some(m1);
        }
        stats
    }

    /// Centroids of the occupied children of `k1` in child-index order.
    pub fn children_centroids(&self, k1: VoxelKey) -> Vec<Vec3> {
        let mut buf = [Vec3::zeros(); 27];
        let n = self.gather_children(k1, &mut buf);
        buf[..n].to_vec()
    }

    fn gather_children(&self, k1: VoxelKey, out: &mut [Vec3; 27]) -> usize {
        let Some(cell) = self.l1.get(k1.encode()) else {
            return 0;
        };
        let mut n = 0;
        for i in cell.children.iter() {
            if let Some(v) = self.l0.get(k1.child(i).encode()) {
                out[n] = v.centroid;
                n += 1;
            }
        }
        n
    }

    fn fresh_surfel(&self, m1: MortonCode) -> Option<Surfel> {
        let mut buf = [Vec3::zeros(); 27];
        let n = self.gather_children(m1.decode(), &mut buf);
        if n < self.cfg.m_min {
            return None;
        }
        compute_surfel(&buf[..n], self.cfg.eps).ok()
    }

    /// Refits every dirty coarse cell and clears the dirty set. Returns the
    /// number of cells processed.
    pub fn recompute_dirty(&mut self) -> usize {
        self.recompute_dirty_with(Exec::default())
    }

    pub fn recompute_dirty_with(&mut self, exec: Exec) -> usize {
        let dirty = mem::take(&mut self.dirty);
        let this = &*self;
        let fresh = exec.map(&dirty, |&m1| this.fresh_surfel(m1));
        let mut done = 0;
        for (m1, surfel) in dirty.iter().zip(fresh) {
            if let Some(cell) = self.l1.get_mut(*m1) {
                cell.surfel = surfel;
                cell.dirty = false;
                done += 1;
            }
        }
        done
    }

    /// Surfel of the coarse cell containing `p_world`, if it passes the
    /// planarity threshold.
    #[inline]
    pub fn query_surfel(&self, p_world: &Vec3) -> Option<&Surfel> {
        let (_, m1) = morton_of(p_world, self.s1)?;
        self.l1
            .get(m1)?
            .surfel
            .as_ref()
            .filter(|s| s.planarity > self.cfg.rho_min)
    }

    /// Drops every cell whose center lies outside `center +- half_extent` in
    /// x or y. Removing a coarse cell removes all its children; removing a
    /// child of a surviving coarse cell marks that cell dirty.
    pub fn trim(&mut self, center: &Vec3, half_extent: f64) -> TrimStats {
        let outside = |c: Vec3| {
            (c.x - center.x).abs() > half_extent || (c.y - center.y).abs() > half_extent
        };
        let mut stats = TrimStats::default();
        let (s0, s1) = (self.cfg.s0, self.s1);

        let mut drop_l1 = Vec::new();
        let mut drop_l0 = Vec::new();
        for (m1, cell) in self.l1.iter() {
            let k1 = m1.decode();
            if outside(k1.center(s1)) {
                drop_l1.push(m1);
                drop_l0.extend(cell.children.iter().map(|i| k1.child(i).encode()));
            } else {
                for i in cell.children.iter() {
                    let k0 = k1.child(i);
                    if outside(k0.center(s0)) {
                        drop_l0.push(k0.encode());
                    }
                }
            }
        }
        for m0 in drop_l0 {
            if self.l0.remove(m0).is_none() {
                continue;
            }
            stats.l0_removed += 1;
            let k0 = m0.decode();
            let m1 = k0.parent().encode();
            if let Some(cell) = self.l1.get_mut(m1) {
                cell.children.remove(k0.child_index());
                if !cell.dirty {
                    cell.dirty = true;
                    self.dirty.push(m1);
                }
            }
        }
        for m1 in drop_l1 {
            if self.l1.remove(m1).is_some() {
                stats.l1_removed += 1;
            }
        }
        // surviving cells emptied by child removal
        let empty: Vec<MortonCode> = self
            .l1
            .iter()
            .filter(|(_, c)| c.children.is_empty())
            .map(|(m, _)| m)
            .collect();
        for m1 in empty {
            self.l1.remove(m1);
            stats.l1_removed += 1;
        }
        let l1 = &self.l1;
        self.dirty.retain(|m| l1.contains_key(*m));
        stats
    }

    /// Verifies the parent/child bookkeeping; returns a description of the
    /// first violation.
    pub fn check_integrity(&self) -> std::result::Result<(), String> {
        let mut claimed = 0usize;
        for (m1, cell) in self.l1.iter() {
            let k1 = m1.decode();
            if cell.children.is_empty() {
                return Err(format!("coarse cell {k1:?} has no children"));
            }
            if cell.children.count() > 27 {
                return Err(format!("coarse cell {k1:?} has more than 27 children"));
            }
            for i in cell.children.iter() {
                if !self.l0.contains_key(k1.child(i).encode()) {
                    return Err(format!("coarse cell {k1:?} lists missing child {i}"));
                }
            }
            claimed += cell.children.count();
            if cell.dirty != self.dirty.contains(&m1) {
                return Err(format!("dirty flag of {k1:?} disagrees with the dirty list"));
            }
            if !cell.dirty && cell.children.count() >= self.cfg.m_min && cell.surfel.is_none() {
                return Err(format!("clean coarse cell {k1:?} lacks a surfel"));
            }
        }
        for (m0, v) in self.l0.iter() {
            let k0 = m0.decode();
            match self.l1.get(k0.parent().encode()) {
                Some(cell) if cell.children.contains(k0.child_index()) => {}
                _ => return Err(format!("fine cell {k0:?} is not registered with its parent")),
            }
            if v.count == 0 || !v.centroid.iter().all(|c| c.is_finite()) {
                return Err(format!("fine cell {k0:?} has invalid contents"));
            }
        }
        if claimed != self.l0.len() {
            return Err(format!("{claimed} children claimed but {} fine cells stored", self.l0.len()));
        }
        Ok(())
    }

    /// Hash of the complete map state.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        let bits = |v: &Vec3, h: &mut DefaultHasher| {
            v.x.to_bits().hash(h);
            v.y.to_bits().hash(h);
            v.z.to_bits().hash(h);
        };
        for (m, v) in self.l0.iter() {
            m.hash(&mut h);
            bits(&v.centroid, &mut h);
            v.count.hash(&mut h);
        }
        for (m, c) in self.l1.iter() {
            m.hash(&mut h);
            c.children.hash(&mut h);
            c.dirty.hash(&mut h);
            if let Some(s) = &c.surfel {
                bits(&s.normal, &mut h);
                bits(&s.centroid, &mut h);
                s.planarity.to_bits().hash(&mut h);
                s.child_count.hash(&mut h);
            }
        }
        self.dirty.hash(&mut h);
        h.finish()
    }

    /// One CSV record per coarse cell in Morton order. Cells without a surfel
    /// leave the plane columns empty.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "morton,cx,cy,cz,nx,ny,nz,rho,children")?;
        let mut cells: Vec<(MortonCode, &L1Voxel)> = self.l1.iter().collect();
        cells.sort_by_key(|(m, _)| *m);
        for (m, c) in cells {
            match &c.surfel {
                Some(s) => writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{}",
                    m.0,
                    s.centroid.x,
                    s.centroid.y,
                    s.centroid.z,
                    s.normal.x,
                    s.normal.y,
                    s.normal.z,
                    s.planarity,
                    c.children.count()
                )?,
                None => writeln!(w, "{},,,,,,,,{}", m.0, c.children.count())?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rotation;
    use crate::morton::quantize;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn map() -> HVoxMap {
        HVoxMap::new(HVoxConfig::default()).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(HVoxMap::new(HVoxConfig { s0: 0.0, ..Default::default() }).is_err());
        assert!(HVoxMap::new(HVoxConfig { m_min: 2, ..Default::default() }).is_err());
        let m = map();
        assert_eq!(m.s1(), 3.0 * m.s0());
    }

    #[test]
    fn centroid_update_matches_formula() {
        let mut m = HVoxMap::new(HVoxConfig { s0: 10.0, ..Default::default() }).unwrap();
        m.insert_points(&[Vec3::new(1.0, 1.0, 1.0)], &Pose::identity());
        m.insert_points(&[Vec3::new(3.0, 3.0, 3.0)], &Pose::identity());
        let v = m.l0(VoxelKey::new(0, 0, 0)).unwrap();
        assert_eq!(v.count, 2);
        assert_eq!(v.centroid, Vec3::new(2.0, 2.0, 2.0));
    }

    #[test]
    fn single_point_seeds_both_levels() {
        let mut m = map();
        let p = Vec3::new(0.3, -0.7, 1.1);
        let stats = m.insert_points(&[p], &Pose::identity());
        assert_eq!(stats, InsertStats { new_l0: 1, dirtied_l1: 1, skipped: 0 });
        assert_eq!(m.l0_len(), 1);
        assert_eq!(m.l1_len(), 1);
        let k1 = quantize(&p, m.s1()).unwrap();
        let cell = m.l1(k1).unwrap();
        assert!(cell.dirty);
        assert_eq!(cell.children.count(), 1);
        assert!(cell.surfel.is_none());
        assert_eq!(m.l0(quantize(&p, m.s0()).unwrap()).unwrap().centroid, p);
        m.check_integrity().unwrap();
    }

    #[test]
    fn each_coarse_cell_dirtied_once_per_call() {
        let mut m = map();
        let pts: Vec<Vec3> = (0..50).map(|i| Vec3::new(0.01 * i as f64, 0.2, 0.2)).collect();
        let s = m.insert_points(&pts, &Pose::identity());
        assert_eq!(s.dirtied_l1, 1);
        assert_eq!(m.dirty_len(), 1);
        let s = m.insert_points(&pts, &Pose::identity());
        assert_eq!(s.dirtied_l1, 0, "already pending");
        assert_eq!(m.recompute_dirty(), 1);
        assert_eq!(m.recompute_dirty(), 0);
    }

    #[test]
    fn out_of_range_points_are_skipped() {
        let mut m = map();
        let s = m.insert_points(&[Vec3::new(1e9, 0.0, 0.0), Vec3::zeros()], &Pose::identity());
        assert_eq!(s.skipped, 1);
        assert_eq!(m.l0_len(), 1);
    }

    #[test]
    fn pose_is_applied() {
        let mut m = map();
        let pose = Pose::new(Rotation::exp(&Vec3::new(0.0, 0.0, 1.0)), Vec3::new(5.0, -2.0, 1.0));
        let p = Vec3::new(1.0, 0.5, 0.25);
        m.insert_points(&[p], &pose);
        let pw = pose.transform_point(&p);
        assert_eq!(m.l0(quantize(&pw, m.s0()).unwrap()).unwrap().centroid, pw);
    }

    #[test]
    fn batch_binning_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pose = Pose::new(Rotation::exp(&Vec3::new(0.1, -0.2, 0.3)), Vec3::new(1.0, 2.0, 3.0));
        let pts: Vec<Vec3> = (0..10_000)
            .map(|_| Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-0.5..0.5)))
            .collect();
        let mut m = map();
        for chunk in pts.chunks(777) {
            m.insert_points(chunk, &pose);
        }
        let mut bins: BTreeMap<VoxelKey, (Vec3, usize)> = BTreeMap::new();
        for p in &pts {
            let pw = pose.transform_point(p);
            let e = bins.entry(quantize(&pw, m.s0()).unwrap()).or_insert((Vec3::zeros(), 0));
            e.0 += pw;
            e.1 += 1;
        }
        assert_eq!(bins.len(), m.l0_len());
        for (k, (sum, n)) in bins {
            let v = m.l0(k).unwrap();
            assert_eq!(v.count as usize, n);
            assert!((v.centroid - sum / n as f64).norm() < 1e-9);
        }
        m.check_integrity().unwrap();
    }

    #[test]
    fn incremental_centroid_no_drift() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut m = map();
        let base = Vec3::new(100.02, -49.98, 3.02);
        let mut sum = Vec3::zeros();
        for _ in 0..10_000 {
            let p = base + Vec3::new(rng.random_range(0.0..0.1), rng.random_range(0.0..0.1), rng.random_range(0.0..0.1));
            sum += p;
            m.insert_points(&[p], &Pose::identity());
        }
        assert_eq!(m.l0_len(), 1);
        let (_, v) = m.l0_iter().next().unwrap();
        assert!((v.centroid - sum / 10_000.0).norm() < 1e-9);
    }

    fn plane_cell_points() -> Vec<Vec3> {
        // five L0 children of coarse cell (0,0,0) on the plane z = 0.25
        let s0 = HVoxConfig::default().s0;
        [(0, 0), (1, 0), (2, 1), (0, 2), (1, 1)]
            .iter()
            .map(|&(i, j)| Vec3::new((i as f64 + 0.5) * s0, (j as f64 + 0.3) * s0, 0.25))
            .collect()
    }

    #[test]
    fn recompute_delegates_to_compute_surfel() {
        let mut m = map();
        let pts = plane_cell_points();
        m.insert_points(&pts, &Pose::identity());
        assert_eq!(m.recompute_dirty(), 1);
        let cell = m.l1(VoxelKey::new(0, 0, 0)).unwrap();
        let expected = compute_surfel(&m.children_centroids(VoxelKey::new(0, 0, 0)), 1e-6).unwrap();
        assert_eq!(cell.surfel.unwrap(), expected);
        assert!(!cell.dirty);
        assert_relative_eq!(expected.normal, Vec3::z(), epsilon = 1e-12);
    }

    #[test]
    fn too_few_children_clear_surfel() {
        let mut m = map();
        m.insert_points(&plane_cell_points()[..4], &Pose::identity());
        m.recompute_dirty();
        assert!(m.l1(VoxelKey::new(0, 0, 0)).unwrap().surfel.is_none());
        m.check_integrity().unwrap();
    }

    #[test]
    fn query_cases() {
        let mut m = map();
        assert!(m.query_surfel(&Vec3::new(0.1, 0.1, 0.1)).is_none());
        m.insert_points(&plane_cell_points(), &Pose::identity());
        m.recompute_dirty();
        let s = *m.query_surfel(&Vec3::new(0.4, 0.1, 0.3)).unwrap();
        assert_eq!(Some(s), m.l1(VoxelKey::new(0, 0, 0)).unwrap().surfel);
        assert!(m.query_surfel(&Vec3::new(0.6, 0.1, 0.3)).is_none());
        assert!(m.query_surfel(&Vec3::new(f64::NAN, 0.0, 0.0)).is_none());
    }

    #[test]
    fn query_threshold_is_strict() {
        let mut m = map();
        m.insert_points(&plane_cell_points(), &Pose::identity());
        m.recompute_dirty();
        let rho = m.l1(VoxelKey::new(0, 0, 0)).unwrap().surfel.unwrap().planarity;
        m.cfg.rho_min = rho;
        assert!(m.query_surfel(&Vec3::new(0.1, 0.1, 0.25)).is_none());
        m.cfg.rho_min = rho - 1e-12;
        assert!(m.query_surfel(&Vec3::new(0.1, 0.1, 0.25)).is_some());
    }

    #[test]
    fn query_does_not_mutate() {
        let mut m = map();
        m.insert_points(&plane_cell_points(), &Pose::identity());
        m.recompute_dirty();
        m.insert_points(&[Vec3::new(3.0, 3.0, 3.0)], &Pose::identity());
        let before = m.fingerprint();
        for i in 0..1000 {
            let _ = m.query_surfel(&Vec3::new(i as f64 * 0.01, 0.1, 0.25));
        }
        assert_eq!(before, m.fingerprint());
    }

    #[test]
    fn trim_cases() {
        let mut m = map();
        m.insert_points(&plane_cell_points(), &Pose::identity());
        assert_eq!(m.trim(&Vec3::zeros(), 100.0).total(), 0);
        m.insert_points(&[Vec3::new(300.0, 0.0, 0.0)], &Pose::identity());
        let s = m.trim(&Vec3::zeros(), 100.0);
        assert_eq!(s, TrimStats { l0_removed: 1, l1_removed: 1 });
        m.check_integrity().unwrap();
        // z is unbounded
        m.insert_points(&[Vec3::new(0.0, 0.0, 500.0)], &Pose::identity());
        assert_eq!(m.trim(&Vec3::zeros(), 100.0).total(), 0);
    }

    #[test]
    fn trim_keeps_integrity_on_random_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut m = map();
        let pts: Vec<Vec3> = (0..20_000)
            .map(|_| Vec3::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(0.0..2.0)))
            .collect();
        m.insert_points(&pts, &Pose::identity());
        m.recompute_dirty();
        let center = Vec3::new(3.3, -4.1, 0.0);
        let s = m.trim(&center, 7.7);
        assert!(s.total() > 0);
        m.check_integrity().unwrap();
        for (k, _) in m.l0_iter() {
            let c = k.center(m.s0());
            assert!((c.x - center.x).abs() <= 7.7 && (c.y - center.y).abs() <= 7.7);
        }
        m.recompute_dirty();
        m.check_integrity().unwrap();
    }

    #[test]
    fn snapshot_has_one_row_per_coarse_cell() {
        let mut m = map();
        m.insert_points(&plane_cell_points(), &Pose::identity());
        m.insert_points(&[Vec3::new(5.0, 5.0, 5.0)], &Pose::identity());
        m.recompute_dirty();
        let mut out = Vec::new();
        m.write_snapshot(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + m.l1_len());
        assert!(lines.iter().skip(1).all(|l| l.split(',').count() == 9));
    }
}
