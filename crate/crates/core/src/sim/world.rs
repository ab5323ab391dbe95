use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Translation applied to the built-in worlds so that no wall lies exactly
/// on a voxel boundary; their floors sit at `WORLD_OFFSET.z`.
pub const WORLD_OFFSET: Vec3 = Vec3::new(0.13, -0.07, -0.11);

/// Finite parallelogram `corner + u * e1 + v * e2`, `u, v` in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Patch {
    pub corner: Vec3,
    pub e1: Vec3,
    pub e2: Vec3,
    pub normal: Vec3,
    // dual basis for recovering (u, v) from an in-plane offset
    d1: Vec3,
    d2: Vec3,
}

impl Patch {
    pub fn new(corner: Vec3, e1: Vec3, e2: Vec3) -> Result<Self> {
        let n = e1.cross(&e2);
        if !(n.norm() > 1e-9 * e1.norm() * e2.norm()) || !n.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidInput("patch edges are parallel".into()));
        }
        let (g11, g12, g22) = (e1.dot(&e1), e1.dot(&e2), e2.dot(&e2));
        let det = g11 * g22 - g12 * g12;
        Ok(Patch {
            corner,
            e1,
            e2,
            normal: n.normalize(),
            d1: (e1 * g22 - e2 * g12) / det,
            d2: (e2 * g11 - e1 * g12) / det,
        })
    }

    /// Axis-aligned rectangle from two opposite corners; one coordinate must
    /// agree.
    pub fn rect(a: Vec3, b: Vec3) -> Self {
        let d = b - a;
        let flat = (0..3).find(|&i| d[i] == 0.0).expect("rectangle must be axis aligned");
        let (i, j) = ((flat + 1) % 3, (flat + 2) % 3);
        let mut e1 = Vec3::zeros();
        let mut e2 = Vec3::zeros();
        e1[i] = d[i];
        e2[j] = d[j];
        Patch::new(a, e1, e2).expect("degenerate rectangle")
    }

    /// Grid samples over the patch with at most `spacing` between neighbors,
    /// edges included.
    pub fn samples(&self, spacing: f64) -> Vec<Vec3> {
        let nu = (self.e1.norm() / spacing).ceil().max(1.0) as usize;
        let nv = (self.e2.norm() / spacing).ceil().max(1.0) as usize;
        let mut out = Vec::with_capacity((nu + 1) * (nv + 1));
        for i in 0..=nu {
            for j in 0..=nv {
                out.push(self.corner + self.e1 * (i as f64 / nu as f64) + self.e2 * (j as f64 / nv as f64));
            }
        }
        out
    }

    /// Ray parameter of the hit, if the ray meets the patch ahead of `origin`.
    #[inline]
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        let denom = self.normal.dot(dir);
        if denom.abs() < 1e-12 {
            return None;
        }
        let t = self.normal.dot(&(self.corner - origin)) / denom;
        if t <= 1e-9 {
            return None;
        }
        let q = origin + dir * t - self.corner;
        let (u, v) = (self.d1.dot(&q), self.d2.dot(&q));
        ((0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v)).then_some(t)
    }

    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(&(p - self.corner))
    }
}

#[derive(Debug, Clone, Default)]
pub struct PlanarWorld {
    pub patches: Vec<Patch>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub range: f64,
    pub patch: usize,
}

impl PlanarWorld {
    pub fn new(patches: Vec<Patch>) -> Self {
        PlanarWorld { patches }
    }

    /// Nearest patch hit along a unit direction.
    pub fn raycast(&self, origin: &Vec3, dir: &Vec3) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for (i, p) in self.patches.iter().enumerate() {
            if let Some(t) = p.intersect(origin, dir) {
                if best.is_none_or(|b| t < b.range) {
                    best = Some(Hit { range: t, patch: i });
                }
            }
        }
        best
    }

    /// Closed axis-aligned box, all six faces.
    pub fn add_box(&mut self, min: Vec3, max: Vec3) {
        let c = |x: f64, y: f64, z: f64| Vec3::new(x, y, z);
        let (a, b) = (min, max);
        self.patches.extend([
            Patch::rect(c(a.x, a.y, a.z), c(b.x, b.y, a.z)),
            Patch::rect(c(a.x, a.y, b.z), c(b.x, b.y, b.z)),
            Patch::rect(c(a.x, a.y, a.z), c(b.x, a.y, b.z)),
            Patch::rect(c(a.x, b.y, a.z), c(b.x, b.y, b.z)),
            Patch::rect(c(a.x, a.y, a.z), c(a.x, b.y, b.z)),
            Patch::rect(c(b.x, a.y, a.z), c(b.x, b.y, b.z)),
        ]);
    }

    /// Axis-aligned cube of edge `edge` centered at `center`.
    pub fn cube(center: Vec3, edge: f64) -> Self {
        let mut w = PlanarWorld::default();
        let h = Vec3::repeat(edge / 2.0);
        w.add_box(center - h, center + h);
        w
    }

    /// 20 x 20 x 4 m room, two pillars, a low interior wall and three slanted
    /// panels, shifted by [`WORLD_OFFSET`].
    pub fn room() -> Self {
        let c = |x: f64, y: f64, z: f64| Vec3::new(x, y, z) + WORLD_OFFSET;
        let mut w = PlanarWorld::default();
        w.add_box(c(-10.0, -10.0, 0.0), c(10.0, 10.0, 4.0));
        w.add_box(c(-0.75, 6.0, 0.0), c(0.75, 7.5, 4.0));
        w.add_box(c(-0.75, -7.5, 0.0), c(0.75, -6.0, 4.0));
        w.add_box(c(8.0, -4.0, 0.0), c(8.4, 4.0, 2.0));
        // slanted panels leaning on the walls
        w.patches.push(Patch::new(c(-9.9, -5.0, 0.0), c(1.5, 0.0, 2.5), c(0.0, 10.0, 0.0)).unwrap());
        w.patches.push(Patch::new(c(-6.0, 9.9, 0.0), c(0.0, -1.2, 3.0), c(4.0, 0.0, 0.0)).unwrap());
        w.patches.push(Patch::new(c(2.0, -9.9, 0.0), c(4.0, 0.0, 0.0), c(0.0, 2.0, 2.0)).unwrap());
        w
    }

    /// Set of disjoint panels facing the origin, with gaps between panels so
    /// that no coarse map cell sees two planes. Shifted by [`WORLD_OFFSET`].
    pub fn panels() -> Self {
        let c = |x: f64, y: f64, z: f64| Vec3::new(x, y, z) + WORLD_OFFSET;
        let mut w = PlanarWorld::default();
        w.patches.push(Patch::rect(c(-6.0, -6.0, 0.0), c(6.0, 6.0, 0.0)));
        w.patches.push(Patch::rect(c(-3.0, -3.0, 4.0), c(3.0, 3.0, 4.0)));
        w.patches.push(Patch::rect(c(7.0, -4.0, 1.0), c(7.0, 4.0, 3.5)));
        w.patches.push(Patch::rect(c(-5.0, 7.0, 1.0), c(5.0, 7.0, 3.5)));
        w.patches.push(Patch::new(c(-8.0, -4.0, 1.0), c(1.0, 0.0, 2.0), c(0.0, 8.0, 0.0)).unwrap());
        w.patches.push(Patch::new(c(-4.0, -8.0, 1.0), c(8.0, 0.0, 0.0), c(0.0, 1.5, 2.0)).unwrap());
        w
    }
}
