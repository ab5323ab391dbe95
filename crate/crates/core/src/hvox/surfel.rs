//! Plane primitives fitted by PCA over a small set of points.

use crate::error::{Error, Result};
use crate::geometry::{Mat3, Vec3};

/// Largest eigenvalue below which the input is treated as a single point.
const COINCIDENT_EIGENVALUE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Surfel {
    /// Unit normal, sign fixed so its largest-magnitude component is positive.
    pub normal: Vec3,
    pub centroid: Vec3,
    /// `(l2 - l3) / (l1 + eps)` over the descending covariance eigenvalues.
    pub planarity: f64,
    pub child_count: u32,
}

impl Surfel {
    /// Signed distance of `p` from the surfel plane.
    #[inline]
    pub fn distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(&(p - self.centroid))
    }
}

/// Eigen-decomposition of a symmetric 3x3 matrix.
#[derive(Debug, Clone, Copy)]
pub struct SymEigen3 {
    /// Descending.
    pub values: [f64; 3],
    /// Column `i` pairs with `values[i]`.
    pub vectors: Mat3,
}

/// Cyclic Jacobi rotations until the off-diagonal mass vanishes. Exact to
/// rounding for 3x3 and deterministic, including on repeated eigenvalues.
pub fn sym_eigen3(m: &Mat3) -> SymEigen3 {
    let mut a = [
        [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
        [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
        [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
    ];
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let scale = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2]
        + 2.0 * (a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2]);
    let stop = scale * 1e-34;

    for _sweep in 0..32 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        if off <= stop {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[p][q];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in &mut v {
                let vp = row[p];
                let vq = row[q];
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }

    let mut order = [0usize, 1, 2];
    // stable sort keeps Jacobi's column order on ties
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = [a[order[0]][order[0]], a[order[1]][order[1]], a[order[2]][order[2]]];
    let col = |i: usize| Vec3::new(v[0][i], v[1][i], v[2][i]);
    SymEigen3 {
        values,
        vectors: Mat3::from_columns(&[col(order[0]), col(order[1]), col(order[2])]),
    }
}

/// Flips `n` so that its largest-magnitude component is positive (first
/// index wins ties).
pub fn canonical_normal(n: Vec3) -> Vec3 {
    let mut best = 0;
    for i in 1..3 {
        if n[i].abs() > n[best].abs() {
            best = i;
        }
    }
    if n[best] < 0.0 {
        -n
    } else {
        n
    }
}

/// Mean and population covariance (divided by `m`).
pub fn mean_and_covariance(points: &[Vec3]) -> (Vec3, Mat3) {
    let m = points.len() as f64;
    let mean = points.iter().fold(Vec3::zeros(), |acc, p| acc + p) / m;
    let (mut xx, mut xy, mut xz, mut yy, mut yz, mut zz) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points {
        let d = p - mean;
        xx += d.x * d.x;
        xy += d.x * d.y;
        xz += d.x * d.z;
        yy += d.y * d.y;
        yz += d.y * d.z;
        zz += d.z * d.z;
    }
    let cov = Mat3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz) / m;
    (mean, cov)
}

/// Fits a surfel to `points` (at least three).
pub fn compute_surfel(points: &[Vec3], eps: f64) -> Result<Surfel> {
    if points.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "surfel needs at least 3 points, got {}",
            points.len()
        )));
    }
    let (centroid, cov) = mean_and_covariance(points);
    let eig = sym_eigen3(&cov);
    let [l1, l2, l3] = eig.values;
    let normal = canonical_normal(eig.vectors.column(2).normalize());
    let planarity = if l1 < COINCIDENT_EIGENVALUE {
        0.0
    } else {
        ((l2 - l3) / (l1 + eps)).max(0.0)
    };
    Ok(Surfel {
        normal,
        centroid,
        planarity,
        child_count: points.len() as u32,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rotation;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const EPS: f64 = 1e-6;

    #[test]
    fn unit_square_with_center() {
        let pts = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.5, 0.5, 0.0),
        ];
        // hand PCA: deviations +-0.5 on four corners -> var x = var y = 4*0.25/5 = 0.2, cov xy = 0
        let (_, cov) = mean_and_covariance(&pts);
        assert_relative_eq!(cov, Mat3::from_diagonal(&Vec3::new(0.2, 0.2, 0.0)), epsilon = 1e-15);
        let s = compute_surfel(&pts, EPS).unwrap();
        assert_relative_eq!(s.normal, Vec3::z(), epsilon = 1e-12);
        assert_relative_eq!(s.centroid, Vec3::new(0.5, 0.5, 0.0), epsilon = 1e-15);
        assert_relative_eq!(s.planarity, 0.2 / (0.2 + EPS), epsilon = 1e-12);
        assert_eq!(s.child_count, 5);
    }

    #[test]
    fn collinear_is_not_planar() {
        let pts = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 0.0), Vec3::new(2.0, 2.0, 0.0)];
        let s = compute_surfel(&pts, EPS).unwrap();
        assert!(s.planarity < 1e-12, "rho {}", s.planarity);
    }

    #[test]
    fn coincident_points_give_zero_planarity() {
        let p = Vec3::new(3.0, -1.0, 2.0);
        let s = compute_surfel(&[p, p, p, p], EPS).unwrap();
        assert_eq!(s.planarity, 0.0);
        assert_relative_eq!(s.normal.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn too_few_points() {
        assert!(compute_surfel(&[Vec3::zeros(), Vec3::x()], EPS).is_err());
    }

    #[test]
    fn jacobi_reconstructs_random_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let b = Mat3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let a = b * b.transpose();
            let e = sym_eigen3(&a);
            let recon = e.vectors * Mat3::from_diagonal(&Vec3::from(e.values)) * e.vectors.transpose();
            assert!((recon - a).abs().max() < 1e-13);
            assert!((e.vectors.transpose() * e.vectors - Mat3::identity()).abs().max() < 1e-13);
            assert!(e.values[0] >= e.values[1] && e.values[1] >= e.values[2]);
        }
    }

    #[test]
    fn coplanar_rotation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let pts: Vec<Vec3> = (0..12)
                .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0))
                .collect();
            let base = compute_surfel(&pts, EPS).unwrap();
            let r = Rotation::exp(&Vec3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ));
            let rotated: Vec<Vec3> = pts.iter().map(|p| r * p).collect();
            let s = compute_surfel(&rotated, EPS).unwrap();
            let expected = r * base.normal;
            assert!((s.normal.dot(&expected).abs() - 1.0).abs() < 1e-9);
            assert!((s.planarity - base.planarity).abs() < 1e-9);
            for p in &rotated {
                assert!(s.distance(p).abs() < 1e-9);
            }
        }
    }
}
