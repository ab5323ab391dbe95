//! Trajectory association, rigid alignment and absolute pose error.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::geometry::{Pose, Rotation, Vec3};

pub const DEFAULT_MAX_DT: f64 = 0.02;

/// Stamped poses with strictly increasing stamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    poses: Vec<(f64, Pose)>,
}

impl Trajectory {
    pub fn new(poses: Vec<(f64, Pose)>) -> Result<Self> {
        if let Some(w) = poses.windows(2).find(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidInput(format!(
                "trajectory stamps must increase strictly ({} then {})",
                w[0].0, w[1].0
            )));
        }
        if poses.iter().any(|(t, p)| !t.is_finite() || !p.translation.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidInput("non-finite trajectory entry".into()));
        }
        Ok(Trajectory { poses })
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(f64, Pose)> + '_ {
        self.poses.iter()
    }

    pub fn as_slice(&self) -> &[(f64, Pose)] {
        &self.poses
    }

    /// Appends a pose; the stamp must be later than the last one.
    pub fn push(&mut self, stamp: f64, pose: Pose) -> Result<()> {
        if self.poses.last().is_some_and(|(t, _)| stamp <= *t) {
            return Err(Error::InvalidInput(format!("stamp {stamp} is not increasing")));
        }
        self.poses.push((stamp, pose));
        Ok(())
    }

    /// Applies `t` on the left of every pose.
    pub fn transformed(&self, t: &Pose) -> Trajectory {
        Trajectory { poses: self.poses.iter().map(|(s, p)| (*s, t.compose(p))).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosePair {
    pub stamp: f64,
    pub est: Pose,
    pub reference: Pose,
}

/// Pairs each estimate with the nearest unused reference stamp within
/// `max_dt`.
pub fn associate(est: &Trajectory, reference: &Trajectory, max_dt: f64) -> Result<Vec<PosePair>> {
    if est.is_empty() || reference.is_empty() {
        return Err(Error::InvalidInput("cannot associate an empty trajectory".into()));
    }
    let refs = reference.as_slice();
    let mut used = vec![false; refs.len()];
    let mut pairs = Vec::new();
    for (t, pose) in est.iter() {
        let at = refs.partition_point(|(s, _)| *s < *t);
        let mut best: Option<(f64, usize)> = None;
        let mut consider = |j: usize| {
            let dt = (refs[j].0 - t).abs();
            if dt <= max_dt && !used[j] && best.is_none_or(|(d, _)| dt < d) {
                best = Some((dt, j));
            }
        };
        let mut j = at;
        while j < refs.len() && refs[j].0 - t <= max_dt {
            consider(j);
            j += 1;
        }
        let mut j = at;
        while j > 0 && t - refs[j - 1].0 <= max_dt {
            consider(j - 1);
            j -= 1;
        }
        if let Some((_, j)) = best {
            used[j] = true;
            pairs.push(PosePair { stamp: *t, est: *pose, reference: refs[j].1 });
        }
    }
    if pairs.is_empty() {
        return Err(Error::NoAssociation { max_dt });
    }
    Ok(pairs)
}

/// Least-squares rigid transform `T` minimizing `sum |T p_est - p_ref|^2`
/// (no scale), with the reflection case corrected.
pub fn align_se3(pairs: &[PosePair]) -> Result<Pose> {
    if pairs.len() < 3 {
        return Err(Error::DegenerateAlignment(format!("{} pairs, need at least 3", pairs.len())));
    }
    let n = pairs.len() as f64;
    let mu_e = pairs.iter().map(|p| p.est.translation).sum::<Vec3>() / n;
    let mu_r = pairs.iter().map(|p| p.reference.translation).sum::<Vec3>() / n;
    let mut cross = Matrix3::zeros();
    let mut spread = Matrix3::zeros();
    for p in pairs {
        let e = p.est.translation - mu_e;
        cross += (p.reference.translation - mu_r) * e.transpose();
        spread += e * e.transpose();
    }
    let sv = spread.symmetric_eigenvalues();
    let mut s = [sv[0], sv[1], sv[2]];
    s.sort_by(|a, b| b.total_cmp(a));
    if !(s[1] > 1e-12 * s[0].max(1e-300)) {
        return Err(Error::DegenerateAlignment("estimated positions are collinear".into()));
    }
    let svd = cross.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v requested"));
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        // the smallest singular value is last after nalgebra's sort
        let i = (0..3)
            .min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
            .unwrap_or(2);
        d[(i, i)] = -1.0;
    }
    let r = Rotation::from_matrix_orthonormalized(u * d * v_t);
    let t = mu_r - r * mu_e;
    Ok(Pose::new(r, t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApeReport {
    pub rmse: f64,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    pub count: usize,
    /// Rotation error RMSE in radians; informative only.
    pub rotation_rmse: f64,
}

/// Translational error statistics of `alignment * est` against the
/// reference; `None` leaves the estimate as is.
pub fn ape_rmse(pairs: &[PosePair], alignment: Option<&Pose>) -> Result<ApeReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no pose pairs".into()));
    }
    let t = alignment.copied().unwrap_or_default();
    let mut errs: Vec<f64> = Vec::with_capacity(pairs.len());
    let mut rot_sq = 0.0;
    for p in pairs {
        let aligned = t.compose(&p.est);
        errs.push((aligned.translation - p.reference.translation).norm());
        rot_sq += (p.reference.rotation.transpose() * aligned.rotation).angle().powi(2);
    }
    let n = errs.len() as f64;
    let rmse = (errs.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    let mean = errs.iter().sum::<f64>() / n;
    let max = errs.iter().copied().fold(0.0, f64::max);
    let mut sorted = errs.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mid = sorted.len() / 2;
    let median = if sorted.len().is_multiple_of(2) { 0.5 * (sorted[mid - 1] + sorted[mid]) } else { sorted[mid] };
    Ok(ApeReport { rmse, mean, median, max, count: errs.len(), rotation_rmse: (rot_sq / n).sqrt() })
}

/// Associate, align and score in one step.
pub fn evaluate(est: &Trajectory, reference: &Trajectory, max_dt: f64) -> Result<ApeReport> {
    let pairs = associate(est, reference, max_dt)?;
    let alignment = align_se3(&pairs)?;
    ape_rmse(&pairs, Some(&alignment))
}

impl ApeReport {
    pub fn to_key_values(&self) -> String {
        format!(
            "rmse={}\nmean={}\nmedian={}\nmax={}\ncount={}\nrotation_rmse_rad={}\n",
            self.rmse, self.mean, self.median, self.max, self.count, self.rotation_rmse
        )
    }
}
