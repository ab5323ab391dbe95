use std::time::{Duration, Instant};

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::geometry::{skew, Vec3};
use crate::hvox::{HVoxMap, Surfel};

use super::{ErrorState, Mat15, NavState, StateCovariance, Vec15};

type Vec6 = SVector<f64, 6>;
type Mat6 = SMatrix<f64, 6, 6>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IekfConfig {
    /// Point-to-plane measurement standard deviation in meters.
    pub sigma: f64,
    /// Residuals larger than this are discarded.
    pub gate: f64,
    pub min_corr: usize,
    /// Convergence threshold on the norm of the full correction.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IekfConfig {
    fn default() -> Self {
        IekfConfig {
            sigma: 0.05,
            gate: 0.5,
            min_corr: 50,
            tol: 1e-4,
            max_iter: 5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IekfStats {
    pub iterations: usize,
    /// Correspondences used by the last applied iteration.
    pub n_corr: usize,
    /// Mean absolute residual at the start of every applied iteration.
    pub mean_abs_residual: Vec<f64>,
    /// Norm of every applied correction.
    pub step_norms: Vec<f64>,
    pub skipped: bool,
    pub converged: bool,
    /// Surfel lookups performed (points times query passes).
    pub queries: usize,
    pub query_time: Duration,
    /// Time spent forming residuals and Jacobians.
    pub residual_time: Duration,
    pub solve_time: Duration,
}

/// Signed point-to-plane distance of body point `p` under `state`.
#[inline]
pub fn residual(state: &NavState, p: &Vec3, surfel: &Surfel) -> f64 {
    surfel.normal.dot(&(state.rotation * *p + state.position - surfel.centroid))
}

/// Derivative of [`residual`] with respect to the 15-dim error state.
pub fn jacobian_row(state: &NavState, p: &Vec3, surfel: &Surfel) -> Vec15 {
    let mut row = Vec15::zeros();
    let h = jacobian6(state, p, &surfel.normal);
    row.fixed_rows_mut::<6>(0).copy_from(&h);
    row
}

#[inline]
fn jacobian6(state: &NavState, p: &Vec3, n: &Vec3) -> Vec6 {
    let rot = -(n.transpose() * state.rotation.matrix() * skew(p));
    Vec6::new(rot[0], rot[1], rot[2], n.x, n.y, n.z)
}

fn embed6(m: &Mat6) -> Mat15 {
    let mut out = Mat15::zeros();
    out.fixed_view_mut::<6, 6>(0, 0).copy_from(m);
    out
}

fn inverse(p: &Mat15) -> Option<Mat15> {
    match p.cholesky() {
        Some(c) => Some(c.inverse()),
        None => p.try_inverse(),
    }
}

/// Iterated measurement update over body-frame scan points.
pub fn iekf_update(
    state: &NavState,
    cov: &StateCovariance,
    points: &[Vec3],
    map: &HVoxMap,
    cfg: &IekfConfig,
) -> (NavState, StateCovariance, IekfStats) {
    iekf_update_with(state, cov, points, map, cfg, Exec::default())
}

pub fn iekf_update_with(
    state: &NavState,
    cov: &StateCovariance,
    points: &[Vec3],
    map: &HVoxMap,
    cfg: &IekfConfig,
    exec: Exec,
) -> (NavState, StateCovariance, IekfStats) {
    let mut stats = IekfStats::default();
    let skip = |mut stats: IekfStats| {
        stats.skipped = true;
        (*state, *cov, stats)
    };
    if points.is_empty() || map.is_empty() {
        return skip(stats);
    }
    let Some(p_inv) = inverse(&cov.0) else {
        return skip(stats);
    };
    let w = 1.0 / (cfg.sigma * cfg.sigma);
    let prior = *state;
    let mut x = prior;
    let mut info: Option<(Mat15, Mat6)> = None;

    for iter in 0..cfg.max_iter.max(1) {
        let t0 = Instant::now();
        let pose = x.pose();
        let surfels: Vec<Option<Surfel>> =
            exec.map(points, |p| map.query_surfel(&pose.transform_point(p)).copied());
        stats.query_time += t0.elapsed();
        stats.queries += points.len();

        let t1 = Instant::now();
        let rows: Vec<Option<(Vec6, f64)>> = exec.map_range(points.len(), |i| {
            let s = surfels[i].as_ref()?;
            let r = residual(&x, &points[i], s);
            (r.abs() <= cfg.gate).then(|| (jacobian6(&x, &points[i], &s.normal), r))
        });
        let mut hth = Mat6::zeros();
        let mut htr = Vec6::zeros();
        let mut count = 0usize;
        let mut abs_sum = 0.0;
        for (h, r) in rows.iter().flatten() {
            hth += h * h.transpose();
            htr += h * *r;
            abs_sum += r.abs();
            count += 1;
        }
        stats.residual_time += t1.elapsed();

        if count < cfg.min_corr {
            if iter == 0 {
                return skip(stats);
            }
            break;
        }
        let t2 = Instant::now();
        let a = p_inv + embed6(&hth) * w;
        let dx = x.local(&prior).to_vector();
        let mut b = -(p_inv * dx);
        b.fixed_rows_mut::<6>(0).axpy(-w, &htr, 1.0);
        let delta = match a.cholesky() {
            Some(c) => c.solve(&b),
            None => match a.try_inverse() {
                Some(ai) => ai * b,
                None => break,
            },
        };
        x = x.retract(&ErrorState::from_vector(&delta));
        stats.solve_time += t2.elapsed();

        stats.iterations += 1;
        stats.n_corr = count;
        stats.mean_abs_residual.push(abs_sum / count as f64);
        stats.step_norms.push(delta.norm());
        info = Some((a, hth));
        if delta.norm() < cfg.tol {
            stats.converged = true;
            break;
        }
    }

    let Some((a, hth)) = info else {
        return skip(stats);
    };
    let Some(a_inv) = inverse(&a) else {
        return skip(stats);
    };
    let kh = a_inv * embed6(&hth) * w;
    let mut post = StateCovariance((Mat15::identity() - kh) * cov.0);
    post.symmetrize();
    (x, post, stats)
}
