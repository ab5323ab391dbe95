//! Scan-to-map odometry loop.
//!
//! IMU samples are buffered as they arrive. Each scan is processed as:
//! propagate to the scan end, undistort into the scan-end body frame,
//! downsample, iterated update against the map, insert the undistorted scan,
//! refit dirty surfels and, once the sensor has moved more than one coarse
//! cell, trim the map to the local extent.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use crate::dataset::{ScanFrame, ScanPoint};
use crate::dataset::DatasetReader;
use crate::error::{Error, Result};
use crate::estimation::{
    iekf_update_with, propagate, static_init, IekfConfig, IekfStats, ImuSample, NavState, NoiseConfig,
    StateCovariance, MAX_DT, MIN_INIT_SAMPLES,
};
use crate::eval::Trajectory;
use crate::exec::Exec;
use crate::geometry::{Pose, Rotation, Vec3};
use crate::hvox::{HVoxConfig, HVoxMap};
use crate::morton::morton_of;
use crate::table::RobinHoodMap;

const STAMP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Fine cell edge; coarse cells are three times larger.
    pub s0: f64,
    pub rho_min: f64,
    pub m_min: usize,
    pub planarity_eps: f64,
    /// Downsampling leaf edge in meters.
    pub leaf: f64,
    /// Half side of the square local map kept around the sensor.
    pub half_extent: f64,
    /// Longest IMU gap tolerated inside a scan before undistortion is skipped.
    pub max_imu_gap: f64,
    pub init_samples: usize,
    /// LiDAR origin in the body frame.
    pub extrinsic_translation: [f64; 3],
    /// LiDAR orientation in the body frame as a rotation vector.
    pub extrinsic_rotation: [f64; 3],
    #[serde(flatten)]
    pub iekf: IekfConfig,
    #[serde(flatten)]
    pub noise: NoiseConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            s0: 0.5 / 3.0,
            rho_min: 0.01,
            m_min: 5,
            planarity_eps: 1e-6,
            leaf: 0.5,
            half_extent: 100.0,
            max_imu_gap: 0.05,
            init_samples: MIN_INIT_SAMPLES,
            extrinsic_translation: [0.0; 3],
            extrinsic_rotation: [0.0; 3],
            iekf: IekfConfig::default(),
            noise: NoiseConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn hvox(&self) -> HVoxConfig {
        HVoxConfig { s0: self.s0, rho_min: self.rho_min, m_min: self.m_min, eps: self.planarity_eps }
    }

    pub fn extrinsic(&self) -> Pose {
        let [x, y, z] = self.extrinsic_translation;
        let [a, b, c] = self.extrinsic_rotation;
        Pose::new(Rotation::exp(&Vec3::new(a, b, c)), Vec3::new(x, y, z))
    }

    pub fn validate(&self) -> Result<()> {
        self.hvox().validate()?;
        let lengths = [self.leaf, self.half_extent, self.max_imu_gap, self.iekf.sigma, self.iekf.gate];
        if lengths.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidInput("lengths, gap and noise levels must be positive".into()));
        }
        if self.init_samples < MIN_INIT_SAMPLES {
            return Err(Error::InvalidInput(format!("init_samples must be at least {MIN_INIT_SAMPLES}")));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Integrates the IMU stream from `state` up to `t_end`, holding each sample
/// until the next one. Returns the pose after every step and the longest
/// interval covered by a single sample.
fn integrate(
    state: &NavState,
    cov: &StateCovariance,
    samples: &[ImuSample],
    t_end: f64,
    noise: &NoiseConfig,
    mut knots: Option<&mut Vec<(f64, Pose)>>,
) -> Result<(NavState, StateCovariance, f64)> {
    let (mut x, mut p) = (*state, *cov);
    let mut max_gap: f64 = 0.0;
    if let Some(k) = knots.as_deref_mut() {
        k.push((x.stamp, x.pose()));
    }
    if samples.is_empty() {
        return Ok((x, p, f64::INFINITY));
    }
    while x.stamp < t_end - STAMP_EPS {
        let after = samples.partition_point(|s| s.stamp <= x.stamp + STAMP_EPS);
        let current = &samples[after.saturating_sub(1)];
        let next = samples.get(after).map_or(t_end, |s| s.stamp.min(t_end));
        let span = next - x.stamp;
        max_gap = max_gap.max(span);
        let steps = (span / MAX_DT).ceil().max(1.0) as usize;
        let dt = span / steps as f64;
        for _ in 0..steps {
            (x, p) = propagate(&x, &p, current, dt, noise)?;
        }
        x.stamp = next;
        if let Some(k) = knots.as_deref_mut() {
            k.push((x.stamp, x.pose()));
        }
    }
    Ok((x, p, max_gap))
}

fn pose_at(knots: &[(f64, Pose)], t: f64) -> Pose {
    let i = knots.partition_point(|(s, _)| *s <= t);
    if i == 0 {
        return knots[0].1;
    }
    if i >= knots.len() {
        return knots[knots.len() - 1].1;
    }
    let (t0, a) = &knots[i - 1];
    let (t1, b) = &knots[i];
    let alpha = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
    a.interpolate(b, alpha)
}

fn deskew(scan: &ScanFrame, knots: &[(f64, Pose)], extrinsic: &Pose, exec: Exec) -> Vec<Vec3> {
    let end_inv = knots[knots.len() - 1].1.inverse();
    exec.map(&scan.points, |sp| {
        let pose = pose_at(knots, scan.base_stamp + sp.offset);
        end_inv.compose(&pose).transform_point(&extrinsic.transform_point(&sp.point))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Undistorted {
    /// Points in the body frame at the scan end.
    pub points: Vec<Vec3>,
    /// Set when the IMU did not cover the scan and points were passed through.
    pub skipped: bool,
}

/// Motion-compensates a scan using the IMU samples around it, starting from
/// the state at the scan's base stamp.
pub fn undistort(
    scan: &ScanFrame,
    imu_window: &[ImuSample],
    state_at_base: &NavState,
    extrinsic: &Pose,
    max_gap: f64,
) -> Undistorted {
    let raw = || scan.points.iter().map(|sp| extrinsic.transform_point(&sp.point)).collect();
    let start = NavState { stamp: scan.base_stamp, ..*state_at_base };
    let cov = StateCovariance(Default::default());
    let mut knots = Vec::new();
    match integrate(&start, &cov, imu_window, scan.end_stamp(), &NoiseConfig::default(), Some(&mut knots)) {
        Ok((_, _, gap)) if gap <= max_gap || scan.max_offset() == 0.0 => Undistorted {
            points: deskew(scan, &knots, extrinsic, Exec::default()),
            skipped: false,
        },
        _ => Undistorted { points: raw(), skipped: true },
    }
}

/// One point per occupied leaf cell, the one nearest the cell centroid, in
/// Morton order of the cells.
pub fn downsample(points: &[Vec3], leaf: f64) -> Vec<Vec3> {
    #[derive(Default)]
    struct Leaf {
        sum: Vec3,
        count: usize,
        best: Option<(usize, f64)>,
    }
    let mut leaves: RobinHoodMap<Leaf> = RobinHoodMap::with_capacity(points.len() / 4 + 1);
    let keys: Vec<_> = points.iter().map(|p| morton_of(p, leaf).map(|(_, m)| m)).collect();
    for (p, key) in points.iter().zip(&keys) {
        if let Some(m) = key {
            let (l, _) = leaves.get_or_insert_with(*m, Leaf::default);
            l.sum += p;
            l.count += 1;
        }
    }
    for (i, (p, key)) in points.iter().zip(&keys).enumerate() {
        if let Some(l) = key.and_then(|m| leaves.get_mut(m)) {
            let d2 = (p - l.sum / l.count as f64).norm_squared();
            if l.best.is_none_or(|(_, b)| d2 < b) {
                l.best = Some((i, d2));
            }
        }
    }
    let mut out: Vec<_> = leaves.iter().filter_map(|(m, l)| Some((m, points[l.best?.0]))).collect();
    out.sort_by_key(|(m, _)| *m);
    out.into_iter().map(|(_, p)| p).collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameTiming {
    pub frame_index: usize,
    pub stamp: f64,
    pub n_points: usize,
    pub n_downsampled: usize,
    pub n_corr: usize,
    pub iters: usize,
    pub query_us_per_pt: f64,
    pub plane_us_per_pt: f64,
    pub map_update_ms: f64,
    pub total_ms: f64,
    pub undistort_ms: f64,
    pub downsample_ms: f64,
    pub update_ms: f64,
    pub update_skipped: bool,
    pub undistort_skipped: bool,
    pub trimmed: usize,
}

impl FrameTiming {
    pub const CSV_HEADER: &'static str =
        "frame_index,n_points,n_corr,iters,query_us_per_pt,plane_us_per_pt,map_update_ms,total_ms";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.4},{:.4},{:.4},{:.4}",
            self.frame_index,
            self.n_points,
            self.n_corr,
            self.iters,
            self.query_us_per_pt,
            self.plane_us_per_pt,
            self.map_update_ms,
            self.total_ms
        )
    }

    /// Time attributed to the individual stages.
    pub fn stage_sum_ms(&self) -> f64 {
        self.undistort_ms + self.downsample_ms + self.update_ms + self.map_update_ms
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        if values.is_empty() {
            return Summary::default();
        }
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.total_cmp(b));
        let at = |q: f64| v[((v.len() - 1) as f64 * q).round() as usize];
        Summary { mean: v.iter().sum::<f64>() / v.len() as f64, median: at(0.5), p95: at(0.95) }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StageTimings {
    pub frames: Vec<FrameTiming>,
}

impl StageTimings {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(FrameTiming::CSV_HEADER);
        s.push('\n');
        for f in &self.frames {
            let _ = writeln!(s, "{}", f.csv_row());
        }
        s
    }

    fn summary(&self, f: impl Fn(&FrameTiming) -> f64) -> Summary {
        Summary::of(&self.frames.iter().map(f).collect::<Vec<_>>())
    }

    pub fn query_us_per_pt(&self) -> Summary {
        self.summary(|f| f.query_us_per_pt)
    }
    pub fn plane_us_per_pt(&self) -> Summary {
        self.summary(|f| f.plane_us_per_pt)
    }
    pub fn map_update_ms(&self) -> Summary {
        self.summary(|f| f.map_update_ms)
    }
    pub fn total_ms(&self) -> Summary {
        self.summary(|f| f.total_ms)
    }
}

/// Result of one processed scan.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub stamp: f64,
    pub pose: Pose,
    pub timing: FrameTiming,
    pub iekf: IekfStats,
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    cfg: PipelineConfig,
    extrinsic: Pose,
    exec: Exec,
    map: HVoxMap,
    state: NavState,
    cov: StateCovariance,
    initialized: bool,
    imu: VecDeque<ImuSample>,
    last_trim: Option<Vec3>,
    frames_seen: usize,
    trajectory: Trajectory,
    timings: StageTimings,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        Self::with_exec(cfg, Exec::default())
    }

    pub fn with_exec(cfg: PipelineConfig, exec: Exec) -> Result<Self> {
        cfg.validate()?;
        Ok(Pipeline {
            map: HVoxMap::new(cfg.hvox())?,
            extrinsic: cfg.extrinsic(),
            cov: cfg.noise.initial_covariance(),
            cfg,
            exec,
            state: NavState::default(),
            initialized: false,
            imu: VecDeque::new(),
            last_trim: None,
            frames_seen: 0,
            trajectory: Trajectory::default(),
            timings: StageTimings::default(),
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }
    pub fn map(&self) -> &HVoxMap {
        &self.map
    }
    pub fn state(&self) -> &NavState {
        &self.state
    }
    pub fn covariance(&self) -> &StateCovariance {
        &self.cov
    }
    pub fn is_initialized(&self) -> bool {
        self.initialized
    }
    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }
    pub fn timings(&self) -> &StageTimings {
        &self.timings
    }

    pub fn push_imu(&mut self, sample: ImuSample) -> Result<()> {
        if self.imu.back().is_some_and(|s| s.stamp >= sample.stamp) {
            return Err(Error::InvalidInput(format!("IMU stamp {} is not increasing", sample.stamp)));
        }
        self.imu.push_back(sample);
        Ok(())
    }

    /// Drops samples that can no longer influence propagation.
    fn prune_imu(&mut self) {
        while self.imu.len() > 1 && self.imu[1].stamp <= self.state.stamp + STAMP_EPS {
            self.imu.pop_front();
        }
    }

    fn try_initialize(&mut self, until: f64) -> Result<bool> {
        let window: Vec<ImuSample> = self.imu.iter().filter(|s| s.stamp <= until + STAMP_EPS).copied().collect();
        if window.len() < self.cfg.init_samples {
            return Ok(false);
        }
        let init = static_init(&window)?;
        self.state = NavState {
            rotation: init.rotation,
            gyro_bias: init.gyro_bias,
            gravity: init.gravity,
            stamp: window[window.len() - 1].stamp,
            ..NavState::default()
        };
        self.cov = self.cfg.noise.initial_covariance();
        self.initialized = true;
        self.prune_imu();
        Ok(true)
    }

    /// Processes one scan. Returns `None` while the filter is still collecting
    /// its static initialization window.
    pub fn process_scan(&mut self, scan: &ScanFrame) -> Result<Option<FrameOutput>> {
        let frame_index = self.frames_seen;
        self.frames_seen += 1;
        if !self.initialized && !self.try_initialize(scan.base_stamp)? {
            return Ok(None);
        }
        let t_total = Instant::now();
        let samples: Vec<ImuSample> = self.imu.iter().copied().collect();
        let noise = self.cfg.noise;

        let t0 = Instant::now();
        if scan.base_stamp > self.state.stamp + STAMP_EPS {
            (self.state, self.cov, _) = integrate(&self.state, &self.cov, &samples, scan.base_stamp, &noise, None)?;
        }
        let end = scan.end_stamp().max(self.state.stamp);
        let mut knots = Vec::new();
        let (prior, prior_cov, gap) = integrate(&self.state, &self.cov, &samples, end, &noise, Some(&mut knots))?;
        let short = scan.max_offset() == 0.0 || knots.len() < 2;
        let undistort_skipped = !short && gap > self.cfg.max_imu_gap;
        let body_points: Vec<Vec3> = if undistort_skipped || short {
            scan.points.iter().map(|sp| self.extrinsic.transform_point(&sp.point)).collect()
        } else {
            deskew(scan, &knots, &self.extrinsic, self.exec)
        };
        let undistort_ms = ms(t0);

        let t1 = Instant::now();
        let down = downsample(&body_points, self.cfg.leaf);
        let downsample_ms = ms(t1);

        let t2 = Instant::now();
        let (state, cov, stats) = iekf_update_with(&prior, &prior_cov, &down, &self.map, &self.cfg.iekf, self.exec);
        self.state = state;
        self.cov = cov;
        let update_ms = ms(t2);

        let t3 = Instant::now();
        let pose = self.state.pose();
        self.map.insert_points(&body_points, &pose);
        self.map.recompute_dirty_with(self.exec);
        let mut trimmed = 0;
        let moved = self.last_trim.is_none_or(|c| (pose.translation - c).norm() > self.map.s1());
        if moved {
            trimmed = self.map.trim(&pose.translation, self.cfg.half_extent).total();
            self.last_trim = Some(pose.translation);
        }
        let map_update_ms = ms(t3);

        self.prune_imu();
        self.trajectory.push(self.state.stamp, pose)?;
        let per_query = |d: std::time::Duration| {
            if stats.queries == 0 { 0.0 } else { d.as_secs_f64() * 1e6 / stats.queries as f64 }
        };
        let timing = FrameTiming {
            frame_index,
            stamp: self.state.stamp,
            n_points: scan.points.len(),
            n_downsampled: down.len(),
            n_corr: stats.n_corr,
            iters: stats.iterations,
            query_us_per_pt: per_query(stats.query_time),
            plane_us_per_pt: per_query(stats.residual_time),
            map_update_ms,
            total_ms: 0.0,
            undistort_ms,
            downsample_ms,
            update_ms,
            update_skipped: stats.skipped,
            undistort_skipped,
            trimmed,
        };
        let timing = FrameTiming { total_ms: ms(t_total), ..timing };
        self.timings.frames.push(timing.clone());
        Ok(Some(FrameOutput { stamp: self.state.stamp, pose, timing, iekf: stats }))
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub timings: StageTimings,
    pub frames: usize,
}

/// Streams a dataset through a fresh pipeline, feeding IMU samples up to each
/// scan's end before processing it.
pub fn run_dataset(reader: DatasetReader, cfg: PipelineConfig, exec: Exec) -> Result<RunOutput> {
    let mut pipe = Pipeline::with_exec(cfg, exec)?;
    let imu = reader.imu;
    let mut next = 0;
    let mut frames = 0;
    for scan in reader.scans {
        let scan = scan?;
        let end = scan.end_stamp();
        while next < imu.len() && imu[next].stamp <= end + STAMP_EPS {
            pipe.push_imu(imu[next])?;
            next += 1;
        }
        pipe.process_scan(&scan)?;
        frames += 1;
    }
    Ok(RunOutput { trajectory: pipe.trajectory.clone(), timings: pipe.timings.clone(), frames })
}
