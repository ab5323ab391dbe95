//! On-disk dataset layout.
//!
//! ```text
//! DIR/imu.csv             t,gx,gy,gz,ax,ay,az
//! DIR/scans/index.csv     frame,file,base_stamp
//! DIR/scans/NNNNNN.csv    offset,x,y,z
//! DIR/gt.tum              t x y z qx qy qz qw
//! DIR/config.toml         pipeline configuration
//! DIR/manifest.txt        file, record count and sha256 per file
//! ```
//!
//! Lines starting with `#` are comments. Scans are read lazily, one file per
//! iteration step.

use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimation::ImuSample;
use crate::eval::Trajectory;
use crate::geometry::{Pose, Rotation, Vec3};
use crate::pipeline::PipelineConfig;

pub const IMU_FILE: &str = "imu.csv";
pub const GT_FILE: &str = "gt.tum";
pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const SCAN_DIR: &str = "scans";
pub const SCAN_INDEX: &str = "index.csv";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    /// Seconds after the frame's base stamp.
    pub offset: f64,
    /// Point in the sensor frame at its own capture instant.
    pub point: Vec3,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScanFrame {
    pub base_stamp: f64,
    pub points: Vec<ScanPoint>,
}

impl ScanFrame {
    pub fn max_offset(&self) -> f64 {
        self.points.iter().map(|p| p.offset).fold(0.0, f64::max)
    }

    pub fn end_stamp(&self) -> f64 {
        self.base_stamp + self.max_offset()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub imu: Vec<ImuSample>,
    pub scans: Vec<ScanFrame>,
    pub ground_truth: Trajectory,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub file: String,
    pub records: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn get(&self, file: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.file == file)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# file records sha256\n");
        for e in &self.entries {
            s.push_str(&format!("{} {} {}\n", e.file, e.records, e.sha256));
        }
        s
    }
}

fn put(dir: &Path, rel: &str, bytes: &[u8], records: usize, manifest: &mut Manifest) -> Result<()> {
    let path = dir.join(rel);
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    manifest.entries.push(ManifestEntry {
        file: rel.to_string(),
        records,
        sha256: hex::encode(Sha256::digest(bytes)),
    });
    Ok(())
}

pub fn scan_file_name(frame: usize) -> String {
    format!("{frame:06}.csv")
}

pub fn imu_to_csv(imu: &[ImuSample]) -> String {
    let mut s = String::from("t,gx,gy,gz,ax,ay,az\n");
    for m in imu {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            m.stamp, m.gyro.x, m.gyro.y, m.gyro.z, m.accel.x, m.accel.y, m.accel.z
        ));
    }
    s
}

pub fn scan_to_csv(frame: &ScanFrame) -> String {
    let mut s = String::with_capacity(frame.points.len() * 64);
    s.push_str("offset,x,y,z\n");
    for p in &frame.points {
        s.push_str(&format!("{},{},{},{}\n", p.offset, p.point.x, p.point.y, p.point.z));
    }
    s
}

/// One TUM line per pose, fixed nine-decimal precision.
pub fn trajectory_to_tum(traj: &Trajectory) -> String {
    let mut s = String::new();
    for (t, pose) in traj.iter() {
        let p = pose.translation;
        let q = pose.rotation.to_quaternion();
        s.push_str(&format!(
            "{t:.9} {:.9} {:.9} {:.9} {:.9} {:.9} {:.9} {:.9}\n",
            p.x, p.y, p.z, q[0], q[1], q[2], q[3]
        ));
    }
    s
}

/// Shortest round-trip formatting, so stored ground truth reads back to the
/// same numbers.
fn trajectory_to_tum_exact(traj: &Trajectory) -> String {
    let mut s = String::new();
    for (t, pose) in traj.iter() {
        let p = pose.translation;
        let q = pose.rotation.to_quaternion();
        s.push_str(&format!("{t} {} {} {} {} {} {} {}\n", p.x, p.y, p.z, q[0], q[1], q[2], q[3]));
    }
    s
}

pub fn write_tum(path: &Path, traj: &Trajectory) -> Result<()> {
    fs::write(path, trajectory_to_tum(traj)).map_err(|e| Error::io(path, e))
}

/// Writes every file of the layout and returns the manifest that was also
/// stored alongside.
pub fn write_dataset(dir: &Path, data: &Dataset, config: &PipelineConfig) -> Result<Manifest> {
    let scan_dir = dir.join(SCAN_DIR);
    fs::create_dir_all(&scan_dir).map_err(|e| Error::io(&scan_dir, e))?;
    let mut manifest = Manifest::default();

    put(dir, IMU_FILE, imu_to_csv(&data.imu).as_bytes(), data.imu.len(), &mut manifest)?;

    let mut index = String::from("frame,file,base_stamp\n");
    for (i, frame) in data.scans.iter().enumerate() {
        let name = scan_file_name(i);
        index.push_str(&format!("{i},{name},{}\n", frame.base_stamp));
        let rel = format!("{SCAN_DIR}/{name}");
        put(dir, &rel, scan_to_csv(frame).as_bytes(), frame.points.len(), &mut manifest)?;
    }
    let rel = format!("{SCAN_DIR}/{SCAN_INDEX}");
    put(dir, &rel, index.as_bytes(), data.scans.len(), &mut manifest)?;

    let gt = trajectory_to_tum_exact(&data.ground_truth);
    put(dir, GT_FILE, gt.as_bytes(), data.ground_truth.len(), &mut manifest)?;
    put(dir, CONFIG_FILE, config.to_toml().as_bytes(), 1, &mut manifest)?;

    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, manifest.to_text()).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Data lines of a text file with their 1-based line numbers; skips blanks,
/// comments and the first non-comment line when `header` is set.
fn data_lines(path: &Path, header: bool) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut skip_header = header;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if skip_header {
            skip_header = false;
            continue;
        }
        out.push((i + 1, trimmed.to_string()));
    }
    Ok(out)
}

fn parse_fields(path: &Path, line: usize, text: &str, sep: char, n: usize) -> Result<Vec<f64>> {
    let fields: Vec<&str> = if sep == ' ' {
        text.split_whitespace().collect()
    } else {
        text.split(sep).map(str::trim).collect()
    };
    if fields.len() != n {
        return Err(Error::parse(path, line, format!("expected {n} fields, found {}", fields.len())));
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(path, line, format!("not a finite number: '{f}'")))
        })
        .collect()
}

pub fn read_imu(path: &Path) -> Result<Vec<ImuSample>> {
    let mut out: Vec<ImuSample> = Vec::new();
    for (line, text) in data_lines(path, true)? {
        let v = parse_fields(path, line, &text, ',', 7)?;
        let s = ImuSample::new(v[0], Vec3::new(v[1], v[2], v[3]), Vec3::new(v[4], v[5], v[6]));
        if out.last().is_some_and(|p| p.stamp >= s.stamp) {
            return Err(Error::parse(path, line, "IMU stamps must be strictly increasing"));
        }
        out.push(s);
    }
    Ok(out)
}

pub fn read_tum(path: &Path) -> Result<Trajectory> {
    let mut poses = Vec::new();
    for (line, text) in data_lines(path, false)? {
        let v = parse_fields(path, line, &text, ' ', 8)?;
        let qn = (v[4] * v[4] + v[5] * v[5] + v[6] * v[6] + v[7] * v[7]).sqrt();
        if !(qn > 1e-9) {
            return Err(Error::parse(path, line, "zero quaternion"));
        }
        let r = Rotation::from_quaternion(v[4] / qn, v[5] / qn, v[6] / qn, v[7] / qn);
        poses.push((v[0], Pose::new(r, Vec3::new(v[1], v[2], v[3]))));
    }
    Trajectory::new(poses).map_err(|e| Error::parse(path, 0, e.to_string()))
}

pub fn read_scan(path: &Path, base_stamp: f64) -> Result<ScanFrame> {
    let mut points = Vec::new();
    for (line, text) in data_lines(path, true)? {
        let v = parse_fields(path, line, &text, ',', 4)?;
        let offset = v[0];
        if offset < 0.0 || points.last().is_some_and(|p: &ScanPoint| p.offset > offset) {
            return Err(Error::parse(path, line, "offsets must be non-negative and non-decreasing"));
        }
        points.push(ScanPoint { offset, point: Vec3::new(v[1], v[2], v[3]) });
    }
    Ok(ScanFrame { base_stamp, points })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanIndexEntry {
    pub frame: usize,
    pub file: PathBuf,
    pub base_stamp: f64,
}

/// Lazy scan stream: the index is read up front, each frame file only when
/// the iterator reaches it.
#[derive(Debug)]
pub struct ScanReader {
    entries: Vec<ScanIndexEntry>,
    next: usize,
}

impl ScanReader {
    pub fn open(dir: &Path) -> Result<Self> {
        let scan_dir = dir.join(SCAN_DIR);
        let path = scan_dir.join(SCAN_INDEX);
        let mut entries = Vec::new();
        for (line, text) in data_lines(&path, true)? {
            let f: Vec<&str> = text.split(',').map(str::trim).collect();
            if f.len() != 3 {
                return Err(Error::parse(&path, line, "expected frame,file,base_stamp"));
            }
            let frame = f[0]
                .parse::<usize>()
                .map_err(|_| Error::parse(&path, line, format!("bad frame index '{}'", f[0])))?;
            let base_stamp = f[2]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(&path, line, format!("bad stamp '{}'", f[2])))?;
            entries.push(ScanIndexEntry { frame, file: scan_dir.join(f[1]), base_stamp });
        }
        Ok(ScanReader { entries, next: 0 })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ScanIndexEntry] {
        &self.entries
    }
}

impl Iterator for ScanReader {
    type Item = Result<ScanFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        let e = self.entries.get(self.next)?;
        self.next += 1;
        Some(read_scan(&e.file, e.base_stamp))
    }
}

/// Opened dataset directory with IMU and ground truth in memory and scans
/// streamed.
#[derive(Debug)]
pub struct DatasetReader {
    pub dir: PathBuf,
    pub imu: Vec<ImuSample>,
    pub ground_truth: Option<Trajectory>,
    pub scans: ScanReader,
}

impl DatasetReader {
    pub fn open(dir: &Path) -> Result<Self> {
        let gt_path = dir.join(GT_FILE);
        let ground_truth = if gt_path.exists() { Some(read_tum(&gt_path)?) } else { None };
        Ok(DatasetReader {
            dir: dir.to_path_buf(),
            imu: read_imu(&dir.join(IMU_FILE))?,
            ground_truth,
            scans: ScanReader::open(dir)?,
        })
    }

    /// Loads every scan; for tests and small sequences.
    pub fn into_dataset(self) -> Result<Dataset> {
        let scans = self.scans.collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            imu: self.imu,
            scans,
            ground_truth: self.ground_truth.unwrap_or_default(),
        })
    }
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let mut entries = Vec::new();
    for (line, text) in data_lines(&path, false)? {
        let f: Vec<&str> = text.split_whitespace().collect();
        let records = f.get(1).and_then(|r| r.parse().ok());
        match (f.len(), records) {
            (3, Some(records)) => entries.push(ManifestEntry {
                file: f[0].to_string(),
                records,
                sha256: f[2].to_string(),
            }),
            _ => return Err(Error::parse(&path, line, "expected 'file records sha256'")),
        }
    }
    Ok(Manifest { entries })
}
