//! LiDAR-inertial odometry built around a two-level voxel map whose coarse
//! cells carry pre-computed surfels.
//!
//! Correspondence lookup is a single Morton-keyed hash probe: a world point is
//! quantized to its coarse cell and the stored plane is returned directly, with
//! no neighbour gathering and no per-query plane fit. The crate also ships the
//! pieces needed to exercise that claim end to end: an iterated error-state
//! Kalman filter, a synthetic planar-world simulator, a dataset reader/writer,
//! trajectory evaluation and a benchmark harness against a query-time kNN
//! baseline.
//!
//! Data-parallel stages go through [`exec::Exec`]; building without the
//! default `parallel` feature gives a purely sequential crate with identical
//! results.

// `!(x > 0.0)` is used on purpose so NaN inputs fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod bench;
pub mod dataset;
pub mod error;
pub mod estimation;
pub mod eval;
pub mod exec;
pub mod geometry;
pub mod hvox;
pub mod morton;
pub mod pipeline;
pub mod sim;
pub mod table;

pub use error::{Error, Result};
pub use geometry::{Pose, Rotation, Vec3};
