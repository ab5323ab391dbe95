//! Voxel quantization and 63-bit Morton (Z-order) keys.
//!
//! Signed voxel coordinates are shifted by `2^20` so each axis fills exactly
//! 21 unsigned bits, then interleaved with x in bit 0, y in bit 1 and z in
//! bit 2 of every triad.

use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub const AXIS_BITS: u32 = 21;
pub const KEY_OFFSET: i32 = 1 << 20;
pub const KEY_MIN: i32 = -KEY_OFFSET;
pub const KEY_MAX: i32 = KEY_OFFSET - 1;
const AXIS_MASK: u64 = (1 << AXIS_BITS) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

/// Integer cell coordinates, each within `[KEY_MIN, KEY_MAX]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct VoxelKey {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl VoxelKey {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        VoxelKey { x, y, z }
    }

    pub fn try_new(x: i64, y: i64, z: i64) -> Result<Self> {
        let check = |axis, v: i64| {
            if v < KEY_MIN as i64 || v > KEY_MAX as i64 {
                Err(Error::KeyOutOfRange { axis, value: v })
            } else {
                Ok(v as i32)
            }
        };
        Ok(VoxelKey {
            x: check(Axis::X, x)?,
            y: check(Axis::Y, y)?,
            z: check(Axis::Z, z)?,
        })
    }

    /// Coarse cell owning this one under 3x edge-length grouping.
    pub fn parent(self) -> VoxelKey {
        VoxelKey {
            x: self.x.div_euclid(3),
            y: self.y.div_euclid(3),
            z: self.z.div_euclid(3),
        }
    }

    /// Position of this cell inside its parent's 3x3x3 block, `0..27`.
    pub fn child_index(self) -> usize {
        let rx = self.x.rem_euclid(3) as usize;
        let ry = self.y.rem_euclid(3) as usize;
        let rz = self.z.rem_euclid(3) as usize;
        rx + 3 * ry + 9 * rz
    }

    /// Inverse of [`child_index`](Self::child_index) for a given parent.
    pub fn child(self, index: usize) -> VoxelKey {
        debug_assert!(index < 27);
        let i = index as i32;
        VoxelKey {
            x: 3 * self.x + i % 3,
            y: 3 * self.y + (i / 3) % 3,
            z: 3 * self.z + i / 9,
        }
    }

    pub fn offset(self, dx: i32, dy: i32, dz: i32) -> VoxelKey {
        VoxelKey::new(self.x + dx, self.y + dy, self.z + dz)
    }

    /// Cell center in world units for edge length `s`.
    pub fn center(self, s: f64) -> Vec3 {
        Vec3::new(
            (self.x as f64 + 0.5) * s,
            (self.y as f64 + 0.5) * s,
            (self.z as f64 + 0.5) * s,
        )
    }

    pub fn encode(self) -> MortonCode {
        MortonCode::encode(self)
    }
}

/// Componentwise `floor(p / s)`.
pub fn quantize(p: &Vec3, s: f64) -> Result<VoxelKey> {
    debug_assert!(s > 0.0);
    let f = |v: f64| {
        let q = (v / s).floor();
        // keep non-finite and huge values out of the integer cast
        if q.is_finite() && q.abs() < 1e15 {
            q as i64
        } else if q.is_nan() {
            i64::MAX
        } else {
            q.signum() as i64 * i64::MAX
        }
    };
    VoxelKey::try_new(f(p.x), f(p.y), f(p.z))
}

/// `(quantize(p, s), encode)` without the intermediate `Result` allocation
/// path on the hot loop; `None` when out of range.
#[inline]
pub fn morton_of(p: &Vec3, s: f64) -> Option<(VoxelKey, MortonCode)> {
    quantize(p, s).ok().map(|k| (k, k.encode()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MortonCode(pub u64);

impl MortonCode {
    pub fn encode(k: VoxelKey) -> Self {
        MortonCode(Self::interleave(
            (k.x + KEY_OFFSET) as u32,
            (k.y + KEY_OFFSET) as u32,
            (k.z + KEY_OFFSET) as u32,
        ))
    }

    pub fn decode(self) -> VoxelKey {
        let (x, y, z) = Self::deinterleave(self.0);
        VoxelKey {
            x: x as i32 - KEY_OFFSET,
            y: y as i32 - KEY_OFFSET,
            z: z as i32 - KEY_OFFSET,
        }
    }

    /// Raw bit interleave of three unsigned 21-bit coordinates, no offset.
    #[inline]
    pub fn interleave(x: u32, y: u32, z: u32) -> u64 {
        spread(x) | (spread(y) << 1) | (spread(z) << 2)
    }

    #[inline]
    pub fn deinterleave(code: u64) -> (u32, u32, u32) {
        (compact(code), compact(code >> 1), compact(code >> 2))
    }
}

#[inline]
fn spread(v: u32) -> u64 {
    let mut x = v as u64 & AXIS_MASK;
    x = (x | (x << 32)) & 0x001f_0000_0000_ffff;
    x = (x | (x << 16)) & 0x001f_0000_ff00_00ff;
    x = (x | (x << 8)) & 0x100f_00f0_0f00_f00f;
    x = (x | (x << 4)) & 0x10c3_0c30_c30c_30c3;
    x = (x | (x << 2)) & 0x1249_2492_4924_9249;
    x
}

#[inline]
fn compact(v: u64) -> u32 {
    let mut x = v & 0x1249_2492_4924_9249;
    x = (x | (x >> 2)) & 0x10c3_0c30_c30c_30c3;
    x = (x | (x >> 4)) & 0x100f_00f0_0f00_f00f;
    x = (x | (x >> 8)) & 0x001f_0000_ff00_00ff;
    x = (x | (x >> 16)) & 0x001f_0000_0000_ffff;
    x = (x | (x >> 32)) & AXIS_MASK;
    x as u32
}
