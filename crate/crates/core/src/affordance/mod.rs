//! Grasp handle search on segmented surfaces.
//!
//! Each segment gets a PCA frame `(f, a, n)`: minor axis, major axis, and
//! the sensor-facing normal. Points around a candidate center are expressed
//! in that frame, cut to a slab of thickness `e` across `a` and depth `l`
//! below the local top surface, and the closing axis `f` is scanned for
//! clearance gaps. That turns the 6-DOF pose search into a 1-D interval
//! search per candidate.

mod frame;
mod search;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use frame::{pose_angles, project_to_frame, segment_frame, segment_frames, FrameCoords, SegmentFrame};
pub use search::{find_handles, search_segment};

/// Two-finger parallel-jaw gripper geometry, all lengths in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GripperModel {
    /// Maximum hand aperture.
    pub d: f64,
    /// Finger width.
    pub w: f64,
    /// Finger thickness; also the slab width along the major axis.
    pub e: f64,
    /// Finger length.
    pub h: f64,
    /// Minimum grasp depth below the top surface.
    pub l: f64,
    /// Minimum free clearance on each side of the patch.
    pub g: f64,
}

impl Default for GripperModel {
    fn default() -> Self {
        Self {
            d: 0.08,
            w: 0.008,
            e: 0.01,
            h: 0.05,
            l: 0.015,
            g: 0.012,
        }
    }
}

impl GripperModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("d", self.d), ("w", self.w), ("e", self.e), ("h", self.h), ("l", self.l), ("g", self.g)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("gripper {name} must be > 0, got {v}")));
            }
        }
        if self.g <= self.w {
            return Err(Error::Config(format!(
                "clearance g ({}) must exceed finger width w ({})",
                self.g, self.w
            )));
        }
        if self.l > self.h {
            return Err(Error::Config(format!(
                "grasp depth l ({}) cannot exceed finger length h ({})",
                self.l, self.h
            )));
        }
        Ok(())
    }
}

/// A validated grasp: approach along `-n`, close along `f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspHandle {
    pub segment: u32,
    /// Centroid of the patch points.
    pub position: Point3<f64>,
    pub f: Vector3<f64>,
    pub a: Vector3<f64>,
    pub n: Vector3<f64>,
    /// Extrinsic X-Y-Z angles of the rotation with columns `[f a n]`.
    pub angles: [f64; 3],
    /// `f_hi - f_lo`.
    pub patch_extent: f64,
    /// Depth span of the patch below the top surface.
    pub depth: f64,
    pub patch: Vec<usize>,
    /// Candidate center the patch was searched from.
    pub center: Point3<f64>,
    /// Signed number of `e` strides from the segment centroid along `a`.
    pub step: i32,
    /// Patch bounds along `f`, relative to `center`.
    pub f_range: (f64, f64),
    /// Top surface height along `n`, relative to `center`.
    pub n_top: f64,
}

impl GraspHandle {
    pub fn axes(&self) -> [Vector3<f64>; 3] {
        [self.f, self.a, self.n]
    }

    /// `[x, y, z, theta_x, theta_y, theta_z]`.
    pub fn pose(&self) -> [f64; 6] {
        let p = self.position;
        [p.x, p.y, p.z, self.angles[0], self.angles[1], self.angles[2]]
    }

    pub fn approach(&self) -> Vector3<f64> {
        -self.n
    }
}
