use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::pca::principal;
use crate::segmentation::Segmentation;

/// Principal frame of one segment. `{f, a, n}` is right-handed
/// (`f x a = n`) and `n` faces the sensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentFrame {
    pub label: u32,
    pub centroid: Point3<f64>,
    pub f: Vector3<f64>,
    pub a: Vector3<f64>,
    pub n: Vector3<f64>,
    /// Full width along `a` (twice the largest absolute deviation).
    pub extent_a: f64,
    /// Full width along `f`.
    pub extent_f: f64,
    /// Covariance eigenvalues, descending.
    pub eigenvalues: [f64; 3],
}

/// Coordinates of a point along `(f, a, n)` relative to some center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameCoords {
    pub f: f64,
    pub a: f64,
    pub n: f64,
}

impl SegmentFrame {
    /// Rotation whose columns are `f`, `a`, `n`.
    pub fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.f, self.a, self.n])
    }

    #[inline]
    pub fn project(&self, p: &Point3<f64>, center: &Point3<f64>) -> FrameCoords {
        let d = p - center;
        FrameCoords {
            f: d.dot(&self.f),
            a: d.dot(&self.a),
            n: d.dot(&self.n),
        }
    }

    pub fn unproject(&self, q: &FrameCoords, center: &Point3<f64>) -> Point3<f64> {
        center + self.f * q.f + self.a * q.a + self.n * q.n
    }

    /// Smallest eigenvalue over the eigenvalue sum; ~0 for flat patches.
    pub fn surface_variation(&self) -> f64 {
        let sum: f64 = self.eigenvalues.iter().sum();
        if sum > 0.0 {
            self.eigenvalues[2] / sum
        } else {
            0.0
        }
    }
}

/// PCA frame of a segment. The largest-variance axis becomes `a`, the second
/// `f`, the third `n` (flipped toward `viewpoint`); `a` is then rebuilt as
/// `n x f` so the frame is right-handed. Should the measured extents
/// disagree with the eigenvalue order, `f` and `a` swap roles so that
/// `extent_a >= extent_f` holds.
pub fn segment_frame(label: u32, members: &[usize], cloud: &PointCloud, viewpoint: &Point3<f64>) -> Result<SegmentFrame> {
    if members.len() < 3 {
        return Err(Error::DegenerateFrame(format!(
            "segment {label} has {} points",
            members.len()
        )));
    }
    let pts = cloud.points();
    let pc = principal(members.iter().map(|&i| &pts[i]))
        .ok_or_else(|| Error::DegenerateFrame(format!("segment {label} is empty")))?;
    if pc.is_degenerate() {
        return Err(Error::DegenerateFrame(format!(
            "segment {label} is collinear or coincident"
        )));
    }
    let mut n = pc.axes[2];
    if n.dot(&(viewpoint - pc.centroid)) < 0.0 {
        n = -n;
    }
    let mut f = (pc.axes[1] - n * pc.axes[1].dot(&n)).normalize();
    let mut a = n.cross(&f);
    let half_extent = |axis: &Vector3<f64>| {
        members
            .iter()
            .map(|&i| (pts[i] - pc.centroid).dot(axis).abs())
            .fold(0.0, f64::max)
    };
    let (mut extent_a, mut extent_f) = (2.0 * half_extent(&a), 2.0 * half_extent(&f));
    if extent_a < extent_f {
        f = a;
        a = n.cross(&f);
        std::mem::swap(&mut extent_a, &mut extent_f);
    }
    Ok(SegmentFrame {
        label,
        centroid: pc.centroid,
        f,
        a,
        n,
        extent_a,
        extent_f,
        eigenvalues: pc.eigenvalues,
    })
}

/// Frames for every segment whose geometry allows one, in label order.
pub fn segment_frames(segmentation: &Segmentation, cloud: &PointCloud) -> Vec<SegmentFrame> {
    segmentation
        .segments()
        .iter()
        .filter_map(|s| segment_frame(s.label, &s.members, cloud, cloud.viewpoint()).ok())
        .collect()
}

/// Coordinates of `points` along the frame axes, relative to `center`.
pub fn project_to_frame(points: &[usize], cloud: &PointCloud, frame: &SegmentFrame, center: &Point3<f64>) -> Vec<FrameCoords> {
    points.iter().map(|&i| frame.project(cloud.point(i), center)).collect()
}

/// Extrinsic X-Y-Z angles `(theta_x, theta_y, theta_z)` of a rotation, so
/// that `R = Rz(theta_z) * Ry(theta_y) * Rx(theta_x)`. At gimbal lock
/// (`|sin theta_y|` within 1e-8 of 1) `theta_x` is fixed to 0.
pub fn pose_angles(rotation: &Matrix3<f64>) -> [f64; 3] {
    let r = rotation;
    let sy = (-r[(2, 0)]).clamp(-1.0, 1.0);
    let theta_y = sy.asin();
    if (sy.abs() - 1.0).abs() <= 1e-8 {
        [0.0, theta_y, (-r[(0, 1)]).atan2(r[(1, 1)])]
    } else {
        [
            r[(2, 1)].atan2(r[(2, 2)]),
            theta_y,
            r[(1, 0)].atan2(r[(0, 0)]),
        ]
    }
}
