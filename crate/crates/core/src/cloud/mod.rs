//! Point cloud container, sanitization at ingest, and the two pre-processing
//! filters (voxel centroid downsampling and neighborhood-mean smoothing).
//!
//! A [`PointCloud`] never holds a non-finite coordinate. Indices into
//! [`PointCloud::points`] are what every downstream stage (normals, labels,
//! handle patches, annotations) refers to, so the filters here are the only
//! places where a new index space is created.

mod pcd;
mod ply;

use std::collections::HashMap;

use nalgebra::{Isometry3, Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::NeighborIndex;

pub use pcd::{load_pcd, read_pcd, write_pcd, write_pcd_file, PcdEncoding};
pub use ply::{export_ply, write_ply, EDGE_COLOR, HANDLE_COLOR, UNLABELED_COLOR};

/// Declared row/column layout of an organized (image-like) cloud.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Organization {
    pub width: usize,
    pub height: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
    colors: Option<Vec<[u8; 3]>>,
    organization: Option<Organization>,
    viewpoint: Point3<f64>,
    dropped: usize,
}

impl PointCloud {
    /// Builds a cloud, dropping every point with a non-finite coordinate.
    pub fn from_points(points: Vec<Point3<f64>>) -> Self {
        Self::build(points, None)
    }

    /// Same as [`from_points`](Self::from_points) with one RGB triple per
    /// point. Colors of dropped points are dropped with them.
    pub fn from_points_and_colors(points: Vec<Point3<f64>>, colors: Vec<[u8; 3]>) -> Result<Self> {
        if colors.len() != points.len() {
            return Err(Error::InvalidArgument(format!(
                "{} colors for {} points",
                colors.len(),
                points.len()
            )));
        }
        Ok(Self::build(points, Some(colors)))
    }

    fn build(points: Vec<Point3<f64>>, colors: Option<Vec<[u8; 3]>>) -> Self {
        let finite = |p: &Point3<f64>| p.iter().all(|c| c.is_finite());
        let total = points.len();
        let (points, colors) = match colors {
            Some(colors) => {
                let (p, c): (Vec<_>, Vec<_>) = points
                    .into_iter()
                    .zip(colors)
                    .filter(|(p, _)| finite(p))
                    .unzip();
                (p, Some(c))
            }
            None => (points.into_iter().filter(finite).collect::<Vec<_>>(), None),
        };
        let dropped = total - points.len();
        Self {
            points,
            colors,
            organization: None,
            viewpoint: Point3::origin(),
            dropped,
        }
    }

    pub fn with_viewpoint(mut self, viewpoint: Point3<f64>) -> Self {
        self.viewpoint = viewpoint;
        self
    }

    pub fn with_organization(mut self, organization: Option<Organization>) -> Self {
        self.organization = organization;
        self
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &Point3<f64> {
        &self.points[i]
    }

    pub fn colors(&self) -> Option<&[[u8; 3]]> {
        self.colors.as_deref()
    }

    pub fn organization(&self) -> Option<Organization> {
        self.organization
    }

    /// Sensor origin in the cloud frame; normals are oriented toward it.
    pub fn viewpoint(&self) -> &Point3<f64> {
        &self.viewpoint
    }

    /// Number of non-finite rows removed when the cloud was built.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Applies a rigid motion to every point and to the viewpoint.
    pub fn transformed(&self, motion: &Isometry3<f64>) -> Self {
        Self {
            points: self.points.iter().map(|p| motion * p).collect(),
            colors: self.colors.clone(),
            organization: self.organization,
            viewpoint: motion * self.viewpoint,
            dropped: self.dropped,
        }
    }

    /// Axis-aligned bounds, `None` for an empty cloud.
    pub fn bounds(&self) -> Option<(Point3<f64>, Point3<f64>)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| {
            (lo.inf(p), hi.sup(p))
        }))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CloudFilterConfig {
    /// Voxel edge length in meters; 0 disables downsampling.
    pub voxel_leaf: f64,
    /// Smoothing neighborhood radius in meters; 0 disables smoothing.
    pub smoothing_radius: f64,
    /// Upper bound on how far smoothing may move a point, in meters.
    pub max_displacement: Option<f64>,
}

impl Default for CloudFilterConfig {
    fn default() -> Self {
        Self {
            voxel_leaf: 0.0,
            smoothing_radius: 0.0,
            max_displacement: None,
        }
    }
}

impl CloudFilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.voxel_leaf >= 0.0 && self.voxel_leaf.is_finite()) {
            return Err(Error::Config(format!(
                "voxel_leaf must be >= 0, got {}",
                self.voxel_leaf
            )));
        }
        if !(self.smoothing_radius >= 0.0 && self.smoothing_radius.is_finite()) {
            return Err(Error::Config(format!(
                "smoothing_radius must be >= 0, got {}",
                self.smoothing_radius
            )));
        }
        if let Some(clamp) = self.max_displacement {
            if !(clamp > 0.0) {
                return Err(Error::Config(format!(
                    "max_displacement must be > 0, got {clamp}"
                )));
            }
        }
        Ok(())
    }

    /// True when neither filter would change the cloud.
    pub fn is_identity(&self) -> bool {
        self.voxel_leaf == 0.0 && self.smoothing_radius == 0.0
    }
}

/// Runs the enabled filters: voxel downsampling first, then smoothing.
pub fn apply_filters(cloud: &PointCloud, cfg: &CloudFilterConfig) -> Result<PointCloud> {
    cfg.validate()?;
    let mut out = if cfg.voxel_leaf > 0.0 {
        voxel_downsample(cloud, cfg.voxel_leaf)?
    } else {
        cloud.clone()
    };
    if cfg.smoothing_radius > 0.0 && !out.is_empty() {
        out = smooth(&out, cfg)?;
    }
    Ok(out)
}

/// Replaces the points of each occupied voxel by their centroid.
///
/// Voxels are keyed by `floor(p / leaf)`; output order follows the first
/// input point that falls into each voxel.
pub fn voxel_downsample(cloud: &PointCloud, leaf: f64) -> Result<PointCloud> {
    if !(leaf > 0.0 && leaf.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "voxel leaf must be > 0, got {leaf}"
        )));
    }
    struct Acc {
        sum: Vector3<f64>,
        rgb: [u64; 3],
        count: usize,
    }
    let mut slot_of: HashMap<[i64; 3], usize> = HashMap::new();
    let mut accs: Vec<Acc> = Vec::new();
    for (i, p) in cloud.points.iter().enumerate() {
        let key = voxel_key(p, leaf);
        let slot = *slot_of.entry(key).or_insert_with(|| {
            accs.push(Acc {
                sum: Vector3::zeros(),
                rgb: [0; 3],
                count: 0,
            });
            accs.len() - 1
        });
        let acc = &mut accs[slot];
        acc.sum += p.coords;
        acc.count += 1;
        if let Some(colors) = &cloud.colors {
            for (c, v) in acc.rgb.iter_mut().zip(colors[i]) {
                *c += u64::from(v);
            }
        }
    }
    let points = accs
        .iter()
        .map(|a| Point3::from(a.sum / a.count as f64))
        .collect();
    let colors = cloud.colors.as_ref().map(|_| {
        accs.iter()
            .map(|a| {
                let n = a.count as u64;
                [
                    ((a.rgb[0] + n / 2) / n) as u8,
                    ((a.rgb[1] + n / 2) / n) as u8,
                    ((a.rgb[2] + n / 2) / n) as u8,
                ]
            })
            .collect()
    });
    Ok(PointCloud {
        points,
        colors,
        organization: None,
        viewpoint: cloud.viewpoint,
        dropped: cloud.dropped,
    })
}

pub(crate) fn voxel_key(p: &Point3<f64>, leaf: f64) -> [i64; 3] {
    [
        (p.x / leaf).floor() as i64,
        (p.y / leaf).floor() as i64,
        (p.z / leaf).floor() as i64,
    ]
}

/// Moves every point to the mean of its `smoothing_radius` neighborhood
/// (the point itself included), optionally clamping the displacement.
pub fn smooth(cloud: &PointCloud, cfg: &CloudFilterConfig) -> Result<PointCloud> {
    cfg.validate()?;
    let radius = cfg.smoothing_radius;
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "smoothing radius must be > 0, got {radius}"
        )));
    }
    if cloud.is_empty() {
        return Ok(cloud.clone());
    }
    let index = NeighborIndex::build(cloud)?;
    let points = cloud
        .points
        .par_iter()
        .map(|p| {
            let nbrs = index.radius_neighbors(p, radius)?;
            let mean = nbrs
                .iter()
                .fold(Vector3::zeros(), |acc, &j| acc + cloud.points[j].coords)
                / nbrs.len() as f64;
            let mut shift = mean - p.coords;
            if let Some(clamp) = cfg.max_displacement {
                let len = shift.norm();
                if len > clamp {
                    shift *= clamp / len;
                }
            }
            Ok(p + shift)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PointCloud {
        points,
        ..cloud.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_rows_are_dropped_and_counted() {
        let cloud = PointCloud::from_points(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(f64::NAN, 0.0, 0.0),
            Point3::new(1.0, f64::INFINITY, 0.0),
            Point3::new(1.0, 2.0, 3.0),
        ]);
        assert_eq!(cloud.len(), 2);
        assert_eq!(cloud.dropped(), 2);
        assert_eq!(cloud.point(1), &Point3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn colors_follow_their_points_through_sanitization() {
        let cloud = PointCloud::from_points_and_colors(
            vec![Point3::new(f64::NAN, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)],
            vec![[1, 2, 3], [4, 5, 6]],
        )
        .unwrap();
        assert_eq!(cloud.colors().unwrap(), &[[4, 5, 6]]);
    }

    #[test]
    fn cube_corners_collapse_to_one_centroid() {
        let mut pts = Vec::new();
        for &x in &[0.01, 0.02] {
            for &y in &[0.01, 0.02] {
                for &z in &[0.01, 0.02] {
                    pts.push(Point3::new(x, y, z));
                }
            }
        }
        let out = voxel_downsample(&PointCloud::from_points(pts), 0.1).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out.point(0) - Point3::new(0.015, 0.015, 0.015)).norm() < 1e-15);
    }

    #[test]
    fn distant_points_stay_separate() {
        let pts = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)];
        let out = voxel_downsample(&PointCloud::from_points(pts.clone()), 0.01).unwrap();
        assert_eq!(out.points(), &pts[..]);
    }

    #[test]
    fn non_positive_leaf_is_rejected() {
        let cloud = PointCloud::from_points(vec![Point3::origin()]);
        assert!(matches!(
            voxel_downsample(&cloud, 0.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(voxel_downsample(&cloud, -1.0).is_err());
    }

    #[test]
    fn isolated_point_is_unchanged_by_smoothing() {
        let pts = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)];
        let cfg = CloudFilterConfig {
            smoothing_radius: 0.02,
            ..Default::default()
        };
        let out = smooth(&PointCloud::from_points(pts.clone()), &cfg).unwrap();
        assert_eq!(out.points(), &pts[..]);
    }

    #[test]
    fn zero_smoothing_radius_is_rejected() {
        let cloud = PointCloud::from_points(vec![Point3::origin()]);
        assert!(smooth(&cloud, &CloudFilterConfig::default()).is_err());
    }

    #[test]
    fn displacement_clamp_limits_motion() {
        let pts = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(0.01, 0.0, 0.0)];
        let cfg = CloudFilterConfig {
            smoothing_radius: 0.02,
            max_displacement: Some(0.001),
            ..Default::default()
        };
        let out = smooth(&PointCloud::from_points(pts), &cfg).unwrap();
        assert!((out.point(0).x - 0.001).abs() < 1e-15);
        assert!((out.point(1).x - 0.009).abs() < 1e-15);
    }

    #[test]
    fn transform_moves_viewpoint_too() {
        let cloud = PointCloud::from_points(vec![Point3::new(1.0, 0.0, 0.0)])
            .with_viewpoint(Point3::new(0.0, 0.0, 1.0));
        let motion = Isometry3::translation(0.0, 2.0, 0.0);
        let moved = cloud.transformed(&motion);
        assert_eq!(moved.viewpoint(), &Point3::new(0.0, 2.0, 1.0));
        assert_eq!(moved.point(0), &Point3::new(1.0, 2.0, 0.0));
    }
}
