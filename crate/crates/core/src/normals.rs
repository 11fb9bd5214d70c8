//! Per-point surface normals from local PCA, oriented toward the sensor.

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::pca::principal;
use crate::spatial::NeighborIndex;

/// Which neighborhood feeds the covariance of each point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborhoodSpec {
    /// All points within this many meters.
    Radius(f64),
    /// The k nearest points, the query point included.
    Knn(usize),
}

impl NeighborhoodSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NeighborhoodSpec::Radius(r) if !(r > 0.0 && r.is_finite()) => Err(
                Error::InvalidArgument(format!("normal radius must be > 0, got {r}")),
            ),
            NeighborhoodSpec::Knn(k) if k < 3 => Err(Error::InvalidArgument(format!(
                "normal neighborhood needs k >= 3, got {k}"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalField {
    normals: Vec<Vector3<f64>>,
    valid: Vec<bool>,
    spec: NeighborhoodSpec,
}

impl NormalField {
    /// Assembles a field from precomputed normals. Invalid entries are
    /// stored as zero vectors.
    pub fn from_parts(normals: Vec<Vector3<f64>>, valid: Vec<bool>, spec: NeighborhoodSpec) -> Result<Self> {
        if normals.len() != valid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} normals but {} validity flags",
                normals.len(),
                valid.len()
            )));
        }
        let normals = normals
            .into_iter()
            .zip(&valid)
            .map(|(n, &ok)| if ok { n } else { Vector3::zeros() })
            .collect();
        Ok(Self { normals, valid, spec })
    }

    pub fn normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }

    pub fn normal(&self, i: usize) -> &Vector3<f64> {
        &self.normals[i]
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.valid[i]
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn spec(&self) -> NeighborhoodSpec {
        self.spec
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }
}

/// Angle in `[0, pi]` between two unit vectors.
pub fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos()
}

/// Smallest-eigenvalue eigenvector of the neighborhood covariance, flipped
/// so that `n . (viewpoint - p) >= 0`. Points whose neighborhood has fewer
/// than three points, or is collinear, are marked invalid.
pub fn estimate_normals(cloud: &PointCloud, index: &NeighborIndex, spec: NeighborhoodSpec) -> Result<NormalField> {
    spec.validate()?;
    if index.len() != cloud.len() {
        return Err(Error::InvalidArgument(format!(
            "index covers {} points, cloud has {}",
            index.len(),
            cloud.len()
        )));
    }
    let points = cloud.points();
    let viewpoint = *cloud.viewpoint();
    let (normals, valid): (Vec<_>, Vec<_>) = points
        .par_iter()
        .map_init(Vec::new, |buf, p| {
            match spec {
                NeighborhoodSpec::Radius(r) => index
                    .radius_neighbors_into(p, r, buf)
                    .expect("radius validated above"),
                NeighborhoodSpec::Knn(k) => *buf = index.k_nearest(p, k),
            }
            buf.sort_unstable();
            normal_from_neighborhood(points, buf, p, &viewpoint)
                .map_or((Vector3::zeros(), false), |n| (n, true))
        })
        .unzip();
    Ok(NormalField { normals, valid, spec })
}

fn normal_from_neighborhood(
    points: &[Point3<f64>],
    neighbors: &[usize],
    p: &Point3<f64>,
    viewpoint: &Point3<f64>,
) -> Option<Vector3<f64>> {
    if neighbors.len() < 3 {
        return None;
    }
    let pc = principal(neighbors.iter().map(|&j| &points[j]))?;
    if pc.is_degenerate() {
        return None;
    }
    let n = pc.axes[2];
    Some(if n.dot(&(viewpoint - p)) < 0.0 { -n } else { n })
}
