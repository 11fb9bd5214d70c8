//! End-to-end detection: filter, index, normals, segmentation, handles.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::affordance::{find_handles, segment_frames, GraspHandle, GripperModel, SegmentFrame};
use crate::cloud::{apply_filters, CloudFilterConfig, PointCloud};
use crate::error::{Error, Result};
use crate::normals::{estimate_normals, NeighborhoodSpec, NormalField};
use crate::segmentation::{grow_regions, Segmentation, SegmentationConfig};
use crate::spatial::NeighborIndex;

/// Normals come from a small nearest-neighbor patch. Fitting over the full
/// growing radius smears every crease into a gradual turn that the grower
/// walks straight across in small steps.
pub const DEFAULT_NORMAL_NEIGHBORS: usize = 8;

/// Surface variation above which a segment counts as curved. Flat faces
/// with millimeter noise sit near 0.005, a half cylinder near 0.05.
pub const CURVED_SURFACE_VARIATION: f64 = 0.01;

/// Which segments the handle search visits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentSelection {
    #[default]
    All,
    /// Only segments whose surface variation exceeds the threshold, i.e. a
    /// detector restricted to curved surfaces.
    CurvedOnly { min_surface_variation: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub filter: CloudFilterConfig,
    /// `None` uses [`DEFAULT_NORMAL_NEIGHBORS`] nearest neighbors.
    pub normals: Option<NeighborhoodSpec>,
    pub segmentation: SegmentationConfig,
    pub gripper: GripperModel,
    pub selection: SegmentSelection,
}

impl SegmentSelection {
    pub fn curved_only() -> Self {
        Self::CurvedOnly {
            min_surface_variation: CURVED_SURFACE_VARIATION,
        }
    }
}

impl PipelineConfig {
    pub fn normal_spec(&self) -> NeighborhoodSpec {
        self.normals
            .unwrap_or(NeighborhoodSpec::Knn(DEFAULT_NORMAL_NEIGHBORS))
    }

    pub fn validate(&self) -> Result<()> {
        self.filter.validate()?;
        self.normal_spec().validate()?;
        self.segmentation.validate()?;
        self.gripper.validate()?;
        if let SegmentSelection::CurvedOnly { min_surface_variation } = self.selection {
            if !(min_surface_variation >= 0.0) {
                return Err(Error::Config("min_surface_variation must be >= 0".into()));
            }
        }
        Ok(())
    }
}

/// Wall-clock seconds per stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub load: f64,
    pub filter: f64,
    pub normals: f64,
    pub segmentation: f64,
    pub handle_search: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.load + self.filter + self.normals + self.segmentation + self.handle_search
    }

    pub fn add(&mut self, other: &StageTimings) {
        self.load += other.load;
        self.filter += other.filter;
        self.normals += other.normals;
        self.segmentation += other.segmentation;
        self.handle_search += other.handle_search;
    }
}

#[derive(Clone, Debug)]
pub struct Detection {
    /// The cloud after filtering; every index below refers to it.
    pub cloud: PointCloud,
    pub normals: NormalField,
    pub segmentation: Segmentation,
    pub frames: Vec<SegmentFrame>,
    pub handles: Vec<GraspHandle>,
    pub timings: StageTimings,
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Normals and segmentation only.
pub fn segment(cloud: &PointCloud, cfg: &PipelineConfig) -> Result<(PointCloud, NeighborIndex, NormalField, Segmentation, StageTimings)> {
    cfg.validate()?;
    let mut timings = StageTimings::default();
    let t = Instant::now();
    let cloud = if cfg.filter.is_identity() {
        cloud.clone()
    } else {
        apply_filters(cloud, &cfg.filter)?
    };
    timings.filter = secs(t);
    if cloud.is_empty() {
        return Err(Error::InvalidArgument("cloud is empty".into()));
    }

    let t = Instant::now();
    let index = NeighborIndex::build(&cloud)?;
    let normals = estimate_normals(&cloud, &index, cfg.normal_spec())?;
    timings.normals = secs(t);

    let t = Instant::now();
    let segmentation = grow_regions(&cloud, &normals, &index, &cfg.segmentation)?;
    timings.segmentation = secs(t);
    Ok((cloud, index, normals, segmentation, timings))
}

pub fn detect(cloud: &PointCloud, cfg: &PipelineConfig) -> Result<Detection> {
    let (cloud, index, normals, segmentation, mut timings) = segment(cloud, cfg)?;
    let t = Instant::now();
    let mut frames = segment_frames(&segmentation, &cloud);
    if let SegmentSelection::CurvedOnly { min_surface_variation } = cfg.selection {
        frames.retain(|f| f.surface_variation() > min_surface_variation);
    }
    let handles = find_handles(&segmentation, &cloud, &index, &frames, &cfg.gripper)?;
    timings.handle_search = secs(t);
    Ok(Detection {
        cloud,
        normals,
        segmentation,
        frames,
        handles,
        timings,
    })
}
