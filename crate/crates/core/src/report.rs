//! JSON documents written by the command-line tools.

use serde::{Deserialize, Serialize};

use crate::affordance::GraspHandle;
use crate::config::ConfigEcho;
use crate::pipeline::{Detection, PipelineConfig, StageTimings};
use crate::segmentation::Segmentation;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axes {
    pub f: [f64; 3],
    pub a: [f64; 3],
    pub n: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandleRecord {
    pub segment_id: u32,
    pub position: [f64; 3],
    pub axes: Axes,
    pub angles_xyz: [f64; 3],
    pub patch_extent_f: f64,
    pub depth_l: f64,
    pub n_points: usize,
    pub patch_indices: Vec<usize>,
}

impl From<&GraspHandle> for HandleRecord {
    fn from(h: &GraspHandle) -> Self {
        let v = |x: &nalgebra::Vector3<f64>| [x.x, x.y, x.z];
        Self {
            segment_id: h.segment,
            position: [h.position.x, h.position.y, h.position.z],
            axes: Axes {
                f: v(&h.f),
                a: v(&h.a),
                n: v(&h.n),
            },
            angles_xyz: h.angles,
            patch_extent_f: h.patch_extent,
            depth_l: h.depth,
            n_points: h.patch.len(),
            patch_indices: h.patch.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandleReport {
    pub config: ConfigEcho,
    pub n_points: usize,
    pub n_segments: usize,
    pub handles: Vec<HandleRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<StageTimings>,
}

impl HandleReport {
    pub fn new(detection: &Detection, cfg: &PipelineConfig, with_timings: bool) -> Self {
        Self {
            config: cfg.into(),
            n_points: detection.cloud.len(),
            n_segments: detection.segmentation.segments().len(),
            handles: detection.handles.iter().map(HandleRecord::from).collect(),
            timings: with_timings.then_some(detection.timings),
        }
    }

    /// Rebuilds handles for visualization. Search-internal fields (candidate
    /// center, step, f range) are not stored and come back zeroed.
    pub fn to_handles(&self) -> Vec<GraspHandle> {
        let v = |x: [f64; 3]| nalgebra::Vector3::new(x[0], x[1], x[2]);
        self.handles
            .iter()
            .map(|r| GraspHandle {
                segment: r.segment_id,
                position: v(r.position).into(),
                f: v(r.axes.f),
                a: v(r.axes.a),
                n: v(r.axes.n),
                angles: r.angles_xyz,
                patch_extent: r.patch_extent_f,
                depth: r.depth_l,
                patch: r.patch_indices.clone(),
                center: v(r.position).into(),
                step: 0,
                f_range: (0.0, 0.0),
                n_top: 0.0,
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub id: u32,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentationReport {
    pub config: ConfigEcho,
    pub n_points: usize,
    /// Per-point label, `null` when unlabeled.
    pub labels: Vec<Option<u32>>,
    pub edge_points: Vec<usize>,
    pub segments: Vec<SegmentSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<StageTimings>,
}

impl SegmentationReport {
    pub fn new(seg: &Segmentation, cfg: &PipelineConfig, timings: Option<StageTimings>) -> Self {
        Self {
            config: cfg.into(),
            n_points: seg.len(),
            labels: seg.labels().to_vec(),
            edge_points: seg.edge_points().to_vec(),
            segments: seg
                .segments()
                .iter()
                .map(|s| SegmentSummary {
                    id: s.label,
                    size: s.size(),
                })
                .collect(),
            timings,
        }
    }

    pub fn to_segmentation(&self) -> crate::error::Result<Segmentation> {
        Segmentation::from_labels(self.labels.clone(), self.edge_points.clone())
    }
}
