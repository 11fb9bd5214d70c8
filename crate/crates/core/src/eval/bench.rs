//! Repeated timing of the pipeline stages on one cloud.

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::pipeline::{detect, PipelineConfig, StageTimings};
use crate::report::HandleRecord;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub median: f64,
    pub p90: f64,
}

impl StageStats {
    /// Nearest-rank statistics; the median of an even count is the mean of
    /// the two middle samples.
    pub fn from_samples(samples: &[f64]) -> Self {
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        if n == 0 {
            return Self { median: 0.0, p90: 0.0 };
        }
        let median = if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) };
        let rank = ((0.9 * n as f64).ceil() as usize).clamp(1, n);
        Self { median, p90: s[rank - 1] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub n_points: usize,
    pub repeats: usize,
    /// File reading, measured once outside the repeated stages.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_seconds: Option<f64>,
    pub filter: StageStats,
    pub normals: StageStats,
    pub segmentation: StageStats,
    pub handle_search: StageStats,
    pub total: StageStats,
    pub n_segments: usize,
    pub n_handles: usize,
    /// Whether every repeat produced the same handles.
    pub deterministic: bool,
}

/// Runs the full pipeline `repeats` times (at least 3).
pub fn bench(cloud: &PointCloud, cfg: &PipelineConfig, repeats: usize) -> Result<BenchReport> {
    if repeats < 3 {
        return Err(Error::InvalidArgument(format!("repeats must be >= 3, got {repeats}")));
    }
    let mut runs: Vec<StageTimings> = Vec::with_capacity(repeats);
    let mut reference: Option<Vec<HandleRecord>> = None;
    let mut deterministic = true;
    let mut n_segments = 0;
    for _ in 0..repeats {
        let det = detect(cloud, cfg)?;
        let handles: Vec<HandleRecord> = det.handles.iter().map(HandleRecord::from).collect();
        match &reference {
            None => {
                n_segments = det.segmentation.segments().len();
                reference = Some(handles);
            }
            Some(r) => deterministic &= *r == handles,
        }
        runs.push(det.timings);
    }
    let stat = |f: fn(&StageTimings) -> f64| StageStats::from_samples(&runs.iter().map(f).collect::<Vec<_>>());
    Ok(BenchReport {
        n_points: cloud.len(),
        repeats,
        load_seconds: None,
        filter: stat(|t| t.filter),
        normals: stat(|t| t.normals),
        segmentation: stat(|t| t.segmentation),
        handle_search: stat(|t| t.handle_search),
        total: stat(|t| t.total()),
        n_segments,
        n_handles: reference.map_or(0, |r| r.len()),
        deterministic,
    })
}
