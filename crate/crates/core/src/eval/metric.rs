//! Recall at high precision: the share of graspable objects that receive at
//! least one valid handle.

use std::collections::HashSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::annotation::{ResolvedAnnotation, SceneAnnotation};
use crate::affordance::GraspHandle;
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::pipeline::{detect, PipelineConfig, StageTimings};

/// A handle counts for an object when at least this share of its patch
/// points belong to the object.
pub const CREDIT_FRACTION: f64 = 0.6;

/// The object a handle is credited to, if any.
pub fn credited_object(patch: &[usize], objects: &[(u32, HashSet<usize>)]) -> Option<u32> {
    if patch.is_empty() {
        return None;
    }
    objects.iter().find_map(|(id, set)| {
        let inside = patch.iter().filter(|i| set.contains(i)).count();
        (inside as f64 >= CREDIT_FRACTION * patch.len() as f64).then_some(*id)
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectHits {
    pub id: u32,
    pub handles: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneReport {
    pub scene_id: String,
    pub n_points: usize,
    pub n_segments: usize,
    pub n_objects: usize,
    pub detected_objects: usize,
    pub recall_pct: f64,
    /// Every emitted handle, credited or not.
    pub n_handles: usize,
    pub per_object: Vec<ObjectHits>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<StageTimings>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneFailure {
    pub scene_id: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenes: Vec<SceneReport>,
    pub failures: Vec<SceneFailure>,
    pub total_objects: usize,
    pub detected_objects: usize,
    pub aggregate_recall_pct: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<StageTimings>,
}

/// `100 * detected / total`; 0 when there is nothing to detect.
pub fn recall_pct(detected: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * detected as f64 / total as f64
    }
}

/// Scores one scene's handles against its resolved annotation. Each object
/// counts at most once no matter how many handles it receives.
pub fn score_scene(annotation: &ResolvedAnnotation, handles: &[GraspHandle]) -> SceneReport {
    let mut per_object: Vec<ObjectHits> = annotation
        .objects
        .iter()
        .map(|(id, _)| ObjectHits { id: *id, handles: 0 })
        .collect();
    for h in handles {
        if let Some(id) = credited_object(&h.patch, &annotation.objects) {
            if let Some(hit) = per_object.iter_mut().find(|o| o.id == id) {
                hit.handles += 1;
            }
        }
    }
    let detected = per_object.iter().filter(|o| o.handles > 0).count();
    SceneReport {
        scene_id: annotation.scene_id.clone(),
        n_points: 0,
        n_segments: 0,
        n_objects: per_object.len(),
        detected_objects: detected,
        recall_pct: recall_pct(detected, per_object.len()),
        n_handles: handles.len(),
        per_object,
        timings: None,
    }
}

impl EvalReport {
    /// Collects per-scene outcomes, sorted by scene id.
    pub fn assemble(results: Vec<std::result::Result<SceneReport, SceneFailure>>) -> Self {
        let mut scenes = Vec::new();
        let mut failures = Vec::new();
        for r in results {
            match r {
                Ok(s) => scenes.push(s),
                Err(f) => failures.push(f),
            }
        }
        scenes.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
        failures.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
        let total_objects = scenes.iter().map(|s| s.n_objects).sum();
        let detected_objects = scenes.iter().map(|s| s.detected_objects).sum();
        let timings = scenes.iter().try_fold(StageTimings::default(), |mut acc, s| {
            acc.add(s.timings.as_ref()?);
            Some(acc)
        });
        Self {
            scenes,
            failures,
            total_objects,
            detected_objects,
            aggregate_recall_pct: recall_pct(detected_objects, total_objects),
            timings,
        }
    }

    pub fn without_timings(mut self) -> Self {
        self.timings = None;
        for s in &mut self.scenes {
            s.timings = None;
        }
        self
    }

    /// One row per scene: `frame,n_objects,n_handles,recall`, where
    /// `n_handles` counts objects with at least one handle.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame,n_objects,n_handles,recall\n");
        for s in &self.scenes {
            let frame = if s.scene_id.contains([',', '"', '\n']) {
                format!("\"{}\"", s.scene_id.replace('"', "\"\""))
            } else {
                s.scene_id.clone()
            };
            let _ = writeln!(out, "{frame},{},{},{:.2}", s.n_objects, s.detected_objects, s.recall_pct);
        }
        let _ = writeln!(
            out,
            "total,{},{},{:.2}",
            self.total_objects, self.detected_objects, self.aggregate_recall_pct
        );
        out
    }
}

/// A cloud and its ground truth.
#[derive(Clone, Debug)]
pub struct Scene {
    pub cloud: PointCloud,
    pub annotation: SceneAnnotation,
}

/// Runs the full pipeline on every scene in parallel and scores it. A scene
/// whose annotation does not fit its cloud, or whose pipeline run fails, is
/// recorded as a failure and skipped.
pub fn evaluate(scenes: &[Scene], cfg: &PipelineConfig) -> Result<EvalReport> {
    cfg.validate()?;
    if cfg.filter.voxel_leaf > 0.0 {
        return Err(Error::Config(
            "voxel downsampling renumbers points and cannot be used with index annotations".into(),
        ));
    }
    let results = scenes
        .par_iter()
        .map(|scene| {
            let id = scene.annotation.scene_id.clone();
            let fail = |e: Error| SceneFailure {
                scene_id: id.clone(),
                error: e.to_string(),
            };
            let resolved = scene.annotation.resolve(&scene.cloud).map_err(fail)?;
            let det = detect(&scene.cloud, cfg).map_err(fail)?;
            let mut report = score_scene(&resolved, &det.handles);
            report.n_points = det.cloud.len();
            report.n_segments = det.segmentation.segments().len();
            report.timings = Some(det.timings);
            Ok(report)
        })
        .collect();
    Ok(EvalReport::assemble(results))
}
