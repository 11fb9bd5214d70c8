//! Ground truth, scoring, synthetic scenes and timing.

mod annotation;
mod bench;
mod metric;
pub mod synth;

pub use annotation::{parse_text_annotation, BoundingRegion, Membership, ObjectRecord, ResolvedAnnotation, SceneAnnotation};
pub use bench::{bench, BenchReport, StageStats};
pub use metric::{
    credited_object, evaluate, recall_pct, score_scene, EvalReport, ObjectHits, Scene, SceneFailure, SceneReport,
    CREDIT_FRACTION,
};
pub use synth::{synth_scene, synth_scene_detailed, Sampling, SyntheticScene, SyntheticSceneSpec};
