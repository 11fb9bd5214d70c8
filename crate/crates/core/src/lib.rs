//! Graspable affordance detection in single-view point clouds.
//!
//! The pipeline estimates PCA normals, splits the cloud into smooth surface
//! segments with a dual-threshold region grower, then searches each segment
//! for patches a parallel-jaw gripper can close on.
//!
//! ```no_run
//! use surfgrasp::{cloud::load_pcd, pipeline::{detect, PipelineConfig}};
//!
//! let cloud = load_pcd("scene.pcd")?;
//! let det = detect(&cloud, &PipelineConfig::default())?;
//! for h in &det.handles {
//!     println!("segment {} at {:?}", h.segment, h.position);
//! }
//! # Ok::<(), surfgrasp::Error>(())
//! ```

pub mod affordance;
pub mod cloud;
pub mod config;
mod error;
pub mod eval;
pub mod normals;
mod pca;
pub mod pipeline;
pub mod report;
pub mod segmentation;
pub mod spatial;

pub use error::{Error, Result};
