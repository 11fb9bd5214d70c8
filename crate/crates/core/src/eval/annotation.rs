//! Ground-truth graspable objects per scene.
//!
//! JSON form:
//!
//! ```json
//! { "scene_id": "s01",
//!   "objects": [ { "id": 0, "label": "box", "indices": [0, 1, 2] },
//!                { "id": 1, "label": "can", "bbox": { "min": [0,0,0], "max": [0.1,0.1,0.1] } } ],
//!   "total_graspable": 2 }
//! ```
//!
//! A plain-text form is also accepted, one object per line:
//! `<id> <label> idx <i> <i> ...` or `<id> <label> bbox <x0> <y0> <z0> <x1> <y1> <z1>`.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{io_err, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingRegion {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl BoundingRegion {
    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|k| self.min[k] <= p[k] && p[k] <= self.max[k])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Indices(Vec<usize>),
    Bbox(BoundingRegion),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub id: u32,
    pub label: String,
    #[serde(flatten)]
    pub members: Membership,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneAnnotation {
    pub scene_id: String,
    pub objects: Vec<ObjectRecord>,
    pub total_graspable: usize,
}

/// Annotation checked against its cloud, with every object as a point set.
#[derive(Clone, Debug)]
pub struct ResolvedAnnotation {
    pub scene_id: String,
    pub objects: Vec<(u32, HashSet<usize>)>,
}

impl SceneAnnotation {
    pub fn new(scene_id: impl Into<String>, objects: Vec<ObjectRecord>) -> Self {
        let total_graspable = objects.len();
        Self {
            scene_id: scene_id.into(),
            objects,
            total_graspable,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        if path.extension().is_some_and(|e| e == "txt") {
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            parse_text_annotation(&text, &stem)
        } else {
            Ok(serde_json::from_str(&text)?)
        }
    }

    /// Resolves memberships to index sets and checks the invariants: indices
    /// in range, objects disjoint, `total_graspable` equal to the record count.
    pub fn resolve(&self, cloud: &PointCloud) -> Result<ResolvedAnnotation> {
        if self.total_graspable != self.objects.len() {
            return Err(Error::Annotation(format!(
                "{}: total_graspable = {} but {} object records",
                self.scene_id,
                self.total_graspable,
                self.objects.len()
            )));
        }
        let mut seen: HashSet<usize> = HashSet::new();
        let mut objects = Vec::with_capacity(self.objects.len());
        for obj in &self.objects {
            let set: HashSet<usize> = match &obj.members {
                Membership::Indices(ix) => {
                    if let Some(&bad) = ix.iter().find(|&&i| i >= cloud.len()) {
                        return Err(Error::Annotation(format!(
                            "{}: object {} references point {bad} but the cloud has {}",
                            self.scene_id,
                            obj.id,
                            cloud.len()
                        )));
                    }
                    ix.iter().copied().collect()
                }
                Membership::Bbox(b) => (0..cloud.len()).filter(|&i| b.contains(cloud.point(i))).collect(),
            };
            if let Some(&dup) = set.iter().find(|i| seen.contains(i)) {
                return Err(Error::Annotation(format!(
                    "{}: point {dup} belongs to more than one object",
                    self.scene_id
                )));
            }
            seen.extend(&set);
            objects.push((obj.id, set));
        }
        Ok(ResolvedAnnotation {
            scene_id: self.scene_id.clone(),
            objects,
        })
    }
}

/// Parses the line-oriented text annotation format.
pub fn parse_text_annotation(text: &str, scene_id: &str) -> Result<SceneAnnotation> {
    let mut objects = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: &str| Error::Annotation(format!("{scene_id}: line {}: {msg}", no + 1));
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() < 3 {
            return Err(bad("expected `<id> <label> idx|bbox ...`"));
        }
        let id: u32 = tok[0].parse().map_err(|_| bad("object id is not an integer"))?;
        let members = match tok[2] {
            "idx" => Membership::Indices(
                tok[3..]
                    .iter()
                    .map(|t| t.parse().map_err(|_| bad("bad point index")))
                    .collect::<Result<_>>()?,
            ),
            "bbox" => {
                let v: Vec<f64> = tok[3..]
                    .iter()
                    .map(|t| t.parse().map_err(|_| bad("bad bbox coordinate")))
                    .collect::<Result<_>>()?;
                if v.len() != 6 {
                    return Err(bad("bbox needs 6 numbers"));
                }
                Membership::Bbox(BoundingRegion {
                    min: [v[0], v[1], v[2]],
                    max: [v[3], v[4], v[5]],
                })
            }
            other => return Err(bad(&format!("unknown membership kind {other:?}"))),
        };
        objects.push(ObjectRecord {
            id,
            label: tok[1].to_string(),
            members,
        });
    }
    Ok(SceneAnnotation::new(scene_id, objects))
}
