//! Region growing over surface normals with two smoothness thresholds and
//! edge-point gating.
//!
//! For a seed `s` and each neighbor `p` within `radius`, with `theta` the
//! angle between their normals:
//!
//! * `theta < theta_low`: `p` joins the region and becomes a seed.
//! * `theta > theta_high`: `p` is left alone by this seed.
//! * otherwise `p` joins the region, and becomes a seed only when `s` is not
//!   an edge point.
//!
//! `s` is an edge point when more than a fraction `k` of its valid-normal
//! neighbors (itself excluded) deviate from it by more than `theta_high`.
//! Angles are always taken against the current seed's normal. A point keeps
//! the first label it receives.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::normals::{angle_between, NormalField};
use crate::spatial::NeighborIndex;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentationConfig {
    /// Radians.
    pub theta_low: f64,
    /// Radians.
    pub theta_high: f64,
    pub edge_ratio_k: f64,
    /// Neighborhood radius in meters.
    pub radius: f64,
    pub min_segment_size: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            theta_low: 8f64.to_radians(),
            theta_high: 30f64.to_radians(),
            edge_ratio_k: 0.4,
            radius: 0.01,
            min_segment_size: 50,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        let pi = std::f64::consts::PI;
        if !(0.0 < self.theta_low && self.theta_low < self.theta_high && self.theta_high < pi) {
            return Err(Error::Config(format!(
                "need 0 < theta_low < theta_high < 180 deg, got {:.3} / {:.3} deg",
                self.theta_low.to_degrees(),
                self.theta_high.to_degrees()
            )));
        }
        if !(0.0 < self.edge_ratio_k && self.edge_ratio_k < 1.0) {
            return Err(Error::Config(format!(
                "edge_ratio_k must lie in (0, 1), got {}",
                self.edge_ratio_k
            )));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Config(format!(
                "segmentation radius must be > 0, got {}",
                self.radius
            )));
        }
        Ok(())
    }
}

/// Outcome of the edge-point test for one seed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeTest {
    pub is_edge: bool,
    /// `C_R / m`, or 0 when there are no valid neighbors.
    pub ratio: f64,
    /// `m`: valid-normal neighbors, the seed excluded.
    pub valid_neighbors: usize,
}

impl EdgeTest {
    pub fn is_degenerate(&self) -> bool {
        self.valid_neighbors == 0
    }
}

/// Edge-point test for seed `s` given its radius neighborhood. The seed
/// itself and invalid-normal neighbors do not count toward `m`.
pub fn is_edge_point(s: usize, neighbors: &[usize], normals: &NormalField, cfg: &SegmentationConfig) -> EdgeTest {
    let ns = normals.normal(s);
    let (mut m, mut exceeding) = (0usize, 0usize);
    for &p in neighbors {
        if p == s || !normals.is_valid(p) {
            continue;
        }
        m += 1;
        if angle_between(ns, normals.normal(p)) > cfg.theta_high {
            exceeding += 1;
        }
    }
    if m == 0 {
        return EdgeTest {
            is_edge: false,
            ratio: 0.0,
            valid_neighbors: 0,
        };
    }
    let ratio = exceeding as f64 / m as f64;
    EdgeTest {
        is_edge: ratio > cfg.edge_ratio_k,
        ratio,
        valid_neighbors: m,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub label: u32,
    pub members: Vec<usize>,
}

impl SegmentRecord {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    labels: Vec<Option<u32>>,
    edge_points: Vec<usize>,
    segments: Vec<SegmentRecord>,
}

impl Segmentation {
    /// Builds a segmentation from a per-point label vector. Segment records
    /// are derived from the labels; label ids must be dense from 0.
    pub fn from_labels(labels: Vec<Option<u32>>, mut edge_points: Vec<usize>) -> Result<Self> {
        let n_labels = labels.iter().flatten().map(|&l| l as usize + 1).max().unwrap_or(0);
        let mut segments: Vec<SegmentRecord> = (0..n_labels as u32)
            .map(|label| SegmentRecord {
                label,
                members: Vec::new(),
            })
            .collect();
        for (i, l) in labels.iter().enumerate() {
            if let Some(l) = l {
                segments[*l as usize].members.push(i);
            }
        }
        if let Some(s) = segments.iter().find(|s| s.members.is_empty()) {
            return Err(Error::InvalidArgument(format!("label {} has no members", s.label)));
        }
        edge_points.sort_unstable();
        edge_points.dedup();
        if edge_points.last().is_some_and(|&e| e >= labels.len()) {
            return Err(Error::InvalidArgument("edge point index out of range".into()));
        }
        Ok(Self {
            labels,
            edge_points,
            segments,
        })
    }

    pub fn labels(&self) -> &[Option<u32>] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> Option<u32> {
        self.labels[i]
    }

    /// Sorted indices of seeds classified as edge points.
    pub fn edge_points(&self) -> &[usize] {
        &self.edge_points
    }

    pub fn segments(&self) -> &[SegmentRecord] {
        &self.segments
    }

    pub fn segment(&self, label: u32) -> Option<&SegmentRecord> {
        self.segments.get(label as usize)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn unlabeled_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }
}

/// What a seed did with one neighbor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrowthAction {
    LabelAndEnqueue,
    LabelOnly,
    Blocked,
}

/// One seed/neighbor decision, recorded in processing order. Labels here are
/// provisional region ids, before small regions are dissolved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthEvent {
    pub region: u32,
    pub seed: usize,
    pub seed_is_edge: bool,
    pub neighbor: usize,
    pub angle: f64,
    pub action: GrowthAction,
}

/// Propagation rule: the dual-threshold scheme, or classic single-threshold
/// region growing for comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GrowthRule {
    Dual(SegmentationConfig),
    Single {
        theta: f64,
        radius: f64,
        min_segment_size: usize,
    },
}

impl GrowthRule {
    fn radius(&self) -> f64 {
        match self {
            GrowthRule::Dual(c) => c.radius,
            GrowthRule::Single { radius, .. } => *radius,
        }
    }

    fn min_segment_size(&self) -> usize {
        match self {
            GrowthRule::Dual(c) => c.min_segment_size,
            GrowthRule::Single { min_segment_size, .. } => *min_segment_size,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            GrowthRule::Dual(c) => c.validate(),
            GrowthRule::Single { theta, radius, .. } => {
                if !(*theta > 0.0 && *theta < std::f64::consts::PI) || !(*radius > 0.0) {
                    return Err(Error::Config(format!(
                        "single threshold needs theta in (0, pi) and radius > 0, got {theta} / {radius}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Candidate seeds: unlabeled points with a valid normal, ascending index.
pub fn seed_order(normals: &NormalField, labels: &[Option<u32>]) -> Vec<usize> {
    (0..normals.len())
        .filter(|&i| normals.is_valid(i) && labels.get(i).is_some_and(|l| l.is_none()))
        .collect()
}

pub fn grow_regions(
    cloud: &PointCloud,
    normals: &NormalField,
    index: &NeighborIndex,
    cfg: &SegmentationConfig,
) -> Result<Segmentation> {
    grow(cloud, normals, index, GrowthRule::Dual(*cfg), None)
}

/// [`grow_regions`] that also returns every seed/neighbor decision.
pub fn grow_regions_logged(
    cloud: &PointCloud,
    normals: &NormalField,
    index: &NeighborIndex,
    cfg: &SegmentationConfig,
) -> Result<(Segmentation, Vec<GrowthEvent>)> {
    let mut log = Vec::new();
    let seg = grow(cloud, normals, index, GrowthRule::Dual(*cfg), Some(&mut log))?;
    Ok((seg, log))
}

pub fn grow_regions_with_rule(
    cloud: &PointCloud,
    normals: &NormalField,
    index: &NeighborIndex,
    rule: GrowthRule,
) -> Result<Segmentation> {
    grow(cloud, normals, index, rule, None)
}

fn grow(
    cloud: &PointCloud,
    normals: &NormalField,
    index: &NeighborIndex,
    rule: GrowthRule,
    mut log: Option<&mut Vec<GrowthEvent>>,
) -> Result<Segmentation> {
    rule.validate()?;
    let n = cloud.len();
    if normals.len() != n || index.len() != n {
        return Err(Error::InvalidArgument(format!(
            "cloud has {n} points, normals {}, index {}",
            normals.len(),
            index.len()
        )));
    }
    let radius = rule.radius();
    let mut labels: Vec<Option<u32>> = vec![None; n];
    // Region id + 1 of the last region that enqueued each point.
    let mut enqueued_in: Vec<u32> = vec![0; n];
    let mut edge_points = Vec::new();
    let mut queue = VecDeque::new();
    let mut nbrs = Vec::new();
    let mut region = 0u32;

    for start in 0..n {
        if labels[start].is_some() || !normals.is_valid(start) {
            continue;
        }
        labels[start] = Some(region);
        enqueued_in[start] = region + 1;
        queue.push_back(start);

        while let Some(s) = queue.pop_front() {
            index.radius_neighbors_into(cloud.point(s), radius, &mut nbrs)?;
            nbrs.sort_unstable();
            let seed_is_edge = match rule {
                GrowthRule::Dual(cfg) => is_edge_point(s, &nbrs, normals, &cfg).is_edge,
                GrowthRule::Single { .. } => false,
            };
            if seed_is_edge {
                edge_points.push(s);
            }
            let ns = normals.normal(s);
            for &p in &nbrs {
                if p == s || !normals.is_valid(p) {
                    continue;
                }
                if labels[p].is_some_and(|l| l != region) {
                    continue;
                }
                let theta = angle_between(ns, normals.normal(p));
                let action = match rule {
                    GrowthRule::Dual(cfg) => {
                        if theta < cfg.theta_low {
                            GrowthAction::LabelAndEnqueue
                        } else if theta > cfg.theta_high {
                            GrowthAction::Blocked
                        } else if seed_is_edge {
                            GrowthAction::LabelOnly
                        } else {
                            GrowthAction::LabelAndEnqueue
                        }
                    }
                    GrowthRule::Single { theta: t, .. } => {
                        if theta < t {
                            GrowthAction::LabelAndEnqueue
                        } else {
                            GrowthAction::Blocked
                        }
                    }
                };
                if let Some(log) = log.as_deref_mut() {
                    log.push(GrowthEvent {
                        region,
                        seed: s,
                        seed_is_edge,
                        neighbor: p,
                        angle: theta,
                        action,
                    });
                }
                match action {
                    GrowthAction::Blocked => {}
                    GrowthAction::LabelOnly => labels[p] = Some(region),
                    GrowthAction::LabelAndEnqueue => {
                        labels[p] = Some(region);
                        if enqueued_in[p] != region + 1 {
                            enqueued_in[p] = region + 1;
                            queue.push_back(p);
                        }
                    }
                }
            }
        }
        region += 1;
    }

    // Dissolve small regions and renumber the survivors densely in order of
    // creation.
    let mut sizes = vec![0usize; region as usize];
    for l in labels.iter().flatten() {
        sizes[*l as usize] += 1;
    }
    let min = rule.min_segment_size();
    let mut remap = vec![None; region as usize];
    let mut next = 0u32;
    for (r, &size) in sizes.iter().enumerate() {
        if size >= min {
            remap[r] = Some(next);
            next += 1;
        }
    }
    for l in labels.iter_mut() {
        *l = l.and_then(|r| remap[r as usize]);
    }
    Segmentation::from_labels(labels, edge_points)
}
