use nalgebra::{Point3, Vector3};
use rayon::prelude::*;

use super::frame::{pose_angles, SegmentFrame};
use super::{GraspHandle, GripperModel};
use crate::cloud::PointCloud;
use crate::error::Result;
use crate::segmentation::Segmentation;
use crate::spatial::NeighborIndex;

/// Candidate steps along the major axis: 0, +1, -1, +2, -2, ...
fn candidate_steps(frame: &SegmentFrame, gripper: &GripperModel) -> Vec<i32> {
    let per_side = (frame.extent_a / (2.0 * gripper.e)).floor().max(0.0) as i32;
    let mut steps = vec![0];
    for k in 1..=per_side {
        steps.push(k);
        steps.push(-k);
    }
    steps
}

/// Searches every framed segment for handles. Output is ordered by segment
/// label, then by distance of the candidate center from the segment
/// centroid, then by patch extent.
pub fn find_handles(
    segmentation: &Segmentation,
    cloud: &PointCloud,
    index: &NeighborIndex,
    frames: &[SegmentFrame],
    gripper: &GripperModel,
) -> Result<Vec<GraspHandle>> {
    gripper.validate()?;
    let per_segment = frames
        .par_iter()
        .map(|frame| search_segment(segmentation, cloud, index, frame, gripper))
        .collect::<Result<Vec<_>>>()?;
    let mut handles: Vec<GraspHandle> = per_segment.into_iter().flatten().collect();
    handles.sort_by(|x, y| {
        x.segment
            .cmp(&y.segment)
            .then(x.step.unsigned_abs().cmp(&y.step.unsigned_abs()))
            .then(x.patch_extent.total_cmp(&y.patch_extent))
            .then(y.step.cmp(&x.step))
    });
    Ok(handles)
}

/// Handles for a single segment, in candidate order.
pub fn search_segment(
    segmentation: &Segmentation,
    cloud: &PointCloud,
    index: &NeighborIndex,
    frame: &SegmentFrame,
    gripper: &GripperModel,
) -> Result<Vec<GraspHandle>> {
    let mut out = Vec::new();
    let mut nbrs = Vec::new();
    for step in candidate_steps(frame, gripper) {
        let center = frame.centroid + frame.a * (f64::from(step) * gripper.e);
        index.radius_neighbors_into(&center, gripper.d / 2.0, &mut nbrs)?;
        if let Some(h) = evaluate_candidate(segmentation, cloud, frame, gripper, &center, step, &nbrs) {
            out.push(h);
        }
    }
    Ok(out)
}

fn evaluate_candidate(
    segmentation: &Segmentation,
    cloud: &PointCloud,
    frame: &SegmentFrame,
    gripper: &GripperModel,
    center: &Point3<f64>,
    step: i32,
    gathered: &[usize],
) -> Option<GraspHandle> {
    let half_d = gripper.d / 2.0;
    // Slab across the major axis, closed interval.
    let slab: Vec<(usize, f64, f64)> = gathered
        .iter()
        .filter_map(|&i| {
            let q = frame.project(cloud.point(i), center);
            (q.a.abs() <= gripper.e / 2.0).then_some((i, q.f, q.n))
        })
        .collect();
    // Top surface: the highest gathered point in the slab, whatever object
    // it belongs to.
    let n_top = slab
        .iter()
        .map(|s| s.2)
        .fold(f64::NEG_INFINITY, f64::max);
    if !n_top.is_finite() {
        return None;
    }
    let mut band: Vec<(usize, f64, f64)> = slab.into_iter().filter(|s| s.2 >= n_top - gripper.l).collect();
    band.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));

    // Maximal run of consecutive gaps < g that contains f = 0: start from
    // the first point at or past the center and grow both ways.
    let start = band.partition_point(|s| s.1 < 0.0).min(band.len().checked_sub(1)?);
    let mut lo = start;
    while lo > 0 && band[lo].1 - band[lo - 1].1 < gripper.g {
        lo -= 1;
    }
    let mut hi = start;
    while hi + 1 < band.len() && band[hi + 1].1 - band[hi].1 < gripper.g {
        hi += 1;
    }
    let (f_lo, f_hi) = (band[lo].1, band[hi].1);
    if !(f_lo <= 0.0 && 0.0 <= f_hi) {
        return None;
    }
    // The clearance beyond each end must be verifiable inside the search
    // sphere; a run that comes within g of the sphere boundary may continue
    // outside it.
    if f_hi + gripper.g > half_d || f_lo - gripper.g < -half_d {
        return None;
    }
    let extent = f_hi - f_lo;
    if extent >= gripper.d {
        return None;
    }
    let patch_slice = &band[lo..=hi];
    // A run made only of other objects' points is not a handle on this
    // segment.
    if !patch_slice.iter().any(|s| segmentation.label(s.0) == Some(frame.label)) {
        return None;
    }
    let mut patch: Vec<usize> = patch_slice.iter().map(|s| s.0).collect();
    patch.sort_unstable();
    let position = Point3::from(
        patch
            .iter()
            .fold(Vector3::zeros(), |acc, &i| acc + cloud.point(i).coords)
            / patch.len() as f64,
    );
    let n_min = patch_slice.iter().map(|s| s.2).fold(f64::INFINITY, f64::min);
    Some(GraspHandle {
        segment: frame.label,
        position,
        f: frame.f,
        a: frame.a,
        n: frame.n,
        angles: pose_angles(&frame.rotation()),
        patch_extent: extent,
        depth: n_top - n_min,
        patch,
        center: *center,
        step,
        f_range: (f_lo, f_hi),
        n_top,
    })
}
