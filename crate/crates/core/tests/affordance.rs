mod common;

use std::collections::HashSet;
use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, Point3, Rotation3, Unit, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use surfgrasp::affordance::{pose_angles, project_to_frame, segment_frame, FrameCoords, GripperModel};
use surfgrasp::cloud::PointCloud;
use surfgrasp::eval::synth::{adjacent_boxes, ObjectSpec, Pose, Shape};
use surfgrasp::eval::{credited_object, synth_scene, Sampling, SyntheticSceneSpec};
use surfgrasp::pipeline::{detect, PipelineConfig};

use common::{random_small_cloud, validate_handle};

/// 10 x 4 cm rectangle in the xy plane on a 2 mm grid, centered at the origin.
fn rectangle() -> Vec<Point3<f64>> {
    let mut pts = Vec::new();
    for i in 0..=50 {
        for j in 0..=20 {
            pts.push(Point3::new(-0.05 + i as f64 * 0.002, -0.02 + j as f64 * 0.002, 0.0));
        }
    }
    pts
}

fn all(n: usize) -> Vec<usize> {
    (0..n).collect()
}

fn rot_z(angle: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Vector3::z_axis(), angle).into_inner()
}

fn standing_cylinder(radius: f64) -> SyntheticSceneSpec {
    SyntheticSceneSpec {
        name: "cylinder".into(),
        objects: vec![ObjectSpec {
            label: "can".into(),
            shape: Shape::Cylinder { radius, height: 0.12 },
            pose: Pose::at(0.0, 0.0, 0.06),
            graspable: true,
        }],
        density: 80_000.0,
        sensor: [0.0, -0.6, 0.1],
        noise_sigma: 0.0005,
        occlusion: true,
        sampling: Sampling::Grid,
        seed: 2,
    }
}

#[test]
fn rectangle_frame_follows_its_sides() {
    let pts = rectangle();
    let cloud = PointCloud::from_points(pts).with_viewpoint(Point3::new(0.0, 0.0, 1.0));
    let frame = segment_frame(0, &all(cloud.len()), &cloud, cloud.viewpoint()).unwrap();
    assert!(frame.a.x.abs() > 1.0 - 1e-9);
    assert!(frame.f.y.abs() > 1.0 - 1e-9);
    assert!((frame.n - Vector3::z()).norm() < 1e-9);
    assert!((frame.extent_a - 0.1).abs() < 1e-9);
    assert!((frame.extent_f - 0.04).abs() < 1e-9);
    assert!((frame.f.cross(&frame.a) - frame.n).norm() < 1e-9);
}

#[test]
fn rotated_rectangle_rotates_the_frame() {
    let r = rot_z(0.7);
    let cloud = PointCloud::from_points(rectangle().iter().map(|p| Point3::from(r * p.coords)).collect())
        .with_viewpoint(Point3::new(0.0, 0.0, 1.0));
    let frame = segment_frame(0, &all(cloud.len()), &cloud, cloud.viewpoint()).unwrap();
    let major = r * Vector3::x();
    assert!(frame.a.dot(&major).abs() > 1.0 - 1e-9);
    assert!((frame.extent_a - 0.1).abs() < 1e-9);
}

#[test]
fn collinear_segment_has_no_frame() {
    let cloud = PointCloud::from_points(vec![Point3::origin(), Point3::new(0.01, 0.0, 0.0), Point3::new(0.02, 0.0, 0.0)]);
    assert!(segment_frame(0, &[0, 1, 2], &cloud, &Point3::new(0.0, 0.0, 1.0)).is_err());
}

#[test]
fn projection_reads_off_frame_coordinates() {
    let cloud = PointCloud::from_points(rectangle()).with_viewpoint(Point3::new(0.0, 0.0, 1.0));
    let frame = segment_frame(0, &all(cloud.len()), &cloud, cloud.viewpoint()).unwrap();
    let center = Point3::new(0.01, 0.0, 0.0);
    let q = frame.project(&Point3::new(0.03, 0.0, 0.005), &center);
    assert!((q.a.abs() - 0.02).abs() < 1e-12);
    assert!(q.f.abs() < 1e-12);
    assert!((q.n - 0.005).abs() < 1e-12);
    let coords = project_to_frame(&[0], &cloud, &frame, &center);
    assert_eq!(coords[0], frame.project(cloud.point(0), &center));
}

#[test]
fn projection_round_trips() {
    let cloud = random_small_cloud(3);
    let frame = segment_frame(0, &all(cloud.len()), &cloud, cloud.viewpoint()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let p = Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let c = Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let q: FrameCoords = frame.project(&p, &c);
        assert!((frame.unproject(&q, &c) - p).norm() < 1e-9);
    }
}

#[test]
fn pose_angles_of_simple_rotations() {
    assert_eq!(pose_angles(&Matrix3::identity()), [0.0, 0.0, 0.0]);
    let [x, y, z] = pose_angles(&rot_z(FRAC_PI_2));
    assert!(x.abs() < 1e-12 && y.abs() < 1e-12 && (z - FRAC_PI_2).abs() < 1e-12);
}

#[test]
fn pose_angles_rebuild_the_rotation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let axis = Unit::new_normalize(Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let r = Rotation3::from_axis_angle(&axis, rng.random_range(0.0..3.0)).into_inner();
        let [x, y, z] = pose_angles(&r);
        let back = Rotation3::from_axis_angle(&Vector3::z_axis(), z)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), y)
            * Rotation3::from_axis_angle(&Vector3::x_axis(), x);
        assert!((back.into_inner() - r).norm() < 1e-9);
    }
}

#[test]
fn isolated_cylinder_is_grasped_at_its_centroid() {
    let (cloud, _) = synth_scene(&standing_cylinder(0.025)).unwrap();
    let cfg = PipelineConfig::default();
    let det = detect(&cloud, &cfg).unwrap();
    let at_centroid: Vec<_> = det.handles.iter().filter(|h| h.step == 0).collect();
    assert!(!at_centroid.is_empty());
    // The patch spans the chord of the circle at grasp depth l.
    let (r, l) = (0.025, cfg.gripper.l);
    let chord = 2.0 * (r * r - (r - l) * (r - l)).sqrt();
    for h in at_centroid {
        assert!((h.patch_extent - chord).abs() < 0.003, "extent {} vs {chord}", h.patch_extent);
        validate_handle(h, &det.cloud, &cfg.gripper).unwrap();
    }
}

#[test]
fn cylinder_wider_than_the_hand_has_no_handle() {
    let (cloud, _) = synth_scene(&standing_cylinder(0.045)).unwrap();
    let det = detect(&cloud, &PipelineConfig::default()).unwrap();
    assert!(det.handles.iter().all(|h| h.patch_extent < 0.08));
    let big = det.segmentation.segments().iter().max_by_key(|s| s.size()).unwrap().label;
    assert!(det.handles.iter().all(|h| h.segment != big));
}

#[test]
fn separated_boxes_keep_the_centroid_handle() {
    let cfg = PipelineConfig::default();
    let (cloud, ann) = synth_scene(&adjacent_boxes(0.03, 80_000.0, 0.0005, 1)).unwrap();
    let det = detect(&cloud, &cfg).unwrap();
    let resolved = ann.resolve(&det.cloud).unwrap();
    let target = ann.objects.iter().find(|o| o.label == "target").unwrap().id;
    assert!(det
        .handles
        .iter()
        .any(|h| h.step == 0 && credited_object(&h.patch, &resolved.objects) == Some(target)));
}

#[test]
fn touching_boxes_push_handles_off_the_centroid() {
    let cfg = PipelineConfig::default();
    let (cloud, ann) = synth_scene(&adjacent_boxes(0.0, 80_000.0, 0.0005, 1)).unwrap();
    let det = detect(&cloud, &cfg).unwrap();
    let resolved = ann.resolve(&det.cloud).unwrap();
    let target = ann.objects.iter().find(|o| o.label == "target").unwrap().id;
    let on_target: Vec<_> = det
        .handles
        .iter()
        .filter(|h| credited_object(&h.patch, &resolved.objects) == Some(target))
        .collect();
    assert!(on_target.iter().all(|h| h.step != 0));
    assert!(!on_target.is_empty());
}

#[test]
fn handles_in_one_segment_have_distinct_centers() {
    let (cloud, _) = synth_scene(&adjacent_boxes(0.03, 80_000.0, 0.0005, 2)).unwrap();
    let det = detect(&cloud, &PipelineConfig::default()).unwrap();
    let mut seen = HashSet::new();
    for h in &det.handles {
        assert!(seen.insert((h.segment, h.step)), "segment {} step {} repeated", h.segment, h.step);
    }
}

#[test]
fn invalid_gripper_is_rejected() {
    let g = GripperModel {
        g: 0.005,
        ..Default::default()
    };
    assert!(g.validate().is_err());
    let g = GripperModel {
        l: 0.1,
        ..Default::default()
    };
    assert!(g.validate().is_err());
    let cfg = PipelineConfig {
        gripper: GripperModel { d: 0.0, ..Default::default() },
        ..Default::default()
    };
    assert!(detect(&random_small_cloud(1), &cfg).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn every_handle_passes_brute_force_validation(seed in 0u64..10_000, d in 0.05f64..0.12) {
        let (cloud, _) = synth_scene(&adjacent_boxes(0.02, 60_000.0, 0.0005, seed)).unwrap();
        let cfg = PipelineConfig { gripper: GripperModel { d, ..Default::default() }, ..Default::default() };
        let det = detect(&cloud, &cfg).unwrap();
        for h in &det.handles {
            prop_assert!(validate_handle(h, &det.cloud, &cfg.gripper).is_ok(), "{:?}", validate_handle(h, &det.cloud, &cfg.gripper));
        }
    }
}
