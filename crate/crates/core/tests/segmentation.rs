mod common;

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use surfgrasp::cloud::PointCloud;
use surfgrasp::normals::{estimate_normals, NeighborhoodSpec, NormalField};
use surfgrasp::segmentation::{
    grow_regions, grow_regions_logged, is_edge_point, seed_order, GrowthAction, SegmentationConfig,
};
use surfgrasp::spatial::NeighborIndex;

use common::{naive_grow, random_small_cloud};

fn noisy_plane(n_side: usize, sigma: f64, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut pts = Vec::new();
    for i in 0..n_side {
        for j in 0..n_side {
            pts.push(Point3::new(i as f64 * 0.0025, j as f64 * 0.0025, noise.sample(&mut rng)));
        }
    }
    PointCloud::from_points(pts).with_viewpoint(Point3::new(0.05, 0.05, 1.0))
}

fn with_normals(normals: Vec<Vector3<f64>>) -> NormalField {
    let valid = vec![true; normals.len()];
    NormalField::from_parts(normals, valid, NeighborhoodSpec::Radius(0.01)).unwrap()
}

fn run(cloud: &PointCloud, cfg: &SegmentationConfig) -> (NeighborIndex, NormalField, surfgrasp::segmentation::Segmentation) {
    let index = NeighborIndex::build(cloud).unwrap();
    let normals = estimate_normals(cloud, &index, NeighborhoodSpec::Knn(8)).unwrap();
    let seg = grow_regions(cloud, &normals, &index, cfg).unwrap();
    (index, normals, seg)
}

/// Two half planes meeting at x = 0 at a right angle: z = 0 for x <= 0 and
/// x = 0 for z >= 0, with exact normals.
fn right_angle_fold() -> (PointCloud, NormalField) {
    let mut pts = Vec::new();
    let mut normals = Vec::new();
    for j in 0..20 {
        let y = j as f64 * 0.002;
        for i in 1..=15 {
            pts.push(Point3::new(-(i as f64) * 0.002, y, 0.0));
            normals.push(Vector3::z());
            pts.push(Point3::new(0.0, y, i as f64 * 0.002));
            normals.push(-Vector3::x());
        }
        pts.push(Point3::new(0.0, y, 0.0));
        normals.push(Vector3::z());
    }
    (PointCloud::from_points(pts), with_normals(normals))
}

#[test]
fn smooth_plane_is_one_segment() {
    let cloud = noisy_plane(45, 0.0002, 1);
    assert!(cloud.len() >= 2000);
    let (_, _, seg) = run(&cloud, &SegmentationConfig::default());
    assert_eq!(seg.segments().len(), 1);
    assert!(seg.segments()[0].size() as f64 >= 0.99 * cloud.len() as f64);
}

#[test]
fn right_angle_fold_points_are_edges() {
    let (cloud, normals) = right_angle_fold();
    let index = NeighborIndex::build(&cloud).unwrap();
    let cfg = SegmentationConfig {
        theta_high: 45f64.to_radians(),
        ..Default::default()
    };
    // A corner point in the middle of the crease sees both faces about equally.
    let corner = (0..cloud.len())
        .find(|&i| (cloud.point(i) - Point3::new(0.0, 0.02, 0.0)).norm() < 1e-12)
        .unwrap();
    let nbrs = index.radius_neighbors(cloud.point(corner), cfg.radius).unwrap();
    let test = is_edge_point(corner, &nbrs, &normals, &cfg);
    assert!((test.ratio - 0.5).abs() < 0.1, "ratio {}", test.ratio);
    assert!(test.is_edge);

    let seg = grow_regions(&cloud, &normals, &index, &cfg).unwrap();
    assert!(seg.edge_points().contains(&corner));
    // Far from the crease nothing is an edge.
    for &e in seg.edge_points() {
        let p = cloud.point(e);
        assert!(p.x.abs().max(p.z.abs()) <= cfg.radius + 1e-12, "{p:?}");
    }
}

#[test]
fn edge_ratio_must_strictly_exceed_k() {
    // Seed 0 plus ten neighbors; the first `tilted` neighbors are flipped.
    let cfg = SegmentationConfig::default();
    let nbrs: Vec<usize> = (0..11).collect();
    let field = |tilted: usize| {
        with_normals((0..11).map(|i| if i >= 1 && i <= tilted { Vector3::x() } else { Vector3::z() }).collect())
    };
    let at_k = is_edge_point(0, &nbrs, &field(4), &cfg);
    assert_eq!(at_k.valid_neighbors, 10);
    assert!((at_k.ratio - 0.4).abs() < 1e-12);
    assert!(!at_k.is_edge);
    assert!(is_edge_point(0, &nbrs, &field(5), &cfg).is_edge);
}

#[test]
fn invalid_neighbors_do_not_count() {
    let cfg = SegmentationConfig::default();
    let normals = vec![Vector3::z(), Vector3::x(), Vector3::x(), Vector3::z()];
    let field = NormalField::from_parts(normals, vec![true, false, true, true], NeighborhoodSpec::Radius(0.01)).unwrap();
    let t = is_edge_point(0, &[0, 1, 2, 3], &field, &cfg);
    assert_eq!(t.valid_neighbors, 2);
    assert!((t.ratio - 0.5).abs() < 1e-12);
}

#[test]
fn growth_log_is_consistent() {
    let cloud = random_small_cloud(4);
    let cfg = SegmentationConfig {
        min_segment_size: 1,
        ..Default::default()
    };
    let index = NeighborIndex::build(&cloud).unwrap();
    let normals = estimate_normals(&cloud, &index, NeighborhoodSpec::Knn(8)).unwrap();
    let (seg, log) = grow_regions_logged(&cloud, &normals, &index, &cfg).unwrap();

    // A point's region is fixed by the first event that labels it.
    let mut first: HashMap<usize, u32> = HashMap::new();
    for e in &log {
        match e.action {
            GrowthAction::Blocked => assert!(e.angle > cfg.theta_high),
            GrowthAction::LabelOnly => {
                assert!(e.seed_is_edge);
                assert!(e.angle >= cfg.theta_low && e.angle <= cfg.theta_high);
            }
            GrowthAction::LabelAndEnqueue => assert!(e.angle < cfg.theta_low || !e.seed_is_edge),
        }
        if e.action != GrowthAction::Blocked {
            let r = *first.entry(e.neighbor).or_insert(e.region);
            assert_eq!(r, e.region, "point {} relabeled", e.neighbor);
        }
    }
    // Every seed is its region's start or was enqueued by that region.
    let mut starts: HashMap<u32, usize> = HashMap::new();
    for e in &log {
        let start = *starts.entry(e.region).or_insert(e.seed);
        if e.seed != start {
            assert!(
                log.iter().any(|f| f.neighbor == e.seed && f.region == e.region && f.action == GrowthAction::LabelAndEnqueue),
                "seed {} has no chain",
                e.seed
            );
        }
    }
    // Without a size filter every valid point ends up labeled, and regions
    // keep their provisional ids.
    for i in 0..cloud.len() {
        assert_eq!(seg.label(i).is_some(), normals.is_valid(i));
        if let Some(&r) = first.get(&i) {
            assert_eq!(seg.label(i), Some(r));
        }
    }
}

#[test]
fn raising_theta_low_never_fragments_a_plane() {
    let cloud = noisy_plane(30, 0.0008, 2);
    let mut last = usize::MAX;
    for deg in [2.0, 4.0, 6.0, 8.0, 12.0, 16.0] {
        let cfg = SegmentationConfig {
            theta_low: f64::to_radians(deg),
            min_segment_size: 1,
            ..Default::default()
        };
        let (_, _, seg) = run(&cloud, &cfg);
        assert!(seg.segments().len() <= last, "{deg} deg: {} segments after {last}", seg.segments().len());
        last = seg.segments().len();
    }
}

#[test]
fn segmentation_is_deterministic() {
    let cloud = random_small_cloud(9);
    let cfg = SegmentationConfig::default();
    let (_, _, a) = run(&cloud, &cfg);
    let (_, _, b) = run(&cloud, &cfg);
    assert_eq!(a.labels(), b.labels());
    assert_eq!(a.edge_points(), b.edge_points());
}

#[test]
fn seed_order_skips_labeled_and_invalid_points() {
    let field = NormalField::from_parts(vec![Vector3::z(); 5], vec![true, false, true, true, true], NeighborhoodSpec::Knn(8)).unwrap();
    let labels = vec![None, None, Some(0), None, None];
    assert_eq!(seed_order(&field, &labels), vec![0, 3, 4]);
    assert!(seed_order(&field, &[Some(1); 5]).is_empty());
}

#[test]
fn bad_config_is_rejected() {
    let cloud = noisy_plane(10, 0.0, 3);
    let index = NeighborIndex::build(&cloud).unwrap();
    let normals = estimate_normals(&cloud, &index, NeighborhoodSpec::Knn(8)).unwrap();
    let cfg = SegmentationConfig {
        theta_low: 0.6,
        theta_high: 0.5,
        ..Default::default()
    };
    assert!(grow_regions(&cloud, &normals, &index, &cfg).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn matches_naive_reference(seed in 0u64..10_000, min in 1usize..60) {
        let cloud = random_small_cloud(seed);
        let cfg = SegmentationConfig { min_segment_size: min, ..Default::default() };
        let (_, normals, seg) = run(&cloud, &cfg);
        let (labels, edges) = naive_grow(&cloud, &normals, &cfg);
        prop_assert_eq!(seg.labels(), labels.as_slice());
        prop_assert_eq!(seg.edge_points(), edges.as_slice());
    }

    #[test]
    fn segments_respect_min_size(seed in 0u64..10_000, min in 1usize..200) {
        let cloud = random_small_cloud(seed);
        let cfg = SegmentationConfig { min_segment_size: min, ..Default::default() };
        let (_, _, seg) = run(&cloud, &cfg);
        for s in seg.segments() {
            prop_assert!(s.size() >= min);
        }
        let labeled = seg.labels().iter().flatten().count();
        prop_assert_eq!(labeled, seg.segments().iter().map(|s| s.size()).sum::<usize>());
    }
}
