// Helpers shared by the integration tests. Each test binary uses a subset.
#![allow(dead_code)]

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use surfgrasp::affordance::{GraspHandle, GripperModel};
use surfgrasp::cloud::PointCloud;
use surfgrasp::eval::synth::{ObjectSpec, Pose, Shape};
use surfgrasp::eval::{Sampling, SyntheticScene, SyntheticSceneSpec};
use surfgrasp::normals::NormalField;
use surfgrasp::segmentation::SegmentationConfig;

fn angle(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

fn within(cloud: &PointCloud, s: usize, r: f64) -> Vec<usize> {
    let q = cloud.point(s);
    (0..cloud.len())
        .filter(|&i| (cloud.point(i) - q).norm_squared() <= r * r)
        .collect()
}

fn naive_is_edge(nbrs: &[usize], normals: &NormalField, cfg: &SegmentationConfig, s: usize) -> bool {
    let ns = normals.normal(s);
    let (mut m, mut c) = (0, 0);
    for &p in nbrs {
        if p == s || !normals.is_valid(p) {
            continue;
        }
        m += 1;
        if angle(ns, normals.normal(p)) > cfg.theta_high {
            c += 1;
        }
    }
    m > 0 && c as f64 / m as f64 > cfg.edge_ratio_k
}

/// Reference region growing: every region is the fixpoint of "a seed labels
/// its neighbors and promotes some of them to seeds", computed by sweeping
/// all seeds with linear-scan neighborhoods until nothing changes. Returns
/// per-point labels and the sorted edge seeds.
pub fn naive_grow(cloud: &PointCloud, normals: &NormalField, cfg: &SegmentationConfig) -> (Vec<Option<u32>>, Vec<usize>) {
    let n = cloud.len();
    let mut region: Vec<Option<u32>> = vec![None; n];
    let mut edges = Vec::new();
    let mut next = 0u32;
    let nbrs: Vec<Vec<usize>> = (0..n).map(|s| within(cloud, s, cfg.radius)).collect();
    let edge: Vec<bool> = (0..n)
        .map(|s| normals.is_valid(s) && naive_is_edge(&nbrs[s], normals, cfg, s))
        .collect();
    for start in 0..n {
        if region[start].is_some() || !normals.is_valid(start) {
            continue;
        }
        let r = next;
        next += 1;
        region[start] = Some(r);
        let mut is_seed = vec![false; n];
        is_seed[start] = true;
        loop {
            let mut changed = false;
            for s in 0..n {
                if !is_seed[s] {
                    continue;
                }
                for &p in &nbrs[s] {
                    if p == s || !normals.is_valid(p) || region[p].is_some_and(|l| l != r) {
                        continue;
                    }
                    let t = angle(normals.normal(s), normals.normal(p));
                    if t > cfg.theta_high {
                        continue;
                    }
                    if region[p].is_none() {
                        region[p] = Some(r);
                        changed = true;
                    }
                    if (t < cfg.theta_low || !edge[s]) && !is_seed[p] {
                        is_seed[p] = true;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        edges.extend((0..n).filter(|&s| is_seed[s] && edge[s]));
    }
    let mut sizes = vec![0usize; next as usize];
    for l in region.iter().flatten() {
        sizes[*l as usize] += 1;
    }
    let mut dense = vec![None; next as usize];
    let mut k = 0u32;
    for (r, &size) in sizes.iter().enumerate() {
        if size >= cfg.min_segment_size {
            dense[r] = Some(k);
            k += 1;
        }
    }
    let labels = region.into_iter().map(|l| l.and_then(|r| dense[r as usize])).collect();
    edges.sort_unstable();
    (labels, edges)
}

/// Re-checks one handle against the raw cloud, independently of the search
/// code. Returns a description of the first violated condition.
pub fn validate_handle(h: &GraspHandle, cloud: &PointCloud, g: &GripperModel) -> Result<(), String> {
    const TOL: f64 = 1e-9;
    for (name, v) in [("f", h.f), ("a", h.a), ("n", h.n)] {
        if (v.norm() - 1.0).abs() > 1e-9 {
            return Err(format!("axis {name} has norm {}", v.norm()));
        }
    }
    if h.f.dot(&h.a).abs() > 1e-9 || h.f.dot(&h.n).abs() > 1e-9 || h.a.dot(&h.n).abs() > 1e-9 {
        return Err("axes are not orthogonal".into());
    }
    if (h.f.cross(&h.a) - h.n).norm() > 1e-9 {
        return Err("frame is not right-handed".into());
    }
    if h.patch.is_empty() {
        return Err("empty patch".into());
    }
    let c = h.center;
    let coords = |i: usize| {
        let d = cloud.point(i) - c;
        (d.dot(&h.f), d.dot(&h.a), d.dot(&h.n))
    };
    // Everything the fingers could touch: inside the sphere and the slab.
    let slab: Vec<(usize, f64, f64)> = (0..cloud.len())
        .filter(|&i| (cloud.point(i) - c).norm() <= g.d / 2.0)
        .map(|i| (i, coords(i)))
        .filter(|(_, q)| q.1.abs() <= g.e / 2.0)
        .map(|(i, q)| (i, q.0, q.2))
        .collect();
    let top = slab.iter().map(|s| s.2).fold(f64::NEG_INFINITY, f64::max);
    let band: Vec<&(usize, f64, f64)> = slab.iter().filter(|s| s.2 >= top - g.l).collect();

    let patch: std::collections::HashSet<usize> = h.patch.iter().copied().collect();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut deepest = f64::INFINITY;
    for &i in &h.patch {
        let Some(s) = band.iter().find(|s| s.0 == i) else {
            return Err(format!("patch point {i} is outside the band"));
        };
        lo = lo.min(s.1);
        hi = hi.max(s.1);
        deepest = deepest.min(s.2);
    }
    if hi - lo >= g.d {
        return Err(format!("extent {} >= d", hi - lo));
    }
    if top - deepest > g.l + TOL {
        return Err(format!("depth {} > l", top - deepest));
    }
    if !(lo <= TOL && hi >= -TOL) {
        return Err("approach line misses the patch".into());
    }
    if hi + g.g > g.d / 2.0 + TOL || lo - g.g < -g.d / 2.0 - TOL {
        return Err("clearance leaves the search sphere".into());
    }
    for s in &band {
        let inside = s.1 >= lo && s.1 <= hi;
        if inside && !patch.contains(&s.0) {
            return Err(format!("band point {} inside the patch span is missing", s.0));
        }
        if (s.1 > hi && s.1 - hi < g.g) || (s.1 < lo && lo - s.1 < g.g) {
            return Err(format!("band point {} within g of the patch", s.0));
        }
    }
    let mean = h
        .patch
        .iter()
        .fold(Vector3::zeros(), |acc, &i| acc + cloud.point(i).coords)
        / h.patch.len() as f64;
    if (mean - h.position.coords).norm() > 1e-9 {
        return Err("position is not the patch centroid".into());
    }
    Ok(())
}

/// A small random scene (at most 2k points) of one to three primitives,
/// sampled uniformly at random so neighborhoods are irregular.
pub fn random_small_cloud(seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.random_range(1..=3);
    let mut objects = Vec::new();
    for k in 0..count {
        let shape = match rng.random_range(0..3) {
            0 => Shape::Cuboid {
                size: [rng.random_range(0.03..0.07), rng.random_range(0.03..0.07), rng.random_range(0.03..0.07)],
            },
            1 => Shape::Cylinder {
                radius: rng.random_range(0.015..0.03),
                height: rng.random_range(0.04..0.08),
            },
            _ => Shape::Sphere {
                radius: rng.random_range(0.02..0.035),
            },
        };
        let pose = Pose {
            position: [k as f64 * 0.05, rng.random_range(-0.01..0.01), 0.0],
            rpy: [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-3.0..3.0)],
        };
        objects.push(ObjectSpec {
            label: format!("o{k}"),
            shape,
            pose,
            graspable: true,
        });
    }
    let mut spec = SyntheticSceneSpec {
        name: format!("random_{seed}"),
        objects,
        density: rng.random_range(100_000.0..200_000.0),
        sensor: [0.05, -0.25, 0.3],
        noise_sigma: rng.random_range(0.0..0.002),
        occlusion: true,
        sampling: Sampling::Random,
        seed,
    };
    let (cloud, _) = surfgrasp::eval::synth_scene(&spec).unwrap();
    if cloud.len() <= 2_000 {
        return cloud;
    }
    spec.density *= 1_900.0 / cloud.len() as f64;
    let (cloud, _) = surfgrasp::eval::synth_scene(&spec).unwrap();
    assert!(cloud.len() <= 2_000, "{} points", cloud.len());
    cloud
}

/// How a segmentation of the cuboid fixture partitions its visible faces.
#[derive(Debug)]
pub struct FaceSplit {
    pub n_segments: usize,
    /// Lowest fraction of a segment's points on its majority face.
    pub min_purity: f64,
    /// Lowest fraction of a face covered by its best segment.
    pub min_coverage: f64,
}

impl FaceSplit {
    pub fn one_segment_per_face(&self) -> bool {
        self.n_segments == 3 && self.min_purity > 0.9 && self.min_coverage >= 0.9
    }

    pub fn fragmented(&self) -> bool {
        self.n_segments > 3 || self.min_coverage < 0.9
    }
}

pub fn face_split(scene: &SyntheticScene, labels: &[Option<u32>]) -> FaceSplit {
    let n_segments = labels.iter().flatten().map(|&l| l as usize + 1).max().unwrap_or(0);
    // counts[segment][piece]
    let mut counts = vec![[0usize; 6]; n_segments];
    let mut face_total = [0usize; 6];
    for (src, l) in scene.sources.iter().zip(labels) {
        face_total[src.piece as usize] += 1;
        if let Some(l) = l {
            counts[*l as usize][src.piece as usize] += 1;
        }
    }
    let min_purity = counts
        .iter()
        .map(|c| *c.iter().max().unwrap() as f64 / c.iter().sum::<usize>().max(1) as f64)
        .fold(1.0, f64::min);
    let min_coverage = (0..6)
        .filter(|&f| face_total[f] > 0)
        .map(|f| counts.iter().map(|c| c[f]).max().unwrap_or(0) as f64 / face_total[f] as f64)
        .fold(1.0, f64::min);
    FaceSplit {
        n_segments,
        min_purity,
        min_coverage,
    }
}

/// Distance from a point to the nearest edge of an axis-aligned cube with
/// half side `h` centered at the origin, for points near its surface.
pub fn cube_edge_distance(p: &Point3<f64>, h: f64) -> f64 {
    let mut d = [(p.x.abs() - h).abs(), (p.y.abs() - h).abs(), (p.z.abs() - h).abs()];
    d.sort_by(f64::total_cmp);
    (d[0] * d[0] + d[1] * d[1]).sqrt()
}

/// Nearest handle-frame axis deviation, allowing a sign flip.
pub fn axis_deviation(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    (a - b).norm().min((a + b).norm())
}
