//! Synthetic single-view scenes built from primitives.
//!
//! Surfaces are sampled uniformly at a fixed areal density, then culled to
//! what a pinhole sensor at `sensor` could see: back faces are dropped and,
//! with occlusion on, any point whose line of sight hits another primitive.

use std::f64::consts::PI;

use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::annotation::{Membership, ObjectRecord, SceneAnnotation};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    /// Box centered on its pose, edge lengths along local x, y, z.
    Cuboid { size: [f64; 3] },
    /// Axis along local z, centered on its pose.
    Cylinder { radius: f64, height: f64 },
    Sphere { radius: f64 },
    /// Two-sided rectangle in the local xy plane.
    Plane { size: [f64; 2] },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: [f64; 3],
    /// Roll, pitch, yaw in radians; `R = Rz(yaw) Ry(pitch) Rx(roll)`.
    #[serde(default)]
    pub rpy: [f64; 3],
}

impl Pose {
    pub fn at(x: f64, y: f64, z: f64) -> Self {
        Self {
            position: [x, y, z],
            rpy: [0.0; 3],
        }
    }

    pub fn isometry(&self) -> Isometry3<f64> {
        let [x, y, z] = self.position;
        let [r, p, w] = self.rpy;
        Isometry3::from_parts(Translation3::new(x, y, z), UnitQuaternion::from_euler_angles(r, p, w))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub label: String,
    pub shape: Shape,
    #[serde(default)]
    pub pose: Pose,
    /// Supports and clutter that should not be counted as targets.
    #[serde(default = "yes")]
    pub graspable: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSceneSpec {
    pub name: String,
    pub objects: Vec<ObjectSpec>,
    /// Samples per square meter of surface.
    pub density: f64,
    pub sensor: [f64; 3],
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "yes")]
    pub occlusion: bool,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub seed: u64,
}

/// How surfaces are populated before visibility culling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Regular lattice at spacing `1/sqrt(density)`, like a sensor raster.
    #[default]
    Grid,
    /// Independent uniform samples, `round(area * density)` per surface.
    Random,
}

impl SyntheticSceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.objects.is_empty() {
            return Err(Error::InvalidArgument(format!("scene '{}' has no objects", self.name)));
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return Err(Error::InvalidArgument(format!("density must be > 0, got {}", self.density)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise_sigma must be >= 0, got {}", self.noise_sigma)));
        }
        if !self.sensor.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("sensor position must be finite".into()));
        }
        for o in &self.objects {
            let dims: Vec<f64> = match o.shape {
                Shape::Cuboid { size } => size.to_vec(),
                Shape::Cylinder { radius, height } => vec![radius, height],
                Shape::Sphere { radius } => vec![radius],
                Shape::Plane { size } => size.to_vec(),
            };
            if !dims.iter().all(|v| *v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("object '{}' has a non-positive dimension", o.label)));
            }
            if !o.pose.position.iter().chain(&o.pose.rpy).all(|v| v.is_finite()) {
                return Err(Error::InvalidArgument(format!("object '{}' has a non-finite pose", o.label)));
            }
        }
        Ok(())
    }
}

/// Where a generated point came from: object index in the spec and the
/// surface piece of that primitive (cuboid faces are 0..6 as -x, +x, -y,
/// +y, -z, +z; cylinders are side, bottom, top).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PointSource {
    pub object: usize,
    pub piece: u8,
}

#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub cloud: PointCloud,
    pub annotation: SceneAnnotation,
    pub sources: Vec<PointSource>,
}

/// Generates the cloud and its exact ground truth.
pub fn synth_scene(spec: &SyntheticSceneSpec) -> Result<(PointCloud, SceneAnnotation)> {
    let s = synth_scene_detailed(spec)?;
    Ok((s.cloud, s.annotation))
}

pub fn synth_scene_detailed(spec: &SyntheticSceneSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sensor = Point3::from(spec.sensor);
    let placed: Vec<(Shape, Isometry3<f64>)> = spec.objects.iter().map(|o| (o.shape, o.pose.isometry())).collect();

    let mut points = Vec::new();
    let mut sources = Vec::new();
    for (k, (shape, iso)) in placed.iter().enumerate() {
        for (piece, local, normal) in sample_surface(shape, spec.density, spec.sampling, &mut rng) {
            let p = iso * local;
            let n = iso.rotation * normal;
            let to_sensor = sensor - p;
            let facing = if matches!(shape, Shape::Plane { .. }) {
                n.dot(&to_sensor).abs() > 0.0
            } else {
                n.dot(&to_sensor) > 0.0
            };
            if !facing {
                continue;
            }
            if spec.occlusion && occluded(&p, &sensor, k, &placed) {
                continue;
            }
            points.push(p);
            sources.push(PointSource { object: k, piece });
        }
    }

    if spec.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for p in &mut points {
            *p += Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
        }
    }

    let mut records = Vec::new();
    for (k, o) in spec.objects.iter().enumerate() {
        if !o.graspable {
            continue;
        }
        let members: Vec<usize> = sources
            .iter()
            .enumerate()
            .filter(|(_, s)| s.object == k)
            .map(|(i, _)| i)
            .collect();
        if !members.is_empty() {
            records.push(ObjectRecord {
                id: k as u32,
                label: o.label.clone(),
                members: Membership::Indices(members),
            });
        }
    }
    let cloud = PointCloud::from_points(points).with_viewpoint(sensor);
    Ok(SyntheticScene {
        cloud,
        annotation: SceneAnnotation::new(spec.name.clone(), records),
        sources,
    })
}

fn count_for(area: f64, density: f64) -> usize {
    (area * density).round() as usize
}

/// Cell centers of `n` equal cells across `[-half, half]`.
fn lattice(half: f64, spacing: f64) -> impl Iterator<Item = f64> {
    let n = ((2.0 * half / spacing).round() as usize).max(1);
    let step = 2.0 * half / n as f64;
    (0..n).map(move |k| -half + (k as f64 + 0.5) * step)
}

/// Surface samples with outward normals, in the primitive's local frame.
fn sample_surface(shape: &Shape, density: f64, sampling: Sampling, rng: &mut impl Rng) -> Vec<(u8, Point3<f64>, Vector3<f64>)> {
    match sampling {
        Sampling::Grid => grid_surface(shape, 1.0 / density.sqrt()),
        Sampling::Random => random_surface(shape, density, rng),
    }
}

fn grid_surface(shape: &Shape, s: f64) -> Vec<(u8, Point3<f64>, Vector3<f64>)> {
    let mut out = Vec::new();
    let disc = |out: &mut Vec<_>, piece: u8, radius: f64, z: f64, sign: f64| {
        let rings = ((radius / s).round() as usize).max(1);
        for k in 0..rings {
            let rho = (k as f64 + 0.5) * radius / rings as f64;
            let m = ((2.0 * PI * rho / s).round() as usize).max(1);
            for j in 0..m {
                let (sn, c) = (2.0 * PI * (j as f64 + 0.5) / m as f64).sin_cos();
                out.push((piece, Point3::new(rho * c, rho * sn, z), Vector3::new(0.0, 0.0, sign)));
            }
        }
    };
    match *shape {
        Shape::Cuboid { size } => {
            let h = [size[0] / 2.0, size[1] / 2.0, size[2] / 2.0];
            for axis in 0..3 {
                let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                for (side, sign) in [(0u8, -1.0), (1u8, 1.0)] {
                    let mut normal = Vector3::zeros();
                    normal[axis] = sign;
                    for a in lattice(h[u], s) {
                        for b in lattice(h[v], s) {
                            let mut p = Point3::origin();
                            p[axis] = sign * h[axis];
                            p[u] = a;
                            p[v] = b;
                            out.push((axis as u8 * 2 + side, p, normal));
                        }
                    }
                }
            }
        }
        Shape::Cylinder { radius, height } => {
            let m = ((2.0 * PI * radius / s).round() as usize).max(3);
            for j in 0..m {
                let (sn, c) = (2.0 * PI * (j as f64 + 0.5) / m as f64).sin_cos();
                for z in lattice(height / 2.0, s) {
                    out.push((0, Point3::new(radius * c, radius * sn, z), Vector3::new(c, sn, 0.0)));
                }
            }
            disc(&mut out, 1, radius, -height / 2.0, -1.0);
            disc(&mut out, 2, radius, height / 2.0, 1.0);
        }
        Shape::Sphere { radius } => {
            // Fibonacci lattice.
            let n = ((4.0 * PI * radius * radius / (s * s)).round() as usize).max(1);
            let golden = PI * (3.0 - 5f64.sqrt());
            for k in 0..n {
                let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                let rho = (1.0 - z * z).sqrt();
                let (sn, c) = (golden * k as f64).sin_cos();
                let d = Vector3::new(rho * c, rho * sn, z);
                out.push((0, Point3::from(d * radius), d));
            }
        }
        Shape::Plane { size } => {
            for x in lattice(size[0] / 2.0, s) {
                for y in lattice(size[1] / 2.0, s) {
                    out.push((0, Point3::new(x, y, 0.0), Vector3::z()));
                }
            }
        }
    }
    out
}

fn random_surface(shape: &Shape, density: f64, rng: &mut impl Rng) -> Vec<(u8, Point3<f64>, Vector3<f64>)> {
    let mut out = Vec::new();
    match *shape {
        Shape::Cuboid { size } => {
            let h = [size[0] / 2.0, size[1] / 2.0, size[2] / 2.0];
            for axis in 0..3 {
                let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                for (side, sign) in [(0u8, -1.0), (1u8, 1.0)] {
                    let piece = axis as u8 * 2 + side;
                    let mut normal = Vector3::zeros();
                    normal[axis] = sign;
                    for _ in 0..count_for(size[u] * size[v], density) {
                        let mut p = Point3::origin();
                        p[axis] = sign * h[axis];
                        p[u] = rng.random_range(-h[u]..=h[u]);
                        p[v] = rng.random_range(-h[v]..=h[v]);
                        out.push((piece, p, normal));
                    }
                }
            }
        }
        Shape::Cylinder { radius, height } => {
            for _ in 0..count_for(2.0 * PI * radius * height, density) {
                let t = rng.random_range(0.0..2.0 * PI);
                let z = rng.random_range(-height / 2.0..=height / 2.0);
                let (s, c) = t.sin_cos();
                out.push((0, Point3::new(radius * c, radius * s, z), Vector3::new(c, s, 0.0)));
            }
            for (piece, sign) in [(1u8, -1.0), (2u8, 1.0)] {
                for _ in 0..count_for(PI * radius * radius, density) {
                    let rho = radius * rng.random::<f64>().sqrt();
                    let t = rng.random_range(0.0..2.0 * PI);
                    let (s, c) = t.sin_cos();
                    out.push((
                        piece,
                        Point3::new(rho * c, rho * s, sign * height / 2.0),
                        Vector3::new(0.0, 0.0, sign),
                    ));
                }
            }
        }
        Shape::Sphere { radius } => {
            let gauss = Normal::new(0.0, 1.0).expect("unit normal");
            for _ in 0..count_for(4.0 * PI * radius * radius, density) {
                let d = loop {
                    let v = Vector3::new(gauss.sample(rng), gauss.sample(rng), gauss.sample(rng));
                    let n = v.norm();
                    if n > 1e-12 {
                        break v / n;
                    }
                };
                out.push((0, Point3::from(d * radius), d));
            }
        }
        Shape::Plane { size } => {
            for _ in 0..count_for(size[0] * size[1], density) {
                let x = rng.random_range(-size[0] / 2.0..=size[0] / 2.0);
                let y = rng.random_range(-size[1] / 2.0..=size[1] / 2.0);
                out.push((0, Point3::new(x, y, 0.0), Vector3::z()));
            }
        }
    }
    out
}

const RAY_EPS: f64 = 1e-9;

/// True if the open segment from `p` to the sensor passes through any
/// primitive other than the one `p` was sampled on. Convex primitives never
/// occlude their own front-facing points.
fn occluded(p: &Point3<f64>, sensor: &Point3<f64>, own: usize, placed: &[(Shape, Isometry3<f64>)]) -> bool {
    let dir = sensor - p;
    let len = dir.norm();
    if len <= RAY_EPS {
        return false;
    }
    let dir = dir / len;
    placed.iter().enumerate().any(|(k, (shape, iso))| {
        if k == own {
            return false;
        }
        let o = iso.inverse_transform_point(p);
        let u = iso.inverse_transform_vector(&dir);
        match ray_interval(shape, &o, &u) {
            Some((t0, t1)) => t0.max(RAY_EPS) < t1.min(len - RAY_EPS),
            None => false,
        }
    })
}

/// Parameter interval where the ray `o + t u` lies inside the solid (for a
/// plane, the single crossing point).
fn ray_interval(shape: &Shape, o: &Point3<f64>, u: &Vector3<f64>) -> Option<(f64, f64)> {
    match *shape {
        Shape::Cuboid { size } => {
            let mut t0 = f64::NEG_INFINITY;
            let mut t1 = f64::INFINITY;
            for k in 0..3 {
                let h = size[k] / 2.0;
                if u[k].abs() < 1e-15 {
                    if o[k].abs() > h {
                        return None;
                    }
                } else {
                    let a = (-h - o[k]) / u[k];
                    let b = (h - o[k]) / u[k];
                    t0 = t0.max(a.min(b));
                    t1 = t1.min(a.max(b));
                }
            }
            (t0 <= t1).then_some((t0, t1))
        }
        Shape::Cylinder { radius, height } => {
            let (mut t0, mut t1) = slab_interval(o.z, u.z, height / 2.0)?;
            let a = u.x * u.x + u.y * u.y;
            let c = o.x * o.x + o.y * o.y - radius * radius;
            if a < 1e-15 {
                if c > 0.0 {
                    return None;
                }
            } else {
                let b = o.x * u.x + o.y * u.y;
                let disc = b * b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let s = disc.sqrt();
                t0 = t0.max((-b - s) / a);
                t1 = t1.min((-b + s) / a);
            }
            (t0 <= t1).then_some((t0, t1))
        }
        Shape::Sphere { radius } => {
            let b = o.coords.dot(u);
            let c = o.coords.norm_squared() - radius * radius;
            let disc = b * b - c;
            if disc < 0.0 {
                return None;
            }
            let s = disc.sqrt();
            Some((-b - s, -b + s))
        }
        Shape::Plane { size } => {
            if u.z.abs() < 1e-15 {
                return None;
            }
            let t = -o.z / u.z;
            let x = o.x + t * u.x;
            let y = o.y + t * u.y;
            (x.abs() <= size[0] / 2.0 && y.abs() <= size[1] / 2.0).then_some((t - 1e-12, t + 1e-12))
        }
    }
}

fn slab_interval(o: f64, u: f64, h: f64) -> Option<(f64, f64)> {
    if u.abs() < 1e-15 {
        return (o.abs() <= h).then_some((f64::NEG_INFINITY, f64::INFINITY));
    }
    let a = (-h - o) / u;
    let b = (h - o) / u;
    Some((a.min(b), a.max(b)))
}

/// A 10 cm cube seen from above one corner, so exactly three faces
/// (+x, +y, +z) are visible.
pub fn cuboid_fixture(density: f64, noise_sigma: f64, seed: u64) -> SyntheticSceneSpec {
    SyntheticSceneSpec {
        name: "cuboid".into(),
        objects: vec![ObjectSpec {
            label: "cube".into(),
            shape: Shape::Cuboid { size: [0.1, 0.1, 0.1] },
            pose: Pose::default(),
            graspable: true,
        }],
        density,
        sensor: [0.35, 0.4, 0.45],
        noise_sigma,
        occlusion: true,
        sampling: Sampling::Grid,
        seed,
    }
}

/// Two boxes side by side on a table, seen from the front. The tall target
/// (5 cm wide, 16 cm high) has a shorter, wider neighbor (7 cm wide, 10 cm
/// high) whose front face sits 1.3 cm behind the target's: far enough to
/// segment separately, close enough to fall inside the grasp depth band.
/// `gap` is the free space between them along x; 0 means touching.
pub fn adjacent_boxes(gap: f64, density: f64, noise_sigma: f64, seed: u64) -> SyntheticSceneSpec {
    SyntheticSceneSpec {
        name: if gap > 0.0 { "boxes_apart".into() } else { "boxes_touching".into() },
        objects: vec![
            ObjectSpec {
                label: "table".into(),
                shape: Shape::Plane { size: [0.4, 0.3] },
                pose: Pose::at(0.0, 0.0, 0.0),
                graspable: false,
            },
            ObjectSpec {
                label: "target".into(),
                shape: Shape::Cuboid { size: [0.05, 0.04, 0.16] },
                pose: Pose::at(0.0, 0.0, 0.08),
                graspable: true,
            },
            ObjectSpec {
                label: "neighbor".into(),
                shape: Shape::Cuboid { size: [0.07, 0.03, 0.10] },
                pose: Pose::at(0.025 + gap + 0.035, -0.007 + 0.015, 0.05),
                graspable: true,
            },
        ],
        density,
        sensor: [0.0, -0.6, 0.12],
        noise_sigma,
        occlusion: true,
        sampling: Sampling::Grid,
        seed,
    }
}

/// Parameters of the randomized tabletop clutter generator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClutterParams {
    pub min_objects: usize,
    pub max_objects: usize,
    /// Clearance between neighbors is drawn from `[lo, hi]` meters.
    pub clearance: (f64, f64),
    pub density: f64,
    pub noise_sigma: f64,
}

impl ClutterParams {
    /// Clearances sampled around a gripper clearance `g`.
    pub fn around(g: f64) -> Self {
        Self {
            min_objects: 5,
            max_objects: 9,
            clearance: (0.5 * g, 3.0 * g),
            density: 80_000.0,
            noise_sigma: 0.001,
        }
    }
}

/// Footprint half-width along x of an object, used to space rows.
fn half_width_x(o: &ObjectSpec) -> f64 {
    match o.shape {
        Shape::Cuboid { size } => size[0] / 2.0,
        Shape::Cylinder { radius, .. } => radius,
        Shape::Sphere { radius } => radius,
        Shape::Plane { size } => size[0] / 2.0,
    }
}

fn half_depth_y(o: &ObjectSpec) -> f64 {
    match o.shape {
        Shape::Cuboid { size } => size[1] / 2.0,
        Shape::Cylinder { radius, height } => {
            if o.pose.rpy[0] != 0.0 {
                height / 2.0
            } else {
                radius
            }
        }
        Shape::Sphere { radius } => radius,
        Shape::Plane { size } => size[1] / 2.0,
    }
}

/// One cluttered tabletop: boxes, standing cylinders and lying cylinders in
/// two or three rows, viewed obliquely from above the front edge.
pub fn clutter_scene(name: &str, params: &ClutterParams, seed: u64) -> SyntheticSceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(params.min_objects..=params.max_objects);
    let rows = if n <= 6 { 2 } else { 3 };
    let mut objects = Vec::with_capacity(n + 1);
    let (clo, chi) = params.clearance;

    let mut row_y = -0.08;
    let mut placed = 0;
    for r in 0..rows {
        let in_row = (n - placed) / (rows - r);
        let mut row: Vec<ObjectSpec> = (0..in_row).map(|_| random_object(&mut rng)).collect();
        let depth = row.iter().map(half_depth_y).fold(0.0, f64::max);
        let mut x = 0.0;
        for (k, o) in row.iter_mut().enumerate() {
            let hw = half_width_x(o);
            if k > 0 {
                x += rng.random_range(clo..=chi);
            }
            x += hw;
            o.pose.position[0] = x;
            o.pose.position[1] = row_y + depth;
            x += hw;
        }
        let shift = x / 2.0;
        for o in &mut row {
            o.pose.position[0] -= shift;
            o.label = format!("{}_{}", o.label, placed);
            placed += 1;
        }
        objects.extend(row);
        row_y += 2.0 * depth + rng.random_range(clo..=chi);
    }
    objects.insert(
        0,
        ObjectSpec {
            label: "table".into(),
            shape: Shape::Plane { size: [0.5, 0.4] },
            pose: Pose::at(0.0, 0.0, 0.0),
            graspable: false,
        },
    );
    SyntheticSceneSpec {
        name: name.into(),
        objects,
        density: params.density,
        sensor: [0.05, -0.45, 0.55],
        noise_sigma: params.noise_sigma,
        occlusion: true,
        sampling: Sampling::Grid,
        seed: seed ^ 0x5eed,
    }
}

fn random_object(rng: &mut impl Rng) -> ObjectSpec {
    match rng.random_range(0..3) {
        0 => {
            let w = rng.random_range(0.03..=0.05);
            let dpt = rng.random_range(0.03..=0.05);
            let h = rng.random_range(0.03..=0.08);
            ObjectSpec {
                label: "box".into(),
                shape: Shape::Cuboid { size: [w, dpt, h] },
                pose: Pose::at(0.0, 0.0, h / 2.0),
                graspable: true,
            }
        }
        1 => {
            let radius = rng.random_range(0.015..=0.025);
            let height = rng.random_range(0.06..=0.12);
            ObjectSpec {
                label: "can".into(),
                shape: Shape::Cylinder { radius, height },
                pose: Pose::at(0.0, 0.0, height / 2.0),
                graspable: true,
            }
        }
        _ => {
            let radius = rng.random_range(0.015..=0.025);
            let height = rng.random_range(0.06..=0.10);
            // Lying along y.
            ObjectSpec {
                label: "bottle".into(),
                shape: Shape::Cylinder { radius, height },
                pose: Pose {
                    position: [0.0, 0.0, radius],
                    rpy: [PI / 2.0, 0.0, 0.0],
                },
                graspable: true,
            }
        }
    }
}

/// `count` clutter scenes named `clutter_00`, `clutter_01`, ...
pub fn clutter_suite(count: usize, params: &ClutterParams, seed: u64) -> Vec<SyntheticSceneSpec> {
    (0..count)
        .map(|k| clutter_scene(&format!("clutter_{k:02}"), params, seed.wrapping_mul(1000).wrapping_add(k as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn empty_spec_is_rejected() {
        let mut s = cuboid_fixture(1e5, 0.0, 1);
        s.objects.clear();
        assert!(synth_scene(&s).is_err());
        let mut s = cuboid_fixture(1e5, 0.0, 1);
        s.density = 0.0;
        assert!(synth_scene(&s).is_err());
    }

    #[test]
    fn cube_from_corner_shows_three_faces() {
        let mut spec = cuboid_fixture(1e5, 0.0, 3);
        let s = synth_scene_detailed(&spec).unwrap();
        let faces: HashSet<u8> = s.sources.iter().map(|p| p.piece).collect();
        assert_eq!(faces, HashSet::from([1, 3, 5]));
        // 3 faces of 0.01 m^2 each: a 32 x 32 lattice per face.
        assert_eq!(s.cloud.len(), 3 * 32 * 32);
        spec.sampling = Sampling::Random;
        assert_eq!(synth_scene(&spec).unwrap().0.len(), 3000);
    }

    #[test]
    fn occluded_object_behind_wall_is_absent() {
        let spec = SyntheticSceneSpec {
            name: "wall".into(),
            objects: vec![
                ObjectSpec {
                    label: "wall".into(),
                    shape: Shape::Cuboid { size: [1.0, 0.01, 1.0] },
                    pose: Pose::at(0.0, 0.0, 0.0),
                    graspable: true,
                },
                ObjectSpec {
                    label: "hidden".into(),
                    shape: Shape::Sphere { radius: 0.05 },
                    pose: Pose::at(0.0, 0.2, 0.0),
                    graspable: true,
                },
            ],
            density: 2e4,
            sensor: [0.0, -1.0, 0.0],
            noise_sigma: 0.0,
            occlusion: true,
            sampling: Sampling::Random,
            seed: 0,
        };
        let (_, ann) = synth_scene(&spec).unwrap();
        assert_eq!(ann.objects.len(), 1);
        let (cloud, ann) = synth_scene(&SyntheticSceneSpec {
            occlusion: false,
            ..spec
        })
        .unwrap();
        assert_eq!(ann.objects.len(), 2);
        assert!(ann.resolve(&cloud).is_ok());
    }

    #[test]
    fn cylinder_ray_interval_matches_geometry() {
        let shape = Shape::Cylinder { radius: 1.0, height: 2.0 };
        let (t0, t1) = ray_interval(&shape, &Point3::new(-5.0, 0.0, 0.0), &Vector3::x()).unwrap();
        assert!((t0 - 4.0).abs() < 1e-12 && (t1 - 6.0).abs() < 1e-12);
        assert!(ray_interval(&shape, &Point3::new(-5.0, 0.0, 1.5), &Vector3::x()).is_none());
        let (t0, t1) = ray_interval(&shape, &Point3::new(0.0, 0.0, -5.0), &Vector3::z()).unwrap();
        assert!((t0 - 4.0).abs() < 1e-12 && (t1 - 6.0).abs() < 1e-12);
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = clutter_scene("c", &ClutterParams::around(0.012), 7);
        let (a, _) = synth_scene(&spec).unwrap();
        let (b, _) = synth_scene(&spec).unwrap();
        assert_eq!(a.points(), b.points());
    }

    #[test]
    fn clutter_scenes_have_requested_object_counts() {
        let p = ClutterParams::around(0.012);
        for spec in clutter_suite(10, &p, 1) {
            let graspable = spec.objects.iter().filter(|o| o.graspable).count();
            assert!((5..=9).contains(&graspable), "{graspable}");
        }
    }
}
