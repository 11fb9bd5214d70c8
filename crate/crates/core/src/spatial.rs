//! Exact fixed-radius and k-nearest neighbor search over a static cloud.
//!
//! The index is a k-d tree with bounding boxes stored per node. Queries are
//! exact: a radius query returns precisely `{i : |q - p_i| <= r}` using the
//! same squared-distance expression as a linear scan would.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Point3;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

const DEFAULT_LEAF_SIZE: usize = 16;

#[derive(Clone, Debug)]
struct Node {
    lo: [f64; 3],
    hi: [f64; 3],
    kind: NodeKind,
}

#[derive(Clone, Debug)]
enum NodeKind {
    Leaf { start: usize, end: usize },
    Split { left: usize, right: usize },
}

#[derive(Clone, Debug)]
pub struct NeighborIndex {
    points: Vec<[f64; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
    leaf_size: usize,
}

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[inline]
fn box_dist2(q: &[f64; 3], lo: &[f64; 3], hi: &[f64; 3]) -> f64 {
    let mut d = 0.0;
    for k in 0..3 {
        let e = if q[k] < lo[k] {
            lo[k] - q[k]
        } else if q[k] > hi[k] {
            q[k] - hi[k]
        } else {
            0.0
        };
        d += e * e;
    }
    d
}

impl NeighborIndex {
    pub fn build(cloud: &PointCloud) -> Result<Self> {
        Self::from_points(cloud.points())
    }

    pub fn from_points(points: &[Point3<f64>]) -> Result<Self> {
        Self::with_leaf_size(points, DEFAULT_LEAF_SIZE)
    }

    pub fn with_leaf_size(points: &[Point3<f64>], leaf_size: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument(
                "cannot index an empty cloud".into(),
            ));
        }
        let leaf_size = leaf_size.max(1);
        let points: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        let mut index = Self {
            order: (0..points.len()).collect(),
            points,
            nodes: Vec::new(),
            leaf_size,
        };
        index.build_node(0, index.points.len());
        Ok(index)
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            let p = &self.points[i];
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            lo,
            hi,
            kind: NodeKind::Leaf { start, end },
        });
        let spread = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        if end - start <= self.leaf_size || spread.iter().all(|&s| s == 0.0) {
            return id;
        }
        let axis = (0..3)
            .max_by(|&a, &b| spread[a].total_cmp(&spread[b]))
            .unwrap_or(0);
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis]
                .total_cmp(&points[b][axis])
                .then(a.cmp(&b))
        });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id].kind = NodeKind::Split { left, right };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    /// Indices of every point within distance `r` of `q` (inclusive), in
    /// unspecified order.
    pub fn radius_neighbors(&self, q: &Point3<f64>, r: f64) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        self.radius_neighbors_into(q, r, &mut out)?;
        Ok(out)
    }

    /// Like [`radius_neighbors`](Self::radius_neighbors) but reuses `out`,
    /// which is cleared first.
    pub fn radius_neighbors_into(&self, q: &Point3<f64>, r: f64, out: &mut Vec<usize>) -> Result<()> {
        if !(r > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "search radius must be > 0, got {r}"
            )));
        }
        out.clear();
        let q = [q.x, q.y, q.z];
        let r2 = r * r;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if box_dist2(&q, &node.lo, &node.hi) > r2 {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    out.extend(
                        self.order[start..end]
                            .iter()
                            .copied()
                            .filter(|&i| dist2(&q, &self.points[i]) <= r2),
                    );
                }
                NodeKind::Split { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        Ok(())
    }

    /// The `k` closest points, nearest first, ties broken by lower index.
    /// Returns every point when the cloud holds fewer than `k`.
    pub fn k_nearest(&self, q: &Point3<f64>, k: usize) -> Vec<usize> {
        if k == 0 {
            return Vec::new();
        }
        #[derive(PartialEq)]
        struct Cand(f64, usize);
        impl Eq for Cand {}
        impl PartialOrd for Cand {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Cand {
            fn cmp(&self, other: &Self) -> Ordering {
                self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
            }
        }

        let q = [q.x, q.y, q.z];
        let mut heap: BinaryHeap<Cand> = BinaryHeap::with_capacity(k + 1);
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            let bd = box_dist2(&q, &node.lo, &node.hi);
            if heap.len() == k && bd > heap.peek().map_or(f64::INFINITY, |c| c.0) {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    for &i in &self.order[start..end] {
                        let cand = Cand(dist2(&q, &self.points[i]), i);
                        if heap.len() < k {
                            heap.push(cand);
                        } else if cand < *heap.peek().unwrap() {
                            heap.pop();
                            heap.push(cand);
                        }
                    }
                }
                NodeKind::Split { left, right } => {
                    // Visit the nearer child first so the bound tightens early.
                    let dl = box_dist2(&q, &self.nodes[left].lo, &self.nodes[left].hi);
                    let dr = box_dist2(&q, &self.nodes[right].lo, &self.nodes[right].hi);
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        heap.into_sorted_vec().into_iter().map(|c| c.1).collect()
    }
}
