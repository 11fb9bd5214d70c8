use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};

/// Centroid and principal axes of a point set, eigenvalues descending.
#[derive(Clone, Debug)]
pub(crate) struct Principal {
    pub centroid: Point3<f64>,
    pub eigenvalues: [f64; 3],
    pub axes: [Vector3<f64>; 3],
}

impl Principal {
    /// Fewer than 3 points, or the spread collapses onto a line or a point.
    pub fn is_degenerate(&self) -> bool {
        let [l0, l1, _] = self.eigenvalues;
        !(l0 > 0.0) || l1 <= 1e-12 * l0
    }
}

pub(crate) fn principal<'a>(points: impl Iterator<Item = &'a Point3<f64>> + Clone) -> Option<Principal> {
    let mut n = 0usize;
    let mut sum = Vector3::zeros();
    for p in points.clone() {
        sum += p.coords;
        n += 1;
    }
    if n == 0 {
        return None;
    }
    let centroid = Point3::from(sum / n as f64);
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    Some(Principal {
        centroid,
        eigenvalues: order.map(|k| eig.eigenvalues[k].max(0.0)),
        axes: order.map(|k| eig.eigenvectors.column(k).normalize()),
    })
}
