//! Local stencils, PCA normals and ghost points.

use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{Error, Result};
use crate::spatial::KdTree;
use crate::Vec3;

/// Neighbours used for the default ghost offset.
pub const GHOST_OFFSET_NEIGHBOURS: usize = 5;

/// Level constant `C` of the implicit surface.
pub const DEFAULT_LEVEL: f64 = 1.0;

/// A point of interest and its nearest neighbours (the point itself comes first).
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub center_index: usize,
    pub neighbor_indices: Vec<usize>,
    pub points: Vec<Vec3>,
}

impl Stencil {
    pub fn center(&self) -> Vec3 {
        self.points[0]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Mean distance from the centre to its `count` nearest neighbours.
    pub fn mean_neighbour_distance(&self, count: usize) -> f64 {
        let c = self.center();
        let others = &self.points[1..self.points.len().min(count + 1)];
        if others.is_empty() {
            return 0.0;
        }
        others.iter().map(|p| (p - c).norm()).sum::<f64>() / others.len() as f64
    }

    /// Default ghost offset: mean distance to the five nearest neighbours.
    pub fn default_offset(&self) -> f64 {
        self.mean_neighbour_distance(GHOST_OFFSET_NEIGHBOURS)
    }

    /// Smallest-variance direction of the stencil covariance (sign arbitrary).
    pub fn pca_normal(&self) -> Result<Vec3> {
        pca_normal(&self.points)
    }

    pub fn attach_ghosts(self, normal: Vec3, offset: f64, level: f64) -> Result<GhostStencil> {
        GhostStencil::new(self, normal, offset, level)
    }
}

/// The `k` nearest neighbours of point `center_index` (including itself).
pub fn knn_stencil(points: &[Vec3], tree: &KdTree, center_index: usize, k: usize) -> Result<Stencil> {
    if k == 0 || k > points.len() {
        return Err(Error::Domain(format!("stencil size {k} not in 1..={}", points.len())));
    }
    if center_index >= points.len() {
        return Err(Error::Domain(format!("center index {center_index} out of range")));
    }
    let center = points[center_index];
    let mut neighbor_indices = tree.knn(&center, k);
    // ties at distance zero cannot happen for distinct points, but keep the centre first
    if let Some(pos) = neighbor_indices.iter().position(|&i| i == center_index) {
        neighbor_indices[..=pos].rotate_right(1);
    } else {
        neighbor_indices.pop();
        neighbor_indices.insert(0, center_index);
    }
    let points = neighbor_indices.iter().map(|&i| points[i]).collect();
    Ok(Stencil { center_index, neighbor_indices, points })
}

pub fn pca_normal(points: &[Vec3]) -> Result<Vec3> {
    if points.len() < 3 {
        return Err(Error::DegenerateStencil(format!("{} points cannot define a plane", points.len())));
    }
    let mean = points.iter().fold(Vec3::zeros(), |a, p| a + p) / points.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    cov /= points.len() as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (low, mid, high) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    if !(high > 0.0) || mid <= 1e-12 * high || (mid - low) <= 1e-14 * high {
        return Err(Error::DegenerateStencil(format!(
            "covariance eigenvalues {low:.3e}, {mid:.3e}, {high:.3e} do not fix a normal"
        )));
    }
    Ok(eig.eigenvectors.column(order[0]).normalize())
}

/// `raw` flipped, if needed, to have a nonnegative dot product with `reference`.
pub fn orient_normal(raw: Vec3, reference: &Vec3) -> Vec3 {
    if raw.dot(reference) >= 0.0 {
        raw
    } else {
        -raw
    }
}

/// Stencil with the two ghost points `p0 ± h n̂` and the interpolation data
/// `Ξ = stencil ∪ {p0 + h n̂, p0 − h n̂}` with levels `(C, …, C, C + h, C − h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GhostStencil {
    pub stencil: Stencil,
    pub normal: Vec3,
    pub offset: f64,
    pub level: f64,
    pub ghost_plus: Vec3,
    pub ghost_minus: Vec3,
}

impl GhostStencil {
    pub fn new(stencil: Stencil, normal: Vec3, offset: f64, level: f64) -> Result<Self> {
        if !(offset > 0.0) || !offset.is_finite() {
            return Err(Error::Geometry(format!("ghost offset must be positive, got {offset}")));
        }
        let n = normal.normalize();
        let p0 = stencil.center();
        let ghost_plus = p0 + n * offset;
        let ghost_minus = p0 - n * offset;
        let tol = 1e-9 * offset;
        for g in [ghost_plus, ghost_minus] {
            if stencil.points.iter().any(|p| (p - g).norm() <= tol) {
                return Err(Error::Geometry(format!("ghost point {g:?} coincides with a stencil point")));
            }
        }
        Ok(Self { stencil, normal: n, offset, level, ghost_plus, ghost_minus })
    }

    /// Interpolation nodes: surface points, then `ghost_plus`, then `ghost_minus`.
    pub fn nodes(&self) -> Vec<Vec3> {
        let mut v = self.stencil.points.clone();
        v.push(self.ghost_plus);
        v.push(self.ghost_minus);
        v
    }

    /// Constraint values matching [`Self::nodes`].
    pub fn rhs(&self) -> Vec<f64> {
        let mut b = vec![self.level; self.stencil.len()];
        b.push(self.level + self.offset);
        b.push(self.level - self.offset);
        b
    }

    pub fn center(&self) -> Vec3 {
        self.stencil.center()
    }
}

/// Interpolation data with a ghost pair at every point (`3n` nodes).
pub fn full_ghost_set(points: &[Vec3], normals: &[Vec3], offset: f64, level: f64) -> Result<(Vec<Vec3>, Vec<f64>)> {
    if points.len() != normals.len() {
        return Err(Error::Domain("points and normals differ in length".into()));
    }
    if !(offset > 0.0) {
        return Err(Error::Geometry(format!("ghost offset must be positive, got {offset}")));
    }
    let n = points.len();
    let mut nodes = points.to_vec();
    let mut rhs = vec![level; n];
    for (sign, shift) in [(1.0, offset), (-1.0, -offset)] {
        for (p, nrm) in points.iter().zip(normals) {
            nodes.push(p + nrm.normalize() * (sign * offset));
            rhs.push(level + shift);
        }
    }
    Ok((nodes, rhs))
}
