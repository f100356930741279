//! Synthetic test surfaces with analytic normals and curvatures.

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::differential::{frame_from_derivatives, SurfaceFrame};
use crate::error::{Error, Result};
use crate::halton::halton_2d;
use crate::spatial::KdTree;
use crate::Vec3;

/// Closed implicit surfaces `F(x) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ImplicitSurface {
    /// Semi-axes `a, b, c`.
    Ellipsoid { a: f64, b: f64, c: f64 },
    /// Major radius `major`, minor radius `minor`.
    Torus { major: f64, minor: f64 },
    /// Squareness `s ∈ [0, 1]` and radius `r`; `s = 0` is the sphere of radius `r`.
    Sphube { s: f64, r: f64 },
}

impl ImplicitSurface {
    pub fn ellipsoid(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::Ellipsoid { a, b, c }.validated()
    }

    pub fn torus(major: f64, minor: f64) -> Result<Self> {
        Self::Torus { major, minor }.validated()
    }

    pub fn sphube(s: f64, r: f64) -> Result<Self> {
        Self::Sphube { s, r }.validated()
    }

    pub fn unit_sphere() -> Self {
        Self::Sphube { s: 0.0, r: 1.0 }
    }

    pub fn validated(self) -> Result<Self> {
        let ok = match self {
            Self::Ellipsoid { a, b, c } => a > 0.0 && b > 0.0 && c > 0.0,
            Self::Torus { major, minor } => major > minor && minor > 0.0,
            Self::Sphube { s, r } => r > 0.0 && (0.0..=1.0).contains(&s),
        };
        if ok && self.params().iter().all(|p| p.is_finite()) {
            Ok(self)
        } else {
            Err(Error::Domain(format!("invalid surface parameters: {self:?}")))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Ellipsoid { .. } => "ellipsoid",
            Self::Torus { .. } => "torus",
            Self::Sphube { .. } => "sphube",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Self::Ellipsoid { a, b, c } => vec![a, b, c],
            Self::Torus { major, minor } => vec![major, minor],
            Self::Sphube { s, r } => vec![s, r],
        }
    }

    /// Label such as `torus(1,0.2)`.
    pub fn label(&self) -> String {
        let p: Vec<String> = self.params().iter().map(|v| format!("{v}")).collect();
        format!("{}({})", self.name(), p.join(";"))
    }

    pub fn implicit_value(&self, p: &Vec3) -> f64 {
        let (x, y, z) = (p.x, p.y, p.z);
        match *self {
            Self::Ellipsoid { a, b, c } => x * x / (a * a) + y * y / (b * b) + z * z / (c * c) - 1.0,
            Self::Torus { major, minor } => {
                let rho = (x * x + y * y).sqrt();
                (major - rho).powi(2) + z * z - minor * minor
            }
            Self::Sphube { s, r } => {
                let (x2, y2, z2) = (x * x, y * y, z * z);
                let al = s * s / (r * r);
                let be = al * al;
                x2 + y2 + z2 - al * (x2 * y2 + y2 * z2 + x2 * z2) + be * x2 * y2 * z2 - r * r
            }
        }
    }

    pub fn gradient(&self, p: &Vec3) -> Vec3 {
        let (x, y, z) = (p.x, p.y, p.z);
        match *self {
            Self::Ellipsoid { a, b, c } => Vec3::new(2.0 * x / (a * a), 2.0 * y / (b * b), 2.0 * z / (c * c)),
            Self::Torus { major, .. } => {
                let rho = (x * x + y * y).sqrt();
                let f = 2.0 * (1.0 - major / rho);
                Vec3::new(f * x, f * y, 2.0 * z)
            }
            Self::Sphube { s, r } => {
                let (x2, y2, z2) = (x * x, y * y, z * z);
                let al = s * s / (r * r);
                let be = al * al;
                Vec3::new(
                    2.0 * x * (1.0 - al * (y2 + z2) + be * y2 * z2),
                    2.0 * y * (1.0 - al * (x2 + z2) + be * x2 * z2),
                    2.0 * z * (1.0 - al * (x2 + y2) + be * x2 * y2),
                )
            }
        }
    }

    pub fn hessian(&self, p: &Vec3) -> Matrix3<f64> {
        let (x, y, z) = (p.x, p.y, p.z);
        match *self {
            Self::Ellipsoid { a, b, c } => {
                Matrix3::from_diagonal(&Vec3::new(2.0 / (a * a), 2.0 / (b * b), 2.0 / (c * c)))
            }
            Self::Torus { major, .. } => {
                let rho2 = x * x + y * y;
                let rho = rho2.sqrt();
                let rho3 = rho2 * rho;
                let base = 1.0 - major / rho;
                Matrix3::new(
                    2.0 * (base + major * x * x / rho3),
                    2.0 * major * x * y / rho3,
                    0.0,
                    2.0 * major * x * y / rho3,
                    2.0 * (base + major * y * y / rho3),
                    0.0,
                    0.0,
                    0.0,
                    2.0,
                )
            }
            Self::Sphube { s, r } => {
                let (x2, y2, z2) = (x * x, y * y, z * z);
                let al = s * s / (r * r);
                let be = al * al;
                let xy = -4.0 * al * x * y + 4.0 * be * x * y * z2;
                let xz = -4.0 * al * x * z + 4.0 * be * x * z * y2;
                let yz = -4.0 * al * y * z + 4.0 * be * y * z * x2;
                Matrix3::new(
                    2.0 * (1.0 - al * (y2 + z2) + be * y2 * z2),
                    xy,
                    xz,
                    xy,
                    2.0 * (1.0 - al * (x2 + z2) + be * x2 * z2),
                    yz,
                    xz,
                    yz,
                    2.0 * (1.0 - al * (x2 + y2) + be * x2 * y2),
                )
            }
        }
    }

    /// Outward unit normal `∇F / ‖∇F‖`.
    pub fn normal(&self, p: &Vec3) -> Result<Vec3> {
        let g = self.gradient(p);
        let n = g.norm();
        if !(n > 1e-300) {
            return Err(Error::DegenerateLevelSet(format!("vanishing gradient at {p:?}")));
        }
        Ok(g / n)
    }

    /// Analytic frame from the shape operator of `F`, using the outward normal.
    pub fn exact_frame(&self, p: &Vec3) -> Result<SurfaceFrame> {
        let g = self.gradient(p);
        let scale = self.params().iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        if self.implicit_value(p).abs() > 1e-8 * scale * scale {
            return Err(Error::Domain(format!("point {p:?} is not on the surface")));
        }
        frame_from_derivatives(&g, &self.hessian(p), &g)
    }

    /// Deterministic Halton sample of `n` surface points with outward normals.
    pub fn halton_sample(&self, n: usize) -> Result<PointCloud> {
        if n == 0 {
            return Err(Error::Domain("sample size must be positive".into()));
        }
        let mut points = Vec::with_capacity(n);
        for [u, v] in halton_2d(n) {
            points.push(self.map_parameters(u, v)?);
        }
        let normals = points.iter().map(|p| self.normal(p)).collect::<Result<Vec<_>>>()?;
        Ok(PointCloud {
            points,
            normals: Some(normals),
            source: format!("halton:{}:n={n}", self.label()),
        })
    }

    /// Map a point of the unit parameter square onto the surface.
    pub fn map_parameters(&self, u: f64, v: f64) -> Result<Vec3> {
        use std::f64::consts::TAU;
        match *self {
            Self::Torus { major, minor } => {
                let (theta, phi) = (TAU * u, TAU * v);
                let ring = major + minor * phi.cos();
                Ok(Vec3::new(ring * theta.cos(), ring * theta.sin(), minor * phi.sin()))
            }
            Self::Ellipsoid { a, b, c } => {
                let d = sphere_direction(u, v);
                Ok(Vec3::new(a * d.x, b * d.y, c * d.z))
            }
            Self::Sphube { .. } => self.radial_projection(&sphere_direction(u, v)),
        }
    }

    /// First crossing of the level set along the ray `t·dir`, t > 0.
    fn radial_projection(&self, dir: &Vec3) -> Result<Vec3> {
        let Self::Sphube { r, .. } = *self else {
            unreachable!("radial projection is only used for sphubes")
        };
        let f = |t: f64| self.implicit_value(&(dir * t));
        let step = 0.01 * r;
        let mut lo = 0.0;
        let mut hi = step;
        while f(hi) <= 0.0 {
            lo = hi;
            hi += step;
            if hi > 4.0 * r {
                return Err(Error::Domain(format!("no surface crossing along {dir:?}")));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (plo, phi) = (dir * lo, dir * hi);
        Ok(if f(hi).abs() < f(lo).abs() { phi } else { plo })
    }

    /// Approximate surface area, used to size probe sets.
    pub fn approx_area(&self) -> f64 {
        use std::f64::consts::PI;
        match *self {
            Self::Ellipsoid { a, b, c } => {
                let p = 1.6075;
                let t = ((a * b).powf(p) + (a * c).powf(p) + (b * c).powf(p)) / 3.0;
                4.0 * PI * t.powf(1.0 / p)
            }
            Self::Torus { major, minor } => 4.0 * PI * PI * major * minor,
            Self::Sphube { s, r } => (4.0 * PI * (1.0 - s * s) + 24.0 * s * s) * r * r,
        }
    }
}

/// Area-preserving map of the unit square to the unit sphere.
fn sphere_direction(u: f64, v: f64) -> Vec3 {
    let cos_t = 1.0 - 2.0 * u;
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let phi = std::f64::consts::TAU * v;
    Vec3::new(sin_t * phi.cos(), sin_t * phi.sin(), cos_t)
}

/// Positions with optional ground-truth unit normals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
    pub source: String,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self { points, normals: None, source: String::new() }
    }

    pub fn with_normals(points: Vec<Vec3>, normals: Vec<Vec3>) -> Result<Self> {
        if points.len() != normals.len() {
            return Err(Error::Domain(format!(
                "{} points but {} normals",
                points.len(),
                normals.len()
            )));
        }
        Ok(Self { points, normals: Some(normals), source: String::new() })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Vec3 {
        let sum = self.points.iter().fold(Vec3::zeros(), |acc, p| acc + p);
        sum / self.points.len().max(1) as f64
    }

    /// Gaussian perturbation of every coordinate; ground-truth normals are dropped.
    pub fn add_noise(&self, sigma: f64, seed: u64) -> Result<PointCloud> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::Domain(format!("noise level must be nonnegative, got {sigma}")));
        }
        if sigma == 0.0 {
            return Ok(self.clone());
        }
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::Domain(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = self
            .points
            .iter()
            .map(|p| p + Vec3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng)))
            .collect();
        Ok(PointCloud { points, normals: None, source: format!("{}+noise(sigma={sigma},seed={seed})", self.source) })
    }
}

/// `sup_{q ∈ probe} min_{p ∈ cloud} ‖q − p‖`.
pub fn fill_distance(cloud: &[Vec3], probe: &[Vec3]) -> Result<f64> {
    if cloud.is_empty() || probe.is_empty() {
        return Err(Error::Domain("fill distance needs nonempty cloud and probe".into()));
    }
    let tree = KdTree::new(cloud);
    Ok(probe.iter().map(|q| tree.nearest_distance(q)).fold(0.0, f64::max))
}

/// Fill distance of a cloud against `probe_size` seeded random points of the same surface.
pub fn surface_fill_distance(surface: &ImplicitSurface, cloud: &PointCloud, probe_size: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let probe: Vec<Vec3> = (0..probe_size)
        .map(|_| surface.map_parameters(rng.random(), rng.random()))
        .collect::<Result<_>>()?;
    fill_distance(&cloud.points, &probe)
}

/// Uniform random samples on the faces of an axis-aligned cube centred at the origin.
pub fn cube_cloud(n: usize, edge: f64, seed: u64) -> Result<PointCloud> {
    if n == 0 || !(edge > 0.0) {
        return Err(Error::Domain("cube cloud needs n > 0 and a positive edge".into()));
    }
    let half = 0.5 * edge;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for i in 0..n {
        let face = i % 6;
        let axis = face / 2;
        let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
        let mut p = Vec3::new(rng.random_range(-half..half), rng.random_range(-half..half), rng.random_range(-half..half));
        p[axis] = sign * half;
        let mut n = Vec3::zeros();
        n[axis] = sign;
        points.push(p);
        normals.push(n);
    }
    Ok(PointCloud { points, normals: Some(normals), source: format!("cube(edge={edge},n={n},seed={seed})") })
}

/// Unsigned distance from `p` to the surface of the axis-aligned cube of the given edge.
pub fn cube_distance(p: &Vec3, edge: f64) -> f64 {
    let half = 0.5 * edge;
    let q = p.abs() - Vec3::repeat(half);
    let outside = q.sup(&Vec3::zeros()).norm();
    let inside = q.max().min(0.0);
    (outside + inside).abs()
}

/// Regular grid on the plane z = 0 (test fixture).
pub fn plane_grid(side: usize, spacing: f64) -> PointCloud {
    let mut points = Vec::with_capacity(side * side);
    for i in 0..side {
        for j in 0..side {
            points.push(Vec3::new(i as f64 * spacing, j as f64 * spacing, 0.0));
        }
    }
    let normals = vec![Vec3::z(); points.len()];
    PointCloud { points, normals: Some(normals), source: format!("plane({side}x{side})") }
}
