//! Curvature-weighted point fairing.

use crate::error::{Error, Result};
use crate::exec::map_indices;
use crate::pipeline::{estimate_point, EstimatorSpec, Orientation};
use crate::spatial::KdTree;
use crate::stencil::knn_stencil;
use crate::surfaces::PointCloud;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FairingOptions {
    pub iterations: usize,
    /// Curvature scale; `None` uses the median |κ| of each iteration, `∞` disables the
    /// curvature weight.
    pub sigma_kappa: Option<f64>,
}

impl Default for FairingOptions {
    fn default() -> Self {
        Self { iterations: 1, sigma_kappa: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairingResult {
    pub cloud: PointCloud,
    /// Per iteration, points left in place because their curvature was unavailable.
    pub flagged: Vec<Vec<usize>>,
    /// Per iteration, the curvature scale used.
    pub sigma_kappa: Vec<f64>,
    /// Per iteration, the dominant principal curvature at each point (`NaN` if unknown).
    pub curvature: Vec<Vec<f64>>,
}

/// Moves each point to the weighted mean of its stencil with weights
/// `exp(−‖p_j − p_i‖²/σ_s²) · exp(−κ(p_j)²/σ_κ²)`, `σ_s` the point's ghost offset and `κ` the
/// principal curvature of largest magnitude. All points move simultaneously.
pub fn fair_cloud(cloud: &PointCloud, spec: &EstimatorSpec, opts: &FairingOptions) -> Result<FairingResult> {
    spec.validate()?;
    if cloud.len() < spec.stencil_size {
        return Err(Error::Domain(format!(
            "cloud has {} points, fewer than the stencil size {}",
            cloud.len(),
            spec.stencil_size
        )));
    }
    if let Some(s) = opts.sigma_kappa {
        if !(s > 0.0) {
            return Err(Error::Domain(format!("σ_κ must be positive, got {s}")));
        }
    }
    let mut points = cloud.points.clone();
    let mut result = FairingResult {
        cloud: cloud.clone(),
        flagged: Vec::new(),
        sigma_kappa: Vec::new(),
        curvature: Vec::new(),
    };
    for _ in 0..opts.iterations {
        let tree = KdTree::new(&points);
        let n = points.len();
        let curvature_free = opts.sigma_kappa == Some(f64::INFINITY);
        let kappa: Vec<f64> = if curvature_free {
            vec![0.0; n]
        } else {
            let snapshot = PointCloud { points: points.clone(), normals: None, source: String::new() };
            let orientation = Orientation::Outward(snapshot.centroid());
            map_indices(n, |i| {
                estimate_point(&points, &tree, i, spec, &orientation)
                    .frame
                    .map_or(f64::NAN, |f| f.dominant_curvature())
            })
        };
        let sigma_k = match opts.sigma_kappa {
            Some(s) => s,
            None => median_abs(&kappa).filter(|m| *m > 0.0).unwrap_or(1.0),
        };
        let moved: Vec<Option<Vec3>> = map_indices(n, |i| {
            if kappa[i].is_nan() {
                return None;
            }
            let stencil = knn_stencil(&points, &tree, i, spec.stencil_size).ok()?;
            let sigma_s = match spec.ghost_offset {
                Some(h) => h,
                None => stencil.default_offset(),
            };
            if !(sigma_s > 0.0) {
                return None;
            }
            let p = points[i];
            let mut acc = Vec3::zeros();
            let mut total = 0.0;
            for &j in &stencil.neighbor_indices {
                if kappa[j].is_nan() {
                    continue;
                }
                let d2 = (points[j] - p).norm_squared();
                let w = (-d2 / (sigma_s * sigma_s)).exp() * (-(kappa[j] * kappa[j]) / (sigma_k * sigma_k)).exp();
                acc += points[j] * w;
                total += w;
            }
            (total > 0.0).then(|| acc / total)
        });
        let mut flagged = Vec::new();
        let mut next = points.clone();
        for (i, m) in moved.into_iter().enumerate() {
            match m {
                Some(q) => next[i] = q,
                None => flagged.push(i),
            }
        }
        points = next;
        result.flagged.push(flagged);
        result.sigma_kappa.push(sigma_k);
        result.curvature.push(kappa);
    }
    result.cloud = PointCloud {
        points,
        normals: None,
        source: format!("{}+fair(iterations={})", cloud.source, opts.iterations),
    };
    if opts.iterations == 0 {
        result.cloud = cloud.clone();
    }
    Ok(result)
}

fn median_abs(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().filter(|x| !x.is_nan()).map(|x| x.abs()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}
