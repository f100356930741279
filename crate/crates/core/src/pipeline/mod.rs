//! Per-point estimation over whole clouds, the benchmark studies, fairing and reports.

mod experiments;
mod fairing;
mod report;

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::differential::{max_and_rms, normal_error, FittedImplicit, SurfaceFrame};
use crate::error::{Error, Result};
use crate::exec::map_indices;
use crate::kernel::MaternKernel;
use crate::solver::{self, MinNormProblem, Objective, SolverOptions};
use crate::spatial::KdTree;
use crate::stencil::{knn_stencil, orient_normal, GhostStencil, DEFAULT_LEVEL};
use crate::surfaces::PointCloud;
use crate::trialspace::{assemble_hrbf, assemble_krbf, assemble_rbf, CenterConfig};
use crate::Vec3;

pub use experiments::{
    fit_slope, run_config_study, run_convergence, run_flattening_sphube, run_norm_study, SphubeField, SphubeStudy,
    StudyOptions, DEFAULT_STENCIL_SIZES,
};
pub use fairing::{fair_cloud, FairingOptions, FairingResult};
pub use report::{
    per_point_csv, write_per_point, ExperimentReport, SlopeFit, SummaryRow, PER_POINT_HEADER, SCHEMA_VERSION,
    SUMMARY_HEADER,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Pca,
    Rbf,
    Hrbf,
    Krbf,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Pca => "pca",
            Method::Rbf => "rbf",
            Method::Hrbf => "hrbf",
            Method::Krbf => "krbf",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pca" => Ok(Method::Pca),
            "rbf" => Ok(Method::Rbf),
            "hrbf" => Ok(Method::Hrbf),
            "krbf" => Ok(Method::Krbf),
            other => Err(Error::Domain(format!("unknown method {other:?}"))),
        }
    }
}

/// Everything needed to estimate the frame at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSpec {
    pub method: Method,
    pub tau: u32,
    pub stencil_size: usize,
    pub norm: Objective,
    pub center_config: CenterConfig,
    /// Fit by Tikhonov regularization instead of exact interpolation.
    pub tikhonov_mu: Option<f64>,
    /// Ghost offset; `None` uses the mean distance to the five nearest neighbours.
    pub ghost_offset: Option<f64>,
    pub level: f64,
    pub solver: SolverOptions,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self {
            method: Method::Krbf,
            tau: 5,
            stencil_size: 40,
            norm: Objective::Native,
            center_config: CenterConfig::default(),
            tikhonov_mu: None,
            ghost_offset: None,
            level: DEFAULT_LEVEL,
            solver: SolverOptions::default(),
        }
    }
}

impl EstimatorSpec {
    pub fn new(method: Method, tau: u32, stencil_size: usize) -> Self {
        Self { method, tau, stencil_size, ..Self::default() }
    }

    pub fn with_norm(mut self, norm: Objective) -> Self {
        self.norm = norm;
        self
    }

    pub fn with_center_config(mut self, config: CenterConfig) -> Self {
        self.center_config = config;
        self
    }

    pub fn with_tikhonov(mut self, mu: Option<f64>) -> Self {
        self.tikhonov_mu = mu;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.stencil_size < 3 {
            return Err(Error::Domain(format!("stencil size {} is below 3", self.stencil_size)));
        }
        if self.method != Method::Pca {
            MaternKernel::new(self.tau, 3)?;
        }
        if let Some(mu) = self.tikhonov_mu {
            if !(mu > 0.0) {
                return Err(Error::Domain(format!("Tikhonov parameter must be positive, got {mu}")));
            }
        }
        if let Some(h) = self.ghost_offset {
            if !(h > 0.0) {
                return Err(Error::Domain(format!("ghost offset must be positive, got {h}")));
            }
        }
        Ok(())
    }
}

/// Source of the reference direction that fixes the sign of each normal.
#[derive(Debug, Clone, Copy)]
pub enum Orientation<'a> {
    /// Per-point reference normals (e.g. ground truth).
    Normals(&'a [Vec3]),
    /// Point away from this centre.
    Outward(Vec3),
}

impl Orientation<'_> {
    /// Ground-truth normals when the cloud has them, otherwise outward from the centroid.
    pub fn for_cloud(cloud: &PointCloud) -> Orientation<'_> {
        match &cloud.normals {
            Some(n) => Orientation::Normals(n),
            None => Orientation::Outward(cloud.centroid()),
        }
    }

    pub fn reference(&self, index: usize, point: &Vec3) -> Vec3 {
        match self {
            Orientation::Normals(n) => n[index],
            Orientation::Outward(c) => point - c,
        }
    }
}

/// Result of one point's pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PointEstimate {
    pub index: usize,
    pub point: Vec3,
    pub normal: Option<Vec3>,
    /// Curvature frame when the trial space is smooth enough for a Hessian.
    pub frame: Option<SurfaceFrame>,
    /// Ghost offset used at this point.
    pub offset: f64,
    pub failure: Option<Error>,
}

impl PointEstimate {
    fn failed(index: usize, point: Vec3, err: Error) -> Self {
        Self { index, point, normal: None, frame: None, offset: f64::NAN, failure: Some(err) }
    }
}

/// Ghost-augmented stencil around `index` with its oriented PCA normal.
pub fn ghost_stencil_at(
    points: &[Vec3],
    tree: &KdTree,
    index: usize,
    spec: &EstimatorSpec,
    orientation: &Orientation,
) -> Result<GhostStencil> {
    let stencil = knn_stencil(points, tree, index, spec.stencil_size)?;
    let raw = stencil.pca_normal()?;
    let normal = orient_normal(raw, &orientation.reference(index, &points[index]));
    let offset = match spec.ghost_offset {
        Some(h) => h,
        None => stencil.default_offset(),
    };
    stencil.attach_ghosts(normal, offset, spec.level)
}

/// Assemble the trial space of `spec.method` on a ghost stencil and solve for the fit.
pub fn fit_stencil(ghost: &GhostStencil, spec: &EstimatorSpec) -> Result<FittedImplicit> {
    let k3 = MaternKernel::new(spec.tau, 3)?;
    let assembly = match spec.method {
        Method::Rbf => assemble_rbf(ghost, k3)?,
        Method::Hrbf => assemble_hrbf(ghost, k3)?,
        Method::Krbf => assemble_krbf(ghost, k3, MaternKernel::new(spec.tau, 1)?, &spec.center_config)?,
        Method::Pca => return Err(Error::Domain("PCA has no interpolant".into())),
    };
    let problem = MinNormProblem::new(
        assembly.constraint_matrix.clone(),
        DVector::from_vec(ghost.rhs()),
        assembly.norm_gram.clone(),
        spec.norm,
    )?;
    let solution = match spec.tikhonov_mu {
        Some(mu) => solver::solve_tikhonov_with(&problem, mu, &spec.solver)?,
        None => solver::solve_with(&problem, &spec.solver)?,
    };
    FittedImplicit::new(assembly, solution.lambda)
}

/// Full pipeline at one point of the cloud.
pub fn estimate_point(
    points: &[Vec3],
    tree: &KdTree,
    index: usize,
    spec: &EstimatorSpec,
    orientation: &Orientation,
) -> PointEstimate {
    let point = points[index];
    let run = || -> Result<PointEstimate> {
        let ghost = ghost_stencil_at(points, tree, index, spec, orientation)?;
        let offset = ghost.offset;
        if spec.method == Method::Pca {
            return Ok(PointEstimate { index, point, normal: Some(ghost.normal), frame: None, offset, failure: None });
        }
        let fit = fit_stencil(&ghost, spec)?;
        let (normal, frame) = if fit.assembly.hessian_ready().is_ok() {
            let frame = fit.surface_frame(&point, &ghost.normal)?;
            (frame.normal, Some(frame))
        } else {
            (fit.normal(&point, &ghost.normal)?, None)
        };
        Ok(PointEstimate { index, point, normal: Some(normal), frame, offset, failure: None })
    };
    run().unwrap_or_else(|e| PointEstimate::failed(index, point, e))
}

/// Estimates for a whole cloud (or a subset of its points), in index order.
#[derive(Debug, Clone, PartialEq)]
pub struct CloudEstimate {
    pub spec: EstimatorSpec,
    pub estimates: Vec<PointEstimate>,
    /// Normal errors against the cloud's ground truth, `NaN` where estimation failed.
    pub errors: Option<Vec<f64>>,
}

impl CloudEstimate {
    pub fn failures(&self) -> usize {
        self.estimates.iter().filter(|e| e.failure.is_some()).count()
    }

    /// Max and RMS normal error over the successfully estimated points.
    pub fn error_summary(&self) -> Option<(f64, f64)> {
        let errs: Vec<f64> = self.errors.as_ref()?.iter().copied().filter(|e| !e.is_nan()).collect();
        max_and_rms(&errs)
    }
}

pub fn estimate_cloud(cloud: &PointCloud, spec: &EstimatorSpec) -> Result<CloudEstimate> {
    let tree = KdTree::new(&cloud.points);
    estimate_cloud_with(cloud, &tree, spec, Orientation::for_cloud(cloud), None)
}

/// [`estimate_cloud`] with a prebuilt tree, explicit orientation and an optional subset of
/// point indices.
pub fn estimate_cloud_with(
    cloud: &PointCloud,
    tree: &KdTree,
    spec: &EstimatorSpec,
    orientation: Orientation,
    subset: Option<&[usize]>,
) -> Result<CloudEstimate> {
    spec.validate()?;
    if cloud.len() < spec.stencil_size {
        return Err(Error::Domain(format!(
            "cloud has {} points, fewer than the stencil size {}",
            cloud.len(),
            spec.stencil_size
        )));
    }
    let indices: Vec<usize> = match subset {
        Some(s) => s.to_vec(),
        None => (0..cloud.len()).collect(),
    };
    if let Some(&bad) = indices.iter().find(|&&i| i >= cloud.len()) {
        return Err(Error::Domain(format!("point index {bad} out of range")));
    }
    let estimates =
        map_indices(indices.len(), |k| estimate_point(&cloud.points, tree, indices[k], spec, &orientation));
    let errors = cloud.normals.as_ref().map(|truth| {
        estimates
            .iter()
            .map(|e| e.normal.map_or(f64::NAN, |n| normal_error(&n, &truth[e.index])))
            .collect()
    });
    Ok(CloudEstimate { spec: *spec, estimates, errors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surfaces::{plane_grid, ImplicitSurface};

    #[test]
    fn pca_on_plane() {
        let cloud = plane_grid(10, 0.1);
        let est = estimate_cloud(&cloud, &EstimatorSpec::new(Method::Pca, 5, 20)).unwrap();
        for e in &est.estimates {
            assert!((e.normal.unwrap() - Vec3::z()).norm() < 1e-12);
        }
        assert_eq!(est.failures(), 0);
    }

    #[test]
    fn krbf_on_sphere() {
        let cloud = ImplicitSurface::unit_sphere().halton_sample(400).unwrap();
        let spec = EstimatorSpec::new(Method::Krbf, 4, 30);
        let est = estimate_cloud_with(
            &cloud,
            &KdTree::new(&cloud.points),
            &spec,
            Orientation::for_cloud(&cloud),
            Some(&[0, 17, 200]),
        )
        .unwrap();
        let (max, _) = est.error_summary().unwrap();
        assert!(max < 1e-3, "{max}");
        for e in &est.estimates {
            let f = e.frame.unwrap();
            assert!((f.kappa1.abs() - 1.0).abs() < 0.05 && (f.kappa2.abs() - 1.0).abs() < 0.05, "{f:?}");
        }
    }

    #[test]
    fn rejects_small_cloud() {
        let cloud = plane_grid(3, 0.1);
        assert!(estimate_cloud(&cloud, &EstimatorSpec::default()).is_err());
    }

    #[test]
    fn failure_is_isolated() {
        let mut cloud = ImplicitSurface::unit_sphere().halton_sample(200).unwrap();
        // a far-away collinear cluster gives its members a degenerate stencil
        let normals = cloud.normals.as_mut().unwrap();
        for i in 0..4 {
            cloud.points.push(Vec3::new(50.0 + i as f64, 50.0, 50.0));
            normals.push(Vec3::z());
        }
        let spec = EstimatorSpec::new(Method::Pca, 5, 4);
        let est = estimate_cloud(&cloud, &spec).unwrap();
        let failed: Vec<usize> = est.estimates.iter().filter(|e| e.failure.is_some()).map(|e| e.index).collect();
        assert_eq!(failed, vec![200, 201, 202, 203]);
    }
}
