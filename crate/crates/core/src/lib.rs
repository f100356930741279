//! Local implicit-surface fitting for point clouds by minimum-norm kernel interpolation.
//!
//! Each point gets a stencil of nearest neighbours plus two ghost points along an oriented
//! PCA normal. An implicit function is fitted on the stencil from one of three trial spaces
//! (plain RBF, Hermite RBF, or RBF plus axis-aligned 1-D kernels) by minimizing a native-space
//! or Euclidean coefficient norm under the interpolation constraints. Normals and principal
//! curvatures come from the gradient and Hessian of the fit.

pub mod differential;
pub mod error;
pub mod exec;
pub mod halton;
pub mod kernel;
pub mod pipeline;
pub mod solver;
pub mod spatial;
pub mod stencil;
pub mod surfaces;
pub mod trialspace;
pub mod xyz;

pub type Vec3 = nalgebra::Vector3<f64>;

pub use differential::{FittedImplicit, SurfaceFrame};
pub use error::{Error, Result};
pub use kernel::MaternKernel;
pub use pipeline::{estimate_cloud, EstimatorSpec, Method};
pub use solver::{MinNormProblem, MinNormSolution, NormMatrix, Objective};
pub use surfaces::{ImplicitSurface, PointCloud};
pub use trialspace::{CenterConfig, CenterMode, TrialSpaceAssembly, TrialSpaceKind};
