use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input outside the domain of an operation (negative radius, empty set, k > N, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Unsupported kernel order or dimension.
    #[error("kernel error: {0}")]
    Kernel(String),

    /// The kernel is not smooth enough for the requested derivative.
    #[error("insufficient smoothness: {0}")]
    Smoothness(String),

    /// Stencil covariance has a degenerate (non-unique) normal direction.
    #[error("degenerate stencil: {0}")]
    DegenerateStencil(String),

    /// Ghost point construction collided with the data.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// 1-D projection interval of zero width.
    #[error("degenerate axis {axis}: {reason}")]
    DegenerateAxis { axis: usize, reason: String },

    /// Duplicate points make the interpolation matrix singular.
    #[error("singular assembly: {0}")]
    SingularAssembly(String),

    /// Cholesky kept failing after the full ε schedule.
    #[error("conditioning error: {0}")]
    Conditioning(String),

    /// Minimum-norm solve could not satisfy the constraints.
    #[error("infeasible constraints: residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    Infeasible { residual: f64, tolerance: f64 },

    /// The saddle-point oracle failed.
    #[error("KKT oracle failure: {0}")]
    Oracle(String),

    /// Gradient of a level-set function vanishes at the evaluation point.
    #[error("degenerate level set: {0}")]
    DegenerateLevelSet(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("missing ground truth: {0}")]
    MissingGroundTruth(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Short machine-readable tag used in per-point report rows.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Kernel(_) => "kernel",
            Error::Smoothness(_) => "smoothness",
            Error::DegenerateStencil(_) => "degenerate_stencil",
            Error::Geometry(_) => "geometry",
            Error::DegenerateAxis { .. } => "degenerate_axis",
            Error::SingularAssembly(_) => "singular_assembly",
            Error::Conditioning(_) => "conditioning",
            Error::Infeasible { .. } => "infeasible",
            Error::Oracle(_) => "oracle",
            Error::DegenerateLevelSet(_) => "degenerate_level_set",
            Error::Parse { .. } => "parse",
            Error::MissingGroundTruth(_) => "missing_ground_truth",
            Error::Io(_) => "io",
        }
    }
}
