use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("reality violated at mode (l={l}, j={j}): deviation {deviation:e}")]
    RealityViolation { l: i64, j: usize, deviation: f64 },
    #[error("grid has {points} points, above the Hoelder seminorm cap of {cap}")]
    GridTooLarge { points: usize, cap: usize },
    #[error("field has kernel-mode energy fraction {fraction:e} (tolerance {tolerance:e}); project onto the range first")]
    NotInRange { fraction: f64, tolerance: f64 },
    #[error("difference quotient needs a nonzero shift")]
    ZeroShift,
    #[error("strip parameter alpha = {0} outside [0, 1/2)")]
    AlphaOutOfRange(f64),
    #[error("odd product needs an odd number of factors, got {0}")]
    EvenCount(usize),
    #[error("function does not satisfy the declared symmetry class: {0}")]
    UnknownSymmetryClass(String),
    #[error("weight has negative value {0:e}")]
    NegativeWeight(f64),
    #[error("cutoff threshold must be positive, got {0}")]
    NonpositiveM(f64),
    #[error("forcing evaluation out of domain: {0}")]
    EvaluationDomain(String),
    #[error("forcing has kernel-mode energy {energy:e} above {tolerance:e}; h must lie in the range of the wave operator")]
    KernelComponent { energy: f64, tolerance: f64 },
    #[error("invalid forcing: {0}")]
    InvalidForcing(String),
    #[error("beta*H changes sign on the interior grid")]
    SignMismatch,
    #[error("range iteration did not converge in {iterations} iterations (last contraction estimate {contraction:.3e}, step {step:.3e})")]
    MaxIterations { iterations: usize, contraction: f64, step: f64 },
    #[error("range iteration diverged after {iterations} iterations (iterate norm {norm:.3e})")]
    Diverged { iterations: usize, norm: f64 },
    #[error("minimisation stopped after {iterations} iterations with gradient norm {grad_norm:.3e}")]
    NotConverged { iterations: usize, grad_norm: f64 },
    #[error("c(t) is not constant in t (spread {spread:e}); h has a kernel component")]
    NotInRangeSpace { spread: f64 },
    #[error("kappa = {0} outside [0, pi]")]
    KappaOutOfRange(f64),
    #[error("chi(kappa) - c has no sign change on (0, pi): chi(0) = {chi0:e}, c = {c:e}")]
    NoSignChange { chi0: f64, c: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Process exit code for a configuration or input problem.
pub const EXIT_CONFIG: i32 = 2;
/// Process exit code for a solver that did not converge.
pub const EXIT_NONCONVERGENCE: i32 = 3;
/// Process exit code for a failed verification suite.
pub const EXIT_VERIFICATION: i32 = 4;

impl Error {
    /// Exit code of the command-line front end: bad inputs map to [`EXIT_CONFIG`], solver
    /// breakdowns to [`EXIT_NONCONVERGENCE`].
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MaxIterations { .. }
            | Error::Diverged { .. }
            | Error::NotConverged { .. }
            | Error::EvaluationDomain(_)
            | Error::RealityViolation { .. } => EXIT_NONCONVERGENCE,
            _ => EXIT_CONFIG,
        }
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::RealityViolation { .. } => "RealityViolation",
            Error::GridTooLarge { .. } => "GridTooLarge",
            Error::NotInRange { .. } => "NotInRange",
            Error::ZeroShift => "ZeroShift",
            Error::AlphaOutOfRange(_) => "AlphaOutOfRange",
            Error::EvenCount(_) => "EvenCount",
            Error::UnknownSymmetryClass(_) => "UnknownSymmetryClass",
            Error::NegativeWeight(_) => "NegativeWeight",
            Error::NonpositiveM(_) => "NonpositiveM",
            Error::EvaluationDomain(_) => "EvaluationDomain",
            Error::KernelComponent { .. } => "KernelComponent",
            Error::InvalidForcing(_) => "InvalidForcing",
            Error::SignMismatch => "SignMismatch",
            Error::MaxIterations { .. } => "MaxIterations",
            Error::Diverged { .. } => "Diverged",
            Error::NotConverged { .. } => "NotConverged",
            Error::NotInRangeSpace { .. } => "NotInRangeSpace",
            Error::KappaOutOfRange(_) => "KappaOutOfRange",
            Error::NoSignChange { .. } => "NoSignChange",
            Error::Config(_) => "ConfigError",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }

    /// JSON error record persisted next to a failed run.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "error": self.kind(), "message": self.to_string(), "exit_code": self.exit_code() })
    }
}
