use thiserror::Error;

use crate::eigensolver::EigenReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("chart metric is singular or ill-conditioned at {point:?} (condition number {condition:e})")]
    SingularChart { point: Vec<f64>, condition: f64 },

    #[error("point {point:?} lies outside the chart domain")]
    DomainError { point: Vec<f64> },

    #[error("layer too thick: a*||A|| = {value} reaches C0 = {c0} at {point:?}")]
    ValidityError { value: f64, c0: f64, point: Vec<f64> },

    #[error("dimension {0} is not supported (need 2 <= n <= 6)")]
    UnsupportedDimension(usize),

    #[error("truncation too small: {0}")]
    TruncationTooSmall(String),

    #[error("chart is not supported here: {0}")]
    UnsupportedChart(String),

    #[error("Euler characteristic is not known for chart '{0}'")]
    UnknownEulerChar(String),

    #[error("quadrature does not resolve the integrand (error ratio {ratio:.3})")]
    QuadratureDivergence { ratio: f64 },

    #[error("perturbation is degenerate: cross term {cross:e} vanishes within quadrature error {error:e}")]
    DegeneratePerturbation { cross: f64, error: f64 },

    #[error("chi1 is not admissible: {0}")]
    NonAdmissibleChi1(String),

    #[error("graph function is not strictly convex at the origin: {0}")]
    NotStrictlyConvexAtOrigin(String),

    #[error("graph function violates convexity: {0}")]
    NotConvex(String),

    #[error("level set f = {level} leaves the truncation radius {radius}")]
    LevelSetEscapesTruncation { level: f64, radius: f64 },

    #[error("certificate failed: {0}")]
    CertificateFailed(String),

    #[error("assembly failed: {0}")]
    AssemblyError(String),

    #[error("eigensolver did not converge after {} iterations", .0.iterations)]
    NoConvergence(Box<EigenReport>),

    #[error("zero vector has no Rayleigh quotient")]
    ZeroVector,

    #[error("variational and spectral paths disagree: {0}")]
    Inconsistent(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
