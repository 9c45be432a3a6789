//! Finite-element discretization of the Dirichlet Laplacian on a truncated layer.

pub mod assemble;
pub mod certificate;
pub mod lobpcg;
pub mod mesh;
mod precond;
pub mod sparse;

pub use assemble::{assemble, DiscretePair};
pub use certificate::{
    bound_state_certificate, essential_threshold, essential_threshold_with_error, rayleigh_consistency, sample_on_mesh, threshold_trend, Certificate,
    RayleighCheck, ThresholdTrend,
};
pub use lobpcg::{rayleigh, solve_lowest, EigenReport, SolverOptions};
pub use mesh::{DofMap, EndCondition, MeshAxis, TensorMesh};
pub use sparse::CsrMatrix;
