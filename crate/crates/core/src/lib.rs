//! Numerical toolkit for bound states of the Dirichlet Laplacian on thin
//! layers built over complete hypersurfaces.

pub mod eigensolver;
pub mod error;
pub mod forms;
pub mod geometry;
pub mod layer;
pub mod parabolicity;
pub mod quadrature;

pub use error::{Error, Result};
