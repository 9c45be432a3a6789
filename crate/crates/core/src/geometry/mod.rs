//! Hypersurface charts, fundamental forms and curvature.

pub mod catalog;
pub mod chart;
pub mod curvature;
pub mod forms;
pub mod shape;

pub use catalog::{
    surface, CatalogSurface, LogTube, RadialGraph, RadialHeight, SurfaceParams, TubeCurvatureIntegrals, CATALOG_IDS,
    DEFAULT_EXTENT,
};
pub use chart::{Interval, RadialCoordinate, SurfaceChart, Symmetry, SymmetricProfile};
pub use curvature::{curvature_data, CurvatureData};
pub use forms::{fundamental_forms, fundamental_forms_default, fundamental_forms_with, FdOptions, FdScheme, FundamentalForms};
pub use shape::{shape_data, ShapeData};

use crate::error::Result;

/// Forms and shape data at a point, with default finite-difference options.
pub fn evaluate(chart: &SurfaceChart, x: &[f64]) -> Result<(FundamentalForms, ShapeData)> {
    let forms = fundamental_forms_default(chart, x)?;
    let shape = shape_data(&forms)?;
    Ok((forms, shape))
}
