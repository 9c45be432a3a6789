//! Test functions on the layer and the quadratic forms Q = Q₁ + Q₂.

pub mod convex;
pub mod family;
pub mod profile;
pub mod quadform;

pub use family::{
    Bump, FamilyKind, HeightWindow, Horizontal, PointGeom, RadialLift, SeparableFn, Term, TestFunctionFamily,
    Vertical, Window,
};
pub use profile::{curvature_integrand, mu_by_quadrature, mu_coefficients, sigma_cross, Chi1, TransverseProfile};
pub use quadform::{assemble_forms, evaluate_q, perturbation_optimize, FormMatrices, FormValues, QuadFormReport, QuadGrid};
pub use convex::{
    coarea_h_over_f, convex_certificate, convex_delta, convex_ladder, effective_delta, level_integrals,
    mean_curvature_graph, surface_gradient, CoareaReport, ConvexCertificate, GraphFunction, LevelRecord,
    RadialFunction, DELTA_CAP,
};
