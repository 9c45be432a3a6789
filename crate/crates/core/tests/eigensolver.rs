use std::f64::consts::PI;

use qlayer_core::eigensolver::*;
use qlayer_core::forms::{evaluate_q, QuadGrid, TestFunctionFamily, TransverseProfile};
use qlayer_core::geometry::{surface, SurfaceParams};
use qlayer_core::layer::LayerConfig;
use qlayer_core::Error;

fn plane_chart() -> qlayer_core::geometry::SurfaceChart {
    surface("plane", &SurfaceParams::default()).unwrap().chart
}

fn opts(tol: f64) -> SolverOptions {
    SolverOptions { tol, ..Default::default() }
}

#[test]
fn plane_box_matches_separated_modes() {
    let (a, l) = (1.0, 4.0);
    let cfg = LayerConfig::new(a, 0.9).unwrap();
    let mesh = TensorMesh::boxed(&[l, l], &[32, 32], EndCondition::Dirichlet, 33).unwrap();
    let pair = assemble(&plane_chart(), &cfg, &mesh).unwrap();
    let rep = solve_lowest(&pair, &opts(1e-8)).unwrap();
    let exact = cfg.kappa1_sq() + 2.0 * (PI / (2.0 * l)).powi(2);
    assert!((rep.lambda_min() - exact).abs() < 0.02 * exact, "{} vs {exact}", rep.lambda_min());
    assert!(rep.lambda_min() >= exact);
    assert!(rep.converged && rep.residuals[0] < 1e-8);
}

#[test]
fn degenerate_natural_mesh_gives_transverse_threshold() {
    let cfg = LayerConfig::new(1.0, 0.9).unwrap();
    let mesh = TensorMesh::boxed(&[1.0, 1.0], &[4, 4], EndCondition::Natural, 21).unwrap();
    let pair = assemble(&plane_chart(), &cfg, &mesh).unwrap();
    let rep = solve_lowest(&pair, &opts(1e-10)).unwrap();
    assert!((rep.lambda_min() - PI * PI / 4.0).abs() < 1e-4, "{}", rep.lambda_min());
}

#[test]
fn plane_volume_is_exact() {
    let (a, l) = (0.7, 3.0);
    let cfg = LayerConfig::new(a, 0.9).unwrap();
    let mesh = TensorMesh::boxed(&[l, l], &[9, 7], EndCondition::Dirichlet, 7).unwrap();
    let pair = assemble(&plane_chart(), &cfg, &mesh).unwrap();
    let exact = 2.0 * a * (2.0 * l).powi(2);
    assert!((pair.volume - exact).abs() < 1e-10 * exact);
}

#[test]
fn plane_layer_has_no_bound_state() {
    let cfg = LayerConfig::new(1.0, 0.9).unwrap();
    let mesh = TensorMesh::boxed(&[8.0, 8.0], &[33, 33], EndCondition::Dirichlet, 9).unwrap();
    let pair = assemble(&plane_chart(), &cfg, &mesh).unwrap();
    let rep = solve_lowest(&pair, &opts(1e-8)).unwrap();
    let k2 = cfg.kappa1_sq();
    assert!(rep.lambda_min() >= k2 && rep.lambda_min() <= k2 + 0.1, "{}", rep.lambda_min());
    assert!(rep.gap < 0.0);
}

#[test]
fn paraboloid_matrices_are_symmetric_and_eigenvector_is_consistent() {
    let cfg = LayerConfig::new(0.4, 0.9).unwrap();
    let s = surface("paraboloid", &SurfaceParams::default()).unwrap();
    let mesh = TensorMesh::polar_uniform(6.0, 24, 16, 7).unwrap();
    let pair = assemble(&s.integration_chart, &cfg, &mesh).unwrap();
    assert!(pair.stiffness.asymmetry() < 1e-12);
    assert!(pair.mass.asymmetry() < 1e-12);
    let rep = solve_lowest(&pair, &SolverOptions { count: 3, tol: 1e-9, ..Default::default() }).unwrap();
    assert!(rep.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    let x: Vec<f64> = rep.vectors.column(0).iter().copied().collect();
    let r = rayleigh(&pair, &x).unwrap();
    assert!((r - rep.lambda_min()).abs() < 1e-9 * r);
    assert!(matches!(rayleigh(&pair, &vec![0.0; pair.len()]), Err(Error::ZeroVector)));
    let mut buf = Vec::new();
    pair.stiffness.write_qlmx(&mut buf).unwrap();
    assert_eq!(CsrMatrix::read_qlmx(&buf[..]).unwrap(), pair.stiffness);
}

#[test]
fn solver_is_deterministic_and_validates_arguments() {
    let cfg = LayerConfig::new(0.4, 0.9).unwrap();
    let s = surface("paraboloid", &SurfaceParams::default()).unwrap();
    let mesh = TensorMesh::polar_uniform(6.0, 16, 12, 7).unwrap();
    let pair = assemble(&s.integration_chart, &cfg, &mesh).unwrap();
    let a = solve_lowest(&pair, &opts(1e-8)).unwrap();
    let b = solve_lowest(&pair, &opts(1e-8)).unwrap();
    assert_eq!(a.eigenvalues, b.eigenvalues);
    assert_eq!(a.iterations, b.iterations);
    assert!(solve_lowest(&pair, &SolverOptions { count: 11, ..Default::default() }).is_err());
    assert!(solve_lowest(&pair, &opts(1e-12)).is_err());
    let starved = solve_lowest(&pair, &SolverOptions { max_iter: 1, tol: 1e-10, ..Default::default() });
    match starved {
        Err(Error::NoConvergence(rep)) => assert!(!rep.converged && rep.iterations == 1),
        other => panic!("expected NoConvergence, got {other:?}"),
    }
}

#[test]
fn truncation_ladder_is_monotone() {
    let cfg = LayerConfig::new(0.4, 0.9).unwrap();
    let s = surface("paraboloid", &SurfaceParams::default()).unwrap();
    let mut last = f64::INFINITY;
    for r in [3.0, 6.0, 12.0] {
        let nodes: Vec<f64> = (0..=(4.0 * r) as usize).map(|i| i as f64 * 0.25).collect();
        let mesh = TensorMesh::polar(nodes, 24, 9).unwrap();
        let pair = assemble(&s.integration_chart, &cfg, &mesh).unwrap();
        let lam = solve_lowest(&pair, &opts(1e-9)).unwrap().lambda_min();
        assert!(lam <= last + 1e-9, "radius {r}: {lam} > {last}");
        last = lam;
    }
}

#[test]
fn too_thick_layer_is_rejected() {
    let cfg = LayerConfig::new(0.5, 0.9).unwrap();
    let s = surface("paraboloid", &SurfaceParams::default()).unwrap();
    let mesh = TensorMesh::polar_uniform(2.0, 8, 8, 5).unwrap();
    assert!(matches!(assemble(&s.integration_chart, &cfg, &mesh), Err(Error::ValidityError { .. })));
}

#[test]
fn sampled_plane_family_stays_above_threshold() {
    let cfg = LayerConfig::new(0.4, 0.9).unwrap();
    let s = surface("plane", &SurfaceParams::default()).unwrap();
    let prof = TransverseProfile::sine(0.4);
    let fam = TestFunctionFamily::product(&s.integration_chart, &prof, 1.0, 6.0).unwrap();
    let mesh = TensorMesh::polar_graded(1.0, 8, 6.5, 24, 24, 9).unwrap();
    let pair = assemble(&s.integration_chart, &cfg, &mesh).unwrap();
    let x = sample_on_mesh(&pair, &s.integration_chart, &prof, &fam.base).unwrap();
    assert!(rayleigh(&pair, &x).unwrap() >= cfg.kappa1_sq());
}

#[test]
fn paraboloid_paths_agree_and_certify() {
    let cfg = LayerConfig::new(0.4, 0.9).unwrap();
    let s = surface("paraboloid", &SurfaceParams::default()).unwrap();
    let chart = &s.integration_chart;
    let prof = TransverseProfile::sine(0.4);
    let fam = TestFunctionFamily::convex(chart, &s.graph.as_ref().unwrap().height, &prof, 4.0).unwrap();
    let q = evaluate_q(&fam, chart, &cfg, &QuadGrid::for_family(&fam)).unwrap();
    let ext = fam.support_radius * 1.05;
    let coarse = assemble(chart, &cfg, &TensorMesh::polar_graded(2.0, 12, ext, 24, 16, 13).unwrap()).unwrap();
    let fine = assemble(chart, &cfg, &TensorMesh::polar_graded(2.0, 24, ext, 48, 32, 25).unwrap()).unwrap();
    let check = rayleigh_consistency(&fam, &q, chart, &fine, &coarse).unwrap();
    assert!(check.agrees, "{check:?}");

    let ec = solve_lowest(&coarse, &opts(1e-7)).unwrap();
    let ef = solve_lowest(&fine, &opts(1e-7)).unwrap();
    let trend = threshold_trend(chart, &cfg, &[10.0, 20.0, 40.0]).unwrap();
    let cert = bound_state_certificate(&ef, Some(&ec), &q, &trend, true).unwrap();
    assert!(cert.granted, "{:?}", cert.findings);
    assert_eq!(cert.findings.len(), 4);
}

#[test]
fn plane_certificate_is_denied() {
    let cfg = LayerConfig::new(0.4, 0.9).unwrap();
    let s = surface("plane", &SurfaceParams::default()).unwrap();
    let chart = &s.integration_chart;
    let prof = TransverseProfile::sine(0.4);
    let fam = TestFunctionFamily::product(chart, &prof, 1.0, 8.0).unwrap();
    let q = evaluate_q(&fam, chart, &cfg, &QuadGrid::for_family(&fam)).unwrap();
    let coarse = assemble(chart, &cfg, &TensorMesh::polar_uniform(8.0, 17, 16, 7).unwrap()).unwrap();
    let fine = assemble(chart, &cfg, &TensorMesh::polar_uniform(8.0, 33, 32, 13).unwrap()).unwrap();
    let ec = solve_lowest(&coarse, &opts(1e-7)).unwrap();
    let ef = solve_lowest(&fine, &opts(1e-7)).unwrap();
    let trend = threshold_trend(chart, &cfg, &[10.0, 20.0]).unwrap();
    let cert = bound_state_certificate(&ef, Some(&ec), &q, &trend, true).unwrap();
    assert!(!cert.granted && !cert.variational && !cert.spectral);
}
