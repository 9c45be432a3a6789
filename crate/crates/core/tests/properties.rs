use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use qlayer_core::eigensolver::{assemble, solve_lowest, SolverOptions, TensorMesh};
use qlayer_core::forms::{evaluate_q, mu_coefficients, QuadGrid, TestFunctionFamily, TransverseProfile};
use qlayer_core::geometry::{shape_data, surface, FundamentalForms, SurfaceParams};
use qlayer_core::layer::{density, layer_metric, measure_bounds_check, LayerConfig};

fn forms(g: DMatrix<f64>, h: DMatrix<f64>) -> FundamentalForms {
    let n = g.nrows();
    let mut normal = DVector::zeros(n + 1);
    normal[n] = 1.0;
    FundamentalForms {
        point: vec![0.0; n],
        position: DVector::zeros(n + 1),
        jacobian: DMatrix::identity(n + 1, n),
        normal,
        g,
        h,
    }
}

/// (g, h) with g = BBᵀ + I/2 and h symmetric.
fn metric_and_form() -> impl Strategy<Value = (DMatrix<f64>, DMatrix<f64>)> {
    (2usize..=5).prop_flat_map(|n| {
        (
            proptest::collection::vec(-1.0f64..1.0, n * n),
            proptest::collection::vec(-2.0f64..2.0, n * n),
        )
            .prop_map(move |(b, h)| {
                let b = DMatrix::from_vec(n, n, b);
                let h = DMatrix::from_vec(n, n, h);
                (&b * b.transpose() + DMatrix::identity(n, n) * 0.5, (&h + h.transpose()) * 0.5)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn layer_metric_is_positive_with_product_density((g, h) in metric_and_form(), s in -0.99f64..0.99) {
        let f = forms(g, h);
        let shape = shape_data(&f).unwrap();
        prop_assume!(shape.norm_a > 1e-6);
        let config = LayerConfig::new(0.95 / shape.norm_a, 0.96).unwrap();
        let u = s * config.a;
        let m = layer_metric(&f, &shape, u, &config).unwrap();
        let product: f64 = shape.principal.iter().map(|k| 1.0 - u * k).product();
        prop_assert!((m.density - product).abs() <= 1e-10 * product.abs().max(1.0));
        prop_assert!(m.density > 0.0);
        prop_assert!(m.g_tangent.clone().cholesky().is_some());
        let id = &m.g_tangent * &m.g_tangent_inv;
        prop_assert!((id - DMatrix::identity(f.g.nrows(), f.g.nrows())).amax() < 1e-8);
        prop_assert!(measure_bounds_check(&shape, u).holds());
        prop_assert_eq!(density(&shape, 0.0), 1.0);
    }

    #[test]
    fn principal_curvatures_do_not_depend_on_the_chart_basis(
        (g, h) in metric_and_form(),
        p in proptest::collection::vec(-1.0f64..1.0, 25),
    ) {
        let n = g.nrows();
        let p = DMatrix::from_fn(n, n, |i, j| p[i * 5 + j]) + DMatrix::identity(n, n) * 2.5;
        let a = shape_data(&forms(g.clone(), h.clone())).unwrap();
        let b = shape_data(&forms(p.transpose() * &g * &p, p.transpose() * &h * &p)).unwrap();
        for (x, y) in a.principal.iter().zip(&b.principal) {
            prop_assert!((x - y).abs() < 1e-9 * x.abs().max(1.0), "{x} vs {y}");
        }
    }

    #[test]
    fn transverse_moments_scale_with_thickness(a in 0.05f64..5.0) {
        let unit = mu_coefficients(1.0, 12);
        let scaled = mu_coefficients(a, 12);
        for k in (2..=12).step_by(2) {
            let expect = unit[k] * a.powi(k as i32 - 1);
            prop_assert!((scaled[k] - expect).abs() <= 1e-12 * expect.abs());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    /// On the flat layer Q = Q₁ ≥ 0: the transverse part vanishes for the ground mode.
    #[test]
    fn flat_layer_forms_are_nonnegative(r in 0.5f64..3.0, ratio in 1.5f64..20.0) {
        let s = surface("plane", &SurfaceParams::default()).unwrap();
        let chart = &s.integration_chart;
        let config = LayerConfig::new(0.4, 0.9).unwrap();
        let fam = TestFunctionFamily::product(chart, &TransverseProfile::sine(0.4), r, r * ratio).unwrap();
        let q = evaluate_q(&fam, chart, &config, &QuadGrid::for_family(&fam)).unwrap();
        prop_assert!(q.q1 >= 0.0);
        prop_assert!(q.q2.abs() <= 1e-9 * q.q1.max(1.0));
        prop_assert!(q.q >= -q.quadrature_error);
        // Capacity of the annulus r < ρ < R times the transverse mass.
        let capacity = 2.0 * PI / (ratio).ln();
        prop_assert!((q.q1 - capacity * 0.4).abs() < 1e-3 * capacity, "{} vs {}", q.q1, capacity * 0.4);
    }
}

#[test]
fn form_evaluation_and_solver_are_deterministic() {
    let s = surface("paraboloid", &SurfaceParams::default()).unwrap();
    let chart = &s.integration_chart;
    let config = LayerConfig::new(0.4, 0.9).unwrap();
    let fam = TestFunctionFamily::product(chart, &TransverseProfile::sine(0.4), 1.0, 6.0).unwrap();
    let a = evaluate_q(&fam, chart, &config, &QuadGrid::for_family(&fam)).unwrap();
    let b = evaluate_q(&fam, chart, &config, &QuadGrid::for_family(&fam)).unwrap();
    assert_eq!(a.q.to_bits(), b.q.to_bits());
    assert_eq!(a.quadrature_error.to_bits(), b.quadrature_error.to_bits());

    let pair = assemble(chart, &config, &TensorMesh::polar_uniform(4.0, 9, 8, 5).unwrap()).unwrap();
    let opts = SolverOptions::default();
    let x = solve_lowest(&pair, &opts).unwrap();
    let y = solve_lowest(&pair, &opts).unwrap();
    assert_eq!(x.eigenvalues, y.eigenvalues);
    assert_eq!(x.iterations, y.iterations);
}
