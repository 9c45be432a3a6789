//! Built-in surfaces with analytic Jacobians.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::chart::{Interval, RadialCoordinate, SurfaceChart, Symmetry, SymmetricProfile};
use crate::error::{Error, Result};
use crate::quadrature::adaptive_pieces;

pub const DEFAULT_EXTENT: f64 = 1000.0;

/// Height of a rotationally symmetric graph z = F(r), written in s = r².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RadialHeight {
    /// F = Σ cₖ sᵏ.
    Polynomial(Vec<f64>),
    /// F = height · e⁻ˢ.
    Gaussian { height: f64 },
}

impl RadialHeight {
    /// (F, dF/ds, d²F/ds²) at s = r².
    pub fn in_s(&self, s: f64) -> (f64, f64, f64) {
        match self {
            RadialHeight::Polynomial(c) => {
                let f = c.iter().rev().fold(0.0, |acc, ck| acc * s + ck);
                let fs = (1..c.len()).rev().fold(0.0, |acc, k| acc * s + k as f64 * c[k]);
                let fss = (2..c.len())
                    .rev()
                    .fold(0.0, |acc, k| acc * s + (k * (k - 1)) as f64 * c[k]);
                (f, fs, fss)
            }
            RadialHeight::Gaussian { height } => {
                let e = height * (-s).exp();
                (e, -e, e)
            }
        }
    }

    /// (F, F′, F″) in r.
    pub fn derivatives(&self, r: f64) -> (f64, f64, f64) {
        let (f, fs, fss) = self.in_s(r * r);
        (f, 2.0 * r * fs, 2.0 * fs + 4.0 * r * r * fss)
    }

    pub fn value(&self, r: f64) -> f64 {
        self.derivatives(r).0
    }

    /// Principal curvatures (radial, angular) for the upward normal.
    pub fn principal_curvatures(&self, r: f64) -> (f64, f64) {
        let (_, f1, f2) = self.derivatives(r);
        let w = 1.0 + f1 * f1;
        let kr = f2 / w.powf(1.5);
        let (_, fs, _) = self.in_s(r * r);
        let kt = 2.0 * fs / w.sqrt();
        (kr, kt)
    }
}

/// Rotationally symmetric graph over the plane.
#[derive(Debug, Clone)]
pub struct RadialGraph {
    pub height: RadialHeight,
}

impl RadialGraph {
    pub fn new(height: RadialHeight) -> Self {
        RadialGraph { height }
    }

    /// Cartesian chart (x, y) ↦ (x, y, F(r)).
    pub fn cartesian_chart(&self, name: &str, extent: f64) -> SurfaceChart {
        let hp = self.height.clone();
        let hj = self.height.clone();
        SurfaceChart::new(
            name,
            vec![Interval::closed(-extent, extent), Interval::closed(-extent, extent)],
            Arc::new(move |x: &[f64]| {
                DVector::from_vec(vec![x[0], x[1], hp.in_s(x[0] * x[0] + x[1] * x[1]).0])
            }),
        )
        .with_jacobian(Arc::new(move |x: &[f64]| {
            let (_, fs, _) = hj.in_s(x[0] * x[0] + x[1] * x[1]);
            DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 2.0 * x[0] * fs, 2.0 * x[1] * fs])
        }))
        .with_euler_char(1)
        .with_ends(1)
        .with_symmetry(Symmetry::Radial)
        .with_radial(RadialCoordinate::Norm)
        .with_profile(Arc::new(self.clone()))
    }

    /// Polar chart (r, θ) ↦ (r cos θ, r sin θ, F(r)).
    pub fn polar_chart(&self, name: &str, extent: f64) -> SurfaceChart {
        let hp = self.height.clone();
        let hj = self.height.clone();
        SurfaceChart::new(
            name,
            vec![Interval::closed(0.0, extent), Interval::angle()],
            Arc::new(move |x: &[f64]| {
                let (r, t) = (x[0], x[1]);
                DVector::from_vec(vec![r * t.cos(), r * t.sin(), hp.value(r)])
            }),
        )
        .with_jacobian(Arc::new(move |x: &[f64]| {
            let (r, t) = (x[0], x[1]);
            let (_, f1, _) = hj.derivatives(r);
            DMatrix::from_row_slice(3, 2, &[t.cos(), -r * t.sin(), t.sin(), r * t.cos(), f1, 0.0])
        }))
        .with_euler_char(1)
        .with_ends(1)
        .with_symmetry(Symmetry::Radial)
        .with_radial(RadialCoordinate::Axis { index: 0, angular: Some(1) })
        .with_profile(Arc::new(self.clone()))
    }
}

impl SymmetricProfile for RadialGraph {
    fn radial_metric(&self, rho: f64) -> f64 {
        let (_, f1, _) = self.height.derivatives(rho);
        1.0 + f1 * f1
    }

    fn shell_measure(&self, rho: f64) -> f64 {
        2.0 * PI * rho * self.radial_metric(rho).sqrt()
    }

    fn intrinsic_radius(&self) -> bool {
        true
    }
}

/// The tube S¹ × R² ↪ R⁴, (t, θ, φ) ↦ (σ(t) cos θ, σ(t) sin θ, t cos φ, t sin φ),
/// with σ = log 3 for t ≤ 3, σ = log t for t ≥ 3.1 and a C² quintic in between.
#[derive(Debug, Clone)]
pub struct LogTube {
    pub join: (f64, f64),
    quintic: [f64; 6],
}

impl Default for LogTube {
    fn default() -> Self {
        LogTube::new(3.0, 3.1)
    }
}

impl LogTube {
    pub fn new(t0: f64, t1: f64) -> Self {
        // Hermite data in the local variable s = (t − t0) / (t1 − t0).
        let w = t1 - t0;
        let y0 = [t0.ln(), 0.0, 0.0];
        let y1 = [t1.ln(), w / t1, -w * w / (t1 * t1)];
        let mut m = DMatrix::<f64>::zeros(6, 6);
        let mut rhs = DVector::<f64>::zeros(6);
        for (row, (s, y)) in [(0.0f64, y0), (1.0f64, y1)].into_iter().enumerate() {
            for k in 0..6 {
                let kf = k as f64;
                m[(3 * row, k)] = s.powi(k as i32);
                if k >= 1 {
                    m[(3 * row + 1, k)] = kf * s.powi(k as i32 - 1);
                }
                if k >= 2 {
                    m[(3 * row + 2, k)] = kf * (kf - 1.0) * s.powi(k as i32 - 2);
                }
            }
            rhs[3 * row] = y[0];
            rhs[3 * row + 1] = y[1];
            rhs[3 * row + 2] = y[2];
        }
        let c = m.lu().solve(&rhs).expect("Hermite system is regular");
        let mut quintic = [0.0; 6];
        quintic.copy_from_slice(c.as_slice());
        LogTube { join: (t0, t1), quintic }
    }

    /// (σ, σ′, σ″) at t.
    pub fn sigma(&self, t: f64) -> (f64, f64, f64) {
        let (t0, t1) = self.join;
        if t <= t0 {
            (t0.ln(), 0.0, 0.0)
        } else if t >= t1 {
            (t.ln(), 1.0 / t, -1.0 / (t * t))
        } else {
            let w = t1 - t0;
            let s = (t - t0) / w;
            let c = &self.quintic;
            let v = c.iter().rev().fold(0.0, |acc, ck| acc * s + ck);
            let d1 = (1..6).rev().fold(0.0, |acc, k| acc * s + k as f64 * c[k]);
            let d2 = (2..6).rev().fold(0.0, |acc, k| acc * s + (k * (k - 1)) as f64 * c[k]);
            (v, d1 / w, d2 / (w * w))
        }
    }

    /// Principal curvatures along t, θ, φ.
    pub fn principal_curvatures(&self, t: f64) -> [f64; 3] {
        let (s, s1, s2) = self.sigma(t);
        let w = (1.0 + s1 * s1).sqrt();
        [s2 / (w * w * w), -1.0 / (s * w), s1 / (t * w)]
    }

    /// c₂(A) times the volume element 4π² σ t √(1+σ′²), per unit t.
    pub fn c2_density(&self, t: f64) -> f64 {
        let [k1, k2, k3] = self.principal_curvatures(t);
        let (s, s1, _) = self.sigma(t);
        (k1 * k2 + k1 * k3 + k2 * k3) * 4.0 * PI * PI * s * t * (1.0 + s1 * s1).sqrt()
    }

    /// ∫ c₂(A) dΣ over {t < upper}, split as in the closed-form argument.
    pub fn curvature_integrals(&self, upper: f64) -> TubeCurvatureIntegrals {
        let (t0, t1) = self.join;
        let mut breaks = vec![0.0, t0, t1];
        let mut x = t1;
        while x < upper {
            x = (2.0 * x).min(upper);
            breaks.push(x);
        }
        let product = |t: f64| {
            let (s, s1, s2) = self.sigma(t);
            s * s1 * s2 / (1.0 + s1 * s1).powf(1.5)
        };
        let boundary = |t: f64| {
            let (_, s1, s2) = self.sigma(t);
            -t * s2 / (1.0 + s1 * s1).powf(1.5) - s1 / (1.0 + s1 * s1).sqrt()
        };
        let product_term = adaptive_pieces(product, &breaks, 1e-13);
        let boundary_term = adaptive_pieces(boundary, &breaks, 1e-13);
        TubeCurvatureIntegrals {
            upper,
            product_term,
            boundary_term,
            total: 4.0 * PI * PI * (product_term + boundary_term),
            total_from_curvatures: adaptive_pieces(|t| self.c2_density(t), &breaks, 1e-12),
        }
    }

    pub fn chart(&self, extent: f64) -> SurfaceChart {
        let tp = self.clone();
        let tj = self.clone();
        SurfaceChart::new(
            "s1xr2-logtube",
            vec![Interval::closed(0.0, extent), Interval::angle(), Interval::angle()],
            Arc::new(move |x: &[f64]| {
                let (t, th, ph) = (x[0], x[1], x[2]);
                let s = tp.sigma(t).0;
                DVector::from_vec(vec![s * th.cos(), s * th.sin(), t * ph.cos(), t * ph.sin()])
            }),
        )
        .with_jacobian(Arc::new(move |x: &[f64]| {
            let (t, th, ph) = (x[0], x[1], x[2]);
            let (s, s1, _) = tj.sigma(t);
            DMatrix::from_row_slice(
                4,
                3,
                &[
                    s1 * th.cos(), -s * th.sin(), 0.0,
                    s1 * th.sin(), s * th.cos(), 0.0,
                    ph.cos(), 0.0, -t * ph.sin(),
                    ph.sin(), 0.0, t * ph.cos(),
                ],
            )
        }))
        .with_euler_char(0)
        .with_ends(1)
        .with_symmetry(Symmetry::Product)
        .with_radial(RadialCoordinate::Axis { index: 0, angular: Some(2) })
        .with_profile(Arc::new(self.clone()))
    }
}

impl SymmetricProfile for LogTube {
    fn radial_metric(&self, rho: f64) -> f64 {
        let s1 = self.sigma(rho).1;
        1.0 + s1 * s1
    }

    fn shell_measure(&self, rho: f64) -> f64 {
        let (s, s1, _) = self.sigma(rho);
        4.0 * PI * PI * s * rho * (1.0 + s1 * s1).sqrt()
    }

    fn intrinsic_radius(&self) -> bool {
        false
    }
}

/// Pieces of ∫ c₂(A) dΣ for the S¹ × R² tube.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TubeCurvatureIntegrals {
    pub upper: f64,
    /// ∫ σσ′σ″ / (1+σ′²)^{3/2} dt.
    pub product_term: f64,
    /// ∫ (−tσ″ / (1+σ′²)^{3/2} − σ′ / (1+σ′²)^{1/2}) dt.
    pub boundary_term: f64,
    /// 4π² (product_term + boundary_term).
    pub total: f64,
    /// The same integral from the principal curvatures.
    pub total_from_curvatures: f64,
}

/// Optional parameters of catalog surfaces.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SurfaceParams {
    /// Coefficients of F in powers of r² (radial-graph only).
    pub coeffs: Option<Vec<f64>>,
    /// Bump height (gaussian-bump only).
    pub height: Option<f64>,
    /// Half-width of the chart domain.
    pub extent: Option<f64>,
}

/// A catalog entry.
#[derive(Debug, Clone)]
pub struct CatalogSurface {
    pub id: String,
    pub n: usize,
    /// Chart regular everywhere on the surface.
    pub chart: SurfaceChart,
    /// Chart adapted to the symmetry, used for meshes and quadrature.
    pub integration_chart: SurfaceChart,
    pub graph: Option<RadialGraph>,
    pub tube: Option<LogTube>,
    /// Numerical estimate of sup ‖A‖.
    pub sup_norm_a: f64,
    pub note: &'static str,
}

pub const CATALOG_IDS: [&str; 5] = ["plane", "paraboloid", "radial-graph", "gaussian-bump", "s1xr2-logtube"];

pub fn surface(id: &str, params: &SurfaceParams) -> Result<CatalogSurface> {
    let extent = params.extent.unwrap_or(DEFAULT_EXTENT);
    let (height, note) = match id {
        "plane" => (RadialHeight::Polynomial(vec![0.0]), "totally geodesic; no bound state"),
        "paraboloid" => (RadialHeight::Polynomial(vec![0.0, 1.0]), "convex, H > 0, parabolic"),
        "radial-graph" => {
            let coeffs = params.coeffs.clone().ok_or_else(|| {
                Error::InvalidArgument("radial-graph needs coefficients".into())
            })?;
            (RadialHeight::Polynomial(coeffs), "user polynomial in r²")
        }
        "gaussian-bump" => (
            RadialHeight::Gaussian { height: params.height.unwrap_or(1.0) },
            "equality case ∫K = 0",
        ),
        "s1xr2-logtube" => {
            let tube = LogTube::default();
            let chart = tube.chart(extent);
            let sup = scan_sup(extent, |t| {
                tube.principal_curvatures(t).iter().fold(0.0, |m: f64, k| m.max(k.abs()))
            });
            return Ok(CatalogSurface {
                id: id.into(),
                n: 3,
                integration_chart: chart.clone(),
                chart,
                graph: None,
                tube: Some(tube),
                sup_norm_a: sup,
                note: "S¹×R², total c₂ negative",
            });
        }
        other => return Err(Error::InvalidArgument(format!("unknown surface '{other}'"))),
    };
    let graph = RadialGraph::new(height);
    let sup = scan_sup(extent, |r| {
        let (a, b) = graph.height.principal_curvatures(r);
        a.abs().max(b.abs())
    });
    Ok(CatalogSurface {
        id: id.into(),
        n: 2,
        chart: graph.cartesian_chart(id, extent),
        integration_chart: graph.polar_chart(id, extent),
        graph: Some(graph),
        tube: None,
        sup_norm_a: sup,
        note,
    })
}

fn scan_sup<F: Fn(f64) -> f64>(extent: f64, f: F) -> f64 {
    let top = extent.min(200.0);
    let n = 200_000;
    (0..=n)
        .map(|i| f(top * i as f64 / n as f64))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::forms::fundamental_forms_default;
    use crate::geometry::shape::shape_data;
    use approx::assert_relative_eq;

    #[test]
    fn radial_height_derivatives_match_finite_differences() {
        for h in [RadialHeight::Polynomial(vec![0.5, 1.0, -0.2]), RadialHeight::Gaussian { height: 1.3 }] {
            let r = 0.7;
            let e = 1e-5;
            let (_, f1, f2) = h.derivatives(r);
            assert_relative_eq!(f1, (h.value(r + e) - h.value(r - e)) / (2.0 * e), max_relative = 1e-8);
            let (_, d1p, _) = h.derivatives(r + e);
            let (_, d1m, _) = h.derivatives(r - e);
            assert_relative_eq!(f2, (d1p - d1m) / (2.0 * e), max_relative = 1e-8);
        }
    }

    #[test]
    fn paraboloid_principal_curvatures_closed_form() {
        let s = surface("paraboloid", &SurfaceParams::default()).unwrap();
        for (chart, x) in [(&s.chart, vec![0.6, 0.8]), (&s.integration_chart, vec![1.0, 2.0])] {
            let sh = shape_data(&fundamental_forms_default(chart, &x).unwrap()).unwrap();
            let w: f64 = 5.0;
            assert_relative_eq!(sh.principal[0], 2.0 / w.powf(1.5), epsilon = 1e-9);
            assert_relative_eq!(sh.principal[1], 2.0 / w.sqrt(), epsilon = 1e-9);
            assert_relative_eq!(sh.mean, 4.0 * (1.0 - 2.0 / 5.0) / w.sqrt(), epsilon = 1e-9);
        }
    }

    #[test]
    fn catalog_sup_norm_estimates() {
        let p = surface("paraboloid", &SurfaceParams::default()).unwrap();
        assert_relative_eq!(p.sup_norm_a, 2.0, epsilon = 1e-12);
        let g = surface("gaussian-bump", &SurfaceParams::default()).unwrap();
        assert_relative_eq!(g.sup_norm_a, 2.0, epsilon = 1e-12);
        let pl = surface("plane", &SurfaceParams::default()).unwrap();
        assert_eq!(pl.sup_norm_a, 0.0);
        assert!(surface("torus", &SurfaceParams::default()).is_err());
        assert!(surface("radial-graph", &SurfaceParams::default()).is_err());
    }

    #[test]
    fn tube_join_is_c2_and_monotone() {
        let tube = LogTube::default();
        let e = 1e-9;
        for t in [3.0, 3.1] {
            let a = tube.sigma(t - e);
            let b = tube.sigma(t + e);
            assert!((a.0 - b.0).abs() < 1e-7 && (a.1 - b.1).abs() < 1e-6 && (a.2 - b.2).abs() < 1e-5);
        }
        for i in 0..=1000 {
            assert!(tube.sigma(3.0 + 0.1 * i as f64 / 1000.0).1 >= 0.0);
        }
    }

    #[test]
    fn tube_orientation_matches_closed_form_curvatures() {
        let tube = LogTube::default();
        let chart = tube.chart(100.0);
        for t in [1.0, 3.05, 5.0, 40.0] {
            let sh = shape_data(&fundamental_forms_default(&chart, &[t, 0.4, 1.1]).unwrap()).unwrap();
            let mut expect = tube.principal_curvatures(t).to_vec();
            expect.sort_by(|a, b| a.total_cmp(b));
            for (a, b) in sh.principal.iter().zip(&expect) {
                assert_relative_eq!(*a, *b, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn tube_curvature_integral_is_negative() {
        let tube = LogTube::default();
        let ints = tube.curvature_integrals(1e4);
        assert!((ints.boundary_term + 1.0).abs() < 1e-6, "{ints:?}");
        assert!((ints.total - ints.total_from_curvatures).abs() < 1e-8);
        let bound = 4.0 * PI * PI * (6f64.ln() - (3.0 + 10f64.sqrt()).ln() - 1.0);
        assert!(ints.total < 0.0 && ints.total <= bound + 0.05, "{} vs {bound}", ints.total);
    }
}
