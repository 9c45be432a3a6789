//! The layer Ω = Σ × (−a, a) in normal coordinates.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{evaluate, FundamentalForms, ShapeData, SurfaceChart};

/// Half-thickness `a` and the safety constant `C0` in a‖A‖ < C0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayerConfig {
    pub a: f64,
    pub c0: f64,
}

impl LayerConfig {
    pub fn new(a: f64, c0: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidArgument(format!("half-thickness must be positive, got {a}")));
        }
        if !(c0 > 0.0 && c0 < 1.0) {
            return Err(Error::InvalidArgument(format!("C0 must lie in (0, 1), got {c0}")));
        }
        Ok(LayerConfig { a, c0 })
    }

    pub fn kappa1(&self) -> f64 {
        PI / (2.0 * self.a)
    }

    pub fn kappa1_sq(&self) -> f64 {
        let k = self.kappa1();
        k * k
    }
}

/// Metric of Ω at (x, u).
#[derive(Debug, Clone)]
pub struct LayerMetric {
    /// G_ij = ((I − uA)ᵀ g (I − uA))_ij on the tangential block.
    pub g_tangent: DMatrix<f64>,
    pub g_tangent_inv: DMatrix<f64>,
    pub det_g: f64,
    /// det(I − uA) = Σ (−u)ᵏ cₖ.
    pub density: f64,
}

impl LayerMetric {
    /// The full (n+1)×(n+1) metric with G_uu = 1 and no mixed terms.
    pub fn full(&self) -> DMatrix<f64> {
        let n = self.g_tangent.nrows();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(&self.g_tangent);
        m[(n, n)] = 1.0;
        m
    }
}

/// det(I − uA) from the elementary symmetric functions.
pub fn density(shape: &ShapeData, u: f64) -> f64 {
    let mut acc = 0.0;
    let mut pow = 1.0;
    for &c in &shape.elem_sym {
        acc += pow * c;
        pow *= -u;
    }
    acc
}

pub fn layer_metric(
    forms: &FundamentalForms,
    shape: &ShapeData,
    u: f64,
    config: &LayerConfig,
) -> Result<LayerMetric> {
    if u.abs() >= config.a {
        return Err(Error::InvalidArgument(format!("|u| = {} must be below a = {}", u.abs(), config.a)));
    }
    if config.a * shape.norm_a >= config.c0 {
        return Err(Error::ValidityError {
            value: config.a * shape.norm_a,
            c0: config.c0,
            point: forms.point.clone(),
        });
    }
    Ok(layer_metric_unchecked(forms, shape, u))
}

pub(crate) fn layer_metric_unchecked(forms: &FundamentalForms, shape: &ShapeData, u: f64) -> LayerMetric {
    let n = forms.g.nrows();
    let m = DMatrix::identity(n, n) - &shape.weingarten * u;
    let g_tangent = m.transpose() * &forms.g * &m;
    let g_tangent = (&g_tangent + g_tangent.transpose()) * 0.5;
    let dens = density(shape, u);
    let det_g = dens * dens * forms.g.determinant();
    let minv = m.try_inverse().unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
    let g_tangent_inv = &minv * &shape.g_inv * minv.transpose();
    LayerMetric {
        g_tangent,
        g_tangent_inv,
        det_g,
        density: dens,
    }
}

/// Lower and upper bounds for det(I − uA) in terms of |u|‖A‖.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeasureBounds {
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
}

impl MeasureBounds {
    pub fn holds(&self) -> bool {
        let slack = 1e-12 * self.upper.abs().max(1.0);
        self.lower <= self.value + slack && self.value <= self.upper + slack
    }
}

pub fn measure_bounds_check(shape: &ShapeData, u: f64) -> MeasureBounds {
    let n = shape.n() as i32;
    let t = u.abs() * shape.norm_a;
    let b = MeasureBounds {
        lower: (1.0 - t).powi(n),
        value: density(shape, u).abs(),
        upper: (1.0 + t).powi(n),
    };
    debug_assert!(t >= 1.0 || b.holds(), "measure bounds violated: {b:?}");
    b
}

/// Chart points arranged on circles of given radii.
#[derive(Debug, Clone)]
pub struct SampleGrid {
    pub points: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
}

impl SampleGrid {
    /// `n_angles` points on each circle; radius 0 yields a single point.
    pub fn rings(chart: &SurfaceChart, radii: &[f64], n_angles: usize) -> Self {
        let mut points = Vec::new();
        let mut rs = Vec::new();
        for &r in radii {
            let count = if r == 0.0 { 1 } else { n_angles.max(1) };
            for k in 0..count {
                let angle = 2.0 * PI * k as f64 / count as f64;
                points.push(chart.point_at(r, angle));
                rs.push(r);
            }
        }
        SampleGrid { points, radii: rs }
    }

    /// Uniformly spaced radii 0, r_max/(n−1), …, r_max.
    pub fn uniform(chart: &SurfaceChart, r_max: f64, n_radii: usize, n_angles: usize) -> Self {
        let radii: Vec<f64> = (0..n_radii)
            .map(|i| r_max * i as f64 / (n_radii - 1).max(1) as f64)
            .collect();
        Self::rings(chart, &radii, n_angles)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailFit {
    /// ‖A‖ ≈ coefficient · r^exponent on the outer third of the samples.
    pub exponent: f64,
    pub coefficient: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidityReport {
    pub sup_a_norm: f64,
    pub argmax: Vec<f64>,
    pub margin: f64,
    /// (radius, max ‖A‖ on that circle).
    pub decay_profile: Vec<(f64, f64)>,
    pub tail: Option<TailFit>,
}

pub fn validity_scan(chart: &SurfaceChart, config: &LayerConfig, grid: &SampleGrid) -> Result<ValidityReport> {
    let norms: Vec<f64> = grid
        .points
        .par_iter()
        .map(|x| evaluate(chart, x).map(|(_, s)| s.norm_a))
        .collect::<Result<_>>()?;

    let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
    for (i, &v) in norms.iter().enumerate() {
        if v > best {
            best = v;
            arg = i;
        }
    }
    let mut profile: Vec<(f64, f64)> = Vec::new();
    for (&r, &v) in grid.radii.iter().zip(&norms) {
        match profile.last_mut() {
            Some(last) if last.0 == r => last.1 = last.1.max(v),
            _ => profile.push((r, v)),
        }
    }
    let sup = config.a * best;
    if sup >= config.c0 {
        return Err(Error::ValidityError {
            value: sup,
            c0: config.c0,
            point: grid.points[arg].clone(),
        });
    }
    Ok(ValidityReport {
        sup_a_norm: sup,
        argmax: grid.points[arg].clone(),
        margin: config.c0 - sup,
        tail: tail_fit(&profile),
        decay_profile: profile,
    })
}

fn tail_fit(profile: &[(f64, f64)]) -> Option<TailFit> {
    let r_max = profile.iter().map(|p| p.0).fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = profile
        .iter()
        .filter(|(r, v)| *r >= 2.0 * r_max / 3.0 && *r > 0.0 && *v > 0.0)
        .map(|(r, v)| (r.ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some(TailFit {
        exponent: slope,
        coefficient: (my - slope * mx).exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{surface, SurfaceParams};
    use approx::assert_relative_eq;

    #[test]
    fn kappa_one() {
        let c = LayerConfig::new(0.4, 0.9).unwrap();
        assert_relative_eq!(c.kappa1() * 2.0 * c.a, PI, epsilon = 1e-15);
        assert!(LayerConfig::new(-1.0, 0.9).is_err());
        assert!(LayerConfig::new(0.4, 1.0).is_err());
    }

    #[test]
    fn paraboloid_apex_layer_metric() {
        let s = surface("paraboloid", &SurfaceParams::default()).unwrap();
        let cfg = LayerConfig::new(0.4, 0.9).unwrap();
        let (f, sh) = evaluate(&s.chart, &[0.0, 0.0]).unwrap();
        let m = layer_metric(&f, &sh, 0.1, &cfg).unwrap();
        assert_relative_eq!(m.density, 0.64, epsilon = 1e-9);
        assert_relative_eq!(m.det_g, 0.4096, epsilon = 1e-9);
        assert_relative_eq!(m.g_tangent[(0, 0)], 0.64, epsilon = 1e-9);
        let full = m.full();
        assert_eq!(full[(2, 2)], 1.0);
        assert_eq!(full[(0, 2)], 0.0);
        let id = &m.g_tangent * &m.g_tangent_inv;
        assert!((id - DMatrix::identity(2, 2)).abs().max() < 1e-12);
    }

    #[test]
    fn plane_layer_is_flat() {
        let s = surface("plane", &SurfaceParams::default()).unwrap();
        let cfg = LayerConfig::new(1.0, 0.9).unwrap();
        let (f, sh) = evaluate(&s.chart, &[3.0, -2.0]).unwrap();
        let m = layer_metric(&f, &sh, 0.9, &cfg).unwrap();
        assert!((m.full() - DMatrix::identity(3, 3)).abs().max() < 1e-14);
        assert_eq!(m.density, 1.0);
    }

    #[test]
    fn validity_scan_paraboloid() {
        let s = surface("paraboloid", &SurfaceParams::default()).unwrap();
        let grid = SampleGrid::uniform(&s.chart, 50.0, 101, 8);
        let ok = validity_scan(&s.chart, &LayerConfig::new(0.4, 0.9).unwrap(), &grid).unwrap();
        assert_relative_eq!(ok.sup_a_norm, 0.8, epsilon = 1e-9);
        assert_eq!(ok.argmax, vec![0.0, 0.0]);
        let tail = ok.tail.unwrap();
        assert!((tail.exponent + 1.0).abs() < 0.05, "{tail:?}");
        let err = validity_scan(&s.chart, &LayerConfig::new(0.6, 0.9).unwrap(), &grid).unwrap_err();
        match err {
            Error::ValidityError { value, .. } => assert_relative_eq!(value, 1.2, epsilon = 1e-9),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn too_thick_layer_is_rejected_pointwise() {
        let s = surface("paraboloid", &SurfaceParams::default()).unwrap();
        let (f, sh) = evaluate(&s.chart, &[0.0, 0.0]).unwrap();
        let cfg = LayerConfig::new(0.6, 0.9).unwrap();
        assert!(matches!(layer_metric(&f, &sh, 0.0, &cfg), Err(Error::ValidityError { .. })));
    }
}
