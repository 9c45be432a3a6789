use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

pub type PositionFn = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub periodic: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, periodic: false }
    }

    pub fn periodic(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, periodic: true }
    }

    pub fn angle() -> Self {
        Interval::periodic(0.0, 2.0 * PI)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    Radial,
    Product,
    None,
}

/// How the chart radius is read off a parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialCoordinate {
    /// Euclidean norm of the first two parameters.
    Norm,
    /// A single parameter, optionally paired with an angular parameter.
    Axis { index: usize, angular: Option<usize> },
}

/// Metric data of a chart whose geometry depends on the radius alone.
pub trait SymmetricProfile: Send + Sync {
    /// Metric coefficient along the radial parameter.
    fn radial_metric(&self, rho: f64) -> f64;
    /// Area density of the level set `{radius = rho}` integrated over the
    /// angular parameters, so that dΣ = shell_measure(rho) d(rho).
    fn shell_measure(&self, rho: f64) -> f64;
    /// Whether balls are measured by intrinsic arclength along the radius.
    fn intrinsic_radius(&self) -> bool;
}

/// A parametrized hypersurface patch X: U ⊂ Rⁿ → Rⁿ⁺¹.
#[derive(Clone)]
pub struct SurfaceChart {
    name: String,
    domain: Vec<Interval>,
    position: PositionFn,
    jacobian: Option<JacobianFn>,
    euler_char: Option<i64>,
    end_count: usize,
    symmetry: Symmetry,
    radial: RadialCoordinate,
    profile: Option<Arc<dyn SymmetricProfile>>,
}

impl fmt::Debug for SurfaceChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SurfaceChart")
            .field("name", &self.name)
            .field("n", &self.n())
            .field("domain", &self.domain)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("euler_char", &self.euler_char)
            .field("symmetry", &self.symmetry)
            .finish()
    }
}

impl SurfaceChart {
    pub fn new(name: impl Into<String>, domain: Vec<Interval>, position: PositionFn) -> Self {
        SurfaceChart {
            name: name.into(),
            domain,
            position,
            jacobian: None,
            euler_char: None,
            end_count: 1,
            symmetry: Symmetry::None,
            radial: RadialCoordinate::Norm,
            profile: None,
        }
    }

    pub fn with_jacobian(mut self, jacobian: JacobianFn) -> Self {
        self.jacobian = Some(jacobian);
        self
    }

    pub fn with_euler_char(mut self, e: i64) -> Self {
        self.euler_char = Some(e);
        self
    }

    pub fn with_ends(mut self, ends: usize) -> Self {
        self.end_count = ends;
        self
    }

    pub fn with_symmetry(mut self, symmetry: Symmetry) -> Self {
        self.symmetry = symmetry;
        self
    }

    pub fn with_radial(mut self, radial: RadialCoordinate) -> Self {
        self.radial = radial;
        self
    }

    pub fn with_profile(mut self, profile: Arc<dyn SymmetricProfile>) -> Self {
        self.profile = Some(profile);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.domain.len()
    }

    pub fn domain(&self) -> &[Interval] {
        &self.domain
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn radial(&self) -> RadialCoordinate {
        self.radial
    }

    pub fn profile(&self) -> Option<&dyn SymmetricProfile> {
        self.profile.as_deref()
    }

    pub fn profile_arc(&self) -> Option<Arc<dyn SymmetricProfile>> {
        self.profile.clone()
    }

    pub fn end_count(&self) -> usize {
        self.end_count
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn euler_char(&self) -> Result<i64> {
        self.euler_char
            .ok_or_else(|| Error::UnknownEulerChar(self.name.clone()))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.n()
            && x.iter().zip(&self.domain).all(|(&xi, iv)| {
                xi.is_finite() && (iv.periodic || (xi >= iv.lo && xi <= iv.hi))
            })
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::DomainError { point: x.to_vec() })
        }
    }

    pub fn position(&self, x: &[f64]) -> DVector<f64> {
        (self.position)(x)
    }

    pub fn analytic_jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        self.jacobian.as_ref().map(|j| j(x))
    }

    /// Chart radius of a parameter point and its parameter gradient.
    pub fn radius(&self, x: &[f64]) -> (f64, DVector<f64>) {
        let mut grad = DVector::zeros(self.n());
        match self.radial {
            RadialCoordinate::Norm => {
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                if r > 0.0 {
                    grad[0] = x[0] / r;
                    grad[1] = x[1] / r;
                }
                (r, grad)
            }
            RadialCoordinate::Axis { index, .. } => {
                grad[index] = 1.0;
                (x[index], grad)
            }
        }
    }

    /// The parameter point at chart radius `rho` and angle `angle`.
    pub fn point_at(&self, rho: f64, angle: f64) -> Vec<f64> {
        let mut x: Vec<f64> = self
            .domain
            .iter()
            .map(|iv| if iv.periodic { iv.lo } else { 0.5 * (iv.lo + iv.hi) })
            .collect();
        match self.radial {
            RadialCoordinate::Norm => {
                for xi in x.iter_mut() {
                    *xi = 0.0;
                }
                x[0] = rho * angle.cos();
                x[1] = rho * angle.sin();
            }
            RadialCoordinate::Axis { index, angular } => {
                x[index] = rho;
                if let Some(k) = angular {
                    x[k] = angle;
                }
            }
        }
        x
    }

    /// Largest chart radius inside the domain.
    pub fn max_radius(&self) -> f64 {
        match self.radial {
            RadialCoordinate::Norm => self.domain[0].hi.min(self.domain[1].hi),
            RadialCoordinate::Axis { index, .. } => self.domain[index].hi,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane() -> SurfaceChart {
        SurfaceChart::new(
            "plane",
            vec![Interval::closed(-1.0, 1.0), Interval::closed(-1.0, 1.0)],
            Arc::new(|x: &[f64]| DVector::from_vec(vec![x[0], x[1], 0.0])),
        )
    }

    #[test]
    fn domain_membership() {
        let c = plane();
        assert!(c.contains(&[0.5, -1.0]));
        assert!(!c.contains(&[1.5, 0.0]));
        assert!(!c.contains(&[f64::NAN, 0.0]));
        assert!(matches!(c.check(&[2.0, 0.0]), Err(Error::DomainError { .. })));
    }

    #[test]
    fn unknown_euler_characteristic_is_an_error() {
        assert!(matches!(plane().euler_char(), Err(Error::UnknownEulerChar(_))));
        assert_eq!(plane().with_euler_char(1).euler_char().unwrap(), 1);
    }

    #[test]
    fn norm_radius_and_point_at_agree() {
        let c = plane();
        let x = c.point_at(0.5, 1.0);
        let (r, g) = c.radius(&x);
        assert!((r - 0.5).abs() < 1e-15);
        assert!((g.norm() - 1.0).abs() < 1e-15);
    }
}
