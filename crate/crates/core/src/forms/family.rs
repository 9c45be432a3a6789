use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::profile::{Chi1, TransverseProfile};
use crate::error::{Error, Result};
use crate::geometry::{evaluate, RadialHeight, SurfaceChart};
use crate::parabolicity::{capacity_profile, CapacityProfile};

/// Geometry of the base surface at a quadrature point.
#[derive(Debug, Clone)]
pub struct PointGeom {
    pub x: Vec<f64>,
    pub position: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    pub radius: f64,
    pub radius_grad: DVector<f64>,
}

/// A function on the base surface with its gradient in chart coordinates.
pub trait Horizontal: Send + Sync {
    fn eval(&self, p: &PointGeom) -> (f64, DVector<f64>);
    fn name(&self) -> &str;
}

/// ψ(ρ) from a capacity profile.
pub struct RadialLift {
    pub profile: CapacityProfile,
}

impl Horizontal for RadialLift {
    fn eval(&self, p: &PointGeom) -> (f64, DVector<f64>) {
        let (v, d) = self.profile.eval(p.radius);
        (v, &p.radius_grad * d)
    }

    fn name(&self) -> &str {
        "capacity"
    }
}

/// (1 − |X − X_c|²/r²)³ on the ambient ball of radius r around X_c.
pub struct Bump {
    pub center: DVector<f64>,
    pub radius: f64,
}

impl Horizontal for Bump {
    fn eval(&self, p: &PointGeom) -> (f64, DVector<f64>) {
        let diff = &p.position - &self.center;
        let q = diff.norm_squared() / (self.radius * self.radius);
        if q >= 1.0 {
            return (0.0, DVector::zeros(p.x.len()));
        }
        let s = 1.0 - q;
        let dq = p.jacobian.transpose() * &diff * (2.0 / (self.radius * self.radius));
        (s * s * s, dq * (-3.0 * s * s))
    }

    fn name(&self) -> &str {
        "bump"
    }
}

/// C¹ window in the height f: 0 below R−1, 1 on [R, R²], 0 above R²+1.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Window {
    pub big_r: f64,
}

impl Window {
    pub fn breaks(&self) -> [f64; 4] {
        let r = self.big_r;
        [r - 1.0, r, r * r, r * r + 1.0]
    }

    /// (ρ(t), ρ′(t)).
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let [a, b, c, d] = self.breaks();
        let smooth = |s: f64| (s * s * (3.0 - 2.0 * s), 6.0 * s * (1.0 - s));
        if t <= a || t >= d {
            (0.0, 0.0)
        } else if t < b {
            let (v, dv) = smooth((t - a) / (b - a));
            (v, dv / (b - a))
        } else if t <= c {
            (1.0, 0.0)
        } else {
            let (v, dv) = smooth((d - t) / (d - c));
            (v, -dv / (d - c))
        }
    }
}

/// ρ(f), or ρ(f)/f, with f the last ambient coordinate.
pub struct HeightWindow {
    pub window: Window,
    pub divide: bool,
}

impl Horizontal for HeightWindow {
    fn eval(&self, p: &PointGeom) -> (f64, DVector<f64>) {
        let last = p.position.len() - 1;
        let f = p.position[last];
        let (rho, drho) = self.window.eval(f);
        let grad_f = p.jacobian.row(last).transpose();
        if rho == 0.0 && drho == 0.0 {
            return (0.0, DVector::zeros(p.x.len()));
        }
        if self.divide {
            (rho / f, grad_f * ((drho * f - rho) / (f * f)))
        } else {
            (rho, grad_f * drho)
        }
    }

    fn name(&self) -> &str {
        if self.divide {
            "window/f"
        } else {
            "window"
        }
    }
}

/// Transverse factor of a separable term.
#[derive(Debug, Clone)]
pub enum Vertical {
    Ground,
    Chi1(Chi1),
}

impl Vertical {
    pub fn eval(&self, profile: &TransverseProfile, u: f64) -> (f64, f64) {
        match self {
            Vertical::Ground => profile.ground(u),
            Vertical::Chi1(c) => c.eval(profile.a, u),
        }
    }
}

#[derive(Clone)]
pub struct Term {
    pub coeff: f64,
    pub horizontal: Arc<dyn Horizontal>,
    pub vertical: Vertical,
}

/// Σ coeff · h(x) · v(u).
#[derive(Clone, Default)]
pub struct SeparableFn {
    pub terms: Vec<Term>,
}

impl SeparableFn {
    pub fn single(h: Arc<dyn Horizontal>, v: Vertical) -> Self {
        SeparableFn {
            terms: vec![Term { coeff: 1.0, horizontal: h, vertical: v }],
        }
    }

    /// self + eps · other.
    pub fn plus(&self, other: &SeparableFn, eps: f64) -> SeparableFn {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().map(|t| Term { coeff: eps * t.coeff, ..t.clone() }));
        SeparableFn { terms }
    }

    pub fn scaled(&self, c: f64) -> SeparableFn {
        SeparableFn {
            terms: self.terms.iter().map(|t| Term { coeff: c * t.coeff, ..t.clone() }).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Product,
    Perturbed,
    Convex,
}

/// Base function φ and an optional perturbation direction.
#[derive(Clone)]
pub struct TestFunctionFamily {
    pub kind: FamilyKind,
    pub profile: TransverseProfile,
    pub base: SeparableFn,
    pub perturbation: Option<SeparableFn>,
    /// Fixed ε; the optimal value is used when absent.
    pub epsilon: Option<f64>,
    /// Chart radius beyond which every term vanishes.
    pub support_radius: f64,
    /// Chart radii where the horizontal factors lose smoothness.
    pub breakpoints: Vec<f64>,
    /// Capacity profile of the base, if any.
    pub capacity: Option<CapacityProfile>,
    /// Height window of the convex perturbation, if any.
    pub window: Option<Window>,
}

impl TestFunctionFamily {
    /// ξ = ψ χ with ψ the capacity potential of r < ρ < R.
    pub fn product(chart: &SurfaceChart, profile: &TransverseProfile, r: f64, big_r: f64) -> Result<Self> {
        let cap = capacity_profile(chart, r, big_r)?;
        Ok(TestFunctionFamily {
            kind: FamilyKind::Product,
            profile: profile.clone(),
            base: SeparableFn::single(Arc::new(RadialLift { profile: cap.clone() }), Vertical::Ground),
            perturbation: None,
            epsilon: None,
            support_radius: big_r,
            breakpoints: vec![r, big_r],
            capacity: Some(cap),
            window: None,
        })
    }

    /// ξ = ψ χ + ε j χ₁ with j a bump of ambient radius `j_radius` at `center`.
    pub fn perturbed(
        chart: &SurfaceChart,
        profile: &TransverseProfile,
        r: f64,
        big_r: f64,
        center: &[f64],
        j_radius: f64,
    ) -> Result<Self> {
        let (c_rho, _) = chart.radius(center);
        if c_rho + j_radius > r - 1.0 + 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "bump of radius {j_radius} at chart radius {c_rho} leaves B(r − 1) with r = {r}"
            )));
        }
        let mut fam = Self::product(chart, profile, r, big_r)?;
        let bump = Bump {
            center: chart.position(center),
            radius: j_radius,
        };
        fam.kind = FamilyKind::Perturbed;
        fam.perturbation = Some(SeparableFn::single(Arc::new(bump), Vertical::Chi1(profile.chi1.clone())));
        fam.breakpoints.push(c_rho + j_radius);
        if c_rho > j_radius {
            fam.breakpoints.push(c_rho - j_radius);
        }
        fam.breakpoints.sort_by(|a, b| a.total_cmp(b));
        Ok(fam)
    }

    /// Perturbed family with the bump centred where ‖A‖ is largest inside B(r − 1 − j_radius).
    pub fn perturbed_at_peak(
        chart: &SurfaceChart,
        profile: &TransverseProfile,
        r: f64,
        big_r: f64,
        j_radius: f64,
    ) -> Result<Self> {
        let reach = r - 1.0 - j_radius;
        if reach < 0.0 {
            return Err(Error::InvalidArgument(format!("r = {r} too small for a bump of radius {j_radius}")));
        }
        let center = peak_curvature_point(chart, reach)?;
        Self::perturbed(chart, profile, r, big_r, &center, j_radius)
    }

    /// ξ = φ χ + ε ψ χ₁ / f for a convex radial graph with F(0) = 0.
    pub fn convex(
        chart: &SurfaceChart,
        height: &RadialHeight,
        profile: &TransverseProfile,
        big_r: f64,
    ) -> Result<Self> {
        if !(big_r > 2.0) {
            return Err(Error::InvalidArgument(format!("window parameter R = {big_r} must exceed 2")));
        }
        let limit = chart.max_radius();
        let level = |t: f64| radial_level(height, t, limit);
        let window = Window { big_r };
        let [a, b, c, d] = window.breaks();
        let radii = [level(a)?, level(b)?, level(c)?, level(d)?];
        let inner = level(2.0 * big_r * big_r)?;
        // φ ≡ 1 on {f ≤ 2R²}; extend until its capacity energy is at most ½.
        let mut outer = inner + 1.0;
        let cap = loop {
            if outer > limit {
                return Err(Error::TruncationTooSmall(format!(
                    "cutoff around f = 2R² does not fit inside chart radius {limit}"
                )));
            }
            let cap = capacity_profile(chart, inner, outer)?;
            if cap.energy <= 0.5 {
                break cap;
            }
            outer = inner + 2.0 * (outer - inner);
        };
        let base = SeparableFn::single(Arc::new(RadialLift { profile: cap.clone() }), Vertical::Ground);
        let pert = SeparableFn::single(
            Arc::new(HeightWindow { window, divide: true }),
            Vertical::Chi1(profile.chi1.clone()),
        );
        let mut breakpoints = radii.to_vec();
        breakpoints.extend([inner, outer]);
        breakpoints.sort_by(|a, b| a.total_cmp(b));
        Ok(TestFunctionFamily {
            kind: FamilyKind::Convex,
            profile: profile.clone(),
            base,
            perturbation: Some(pert),
            epsilon: None,
            support_radius: outer,
            breakpoints,
            capacity: Some(cap),
            window: Some(window),
        })
    }

    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.epsilon = Some(eps);
        self
    }

    /// The single function φ + ε·perturbation.
    pub fn combined(&self, eps: f64) -> SeparableFn {
        match &self.perturbation {
            Some(p) => self.base.plus(p, eps),
            None => self.base.clone(),
        }
    }
}

/// Chart radius where F = t, by bisection on the monotone height.
pub fn radial_level(height: &RadialHeight, t: f64, limit: f64) -> Result<f64> {
    let f0 = height.value(0.0);
    if t <= f0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while height.value(hi) < t {
        hi *= 2.0;
        if hi > limit {
            return Err(Error::LevelSetEscapesTruncation { level: t, radius: limit });
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if height.value(mid) < t {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn peak_curvature_point(chart: &SurfaceChart, reach: f64) -> Result<Vec<f64>> {
    let mut best = (f64::NEG_INFINITY, chart.point_at(0.0, 0.0));
    let rings = 40;
    let angles = 16;
    for i in 0..=rings {
        let rho = reach * i as f64 / rings as f64;
        let count = if rho == 0.0 { 1 } else { angles };
        for k in 0..count {
            let x = chart.point_at(rho, 2.0 * PI * k as f64 / count as f64);
            let norm = match evaluate(chart, &x) {
                Ok((_, s)) => s.norm_a,
                Err(Error::SingularChart { .. }) => continue,
                Err(e) => return Err(e),
            };
            if norm > best.0 + 1e-12 {
                best = (norm, x);
            }
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn point(x: Vec<f64>, position: Vec<f64>, jac: DMatrix<f64>) -> PointGeom {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        PointGeom {
            radius_grad: DVector::from_vec(vec![x[0] / r, x[1] / r]),
            x,
            position: DVector::from_vec(position),
            jacobian: jac,
            radius: r,
        }
    }

    #[test]
    fn window_is_c1() {
        let w = Window { big_r: 5.0 };
        for t in w.breaks() {
            let (a, da) = w.eval(t - 1e-9);
            let (b, db) = w.eval(t + 1e-9);
            assert!((a - b).abs() < 1e-7 && (da - db).abs() < 1e-6, "t = {t}");
        }
        assert_eq!(w.eval(10.0).0, 1.0);
        assert_eq!(w.eval(3.0).0, 0.0);
    }

    #[test]
    fn bump_gradient_matches_finite_difference() {
        let bump = Bump { center: DVector::from_vec(vec![0.0, 0.0, 1.0]), radius: 1.5 };
        let h = RadialHeight::Gaussian { height: 1.0 };
        let geom = |x: f64, y: f64| {
            let (_, fs, _) = h.in_s(x * x + y * y);
            let jac = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 2.0 * x * fs, 2.0 * y * fs]);
            point(vec![x, y], vec![x, y, h.value((x * x + y * y).sqrt())], jac)
        };
        let (x, y, e) = (0.4, -0.3, 1e-6);
        let (_, g) = bump.eval(&geom(x, y));
        let dx = (bump.eval(&geom(x + e, y)).0 - bump.eval(&geom(x - e, y)).0) / (2.0 * e);
        let dy = (bump.eval(&geom(x, y + e)).0 - bump.eval(&geom(x, y - e)).0) / (2.0 * e);
        assert_relative_eq!(g[0], dx, max_relative = 1e-7);
        assert_relative_eq!(g[1], dy, max_relative = 1e-7);
    }

    #[test]
    fn radial_level_inverts_the_height() {
        let h = RadialHeight::Polynomial(vec![0.0, 1.0]);
        assert_relative_eq!(radial_level(&h, 49.0, 100.0).unwrap(), 7.0, max_relative = 1e-14);
        assert!(matches!(radial_level(&h, 1e6, 100.0), Err(Error::LevelSetEscapesTruncation { .. })));
    }
}
