use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::family::{PointGeom, SeparableFn, TestFunctionFamily, Vertical};
use super::profile::{curvature_integrand, mu_coefficients, TransverseProfile};
use crate::error::{Error, Result};
use crate::geometry::{evaluate, RadialCoordinate, ShapeData, SurfaceChart};
use crate::layer::{layer_metric_unchecked, LayerConfig};
use crate::quadrature::GaussRule;

/// Tensor grid of quadrature cells; two Gauss points per cell on every axis.
#[derive(Debug, Clone, Serialize)]
pub struct QuadGrid {
    /// Cell edges along the chart radius.
    pub radial_edges: Vec<f64>,
    /// Cells along each remaining horizontal axis.
    pub angle_cells: usize,
    pub u_cells: usize,
}

impl QuadGrid {
    /// Edges graded between breakpoints: uniform from 0, geometric elsewhere.
    pub fn graded(breakpoints: &[f64], support: f64, per_segment: usize, per_decade: usize) -> Self {
        let mut knots: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|&b| b > 0.0 && b < support)
            .collect();
        knots.push(0.0);
        knots.push(support);
        knots.sort_by(|a, b| a.total_cmp(b));
        knots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
        let mut edges = vec![0.0];
        for w in knots.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if lo == 0.0 {
                for i in 1..=per_segment {
                    edges.push(hi * i as f64 / per_segment as f64);
                }
            } else {
                let decades = (hi / lo).log10();
                let m = per_segment.max((per_decade as f64 * decades).ceil() as usize);
                for i in 1..=m {
                    edges.push(lo * (hi / lo).powf(i as f64 / m as f64));
                }
                *edges.last_mut().unwrap() = hi;
            }
        }
        QuadGrid { radial_edges: edges, angle_cells: 8, u_cells: 64 }
    }

    pub fn for_family(family: &TestFunctionFamily) -> Self {
        Self::graded(&family.breakpoints, family.support_radius, 16, 16)
    }

    /// Every cell halved on every axis.
    pub fn refined(&self) -> Self {
        let mut edges = Vec::with_capacity(2 * self.radial_edges.len());
        for w in self.radial_edges.windows(2) {
            edges.push(w[0]);
            edges.push(0.5 * (w[0] + w[1]));
        }
        edges.push(*self.radial_edges.last().unwrap());
        QuadGrid {
            radial_edges: edges,
            angle_cells: 2 * self.angle_cells,
            u_cells: 2 * self.u_cells,
        }
    }

    pub fn outer(&self) -> f64 {
        *self.radial_edges.last().unwrap()
    }
}

/// A horizontal quadrature point with its chart-measure weight.
struct HPoint {
    x: Vec<f64>,
    weight: f64,
}

/// Horizontal points of one radial cell: polar for norm charts, tensor otherwise.
fn cell_points(chart: &SurfaceChart, lo: f64, hi: f64, angle_cells: usize) -> Result<Vec<HPoint>> {
    let rule = GaussRule::new(2);
    let mut out = Vec::new();
    match chart.radial() {
        RadialCoordinate::Norm => {
            if chart.n() != 2 {
                return Err(Error::UnsupportedDimension(chart.n()));
            }
            let dt = 2.0 * PI / angle_cells as f64;
            for (rho, wr) in rule.on(lo, hi) {
                for k in 0..angle_cells {
                    for (t, wt) in rule.on(k as f64 * dt, (k + 1) as f64 * dt) {
                        out.push(HPoint { x: chart.point_at(rho, t), weight: wr * wt * rho });
                    }
                }
            }
        }
        RadialCoordinate::Axis { index, .. } => {
            let others: Vec<usize> = (0..chart.n()).filter(|&i| i != index).collect();
            let mut partial: Vec<(Vec<f64>, f64)> = rule
                .on(lo, hi)
                .map(|(rho, w)| {
                    let mut x = vec![0.0; chart.n()];
                    x[index] = rho;
                    (x, w)
                })
                .collect();
            for &axis in &others {
                let iv = chart.domain()[axis];
                let dt = iv.width() / angle_cells as f64;
                let mut next = Vec::with_capacity(partial.len() * 2 * angle_cells);
                for (x, w) in &partial {
                    for k in 0..angle_cells {
                        let a = iv.lo + k as f64 * dt;
                        for (t, wt) in rule.on(a, a + dt) {
                            let mut y = x.clone();
                            y[axis] = t;
                            next.push((y, w * wt));
                        }
                    }
                }
                partial = next;
            }
            out.extend(partial.into_iter().map(|(x, weight)| HPoint { x, weight }));
        }
    }
    Ok(out)
}

/// Bilinear-form matrices over a list of separable terms.
#[derive(Debug, Clone)]
pub struct FormMatrices {
    /// ∫ G^{ij} ∂ᵢξₛ ∂ⱼξₜ dΩ.
    pub grad: DMatrix<f64>,
    /// ∫ ∂ᵤξₛ ∂ᵤξₜ dΩ.
    pub trans: DMatrix<f64>,
    /// ∫ ξₛ ξₜ dΩ.
    pub mass: DMatrix<f64>,
    /// ∫ ψₛψₜ Σ μ₂ₖ c₂ₖ dΣ for pairs of ground-mode terms, zero otherwise.
    pub mu_expansion: DMatrix<f64>,
    pub kappa1_sq: f64,
    /// Largest a‖A‖ met on the grid.
    pub sup_a_norm: f64,
}

impl FormMatrices {
    fn quad(m: &DMatrix<f64>, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, xi) in x.iter().enumerate() {
            for (j, yj) in y.iter().enumerate() {
                s += xi * m[(i, j)] * yj;
            }
        }
        s
    }

    pub fn q1(&self, x: &[f64], y: &[f64]) -> f64 {
        Self::quad(&self.grad, x, y)
    }

    pub fn q2(&self, x: &[f64], y: &[f64]) -> f64 {
        Self::quad(&self.trans, x, y) - self.kappa1_sq * Self::quad(&self.mass, x, y)
    }

    pub fn q(&self, x: &[f64], y: &[f64]) -> f64 {
        self.q1(x, y) + self.q2(x, y)
    }

    pub fn norm_sq(&self, x: &[f64]) -> f64 {
        Self::quad(&self.mass, x, x)
    }

    pub fn energy(&self, x: &[f64]) -> f64 {
        Self::quad(&self.grad, x, x) + Self::quad(&self.trans, x, x)
    }

    pub fn mu_q2(&self, x: &[f64]) -> f64 {
        Self::quad(&self.mu_expansion, x, x)
    }

    fn add(&mut self, other: &FormMatrices) {
        self.grad += &other.grad;
        self.trans += &other.trans;
        self.mass += &other.mass;
        self.mu_expansion += &other.mu_expansion;
        self.sup_a_norm = self.sup_a_norm.max(other.sup_a_norm);
    }
}

fn zeros(m: usize, kappa1_sq: f64) -> FormMatrices {
    FormMatrices {
        grad: DMatrix::zeros(m, m),
        trans: DMatrix::zeros(m, m),
        mass: DMatrix::zeros(m, m),
        mu_expansion: DMatrix::zeros(m, m),
        kappa1_sq,
        sup_a_norm: 0.0,
    }
}

/// Assemble the form matrices of the terms of `f` on `grid`.
pub fn assemble_forms(
    chart: &SurfaceChart,
    config: &LayerConfig,
    profile: &TransverseProfile,
    f: &SeparableFn,
    grid: &QuadGrid,
) -> Result<FormMatrices> {
    let m = f.terms.len();
    let k2 = profile.kappa1_sq();
    let mu = mu_coefficients(profile.a, 2 * (chart.n() / 2));
    let rule = GaussRule::new(2);
    let du = 2.0 * profile.a / grid.u_cells as f64;
    let u_nodes: Vec<(f64, f64)> = (0..grid.u_cells)
        .flat_map(|k| {
            let lo = -profile.a + k as f64 * du;
            rule.on(lo, lo + du).collect::<Vec<_>>()
        })
        .collect();
    let verticals: Vec<Vec<(f64, f64)>> = u_nodes
        .iter()
        .map(|&(u, _)| f.terms.iter().map(|t| t.vertical.eval(profile, u)).collect())
        .collect();
    let ground: Vec<bool> = f.terms.iter().map(|t| matches!(t.vertical, Vertical::Ground)).collect();

    let parts: Vec<Result<FormMatrices>> = grid
        .radial_edges
        .par_windows(2)
        .map(|w| {
            let mut acc = zeros(m, k2);
            for p in cell_points(chart, w[0], w[1], grid.angle_cells)? {
                let (forms, shape) = evaluate(chart, &p.x)?;
                let an = config.a * shape.norm_a;
                if an >= config.c0 {
                    return Err(Error::ValidityError { value: an, c0: config.c0, point: p.x.clone() });
                }
                acc.sup_a_norm = acc.sup_a_norm.max(an);
                let (radius, radius_grad) = chart.radius(&p.x);
                let geom = PointGeom {
                    x: p.x.clone(),
                    position: forms.position.clone(),
                    jacobian: forms.jacobian.clone(),
                    radius,
                    radius_grad,
                };
                let hs: Vec<_> = f
                    .terms
                    .iter()
                    .map(|t| {
                        let (v, g) = t.horizontal.eval(&geom);
                        (t.coeff * v, g * t.coeff)
                    })
                    .collect();
                if hs.iter().all(|(v, g)| *v == 0.0 && g.iter().all(|c| *c == 0.0)) {
                    continue;
                }
                let base_w = p.weight * shape.sqrt_det_g;
                accumulate_point(&mut acc, &forms, &shape, &hs, &u_nodes, &verticals, base_w);
                let curv = curvature_integrand(&shape, &mu);
                for s in 0..m {
                    for t in 0..m {
                        if ground[s] && ground[t] {
                            acc.mu_expansion[(s, t)] += base_w * hs[s].0 * hs[t].0 * curv;
                        }
                    }
                }
            }
            Ok(acc)
        })
        .collect();

    let mut total = zeros(m, k2);
    for part in parts {
        total.add(&part?);
    }
    Ok(total)
}

fn accumulate_point(
    acc: &mut FormMatrices,
    forms: &crate::geometry::FundamentalForms,
    shape: &ShapeData,
    hs: &[(f64, nalgebra::DVector<f64>)],
    u_nodes: &[(f64, f64)],
    verticals: &[Vec<(f64, f64)>],
    base_w: f64,
) {
    let m = hs.len();
    for ((u, wu), vs) in u_nodes.iter().zip(verticals) {
        let metric = layer_metric_unchecked(forms, shape, *u);
        let w = base_w * wu * metric.density.abs();
        for s in 0..m {
            let gs = &metric.g_tangent_inv * &hs[s].1;
            for t in s..m {
                let grad = gs.dot(&hs[t].1) * vs[s].0 * vs[t].0;
                let trans = hs[s].0 * hs[t].0 * vs[s].1 * vs[t].1;
                let mass = hs[s].0 * hs[t].0 * vs[s].0 * vs[t].0;
                acc.grad[(s, t)] += w * grad;
                acc.trans[(s, t)] += w * trans;
                acc.mass[(s, t)] += w * mass;
                if t != s {
                    acc.grad[(t, s)] += w * grad;
                    acc.trans[(t, s)] += w * trans;
                    acc.mass[(t, s)] += w * mass;
                }
            }
        }
    }
}

/// ε* = −cross/quad and Q_min = Q − cross²/quad.
pub fn perturbation_optimize(q: f64, cross: f64, quad: f64, error: f64) -> Result<(f64, f64)> {
    if !(quad > 0.0) {
        return Err(Error::InvalidArgument(format!("Q(jχ₁, jχ₁) = {quad} must be positive")));
    }
    if cross.abs() <= error {
        return Err(Error::DegeneratePerturbation { cross, error });
    }
    let eps = -cross / quad;
    Ok((eps, q - cross * cross / quad))
}

/// Values of the forms on one grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FormValues {
    pub q1: f64,
    pub q2: f64,
    pub q: f64,
    pub norm_sq: f64,
    pub energy: f64,
    pub q2_mu: Option<f64>,
    pub cross: Option<f64>,
    pub quad: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct QuadFormReport {
    pub q1: f64,
    pub q2: f64,
    pub q: f64,
    /// ∫ φ² dΩ.
    pub norm_sq: f64,
    /// (Q + κ₁²‖φ‖²)/‖φ‖².
    pub rayleigh: f64,
    /// ∫ ψ² Σ μ₂ₖ c₂ₖ dΣ for product bases.
    pub q2_mu_expansion: Option<f64>,
    pub cross: Option<f64>,
    pub quad: Option<f64>,
    pub epsilon_star: Option<f64>,
    /// Whether ε* hit the subordination clamp.
    pub epsilon_clamped: bool,
    /// Form value of the optimized (or fixed-ε) function.
    pub q_min: f64,
    /// Rayleigh quotient of the optimized function.
    pub rayleigh_min: f64,
    /// ∫ φ² dΩ of the optimized function.
    pub norm_sq_min: f64,
    pub quadrature_error: f64,
    /// Largest a‖A‖ met on the grid.
    pub sup_a_norm: f64,
    pub coarse: FormValues,
    pub fine: FormValues,
    pub certified: bool,
}

fn values(mats: &FormMatrices, base: &[f64], pert: Option<&[f64]>, has_mu: bool) -> FormValues {
    FormValues {
        q1: mats.q1(base, base),
        q2: mats.q2(base, base),
        q: mats.q(base, base),
        norm_sq: mats.norm_sq(base),
        energy: mats.energy(base),
        q2_mu: has_mu.then(|| mats.mu_q2(base)),
        cross: pert.map(|p| mats.q(base, p)),
        quad: pert.map(|p| mats.q(p, p)),
    }
}

/// Sup of |h·v| over the sampled points, for the ε clamp.
fn sup_abs(chart: &SurfaceChart, profile: &TransverseProfile, f: &SeparableFn, grid: &QuadGrid) -> Result<f64> {
    let us: Vec<f64> = (0..=64).map(|i| -profile.a + 2.0 * profile.a * i as f64 / 64.0).collect();
    let mut sup: f64 = 0.0;
    for w in grid.radial_edges.windows(2) {
        for p in cell_points(chart, w[0], w[1], 2)? {
            let (forms, _) = evaluate(chart, &p.x)?;
            let (radius, radius_grad) = chart.radius(&p.x);
            let geom = PointGeom {
                x: p.x.clone(),
                position: forms.position,
                jacobian: forms.jacobian,
                radius,
                radius_grad,
            };
            let hv: Vec<f64> = f.terms.iter().map(|t| t.coeff * t.horizontal.eval(&geom).0).collect();
            for &u in &us {
                let v: f64 = f
                    .terms
                    .iter()
                    .zip(&hv)
                    .map(|(t, h)| h * t.vertical.eval(profile, u).0)
                    .sum();
                sup = sup.max(v.abs());
            }
        }
    }
    Ok(sup)
}

/// Evaluate Q, Q₁, Q₂ and the perturbation optimum of a family on `grid`
/// and on its refinement; the refined values are reported.
pub fn evaluate_q(
    family: &TestFunctionFamily,
    chart: &SurfaceChart,
    config: &LayerConfig,
    grid: &QuadGrid,
) -> Result<QuadFormReport> {
    let mut combined = family.base.clone();
    let nb = combined.terms.len();
    if let Some(p) = &family.perturbation {
        combined.terms.extend(p.terms.iter().cloned());
    }
    let m = combined.terms.len();
    let base: Vec<f64> = (0..m).map(|i| if i < nb { 1.0 } else { 0.0 }).collect();
    let pert: Vec<f64> = (0..m).map(|i| if i < nb { 0.0 } else { 1.0 }).collect();
    let pert_ref = family.perturbation.as_ref().map(|_| pert.as_slice());
    let has_mu = family.base.terms.iter().all(|t| matches!(t.vertical, Vertical::Ground));

    let fine_grid = grid.refined();
    let coarse_m = assemble_forms(chart, config, &family.profile, &combined, grid)?;
    let fine_m = assemble_forms(chart, config, &family.profile, &combined, &fine_grid)?;
    let coarse = values(&coarse_m, &base, pert_ref, has_mu);
    let fine = values(&fine_m, &base, pert_ref, has_mu);

    let scale = fine.energy + fine_m.kappa1_sq * fine.norm_sq;
    let mut error = (fine.q - coarse.q).abs();
    if scale > 0.0 && error / scale > 0.5 {
        return Err(Error::QuadratureDivergence { ratio: error / scale });
    }

    let (mut eps_star, mut clamped) = (None, false);
    let (mut q_min, mut norm_min) = (fine.q, fine.norm_sq);
    if let (Some(cross), Some(quad)) = (fine.cross, fine.quad) {
        let cross_err = (cross - coarse.cross.unwrap()).abs() + 1e-12 * quad.abs();
        let q_at = |mats: &FormMatrices, eps: f64| {
            let x: Vec<f64> = base.iter().zip(&pert).map(|(b, p)| b + eps * p).collect();
            (mats.q(&x, &x), mats.norm_sq(&x))
        };
        let eps = match family.epsilon {
            Some(e) => e,
            None => {
                let (e, _) = perturbation_optimize(fine.q, cross, quad, cross_err)?;
                let limit = 0.5 * sup_abs(chart, &family.profile, &family.base, grid)?
                    / sup_abs(chart, &family.profile, family.perturbation.as_ref().unwrap(), grid)?;
                if e.abs() > limit {
                    clamped = true;
                    e.signum() * limit
                } else {
                    e
                }
            }
        };
        let (qf, nf) = q_at(&fine_m, eps);
        let (qc, _) = q_at(&coarse_m, eps);
        error = error.max((qf - qc).abs());
        eps_star = Some(eps);
        q_min = qf;
        norm_min = nf;
    }
    let k2 = fine_m.kappa1_sq;
    Ok(QuadFormReport {
        q1: fine.q1,
        q2: fine.q2,
        q: fine.q,
        norm_sq: fine.norm_sq,
        rayleigh: (fine.q + k2 * fine.norm_sq) / fine.norm_sq,
        q2_mu_expansion: fine.q2_mu,
        cross: fine.cross,
        quad: fine.quad,
        epsilon_star: eps_star,
        epsilon_clamped: clamped,
        q_min,
        rayleigh_min: (q_min + k2 * norm_min) / norm_min,
        norm_sq_min: norm_min,
        quadrature_error: error,
        sup_a_norm: fine_m.sup_a_norm,
        coarse,
        fine,
        certified: q_min < -error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::family::TestFunctionFamily;
    use crate::geometry::{surface, SurfaceParams};
    use crate::parabolicity::capacity_profile;
    use approx::assert_relative_eq;

    fn cfg() -> LayerConfig {
        LayerConfig::new(0.4, 0.9).unwrap()
    }

    #[test]
    fn quadratic_minimizer() {
        let (e, q) = perturbation_optimize(0.0, -1.0, 2.0, 1e-12).unwrap();
        assert_relative_eq!(e, 0.5);
        assert_relative_eq!(q, -0.5);
        assert!(matches!(perturbation_optimize(0.0, 0.0, 2.0, 1e-12), Err(Error::DegeneratePerturbation { .. })));
    }

    #[test]
    fn graded_grid_hits_breakpoints() {
        let g = QuadGrid::graded(&[1.0, 10.0], 20.0, 4, 8);
        for b in [0.0, 1.0, 10.0, 20.0] {
            assert!(g.radial_edges.iter().any(|&e| (e - b).abs() < 1e-12));
        }
        assert!(g.radial_edges.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(g.refined().radial_edges.len(), 2 * g.radial_edges.len() - 1);
    }

    #[test]
    fn plane_product_family_has_zero_q2() {
        let s = surface("plane", &SurfaceParams::default()).unwrap();
        let p = TransverseProfile::sine(0.4);
        let fam = TestFunctionFamily::product(&s.chart, &p, 1.0, 10.0).unwrap();
        let r = evaluate_q(&fam, &s.chart, &cfg(), &QuadGrid::for_family(&fam)).unwrap();
        assert!(r.q2.abs() < 1e-8, "{}", r.q2);
        let cap = capacity_profile(&s.chart, 1.0, 10.0).unwrap();
        assert_relative_eq!(r.q1, 0.4 * cap.energy, max_relative = 1e-4);
        assert!(r.q >= 0.0);
    }

    #[test]
    fn paraboloid_q2_matches_mu_expansion() {
        let s = surface("paraboloid", &SurfaceParams::default()).unwrap();
        let p = TransverseProfile::sine(0.4);
        let fam = TestFunctionFamily::product(&s.chart, &p, 1.0, 10.0).unwrap();
        let r = evaluate_q(&fam, &s.chart, &cfg(), &QuadGrid::for_family(&fam)).unwrap();
        let mu = r.q2_mu_expansion.unwrap();
        assert!(r.q2 > 0.0);
        assert!((r.q2 - mu).abs() <= r.quadrature_error.max(1e-6 * mu), "{} vs {mu} ± {}", r.q2, r.quadrature_error);
    }
}
