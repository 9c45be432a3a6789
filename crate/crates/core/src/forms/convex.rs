use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::family::{HeightWindow, SeparableFn, TestFunctionFamily, Vertical, Window};
use super::profile::{Chi1, TransverseProfile};
use super::quadform::{assemble_forms, evaluate_q, QuadFormReport, QuadGrid};
use crate::error::{Error, Result};
use crate::geometry::{RadialHeight, SurfaceChart};
use crate::layer::LayerConfig;
use crate::quadrature::GaussRule;

/// Largest δ for which the per-level bound ∫_{f=t} H ≥ πδ³ is guaranteed.
pub const DELTA_CAP: f64 = 0.766_420_936_540_879_8;

/// A graph z = f(x, y): value, gradient and Hessian.
pub trait GraphFunction: Send + Sync {
    fn eval(&self, x: f64, y: f64) -> (f64, [f64; 2], [[f64; 2]; 2]);
}

impl GraphFunction for RadialHeight {
    fn eval(&self, x: f64, y: f64) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        let (f, fs, fss) = self.in_s(x * x + y * y);
        let h = [
            [2.0 * fs + 4.0 * fss * x * x, 4.0 * fss * x * y],
            [4.0 * fss * x * y, 2.0 * fs + 4.0 * fss * y * y],
        ];
        (f, [2.0 * fs * x, 2.0 * fs * y], h)
    }
}

/// f(x, y) = F(r) from (F, F′, F″).
pub struct RadialFunction<F>(pub F);

impl<F: Fn(f64) -> (f64, f64, f64) + Send + Sync> GraphFunction for RadialFunction<F> {
    fn eval(&self, x: f64, y: f64) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        let r = (x * x + y * y).sqrt();
        let (f, f1, f2) = (self.0)(r);
        if r < 1e-12 {
            return (f, [0.0, 0.0], [[f2, 0.0], [0.0, f2]]);
        }
        let (ex, ey) = (x / r, y / r);
        let t = f1 / r;
        let h = [
            [f2 * ex * ex + t * (1.0 - ex * ex), (f2 - t) * ex * ey],
            [(f2 - t) * ex * ey, f2 * ey * ey + t * (1.0 - ey * ey)],
        ];
        (f, [f1 * ex, f1 * ey], h)
    }
}

/// Mean curvature (sum of principal curvatures) of the graph, upward normal.
pub fn mean_curvature_graph(f: &dyn GraphFunction, x: f64, y: f64) -> f64 {
    let (_, [fx, fy], [[fxx, fxy], [_, fyy]]) = f.eval(x, y);
    let w2 = 1.0 + fx * fx + fy * fy;
    ((1.0 + fy * fy) * fxx - 2.0 * fx * fy * fxy + (1.0 + fx * fx) * fyy) / w2.powf(1.5)
}

/// |∇̃f| = |∇f| / √(1 + |∇f|²), the gradient length on the graph.
pub fn surface_gradient(f: &dyn GraphFunction, x: f64, y: f64) -> f64 {
    let (_, [fx, fy], _) = f.eval(x, y);
    let g2 = fx * fx + fy * fy;
    (g2 / (1.0 + g2)).sqrt()
}

fn min_hessian_eigen(h: [[f64; 2]; 2]) -> f64 {
    let tr = h[0][0] + h[1][1];
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    0.5 * tr - (0.25 * tr * tr - det).max(0.0).sqrt()
}

/// δ = min f_r over the unit circle.
pub fn convex_delta(f: &dyn GraphFunction) -> Result<f64> {
    let (f0, g0, h0) = f.eval(0.0, 0.0);
    let scale = 1.0 + f.eval(1.0, 0.0).0.abs();
    if f0.abs() > 1e-10 * scale || g0[0].hypot(g0[1]) > 1e-10 * scale {
        return Err(Error::NotStrictlyConvexAtOrigin(format!("f(0) = {f0}, ∇f(0) = {g0:?}")));
    }
    let lam = min_hessian_eigen(h0);
    if !(lam > 1e-8 * scale) {
        return Err(Error::NotStrictlyConvexAtOrigin(format!("smallest Hessian eigenvalue {lam:e}")));
    }
    let n = 256;
    let ring = 1e-3;
    let mut delta = f64::INFINITY;
    for k in 0..n {
        let t = 2.0 * PI * k as f64 / n as f64;
        let (c, s) = (t.cos(), t.sin());
        if f.eval(ring * c, ring * s).0 <= 0.0 {
            return Err(Error::NotStrictlyConvexAtOrigin(format!("f ≤ 0 on the ring r = {ring}")));
        }
        let (_, g, _) = f.eval(c, s);
        delta = delta.min(g[0] * c + g[1] * s);
    }
    for &r in &[0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
        for k in 0..32 {
            let t = 2.0 * PI * k as f64 / 32.0;
            let (x, y) = (r * t.cos(), r * t.sin());
            let (v, _, h) = f.eval(x, y);
            let hs = h[0][0].abs().max(h[1][1].abs()).max(1.0);
            if min_hessian_eigen(h) < -1e-10 * hs {
                return Err(Error::NotConvex(format!("Hessian indefinite at ({x}, {y})")));
            }
            if v < delta * (r - 1.0) - 1e-10 * v.abs().max(1.0) {
                return Err(Error::NotConvex(format!("growth bound f ≥ δ(r − 1) fails at ({x}, {y})")));
            }
        }
    }
    Ok(delta)
}

/// min(δ, DELTA_CAP).
pub fn effective_delta(delta: f64) -> f64 {
    delta.min(DELTA_CAP)
}

/// Line integrals over one level curve {f = t}.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LevelRecord {
    pub t: f64,
    /// ∫ H ds.
    pub integral_h: f64,
    /// ∫ H / |∇̃f| ds.
    pub integral_h_over_grad: f64,
    /// ∫ 1 / |∇̃f| ds.
    pub integral_inv_grad: f64,
    pub length: f64,
    /// Largest distance from the origin.
    pub max_radius: f64,
}

const LEVEL_ANGLES: usize = 256;

fn ray_root(f: &dyn GraphFunction, t: f64, c: f64, s: f64, limit: f64) -> Result<f64> {
    let mut hi = 1.0;
    while f.eval(hi * c, hi * s).0 < t {
        hi *= 2.0;
        if hi > 2.0 * limit {
            return Err(Error::LevelSetEscapesTruncation { level: t, radius: limit });
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f.eval(mid * c, mid * s).0 < t {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    let r = 0.5 * (lo + hi);
    if r > limit {
        return Err(Error::LevelSetEscapesTruncation { level: t, radius: limit });
    }
    Ok(r)
}

/// Trapezoid sums over the level curve parametrized by the polar angle.
pub fn level_integrals(f: &dyn GraphFunction, t: f64, limit: f64) -> Result<LevelRecord> {
    let dt = 2.0 * PI / LEVEL_ANGLES as f64;
    let mut rec = LevelRecord {
        t,
        integral_h: 0.0,
        integral_h_over_grad: 0.0,
        integral_inv_grad: 0.0,
        length: 0.0,
        max_radius: 0.0,
    };
    for k in 0..LEVEL_ANGLES {
        let th = k as f64 * dt;
        let (c, s) = (th.cos(), th.sin());
        let r = ray_root(f, t, c, s, limit)?;
        let (x, y) = (r * c, r * s);
        let (_, g, _) = f.eval(x, y);
        let f_r = g[0] * c + g[1] * s;
        let f_th = r * (-g[0] * s + g[1] * c);
        let dr = -f_th / f_r;
        let ds = (r * r + dr * dr).sqrt() * dt;
        let h = mean_curvature_graph(f, x, y);
        let grad = surface_gradient(f, x, y);
        rec.integral_h += h * ds;
        rec.integral_h_over_grad += h / grad * ds;
        rec.integral_inv_grad += ds / grad;
        rec.length += ds;
        rec.max_radius = rec.max_radius.max(r);
    }
    Ok(rec)
}

#[derive(Debug, Clone, Serialize)]
pub struct CoareaReport {
    /// ∫ ρ(t)/t ∫_{f=t} H/|∇̃f| ds dt.
    pub value: f64,
    /// ∫ 1/t² ∫_{f=t} 1/|∇̃f| ds dt over the window support.
    pub inverse_square: f64,
    /// πδ_eff³ ∫ ρ(t)/t dt.
    pub lower_bound: f64,
    /// Difference to the same integral on half the cells.
    pub error: f64,
    pub levels: Vec<LevelRecord>,
}

/// Co-area evaluation of ∫_Σ ψH/f with ψ = ρ∘f, checking the per-level bounds.
pub fn coarea_h_over_f(f: &dyn GraphFunction, window: &Window, delta: f64, limit: f64) -> Result<CoareaReport> {
    let breaks = window.breaks();
    let rule = GaussRule::new(8);
    let nodes = |cells_per_decade: usize| -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for w in breaks.windows(2) {
            let m = ((w[1] / w[0]).log10() * cells_per_decade as f64).ceil().max(2.0) as usize;
            for i in 0..m {
                let lo = w[0] * (w[1] / w[0]).powf(i as f64 / m as f64);
                let hi = w[0] * (w[1] / w[0]).powf((i + 1) as f64 / m as f64);
                out.extend(rule.on(lo, hi));
            }
        }
        out
    };
    let fine = nodes(16);
    let coarse = nodes(8);
    let levels: Vec<LevelRecord> = fine
        .par_iter()
        .map(|&(t, _)| level_integrals(f, t, limit))
        .collect::<Result<_>>()?;
    let coarse_levels: Vec<LevelRecord> = coarse
        .par_iter()
        .map(|&(t, _)| level_integrals(f, t, limit))
        .collect::<Result<_>>()?;

    let d3 = effective_delta(delta).powi(3);
    for rec in &levels {
        if rec.integral_h < PI * d3 * (1.0 - 1e-9) {
            return Err(Error::CertificateFailed(format!(
                "∫ H over f = {} is {} < πδ³ = {}",
                rec.t,
                rec.integral_h,
                PI * d3
            )));
        }
        if rec.length > 2.0 * PI * (rec.t / delta + 1.0) * (1.0 + 1e-9) {
            return Err(Error::CertificateFailed(format!("level f = {} longer than 2π(t/δ + 1)", rec.t)));
        }
    }
    let integrate = |pts: &[(f64, f64)], recs: &[LevelRecord]| {
        let mut v = 0.0;
        let mut inv = 0.0;
        let mut lb = 0.0;
        for (&(t, w), rec) in pts.iter().zip(recs) {
            let rho = window.eval(t).0;
            v += w * rho / t * rec.integral_h_over_grad;
            inv += w / (t * t) * rec.integral_inv_grad;
            lb += w * rho / t;
        }
        (v, inv, PI * d3 * lb)
    };
    let (value, inverse_square, lower_bound) = integrate(&fine, &levels);
    let (cv, _, _) = integrate(&coarse, &coarse_levels);
    Ok(CoareaReport {
        value,
        inverse_square,
        lower_bound,
        error: (value - cv).abs(),
        levels,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexCertificate {
    pub big_r: f64,
    pub delta: f64,
    pub delta_eff: f64,
    pub sigma: f64,
    /// Q(φχ, φχ).
    pub c1: f64,
    /// sup f |∇̃(ψ/f)| on the window support.
    pub c2: f64,
    /// Q₁(ψχ₁/f) / ∫ f⁻² over the window support.
    pub c3: f64,
    /// Q₂(ψχ/f) / ∫ f⁻² over the window support.
    pub c4: f64,
    /// ∫ f⁻² over the window support / log R.
    pub c5: f64,
    /// Dirichlet energy of the cutoff φ on the surface.
    pub phi_energy: f64,
    pub cross_direct: f64,
    /// −σ ∫ ψH/f by the co-area formula.
    pub cross_identity: f64,
    pub cross_identity_error: f64,
    pub cross_agrees: bool,
    pub coarea: f64,
    pub coarea_lower_bound: f64,
    pub epsilon_star: f64,
    /// C₁ − 2επσδ_eff³ log R + ε² C₅(C₃ + C₄) log R at ε*.
    pub bound_value: f64,
    pub q_value: f64,
    pub quadrature_error: f64,
    pub negative: bool,
    pub report: QuadFormReport,
}

/// Convex-graph certificate at window scale R.
pub fn convex_certificate(
    chart: &SurfaceChart,
    height: &RadialHeight,
    config: &LayerConfig,
    big_r: f64,
    chi1: Chi1,
) -> Result<ConvexCertificate> {
    let delta = convex_delta(height)?;
    let delta_eff = effective_delta(delta);
    let profile = TransverseProfile::new(config.a, chi1)?;
    let family = TestFunctionFamily::convex(chart, height, &profile, big_r)?;
    let window = family.window.expect("convex families carry a window");
    let grid = QuadGrid::for_family(&family);
    let report = evaluate_q(&family, chart, config, &grid)?;

    let coarea = coarea_h_over_f(height, &window, delta, chart.max_radius())?;
    let cross_direct = report.cross.expect("convex families are perturbed");
    let cross_identity = -profile.sigma * coarea.value;
    let cross_err = (report.fine.cross.unwrap() - report.coarse.cross.unwrap()).abs() + profile.sigma * coarea.error;
    let cross_agrees = (cross_direct - cross_identity).abs() <= cross_err.max(1e-9 * cross_direct.abs());

    let fine = grid.refined();
    let pert = family.perturbation.clone().unwrap();
    let ground = SeparableFn::single(Arc::new(HeightWindow { window, divide: true }), Vertical::Ground);
    let pm = assemble_forms(chart, config, &profile, &pert, &fine)?;
    let gm = assemble_forms(chart, config, &profile, &ground, &fine)?;
    let log_r = big_r.ln();
    let inv_sq = coarea.inverse_square;
    let c3 = pm.q1(&[1.0], &[1.0]) / inv_sq;
    let c4 = gm.q2(&[1.0], &[1.0]) / inv_sq;
    let c5 = inv_sq / log_r;
    let c2 = window_gradient_sup(height, &window, chart.max_radius())?;

    let eps = report.epsilon_star.unwrap_or(0.0);
    let c1 = report.q;
    let bound_value = c1 - 2.0 * eps * PI * profile.sigma * delta_eff.powi(3) * log_r + eps * eps * c5 * (c3 + c4) * log_r;
    Ok(ConvexCertificate {
        big_r,
        delta,
        delta_eff,
        sigma: profile.sigma,
        c1,
        c2,
        c3,
        c4,
        c5,
        phi_energy: family.capacity.as_ref().map(|c| c.energy).unwrap_or(0.0),
        cross_direct,
        cross_identity,
        cross_identity_error: cross_err,
        cross_agrees,
        coarea: coarea.value,
        coarea_lower_bound: coarea.lower_bound,
        epsilon_star: eps,
        bound_value,
        q_value: report.q_min,
        quadrature_error: report.quadrature_error,
        negative: report.certified,
        report,
    })
}

/// sup over the window support of f · |∇̃(ρ(f)/f)|.
fn window_gradient_sup(f: &dyn GraphFunction, window: &Window, limit: f64) -> Result<f64> {
    let [lo, _, _, hi] = window.breaks();
    let mut sup: f64 = 0.0;
    for i in 0..=400 {
        let t = lo * (hi / lo).powf(i as f64 / 400.0);
        let (rho, drho) = window.eval(t);
        for k in 0..16 {
            let th = 2.0 * PI * k as f64 / 16.0;
            let r = ray_root(f, t, th.cos(), th.sin(), limit)?;
            let g = surface_gradient(f, r * th.cos(), r * th.sin());
            sup = sup.max(t * ((drho * t - rho) / (t * t)).abs() * g);
        }
    }
    Ok(sup)
}

/// Certificates for increasing R, stopping at the first negative one.
pub fn convex_ladder(
    chart: &SurfaceChart,
    height: &RadialHeight,
    config: &LayerConfig,
    ladder: &[f64],
    chi1: Chi1,
) -> Result<Vec<ConvexCertificate>> {
    let mut out = Vec::new();
    for &r in ladder {
        let cert = convex_certificate(chart, height, config, r, chi1.clone())?;
        let done = cert.negative;
        out.push(cert);
        if done {
            return Ok(out);
        }
    }
    Err(Error::CertificateFailed(format!(
        "no negative form value up to R = {}",
        ladder.last().copied().unwrap_or(f64::NAN)
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{surface, SurfaceParams};
    use approx::assert_relative_eq;

    fn r_squared() -> RadialHeight {
        RadialHeight::Polynomial(vec![0.0, 1.0])
    }

    #[test]
    fn delta_examples() {
        assert_relative_eq!(convex_delta(&r_squared()).unwrap(), 2.0, max_relative = 1e-12);
        let quartic = RadialHeight::Polynomial(vec![0.0, 0.0, 1.0]);
        assert!(matches!(convex_delta(&quartic), Err(Error::NotStrictlyConvexAtOrigin(_))));
        let cosh = RadialFunction(|r: f64| (r.cosh() - 1.0, r.sinh(), r.cosh()));
        assert_relative_eq!(convex_delta(&cosh).unwrap(), 1f64.sinh(), max_relative = 1e-12);
        let plane = RadialHeight::Polynomial(vec![0.0]);
        assert!(matches!(convex_delta(&plane), Err(Error::NotStrictlyConvexAtOrigin(_))));
    }

    #[test]
    fn delta_cap_is_the_threshold_root() {
        assert_relative_eq!(DELTA_CAP, (2f64.powf(2.0 / 3.0) - 1.0).sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn mean_curvature_of_paraboloid() {
        let f = r_squared();
        let r: f64 = 10.0;
        let (kr, kt) = f.principal_curvatures(r);
        assert_relative_eq!(mean_curvature_graph(&f, 6.0, 8.0), kr + kt, max_relative = 1e-12);
        let radial = RadialFunction(|r: f64| (r * r, 2.0 * r, 2.0));
        assert_relative_eq!(mean_curvature_graph(&radial, 6.0, 8.0), kr + kt, max_relative = 1e-12);
    }

    #[test]
    fn paraboloid_level_circle() {
        let rec = level_integrals(&r_squared(), 100.0, 1000.0).unwrap();
        assert_relative_eq!(rec.length, 20.0 * PI, max_relative = 1e-12);
        let w = 401f64.sqrt();
        let h = 2.0 / w.powi(3) + 2.0 / w;
        assert_relative_eq!(rec.integral_h, 20.0 * PI * h, max_relative = 1e-12);
        assert!(rec.integral_h >= PI * DELTA_CAP.powi(3));
        assert!(matches!(level_integrals(&r_squared(), 1e8, 1000.0), Err(Error::LevelSetEscapesTruncation { .. })));
    }

    #[test]
    fn coarea_matches_direct_surface_integral() {
        let f = r_squared();
        let window = Window { big_r: 4.0 };
        let co = coarea_h_over_f(&f, &window, 2.0, 1000.0).unwrap();
        // ∫ ρ(r²) H / r² · 2πr √(1 + 4r²) dr
        let integrand = |r: f64| {
            let (kr, kt) = f.principal_curvatures(r);
            window.eval(r * r).0 * (kr + kt) / (r * r) * 2.0 * PI * r * (1.0 + 4.0 * r * r).sqrt()
        };
        let breaks: Vec<f64> = window.breaks().iter().map(|t| t.sqrt()).collect();
        let direct = crate::quadrature::adaptive_pieces(integrand, &breaks, 1e-12);
        assert_relative_eq!(co.value, direct, max_relative = 1e-8);
        assert!(co.value >= co.lower_bound);
    }

    #[test]
    fn paraboloid_certificate_is_negative_at_r8() {
        let s = surface("paraboloid", &SurfaceParams::default()).unwrap();
        let cfg = LayerConfig::new(0.4, 0.9).unwrap();
        let cert = convex_certificate(&s.chart, &r_squared(), &cfg, 8.0, Chi1::Sine).unwrap();
        assert!(cert.negative, "{} ± {}", cert.q_value, cert.quadrature_error);
        assert!(cert.cross_agrees, "{} vs {}", cert.cross_direct, cert.cross_identity);
        let rel = (cert.cross_direct - cert.cross_identity).abs() / cert.cross_identity.abs();
        assert!(rel < 5e-3, "{rel}");
        assert!(cert.phi_energy <= 0.5);
    }
}
