//! Volume growth, capacity and total-curvature checks for the base surface.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{evaluate, RadialCoordinate, SurfaceChart, SymmetricProfile};
use crate::quadrature::{adaptive, GaussRule};

const QUAD_TOL: f64 = 1e-13;

fn profile_of(chart: &SurfaceChart) -> Result<&dyn SymmetricProfile> {
    chart
        .profile()
        .ok_or_else(|| Error::UnsupportedChart(format!("'{}' carries no symmetric profile", chart.name())))
}

/// Samples (t, V(t)) of the volume of intrinsic balls.
#[derive(Debug, Clone, Serialize)]
pub struct VolumeCurve {
    pub radii: Vec<f64>,
    pub volumes: Vec<f64>,
    /// Chart radius of each sample.
    pub chart_radii: Vec<f64>,
    /// Log-log slope over the outer third of the samples.
    pub exponent: f64,
}

impl VolumeCurve {
    pub fn from_samples(radii: Vec<f64>, volumes: Vec<f64>) -> Result<Self> {
        if radii.len() != volumes.len() || radii.len() < 2 {
            return Err(Error::InvalidArgument("volume curve needs matching samples".into()));
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) || volumes.iter().any(|v| *v <= 0.0) {
            return Err(Error::InvalidArgument("radii must increase and volumes be positive".into()));
        }
        let exponent = outer_third_slope(&radii, &volumes);
        Ok(VolumeCurve {
            chart_radii: radii.clone(),
            radii,
            volumes,
            exponent,
        })
    }

    /// Piecewise power-law interpolation; the end segments extrapolate.
    pub fn volume_at(&self, t: f64) -> f64 {
        let k = self.segment(t);
        let (t0, t1) = (self.radii[k], self.radii[k + 1]);
        let (v0, v1) = (self.volumes[k], self.volumes[k + 1]);
        let alpha = (v1 / v0).ln() / (t1 / t0).ln();
        v0 * (t / t0).powf(alpha)
    }

    fn segment(&self, t: f64) -> usize {
        let m = self.radii.len();
        match self.radii.iter().position(|&r| r > t) {
            Some(0) => 0,
            Some(i) => (i - 1).min(m - 2),
            None => m - 2,
        }
    }
}

fn outer_third_slope(x: &[f64], y: &[f64]) -> f64 {
    let top = x.last().copied().unwrap_or(0.0);
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(t, v)| **t >= 2.0 * top / 3.0 && **t > 0.0 && **v > 0.0)
        .map(|(t, v)| (t.ln(), v.ln()))
        .collect();
    let pts = if pts.len() >= 2 {
        pts
    } else {
        let m = x.len();
        x[m - 2..]
            .iter()
            .zip(&y[m - 2..])
            .map(|(t, v)| (t.ln(), v.ln()))
            .collect()
    };
    least_squares_slope(&pts)
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}

/// Chart radius at which the intrinsic radius along the profile equals each target.
fn chart_radii_for(profile: &dyn SymmetricProfile, targets: &[f64]) -> Vec<f64> {
    if !profile.intrinsic_radius() {
        return targets.to_vec();
    }
    let speed = |rho: f64| profile.radial_metric(rho).sqrt();
    let mut out = Vec::with_capacity(targets.len());
    let (mut rho0, mut s0) = (0.0, 0.0);
    for &t in targets {
        let mut rho = rho0 + (t - s0) / speed(rho0).max(1e-300);
        for _ in 0..100 {
            let s = s0 + adaptive(speed, rho0, rho, QUAD_TOL * t.max(1.0));
            let step = (s - t) / speed(rho);
            let next = (rho - step).max(0.5 * (rho0 + rho).min(rho));
            let done = (next - rho).abs() <= 1e-14 * rho.max(1.0);
            rho = next;
            if done {
                break;
            }
        }
        s0 += adaptive(speed, rho0, rho, QUAD_TOL * t.max(1.0));
        rho0 = rho;
        out.push(rho);
    }
    out
}

/// V(t) of intrinsic balls for radially symmetric charts, or of the sets
/// {chart radius < t} for product charts.
pub fn volume_growth(chart: &SurfaceChart, radii: &[f64]) -> Result<VolumeCurve> {
    let profile = profile_of(chart)?;
    let mut sorted = radii.to_vec();
    sorted.retain(|r| *r > 0.0);
    sorted.sort_by(|a, b| a.total_cmp(b));
    sorted.dedup();
    let rhos = chart_radii_for(profile, &sorted);
    let limit = chart.max_radius();
    let fit: Vec<usize> = (0..sorted.len()).filter(|&i| rhos[i] <= limit).collect();
    if fit.len() < 8 {
        return Err(Error::TruncationTooSmall(format!(
            "only {} of {} radii fit inside chart radius {limit}",
            fit.len(),
            sorted.len()
        )));
    }
    let shell = |rho: f64| profile.shell_measure(rho);
    let mut volumes = Vec::with_capacity(fit.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    for &i in &fit {
        acc += adaptive(shell, prev, rhos[i], QUAD_TOL * (1.0 + acc));
        prev = rhos[i];
        volumes.push(acc);
    }
    let radii: Vec<f64> = fit.iter().map(|&i| sorted[i]).collect();
    let chart_radii: Vec<f64> = fit.iter().map(|&i| rhos[i]).collect();
    let exponent = outer_third_slope(&radii, &volumes);
    Ok(VolumeCurve {
        radii,
        volumes,
        chart_radii,
        exponent,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParabolicityVerdict {
    ParabolicConsistent,
    NonparabolicConsistent,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParabolicityReport {
    /// ∫₁ᵀ t / V(t) dt.
    pub partial: f64,
    pub t_max: f64,
    /// min of the last-decade slopes of log V and log(V / log t).
    pub alpha_eff: Option<f64>,
    pub verdict: ParabolicityVerdict,
}

pub const PARABOLIC_SLOPE: f64 = 2.05;
pub const NONPARABOLIC_SLOPE: f64 = 2.25;

pub fn parabolicity_integral(curve: &VolumeCurve, t_max: f64) -> Result<ParabolicityReport> {
    let last = *curve.radii.last().unwrap();
    if t_max > last * (1.0 + 1e-12) || t_max <= 1.0 {
        return Err(Error::TruncationTooSmall(format!(
            "T = {t_max} must lie in (1, {last}]"
        )));
    }
    // Exact integral of the piecewise power law between breakpoints.
    let mut breaks = vec![1.0];
    breaks.extend(curve.radii.iter().copied().filter(|&r| r > 1.0 && r < t_max));
    breaks.push(t_max);
    let mut partial = 0.0;
    for w in breaks.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let k = curve.segment(0.5 * (t0 + t1));
        let (r0, r1) = (curve.radii[k], curve.radii[k + 1]);
        let alpha = (curve.volumes[k + 1] / curve.volumes[k]).ln() / (r1 / r0).ln();
        let v0 = curve.volumes[k] / r0.powf(alpha);
        let e = 2.0 - alpha;
        partial += if e.abs() < 1e-12 {
            (t1 / t0).ln() / v0
        } else {
            (t1.powf(e) - t0.powf(e)) / (e * v0)
        };
    }

    let decade: Vec<usize> = (0..curve.radii.len())
        .filter(|&i| curve.radii[i] >= t_max / 10.0 * (1.0 - 1e-12) && curve.radii[i] <= t_max * (1.0 + 1e-12))
        .collect();
    let spans_decade = decade.len() >= 2
        && curve.radii[decade[decade.len() - 1]] / curve.radii[decade[0]] >= 10.0 * (1.0 - 1e-9)
        && curve.radii[decade[0]] > 1.0;
    let alpha_eff = if spans_decade {
        let plain: Vec<(f64, f64)> = decade
            .iter()
            .map(|&i| (curve.radii[i].ln(), curve.volumes[i].ln()))
            .collect();
        let logged: Vec<(f64, f64)> = decade
            .iter()
            .map(|&i| (curve.radii[i].ln(), (curve.volumes[i] / curve.radii[i].ln()).ln()))
            .collect();
        Some(least_squares_slope(&plain).min(least_squares_slope(&logged)))
    } else {
        None
    };
    let verdict = match alpha_eff {
        Some(a) if a <= PARABOLIC_SLOPE => ParabolicityVerdict::ParabolicConsistent,
        Some(a) if a >= NONPARABOLIC_SLOPE => ParabolicityVerdict::NonparabolicConsistent,
        _ => ParabolicityVerdict::Inconclusive,
    };
    Ok(ParabolicityReport {
        partial,
        t_max,
        alpha_eff,
        verdict,
    })
}

/// Harmonic interpolant between 1 on {radius ≤ r} and 0 on {radius ≥ R}.
#[derive(Clone, Serialize)]
pub struct CapacityProfile {
    pub inner: f64,
    pub outer: f64,
    pub energy: f64,
    /// Chart radii of the interpolation table.
    pub nodes: Vec<f64>,
    /// W(ρ) = ∫ᵣ^ρ g_ρρ / shell.
    pub cumulative: Vec<f64>,
    /// W′ at the nodes.
    pub rates: Vec<f64>,
    #[serde(skip)]
    rate: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for CapacityProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CapacityProfile")
            .field("inner", &self.inner)
            .field("outer", &self.outer)
            .field("energy", &self.energy)
            .finish()
    }
}

impl CapacityProfile {
    /// (ψ, dψ/dρ) at chart radius ρ.
    pub fn eval(&self, rho: f64) -> (f64, f64) {
        if rho <= self.inner {
            return (1.0, 0.0);
        }
        if rho >= self.outer {
            return (0.0, 0.0);
        }
        let total = *self.cumulative.last().unwrap();
        let k = match self.nodes.iter().position(|&x| x > rho) {
            Some(i) => i - 1,
            None => self.nodes.len() - 2,
        };
        let (x0, x1) = (self.nodes[k], self.nodes[k + 1]);
        let h = x1 - x0;
        let s = (rho - x0) / h;
        let (w0, w1) = (self.cumulative[k], self.cumulative[k + 1]);
        let (d0, d1) = (self.rates[k] * h, self.rates[k + 1] * h);
        let h00 = 2.0 * s.powi(3) - 3.0 * s * s + 1.0;
        let h10 = s.powi(3) - 2.0 * s * s + s;
        let h01 = -2.0 * s.powi(3) + 3.0 * s * s;
        let h11 = s.powi(3) - s * s;
        let w = h00 * w0 + h10 * d0 + h01 * w1 + h11 * d1;
        (1.0 - w / total, -(self.rate)(rho) / total)
    }

    /// (ρ, ψ) samples on the table nodes.
    pub fn samples(&self) -> Vec<(f64, f64)> {
        self.nodes.iter().map(|&x| (x, self.eval(x).0)).collect()
    }
}

/// Radially symmetric capacity potential of the annulus r < ρ < R.
pub fn capacity_profile(chart: &SurfaceChart, r: f64, big_r: f64) -> Result<CapacityProfile> {
    if !(r > 0.0 && big_r > r) {
        return Err(Error::InvalidArgument(format!("need 0 < r < R, got r = {r}, R = {big_r}")));
    }
    if big_r > chart.max_radius() {
        return Err(Error::TruncationTooSmall(format!("R = {big_r} exceeds the chart radius")));
    }
    let profile = chart.profile_arc().ok_or_else(|| {
        Error::UnsupportedChart(format!(
            "'{}' has no symmetric profile; capacity profiles need a radially or product symmetric chart",
            chart.name()
        ))
    })?;
    let m = 400;
    let nodes: Vec<f64> = (0..=m)
        .map(|i| r * (big_r / r).powf(i as f64 / m as f64))
        .collect();
    let rate: Arc<dyn Fn(f64) -> f64 + Send + Sync> =
        Arc::new(move |rho: f64| profile.radial_metric(rho) / profile.shell_measure(rho));
    let mut cumulative = vec![0.0];
    for w in nodes.windows(2) {
        let last = *cumulative.last().unwrap();
        cumulative.push(last + adaptive(&*rate, w[0], w[1], QUAD_TOL));
    }
    let rates: Vec<f64> = nodes.iter().map(|&x| rate(x)).collect();
    let total = *cumulative.last().unwrap();
    Ok(CapacityProfile {
        inner: r,
        outer: big_r,
        energy: 1.0 / total,
        nodes,
        cumulative,
        rates,
        rate,
    })
}

/// Cutoff σ_R: 1 on t ≤ R, decaying like 1/log t and vanishing at t = e^R.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LogCutoffEnergy {
    pub big_r: f64,
    /// 2π ∫ t |σ_R′|² dt.
    pub energy: f64,
    /// 2π (4/3) / log R.
    pub bound: f64,
}

/// (σ_R, σ_R′) at log t = s.
pub fn log_cutoff(big_r: f64, s: f64) -> (f64, f64) {
    let l = big_r.ln();
    let c = 1.0 / (1.0 - l / big_r);
    if s <= l {
        (1.0, 0.0)
    } else if s >= big_r {
        (0.0, 0.0)
    } else {
        (c * (l / s - l / big_r), -c * l / (s * s * s.exp()))
    }
}

pub fn log_cutoff_energy(big_r: f64) -> Result<LogCutoffEnergy> {
    if !(big_r > std::f64::consts::E) {
        return Err(Error::InvalidArgument(format!("R must exceed e, got {big_r}")));
    }
    let l = big_r.ln();
    let c = 1.0 / (1.0 - l / big_r);
    // With t = eˢ, t |σ′|² dt = c² (log R)² s⁻⁴ ds.
    let f = |s: f64| c * c * l * l / s.powi(4);
    let mut breaks = vec![l];
    let mut x = l;
    while x < big_r {
        x = (2.0 * x).min(big_r);
        breaks.push(x);
    }
    let integral = crate::quadrature::adaptive_pieces(f, &breaks, 1e-14);
    Ok(LogCutoffEnergy {
        big_r,
        energy: 2.0 * PI * integral,
        bound: 2.0 * PI * (4.0 / 3.0) / l,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IsoperimetricEnd {
    /// V(t) / (π t²) at the sampled radii.
    pub ratios: Vec<f64>,
    pub radii: Vec<f64>,
    /// Extrapolated limit.
    pub lambda: f64,
}

/// Quadratic area growth constant of each end, extrapolated with Aitken's Δ².
pub fn isoperimetric_constants(chart: &SurfaceChart, radii: &[f64]) -> Result<Vec<IsoperimetricEnd>> {
    if chart.n() != 2 {
        return Err(Error::UnsupportedDimension(chart.n()));
    }
    let curve = volume_growth(chart, radii)?;
    let ratios: Vec<f64> = curve
        .radii
        .iter()
        .zip(&curve.volumes)
        .map(|(t, v)| v / (PI * t * t))
        .collect();
    let m = ratios.len();
    let (a, b, c) = (ratios[m - 3], ratios[m - 2], ratios[m - 1]);
    let denom = (c - b) - (b - a);
    let mut lambda = if denom.abs() > 1e-14 * c.abs().max(1e-300) && (c - b) * (b - a) > 0.0 {
        c - (c - b) * (c - b) / denom
    } else {
        c
    };
    if !lambda.is_finite() || lambda < 0.0 {
        lambda = 0.0;
    }
    let ends = chart.end_count().max(1);
    Ok((0..ends)
        .map(|_| IsoperimetricEnd {
            ratios: ratios.clone(),
            radii: curve.radii.clone(),
            lambda: lambda / ends as f64,
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct HartmanReport {
    pub truncation: f64,
    /// (1/2π) ∫ K dΣ over {chart radius < truncation}.
    pub total_curvature: f64,
    pub euler_char: i64,
    pub lambdas: Vec<f64>,
    /// total_curvature − (e − Σλ).
    pub residual: f64,
    /// ∫|K| over the outer half of the truncation relative to the whole.
    pub tail_ratio: f64,
    pub integrable: bool,
}

/// Integral of `f(x) dΣ` over {chart radius < ρ_max} for surfaces with an angular chart direction.
pub fn integrate_disc<F>(chart: &SurfaceChart, rho_max: f64, cells: usize, n_angles: usize, f: F) -> Result<Vec<(f64, f64)>>
where
    F: Fn(&crate::geometry::ShapeData) -> f64 + Sync,
{
    if chart.n() != 2 {
        return Err(Error::UnsupportedDimension(chart.n()));
    }
    let polar_factor = matches!(chart.radial(), RadialCoordinate::Norm);
    let rule = GaussRule::new(8);
    let start = (rho_max * 1e-4).min(1e-3);
    let mut edges = vec![0.0, start];
    for i in 1..=cells {
        edges.push(start * (rho_max / start).powf(i as f64 / cells as f64));
    }
    use rayon::prelude::*;
    let per_cell: Vec<Result<(f64, f64)>> = edges
        .par_windows(2)
        .map(|w| {
            let mut total = 0.0;
            for (rho, wr) in rule.on(w[0], w[1]) {
                for k in 0..n_angles {
                    let angle = 2.0 * PI * (k as f64 + 0.5) / n_angles as f64;
                    let x = chart.point_at(rho, angle);
                    let (_, shape) = evaluate(chart, &x)?;
                    let jac = if polar_factor { rho } else { 1.0 };
                    total += wr * (2.0 * PI / n_angles as f64) * shape.sqrt_det_g * jac * f(&shape);
                }
            }
            Ok((w[1], total))
        })
        .collect();
    per_cell.into_iter().collect()
}

pub fn hartman_residual(chart: &SurfaceChart, truncation: f64) -> Result<HartmanReport> {
    let euler_char = chart.euler_char()?;
    let cells = integrate_disc(chart, truncation, 240, 4, |s| s.gauss.unwrap_or(0.0))?;
    let abs_cells = integrate_disc(chart, truncation, 240, 4, |s| s.gauss.unwrap_or(0.0).abs())?;
    let total: f64 = cells.iter().map(|c| c.1).sum();
    let abs_total: f64 = abs_cells.iter().map(|c| c.1).sum();
    let abs_tail: f64 = abs_cells
        .iter()
        .filter(|c| c.0 > 0.5 * truncation)
        .map(|c| c.1)
        .sum();
    let tail_ratio = if abs_total > 0.0 { abs_tail / abs_total } else { 0.0 };

    let profile = profile_of(chart)?;
    let t_max = if profile.intrinsic_radius() {
        adaptive(|r| profile.radial_metric(r).sqrt(), 0.0, truncation, 1e-12)
    } else {
        truncation
    };
    let radii: Vec<f64> = (0..12).map(|i| t_max / 2f64.powi(11 - i)).collect();
    let ends = isoperimetric_constants(chart, &radii)?;
    let lambdas: Vec<f64> = ends.iter().map(|e| e.lambda).collect();
    let total_curvature = total / (2.0 * PI);
    let residual = total_curvature - (euler_char as f64 - lambdas.iter().sum::<f64>());
    Ok(HartmanReport {
        truncation,
        total_curvature,
        euler_char,
        lambdas,
        residual,
        tail_ratio,
        integrable: tail_ratio < 0.05,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{surface, SurfaceParams};
    use approx::assert_relative_eq;

    fn cat(id: &str) -> crate::geometry::CatalogSurface {
        surface(id, &SurfaceParams::default()).unwrap()
    }

    #[test]
    fn plane_volume_is_pi_t_squared() {
        let s = cat("plane");
        let radii: Vec<f64> = (1..=20).map(|i| i as f64 * 5.0).collect();
        let c = volume_growth(&s.chart, &radii).unwrap();
        for (t, v) in c.radii.iter().zip(&c.volumes) {
            assert_relative_eq!(*v, PI * t * t, max_relative = 1e-10);
        }
        assert_relative_eq!(c.exponent, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn paraboloid_volume_grows_like_t_to_three_halves() {
        let s = cat("paraboloid");
        let radii: Vec<f64> = (0..16).map(|i| 10.0 * 2f64.powf(i as f64 / 3.0)).collect();
        let c = volume_growth(&s.integration_chart, &radii).unwrap();
        assert!((c.exponent - 1.5).abs() < 0.02, "{}", c.exponent);
        // Closed form in the chart radius.
        for (rho, v) in c.chart_radii.iter().zip(&c.volumes) {
            let exact = PI / 6.0 * ((1.0 + 4.0 * rho * rho).powf(1.5) - 1.0);
            assert_relative_eq!(*v, exact, max_relative = 1e-10);
        }
    }

    #[test]
    fn too_few_radii_inside_truncation() {
        let s = surface("plane", &SurfaceParams { extent: Some(5.0), ..Default::default() }).unwrap();
        let radii: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        assert!(matches!(volume_growth(&s.chart, &radii), Err(Error::TruncationTooSmall(_))));
    }

    #[test]
    fn cubic_growth_integral_converges_to_one() {
        let radii: Vec<f64> = (0..=40).map(|i| 10f64.powf(i as f64 / 10.0)).collect();
        let vols: Vec<f64> = radii.iter().map(|t| t * t * t).collect();
        let curve = VolumeCurve::from_samples(radii, vols).unwrap();
        let rep = parabolicity_integral(&curve, 1e4).unwrap();
        assert_relative_eq!(rep.partial, 1.0 - 1e-4, epsilon = 1e-12);
        assert_eq!(rep.verdict, ParabolicityVerdict::NonparabolicConsistent);
    }

    #[test]
    fn quadratic_and_log_corrected_growth_are_parabolic() {
        let radii: Vec<f64> = (0..=40).map(|i| 10f64.powf(0.1 + i as f64 / 10.0)).collect();
        for vol in [|t: f64| PI * t * t, |t: f64| t * t * t.ln()] {
            let vols: Vec<f64> = radii.iter().map(|&t| vol(t)).collect();
            let curve = VolumeCurve::from_samples(radii.clone(), vols).unwrap();
            let rep = parabolicity_integral(&curve, *curve.radii.last().unwrap()).unwrap();
            assert_eq!(rep.verdict, ParabolicityVerdict::ParabolicConsistent);
        }
    }

    #[test]
    fn flat_capacity_matches_closed_form() {
        let s = cat("plane");
        for (r, big_r) in [(1.0, 10.0), (2.0, 300.0)] {
            let cap = capacity_profile(&s.chart, r, big_r).unwrap();
            assert_relative_eq!(cap.energy, 2.0 * PI / (big_r / r).ln(), max_relative = 1e-8);
            let (psi, d) = cap.eval((r * big_r).sqrt());
            assert_relative_eq!(psi, 0.5, epsilon = 1e-9);
            assert_relative_eq!(d, -1.0 / ((r * big_r).sqrt() * (big_r / r).ln()), max_relative = 1e-8);
        }
    }

    #[test]
    fn paraboloid_capacity_beats_any_radial_competitor() {
        let s = cat("paraboloid");
        let cap = capacity_profile(&s.integration_chart, 1.0, 10.0).unwrap();
        let g = s.graph.as_ref().unwrap();
        // Energy of the log-linear competitor, which is admissible but not harmonic.
        let e = adaptive(
            |r| {
                let w = g.radial_metric(r);
                let d = 1.0 / (r * 10f64.ln());
                d * d * 2.0 * PI * r / w.sqrt()
            },
            1.0,
            10.0,
            1e-12,
        );
        assert!(cap.energy < e);
        let direct = adaptive(
            |r| {
                let d = cap.eval(r).1;
                d * d * g.shell_measure(r) / g.radial_metric(r)
            },
            1.0,
            10.0,
            1e-12,
        );
        assert_relative_eq!(direct, cap.energy, max_relative = 1e-8);
    }

    #[test]
    fn log_cutoff_energy_closed_form_and_bound() {
        let mut prev = f64::INFINITY;
        for big_r in [5.0, 10.0, 100.0, 1000.0] {
            let e = log_cutoff_energy(big_r).unwrap();
            let l: f64 = big_r.ln();
            let c = 1.0 / (1.0 - l / big_r);
            let exact = 2.0 * PI * c * c * (1.0 / l - l * l / big_r.powi(3)) / 3.0;
            assert_relative_eq!(e.energy, exact, max_relative = 1e-10);
            assert!(e.energy <= e.bound);
            assert!(e.energy < prev);
            prev = e.energy;
        }
    }

    #[test]
    fn isoperimetric_constants_of_plane_and_paraboloid() {
        let radii: Vec<f64> = (0..10).map(|i| 2f64.powi(i)).collect();
        let p = isoperimetric_constants(&cat("plane").chart, &radii).unwrap();
        assert_relative_eq!(p[0].lambda, 1.0, epsilon = 1e-9);
        let radii: Vec<f64> = (0..10).map(|i| 10.0 * 2f64.powi(i)).collect();
        let q = isoperimetric_constants(&cat("paraboloid").integration_chart, &radii).unwrap();
        assert!(q[0].lambda < 0.01, "{}", q[0].lambda);
    }

    #[test]
    fn hartman_residuals() {
        let p = hartman_residual(&cat("paraboloid").integration_chart, 50.0).unwrap();
        let exact = 1.0 - 1.0 / (1.0f64 + 4.0 * 2500.0).sqrt();
        assert_relative_eq!(p.total_curvature, exact, max_relative = 1e-8);
        assert!(p.residual.abs() < 0.02, "{p:?}");
        let g = hartman_residual(&cat("gaussian-bump").integration_chart, 50.0).unwrap();
        assert!(g.total_curvature.abs() < 1e-8);
        assert!(g.residual.abs() < 0.02, "{g:?}");
        let pl = hartman_residual(&cat("plane").integration_chart, 50.0).unwrap();
        assert!(pl.residual.abs() < 1e-9);
    }
}
