use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::assemble::DiscretePair;
use super::lobpcg::{rayleigh, EigenReport};
use crate::error::{Error, Result};
use crate::forms::{PointGeom, QuadFormReport, SeparableFn, TestFunctionFamily, TransverseProfile};
use crate::geometry::{evaluate, SurfaceChart};
use crate::layer::LayerConfig;

const SAMPLES_PER_DECADE: usize = 400;
const SAMPLE_ANGLES: usize = 16;

/// Grid supremum of ‖A‖ over chart radii in [k_radius, max_radius].
fn sup_norm_beyond(chart: &SurfaceChart, k_radius: f64, per_decade: usize) -> Result<f64> {
    let top = chart.max_radius();
    let lo = k_radius.max(1e-3);
    let count = ((top / lo).log10() * per_decade as f64).ceil().max(1.0) as usize;
    let radii: Vec<f64> = (0..=count).map(|i| lo * (top / lo).powf(i as f64 / count as f64)).collect();
    let angles = if chart.n() >= 2 { SAMPLE_ANGLES } else { 1 };
    let sups: Vec<Result<f64>> = radii
        .par_iter()
        .map(|&r| {
            let mut sup: f64 = 0.0;
            for j in 0..angles {
                let x = chart.point_at(r, 2.0 * PI * j as f64 / angles as f64);
                let (_, shape) = evaluate(chart, &x)?;
                sup = sup.max(shape.norm_a);
            }
            Ok(sup)
        })
        .collect();
    sups.into_iter().try_fold(0.0f64, |m, s| Ok(m.max(s?)))
}

/// ((1 − aε)/(1 + aε))ⁿ κ₁² with ε = sup ‖A‖ over {radius ≥ k_radius}.
pub fn essential_threshold(chart: &SurfaceChart, config: &LayerConfig, k_radius: f64) -> Result<f64> {
    threshold_at(chart, config, k_radius, SAMPLES_PER_DECADE)
}

/// The threshold and its change when the radial sampling is halved.
pub fn essential_threshold_with_error(chart: &SurfaceChart, config: &LayerConfig, k_radius: f64) -> Result<(f64, f64)> {
    let fine = threshold_at(chart, config, k_radius, SAMPLES_PER_DECADE)?;
    let coarse = threshold_at(chart, config, k_radius, SAMPLES_PER_DECADE / 2)?;
    Ok((fine, (fine - coarse).abs()))
}

fn threshold_at(chart: &SurfaceChart, config: &LayerConfig, k_radius: f64, per_decade: usize) -> Result<f64> {
    if !(k_radius >= 0.0 && k_radius < chart.max_radius()) {
        return Err(Error::InvalidArgument(format!(
            "K radius {k_radius} outside [0, {})",
            chart.max_radius()
        )));
    }
    let ae = config.a * sup_norm_beyond(chart, k_radius, per_decade)?;
    if ae >= 1.0 {
        return Ok(0.0);
    }
    Ok(((1.0 - ae) / (1.0 + ae)).powi(chart.n() as i32) * config.kappa1_sq())
}

/// Essential-spectrum bounds along a ladder of compact sets.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdTrend {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// Change of each value when the radial sampling is halved.
    pub errors: Vec<f64>,
    pub kappa1_sq: f64,
    pub nondecreasing: bool,
    /// The deficit κ₁² − bound shrinks along the ladder (or is already zero).
    pub approaching: bool,
}

impl ThresholdTrend {
    pub fn passes(&self) -> bool {
        self.nondecreasing && self.approaching
    }
}

pub fn threshold_trend(chart: &SurfaceChart, config: &LayerConfig, radii: &[f64]) -> Result<ThresholdTrend> {
    if radii.len() < 2 || radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("trend needs at least two increasing radii".into()));
    }
    let (values, errors): (Vec<f64>, Vec<f64>) = radii
        .iter()
        .map(|&k| essential_threshold_with_error(chart, config, k))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let k2 = config.kappa1_sq();
    let deficit = |v: f64| k2 - v;
    let first = deficit(values[0]);
    let last = deficit(*values.last().unwrap());
    Ok(ThresholdTrend {
        nondecreasing: values.windows(2).all(|w| w[1] >= w[0]),
        approaching: last <= 1e-12 * k2 || last < first,
        radii: radii.to_vec(),
        values,
        errors,
        kappa1_sq: k2,
    })
}

/// Nodal values of a separable function at the DOFs of `pair`.
pub fn sample_on_mesh(
    pair: &DiscretePair,
    chart: &SurfaceChart,
    profile: &TransverseProfile,
    f: &SeparableFn,
) -> Result<Vec<f64>> {
    let mesh = &pair.mesh;
    let us = mesh.u_coordinates(pair.a);
    let nh = mesh.horizontal_nodes();
    let per_node: Vec<Result<Option<Vec<f64>>>> = (0..nh)
        .into_par_iter()
        .map(|h| {
            if pair.dofs.horizontal[h].is_none() || pair.dofs.dof(h, 1).map(|d| pair.dofs.nodes[d as usize].0) != Some(h) {
                return Ok(None);
            }
            let x = mesh.coordinates(&mesh.unflatten(h));
            chart.check(&x)?;
            let (radius, radius_grad) = chart.radius(&x);
            let position = chart.position(&x);
            let jacobian = chart
                .analytic_jacobian(&x)
                .unwrap_or_else(|| DMatrix::zeros(position.len(), x.len()));
            let geom = PointGeom { x, position, jacobian, radius, radius_grad };
            let hv: Vec<f64> = f.terms.iter().map(|t| t.coeff * t.horizontal.eval(&geom).0).collect();
            let col = us[1..us.len() - 1]
                .iter()
                .map(|&u| f.terms.iter().zip(&hv).map(|(t, h)| h * t.vertical.eval(profile, u).0).sum())
                .collect();
            Ok(Some(col))
        })
        .collect();
    let mut out = vec![0.0; pair.len()];
    for (h, col) in per_node.into_iter().enumerate() {
        if let Some(col) = col? {
            for (k, v) in col.into_iter().enumerate() {
                let d = pair.dofs.dof(h, k + 1).expect("interior transverse node") as usize;
                out[d] = v;
            }
        }
    }
    Ok(out)
}

/// Rayleigh quotient of a sampled family against its quadrature value.
#[derive(Debug, Clone, Serialize)]
pub struct RayleighCheck {
    pub forms_value: f64,
    pub fine: f64,
    pub coarse: f64,
    /// Quadrature error over ‖φ‖² plus the change between the two meshes.
    pub combined_error: f64,
    pub agrees: bool,
}

/// Compare xᵀKx/xᵀMx of the sampled optimal function with the forms Rayleigh quotient.
pub fn rayleigh_consistency(
    family: &TestFunctionFamily,
    q: &QuadFormReport,
    chart: &SurfaceChart,
    fine: &DiscretePair,
    coarse: &DiscretePair,
) -> Result<RayleighCheck> {
    let f = family.combined(q.epsilon_star.unwrap_or(0.0));
    let rf = rayleigh(fine, &sample_on_mesh(fine, chart, &family.profile, &f)?)?;
    let rc = rayleigh(coarse, &sample_on_mesh(coarse, chart, &family.profile, &f)?)?;
    let combined_error = q.quadrature_error / q.norm_sq_min + (rf - rc).abs();
    Ok(RayleighCheck {
        forms_value: q.rayleigh_min,
        fine: rf,
        coarse: rc,
        combined_error,
        agrees: (rf - q.rayleigh_min).abs() <= combined_error,
    })
}

/// Outcome of combining the variational and spectral paths.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub granted: bool,
    /// Q_min < −quadrature error.
    pub variational: bool,
    pub q_min: f64,
    pub quadrature_error: f64,
    /// gap > relative solver tolerance × κ₁².
    pub spectral: bool,
    pub lambda_min: f64,
    pub gap: f64,
    /// |λ_fine − λ_coarse| / λ_fine, when a coarser solve is supplied.
    pub refinement_change: Option<f64>,
    /// Refinement change below 1%.
    pub mesh_converged: bool,
    pub threshold: ThresholdTrend,
    pub findings: Vec<String>,
}

/// Grant a bound-state certificate when both paths witness σ₀ < κ₁² and the essential bound tends to κ₁².
///
/// `witness_inside` states that the variational test function is supported inside the meshed region,
/// which is the only situation where the truncated spectral path can contradict it.
pub fn bound_state_certificate(
    eig: &EigenReport,
    coarse: Option<&EigenReport>,
    q: &QuadFormReport,
    threshold: &ThresholdTrend,
    witness_inside: bool,
) -> Result<Certificate> {
    let variational = q.q_min < -q.quadrature_error;
    let lambda = eig.lambda_min();
    let spectral = eig.gap > eig.tol * eig.kappa1_sq;
    let refinement_change = coarse.map(|c| (lambda - c.lambda_min()).abs() / lambda);
    let mesh_converged = refinement_change.is_some_and(|r| r < 0.01);
    let slack = refinement_change.unwrap_or(0.0) * lambda + eig.tol * lambda;
    if variational && witness_inside && -eig.gap > slack {
        return Err(Error::Inconsistent(format!(
            "variational Q_min = {:.6e} certifies a bound state but λ_min − κ₁² = {:.6e} exceeds the mesh slack {slack:.3e}",
            q.q_min, -eig.gap
        )));
    }
    let mut findings = vec![
        format!(
            "variational: Q_min = {:.6e}, quadrature error {:.3e} -> {}",
            q.q_min,
            q.quadrature_error,
            if variational { "negative" } else { "not certified" }
        ),
        format!(
            "spectral: λ_min = {lambda:.8}, κ₁² − λ_min = {:.6e}, tolerance {:.1e} -> {}",
            eig.gap,
            eig.tol,
            if spectral { "below threshold" } else { "not below threshold" }
        ),
    ];
    findings.push(match refinement_change {
        Some(r) => format!("refinement: relative change {r:.3e} -> {}", if mesh_converged { "stable" } else { "unstable" }),
        None => "refinement: no coarser solve supplied".into(),
    });
    findings.push(format!(
        "essential threshold: {:?} at K = {:?} -> {}",
        threshold.values,
        threshold.radii,
        if threshold.passes() { "tends to κ₁²" } else { "trend not confirmed" }
    ));
    Ok(Certificate {
        granted: variational && spectral && mesh_converged && threshold.passes(),
        variational,
        q_min: q.q_min,
        quadrature_error: q.quadrature_error,
        spectral,
        lambda_min: lambda,
        gap: eig.gap,
        refinement_change,
        mesh_converged,
        threshold: threshold.clone(),
        findings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{surface, SurfaceParams};

    fn config() -> LayerConfig {
        LayerConfig::new(0.4, 0.9).unwrap()
    }

    #[test]
    fn plane_threshold_is_exact() {
        let s = surface("plane", &SurfaceParams::default()).unwrap();
        for k in [0.0, 5.0, 50.0] {
            assert_eq!(essential_threshold(&s.integration_chart, &config(), k).unwrap(), config().kappa1_sq());
        }
    }

    #[test]
    fn paraboloid_threshold_matches_closed_form() {
        let s = surface("paraboloid", &SurfaceParams::default()).unwrap();
        let cfg = config();
        for k in [10.0f64, 20.0] {
            let ae = cfg.a * 2.0 / (1.0 + 4.0 * k * k).sqrt();
            let expect = ((1.0 - ae) / (1.0 + ae)).powi(2) * cfg.kappa1_sq();
            let got = essential_threshold(&s.integration_chart, &cfg, k).unwrap();
            assert!((got - expect).abs() < 1e-6 * expect, "K = {k}: {got} vs {expect}");
        }
        let tr = threshold_trend(&s.integration_chart, &cfg, &[10.0, 20.0, 40.0]).unwrap();
        assert!(tr.passes());
        assert!(tr.values[1] >= tr.values[0]);
        assert!(essential_threshold(&s.integration_chart, &cfg, 5000.0).is_err());
        assert!(threshold_trend(&s.integration_chart, &cfg, &[10.0, 10.0]).is_err());
    }
}
