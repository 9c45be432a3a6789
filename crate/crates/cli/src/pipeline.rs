//! geometry → layer → parabolicity → forms → eigensolver → certificate.

use qlayer_core::eigensolver::{
    assemble, bound_state_certificate, rayleigh_consistency, solve_lowest, threshold_trend, DiscretePair,
    EigenReport, SolverOptions, TensorMesh,
};
use qlayer_core::forms::{
    convex_certificate, convex_delta, evaluate_q, Chi1, QuadFormReport, QuadGrid, TestFunctionFamily,
    TransverseProfile,
};
use qlayer_core::geometry::{surface, CatalogSurface, SurfaceChart, DEFAULT_EXTENT};
use qlayer_core::layer::{validity_scan, LayerConfig, SampleGrid};
use qlayer_core::parabolicity::{parabolicity_integral, volume_growth};
use qlayer_core::{Error, Result};

use crate::report::*;
use crate::scenario::{Chi1Choice, FamilyChoice, Grading, MeshSection, Scenario};

/// Requested relative accuracy of the adaptive volume quadrature.
const VOLUME_TOL: f64 = 1e-10;

fn chi1(choice: Chi1Choice) -> Chi1 {
    match choice {
        Chi1Choice::Sine => Chi1::Sine,
        Chi1Choice::Cubic => Chi1::Cubic,
    }
}

fn validity(chart: &SurfaceChart, config: &LayerConfig, truncation: f64) -> Result<ValiditySummary> {
    let fine = validity_scan(chart, config, &SampleGrid::uniform(chart, truncation, 121, 32))?;
    let coarse = validity_scan(chart, config, &SampleGrid::uniform(chart, truncation, 61, 16))?;
    let err = (fine.sup_a_norm - coarse.sup_a_norm).abs();
    Ok(ValiditySummary {
        a_sup_norm: Measured::new(fine.sup_a_norm, err),
        c0: config.c0,
        margin: Measured::new(fine.margin, err),
        argmax: fine.argmax,
        tail_exponent: fine.tail.map(|t| t.exponent),
        decay_profile: fine.decay_profile,
    })
}

fn parabolicity(chart: &SurfaceChart) -> Result<Option<ParabolicitySummary>> {
    if chart.profile().is_none() {
        return Ok(None);
    }
    let radii: Vec<f64> = (0..=24).map(|k| 10f64.powf(k as f64 / 8.0)).collect();
    let curve = volume_growth(chart, &radii)?;
    let t_max = *curve.radii.last().unwrap();
    let rep = parabolicity_integral(&curve, t_max)?;
    Ok(Some(ParabolicitySummary {
        partial_integral: Measured::new(rep.partial, VOLUME_TOL * rep.partial),
        t_max,
        alpha_eff: rep.alpha_eff.map(|a| Measured::new(a, VOLUME_TOL * a)),
        verdict: serde_json::to_value(rep.verdict).unwrap().as_str().unwrap_or_default().to_string(),
        radii: curve.radii,
        volumes: curve.volumes,
    }))
}

struct Witness {
    family: TestFunctionFamily,
    q: QuadFormReport,
    rungs: Vec<Rung>,
    fallbacks: Vec<String>,
}

fn evaluate_family(chart: &SurfaceChart, config: &LayerConfig, family: TestFunctionFamily) -> Result<Witness> {
    let q = evaluate_q(&family, chart, config, &QuadGrid::for_family(&family))?;
    Ok(Witness { family, q, rungs: Vec::new(), fallbacks: Vec::new() })
}

fn convex_witness(
    s: &CatalogSurface,
    config: &LayerConfig,
    scenario: &Scenario,
    profile: &TransverseProfile,
) -> Result<Witness> {
    let chart = &s.integration_chart;
    let height = &s.graph.as_ref().ok_or_else(|| Error::UnsupportedChart("convex pipeline needs a graph".into()))?.height;
    let mut rungs = Vec::new();
    let mut last = None;
    for &big_r in &scenario.family.ladder {
        let cert = convex_certificate(chart, height, config, big_r, chi1(scenario.family.chi1))?;
        rungs.push(Rung {
            big_r,
            q_value: Measured::new(cert.q_value, cert.quadrature_error),
            negative: cert.negative,
            delta: cert.delta,
            delta_eff: cert.delta_eff,
            cross_direct: Measured::new(cert.cross_direct, cert.report.quadrature_error),
            cross_identity: Measured::new(cert.cross_identity, cert.cross_identity_error),
            cross_agrees: cert.cross_agrees,
        });
        let negative = cert.negative;
        last = Some((big_r, cert.report));
        if negative {
            break;
        }
    }
    let (big_r, q) = last.expect("ladder is nonempty");
    let family = TestFunctionFamily::convex(chart, height, profile, big_r)?;
    Ok(Witness { family, q, rungs, fallbacks: Vec::new() })
}

fn perturbed_witness(
    s: &CatalogSurface,
    config: &LayerConfig,
    scenario: &Scenario,
    profile: &TransverseProfile,
) -> Result<Witness> {
    let chart = &s.integration_chart;
    let f = &scenario.family;
    let family = match &f.j_center {
        Some(c) => TestFunctionFamily::perturbed(chart, profile, f.inner, f.outer, c, f.j_radius)?,
        None => TestFunctionFamily::perturbed_at_peak(chart, profile, f.inner, f.outer, f.j_radius)?,
    };
    evaluate_family(chart, config, family)
}

fn product_witness(
    s: &CatalogSurface,
    config: &LayerConfig,
    scenario: &Scenario,
    profile: &TransverseProfile,
) -> Result<Witness> {
    let chart = &s.integration_chart;
    let family = TestFunctionFamily::product(chart, profile, scenario.family.inner, scenario.family.outer)?;
    evaluate_family(chart, config, family)
}

fn witness(s: &CatalogSurface, config: &LayerConfig, scenario: &Scenario) -> Result<Witness> {
    let profile = TransverseProfile::new(config.a, chi1(scenario.family.chi1))?;
    match scenario.family.kind {
        FamilyChoice::Convex => convex_witness(s, config, scenario, &profile),
        FamilyChoice::Perturbed => perturbed_witness(s, config, scenario, &profile),
        FamilyChoice::Product => product_witness(s, config, scenario, &profile),
        FamilyChoice::Auto => {
            let mut fallbacks = Vec::new();
            let convex = match &s.graph {
                Some(g) => convex_delta(&g.height).map(|_| ()),
                None => Err(Error::UnsupportedChart("no graph height".into())),
            };
            if let Err(e) = convex {
                fallbacks.push(format!("convex pipeline skipped: {e}"));
            } else {
                return convex_witness(s, config, scenario, &profile);
            }
            match perturbed_witness(s, config, scenario, &profile) {
                Ok(mut w) => {
                    w.fallbacks = fallbacks;
                    Ok(w)
                }
                Err(e @ Error::DegeneratePerturbation { .. }) => {
                    fallbacks.push(format!("perturbed family skipped: {e}"));
                    let mut w = product_witness(s, config, scenario, &profile)?;
                    w.fallbacks = fallbacks;
                    Ok(w)
                }
                Err(e) => Err(e),
            }
        }
    }
}

fn odd_half(n: usize) -> usize {
    let h = (n - 1) / 2 + 1;
    (if h % 2 == 0 { h + 1 } else { h }).max(5)
}

fn build_mesh(m: &MeshSection, halve: bool) -> Result<TensorMesh> {
    let (radial, angular, transverse) = if halve {
        ((m.radial / 2).max(4), (m.angular / 2).max(4), odd_half(m.transverse))
    } else {
        (m.radial, m.angular, m.transverse)
    };
    match m.grading {
        Grading::Uniform => TensorMesh::polar_uniform(m.truncation, radial, angular, transverse),
        Grading::Geometric => {
            let core = (radial / 3).max(3);
            TensorMesh::polar_graded(m.core_radius, core, m.truncation, radial - core, angular, transverse)
        }
    }
}

fn summarize(rep: &EigenReport, truncation: f64) -> EigenSummary {
    let err = |i: usize| rep.residuals[i] * rep.eigenvalues[i].abs();
    EigenSummary {
        mesh: rep.mesh.clone(),
        truncation,
        dofs: rep.dofs,
        eigenvalues: (0..rep.eigenvalues.len()).map(|i| Measured::new(rep.eigenvalues[i], err(i))).collect(),
        residuals: rep.residuals.clone(),
        iterations: rep.iterations,
        kappa1_sq: rep.kappa1_sq,
        gap: Measured::new(rep.gap, err(0)),
    }
}

fn solve(chart: &SurfaceChart, config: &LayerConfig, mesh: &TensorMesh, opts: &SolverOptions) -> Result<(DiscretePair, EigenReport)> {
    let pair = assemble(chart, config, mesh)?;
    let rep = solve_lowest(&pair, opts)?;
    Ok((pair, rep))
}

/// Chart extent covering the family support, the mesh and the threshold radii.
fn chart_extent(scenario: &Scenario) -> f64 {
    let radii = [
        scenario.family.outer,
        scenario.mesh.truncation,
        scenario.threshold.radii.iter().copied().fold(0.0, f64::max),
    ];
    (1.1 * radii.into_iter().fold(0.0, f64::max)).max(DEFAULT_EXTENT)
}

/// Run a scenario end to end.
pub fn run_scenario(scenario: &Scenario) -> Result<Report> {
    let config = LayerConfig::new(scenario.layer.a, scenario.layer.c0)?;
    let mut params = scenario.surface.params();
    if params.extent.is_none() {
        params.extent = Some(chart_extent(scenario));
    }
    let s = surface(&scenario.surface.id, &params)?;
    if s.n != 2 {
        return Err(Error::UnsupportedChart(format!(
            "'{}' has dimension {}; the scenario pipeline meshes surfaces (n = 2)",
            s.id, s.n
        )));
    }
    let chart = &s.integration_chart;
    let truncation = scenario.mesh.truncation;
    let validity = validity(&s.chart, &config, truncation)?;
    if config.a * s.sup_norm_a >= config.c0 {
        return Err(Error::ValidityError {
            value: config.a * s.sup_norm_a,
            c0: config.c0,
            point: validity.argmax,
        });
    }
    if truncation > chart.max_radius() {
        return Err(Error::TruncationTooSmall(format!(
            "chart extent {} is below the mesh truncation {truncation}",
            chart.max_radius()
        )));
    }

    let geometry = GeometrySummary {
        id: s.id.clone(),
        n: s.n,
        euler_char: chart.euler_char().ok(),
        ends: chart.end_count(),
        note: s.note.to_string(),
        sup_norm_a: Measured::new(s.sup_norm_a, 0.0),
    };
    let parabolicity = parabolicity(chart)?;
    let w = witness(&s, &config, scenario)?;

    let opts = SolverOptions {
        count: scenario.solver.count,
        tol: scenario.solver.tol,
        max_iter: scenario.solver.max_iter,
        seed: scenario.solver.seed,
    };
    let (fine_pair, fine) = solve(chart, &config, &build_mesh(&scenario.mesh, false)?, &opts)?;
    let coarse = if scenario.mesh.refine_check {
        Some(solve(chart, &config, &build_mesh(&scenario.mesh, true)?, &opts)?)
    } else {
        None
    };

    let trend = threshold_trend(chart, &config, &scenario.threshold.radii)?;
    let witness_inside = w.family.support_radius <= truncation;
    let cert = bound_state_certificate(&fine, coarse.as_ref().map(|c| &c.1), &w.q, &trend, witness_inside)?;

    let consistency = match (&coarse, witness_inside) {
        (Some((coarse_pair, _)), true) => {
            let c = rayleigh_consistency(&w.family, &w.q, chart, &fine_pair, coarse_pair)?;
            Some(ConsistencySummary {
                forms_rayleigh: Measured::new(c.forms_value, w.q.quadrature_error / w.q.norm_sq_min),
                mesh_rayleigh: Measured::new(c.fine, c.combined_error),
                agrees: c.agrees,
            })
        }
        _ => None,
    };

    let q = &w.q;
    let err = q.quadrature_error;
    let refinement_change = cert.refinement_change.map(|r| {
        let solver = fine.residuals[0] + coarse.as_ref().map_or(0.0, |c| c.1.residuals[0]);
        Measured::new(r, solver)
    });
    Ok(Report {
        schema: REPORT_SCHEMA,
        provenance: Provenance {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            seed: opts.seed,
            solver_tolerance: opts.tol,
        },
        scenario: scenario.clone(),
        geometry,
        validity,
        parabolicity,
        variational: VariationalSummary {
            family: serde_json::to_value(w.family.kind).unwrap().as_str().unwrap_or_default().to_string(),
            support_radius: w.family.support_radius,
            q: Measured::new(q.q, err),
            q1: Measured::new(q.q1, err),
            q2: Measured::new(q.q2, err),
            q2_mu_expansion: q.q2_mu_expansion.map(|v| Measured::new(v, err)),
            epsilon_star: q.epsilon_star,
            epsilon_clamped: q.epsilon_clamped,
            q_min: Measured::new(q.q_min, err),
            rayleigh_min: Measured::new(q.rayleigh_min, err / q.norm_sq_min),
            certified: q.certified,
            rungs: w.rungs,
            fallbacks: w.fallbacks,
        },
        spectral: SpectralSummary {
            fine: summarize(&fine, truncation),
            coarse: coarse.as_ref().map(|c| summarize(&c.1, truncation)),
            refinement_change,
        },
        threshold: ThresholdSummary {
            radii: trend.radii.clone(),
            values: trend.values.iter().zip(&trend.errors).map(|(v, e)| Measured::new(*v, *e)).collect(),
            kappa1_sq: trend.kappa1_sq,
            nondecreasing: trend.nondecreasing,
            approaching: trend.approaching,
        },
        consistency,
        certificate: CertificateSummary {
            granted: cert.granted,
            variational: cert.variational,
            spectral: cert.spectral,
            mesh_converged: cert.mesh_converged,
            threshold_trend: trend.passes(),
            witness_inside_mesh: witness_inside,
            findings: cert.findings,
        },
    })
}
