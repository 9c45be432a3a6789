//! JSON report and CSV curve dumps.

use std::path::Path;

use serde::Serialize;

use crate::scenario::Scenario;

pub const REPORT_SCHEMA: u32 = 1;

/// A number with its estimated numerical uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Measured {
    pub value: f64,
    pub tolerance: f64,
}

impl Measured {
    pub fn new(value: f64, tolerance: f64) -> Self {
        Measured { value, tolerance: tolerance.abs() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub solver_tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometrySummary {
    pub id: String,
    pub n: usize,
    pub euler_char: Option<i64>,
    pub ends: usize,
    pub note: String,
    /// Catalog grid estimate of sup ‖A‖ over the whole surface.
    pub sup_norm_a: Measured,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValiditySummary {
    /// a · sup ‖A‖ over the truncation.
    pub a_sup_norm: Measured,
    pub c0: f64,
    pub margin: Measured,
    pub argmax: Vec<f64>,
    pub tail_exponent: Option<f64>,
    /// (radius, max ‖A‖ on that circle).
    pub decay_profile: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParabolicitySummary {
    pub partial_integral: Measured,
    pub t_max: f64,
    pub alpha_eff: Option<Measured>,
    pub verdict: String,
    pub radii: Vec<f64>,
    pub volumes: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Rung {
    pub big_r: f64,
    pub q_value: Measured,
    pub negative: bool,
    pub delta: f64,
    pub delta_eff: f64,
    pub cross_direct: Measured,
    pub cross_identity: Measured,
    pub cross_agrees: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariationalSummary {
    pub family: String,
    pub support_radius: f64,
    pub q: Measured,
    pub q1: Measured,
    pub q2: Measured,
    pub q2_mu_expansion: Option<Measured>,
    pub epsilon_star: Option<f64>,
    pub epsilon_clamped: bool,
    pub q_min: Measured,
    pub rayleigh_min: Measured,
    pub certified: bool,
    /// Convex pipeline rungs in the order tried.
    pub rungs: Vec<Rung>,
    /// Why the automatic choice moved to another family, if it did.
    pub fallbacks: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenSummary {
    /// Node counts per axis, transverse last.
    pub mesh: Vec<usize>,
    pub truncation: f64,
    pub dofs: usize,
    pub eigenvalues: Vec<Measured>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub kappa1_sq: f64,
    pub gap: Measured,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralSummary {
    pub fine: EigenSummary,
    pub coarse: Option<EigenSummary>,
    pub refinement_change: Option<Measured>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdSummary {
    pub radii: Vec<f64>,
    pub values: Vec<Measured>,
    pub kappa1_sq: f64,
    pub nondecreasing: bool,
    pub approaching: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencySummary {
    pub forms_rayleigh: Measured,
    pub mesh_rayleigh: Measured,
    pub agrees: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateSummary {
    pub granted: bool,
    pub variational: bool,
    pub spectral: bool,
    pub mesh_converged: bool,
    pub threshold_trend: bool,
    pub witness_inside_mesh: bool,
    pub findings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: u32,
    pub provenance: Provenance,
    pub scenario: Scenario,
    pub geometry: GeometrySummary,
    pub validity: ValiditySummary,
    pub parabolicity: Option<ParabolicitySummary>,
    pub variational: VariationalSummary,
    pub spectral: SpectralSummary,
    pub threshold: ThresholdSummary,
    pub consistency: Option<ConsistencySummary>,
    pub certificate: CertificateSummary,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// volume.csv, validity.csv, energies.csv, eigenvalues.csv and threshold.csv in `dir`.
    pub fn write_csv(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let open = |name: &str| csv::Writer::from_path(dir.join(name)).map_err(std::io::Error::other);
        let io = std::io::Error::other;

        let mut w = open("validity.csv")?;
        w.write_record(["radius", "max_norm_a"]).map_err(io)?;
        for (r, v) in &self.validity.decay_profile {
            w.write_record([r.to_string(), v.to_string()]).map_err(io)?;
        }
        w.flush()?;

        if let Some(p) = &self.parabolicity {
            let mut w = open("volume.csv")?;
            w.write_record(["radius", "volume"]).map_err(io)?;
            for (r, v) in p.radii.iter().zip(&p.volumes) {
                w.write_record([r.to_string(), v.to_string()]).map_err(io)?;
            }
            w.flush()?;
        }

        let mut w = open("energies.csv")?;
        w.write_record(["big_r", "q_value", "quadrature_error", "negative"]).map_err(io)?;
        if self.variational.rungs.is_empty() {
            let v = &self.variational;
            w.write_record([
                v.support_radius.to_string(),
                v.q_min.value.to_string(),
                v.q_min.tolerance.to_string(),
                v.certified.to_string(),
            ])
            .map_err(io)?;
        }
        for r in &self.variational.rungs {
            w.write_record([
                r.big_r.to_string(),
                r.q_value.value.to_string(),
                r.q_value.tolerance.to_string(),
                r.negative.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;

        let mut w = open("eigenvalues.csv")?;
        w.write_record(["mesh", "index", "eigenvalue", "residual"]).map_err(io)?;
        let meshes = std::iter::once(("fine", &self.spectral.fine))
            .chain(self.spectral.coarse.iter().map(|c| ("coarse", c)));
        for (label, e) in meshes {
            for (i, (v, r)) in e.eigenvalues.iter().zip(&e.residuals).enumerate() {
                w.write_record([label.to_string(), i.to_string(), v.value.to_string(), r.to_string()])
                    .map_err(io)?;
            }
        }
        w.flush()?;

        let mut w = open("threshold.csv")?;
        w.write_record(["k_radius", "bound", "error"]).map_err(io)?;
        for (k, v) in self.threshold.radii.iter().zip(&self.threshold.values) {
            w.write_record([k.to_string(), v.value.to_string(), v.tolerance.to_string()]).map_err(io)?;
        }
        w.flush()
    }
}
