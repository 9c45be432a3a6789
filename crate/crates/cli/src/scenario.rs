//! Scenario files: TOML tables with a versioned schema.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use qlayer_core::geometry::{SurfaceParams, CATALOG_IDS};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub surface: SurfaceSection,
    pub layer: LayerSection,
    #[serde(default)]
    pub mesh: MeshSection,
    #[serde(default)]
    pub family: FamilySection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub threshold: ThresholdSection,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSection {
    pub id: String,
    pub coeffs: Option<Vec<f64>>,
    pub height: Option<f64>,
    pub extent: Option<f64>,
}

impl SurfaceSection {
    pub fn params(&self) -> SurfaceParams {
        SurfaceParams { coeffs: self.coeffs.clone(), height: self.height, extent: self.extent }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSection {
    pub a: f64,
    #[serde(default = "default_c0")]
    pub c0: f64,
}

fn default_c0() -> f64 {
    0.9
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Grading {
    Uniform,
    Geometric,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSection {
    /// Outer radius of the truncated layer (Dirichlet there).
    pub truncation: f64,
    pub radial: usize,
    pub angular: usize,
    /// Odd.
    pub transverse: usize,
    pub grading: Grading,
    /// End of the uniform core for geometric grading.
    pub core_radius: f64,
    /// Also solve on a mesh halved in every direction.
    pub refine_check: bool,
}

impl Default for MeshSection {
    fn default() -> Self {
        MeshSection {
            truncation: 12.0,
            radial: 96,
            angular: 64,
            transverse: 13,
            grading: Grading::Uniform,
            core_radius: 3.0,
            refine_check: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyChoice {
    /// Convex pipeline when the height is convex, else the perturbed family.
    Auto,
    Product,
    Perturbed,
    Convex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Chi1Choice {
    Sine,
    Cubic,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilySection {
    pub kind: FamilyChoice,
    /// Inner radius r of the capacity profile.
    pub inner: f64,
    /// Outer radius R of the capacity profile.
    pub outer: f64,
    /// Window parameters R tried in order by the convex pipeline.
    pub ladder: Vec<f64>,
    pub chi1: Chi1Choice,
    /// Ambient radius of the perturbation bump.
    pub j_radius: f64,
    /// Bump centre in chart coordinates; the curvature peak when absent.
    pub j_center: Option<Vec<f64>>,
}

impl Default for FamilySection {
    fn default() -> Self {
        FamilySection {
            kind: FamilyChoice::Auto,
            inner: 3.0,
            outer: 1e5,
            ladder: vec![4.0, 8.0, 16.0, 32.0],
            chi1: Chi1Choice::Sine,
            j_radius: 1.5,
            j_center: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub count: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = qlayer_core::eigensolver::SolverOptions::default();
        SolverSection { count: d.count, tol: d.tol, max_iter: d.max_iter, seed: d.seed }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSection {
    /// Radii K of the compact sets in the essential-threshold trend.
    pub radii: Vec<f64>,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        ThresholdSection { radii: vec![10.0, 20.0, 40.0] }
    }
}

/// A scenario problem, with the 1-based line it refers to when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ScenarioError {}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = …` inside `[table]`, or of the table header when the key is absent.
fn locate(text: &str, table: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == table {
                header = Some(i + 1);
            }
            continue;
        }
        if current == table {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| ScenarioError {
            line: e.span().map(|s| line_of_offset(text, s.start)),
            message: e.message().to_string(),
        })?;
        scenario.validate(text)?;
        Ok(scenario)
    }

    fn validate(&self, text: &str) -> Result<(), ScenarioError> {
        let fail = |table: &str, key: &str, message: String| {
            Err(ScenarioError { line: locate(text, table, key), message })
        };
        if self.schema != SCHEMA_VERSION {
            return Err(ScenarioError {
                line: text.lines().position(|l| l.trim_start().starts_with("schema")).map(|i| i + 1),
                message: format!("unsupported schema version {} (expected {SCHEMA_VERSION})", self.schema),
            });
        }
        if !CATALOG_IDS.contains(&self.surface.id.as_str()) {
            return fail("surface", "id", format!("unknown surface '{}'; see `qlayer catalog`", self.surface.id));
        }
        if !(self.layer.a > 0.0 && self.layer.a.is_finite()) {
            return fail("layer", "a", format!("a must be positive, got {}", self.layer.a));
        }
        if !(self.layer.c0 > 0.0 && self.layer.c0 < 1.0) {
            return fail("layer", "c0", format!("c0 must lie in (0, 1), got {}", self.layer.c0));
        }
        let m = &self.mesh;
        if !(m.truncation > 0.0) {
            return fail("mesh", "truncation", format!("truncation must be positive, got {}", m.truncation));
        }
        for (key, v) in [("radial", m.radial), ("angular", m.angular)] {
            if v < 4 {
                return fail("mesh", key, format!("{key} needs at least 4 nodes, got {v}"));
            }
        }
        if m.transverse < 5 || m.transverse % 2 == 0 {
            return fail("mesh", "transverse", format!("transverse must be odd and at least 5, got {}", m.transverse));
        }
        if m.grading == Grading::Geometric && !(m.core_radius > 0.0 && m.core_radius < m.truncation) {
            return fail("mesh", "core_radius", format!("core_radius must lie in (0, truncation), got {}", m.core_radius));
        }
        let f = &self.family;
        if !(f.inner > 0.0 && f.outer > f.inner) {
            return fail("family", "outer", format!("need 0 < inner < outer, got {} and {}", f.inner, f.outer));
        }
        if f.ladder.is_empty() || f.ladder.iter().any(|r| !(*r > 2.0)) {
            return fail("family", "ladder", "ladder entries must exceed 2".into());
        }
        if !(f.j_radius > 0.0) {
            return fail("family", "j_radius", format!("j_radius must be positive, got {}", f.j_radius));
        }
        let s = &self.solver;
        if s.count == 0 || s.count > 10 {
            return fail("solver", "count", format!("count must lie in 1..=10, got {}", s.count));
        }
        if !(s.tol >= 1e-10) {
            return fail("solver", "tol", format!("tol must be at least 1e-10, got {}", s.tol));
        }
        let t = &self.threshold.radii;
        if t.len() < 2 || t.windows(2).any(|w| !(w[1] > w[0])) || t[0] < 0.0 {
            return fail("threshold", "radii", "radii must be at least two increasing non-negative values".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "schema = 1\n[surface]\nid = \"paraboloid\"\n[layer]\na = 0.4\n";

    #[test]
    fn minimal_scenario_takes_defaults() {
        let s = Scenario::parse(MINIMAL).unwrap();
        assert_eq!(s.layer.c0, 0.9);
        assert_eq!(s.mesh.radial, 96);
        assert_eq!(s.family.ladder, vec![4.0, 8.0, 16.0, 32.0]);
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let e = Scenario::parse("schema = 1\n[surface]\nid = \n").unwrap_err();
        assert_eq!(e.line, Some(3));
        let e = Scenario::parse(&format!("{MINIMAL}thickness = 2\n")).unwrap_err();
        assert_eq!(e.line, Some(6), "{e}");
    }

    #[test]
    fn semantic_errors_carry_lines() {
        let e = Scenario::parse("schema = 1\n[surface]\nid = \"torus\"\n[layer]\na = 0.4\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.to_string().starts_with("line 3: unknown surface"));
        let e = Scenario::parse(&format!("{MINIMAL}[mesh]\nradial = 40\ntransverse = 12\n")).unwrap_err();
        assert_eq!(e.line, Some(8));
        let e = Scenario::parse("schema = 2\n[surface]\nid = \"plane\"\n[layer]\na = 0.4\n").unwrap_err();
        assert_eq!(e.line, Some(1));
    }
}
