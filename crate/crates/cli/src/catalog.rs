//! `qlayer catalog`.

use qlayer_core::geometry::{surface, SurfaceParams, CATALOG_IDS};

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogRow {
    pub id: &'static str,
    pub n: Option<usize>,
    pub euler_char: Option<i64>,
    pub sup_norm_a: Option<f64>,
    pub note: String,
}

/// One row per catalog id, with default parameters where the surface has any.
pub fn catalog_rows() -> Vec<CatalogRow> {
    CATALOG_IDS
        .iter()
        .map(|&id| match surface(id, &SurfaceParams::default()) {
            Ok(s) => CatalogRow {
                id,
                n: Some(s.n),
                euler_char: s.chart.euler_char().ok(),
                sup_norm_a: Some(s.sup_norm_a),
                note: s.note.to_string(),
            },
            Err(_) => CatalogRow {
                id,
                n: Some(2),
                euler_char: Some(1),
                sup_norm_a: None,
                note: "user polynomial in r²; sup|A| depends on the coefficients".into(),
            },
        })
        .collect()
}

pub fn render(rows: &[CatalogRow]) -> String {
    let dash = || "-".to_string();
    let mut out = format!("{:<16} {:>2} {:>5} {:>12}  {}\n", "id", "n", "euler", "sup|A|", "note");
    for r in rows {
        out += &format!(
            "{:<16} {:>2} {:>5} {:>12}  {}\n",
            r.id,
            r.n.map_or_else(dash, |v| v.to_string()),
            r.euler_char.map_or_else(dash, |v| v.to_string()),
            r.sup_norm_a.map_or_else(dash, |v| format!("{v:.6}")),
            r.note
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_lists_expected_entries() {
        let rows = catalog_rows();
        let find = |id: &str| rows.iter().find(|r| r.id == id).unwrap();
        assert_eq!(find("s1xr2-logtube").n, Some(3));
        assert_eq!(find("paraboloid").euler_char, Some(1));
        assert!(find("gaussian-bump").note.contains("equality case ∫K = 0"));
        assert_eq!(find("plane").sup_norm_a, Some(0.0));
        assert!(render(&rows).lines().count() == 6);
    }
}
