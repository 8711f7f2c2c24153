//! Published reference energies bundled with the crate (`data/reference_tables.toml`).

use std::sync::OnceLock;

use serde::Deserialize;

use crate::error::{Error, Result};

const SOURCE: &str = include_str!("../data/reference_tables.toml");

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ReferenceTables {
    pub version: u32,
    #[serde(rename = "table")]
    pub tables: Vec<ReferenceTable>,
}

/// One detuning, three couplings.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ReferenceTable {
    pub id: u8,
    pub delta: f64,
    #[serde(rename = "column")]
    pub columns: Vec<ReferenceColumn>,
}

/// Levels `E_0..` at one coupling: the coherent-state column and the
/// diagonalization column printed next to it.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ReferenceColumn {
    pub g: f64,
    pub present: Vec<f64>,
    pub ed: Vec<f64>,
}

impl ReferenceTables {
    pub fn parse(text: &str) -> Result<ReferenceTables> {
        let t: ReferenceTables = toml::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("reference data: {e}")))?;
        for table in &t.tables {
            for col in &table.columns {
                if col.present.len() != col.ed.len() {
                    return Err(Error::InvalidArgument(format!(
                        "reference data: table {} g = {} has {} present and {} ed values",
                        table.id,
                        col.g,
                        col.present.len(),
                        col.ed.len()
                    )));
                }
            }
        }
        Ok(t)
    }

    pub fn get(&self, id: u8) -> Option<&ReferenceTable> {
        self.tables.iter().find(|t| t.id == id)
    }

    pub fn cell_count(&self) -> usize {
        self.tables
            .iter()
            .flat_map(|t| &t.columns)
            .map(|c| c.present.len())
            .sum()
    }
}

/// The bundled tables, parsed once.
pub fn reference_tables() -> &'static ReferenceTables {
    static TABLES: OnceLock<ReferenceTables> = OnceLock::new();
    TABLES.get_or_init(|| ReferenceTables::parse(SOURCE).expect("bundled reference data parses"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_data_has_81_cells() {
        let t = reference_tables();
        assert_eq!(t.version, 1);
        assert_eq!(t.cell_count(), 81);
        let deltas: Vec<f64> = t.tables.iter().map(|t| t.delta).collect();
        assert_eq!(deltas, vec![1.0, 0.5, 1.5]);
        for table in &t.tables {
            let gs: Vec<f64> = table.columns.iter().map(|c| c.g).collect();
            assert_eq!(gs, vec![0.1, 0.5, 1.0]);
        }
    }

    #[test]
    fn spot_values() {
        let t = reference_tables();
        assert_eq!(t.get(1).unwrap().columns[1].present[0], -0.633294235);
        let c = &t.get(2).unwrap().columns[1];
        assert_eq!((c.present[3], c.ed[3]), (0.760071830, 0.760071831));
        assert_eq!(t.get(3).unwrap().columns[2].present[8], 2.95127586);
    }

    #[test]
    fn present_and_ed_columns_agree_closely() {
        for table in &reference_tables().tables {
            for col in &table.columns {
                for (a, b) in col.present.iter().zip(&col.ed) {
                    assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn mismatched_columns_are_rejected() {
        let bad = "version = 1\n[[table]]\nid = 1\ndelta = 1.0\n[[table.column]]\ng = 0.1\npresent = [1.0]\ned = []\n";
        assert!(ReferenceTables::parse(bad).is_err());
    }
}
