//! Synthetic relational datasets with a planted cross-table signal.
//!
//! The generator lays out one base table and a configurable number of
//! auxiliary tables. Exactly one auxiliary table carries a pair of signal
//! columns (`sig_x`, `sig_y`) whose joined values determine the base
//! label; every other attribute — including all of the base table's own
//! features — is independent noise. A model restricted to base features
//! can do no better than chance, while one that joins the planted pair
//! can recover the rule exactly (up to label noise). That contrast is
//! what the end-to-end evaluations measure.

use std::path::Path;

use rand::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{load_dataset, RelationalDataset};
use crate::error::{Error, Result};
use crate::rng::seeded_rng;

/// How the planted pair maps to a binary label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    /// Positive iff exactly one of the pair is positive. Neither column
    /// alone carries any signal.
    XorSign,
    /// Positive iff the pair sums above zero.
    Sum,
}

impl LabelRule {
    fn apply(self, x: f64, y: f64) -> bool {
        match self {
            LabelRule::XorSign => (x > 0.0) != (y > 0.0),
            LabelRule::Sum => x + y > 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    /// Auxiliary table count; the dataset has this many tables plus base.
    #[serde(default = "default_aux_tables")]
    pub aux_tables: usize,
    #[serde(default = "default_base_rows")]
    pub base_rows: usize,
    /// Tuples in every auxiliary table.
    #[serde(default = "default_aux_rows")]
    pub aux_rows: usize,
    /// Which auxiliary table carries the signal pair.
    #[serde(default)]
    pub planted_table: usize,
    #[serde(default = "default_rule")]
    pub rule: LabelRule,
    /// Noise attributes per auxiliary table, alternating numeric and
    /// categorical.
    #[serde(default = "default_noise_attributes")]
    pub noise_attributes: usize,
    /// Probability that a label is flipped after the rule is applied.
    #[serde(default = "default_label_noise")]
    pub label_noise: f64,
    /// Probability that any one noise cell is null.
    #[serde(default)]
    pub null_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_aux_tables() -> usize {
    3
}
fn default_base_rows() -> usize {
    400
}
fn default_aux_rows() -> usize {
    80
}
fn default_rule() -> LabelRule {
    LabelRule::XorSign
}
fn default_noise_attributes() -> usize {
    2
}
fn default_label_noise() -> f64 {
    0.05
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            aux_tables: default_aux_tables(),
            base_rows: default_base_rows(),
            aux_rows: default_aux_rows(),
            planted_table: 0,
            rule: default_rule(),
            noise_attributes: default_noise_attributes(),
            label_noise: default_label_noise(),
            null_rate: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.aux_tables == 0 {
            return Err(Error::Config("at least one auxiliary table required".into()));
        }
        if self.planted_table >= self.aux_tables {
            return Err(Error::Config(format!(
                "planted_table {} out of range (have {} auxiliary tables)",
                self.planted_table, self.aux_tables
            )));
        }
        if self.base_rows == 0 || self.aux_rows == 0 {
            return Err(Error::Config("row counts must be positive".into()));
        }
        for (name, p) in [("label_noise", self.label_noise), ("null_rate", self.null_rate)] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {p}")));
            }
        }
        Ok(())
    }

    /// Name of the auxiliary table holding the signal pair.
    pub fn planted_table_name(&self) -> String {
        format!("aux{}", self.planted_table)
    }

    /// The pair of attributes the label is computed from.
    pub fn planted_pair(&self) -> (String, String) {
        ("sig_x".into(), "sig_y".into())
    }
}

const CATEGORIES: [&str; 4] = ["a", "b", "c", "d"];

/// Write the dataset under `dir` (schema.json plus one CSV per table) and
/// load it back. The same spec always produces byte-identical files.
pub fn generate_synthetic(spec: &SyntheticSpec, dir: &Path) -> Result<RelationalDataset> {
    spec.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    // Auxiliary tables: the planted one gets sig_x/sig_y, the rest v0/v1
    // (noise), all followed by alternating numeric/categorical noise.
    let mut aux_cells: Vec<Vec<Vec<String>>> = Vec::with_capacity(spec.aux_tables);
    for t in 0..spec.aux_tables {
        let planted = t == spec.planted_table;
        let mut rng = seeded_rng(spec.seed, &format!("synth/aux{t}"));
        let mut rows = Vec::with_capacity(spec.aux_rows);
        for r in 0..spec.aux_rows {
            let mut row = vec![format!("a{t}_{r}")];
            for _ in 0..2 {
                // Signal cells are never nulled; the label must stay defined.
                let v = rng.random_range(-1.0..1.0);
                if !planted && rng.random_bool(spec.null_rate) {
                    row.push(String::new());
                } else {
                    row.push(v.to_string());
                }
            }
            for k in 0..spec.noise_attributes {
                let cell = if k % 2 == 0 {
                    rng.random_range(-1.0..1.0).to_string()
                } else {
                    CATEGORIES[rng.random_range(0..CATEGORIES.len())].to_string()
                };
                if rng.random_bool(spec.null_rate) {
                    row.push(String::new());
                } else {
                    row.push(cell);
                }
            }
            rows.push(row);
        }
        aux_cells.push(rows);
    }

    // Base table: one FK per auxiliary table, its own noise features, and
    // the label computed from the joined planted pair.
    let mut base_rng = seeded_rng(spec.seed, "synth/base");
    let mut flip_rng = seeded_rng(spec.seed, "synth/flips");
    let sig_table = &aux_cells[spec.planted_table];
    let mut base_rows = Vec::with_capacity(spec.base_rows);
    for r in 0..spec.base_rows {
        let mut row = vec![format!("b{r}")];
        let mut joined = 0usize;
        for t in 0..spec.aux_tables {
            let target = base_rng.random_range(0..spec.aux_rows);
            if t == spec.planted_table {
                joined = target;
            }
            row.push(format!("a{t}_{target}"));
        }
        for _ in 0..2 {
            let v = base_rng.random_range(-1.0..1.0);
            if base_rng.random_bool(spec.null_rate) {
                row.push(String::new());
            } else {
                row.push(v.to_string());
            }
        }
        let cat = CATEGORIES[base_rng.random_range(0..CATEGORIES.len())].to_string();
        if base_rng.random_bool(spec.null_rate) {
            row.push(String::new());
        } else {
            row.push(cat);
        }
        let x: f64 = sig_table[joined][1].parse().expect("signal cell is numeric");
        let y: f64 = sig_table[joined][2].parse().expect("signal cell is numeric");
        let mut positive = spec.rule.apply(x, y);
        if flip_rng.random_bool(spec.label_noise) {
            positive = !positive;
        }
        row.push(if positive { "pos" } else { "neg" }.to_string());
        base_rows.push(row);
    }

    // Descriptor. Raw JSON keeps this module independent of the loader's
    // serde layout while the loader remains the single parsing authority.
    let mut tables = vec![table_descriptor_json(
        "base",
        &base_columns_json(spec.aux_tables),
    )];
    for t in 0..spec.aux_tables {
        let name = format!("aux{t}");
        tables.push(table_descriptor_json(
            &name,
            &aux_columns_json(t == spec.planted_table, spec.noise_attributes),
        ));
    }
    let descriptor = serde_json::json!({
        "tables": tables,
        "base_table": "base",
        "target_column": "target",
        "task": "classification",
        "class_count": 2,
    });
    let desc_path = dir.join("schema.json");
    let pretty = serde_json::to_string_pretty(&descriptor)
        .map_err(|e| Error::json("schema.json", e))?;
    std::fs::write(&desc_path, pretty).map_err(|e| Error::io(&desc_path, e))?;

    let mut header = vec!["id".to_string()];
    header.extend((0..spec.aux_tables).map(|t| format!("fk{t}")));
    header.extend(["num0".into(), "num1".into(), "cat0".into(), "target".into()]);
    write_csv(&dir.join("base.csv"), &header, &base_rows)?;
    for (t, rows) in aux_cells.iter().enumerate() {
        let planted = t == spec.planted_table;
        let mut header = vec!["id".to_string()];
        header.extend(if planted {
            ["sig_x".to_string(), "sig_y".to_string()]
        } else {
            ["v0".to_string(), "v1".to_string()]
        });
        header.extend((0..spec.noise_attributes).map(|k| format!("n{k}")));
        write_csv(&dir.join(format!("aux{t}.csv")), &header, rows)?;
    }

    load_dataset(dir, "schema.json")
}

fn table_descriptor_json(name: &str, columns: &serde_json::Value) -> serde_json::Value {
    serde_json::json!({
        "name": name,
        "file": format!("{name}.csv"),
        "columns": columns,
    })
}

fn base_columns_json(aux_tables: usize) -> serde_json::Value {
    let mut cols = vec![serde_json::json!({"name": "id", "kind": "primary_key"})];
    for t in 0..aux_tables {
        cols.push(serde_json::json!({
            "name": format!("fk{t}"),
            "kind": "foreign_key",
            "fk_target": {"table": format!("aux{t}"), "column": "id"},
        }));
    }
    cols.push(serde_json::json!({"name": "num0", "kind": "numerical"}));
    cols.push(serde_json::json!({"name": "num1", "kind": "numerical"}));
    cols.push(serde_json::json!({"name": "cat0", "kind": "categorical"}));
    cols.push(serde_json::json!({"name": "target", "kind": "categorical"}));
    serde_json::Value::Array(cols)
}

fn aux_columns_json(planted: bool, noise_attributes: usize) -> serde_json::Value {
    let mut cols = vec![serde_json::json!({"name": "id", "kind": "primary_key"})];
    let (first, second) = if planted { ("sig_x", "sig_y") } else { ("v0", "v1") };
    cols.push(serde_json::json!({"name": first, "kind": "numerical"}));
    cols.push(serde_json::json!({"name": second, "kind": "numerical"}));
    for k in 0..noise_attributes {
        let kind = if k % 2 == 0 { "numerical" } else { "categorical" };
        cols.push(serde_json::json!({"name": format!("n{k}"), "kind": kind}));
    }
    serde_json::Value::Array(cols)
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    })?;
    w.write_record(header).map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    })?;
    for row in rows {
        w.write_record(row).map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
