//! Shared fixtures for unit tests.

use std::fs;
use std::io::Write as _;
use std::path::Path;

pub(crate) fn write_file(dir: &Path, name: &str, contents: &str) {
    let mut f = fs::File::create(dir.join(name)).unwrap();
    f.write_all(contents.as_bytes()).unwrap();
}

/// Orders/users schema: orders is base (classification on status), one FK.
pub(crate) fn two_table_schema() -> &'static str {
    r#"{
  "tables": [
    {"name": "orders", "file": "orders.csv", "columns": [
      {"name": "id", "kind": "primary_key"},
      {"name": "user", "kind": "foreign_key", "fk_target": {"table": "users", "column": "uid"}},
      {"name": "amount", "kind": "numerical"},
      {"name": "status", "kind": "categorical"}
    ]},
    {"name": "users", "file": "users.csv", "columns": [
      {"name": "uid", "kind": "primary_key"},
      {"name": "age", "kind": "numerical"},
      {"name": "city", "kind": "categorical"}
    ]}
  ],
  "base_table": "orders",
  "target_column": "status",
  "task": "classification",
  "class_count": 2
}"#
}

/// Load a two-table dataset from inline CSV bodies.
pub(crate) fn orders_users_dataset(orders: &str, users: &str) -> crate::dataset::RelationalDataset {
    let dir = tempfile::tempdir().unwrap();
    write_file(dir.path(), "schema.json", two_table_schema());
    write_file(dir.path(), "orders.csv", orders);
    write_file(dir.path(), "users.csv", users);
    crate::dataset::load_dataset(dir.path(), "schema.json").unwrap()
}

/// Small planted synthetic dataset plus fast pipeline hyperparameters,
/// written under `dir`. Traverses every stage in well under a second.
pub(crate) fn tiny_pipeline_config(dir: &Path, seed: u64) -> crate::pipeline::PipelineConfig {
    use crate::synth::{generate_synthetic, SyntheticSpec};
    let spec = SyntheticSpec {
        aux_tables: 2,
        base_rows: 80,
        aux_rows: 20,
        planted_table: 0,
        noise_attributes: 2,
        label_noise: 0.0,
        seed,
        ..SyntheticSpec::default()
    };
    let data_dir = dir.join("data");
    generate_synthetic(&spec, &data_dir).unwrap();
    crate::pipeline::PipelineConfig {
        dataset: data_dir,
        out: dir.join("out"),
        seed,
        encoder_dims: crate::encoders::EncoderDims {
            d_num: 4,
            d_cat: 4,
            d_text: 4,
            d_out: 6,
        },
        stage1: crate::gat::Stage1Config {
            d_h: 8,
            epochs: 3,
            batch_size: 16,
            ..crate::gat::Stage1Config::default()
        },
        similarity: crate::hetgraph::SimilarityConfig::TopK { k: 3 },
        stage2: crate::hgnn::Stage2Config {
            d_model: 8,
            layers: 2,
            epochs: 4,
            ..crate::hgnn::Stage2Config::default()
        },
        ..crate::pipeline::PipelineConfig::default()
    }
}
