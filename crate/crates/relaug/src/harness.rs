//! Comparison harnesses: reference baselines, the switch-ablation grid,
//! and the edge-threshold sweep. Everything here runs in memory via the
//! pipeline's stage functions, holding the stage-2 training setup fixed
//! across arms so metric differences come from the inputs, not the
//! optimizer.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::RelationalDataset;
use crate::error::{Error, Result};
use crate::metrics::MetricSet;
use crate::pipeline::{
    complete_from_manifests, manifests_for_mode, mine_for_config, MemoryRun, MiningMode,
    PipelineConfig,
};
use crate::rng::seeded_rng;
use crate::subtables::SubTableManifest;

/// Reference arms the full pipeline is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// Base-table attributes only; no auxiliary nodes at all.
    BaseOnly,
    /// Every auxiliary table joined whole, no attribute grouping.
    AllJoin,
    /// `k` auxiliary attributes chosen uniformly at random, one group per
    /// table; tables with no chosen attribute are dropped.
    RandomK { k: usize },
}

/// Run one baseline arm with the same stage-2 setup as the config.
pub fn run_baseline(
    ds: &RelationalDataset,
    cfg: &PipelineConfig,
    baseline: Baseline,
) -> Result<MemoryRun> {
    let mut cfg = cfg.clone();
    match baseline {
        Baseline::BaseOnly => {
            // Without auxiliary nodes the graph still needs base-to-base
            // structure to pass messages over.
            cfg.similarity_edges = true;
            complete_from_manifests(ds, Vec::new(), &cfg)
        }
        Baseline::AllJoin => {
            cfg.mining = MiningMode::NoMiningWholeTuple;
            let manifests = manifests_for_mode(ds, &cfg, &BTreeMap::new())?;
            complete_from_manifests(ds, manifests, &cfg)
        }
        Baseline::RandomK { k } => {
            if k == 0 {
                cfg.similarity_edges = true;
                return complete_from_manifests(ds, Vec::new(), &cfg);
            }
            let mut aux: Vec<&str> = ds.auxiliary_tables().map(|t| t.name.as_str()).collect();
            aux.sort_unstable();
            let mut pool: Vec<(String, String)> = Vec::new();
            for table in aux {
                for column in ds.feature_columns(table)? {
                    pool.push((table.to_string(), column));
                }
            }
            let k = if k > pool.len() {
                log::warn!(
                    "random-k: requested {k} attributes but only {} exist; keeping all",
                    pool.len()
                );
                pool.len()
            } else {
                k
            };
            let mut rng = seeded_rng(cfg.seed, "random-k");
            let chosen: Vec<(String, String)> =
                pool.choose_multiple(&mut rng, k).cloned().collect();
            let mut by_table: BTreeMap<String, Vec<String>> = BTreeMap::new();
            for (table, column) in chosen {
                by_table.entry(table).or_default().push(column);
            }
            let manifests: Vec<SubTableManifest> = by_table
                .into_iter()
                .map(|(table, mut columns)| {
                    columns.sort();
                    SubTableManifest {
                        table,
                        method: cfg.grouping,
                        threshold: cfg.ell,
                        groups: vec![columns],
                    }
                })
                .collect();
            complete_from_manifests(ds, manifests, &cfg)
        }
    }
}

// ---------------------------------------------------------------------------
// Ablation grid

/// Mining arms included in the standard grid.
pub const ABLATION_MINING: [MiningMode; 3] = [
    MiningMode::GraphBased,
    MiningMode::RandomGrouping,
    MiningMode::NoMiningWholeTuple,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub mining: MiningMode,
    pub edge_weights: bool,
    pub similarity_edges: bool,
}

/// The 2 x 2 x 3 grid of switch combinations.
pub fn ablation_grid() -> Vec<AblationCell> {
    let mut cells = Vec::new();
    for mining in ABLATION_MINING {
        for edge_weights in [true, false] {
            for similarity_edges in [true, false] {
                cells.push(AblationCell {
                    mining,
                    edge_weights,
                    similarity_edges,
                });
            }
        }
    }
    cells
}

pub fn mining_name(mode: MiningMode) -> &'static str {
    match mode {
        MiningMode::GraphBased => "graph_based",
        MiningMode::RandomGrouping => "random_grouping",
        MiningMode::NoMiningWholeTuple => "no_mining_whole_tuple",
        MiningMode::NoMiningPerAttribute => "no_mining_per_attribute",
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRun {
    pub cell: AblationCell,
    pub seed: u64,
    pub metrics: MetricSet,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationReport {
    pub runs: Vec<AblationRun>,
}

/// Per-cell aggregate over seeds: metric name -> (mean, sample stddev).
#[derive(Debug, Clone, Serialize)]
pub struct AblationSummary {
    pub cell: AblationCell,
    pub runs: usize,
    pub metrics: BTreeMap<&'static str, (f64, f64)>,
}

/// Every grid cell under every seed, seeds paired across cells. Attention
/// mining is shared by all graph-based cells at the same seed, since the
/// stage-2 switches do not influence it.
pub fn run_ablations(
    ds: &RelationalDataset,
    base: &PipelineConfig,
    seeds: &[u64],
) -> Result<AblationReport> {
    let mut runs = Vec::new();
    for &seed in seeds {
        let mut seed_cfg = base.clone();
        seed_cfg.seed = seed;
        let mined = mine_for_config(ds, &seed_cfg)?;
        let none = BTreeMap::new();
        for cell in ablation_grid() {
            let mut cfg = seed_cfg.clone();
            cfg.mining = cell.mining;
            cfg.edge_weights = cell.edge_weights;
            cfg.similarity_edges = cell.similarity_edges;
            let attention = if cell.mining == MiningMode::GraphBased {
                &mined
            } else {
                &none
            };
            let manifests = manifests_for_mode(ds, &cfg, attention)?;
            let run = complete_from_manifests(ds, manifests, &cfg)?;
            runs.push(AblationRun {
                cell,
                seed,
                metrics: run.test_metrics,
            });
        }
    }
    Ok(AblationReport { runs })
}

fn metric_fields() -> [(&'static str, fn(&MetricSet) -> Option<f64>); 6] {
    [
        ("accuracy", |m: &MetricSet| m.accuracy),
        ("auc_roc", |m: &MetricSet| m.auc_roc),
        ("f1", |m: &MetricSet| m.f1),
        ("average_precision", |m: &MetricSet| m.average_precision),
        ("mae", |m: &MetricSet| m.mae),
        ("mse", |m: &MetricSet| m.mse),
    ]
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl AblationReport {
    /// One row per run; metric columns empty where undefined.
    pub fn csv(&self) -> String {
        let mut out = String::from(
            "mining,edge_weights,similarity_edges,seed,accuracy,auc_roc,f1,average_precision,mae,mse\n",
        );
        for r in &self.runs {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                mining_name(r.cell.mining),
                r.cell.edge_weights,
                r.cell.similarity_edges,
                r.seed,
                fmt_opt(r.metrics.accuracy),
                fmt_opt(r.metrics.auc_roc),
                fmt_opt(r.metrics.f1),
                fmt_opt(r.metrics.average_precision),
                fmt_opt(r.metrics.mae),
                fmt_opt(r.metrics.mse),
            ));
        }
        out
    }

    /// Grid-ordered aggregates; a metric appears only if defined in every
    /// run of the cell.
    pub fn summary(&self) -> Vec<AblationSummary> {
        ablation_grid()
            .into_iter()
            .filter_map(|cell| {
                let sets: Vec<&MetricSet> = self
                    .runs
                    .iter()
                    .filter(|r| r.cell == cell)
                    .map(|r| &r.metrics)
                    .collect();
                if sets.is_empty() {
                    return None;
                }
                let mut metrics = BTreeMap::new();
                for (name, get) in metric_fields() {
                    let values: Vec<f64> = sets.iter().filter_map(|m| get(m)).collect();
                    if values.len() == sets.len() {
                        metrics.insert(name, mean_std(&values));
                    }
                }
                Some(AblationSummary {
                    cell,
                    runs: sets.len(),
                    metrics,
                })
            })
            .collect()
    }

    /// Human-readable aggregate table.
    pub fn table(&self) -> String {
        let mut out = String::new();
        for s in self.summary() {
            out.push_str(&format!(
                "{:<24} weights={:<5} sim={:<5} n={}",
                mining_name(s.cell.mining),
                s.cell.edge_weights,
                s.cell.similarity_edges,
                s.runs
            ));
            for (name, (mean, std)) in &s.metrics {
                out.push_str(&format!("  {name}={mean:.4}±{std:.4}"));
            }
            out.push('\n');
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Edge-threshold sweep

#[derive(Debug, Clone, Serialize)]
pub struct EllPoint {
    pub ell: f64,
    pub subtable_count: usize,
    pub unsplit_tables: usize,
    pub metrics: MetricSet,
}

/// Rerun extraction and stage 2 for each threshold, reusing one attention
/// mining pass (the threshold only affects what is extracted from it).
pub fn ell_sweep(
    ds: &RelationalDataset,
    cfg: &PipelineConfig,
    ells: &[f64],
) -> Result<Vec<EllPoint>> {
    let mut cfg = cfg.clone();
    cfg.mining = MiningMode::GraphBased;
    let mined = mine_for_config(ds, &cfg)?;
    let mut points = Vec::new();
    for &ell in ells {
        if !(0.0..=1.0).contains(&ell) {
            return Err(Error::Config(format!(
                "sweep threshold must lie in [0, 1], got {ell}"
            )));
        }
        let mut c = cfg.clone();
        c.ell = ell;
        let manifests = manifests_for_mode(ds, &c, &mined)?;
        let run = complete_from_manifests(ds, manifests, &c)?;
        points.push(EllPoint {
            ell,
            subtable_count: run.subtables.len(),
            unsplit_tables: run.subtables.iter().filter(|s| s.unsplit).count(),
            metrics: run.test_metrics,
        });
    }
    Ok(points)
}

pub fn sweep_csv(points: &[EllPoint]) -> String {
    let mut out = String::from(
        "ell,subtables,unsplit_tables,accuracy,auc_roc,f1,average_precision,mae,mse\n",
    );
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            p.ell,
            p.subtable_count,
            p.unsplit_tables,
            fmt_opt(p.metrics.accuracy),
            fmt_opt(p.metrics.auc_roc),
            fmt_opt(p.metrics.f1),
            fmt_opt(p.metrics.average_precision),
            fmt_opt(p.metrics.mae),
            fmt_opt(p.metrics.mse),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::load_dataset;
    use crate::testutil::tiny_pipeline_config;

    fn setup(seed: u64) -> (tempfile::TempDir, RelationalDataset, PipelineConfig) {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_pipeline_config(dir.path(), seed);
        let ds = load_dataset(&cfg.dataset, "schema.json").unwrap();
        (dir, ds, cfg)
    }

    #[test]
    fn grid_has_twelve_distinct_cells() {
        let grid = ablation_grid();
        assert_eq!(grid.len(), 12);
        for (i, a) in grid.iter().enumerate() {
            for b in &grid[i + 1..] {
                assert_ne!(a, b);
            }
        }
        // Five seeds over the grid pair up to sixty runs.
        assert_eq!(grid.len() * 5, 60);
    }

    #[test]
    fn baselines_shape_their_graphs() {
        let (_dir, ds, cfg) = setup(31);
        let base_only = run_baseline(&ds, &cfg, Baseline::BaseOnly).unwrap();
        assert!(base_only
            .graph
            .nodes
            .iter()
            .all(|n| n.node_type == base_only.graph.base_type));
        assert!(base_only.test_metrics.accuracy.is_some());

        let all_join = run_baseline(&ds, &cfg, Baseline::AllJoin).unwrap();
        assert_eq!(all_join.subtables.len(), 2);
        assert!(all_join.subtables.iter().all(|s| s.unsplit));
        assert!(all_join.graph.nodes.len() > base_only.graph.nodes.len());

        let k3 = run_baseline(&ds, &cfg, Baseline::RandomK { k: 3 }).unwrap();
        let kept: usize = k3.manifests.iter().map(|m| m.groups[0].len()).sum();
        assert_eq!(kept, 3);
        assert!(k3.manifests.iter().all(|m| m.groups.len() == 1));

        let k0 = run_baseline(&ds, &cfg, Baseline::RandomK { k: 0 }).unwrap();
        assert!(k0
            .graph
            .nodes
            .iter()
            .all(|n| n.node_type == k0.graph.base_type));

        // More than exist: clamp to the full pool (2 tables x 4 features).
        let k_all = run_baseline(&ds, &cfg, Baseline::RandomK { k: 999 }).unwrap();
        let kept: usize = k_all.manifests.iter().map(|m| m.groups[0].len()).sum();
        assert_eq!(kept, 8);
    }

    #[test]
    fn ablations_pair_seeds_across_cells() {
        let (_dir, ds, cfg) = setup(13);
        let report = run_ablations(&ds, &cfg, &[1, 2]).unwrap();
        assert_eq!(report.runs.len(), 24);
        for cell in ablation_grid() {
            let seeds: Vec<u64> = report
                .runs
                .iter()
                .filter(|r| r.cell == cell)
                .map(|r| r.seed)
                .collect();
            assert_eq!(seeds, vec![1, 2]);
        }
        let csv = report.csv();
        assert_eq!(csv.lines().count(), 25);
        let summary = report.summary();
        assert_eq!(summary.len(), 12);
        assert!(summary.iter().all(|s| s.runs == 2));
        assert!(summary.iter().all(|s| s.metrics.contains_key("auc_roc")));
        assert!(!report.table().is_empty());
    }

    #[test]
    fn threshold_one_falls_back_to_whole_tables() {
        let (_dir, ds, cfg) = setup(17);
        let points = ell_sweep(&ds, &cfg, &[0.3, 1.0]).unwrap();
        assert_eq!(points.len(), 2);
        let loose = &points[0];
        assert!(loose.subtable_count >= 2);
        assert!(loose.metrics.auc_roc.is_some());
        let strict = &points[1];
        assert_eq!(strict.subtable_count, 2, "one whole sub-table per table");
        assert_eq!(strict.unsplit_tables, 2);
        let csv = sweep_csv(&points);
        assert_eq!(csv.lines().count(), 3);
        assert!(ell_sweep(&ds, &cfg, &[1.5]).is_err());
    }

    #[test]
    fn mean_std_matches_hand_computation() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert!((m - 2.0).abs() < 1e-12);
        assert!((s - 1.0).abs() < 1e-12);
        let (m, s) = mean_std(&[4.0]);
        assert_eq!((m, s), (4.0, 0.0));
    }
}
