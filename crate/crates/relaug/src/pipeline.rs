//! End-to-end orchestration: one flat config, file artifacts per stage.
//!
//! Every stage command reads its upstream artifacts from the output
//! directory, does its work, and writes its own artifacts; `run_all`
//! chains them. A missing upstream file is a [`Error::MissingArtifact`]
//! naming the stage to run. All randomness derives from the one root
//! `seed`, split per stage, so a repeated run reproduces every artifact
//! byte for byte. Nested `seed` fields inside reused config types are
//! overridden by the derived per-stage seeds.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dataset::{load_dataset, Label, LoadReport, RelationalDataset, TaskKind};
use crate::encoders::{EncoderDims, EncoderParams};
use crate::error::{Error, Result};
use crate::gat::{
    build_tuple_graph, AttentionRecord, GatParams, Prediction, Stage1Config, Stage1Model,
    TupleGraph,
};
use crate::hetgraph::{
    assemble, build_join_edges, build_nodes, build_similarity_edges, HeteroGraph,
    SimilarityConfig, Split, SplitConfig,
};
use crate::hgnn::{
    feature_selection_report, predict, stage2_train, EdgeImportance, FeatureSelectionReport,
    Stage2Config, Stage2Output,
};
use crate::joinplan::{build_join_graph, find_meta_paths, MetaPath, PathScoringConfig};
use crate::linker::{build_coreset, link_all, Coreset, CoresetConfig};
use crate::metrics::{compute_metrics, MetricSet};
use crate::rng::{derive_seed, seeded_rng};
use crate::subtables::{
    accumulate, extract_cliques, extract_communities_gn, materialize_subtables, select_edges,
    top_pairs_report, GroupingMethod, SubTable, SubTableManifest,
};

pub const ARTIFACT_VERSION: u32 = 1;

/// How attribute groups are chosen for each auxiliary table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiningMode {
    /// Attention mining: threshold the learned attribute relationships and
    /// group by clique or community.
    #[default]
    GraphBased,
    /// Partition each table's attributes into uniformly random pairs.
    RandomGrouping,
    /// Keep every auxiliary table whole (one node per tuple).
    NoMiningWholeTuple,
    /// One single-attribute group per column (one node per attribute).
    NoMiningPerAttribute,
}

/// Everything one run needs. Unknown keys are rejected so typos fail
/// loudly instead of silently falling back to defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    /// Dataset directory holding `schema.json` and the table CSVs.
    #[serde(default)]
    pub dataset: PathBuf,
    /// Output directory for all artifacts.
    #[serde(default)]
    pub out: PathBuf,
    /// Root seed; every stage derives its own stream from it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scoring: PathScoringConfig,
    #[serde(default)]
    pub coreset: CoresetConfig,
    #[serde(default)]
    pub encoder_dims: EncoderDims,
    #[serde(default)]
    pub stage1: Stage1Config,
    /// Significant-edge threshold for attention mining.
    #[serde(default = "default_ell")]
    pub ell: f64,
    #[serde(default = "default_grouping")]
    pub grouping: GroupingMethod,
    #[serde(default)]
    pub keep_singletons: bool,
    #[serde(default)]
    pub mining: MiningMode,
    /// Ablation switch: false drops base-to-base similarity edges.
    #[serde(default = "default_true")]
    pub similarity_edges: bool,
    #[serde(default)]
    pub similarity: SimilarityConfig,
    #[serde(default)]
    pub split: SplitConfig,
    /// Ablation switch: false forces uniform attention in stage 2.
    #[serde(default = "default_true")]
    pub edge_weights: bool,
    #[serde(default)]
    pub stage2: Stage2Config,
}

fn default_version() -> u32 {
    ARTIFACT_VERSION
}
fn default_ell() -> f64 {
    0.8
}
fn default_grouping() -> GroupingMethod {
    GroupingMethod::MaximalClique
}
fn default_true() -> bool {
    true
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            version: default_version(),
            dataset: PathBuf::new(),
            out: PathBuf::new(),
            seed: 0,
            scoring: PathScoringConfig::default(),
            coreset: CoresetConfig::default(),
            encoder_dims: EncoderDims::default(),
            stage1: Stage1Config::default(),
            ell: default_ell(),
            grouping: default_grouping(),
            keep_singletons: false,
            mining: MiningMode::default(),
            similarity_edges: true,
            similarity: SimilarityConfig::default(),
            split: SplitConfig::default(),
            edge_weights: true,
            stage2: Stage2Config::default(),
        }
    }
}

/// Command-line overrides that take precedence over the config file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub ell: Option<f64>,
    pub topk: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: PipelineConfig = serde_json::from_str(&raw)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != ARTIFACT_VERSION {
            return Err(Error::Config(format!(
                "config version {} unsupported (expected {ARTIFACT_VERSION})",
                self.version
            )));
        }
        if !(0.0..=1.0).contains(&self.ell) {
            return Err(Error::Config(format!(
                "ell must lie in [0, 1], got {}",
                self.ell
            )));
        }
        self.scoring.validate()?;
        self.coreset.validate()?;
        self.encoder_dims.validate()?;
        self.stage1.validate()?;
        self.similarity.validate()?;
        self.split.validate()?;
        self.stage2.validate()
    }

    pub fn apply(&mut self, ov: &Overrides, out: Option<PathBuf>) {
        if let Some(seed) = ov.seed {
            self.seed = seed;
        }
        if let Some(ell) = ov.ell {
            self.ell = ell;
        }
        if let Some(k) = ov.topk {
            self.similarity = SimilarityConfig::TopK { k };
        }
        if let Some(alpha) = ov.alpha {
            self.scoring.alpha = alpha;
        }
        if let Some(beta) = ov.beta {
            self.scoring.beta = beta;
        }
        if let Some(out) = out {
            self.out = out;
        }
    }

    fn resolved_coreset(&self) -> CoresetConfig {
        CoresetConfig {
            seed: derive_seed(self.seed, "link"),
            ..self.coreset
        }
    }

    fn resolved_split(&self) -> SplitConfig {
        SplitConfig {
            seed: derive_seed(self.seed, "split"),
            ..self.split
        }
    }

    fn resolved_stage2(&self) -> Stage2Config {
        Stage2Config {
            uniform_attention: self.stage2.uniform_attention || !self.edge_weights,
            ..self.stage2
        }
    }
}

// ---------------------------------------------------------------------------
// Artifact files

#[derive(Debug, Serialize, Deserialize)]
pub struct LoadArtifact {
    pub version: u32,
    pub report: LoadReport,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MetaPathsArtifact {
    pub version: u32,
    pub paths: BTreeMap<String, MetaPath>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CoresetArtifact {
    pub version: u32,
    pub coreset: Coreset,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Stage1Artifact {
    pub version: u32,
    pub table: String,
    pub model: Stage1Model,
    pub curve: Vec<(usize, f64)>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AttentionArtifact {
    pub version: u32,
    pub table: String,
    pub records: Vec<AttentionRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SubtablesArtifact {
    pub version: u32,
    pub manifests: Vec<SubTableManifest>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GraphArtifact {
    pub version: u32,
    pub graph: HeteroGraph,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Stage2Artifact {
    pub version: u32,
    pub output: Stage2Output,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ImportanceArtifact {
    pub version: u32,
    pub importance: EdgeImportance,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportArtifact {
    pub version: u32,
    pub report: FeatureSelectionReport,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MetricsArtifact {
    pub version: u32,
    /// Which split the metrics are computed on.
    pub split: String,
    pub count: usize,
    pub metrics: MetricSet,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    pub config: PipelineConfig,
    pub artifacts: Vec<String>,
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join(name);
    let mut body = serde_json::to_string_pretty(value).map_err(|e| Error::json(name, e))?;
    body.push('\n');
    fs::write(&path, body).map_err(|e| Error::io(&path, e))
}

fn write_text(out: &Path, name: &str, body: &str) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join(name);
    fs::write(&path, body).map_err(|e| Error::io(&path, e))
}

/// Read an artifact, mapping absence to the stage that produces it.
fn read_artifact<T: DeserializeOwned>(out: &Path, name: &str, produced_by: &str) -> Result<T> {
    let path = out.join(name);
    if !path.exists() {
        return Err(Error::MissingArtifact {
            artifact: name.to_string(),
            produced_by: produced_by.to_string(),
        });
    }
    let raw = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&raw).map_err(|e| Error::json(path.display().to_string(), e))
}

fn check_version(version: u32, name: &str) -> Result<()> {
    if version != ARTIFACT_VERSION {
        return Err(Error::Config(format!(
            "artifact {name} has version {version}, expected {ARTIFACT_VERSION}; re-run its stage"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// In-memory stage steps (shared by the file commands and the harness)

fn load(cfg: &PipelineConfig) -> Result<RelationalDataset> {
    load_dataset(&cfg.dataset, "schema.json")
}

fn plan_paths(
    ds: &RelationalDataset,
    scoring: &PathScoringConfig,
) -> Result<BTreeMap<String, MetaPath>> {
    find_meta_paths(&build_join_graph(ds), scoring)
}

/// Train the per-table attention miner on the coreset's labeled tuples.
/// Tables that cannot form a tuple graph (fewer than two feature columns)
/// or received no links are skipped; extraction falls back to the whole
/// table for them.
pub fn mine_attention(
    ds: &RelationalDataset,
    coreset: &Coreset,
    stage1: &Stage1Config,
    dims: EncoderDims,
    seed: u64,
) -> Result<BTreeMap<String, (Stage1Model, Vec<AttentionRecord>, Vec<(usize, f64)>)>> {
    let mut out = BTreeMap::new();
    for (table, links) in &coreset.links {
        if links.is_empty() {
            log::warn!("table {table}: no linked tuples; skipping attention mining");
            continue;
        }
        let features = ds.feature_columns(table)?;
        if features.len() < 2 {
            log::warn!(
                "table {table}: {} feature column(s) cannot form attribute pairs; skipping",
                features.len()
            );
            continue;
        }
        let graphs: Vec<TupleGraph> = links
            .iter()
            .map(|lt| build_tuple_graph(lt, ds))
            .collect::<Result<_>>()?;
        let table_seed = derive_seed(seed, &format!("stage1/{table}"));
        let mut model = Stage1Model {
            encoders: EncoderParams::init(ds, &[table.as_str()], dims, table_seed)?,
            gat: GatParams::init(
                dims.d_out,
                stage1.d_h,
                ds.class_count(),
                stage1.leaky_slope,
                table_seed,
            ),
        };
        let trained = crate::gat::stage1_train(&mut model, &graphs, stage1, table_seed)?;
        out.insert(table.clone(), (model, trained.records, trained.curve));
    }
    Ok(out)
}

/// Attribute-group manifests for every auxiliary table under the mining
/// mode. `attention` is consulted only in graph-based mode; a table
/// without records falls back to an empty manifest (whole table).
pub fn manifests_for_mode(
    ds: &RelationalDataset,
    cfg: &PipelineConfig,
    attention: &BTreeMap<String, Vec<AttentionRecord>>,
) -> Result<Vec<SubTableManifest>> {
    let mut manifests = Vec::new();
    let mut aux: Vec<&str> = ds.auxiliary_tables().map(|t| t.name.as_str()).collect();
    aux.sort_unstable();
    for table in aux {
        let features = ds.feature_columns(table)?;
        let manifest = match cfg.mining {
            MiningMode::GraphBased => match attention.get(table) {
                Some(records) if !records.is_empty() => {
                    let cum = accumulate(records)?;
                    let edges = select_edges(&cum, cfg.ell)?;
                    match cfg.grouping {
                        GroupingMethod::MaximalClique => {
                            extract_cliques(&edges, cfg.keep_singletons)
                        }
                        GroupingMethod::GirvanNewman => extract_communities_gn(&edges),
                    }
                }
                _ => whole_table_manifest(table, cfg),
            },
            MiningMode::NoMiningWholeTuple => whole_table_manifest(table, cfg),
            MiningMode::NoMiningPerAttribute => SubTableManifest {
                table: table.to_string(),
                method: cfg.grouping,
                threshold: cfg.ell,
                groups: features.iter().map(|c| vec![c.clone()]).collect(),
            },
            MiningMode::RandomGrouping => {
                use rand::seq::SliceRandom;
                let mut rng = seeded_rng(cfg.seed, &format!("random-grouping/{table}"));
                let mut shuffled = features.clone();
                shuffled.shuffle(&mut rng);
                let mut groups: Vec<Vec<String>> = shuffled
                    .chunks(2)
                    .map(|pair| {
                        let mut g = pair.to_vec();
                        g.sort();
                        g
                    })
                    .collect();
                groups.sort();
                SubTableManifest {
                    table: table.to_string(),
                    method: cfg.grouping,
                    threshold: cfg.ell,
                    groups,
                }
            }
        };
        manifests.push(manifest);
    }
    Ok(manifests)
}

fn whole_table_manifest(table: &str, cfg: &PipelineConfig) -> SubTableManifest {
    SubTableManifest {
        table: table.to_string(),
        method: cfg.grouping,
        threshold: cfg.ell,
        groups: Vec::new(),
    }
}

/// Materialize sub-tables and assemble the heterogeneous graph.
pub fn build_graph_from_manifests(
    ds: &RelationalDataset,
    manifests: &[SubTableManifest],
    cfg: &PipelineConfig,
) -> Result<(HeteroGraph, Vec<SubTable>)> {
    let mut subtables = Vec::new();
    for m in manifests {
        subtables.extend(materialize_subtables(ds, m)?);
    }
    let table_names: Vec<&str> = ds.tables.iter().map(|t| t.name.as_str()).collect();
    // Fresh frozen encoders embed node features; stage-2 training stops
    // its gradients at the per-type input projections.
    let enc = EncoderParams::init(
        ds,
        &table_names,
        cfg.encoder_dims,
        derive_seed(cfg.seed, "graph-encoders"),
    )?;
    let nodes = build_nodes(ds, &subtables, &enc)?;
    let mut edges = build_join_edges(ds, &subtables, &nodes);
    if cfg.similarity_edges {
        edges.extend(build_similarity_edges(
            &nodes,
            &ds.task.base_table,
            &cfg.similarity,
        )?);
    }
    let graph = assemble(ds, nodes, edges, &cfg.resolved_split())?;
    Ok((graph, subtables))
}

/// Test-split node ids with labels, in id order.
fn split_ids(graph: &HeteroGraph, split: Split) -> Vec<usize> {
    graph
        .base_nodes()
        .filter(|n| n.split == Some(split) && n.label.is_some())
        .map(|n| n.id)
        .collect()
}

/// Metrics over the given split's base nodes.
pub fn evaluate_split(
    graph: &HeteroGraph,
    output: &Stage2Output,
    split: Split,
) -> Result<(usize, MetricSet)> {
    let ids = split_ids(graph, split);
    if ids.is_empty() {
        return Err(Error::Config(format!(
            "no labeled base nodes in the {split:?} split; adjust split fractions"
        )));
    }
    let preds = predict(graph, &output.params, &ids)?;
    let labels: Vec<Label> = ids
        .iter()
        .map(|&id| graph.nodes[id].label.expect("filtered"))
        .collect();
    let metrics = compute_metrics(&preds, &labels, graph.task)?;
    Ok((ids.len(), metrics))
}

/// One full pipeline pass without touching the filesystem (the dataset is
/// already loaded). The ablation and baseline harnesses run on this.
pub struct MemoryRun {
    pub manifests: Vec<SubTableManifest>,
    pub subtables: Vec<SubTable>,
    pub graph: HeteroGraph,
    pub stage2: Stage2Output,
    pub report: FeatureSelectionReport,
    pub test_metrics: MetricSet,
}

/// Plan, link, and mine attention, returning only the per-table records.
/// This is the part of a graph-based run that depends on the seed and the
/// stage-1 config but not on ℓ or the stage-2 switches, so sweeps and
/// ablations can reuse it.
pub fn mine_for_config(
    ds: &RelationalDataset,
    cfg: &PipelineConfig,
) -> Result<BTreeMap<String, Vec<AttentionRecord>>> {
    let paths = plan_paths(ds, &cfg.scoring)?;
    let coreset_cfg = cfg.resolved_coreset();
    let links = link_all(ds, &paths, &coreset_cfg)?;
    let coreset = build_coreset(ds, &links, &coreset_cfg)?;
    Ok(mine_attention(ds, &coreset, &cfg.stage1, cfg.encoder_dims, cfg.seed)?
        .into_iter()
        .map(|(t, (_, records, _))| (t, records))
        .collect())
}

/// Build the graph from given manifests, train stage 2, and evaluate.
pub fn complete_from_manifests(
    ds: &RelationalDataset,
    manifests: Vec<SubTableManifest>,
    cfg: &PipelineConfig,
) -> Result<MemoryRun> {
    let (graph, subtables) = build_graph_from_manifests(ds, &manifests, cfg)?;
    let stage2 = stage2_train(&graph, &cfg.resolved_stage2(), derive_seed(cfg.seed, "stage2"))?;
    let report = feature_selection_report(&stage2.importance, &subtables);
    let (_, test_metrics) = evaluate_split(&graph, &stage2, Split::Test)?;
    Ok(MemoryRun {
        manifests,
        subtables,
        graph,
        stage2,
        report,
        test_metrics,
    })
}

pub fn run_in_memory(ds: &RelationalDataset, cfg: &PipelineConfig) -> Result<MemoryRun> {
    cfg.validate()?;
    let attention = if cfg.mining == MiningMode::GraphBased {
        mine_for_config(ds, cfg)?
    } else {
        BTreeMap::new()
    };
    let manifests = manifests_for_mode(ds, cfg, &attention)?;
    complete_from_manifests(ds, manifests, cfg)
}

// ---------------------------------------------------------------------------
// File-based stage commands (what the CLI calls)

pub fn cmd_ingest(cfg: &PipelineConfig) -> Result<LoadReport> {
    let ds = load(cfg)?;
    write_json(
        &cfg.out,
        "load_report.json",
        &LoadArtifact {
            version: ARTIFACT_VERSION,
            report: ds.load_report.clone(),
        },
    )?;
    Ok(ds.load_report)
}

pub fn cmd_plan(cfg: &PipelineConfig) -> Result<BTreeMap<String, MetaPath>> {
    let a: LoadArtifact = read_artifact(&cfg.out, "load_report.json", "ingest")?;
    check_version(a.version, "load_report.json")?;
    let ds = load(cfg)?;
    let paths = plan_paths(&ds, &cfg.scoring)?;
    write_json(
        &cfg.out,
        "meta_paths.json",
        &MetaPathsArtifact {
            version: ARTIFACT_VERSION,
            paths: paths.clone(),
        },
    )?;
    Ok(paths)
}

pub fn cmd_link(cfg: &PipelineConfig) -> Result<Coreset> {
    let a: MetaPathsArtifact = read_artifact(&cfg.out, "meta_paths.json", "plan")?;
    check_version(a.version, "meta_paths.json")?;
    let ds = load(cfg)?;
    let coreset_cfg = cfg.resolved_coreset();
    let links = link_all(&ds, &a.paths, &coreset_cfg)?;
    let coreset = build_coreset(&ds, &links, &coreset_cfg)?;
    write_json(
        &cfg.out,
        "coreset.json",
        &CoresetArtifact {
            version: ARTIFACT_VERSION,
            coreset: coreset.clone(),
        },
    )?;
    Ok(coreset)
}

/// Tables that were trained, in name order.
pub fn cmd_train_stage1(cfg: &PipelineConfig) -> Result<Vec<String>> {
    if cfg.mining != MiningMode::GraphBased {
        log::info!(
            "mining mode {:?} does not use attention mining; nothing to train",
            cfg.mining
        );
        return Ok(Vec::new());
    }
    let a: CoresetArtifact = read_artifact(&cfg.out, "coreset.json", "link")?;
    check_version(a.version, "coreset.json")?;
    let ds = load(cfg)?;
    let mined = mine_attention(&ds, &a.coreset, &cfg.stage1, cfg.encoder_dims, cfg.seed)?;
    let mut tables = Vec::new();
    for (table, (model, records, curve)) in mined {
        write_json(
            &cfg.out,
            &format!("stage1_{table}.json"),
            &Stage1Artifact {
                version: ARTIFACT_VERSION,
                table: table.clone(),
                model,
                curve: curve.clone(),
            },
        )?;
        write_json(
            &cfg.out,
            &format!("attention_{table}.json"),
            &AttentionArtifact {
                version: ARTIFACT_VERSION,
                table: table.clone(),
                records,
            },
        )?;
        let mut csv = String::from("epoch,loss\n");
        for (epoch, loss) in &curve {
            csv.push_str(&format!("{epoch},{loss}\n"));
        }
        write_text(&cfg.out, &format!("stage1_curve_{table}.csv"), &csv)?;
        tables.push(table);
    }
    Ok(tables)
}

pub fn cmd_split(cfg: &PipelineConfig) -> Result<Vec<SubTableManifest>> {
    let ds = load(cfg)?;
    let mut attention = BTreeMap::new();
    if cfg.mining == MiningMode::GraphBased {
        let a: CoresetArtifact = read_artifact(&cfg.out, "coreset.json", "link")?;
        check_version(a.version, "coreset.json")?;
        for (table, links) in &a.coreset.links {
            let minable = !links.is_empty() && ds.feature_columns(table)?.len() >= 2;
            if !minable {
                continue; // mining skipped this table; whole-table fallback
            }
            let art: AttentionArtifact = read_artifact(
                &cfg.out,
                &format!("attention_{table}.json"),
                "train-stage1",
            )?;
            check_version(art.version, "attention artifact")?;
            attention.insert(table.clone(), art.records);
        }
    }
    let manifests = manifests_for_mode(&ds, cfg, &attention)?;
    write_json(
        &cfg.out,
        "subtables.json",
        &SubtablesArtifact {
            version: ARTIFACT_VERSION,
            manifests: manifests.clone(),
        },
    )?;
    if cfg.mining == MiningMode::GraphBased && !attention.is_empty() {
        let mut report = String::new();
        for (table, records) in &attention {
            report.push_str(&format!("== {table}\n"));
            report.push_str(&top_pairs_report(&accumulate(records)?, 20));
            report.push('\n');
        }
        write_text(&cfg.out, "subtable_report.txt", &report)?;
    }
    Ok(manifests)
}

pub fn cmd_build_graph(cfg: &PipelineConfig) -> Result<HeteroGraph> {
    let a: SubtablesArtifact = read_artifact(&cfg.out, "subtables.json", "split")?;
    check_version(a.version, "subtables.json")?;
    let ds = load(cfg)?;
    let (graph, _) = build_graph_from_manifests(&ds, &a.manifests, cfg)?;
    write_json(
        &cfg.out,
        "graph.json",
        &GraphArtifact {
            version: ARTIFACT_VERSION,
            graph: graph.clone(),
        },
    )?;
    Ok(graph)
}

pub fn cmd_train_stage2(cfg: &PipelineConfig) -> Result<Stage2Output> {
    let g: GraphArtifact = read_artifact(&cfg.out, "graph.json", "build-graph")?;
    check_version(g.version, "graph.json")?;
    let s: SubtablesArtifact = read_artifact(&cfg.out, "subtables.json", "split")?;
    check_version(s.version, "subtables.json")?;
    let ds = load(cfg)?;
    let output = stage2_train(
        &g.graph,
        &cfg.resolved_stage2(),
        derive_seed(cfg.seed, "stage2"),
    )?;
    write_json(
        &cfg.out,
        "stage2.json",
        &Stage2Artifact {
            version: ARTIFACT_VERSION,
            output: output.clone(),
        },
    )?;
    write_json(
        &cfg.out,
        "edge_importance.json",
        &ImportanceArtifact {
            version: ARTIFACT_VERSION,
            importance: output.importance.clone(),
        },
    )?;
    let mut csv = String::from("epoch,train_loss,val_loss\n");
    for (epoch, train, val) in &output.curve {
        csv.push_str(&format!("{epoch},{train},{val}\n"));
    }
    write_text(&cfg.out, "stage2_curve.csv", &csv)?;

    // The learned importances become the serialized graph's edge weights.
    let mut weighted = g.graph;
    for (e, &w) in weighted.edges.iter_mut().zip(&output.importance.per_edge) {
        e.weight = w;
    }
    write_json(
        &cfg.out,
        "graph_weighted.json",
        &GraphArtifact {
            version: ARTIFACT_VERSION,
            graph: weighted,
        },
    )?;

    let mut subtables = Vec::new();
    for m in &s.manifests {
        subtables.extend(materialize_subtables(&ds, m)?);
    }
    let report = feature_selection_report(&output.importance, &subtables);
    write_json(
        &cfg.out,
        "feature_report.json",
        &ReportArtifact {
            version: ARTIFACT_VERSION,
            report: report.clone(),
        },
    )?;
    write_text(&cfg.out, "feature_report.txt", &report.render())?;
    Ok(output)
}

pub fn cmd_predict(cfg: &PipelineConfig) -> Result<PathBuf> {
    let g: GraphArtifact = read_artifact(&cfg.out, "graph.json", "build-graph")?;
    check_version(g.version, "graph.json")?;
    let s: Stage2Artifact = read_artifact(&cfg.out, "stage2.json", "train-stage2")?;
    check_version(s.version, "stage2.json")?;
    let graph = &g.graph;
    let ids: Vec<usize> = graph.base_nodes().map(|n| n.id).collect();
    let preds = predict(graph, &s.output.params, &ids)?;

    let classes = s.output.params.classes;
    let mut csv = String::from("key,split,label,prediction");
    if graph.task == TaskKind::Classification {
        for c in 0..classes {
            csv.push_str(&format!(",p{c}"));
        }
    }
    csv.push('\n');
    for (&id, pred) in ids.iter().zip(&preds) {
        let node = &graph.nodes[id];
        let split = match node.split {
            Some(Split::Train) => "train",
            Some(Split::Val) => "val",
            Some(Split::Test) => "test",
            None => "",
        };
        let label = match node.label {
            Some(Label::Class(c)) => c.to_string(),
            Some(Label::Value(v)) => v.to_string(),
            None => String::new(),
        };
        match pred {
            Prediction::Classification(probs) => {
                let arg = probs
                    .iter()
                    .enumerate()
                    .max_by(|(_, a), (_, b)| a.total_cmp(b))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                csv.push_str(&format!("{},{split},{label},{arg}", node.key));
                for p in probs {
                    csv.push_str(&format!(",{p}"));
                }
                csv.push('\n');
            }
            Prediction::Regression(v) => {
                csv.push_str(&format!("{},{split},{label},{v}\n", node.key));
            }
        }
    }
    write_text(&cfg.out, "predictions.csv", &csv)?;
    Ok(cfg.out.join("predictions.csv"))
}

pub fn cmd_evaluate(cfg: &PipelineConfig) -> Result<MetricsArtifact> {
    let g: GraphArtifact = read_artifact(&cfg.out, "graph.json", "build-graph")?;
    check_version(g.version, "graph.json")?;
    let s: Stage2Artifact = read_artifact(&cfg.out, "stage2.json", "train-stage2")?;
    check_version(s.version, "stage2.json")?;
    let (count, metrics) = evaluate_split(&g.graph, &s.output, Split::Test)?;
    let artifact = MetricsArtifact {
        version: ARTIFACT_VERSION,
        split: "test".into(),
        count,
        metrics,
    };
    write_json(&cfg.out, "metrics.json", &artifact)?;
    Ok(artifact)
}

/// Run every stage in order and write the run manifest.
pub fn run_all(cfg: &PipelineConfig) -> Result<MetricsArtifact> {
    cfg.validate()?;
    cmd_ingest(cfg)?;
    cmd_plan(cfg)?;
    cmd_link(cfg)?;
    let mut artifacts = vec![
        "load_report.json".to_string(),
        "meta_paths.json".to_string(),
        "coreset.json".to_string(),
    ];
    for table in cmd_train_stage1(cfg)? {
        artifacts.push(format!("stage1_{table}.json"));
        artifacts.push(format!("attention_{table}.json"));
        artifacts.push(format!("stage1_curve_{table}.csv"));
    }
    cmd_split(cfg)?;
    cmd_build_graph(cfg)?;
    cmd_train_stage2(cfg)?;
    cmd_predict(cfg)?;
    let metrics = cmd_evaluate(cfg)?;
    artifacts.extend(
        [
            "subtables.json",
            "graph.json",
            "stage2.json",
            "edge_importance.json",
            "stage2_curve.csv",
            "graph_weighted.json",
            "feature_report.json",
            "feature_report.txt",
            "predictions.csv",
            "metrics.json",
        ]
        .map(String::from),
    );
    write_json(
        &cfg.out,
        "run_manifest.json",
        &RunManifest {
            version: ARTIFACT_VERSION,
            config: cfg.clone(),
            artifacts,
        },
    )?;
    Ok(metrics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hetgraph::Relation;
    use crate::testutil::tiny_pipeline_config as tiny_setup;

    #[test]
    fn run_all_produces_every_artifact_and_reruns_identically() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_setup(dir.path(), 3);
        let metrics = run_all(&cfg).unwrap();
        assert_eq!(metrics.split, "test");
        assert!(metrics.count > 0);
        assert!(metrics.metrics.accuracy.is_some());
        for name in [
            "load_report.json",
            "meta_paths.json",
            "coreset.json",
            "stage1_aux0.json",
            "attention_aux0.json",
            "stage1_curve_aux0.csv",
            "stage1_aux1.json",
            "subtables.json",
            "subtable_report.txt",
            "graph.json",
            "stage2.json",
            "edge_importance.json",
            "stage2_curve.csv",
            "graph_weighted.json",
            "feature_report.json",
            "feature_report.txt",
            "predictions.csv",
            "metrics.json",
            "run_manifest.json",
        ] {
            assert!(cfg.out.join(name).exists(), "missing artifact {name}");
        }
        let before = [
            fs::read(cfg.out.join("predictions.csv")).unwrap(),
            fs::read(cfg.out.join("subtables.json")).unwrap(),
            fs::read(cfg.out.join("metrics.json")).unwrap(),
            fs::read(cfg.out.join("run_manifest.json")).unwrap(),
        ];
        run_all(&cfg).unwrap();
        let after = [
            fs::read(cfg.out.join("predictions.csv")).unwrap(),
            fs::read(cfg.out.join("subtables.json")).unwrap(),
            fs::read(cfg.out.join("metrics.json")).unwrap(),
            fs::read(cfg.out.join("run_manifest.json")).unwrap(),
        ];
        assert_eq!(before, after, "rerun must be byte-identical");
    }

    #[test]
    fn missing_upstream_artifacts_name_their_stage() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_setup(dir.path(), 5);
        match cmd_train_stage2(&cfg) {
            Err(Error::MissingArtifact { produced_by, .. }) => {
                assert_eq!(produced_by, "build-graph")
            }
            other => panic!("unexpected: {other:?}"),
        }
        match cmd_plan(&cfg) {
            Err(Error::MissingArtifact { produced_by, .. }) => assert_eq!(produced_by, "ingest"),
            other => panic!("unexpected: {other:?}"),
        }
        cmd_ingest(&cfg).unwrap();
        match cmd_link(&cfg) {
            Err(Error::MissingArtifact { produced_by, .. }) => assert_eq!(produced_by, "plan"),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_values() {
        let bad: std::result::Result<PipelineConfig, _> =
            serde_json::from_str(r#"{"dataset": "x", "out": "y", "elll": 0.5}"#);
        assert!(bad.is_err(), "unknown key must be rejected");
        let mut cfg = PipelineConfig::default();
        cfg.ell = 1.5;
        assert!(cfg.validate().is_err());
        cfg.ell = 0.5;
        cfg.version = 99;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn overrides_take_precedence() {
        let mut cfg = PipelineConfig::default();
        cfg.apply(
            &Overrides {
                seed: Some(9),
                ell: Some(0.25),
                topk: Some(4),
                alpha: Some(0.7),
                beta: Some(0.3),
            },
            Some(PathBuf::from("elsewhere")),
        );
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.ell, 0.25);
        assert_eq!(cfg.similarity, SimilarityConfig::TopK { k: 4 });
        assert_eq!(cfg.scoring.alpha, 0.7);
        assert_eq!(cfg.scoring.beta, 0.3);
        assert_eq!(cfg.out, PathBuf::from("elsewhere"));
    }

    #[test]
    fn mining_modes_shape_the_manifests() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_setup(dir.path(), 7);
        let ds = load(&cfg).unwrap();
        let empty = BTreeMap::new();

        cfg.mining = MiningMode::NoMiningWholeTuple;
        let whole = manifests_for_mode(&ds, &cfg, &empty).unwrap();
        assert_eq!(whole.len(), 2);
        assert!(whole.iter().all(|m| m.groups.is_empty()));
        let (_, subs) = build_graph_from_manifests(&ds, &whole, &cfg).unwrap();
        assert!(subs.iter().all(|s| s.unsplit));

        cfg.mining = MiningMode::NoMiningPerAttribute;
        let per_attr = manifests_for_mode(&ds, &cfg, &empty).unwrap();
        for m in &per_attr {
            let features = ds.feature_columns(&m.table).unwrap();
            assert_eq!(m.groups.len(), features.len());
            assert!(m.groups.iter().all(|g| g.len() == 1));
        }

        cfg.mining = MiningMode::RandomGrouping;
        let random = manifests_for_mode(&ds, &cfg, &empty).unwrap();
        for m in &random {
            let mut covered: Vec<String> = m.groups.iter().flatten().cloned().collect();
            covered.sort();
            let mut features = ds.feature_columns(&m.table).unwrap();
            features.sort();
            assert_eq!(covered, features, "random pairing covers each attribute once");
            assert!(m.groups.iter().all(|g| g.len() <= 2));
        }
        // Same seed, same pairing; different seed may differ.
        let again = manifests_for_mode(&ds, &cfg, &empty).unwrap();
        assert_eq!(
            random.iter().map(|m| &m.groups).collect::<Vec<_>>(),
            again.iter().map(|m| &m.groups).collect::<Vec<_>>()
        );
    }

    #[test]
    fn in_memory_run_matches_structure() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_setup(dir.path(), 11);
        let ds = load(&cfg).unwrap();
        let run = run_in_memory(&ds, &cfg).unwrap();
        assert_eq!(run.manifests.len(), 2);
        assert!(!run.graph.nodes.is_empty());
        assert_eq!(run.report.entries.len(), run.subtables.len());
        assert!(run.test_metrics.accuracy.is_some());
        // Similarity edges obey the ablation switch.
        assert!(run
            .graph
            .edges
            .iter()
            .any(|e| e.edge_type.relation == Relation::Similarity));
        let mut no_sim = cfg.clone();
        no_sim.similarity_edges = false;
        let bare = run_in_memory(&ds, &no_sim).unwrap();
        assert!(bare
            .graph
            .edges
            .iter()
            .all(|e| e.edge_type.relation == Relation::Join));
    }

    #[test]
    fn uniform_attention_switch_flows_into_stage2() {
        let cfg = PipelineConfig {
            edge_weights: false,
            ..PipelineConfig::default()
        };
        assert!(cfg.resolved_stage2().uniform_attention);
        let cfg = PipelineConfig::default();
        assert!(!cfg.resolved_stage2().uniform_attention);
    }
}
