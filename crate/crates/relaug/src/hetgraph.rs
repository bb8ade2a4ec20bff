//! Stage-2 graph assembly: one node per base tuple and per sub-table
//! tuple, join edges induced by PK-FK matches (fanned out to every
//! sub-tuple of a split table), and similarity edges among base tuples.
//!
//! Node features are concatenations of the projected attribute embeddings,
//! computed once with a frozen encoder snapshot; the message-passing model
//! later projects each node type's width onto a shared hidden size.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::dataset::{Label, RelationalDataset, TaskKind};
use crate::encoders::EncoderParams;
use crate::error::{Error, Result};
use crate::linker::assign_strata;
use crate::rng::seeded_rng;
use crate::subtables::SubTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeteroNode {
    pub id: usize,
    /// Base table name, or a sub-table id such as `events#0`.
    pub node_type: String,
    /// Tuple key within the node's (sub-)table.
    pub key: String,
    /// Concatenated projected attribute embeddings, fixed layout per type.
    pub x: Vec<f64>,
    /// Base nodes carry the prediction target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    /// Assigned by `assemble` for base nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Join,
    Similarity,
}

impl std::fmt::Display for Relation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Relation::Join => write!(f, "join"),
            Relation::Similarity => write!(f, "similarity"),
        }
    }
}

/// (source type, relation, destination type) — the unit that gets its own
/// message-passing parameters downstream.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeType {
    pub src_type: String,
    pub relation: Relation,
    pub dst_type: String,
}

impl EdgeType {
    pub fn new(src: &str, relation: Relation, dst: &str) -> Self {
        EdgeType {
            src_type: src.to_string(),
            relation,
            dst_type: dst.to_string(),
        }
    }
}

impl std::fmt::Display for EdgeType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} -{}-> {}", self.src_type, self.relation, self.dst_type)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteroEdge {
    pub src: usize,
    pub dst: usize,
    pub edge_type: EdgeType,
    /// Static structural weight; message passing refines attention on top.
    pub weight: f64,
}

/// How implicit base-to-base edges are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SimilarityConfig {
    /// Connect pairs with cosine similarity strictly above `theta`.
    Threshold { theta: f64 },
    /// Connect each node to its `k` most similar peers, symmetrized.
    TopK { k: usize },
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig::TopK { k: 10 }
    }
}

impl SimilarityConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SimilarityConfig::Threshold { theta } => {
                if !theta.is_finite() {
                    return Err(Error::Config(format!(
                        "similarity threshold must be finite, got {theta}"
                    )));
                }
            }
            SimilarityConfig::TopK { k } => {
                if k == 0 {
                    return Err(Error::Config("similarity top-k must be at least 1".into()));
                }
            }
        }
        Ok(())
    }
}

/// Train/val/test proportions for base nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train: 0.7,
            val: 0.15,
            test: 0.15,
            seed: 0,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Config(
                "split fractions must each lie in [0, 1]".into(),
            ));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Incoming adjacency: edge type -> dst node -> (src node, edge index).
pub type InAdjacency = BTreeMap<EdgeType, BTreeMap<usize, Vec<(usize, usize)>>>;

/// The assembled heterogeneous graph. Adjacency is derived on demand (see
/// `in_adjacency`); the serialized form carries only nodes and edges.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeteroGraph {
    /// Node type of base-table nodes (= base table name).
    pub base_type: String,
    pub task: TaskKind,
    pub nodes: Vec<HeteroNode>,
    pub edges: Vec<HeteroEdge>,
}

impl HeteroGraph {
    pub fn base_nodes(&self) -> impl Iterator<Item = &HeteroNode> {
        self.nodes.iter().filter(|n| n.node_type == self.base_type)
    }

    /// Distinct node types, sorted, base type first.
    pub fn node_types(&self) -> Vec<String> {
        let mut set: BTreeSet<&str> = self.nodes.iter().map(|n| n.node_type.as_str()).collect();
        set.remove(self.base_type.as_str());
        let mut out = vec![self.base_type.clone()];
        out.extend(set.into_iter().map(String::from));
        out
    }

    /// Distinct edge types, sorted.
    pub fn edge_types(&self) -> Vec<EdgeType> {
        self.edges
            .iter()
            .map(|e| e.edge_type.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Feature width per node type (0 for a type with no nodes).
    pub fn feature_dim(&self, node_type: &str) -> usize {
        self.nodes
            .iter()
            .find(|n| n.node_type == node_type)
            .map(|n| n.x.len())
            .unwrap_or(0)
    }

    /// Incoming adjacency per edge type: dst node -> (src node, edge index),
    /// fully ordered so downstream float accumulation is reproducible.
    pub fn in_adjacency(&self) -> InAdjacency {
        let mut adj: InAdjacency = BTreeMap::new();
        for (i, e) in self.edges.iter().enumerate() {
            adj.entry(e.edge_type.clone())
                .or_default()
                .entry(e.dst)
                .or_default()
                .push((e.src, i));
        }
        adj
    }
}

/// Concatenate the projected embeddings of the given columns of one tuple.
/// Cells are encoded against `stat_table` (the parent table whose
/// statistics and vocabularies the encoders were fitted on).
fn concat_features(
    enc: &EncoderParams,
    stat_table: &str,
    columns: &[String],
    table: &crate::dataset::Table,
    row: usize,
) -> Result<Vec<f64>> {
    let mut x = Vec::with_capacity(columns.len() * enc.dims.d_out);
    for col in columns {
        let (ci, _) = table.column(col)?;
        let value = &table.tuples[row].values[ci];
        x.extend(enc.feature(stat_table, col, value)?);
    }
    Ok(x)
}

/// One node per base tuple (labeled) and one per sub-table tuple.
/// Feature layout per node type is its column list in table order.
pub fn build_nodes(
    ds: &RelationalDataset,
    subtables: &[SubTable],
    enc: &EncoderParams,
) -> Result<Vec<HeteroNode>> {
    let base = ds.base_table();
    let base_cols = ds.feature_columns(&base.name)?;
    let mut nodes = Vec::new();
    for (row, tuple) in base.tuples.iter().enumerate() {
        nodes.push(HeteroNode {
            id: nodes.len(),
            node_type: base.name.clone(),
            key: tuple.key.clone(),
            x: concat_features(enc, &base.name, &base_cols, base, row)?,
            // Null-target rows stay in the graph but get no label (and
            // therefore no train/val/test assignment).
            label: ds.base_label(row),
            split: None,
        });
    }
    for sub in subtables {
        for row in 0..sub.table.tuples.len() {
            nodes.push(HeteroNode {
                id: nodes.len(),
                node_type: sub.id.clone(),
                key: sub.table.tuples[row].key.clone(),
                x: concat_features(enc, &sub.parent, &sub.group, &sub.table, row)?,
                label: None,
                split: None,
            });
        }
    }
    Ok(nodes)
}

/// Node ids representing each original tuple: the base node itself, or
/// every sub-tuple node derived from an auxiliary tuple.
struct Representatives {
    /// table name -> key -> node ids.
    map: HashMap<String, HashMap<String, Vec<usize>>>,
}

impl Representatives {
    fn build(ds: &RelationalDataset, subtables: &[SubTable], nodes: &[HeteroNode]) -> Self {
        let mut by_type: HashMap<&str, Vec<&HeteroNode>> = HashMap::new();
        for n in nodes {
            by_type.entry(n.node_type.as_str()).or_default().push(n);
        }
        let mut map: HashMap<String, HashMap<String, Vec<usize>>> = HashMap::new();
        let base_name = &ds.task.base_table;
        if let Some(base_nodes) = by_type.get(base_name.as_str()) {
            let entry = map.entry(base_name.clone()).or_default();
            for n in base_nodes {
                entry.entry(n.key.clone()).or_default().push(n.id);
            }
        }
        for sub in subtables {
            let entry = map.entry(sub.parent.clone()).or_default();
            if let Some(sub_nodes) = by_type.get(sub.id.as_str()) {
                for n in sub_nodes {
                    entry.entry(n.key.clone()).or_default().push(n.id);
                }
            }
        }
        Representatives { map }
    }

    fn of(&self, table: &str, key: &str) -> &[usize] {
        self.map
            .get(table)
            .and_then(|m| m.get(key))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

/// Every PK-FK value match becomes undirected join edges between all
/// representatives of the two tuples (two directed edges each). A tuple
/// split into m sub-tuples receives m edges from its join partner.
pub fn build_join_edges(
    ds: &RelationalDataset,
    subtables: &[SubTable],
    nodes: &[HeteroNode],
) -> Vec<HeteroEdge> {
    let reps = Representatives::build(ds, subtables, nodes);
    let mut edges = Vec::new();
    let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
    for table in &ds.tables {
        for (fk_idx, _, target) in table.fk_columns() {
            let Ok(dst_table) = ds.table(&target.table) else {
                continue;
            };
            for tuple in &table.tuples {
                let Some(fk_value) = tuple.values[fk_idx].as_str() else {
                    continue;
                };
                if dst_table.row_by_pk(fk_value).is_none() {
                    continue;
                }
                let dst_key = fk_value;
                for &src_node in reps.of(&table.name, &tuple.key) {
                    for &dst_node in reps.of(&dst_table.name, dst_key) {
                        if src_node == dst_node {
                            continue;
                        }
                        let pair = (src_node.min(dst_node), src_node.max(dst_node));
                        if !seen.insert(pair) {
                            continue;
                        }
                        push_undirected(&mut edges, nodes, src_node, dst_node, Relation::Join);
                    }
                }
            }
        }
    }
    edges
}

fn push_undirected(
    edges: &mut Vec<HeteroEdge>,
    nodes: &[HeteroNode],
    a: usize,
    b: usize,
    relation: Relation,
) {
    edges.push(HeteroEdge {
        src: a,
        dst: b,
        edge_type: EdgeType::new(&nodes[a].node_type, relation, &nodes[b].node_type),
        weight: 1.0,
    });
    edges.push(HeteroEdge {
        src: b,
        dst: a,
        edge_type: EdgeType::new(&nodes[b].node_type, relation, &nodes[a].node_type),
        weight: 1.0,
    });
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Implicit edges among base nodes from cosine similarity of their frozen
/// features: all pairs above a threshold, or each node's top-k peers
/// (union-symmetrized). Never emits self-edges.
pub fn build_similarity_edges(
    nodes: &[HeteroNode],
    base_type: &str,
    config: &SimilarityConfig,
) -> Result<Vec<HeteroEdge>> {
    config.validate()?;
    let base: Vec<&HeteroNode> = nodes.iter().filter(|n| n.node_type == base_type).collect();
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    match *config {
        SimilarityConfig::Threshold { theta } => {
            for (i, u) in base.iter().enumerate() {
                for v in base.iter().skip(i + 1) {
                    if cosine(&u.x, &v.x) > theta {
                        pairs.insert((u.id.min(v.id), u.id.max(v.id)));
                    }
                }
            }
        }
        SimilarityConfig::TopK { k } => {
            let k = if k >= base.len() && base.len() > 1 {
                log::warn!(
                    "similarity top-k {k} >= {} base nodes; clamping to {}",
                    base.len(),
                    base.len() - 1
                );
                base.len() - 1
            } else {
                k
            };
            for u in &base {
                let mut sims: Vec<(f64, usize)> = base
                    .iter()
                    .filter(|v| v.id != u.id)
                    .map(|v| (cosine(&u.x, &v.x), v.id))
                    .collect();
                sims.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                for &(_, vid) in sims.iter().take(k) {
                    pairs.insert((u.id.min(vid), u.id.max(vid)));
                }
            }
        }
    }
    let mut edges = Vec::new();
    for (a, b) in pairs {
        push_undirected(&mut edges, nodes, a, b, Relation::Similarity);
    }
    Ok(edges)
}

/// Tag base nodes with stratified train/val/test assignments and wrap
/// everything into the final graph.
pub fn assemble(
    ds: &RelationalDataset,
    mut nodes: Vec<HeteroNode>,
    edges: Vec<HeteroEdge>,
    split: &SplitConfig,
) -> Result<HeteroGraph> {
    split.validate()?;
    let base_type = ds.task.base_table.clone();
    let base_ids: Vec<usize> = nodes
        .iter()
        .filter(|n| n.node_type == base_type)
        .map(|n| n.id)
        .collect();
    if base_ids.is_empty() {
        return Err(Error::EmptyBaseTable);
    }

    let labeled: Vec<(usize, Label)> = base_ids
        .iter()
        .filter_map(|&id| nodes[id].label.map(|l| (id, l)))
        .collect();
    if labeled.is_empty() {
        return Err(Error::Schema(
            "no base tuple carries a usable target value".into(),
        ));
    }
    let strata = assign_strata(ds.task.task, &labeled);
    let mut by_stratum: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for ((id, _), s) in labeled.iter().zip(&strata) {
        by_stratum.entry(*s).or_default().push(*id);
    }

    let mut rng = seeded_rng(split.seed, "split");
    for members in by_stratum.values_mut() {
        use rand::seq::SliceRandom;
        members.shuffle(&mut rng);
        let counts = split_counts(members.len(), split);
        for (i, &id) in members.iter().enumerate() {
            let tag = if i < counts.0 {
                Split::Train
            } else if i < counts.0 + counts.1 {
                Split::Val
            } else {
                Split::Test
            };
            nodes[id].split = Some(tag);
        }
    }

    Ok(HeteroGraph {
        base_type,
        task: ds.task.task,
        nodes,
        edges,
    })
}

/// Largest-remainder apportionment of one stratum over the three splits.
fn split_counts(n: usize, cfg: &SplitConfig) -> (usize, usize, usize) {
    let shares = [cfg.train * n as f64, cfg.val * n as f64, cfg.test * n as f64];
    let mut counts = [
        shares[0].floor() as usize,
        shares[1].floor() as usize,
        shares[2].floor() as usize,
    ];
    let mut rest: Vec<(f64, usize)> = shares
        .iter()
        .enumerate()
        .map(|(i, s)| (s - s.floor(), i))
        .collect();
    rest.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut leftover = n - counts.iter().sum::<usize>();
    for &(_, i) in &rest {
        if leftover == 0 {
            break;
        }
        counts[i] += 1;
        leftover -= 1;
    }
    (counts[0], counts[1], counts[2])
}
