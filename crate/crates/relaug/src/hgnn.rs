//! Stage 2: heterogeneous message passing with learned per-edge attention.
//!
//! Node features enter through per-node-type projections onto a shared
//! hidden width. Each layer scores every incoming edge per edge type
//! (softmax over the type's neighborhood), aggregates attention-weighted
//! linear messages, and combines them with a self transform:
//!
//!   h_i  <-  ELU( W_self h_i  +  sum_t sum_{j in N_t(i)} a_ji M_t h_j )
//!
//! Training minimizes the summed prediction loss over train-split base
//! nodes, keeps the best-validation checkpoint, and exports the attention
//! at that checkpoint as per-edge importances — the signal behind the
//! feature-selection report. Backward passes are manual, checked against
//! finite differences in the tests.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{Label, TaskKind};
use crate::error::{Error, Result};
pub use crate::gat::Prediction;
use crate::hetgraph::{EdgeType, HeteroGraph, InAdjacency, Relation, Split};
use crate::nn::{
    cross_entropy, dot, elu, elu_prime, leaky_relu_prime, matvec, outer_acc, softmax, vecmat,
    zero_grads, Adam, Param, ParamSet,
};
use crate::rng::seeded_rng;
use crate::subtables::SubTable;

/// Per-edge-type message parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeParams {
    /// Message transform, d_model x d_model.
    pub m: Param,
    /// Attention scorer over [h_src || h_dst], length 2*d_model.
    pub scorer: Param,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// Self transform, d_model x d_model.
    pub w_self: Param,
    /// Sorted by edge type for deterministic traversal.
    pub edge: Vec<(EdgeType, EdgeParams)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputProj {
    pub dim: usize,
    /// dim x d_model, no bias.
    pub w: Param,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HgnnParams {
    pub d_model: usize,
    pub classes: usize,
    pub leaky_slope: f64,
    /// Ablation mode: every neighborhood attends uniformly and the scorers
    /// receive no gradient.
    pub uniform_attention: bool,
    /// Per node type, keyed by type name.
    pub input_proj: std::collections::BTreeMap<String, InputProj>,
    pub layers: Vec<LayerParams>,
    /// classes x d_model (classes = 1 for regression).
    pub head: Param,
}

impl ParamSet for HgnnParams {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        for proj in self.input_proj.values_mut() {
            f(&mut proj.w);
        }
        for layer in &mut self.layers {
            f(&mut layer.w_self);
            for (_, ep) in &mut layer.edge {
                f(&mut ep.m);
                f(&mut ep.scorer);
            }
        }
        f(&mut self.head);
    }
}

impl HgnnParams {
    /// Initialize for a given graph: one projection per node type, one
    /// message transform + scorer per edge type per layer.
    pub fn init(graph: &HeteroGraph, config: &Stage2Config, seed: u64) -> Result<Self> {
        config.validate()?;
        let classes = infer_classes(graph)?;
        let d = config.d_model;
        let mut rng = seeded_rng(seed, "stage2/init");
        let mut input_proj = std::collections::BTreeMap::new();
        for nt in graph.node_types() {
            let dim = graph.feature_dim(&nt);
            if dim == 0 {
                return Err(Error::Config(format!(
                    "node type {nt} has zero-width features"
                )));
            }
            input_proj.insert(
                nt,
                InputProj {
                    dim,
                    w: Param::uniform(dim * d, dim, &mut rng),
                },
            );
        }
        let edge_types = graph.edge_types();
        let layers = (0..config.layers)
            .map(|_| LayerParams {
                w_self: Param::uniform(d * d, d, &mut rng),
                edge: edge_types
                    .iter()
                    .map(|t| {
                        (
                            t.clone(),
                            EdgeParams {
                                m: Param::uniform(d * d, d, &mut rng),
                                scorer: Param::uniform(2 * d, 2 * d, &mut rng),
                            },
                        )
                    })
                    .collect(),
            })
            .collect();
        Ok(HgnnParams {
            d_model: d,
            classes,
            leaky_slope: config.leaky_slope,
            uniform_attention: config.uniform_attention,
            input_proj,
            layers,
            head: Param::uniform(classes * d, d, &mut rng),
        })
    }

    pub fn ensure_grads(&mut self) {
        self.visit_params(&mut Param::ensure_grad);
    }

    /// Copy of every parameter vector, in visit order.
    fn snapshot(&mut self) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        self.visit_params(&mut |p| out.push(p.data.clone()));
        out
    }

    fn restore(&mut self, snap: &[Vec<f64>]) {
        let mut i = 0;
        self.visit_params(&mut |p| {
            p.data.copy_from_slice(&snap[i]);
            i += 1;
        });
    }
}

/// Number of prediction outputs the graph's labels require.
fn infer_classes(graph: &HeteroGraph) -> Result<usize> {
    match graph.task {
        TaskKind::Regression => Ok(1),
        TaskKind::Classification => {
            let max = graph
                .base_nodes()
                .filter_map(|n| n.label.and_then(Label::class))
                .max()
                .ok_or_else(|| {
                    Error::Schema("no labeled base node to infer the class count from".into())
                })?;
            Ok(max + 1)
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage2Config {
    #[serde(default = "default_d_model")]
    pub d_model: usize,
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_slope")]
    pub leaky_slope: f64,
    /// None trains with one full-graph step per epoch; Some(b) splits the
    /// train nodes into loss batches of size b (forward stays full-graph).
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub uniform_attention: bool,
}

fn default_d_model() -> usize {
    64
}
fn default_layers() -> usize {
    2
}
fn default_epochs() -> usize {
    200
}
fn default_lr() -> f64 {
    1e-3
}
fn default_slope() -> f64 {
    0.2
}

impl Default for Stage2Config {
    fn default() -> Self {
        Stage2Config {
            d_model: default_d_model(),
            layers: default_layers(),
            epochs: default_epochs(),
            lr: default_lr(),
            leaky_slope: default_slope(),
            batch_size: None,
            uniform_attention: false,
        }
    }
}

impl Stage2Config {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.layers == 0 || self.epochs == 0 {
            return Err(Error::Config(
                "stage-2 d_model, layers, and epochs must be positive".into(),
            ));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("stage-2 batch_size must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "stage-2 lr must be positive, got {}",
                self.lr
            )));
        }
        Ok(())
    }
}

/// Attention bookkeeping for one (edge type, dst node) neighborhood.
#[derive(Debug, Clone)]
pub struct AttRow {
    /// (src node, edge index) in adjacency order.
    pub edges: Vec<(usize, usize)>,
    /// Pre-activation scores (before LeakyReLU), aligned with `edges`.
    raw: Vec<f64>,
    /// Softmax attention, aligned with `edges`; sums to 1.
    pub alpha: Vec<f64>,
}

struct LayerTrace {
    h_in: Vec<Vec<f64>>,
    /// Pre-ELU combined state per node.
    s: Vec<Vec<f64>>,
    /// Parallel to the layer's edge-type list: dst -> attention row.
    att: Vec<std::collections::BTreeMap<usize, AttRow>>,
}

pub struct ForwardTrace {
    layers: Vec<LayerTrace>,
    /// Final node states.
    pub h_out: Vec<Vec<f64>>,
}

impl ForwardTrace {
    /// Attention rows of the last layer, parallel to the parameter set's
    /// edge-type list.
    pub fn last_attention(&self) -> &[std::collections::BTreeMap<usize, AttRow>] {
        &self.layers.last().expect("at least one layer").att
    }
}

/// Full-graph forward pass.
pub fn forward(graph: &HeteroGraph, adj: &InAdjacency, p: &HgnnParams) -> ForwardTrace {
    let n = graph.nodes.len();
    let d = p.d_model;
    let mut h: Vec<Vec<f64>> = graph
        .nodes
        .iter()
        .map(|node| {
            let proj = &p.input_proj[&node.node_type];
            vecmat(&node.x, &proj.w.data, proj.dim, d)
        })
        .collect();

    let mut layers = Vec::with_capacity(p.layers.len());
    for layer in &p.layers {
        let mut s: Vec<Vec<f64>> = h.iter().map(|hi| matvec(&layer.w_self.data, hi, d, d)).collect();
        let mut att = Vec::with_capacity(layer.edge.len());
        for (etype, ep) in &layer.edge {
            let mut rows = std::collections::BTreeMap::new();
            if let Some(per_dst) = adj.get(etype) {
                let (a1, a2) = ep.scorer.data.split_at(d);
                // Per-source caches shared across destinations.
                let mut msg: HashMap<usize, Vec<f64>> = HashMap::new();
                let mut src_score: HashMap<usize, f64> = HashMap::new();
                for (&dst, in_list) in per_dst {
                    let dst_score = dot(a2, &h[dst]);
                    let mut raw = Vec::with_capacity(in_list.len());
                    for &(src, _) in in_list {
                        let ss = *src_score
                            .entry(src)
                            .or_insert_with(|| dot(a1, &h[src]));
                        raw.push(ss + dst_score);
                    }
                    let alpha = if p.uniform_attention {
                        vec![1.0 / in_list.len() as f64; in_list.len()]
                    } else {
                        let scored: Vec<f64> = raw
                            .iter()
                            .map(|&z| crate::nn::leaky_relu(z, p.leaky_slope))
                            .collect();
                        softmax(&scored)
                    };
                    for (k, &(src, _)) in in_list.iter().enumerate() {
                        let mh = msg
                            .entry(src)
                            .or_insert_with(|| matvec(&ep.m.data, &h[src], d, d));
                        crate::nn::axpy(&mut s[dst], alpha[k], mh);
                    }
                    rows.insert(
                        dst,
                        AttRow {
                            edges: in_list.clone(),
                            raw,
                            alpha,
                        },
                    );
                }
            }
            att.push(rows);
        }
        let h_next: Vec<Vec<f64>> = s
            .iter()
            .map(|si| si.iter().map(|&t| elu(t)).collect())
            .collect();
        layers.push(LayerTrace {
            h_in: std::mem::replace(&mut h, h_next),
            s,
            att,
        });
    }
    debug_assert_eq!(h.len(), n);
    ForwardTrace { layers, h_out: h }
}

/// Backward through every layer given dL/dh for the final node states.
/// Gradients accumulate into `p`.
fn backward(p: &mut HgnnParams, graph: &HeteroGraph, trace: &ForwardTrace, d_h_out: Vec<Vec<f64>>) {
    let d = p.d_model;
    let mut d_h = d_h_out;
    for (layer, lt) in p.layers.iter_mut().zip(&trace.layers).rev() {
        let n = lt.h_in.len();
        let mut d_s: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                lt.s[i]
                    .iter()
                    .zip(&d_h[i])
                    .map(|(&si, &g)| g * elu_prime(si))
                    .collect()
            })
            .collect();
        let mut d_h_in = vec![vec![0.0; d]; n];
        for i in 0..n {
            outer_acc(&mut layer.w_self.grad, &d_s[i], &lt.h_in[i]);
            let back = vecmat(&d_s[i], &layer.w_self.data, d, d);
            crate::nn::axpy(&mut d_h_in[i], 1.0, &back);
        }
        for ((_, ep), rows) in layer.edge.iter_mut().zip(&lt.att) {
            let a1 = ep.scorer.data[..d].to_vec();
            let a2 = ep.scorer.data[d..].to_vec();
            for (&dst, row) in rows {
                let k_n = row.edges.len();
                // d_alpha and message-side gradients.
                let mut d_alpha = vec![0.0; k_n];
                for (k, &(src, _)) in row.edges.iter().enumerate() {
                    let mh = matvec(&ep.m.data, &lt.h_in[src], d, d);
                    d_alpha[k] = dot(&mh, &d_s[dst]);
                    let scaled: Vec<f64> = d_s[dst].iter().map(|&g| g * row.alpha[k]).collect();
                    outer_acc(&mut ep.m.grad, &scaled, &lt.h_in[src]);
                    let back = vecmat(&scaled, &ep.m.data, d, d);
                    crate::nn::axpy(&mut d_h_in[src], 1.0, &back);
                }
                if p.uniform_attention {
                    continue;
                }
                // Softmax + LeakyReLU + scorer.
                let inner = dot(&row.alpha, &d_alpha);
                for (k, &(src, _)) in row.edges.iter().enumerate() {
                    let d_z = row.alpha[k] * (d_alpha[k] - inner);
                    let d_raw = d_z * leaky_relu_prime(row.raw[k], p.leaky_slope);
                    if d_raw == 0.0 {
                        continue;
                    }
                    crate::nn::axpy(&mut ep.scorer.grad[..d], d_raw, &lt.h_in[src]);
                    crate::nn::axpy(&mut ep.scorer.grad[d..], d_raw, &lt.h_in[dst]);
                    crate::nn::axpy(&mut d_h_in[src], d_raw, &a1);
                    crate::nn::axpy(&mut d_h_in[dst], d_raw, &a2);
                }
            }
        }
        let _ = &mut d_s;
        d_h = d_h_in;
    }
    // Input projections.
    for (node, d_h0) in graph.nodes.iter().zip(&d_h) {
        let proj = p.input_proj.get_mut(&node.node_type).expect("type known");
        outer_acc(&mut proj.w.grad, &node.x, d_h0);
    }
}

/// Per-node loss + dL/dlogits for a labeled node.
fn node_loss(logits: &[f64], label: Label) -> (f64, Vec<f64>) {
    match label {
        Label::Class(c) => cross_entropy(logits, c),
        Label::Value(y) => {
            let err = logits[0] - y;
            (err * err, vec![2.0 * err])
        }
    }
}

/// Forward + summed loss over `ids` + full manual backward. Public so
/// callers can verify gradients or drive their own optimization loop.
pub fn loss_and_backward(
    graph: &HeteroGraph,
    adj: &InAdjacency,
    p: &mut HgnnParams,
    ids: &[usize],
) -> Result<f64> {
    let trace = forward(graph, adj, p);
    let d = p.d_model;
    let mut total = 0.0;
    let mut d_h_out = vec![vec![0.0; d]; graph.nodes.len()];
    for &id in ids {
        let label = graph.nodes[id]
            .label
            .ok_or_else(|| Error::Schema(format!("node {id} has no label")))?;
        let logits = matvec(&p.head.data, &trace.h_out[id], p.classes, d);
        let (loss, d_logits) = node_loss(&logits, label);
        total += loss;
        outer_acc(&mut p.head.grad, &d_logits, &trace.h_out[id]);
        let back = vecmat(&d_logits, &p.head.data, p.classes, d);
        crate::nn::axpy(&mut d_h_out[id], 1.0, &back);
    }
    backward(p, graph, &trace, d_h_out);
    Ok(total)
}

/// Summed loss over `ids` without touching gradients.
pub fn evaluate_loss(
    graph: &HeteroGraph,
    adj: &InAdjacency,
    p: &HgnnParams,
    ids: &[usize],
) -> Result<f64> {
    let trace = forward(graph, adj, p);
    let mut total = 0.0;
    for &id in ids {
        let label = graph.nodes[id]
            .label
            .ok_or_else(|| Error::Schema(format!("node {id} has no label")))?;
        let logits = matvec(&p.head.data, &trace.h_out[id], p.classes, p.d_model);
        total += node_loss(&logits, label).0;
    }
    Ok(total)
}

/// Predictions for the given base nodes under fixed parameters.
pub fn predict(graph: &HeteroGraph, p: &HgnnParams, ids: &[usize]) -> Result<Vec<Prediction>> {
    let adj = graph.in_adjacency();
    let trace = forward(graph, &adj, p);
    ids.iter()
        .map(|&id| {
            let node = graph.nodes.get(id).ok_or(Error::NotABaseNode(id))?;
            if node.node_type != graph.base_type {
                return Err(Error::NotABaseNode(id));
            }
            let logits = matvec(&p.head.data, &trace.h_out[id], p.classes, p.d_model);
            Ok(match graph.task {
                TaskKind::Classification => Prediction::Classification(softmax(&logits)),
                TaskKind::Regression => Prediction::Regression(logits[0]),
            })
        })
        .collect()
}

/// Learned edge weights at a checkpoint, read from the last layer's
/// attention, plus aggregates over base-node in-edges.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeImportance {
    /// Aligned with `graph.edges`.
    pub per_edge: Vec<f64>,
    /// Mean attention over each edge type's base-node in-edges (0 when the
    /// type never reaches a base node).
    pub per_edge_type: Vec<(EdgeType, f64)>,
    /// Mean attention into base nodes per sub-table node type (0 for
    /// sub-tables with no base in-edges).
    pub per_subtable: Vec<(String, f64)>,
    /// Fraction of base-node attention mass carried by similarity edges.
    pub similarity_share: f64,
}

/// Compute edge importances under the given parameters.
pub fn edge_importance(graph: &HeteroGraph, adj: &InAdjacency, p: &HgnnParams) -> EdgeImportance {
    let trace = forward(graph, adj, p);
    let mut per_edge = vec![0.0; graph.edges.len()];
    let last = trace.last_attention();
    for ((_, _), rows) in p.layers.last().expect("layers").edge.iter().zip(last) {
        for row in rows.values() {
            for (k, &(_, eidx)) in row.edges.iter().enumerate() {
                per_edge[eidx] = row.alpha[k];
            }
        }
    }

    let is_base = |id: usize| graph.nodes[id].node_type == graph.base_type;
    let mut by_type: std::collections::BTreeMap<EdgeType, (f64, usize)> = graph
        .edge_types()
        .into_iter()
        .map(|t| (t, (0.0, 0)))
        .collect();
    let mut by_sub: std::collections::BTreeMap<String, (f64, usize)> = graph
        .node_types()
        .into_iter()
        .filter(|t| *t != graph.base_type)
        .map(|t| (t, (0.0, 0)))
        .collect();
    let mut sim_mass = 0.0;
    let mut total_mass = 0.0;
    for (e, &a) in graph.edges.iter().zip(&per_edge) {
        if !is_base(e.dst) {
            continue;
        }
        let entry = by_type.get_mut(&e.edge_type).expect("type enumerated");
        entry.0 += a;
        entry.1 += 1;
        if let Some(sub) = by_sub.get_mut(&graph.nodes[e.src].node_type) {
            sub.0 += a;
            sub.1 += 1;
        }
        total_mass += a;
        if e.edge_type.relation == Relation::Similarity {
            sim_mass += a;
        }
    }
    let mean = |(s, c): (f64, usize)| if c == 0 { 0.0 } else { s / c as f64 };
    EdgeImportance {
        per_edge,
        per_edge_type: by_type.into_iter().map(|(t, sc)| (t, mean(sc))).collect(),
        per_subtable: by_sub.into_iter().map(|(t, sc)| (t, mean(sc))).collect(),
        similarity_share: if total_mass == 0.0 {
            0.0
        } else {
            sim_mass / total_mass
        },
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stage2Output {
    pub params: HgnnParams,
    /// (epoch, summed train loss, summed validation loss).
    pub curve: Vec<(usize, f64, f64)>,
    pub best_epoch: usize,
    pub importance: EdgeImportance,
}

/// Train with Adam, full-graph forward passes, and best-validation
/// checkpointing; returns the checkpoint parameters and the edge
/// importances computed at that checkpoint.
pub fn stage2_train(
    graph: &HeteroGraph,
    config: &Stage2Config,
    seed: u64,
) -> Result<Stage2Output> {
    config.validate()?;
    let adj = graph.in_adjacency();
    let mut params = HgnnParams::init(graph, config, seed)?;
    params.ensure_grads();

    let ids_in = |s: Split| -> Vec<usize> {
        graph
            .base_nodes()
            .filter(|n| n.split == Some(s) && n.label.is_some())
            .map(|n| n.id)
            .collect()
    };
    let train_ids = ids_in(Split::Train);
    let val_ids = ids_in(Split::Val);
    if train_ids.is_empty() {
        return Err(Error::Schema("no labeled train-split base nodes".into()));
    }
    if val_ids.is_empty() {
        log::warn!("validation split is empty; checkpointing on train loss");
    }

    let mut rng = seeded_rng(seed, "stage2/shuffle");
    let mut opt = Adam::new(config.lr);
    let mut order = train_ids.clone();
    let mut curve = Vec::with_capacity(config.epochs);
    let mut best_epoch = 0;
    let mut best_val = f64::INFINITY;
    let mut best_snap = params.snapshot();

    for epoch in 0..config.epochs {
        let mut train_loss = 0.0;
        let batches: Vec<&[usize]> = match config.batch_size {
            None => vec![&order[..]],
            Some(b) => {
                use rand::seq::SliceRandom;
                order.shuffle(&mut rng);
                order.chunks(b).collect()
            }
        };
        for batch in batches {
            zero_grads(&mut params);
            let loss = loss_and_backward(graph, &adj, &mut params, batch)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    stage: "stage2".into(),
                    epoch,
                    loss,
                });
            }
            opt.step(&mut params);
            train_loss += loss;
        }
        let val_loss = if val_ids.is_empty() {
            train_loss
        } else {
            evaluate_loss(graph, &adj, &params, &val_ids)?
        };
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                stage: "stage2".into(),
                epoch,
                loss: val_loss,
            });
        }
        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best_snap = params.snapshot();
        }
        curve.push((epoch, train_loss, val_loss));
        if epoch == 0 || (epoch + 1) % 25 == 0 {
            log::debug!("stage2 epoch {epoch}: train {train_loss:.6}, val {val_loss:.6}");
        }
    }

    params.restore(&best_snap);
    let importance = edge_importance(graph, &adj, &params);
    Ok(Stage2Output {
        params,
        curve,
        best_epoch,
        importance,
    })
}

/// One line of the feature-selection ranking.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureReportEntry {
    pub rank: usize,
    pub subtable: String,
    /// Attributes the sub-table carries (empty if unknown to the caller).
    pub attributes: Vec<String>,
    pub importance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSelectionReport {
    pub entries: Vec<FeatureReportEntry>,
    pub per_edge_type: Vec<(EdgeType, f64)>,
    pub similarity_share: f64,
}

/// Rank sub-tables by mean attention into base nodes, descending; ties
/// break lexicographically on the sub-table id.
pub fn feature_selection_report(
    importance: &EdgeImportance,
    subtables: &[SubTable],
) -> FeatureSelectionReport {
    let mut ranked = importance.per_subtable.clone();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let entries = ranked
        .into_iter()
        .enumerate()
        .map(|(i, (id, imp))| FeatureReportEntry {
            rank: i + 1,
            attributes: subtables
                .iter()
                .find(|s| s.id == id)
                .map(|s| s.group.clone())
                .unwrap_or_default(),
            subtable: id,
            importance: imp,
        })
        .collect();
    FeatureSelectionReport {
        entries,
        per_edge_type: importance.per_edge_type.clone(),
        similarity_share: importance.similarity_share,
    }
}

impl FeatureSelectionReport {
    pub fn render(&self) -> String {
        let mut out = String::from("sub-table importance (mean attention into base nodes)\n");
        for e in &self.entries {
            out.push_str(&format!(
                "  {:>3}. {}  {:.6}  [{}]\n",
                e.rank,
                e.subtable,
                e.importance,
                e.attributes.join(", ")
            ));
        }
        out.push_str(&format!(
            "similarity-edge share of base attention: {:.4}\n",
            self.similarity_share
        ));
        out.push_str("per edge type:\n");
        for (t, v) in &self.per_edge_type {
            out.push_str(&format!("  {t}: {v:.6}\n"));
        }
        out
    }
}
