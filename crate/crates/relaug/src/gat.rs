//! Stage 1: per-tuple attribute graphs, a shared graph-attention layer, and
//! training against the inherited labels.
//!
//! Every labeled auxiliary tuple becomes a complete graph whose nodes are
//! the tuple's non-key attributes. A single attention layer (shared weights)
//! scores every ordered attribute pair, aggregates, pools to a graph
//! embedding, and predicts the tuple's label. After training, the attention
//! matrices from a final forward pass are exported; they are the raw
//! material for sub-table extraction.
//!
//! Backward passes are written out by hand and verified against central
//! finite differences in the test suite.

use serde::{Deserialize, Serialize};

use crate::dataset::{Label, RelationalDataset, TaskKind, Value};
use crate::encoders::{EncodedCell, EncoderParams};
use crate::error::{Error, Result};
use crate::linker::LabeledTuple;
use crate::nn::{
    cross_entropy, dot, elu, elu_prime, leaky_relu, leaky_relu_prime, matvec, outer_acc, softmax,
    vecmat, zero_grads, Adam, Param, ParamSet,
};
use crate::rng::{derive_seed, seeded_rng};

/// Complete graph over one labeled tuple's non-key attributes. Edges are
/// implicit: every ordered node pair participates in attention. Node
/// features are computed on demand so encoder training stays in sync.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TupleGraph {
    pub table: String,
    pub key: String,
    /// Node attribute ids, in table column order.
    pub columns: Vec<String>,
    /// Raw cell per node.
    pub cells: Vec<Value>,
    pub label: Label,
}

impl TupleGraph {
    pub fn node_count(&self) -> usize {
        self.columns.len()
    }

    /// Encode + project every node with the current encoder parameters.
    pub fn features(&self, enc: &EncoderParams) -> Result<(Vec<EncodedCell>, Vec<Vec<f64>>)> {
        let mut cells = Vec::with_capacity(self.cells.len());
        let mut x = Vec::with_capacity(self.cells.len());
        for (col, val) in self.columns.iter().zip(&self.cells) {
            let cell = enc.encode(&self.table, col, val)?;
            x.push(enc.project(cell.modality, &cell.e)?);
            cells.push(cell);
        }
        Ok((cells, x))
    }
}

/// Build the complete attribute graph for one labeled tuple.
pub fn build_tuple_graph(lt: &LabeledTuple, ds: &RelationalDataset) -> Result<TupleGraph> {
    let table = ds.table(&lt.table)?;
    let columns = ds.feature_columns(&lt.table)?;
    if columns.len() < 2 {
        return Err(Error::TooFewAttributes {
            table: lt.table.clone(),
            count: columns.len(),
        });
    }
    let row = table
        .row_by_pk(&lt.key)
        .ok_or_else(|| Error::Schema(format!("tuple {} missing from {}", lt.key, lt.table)))?;
    let cells = columns
        .iter()
        .map(|c| table.tuples[row].values[table.column_index(c).unwrap()].clone())
        .collect();
    Ok(TupleGraph {
        table: lt.table.clone(),
        key: lt.key.clone(),
        columns,
        cells,
        label: lt.label,
    })
}

/// Shared attention-layer parameters (one instance per trained table).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatParams {
    pub d_in: usize,
    pub d_h: usize,
    pub classes: usize,
    pub leaky_slope: f64,
    /// Attention input transform, d_in x d_h.
    pub w: Param,
    /// Attention vector over [h_u || h_v], length 2*d_h.
    pub a: Param,
    /// Update transform, d_h x d_h.
    pub w_prime: Param,
    /// Prediction head, classes x d_h (classes = 1 for regression).
    pub head: Param,
    /// Identifies the parameter set that produced an attention record.
    pub stamp: u64,
}

impl GatParams {
    pub fn init(d_in: usize, d_h: usize, classes: usize, leaky_slope: f64, seed: u64) -> Self {
        let mut rng = seeded_rng(seed, "gat");
        GatParams {
            d_in,
            d_h,
            classes,
            leaky_slope,
            w: Param::uniform(d_in * d_h, d_in, &mut rng),
            a: Param::uniform(2 * d_h, 2 * d_h, &mut rng),
            w_prime: Param::uniform(d_h * d_h, d_h, &mut rng),
            head: Param::uniform(classes * d_h, d_h, &mut rng),
            stamp: derive_seed(seed, "gat-stamp"),
        }
    }

    pub fn ensure_grads(&mut self) {
        self.visit_params(&mut Param::ensure_grad);
    }
}

impl ParamSet for GatParams {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.w);
        f(&mut self.a);
        f(&mut self.w_prime);
        f(&mut self.head);
    }
}

/// Encoders + attention layer trained jointly for one table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stage1Model {
    pub encoders: EncoderParams,
    pub gat: GatParams,
}

impl ParamSet for Stage1Model {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.encoders.visit_params(f);
        self.gat.visit_params(f);
    }
}

impl Stage1Model {
    pub fn ensure_grads(&mut self) {
        self.encoders.ensure_grads();
        self.gat.ensure_grads();
    }
}

/// Attention matrix of one tuple graph under one parameter set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttentionRecord {
    pub table: String,
    pub key: String,
    pub nodes: Vec<String>,
    /// Row u holds the attention u pays to each v; rows sum to 1.
    pub matrix: Vec<Vec<f64>>,
    pub params_stamp: u64,
}

/// Everything the backward pass needs from one forward evaluation.
struct CoreTrace {
    n: usize,
    h: Vec<Vec<f64>>,       // n x d_h, h_u = x_u W
    z: Vec<Vec<f64>>,       // n x n pre-activation logits
    alpha: Vec<Vec<f64>>,   // n x n attention, rows sum to 1
    m: Vec<Vec<f64>>,       // n x d_h, m_u = W' h_u
    s: Vec<Vec<f64>>,       // n x d_h, s_v = sum_u alpha_uv m_u
    h_prime: Vec<Vec<f64>>, // n x d_h, ELU(s)
}

/// One attention layer over an explicit feature matrix.
fn attention_core(x: &[Vec<f64>], p: &GatParams) -> CoreTrace {
    let n = x.len();
    let (a1, a2) = p.a.data.split_at(p.d_h);
    let h: Vec<Vec<f64>> = x
        .iter()
        .map(|xu| vecmat(xu, &p.w.data, p.d_in, p.d_h))
        .collect();
    let src_score: Vec<f64> = h.iter().map(|hu| dot(a1, hu)).collect();
    let dst_score: Vec<f64> = h.iter().map(|hv| dot(a2, hv)).collect();
    let mut z = vec![vec![0.0; n]; n];
    let mut alpha = vec![vec![0.0; n]; n];
    for u in 0..n {
        for v in 0..n {
            z[u][v] = leaky_relu(src_score[u] + dst_score[v], p.leaky_slope);
        }
        alpha[u] = softmax(&z[u]);
    }
    let m: Vec<Vec<f64>> = h
        .iter()
        .map(|hu| matvec(&p.w_prime.data, hu, p.d_h, p.d_h))
        .collect();
    let mut s = vec![vec![0.0; p.d_h]; n];
    for u in 0..n {
        for v in 0..n {
            crate::nn::axpy(&mut s[v], alpha[u][v], &m[u]);
        }
    }
    let h_prime = s
        .iter()
        .map(|sv| sv.iter().map(|&t| elu(t)).collect())
        .collect();
    CoreTrace {
        n,
        h,
        z,
        alpha,
        m,
        s,
        h_prime,
    }
}

/// Backward through the attention layer. `d_h_prime` is dL/dh'. Gradients
/// accumulate into `p`; the return value is dL/dx per node.
fn attention_core_backward(
    x: &[Vec<f64>],
    t: &CoreTrace,
    p: &mut GatParams,
    d_h_prime: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let n = t.n;
    let d_h = p.d_h;
    let (a1, a2) = p.a.data.split_at(d_h);

    // ELU
    let mut d_s = vec![vec![0.0; d_h]; n];
    for v in 0..n {
        for k in 0..d_h {
            d_s[v][k] = d_h_prime[v][k] * elu_prime(t.s[v][k]);
        }
    }

    // s_v = sum_u alpha_uv m_u
    let mut d_alpha = vec![vec![0.0; n]; n];
    let mut d_m = vec![vec![0.0; d_h]; n];
    for u in 0..n {
        for v in 0..n {
            d_alpha[u][v] = dot(&t.m[u], &d_s[v]);
            crate::nn::axpy(&mut d_m[u], t.alpha[u][v], &d_s[v]);
        }
    }

    // m_u = W' h_u
    let mut d_h_vec = vec![vec![0.0; d_h]; n];
    for u in 0..n {
        outer_acc(&mut p.w_prime.grad, &d_m[u], &t.h[u]);
        let back = vecmat(&d_m[u], &p.w_prime.data, d_h, d_h);
        crate::nn::axpy(&mut d_h_vec[u], 1.0, &back);
    }

    // softmax rows, then LeakyReLU
    let mut d_z = vec![vec![0.0; n]; n];
    for u in 0..n {
        let inner = dot(&t.alpha[u], &d_alpha[u]);
        for v in 0..n {
            let d_e = t.alpha[u][v] * (d_alpha[u][v] - inner);
            d_z[u][v] = d_e * leaky_relu_prime(t.z[u][v], p.leaky_slope);
        }
    }

    // z_uv = a1.h_u + a2.h_v (pre-activation)
    let mut d_a1 = vec![0.0; d_h];
    let mut d_a2 = vec![0.0; d_h];
    for u in 0..n {
        let row_sum: f64 = d_z[u].iter().sum();
        crate::nn::axpy(&mut d_a1, row_sum, &t.h[u]);
        crate::nn::axpy(&mut d_h_vec[u], row_sum, a1);
    }
    for v in 0..n {
        let col_sum: f64 = (0..n).map(|u| d_z[u][v]).sum();
        crate::nn::axpy(&mut d_a2, col_sum, &t.h[v]);
        crate::nn::axpy(&mut d_h_vec[v], col_sum, a2);
    }
    crate::nn::axpy(&mut p.a.grad[..d_h], 1.0, &d_a1);
    crate::nn::axpy(&mut p.a.grad[d_h..], 1.0, &d_a2);

    // h_u = x_u W
    let mut d_x = Vec::with_capacity(n);
    for u in 0..n {
        outer_acc(&mut p.w.grad, &x[u], &d_h_vec[u]);
        d_x.push(matvec(&p.w.data, &d_h_vec[u], p.d_in, d_h));
    }
    d_x
}

/// Model prediction for one tuple graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Prediction {
    /// Class probabilities (softmax over the head logits).
    Classification(Vec<f64>),
    Regression(f64),
}

/// Run the attention layer over one tuple graph with current parameters.
pub fn attention_forward(
    graph: &TupleGraph,
    model: &Stage1Model,
) -> Result<(Vec<Vec<f64>>, AttentionRecord)> {
    let (_, x) = graph.features(&model.encoders)?;
    let trace = attention_core(&x, &model.gat);
    let record = AttentionRecord {
        table: graph.table.clone(),
        key: graph.key.clone(),
        nodes: graph.columns.clone(),
        matrix: trace.alpha.clone(),
        params_stamp: model.gat.stamp,
    };
    Ok((trace.h_prime, record))
}

/// Mean-pool node embeddings and apply the prediction head.
pub fn pool_and_predict(h_prime: &[Vec<f64>], p: &GatParams, task: TaskKind) -> (Vec<f64>, Prediction) {
    let n = h_prime.len().max(1);
    let mut g = vec![0.0; p.d_h];
    for hv in h_prime {
        crate::nn::axpy(&mut g, 1.0 / n as f64, hv);
    }
    let logits = matvec(&p.head.data, &g, p.classes, p.d_h);
    let pred = match task {
        TaskKind::Classification => Prediction::Classification(softmax(&logits)),
        TaskKind::Regression => Prediction::Regression(logits[0]),
    };
    (g, pred)
}

/// Forward + loss + manual backward for one graph. Gradients accumulate
/// into the model. Returns the per-graph loss. Public so callers can
/// verify gradients or drive their own optimization loop.
pub fn graph_loss_backward(model: &mut Stage1Model, graph: &TupleGraph) -> Result<f64> {
    let (cells, x) = graph.features(&model.encoders)?;
    let trace = attention_core(&x, &model.gat);
    let n = trace.n;
    let d_h = model.gat.d_h;

    // pool + head
    let mut g = vec![0.0; d_h];
    for hv in &trace.h_prime {
        crate::nn::axpy(&mut g, 1.0 / n as f64, hv);
    }
    let logits = matvec(&model.gat.head.data, &g, model.gat.classes, d_h);

    let (loss, d_logits) = match graph.label {
        Label::Class(c) => {
            if c >= model.gat.classes {
                return Err(Error::Schema(format!(
                    "class index {c} out of range for {} classes",
                    model.gat.classes
                )));
            }
            cross_entropy(&logits, c)
        }
        Label::Value(y) => {
            let err = logits[0] - y;
            (err * err, vec![2.0 * err])
        }
    };

    outer_acc(&mut model.gat.head.grad, &d_logits, &g);
    let d_g = vecmat(&d_logits, &model.gat.head.data, model.gat.classes, d_h);
    let d_h_prime: Vec<Vec<f64>> = (0..n)
        .map(|_| d_g.iter().map(|&t| t / n as f64).collect())
        .collect();

    let d_x = attention_core_backward(&x, &trace, &mut model.gat, &d_h_prime);
    for (cell, dx) in cells.iter().zip(&d_x) {
        model.encoders.backward(cell, dx);
    }
    Ok(loss)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage1Config {
    #[serde(default = "default_d_h")]
    pub d_h: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_slope")]
    pub leaky_slope: f64,
    /// Independent training runs per table; the one with the lowest final
    /// training loss wins. Attention mining is init-sensitive — a run can
    /// settle on attribute combinations that fit the labels by accident —
    /// and extra restarts make the mined weights much more reliable at the
    /// cost of proportional training time.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
}

fn default_d_h() -> usize {
    32
}
fn default_epochs() -> usize {
    50
}
fn default_batch() -> usize {
    64
}
fn default_lr() -> f64 {
    1e-3
}
fn default_slope() -> f64 {
    0.2
}
fn default_restarts() -> usize {
    1
}

impl Default for Stage1Config {
    fn default() -> Self {
        Stage1Config {
            d_h: default_d_h(),
            epochs: default_epochs(),
            batch_size: default_batch(),
            lr: default_lr(),
            leaky_slope: default_slope(),
            restarts: default_restarts(),
        }
    }
}

impl Stage1Config {
    pub fn validate(&self) -> Result<()> {
        if self.d_h == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "stage-1 d_h, epochs, and batch_size must be positive".into(),
            ));
        }
        if self.restarts == 0 {
            return Err(Error::Config("stage-1 restarts must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("stage-1 lr must be positive, got {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stage1Output {
    /// One record per input graph, from a forward pass with final params.
    pub records: Vec<AttentionRecord>,
    /// (epoch, summed loss over all graphs).
    pub curve: Vec<(usize, f64)>,
}

/// Train encoders and attention layer jointly on the labeled tuple graphs.
///
/// Mini-batch Adam; the loss of a batch is the SUM of per-graph losses.
/// A non-finite loss aborts immediately. Attention records come from one
/// final full forward pass, not from averaging over training.
pub fn stage1_train(
    model: &mut Stage1Model,
    graphs: &[TupleGraph],
    config: &Stage1Config,
    seed: u64,
) -> Result<Stage1Output> {
    config.validate()?;
    if graphs.is_empty() {
        return Err(Error::Config("stage-1 training needs at least one graph".into()));
    }
    let mut rng = seeded_rng(seed, "stage1/shuffle");
    let mut order: Vec<usize> = (0..graphs.len()).collect();
    let mut opt = Adam::new(config.lr);
    let mut curve = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            zero_grads(model);
            let mut batch_loss = 0.0;
            for &gi in batch {
                batch_loss += graph_loss_backward(model, &graphs[gi])?;
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    stage: "stage1".into(),
                    epoch,
                    loss: batch_loss,
                });
            }
            opt.step(model);
            epoch_loss += batch_loss;
        }
        curve.push((epoch, epoch_loss));
        if epoch == 0 || (epoch + 1) % 10 == 0 {
            log::debug!("stage1 epoch {epoch}: loss {epoch_loss:.6}");
        }
    }

    let mut records = Vec::with_capacity(graphs.len());
    for g in graphs {
        let (_, record) = attention_forward(g, model)?;
        records.push(record);
    }
    Ok(Stage1Output { records, curve })
}
