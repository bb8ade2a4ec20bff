//! Hand-rolled neural-net plumbing: flat parameter tensors with explicit
//! gradients, an Adam optimizer driven by a deterministic parameter visitor,
//! activations, and the finite-difference gradient checker used by tests.
//!
//! All math is f64. Backward passes are written out manually per model; this
//! module only supplies the shared pieces.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One flat tensor with its gradient accumulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub data: Vec<f64>,
    #[serde(skip, default)]
    pub grad: Vec<f64>,
}

impl Param {
    pub fn zeros(len: usize) -> Self {
        Param {
            data: vec![0.0; len],
            grad: vec![0.0; len],
        }
    }

    /// Symmetric uniform init, bound 1/sqrt(fan_in).
    pub fn uniform(len: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        Param {
            data: (0..len).map(|_| rng.random_range(-bound..bound)).collect(),
            grad: vec![0.0; len],
        }
    }

    /// Restore the gradient buffer after deserialization.
    pub fn ensure_grad(&mut self) {
        if self.grad.len() != self.data.len() {
            self.grad = vec![0.0; self.data.len()];
        }
    }

    pub fn zero_grad(&mut self) {
        for g in &mut self.grad {
            *g = 0.0;
        }
    }
}

/// Anything holding trainable parameters. Visit order must be deterministic
/// and stable across calls; the optimizer keys its state by that order.
pub trait ParamSet {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param));
}

pub fn zero_grads<M: ParamSet + ?Sized>(model: &mut M) {
    model.visit_params(&mut |p| p.zero_grad());
}

pub fn param_entry_count<M: ParamSet + ?Sized>(model: &mut M) -> usize {
    let mut n = 0;
    model.visit_params(&mut |p| n += p.data.len());
    n
}

/// Adam with bias correction; state allocated lazily per visited parameter.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step<M: ParamSet + ?Sized>(&mut self, model: &mut M) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let mut i = 0;
        let (m, v) = (&mut self.m, &mut self.v);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        model.visit_params(&mut |p| {
            if m.len() <= i {
                m.push(vec![0.0; p.data.len()]);
                v.push(vec![0.0; p.data.len()]);
            }
            debug_assert_eq!(m[i].len(), p.data.len(), "parameter shape changed mid-run");
            for k in 0..p.data.len() {
                let g = p.grad[k];
                m[i][k] = b1 * m[i][k] + (1.0 - b1) * g;
                v[i][k] = b2 * v[i][k] + (1.0 - b2) * g * g;
                let m_hat = m[i][k] / bc1;
                let v_hat = v[i][k] / bc2;
                p.data[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            i += 1;
        });
    }
}

// ---- activations ----

pub fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp() - 1.0
    }
}

pub fn elu_prime(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

pub fn leaky_relu_prime(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        slope
    }
}

/// Numerically stable softmax (max subtraction).
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Cross entropy from logits. Returns (loss, dloss/dlogits).
pub fn cross_entropy(logits: &[f64], class: usize) -> (f64, Vec<f64>) {
    let probs = softmax(logits);
    // Rescue exact underflow (saturated softmax) but let NaN through so
    // divergence guards can trip; f64::clamp propagates NaN.
    let loss = -probs[class].clamp(1e-300, 1.0).ln();
    let mut grad = probs;
    grad[class] -= 1.0;
    (loss, grad)
}

// ---- small dense helpers (row-major matrices) ----

/// y = xᵀ·W with W stored row-major (rows = len(x), cols = out dim).
pub fn vecmat(x: &[f64], w: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    debug_assert_eq!(x.len(), rows);
    debug_assert_eq!(w.len(), rows * cols);
    let mut y = vec![0.0; cols];
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &w[i * cols..(i + 1) * cols];
        for (yj, &wij) in y.iter_mut().zip(row) {
            *yj += xi * wij;
        }
    }
    y
}

/// y = W·x with W stored row-major (rows = out dim, cols = len(x)).
pub fn matvec(w: &[f64], x: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(w.len(), rows * cols);
    (0..rows)
        .map(|i| dot(&w[i * cols..(i + 1) * cols], x))
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// grad += a ⊗ b, row-major (rows = len(a), cols = len(b)).
pub fn outer_acc(grad: &mut [f64], a: &[f64], b: &[f64]) {
    debug_assert_eq!(grad.len(), a.len() * b.len());
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        let row = &mut grad[i * b.len()..(i + 1) * b.len()];
        for (g, &bj) in row.iter_mut().zip(b) {
            *g += ai * bj;
        }
    }
}

/// y += alpha * x
pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn l2_norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

// ---- finite-difference gradient checking ----

/// Worst relative error between analytic gradients (already accumulated in
/// each Param's grad buffer) and central finite differences of `loss`.
///
/// The relative error uses max(|fd|, |g|, floor) as denominator so that
/// near-zero gradients compare by absolute error.
pub fn max_fd_rel_error<M: ParamSet>(
    model: &mut M,
    mut loss: impl FnMut(&mut M) -> f64,
    step: f64,
) -> f64 {
    let mut analytic: Vec<Vec<f64>> = Vec::new();
    model.visit_params(&mut |p| analytic.push(p.grad.clone()));

    let mut worst = 0.0f64;
    for (pi, grads) in analytic.iter().enumerate() {
        for (ei, &g) in grads.iter().enumerate() {
            adjust_entry(model, pi, ei, step);
            let plus = loss(model);
            adjust_entry(model, pi, ei, -2.0 * step);
            let minus = loss(model);
            adjust_entry(model, pi, ei, step);
            let fd = (plus - minus) / (2.0 * step);
            let rel = (fd - g).abs() / fd.abs().max(g.abs()).max(1e-4);
            worst = worst.max(rel);
        }
    }
    worst
}

fn adjust_entry<M: ParamSet>(model: &mut M, pi: usize, ei: usize, delta: f64) {
    let mut idx = 0;
    model.visit_params(&mut |p| {
        if idx == pi {
            p.data[ei] += delta;
        }
        idx += 1;
    });
}
