//! Desk-scale language model: embedding, stacked (possibly hierarchically
//! grouped) recurrent layers, and a full softmax.
//!
//! The stack follows the usual two-block recipe: token ids are embedded into
//! p-wide dense inputs, each layer consumes the previous layer's projected
//! output, and the top h feeds an untied softmax. Loss is mean negative
//! log-likelihood over all positions, in natural-log units, so perplexity is
//! its plain `exp`.
//!
//! Backward is truncated BPTT: recurrent gradients are accumulated across
//! the unroll window and the boundary gradient into the carried-in state is
//! dropped.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cells::{
    cell_backward, cell_forward, CellConfig, CellParams, LstmState, StepCache, TensorView,
    TensorViewMut, INIT_WEIGHT_BOUND,
};
use crate::error::{CoreError, Result};
use crate::numerics::{affine, Matrix, Vector};

/// Dimensions of the full model. Every layer's `input_dim` must equal
/// `embed_dim`: a cell emits a projection of the same width it consumes, and
/// that width also feeds the softmax.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub layers: Vec<CellConfig>,
    pub unroll: usize,
    pub batch: usize,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 {
            return Err(CoreError::InvalidConfig(format!(
                "vocab_size must be at least 2, got {}",
                self.vocab_size
            )));
        }
        if self.unroll == 0 || self.batch == 0 {
            return Err(CoreError::InvalidConfig(
                "unroll and batch must be positive".into(),
            ));
        }
        if self.layers.is_empty() {
            return Err(CoreError::InvalidConfig(
                "at least one layer required".into(),
            ));
        }
        for (idx, layer) in self.layers.iter().enumerate() {
            layer.validate()?;
            if layer.input_dim != self.embed_dim {
                return Err(CoreError::InvalidConfig(format!(
                    "layer {idx} input_dim {} must equal embed_dim {} (each layer's input \
                     is the previous projection)",
                    layer.input_dim, self.embed_dim
                )));
            }
        }
        Ok(())
    }
}

/// Ids for one training window: `batch` rows of `unroll + 1` tokens; columns
/// `0..unroll` are inputs, columns `1..=unroll` are the shifted targets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchSequence {
    batch: usize,
    width: usize,
    ids: Vec<usize>,
}

impl BatchSequence {
    pub fn new(batch: usize, width: usize, ids: Vec<usize>, vocab_size: usize) -> Result<Self> {
        if batch == 0 || width < 2 {
            return Err(CoreError::InvalidConfig(
                "batch must be positive and width at least 2".into(),
            ));
        }
        if ids.len() != batch * width {
            return Err(CoreError::DimMismatch {
                op: "BatchSequence::new",
                expected: batch * width,
                got: ids.len(),
            });
        }
        for &id in &ids {
            if id >= vocab_size {
                return Err(CoreError::IndexOutOfRange {
                    what: "token id",
                    index: id,
                    bound: vocab_size,
                });
            }
        }
        Ok(BatchSequence { batch, width, ids })
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn unroll(&self) -> usize {
        self.width - 1
    }

    pub fn input(&self, b: usize, t: usize) -> usize {
        self.ids[b * self.width + t]
    }

    pub fn target(&self, b: usize, t: usize) -> usize {
        self.ids[b * self.width + t + 1]
    }

    /// Targets as a `batch x unroll` grid, for the loss.
    pub fn target_grid(&self) -> Vec<Vec<usize>> {
        (0..self.batch)
            .map(|b| (0..self.unroll()).map(|t| self.target(b, t)).collect())
            .collect()
    }
}

/// All trainable tensors. The same struct doubles as the gradient bundle
/// (via [`LanguageModel::zeros_like`]) so optimizer and checkpoint code can
/// walk params, grads and accumulators in one fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageModel {
    pub config: ModelConfig,
    pub embedding: Matrix,
    pub layers: Vec<CellParams>,
    pub softmax_w: Matrix,
    pub softmax_b: Vector,
}

impl LanguageModel {
    /// Seeded init: one ChaCha stream drawn in fixed order (embedding, each
    /// layer, softmax weights), all uniform on `[-0.05, 0.05]`; biases zero.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new_inclusive(-INIT_WEIGHT_BOUND, INIT_WEIGHT_BOUND);
        let embedding = Matrix::from_fn(config.vocab_size, config.embed_dim, |_, _| {
            dist.sample(&mut rng)
        });
        let layers = config
            .layers
            .iter()
            .map(|layer| CellParams::init_from_rng(layer, &mut rng))
            .collect();
        let softmax_w = Matrix::from_fn(config.vocab_size, config.embed_dim, |_, _| {
            dist.sample(&mut rng)
        });
        Ok(LanguageModel {
            config: config.clone(),
            embedding,
            layers,
            softmax_w,
            softmax_b: Vector::zeros(config.vocab_size),
        })
    }

    pub fn zeros_like(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(LanguageModel {
            config: config.clone(),
            embedding: Matrix::zeros(config.vocab_size, config.embed_dim),
            layers: config.layers.iter().map(CellParams::zeros_like).collect(),
            softmax_w: Matrix::zeros(config.vocab_size, config.embed_dim),
            softmax_b: Vector::zeros(config.vocab_size),
        })
    }

    pub fn tensor_views(&self) -> Vec<TensorView<'_>> {
        let mut out = Vec::new();
        out.push(TensorView {
            name: "embedding".into(),
            shape: vec![self.embedding.rows(), self.embedding.cols()],
            data: self.embedding.as_slice(),
        });
        for (idx, layer) in self.layers.iter().enumerate() {
            for view in layer.tensor_views() {
                out.push(TensorView {
                    name: format!("layers.{idx}.{}", view.name),
                    shape: view.shape,
                    data: view.data,
                });
            }
        }
        out.push(TensorView {
            name: "softmax_w".into(),
            shape: vec![self.softmax_w.rows(), self.softmax_w.cols()],
            data: self.softmax_w.as_slice(),
        });
        out.push(TensorView {
            name: "softmax_b".into(),
            shape: vec![self.softmax_b.dim()],
            data: self.softmax_b.as_slice(),
        });
        out
    }

    pub fn tensor_views_mut(&mut self) -> Vec<TensorViewMut<'_>> {
        let mut out = Vec::new();
        let eshape = vec![self.embedding.rows(), self.embedding.cols()];
        out.push(TensorViewMut {
            name: "embedding".into(),
            shape: eshape,
            data: self.embedding.as_mut_slice(),
        });
        for (idx, layer) in self.layers.iter_mut().enumerate() {
            for view in layer.tensor_views_mut() {
                out.push(TensorViewMut {
                    name: format!("layers.{idx}.{}", view.name),
                    shape: view.shape,
                    data: view.data,
                });
            }
        }
        let wshape = vec![self.softmax_w.rows(), self.softmax_w.cols()];
        out.push(TensorViewMut {
            name: "softmax_w".into(),
            shape: wshape,
            data: self.softmax_w.as_mut_slice(),
        });
        let bshape = vec![self.softmax_b.dim()];
        out.push(TensorViewMut {
            name: "softmax_b".into(),
            shape: bshape,
            data: self.softmax_b.as_mut_slice(),
        });
        out
    }

    pub fn tensor_lens(&self) -> Vec<usize> {
        self.tensor_views().iter().map(|v| v.data.len()).collect()
    }

    /// Row-gather from the embedding matrix for an arbitrary id grid.
    pub fn embed_lookup(&self, ids: &[Vec<usize>]) -> Result<Vec<Vec<Vector>>> {
        ids.iter()
            .map(|row| row.iter().map(|&id| self.embed_row(id)).collect())
            .collect()
    }

    fn embed_row(&self, id: usize) -> Result<Vector> {
        if id >= self.config.vocab_size {
            return Err(CoreError::IndexOutOfRange {
                what: "token id",
                index: id,
                bound: self.config.vocab_size,
            });
        }
        Ok(Vector::from_vec(self.embedding.row(id).to_vec()))
    }
}

/// Carried recurrent state: one [`LstmState`] per (layer, batch row).
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceStates {
    pub layers: Vec<Vec<LstmState>>,
}

impl SequenceStates {
    pub fn zeros(config: &ModelConfig, batch: usize) -> Self {
        SequenceStates {
            layers: config
                .layers
                .iter()
                .map(|layer| (0..batch).map(|_| LstmState::zeros(layer)).collect())
                .collect(),
        }
    }
}

/// Forward bookkeeping for one window, enough to run [`bptt_backward`].
pub struct SequenceCaches {
    batch: usize,
    unroll: usize,
    /// `steps[layer][b][t]`
    steps: Vec<Vec<Vec<StepCache>>>,
    /// Top-layer projected output per `[b][t]`, consumed by the softmax.
    top_h: Vec<Vec<Vector>>,
    /// Input token per `[b][t]`, for the embedding scatter.
    input_ids: Vec<Vec<usize>>,
}

/// Runs the stack over one window. `states` carries h/c in and out, so
/// consecutive windows continue exactly where the previous one stopped
/// (truncated-BPTT state carry). Logits come back per `[b][t]`, each V wide.
pub fn forward_sequence(
    model: &LanguageModel,
    batch: &BatchSequence,
    states: &mut SequenceStates,
) -> Result<(Vec<Vec<Vector>>, SequenceCaches)> {
    let n_layers = model.layers.len();
    let b_count = batch.batch();
    let t_count = batch.unroll();
    if states.layers.len() != n_layers || states.layers.iter().any(|s| s.len() != b_count) {
        return Err(CoreError::InvalidConfig(
            "state bundle does not match model layers / batch size".into(),
        ));
    }
    let mut steps: Vec<Vec<Vec<StepCache>>> =
        vec![(0..b_count).map(|_| Vec::with_capacity(t_count)).collect(); n_layers];
    let mut top_h: Vec<Vec<Vector>> = (0..b_count).map(|_| Vec::with_capacity(t_count)).collect();
    let mut input_ids: Vec<Vec<usize>> =
        (0..b_count).map(|_| Vec::with_capacity(t_count)).collect();
    let mut logits: Vec<Vec<Vector>> = (0..b_count).map(|_| Vec::with_capacity(t_count)).collect();

    for b in 0..b_count {
        for t in 0..t_count {
            let id = batch.input(b, t);
            let mut x = model.embed_row(id)?;
            input_ids[b].push(id);
            for (l, layer) in model.layers.iter().enumerate() {
                let (next, cache) = cell_forward(layer, &x, &states.layers[l][b])?;
                x = next.h.clone();
                states.layers[l][b] = next;
                steps[l][b].push(cache);
            }
            logits[b].push(affine(&model.softmax_w, &x, &model.softmax_b)?);
            top_h[b].push(x);
        }
    }
    Ok((
        logits,
        SequenceCaches {
            batch: b_count,
            unroll: t_count,
            steps,
            top_h,
            input_ids,
        },
    ))
}

/// Numerically stable softmax cross-entropy over every position.
///
/// Returns the mean negative log-likelihood (natural log) and
/// `(softmax - one_hot) / (B * T)` as the logit gradient.
pub fn softmax_cross_entropy(
    logits: &[Vec<Vector>],
    targets: &[Vec<usize>],
) -> Result<(f64, Vec<Vec<Vector>>)> {
    if logits.len() != targets.len() {
        return Err(CoreError::DimMismatch {
            op: "softmax_cross_entropy: batch",
            expected: logits.len(),
            got: targets.len(),
        });
    }
    let positions: usize = logits.iter().map(|row| row.len()).sum();
    if positions == 0 {
        return Err(CoreError::InvalidConfig("no positions to score".into()));
    }
    let scale = 1.0 / positions as f64;
    let mut nll_sum = 0.0;
    let mut grads: Vec<Vec<Vector>> = Vec::with_capacity(logits.len());
    for (row, target_row) in logits.iter().zip(targets) {
        if row.len() != target_row.len() {
            return Err(CoreError::DimMismatch {
                op: "softmax_cross_entropy: unroll",
                expected: row.len(),
                got: target_row.len(),
            });
        }
        let mut grad_row = Vec::with_capacity(row.len());
        for (l, &target) in row.iter().zip(target_row) {
            if !l.is_finite() {
                return Err(CoreError::NonFinite { what: "logits" });
            }
            if target >= l.dim() {
                return Err(CoreError::IndexOutOfRange {
                    what: "target id",
                    index: target,
                    bound: l.dim(),
                });
            }
            let ls = l.as_slice();
            let mut max = ls[0];
            for &v in &ls[1..] {
                if v > max {
                    max = v;
                }
            }
            let mut sum_exp = 0.0;
            for &v in ls {
                sum_exp += libm::exp(v - max);
            }
            let lse = max + libm::log(sum_exp);
            nll_sum += lse - ls[target];
            let mut g = Vector::zeros(l.dim());
            for (gv, &v) in g.as_mut_slice().iter_mut().zip(ls) {
                *gv = libm::exp(v - lse) * scale;
            }
            g.as_mut_slice()[target] -= scale;
            grad_row.push(g);
        }
        grads.push(grad_row);
    }
    Ok((nll_sum * scale, grads))
}

/// `exp` of the mean negative log-likelihood.
pub fn perplexity(mean_nll: f64) -> f64 {
    libm::exp(mean_nll)
}

/// Reverse-mode pass over one forward window. Recurrent gradients are
/// accumulated backward across all unroll steps; the gradient into the
/// window's carried-in state is truncated to zero. Embedding rows only
/// receive gradient for tokens that actually occurred.
pub fn bptt_backward(
    model: &LanguageModel,
    caches: &SequenceCaches,
    grad_logits: &[Vec<Vector>],
) -> Result<LanguageModel> {
    if grad_logits.len() != caches.batch || grad_logits.iter().any(|row| row.len() != caches.unroll)
    {
        return Err(CoreError::DimMismatch {
            op: "bptt_backward: grad_logits",
            expected: caches.batch,
            got: grad_logits.len(),
        });
    }
    let n_layers = model.layers.len();
    if caches.steps.len() != n_layers {
        return Err(CoreError::InvalidConfig(
            "cache layer count does not match model".into(),
        ));
    }
    let p = model.config.embed_dim;
    let v = model.config.vocab_size;
    let mut grads = LanguageModel::zeros_like(&model.config)?;

    for b in 0..caches.batch {
        // Recurrent gradients flowing from step t+1 into step t, per layer.
        let mut rec: Vec<LstmState> = model.config.layers.iter().map(LstmState::zeros).collect();
        for t in (0..caches.unroll).rev() {
            let gl = &grad_logits[b][t];
            if gl.dim() != v {
                return Err(CoreError::DimMismatch {
                    op: "bptt_backward: logit dim",
                    expected: v,
                    got: gl.dim(),
                });
            }
            // logits = softmax_w * h_top + softmax_b
            let h_top = &caches.top_h[b][t];
            let mut grad_h = Vector::zeros(p);
            {
                let gw = grads.softmax_w.as_mut_slice();
                let gb = grads.softmax_b.as_mut_slice();
                for r in 0..v {
                    let u = gl.at(r);
                    gb[r] += u;
                    let w_row = model.softmax_w.row(r);
                    let gw_row = &mut gw[r * p..(r + 1) * p];
                    for j in 0..p {
                        gw_row[j] += u * h_top.at(j);
                        grad_h.as_mut_slice()[j] += u * w_row[j];
                    }
                }
            }
            // Walk the stack top-down; grad_x of layer l is part of the h
            // gradient of layer l-1 at the same step.
            let mut upstream_h = grad_h;
            for l in (0..n_layers).rev() {
                let total_h = crate::numerics::add(&upstream_h, &rec[l].h)?;
                let input_grads = cell_backward(
                    &model.layers[l],
                    &caches.steps[l][b][t],
                    &total_h,
                    &rec[l].c,
                    &mut grads.layers[l],
                )?;
                rec[l] = input_grads.prev;
                upstream_h = input_grads.x;
            }
            let id = caches.input_ids[b][t];
            let erow = &mut grads.embedding.as_mut_slice()[id * p..(id + 1) * p];
            for (e, g) in erow.iter_mut().zip(upstream_h.as_slice()) {
                *e += g;
            }
        }
    }
    Ok(grads)
}

/// Result of a full-model finite-difference sweep.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_tensor: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub params_checked: usize,
}

/// Denominator floor for gradient-check relative errors: differences on
/// coordinates whose gradients are this small are dominated by the 1e-9-ish
/// roundoff of the central difference itself, so they are compared on an
/// absolute scale instead.
const GRADCHECK_DENOM_FLOOR: f64 = 1e-3;

pub fn gradcheck_rel_error(analytic: f64, numeric: f64) -> f64 {
    let denom = (analytic.abs() + numeric.abs()).max(GRADCHECK_DENOM_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Compares every analytic partial of the window loss against central finite
/// differences on a seeded tiny model and batch. Reports, never asserts.
pub fn gradient_check(config: &ModelConfig, seed: u64, eps: f64) -> Result<GradCheckReport> {
    config.validate()?;
    let mut model = LanguageModel::init(config, seed)?;
    let mut data_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e3779b97f4a7c15));
    let id_dist = Uniform::new(0, config.vocab_size);
    let width = config.unroll + 1;
    let ids: Vec<usize> = (0..config.batch * width)
        .map(|_| id_dist.sample(&mut data_rng))
        .collect();
    let batch = BatchSequence::new(config.batch, width, ids, config.vocab_size)?;

    let loss_of = |m: &LanguageModel| -> Result<f64> {
        let mut states = SequenceStates::zeros(&m.config, m.config.batch);
        let (logits, _) = forward_sequence(m, &batch, &mut states)?;
        let (loss, _) = softmax_cross_entropy(&logits, &batch.target_grid())?;
        Ok(loss)
    };

    let analytic_grads = {
        let mut states = SequenceStates::zeros(&model.config, model.config.batch);
        let (logits, caches) = forward_sequence(&model, &batch, &mut states)?;
        let (_, grad_logits) = softmax_cross_entropy(&logits, &batch.target_grid())?;
        bptt_backward(&model, &caches, &grad_logits)?
    };
    let analytic: Vec<(String, Vec<f64>)> = analytic_grads
        .tensor_views()
        .into_iter()
        .map(|view| (view.name, view.data.to_vec()))
        .collect();

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_tensor: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        params_checked: 0,
    };
    let n_tensors = analytic.len();
    for tensor_idx in 0..n_tensors {
        let len = analytic[tensor_idx].1.len();
        for i in 0..len {
            let original = {
                let mut views = model.tensor_views_mut();
                let val = views[tensor_idx].data[i];
                views[tensor_idx].data[i] = val + eps;
                val
            };
            let loss_plus = loss_of(&model)?;
            {
                let mut views = model.tensor_views_mut();
                views[tensor_idx].data[i] = original - eps;
            }
            let loss_minus = loss_of(&model)?;
            {
                let mut views = model.tensor_views_mut();
                views[tensor_idx].data[i] = original;
            }
            let numeric = (loss_plus - loss_minus) / (2.0 * eps);
            let a = analytic[tensor_idx].1[i];
            let rel = gradcheck_rel_error(a, numeric);
            report.params_checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_tensor = analytic[tensor_idx].0.clone();
                report.worst_index = i;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
