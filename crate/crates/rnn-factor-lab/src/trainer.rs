//! The training loop: deterministic batch windows over a token stream,
//! forward/backward/Adagrad steps, metrics CSV emission and checkpointing.
//!
//! Reproducibility contract: the loop is single-threaded and every batch
//! window is a pure function of the step index, so a fixed seed yields
//! bit-identical parameters across runs and across a checkpoint
//! save/load/resume split at any step boundary. Wall-time derived metrics
//! (`wall_time_s`, `words_per_sec`) are the only columns allowed to differ.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rnn_factor_core::model::{
    bptt_backward, forward_sequence, perplexity, softmax_cross_entropy, BatchSequence,
    LanguageModel, SequenceStates,
};
use rnn_factor_core::optim::{adagrad_step, clip_global_norm, AdagradState};

use crate::checkpoint;
use crate::config::RunConfig;
use crate::vocab::Vocabulary;
use crate::{LabError, Result};

pub const METRICS_HEADER: &str = "step,wall_time_s,train_loss,train_ppl,words_per_sec";

/// One full optimization step: forward, loss, backward, clip, Adagrad.
/// Returns the batch mean loss (natural-log units).
pub fn training_step(
    model: &mut LanguageModel,
    opt: &mut AdagradState,
    states: &mut SequenceStates,
    batch: &BatchSequence,
) -> Result<f64> {
    let (logits, caches) = forward_sequence(model, batch, states)?;
    let (loss, grad_logits) = softmax_cross_entropy(&logits, &batch.target_grid())?;
    if !loss.is_finite() {
        return Err(LabError::numeric("training loss is not finite"));
    }
    let mut grads = bptt_backward(model, &caches, &grad_logits)?;
    if let Some(max_norm) = opt.config.clip_norm {
        let mut views: Vec<&mut [f64]> = grads
            .tensor_views_mut()
            .into_iter()
            .map(|v| v.data)
            .collect();
        clip_global_norm(&mut views, max_norm);
    }
    let grad_views = grads.tensor_views();
    let grad_slices: Vec<&[f64]> = grad_views.iter().map(|v| v.data).collect();
    let mut param_views: Vec<&mut [f64]> = model
        .tensor_views_mut()
        .into_iter()
        .map(|v| v.data)
        .collect();
    adagrad_step(&mut param_views, &grad_slices, opt)?;
    Ok(loss)
}

struct MetricsSink {
    writer: Option<BufWriter<File>>,
}

impl MetricsSink {
    fn create(path: Option<&Path>) -> Result<Self> {
        let writer = match path {
            None => None,
            Some(p) => {
                let file = File::create(p).map_err(|e| {
                    LabError::config(format!("cannot create metrics file {}: {e}", p.display()))
                })?;
                let mut w = BufWriter::new(file);
                writeln!(w, "{METRICS_HEADER}")
                    .map_err(|e| LabError::data(format!("metrics write failed: {e}")))?;
                w.flush().ok();
                Some(w)
            }
        };
        Ok(MetricsSink { writer })
    }

    fn row(
        &mut self,
        step: u64,
        wall_s: f64,
        loss: f64,
        ppl: f64,
        words_per_sec: f64,
    ) -> Result<()> {
        if let Some(w) = &mut self.writer {
            writeln!(w, "{step},{wall_s:.6},{loss},{ppl},{words_per_sec:.3}")
                .map_err(|e| LabError::data(format!("metrics write failed: {e}")))?;
            w.flush().ok();
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub steps_completed: u64,
    pub best_ppl: Option<f64>,
    /// Perplexity over the held-out corpus tail, when one is configured.
    pub held_out_ppl: Option<f64>,
    pub vocab_size: usize,
}

/// A fully initialized run: tokenized stream, model, optimizer and carried
/// states, positioned at some step.
pub struct TrainSession {
    pub config: RunConfig,
    pub vocab: Vocabulary,
    pub model: LanguageModel,
    pub opt: AdagradState,
    pub states: SequenceStates,
    pub step: u64,
    stream: Vec<usize>,
    eval_stream: Vec<usize>,
}

impl TrainSession {
    pub fn new(config: RunConfig) -> Result<Self> {
        let text = fs::read_to_string(&config.data.corpus).map_err(|e| {
            LabError::data(format!(
                "cannot read corpus {}: {e}",
                config.data.corpus.display()
            ))
        })?;
        let vocab = Vocabulary::build(&text, config.data.mode, config.data.max_vocab)?;
        let full_stream = vocab.encode(&text, config.data.mode);
        // The tail fraction is reserved for held-out evaluation.
        let eval_len = (full_stream.len() as f64 * config.data.holdout_fraction).floor() as usize;
        let split = full_stream.len() - eval_len;
        let (stream, eval_stream) = {
            let mut stream = full_stream;
            let eval_stream = stream.split_off(split);
            (stream, eval_stream)
        };
        let width = config.model.unroll_length + 1;
        if stream.len() < width {
            return Err(LabError::data(format!(
                "corpus too short: {} training tokens after holdout, need at least {width} \
                 for one window",
                stream.len()
            )));
        }
        let model_config = config.to_model_config(vocab.size())?;
        let model = LanguageModel::init(&model_config, config.run.seed)?;
        let opt = AdagradState::new(config.optimizer.to_adagrad_config()?, &model.tensor_lens());
        let states = SequenceStates::zeros(&model_config, model_config.batch);
        let mut session = TrainSession {
            config,
            vocab,
            model,
            opt,
            states,
            step: 0,
            stream,
            eval_stream,
        };
        if let Some(path) = session.config.run.resume_from.clone() {
            let ckpt = checkpoint::load(&path)?;
            session.restore(&ckpt)?;
        }
        Ok(session)
    }

    /// The window for `step`: row r starts at `r * len / B` and advances
    /// `unroll` tokens per step, wrapping over the valid window starts.
    pub fn batch_at(&self, step: u64) -> Result<BatchSequence> {
        let unroll = self.config.model.unroll_length;
        let batch = self.config.model.batch_size;
        let width = unroll + 1;
        let span = (self.stream.len() - unroll) as u64;
        let mut ids = Vec::with_capacity(batch * width);
        for r in 0..batch {
            let start = (r * self.stream.len() / batch) as u64;
            let pos = ((start + step * unroll as u64) % span) as usize;
            ids.extend_from_slice(&self.stream[pos..pos + width]);
        }
        Ok(BatchSequence::new(batch, width, ids, self.vocab.size())?)
    }

    /// Perplexity over the held-out tail of the corpus, scored one sentence
    /// at a time from zero states: each window is `[EOS] sentence [EOS]` so
    /// every token (and the sentence end) is predicted. A trailing chunk not
    /// terminated inside the slice is skipped. `None` when no held-out data
    /// is configured.
    pub fn held_out_perplexity(&self) -> Result<Option<f64>> {
        if self.eval_stream.is_empty() {
            return Ok(None);
        }
        let eos = crate::vocab::EOS_ID;
        let mut nll_sum = 0.0;
        let mut positions = 0usize;
        let mut sentence_start = 0usize;
        for (idx, &id) in self.eval_stream.iter().enumerate() {
            if id != eos {
                continue;
            }
            let sentence = &self.eval_stream[sentence_start..idx];
            sentence_start = idx + 1;
            let mut window = Vec::with_capacity(sentence.len() + 2);
            window.push(eos);
            window.extend_from_slice(sentence);
            window.push(eos);
            let width = window.len();
            let batch = BatchSequence::new(1, width, window, self.vocab.size())?;
            let mut states = SequenceStates::zeros(&self.model.config, 1);
            let (logits, _) = forward_sequence(&self.model, &batch, &mut states)?;
            let (mean_nll, _) = softmax_cross_entropy(&logits, &batch.target_grid())?;
            nll_sum += mean_nll * (width - 1) as f64;
            positions += width - 1;
        }
        if positions == 0 {
            return Ok(None);
        }
        Ok(Some(perplexity(nll_sum / positions as f64)))
    }

    /// Forward-only loss of the window at `step`, leaving carried states
    /// untouched.
    pub fn eval_loss(&self, step: u64) -> Result<f64> {
        let batch = self.batch_at(step)?;
        let mut states = self.states.clone();
        let (logits, _) = forward_sequence(&self.model, &batch, &mut states)?;
        let (loss, _) = softmax_cross_entropy(&logits, &batch.target_grid())?;
        Ok(loss)
    }

    /// One training step at the current position.
    pub fn train_step(&mut self) -> Result<f64> {
        let batch = self.batch_at(self.step)?;
        let loss = training_step(&mut self.model, &mut self.opt, &mut self.states, &batch)
            .map_err(|e| LabError {
                kind: e.kind,
                message: format!("step {}: {}", self.step, e.message),
            })?;
        self.step += 1;
        Ok(loss)
    }

    /// Runs to the configured step count, emitting metrics rows every
    /// `eval_interval` updates (plus one row for the starting state) and
    /// checkpoints at the configured cadence and at the end.
    pub fn run(&mut self) -> Result<TrainOutcome> {
        let steps = self.config.run.steps;
        let eval_interval = self.config.run.eval_interval;
        let words_per_step =
            (self.config.model.batch_size * self.config.model.unroll_length) as f64;
        let mut metrics = MetricsSink::create(self.config.run.metrics_path.as_deref())?;
        let run_start = Instant::now();
        let mut best_ppl: Option<f64> = None;
        let update_best = |candidate: f64, best: &mut Option<f64>| {
            if best.map_or(true, |b| candidate < b) {
                *best = Some(candidate);
            }
        };

        if self.step < steps {
            let loss0 = self.eval_loss(self.step)?;
            let ppl0 = perplexity(loss0);
            metrics.row(self.step, 0.0, loss0, ppl0, 0.0)?;
            update_best(ppl0, &mut best_ppl);
        }

        let checkpoint_path = self.config.run.checkpoint_path.clone();
        let checkpoint_interval = self.config.run.checkpoint_interval;
        let mut interval_loss_sum = 0.0;
        let mut interval_steps = 0u64;
        let mut interval_start = Instant::now();
        while self.step < steps {
            let loss = self.train_step()?;
            interval_loss_sum += loss;
            interval_steps += 1;
            if self.step % eval_interval == 0 {
                let mean_loss = interval_loss_sum / interval_steps as f64;
                let ppl = perplexity(mean_loss);
                let elapsed = interval_start.elapsed().as_secs_f64();
                let wps = if elapsed > 0.0 {
                    words_per_step * interval_steps as f64 / elapsed
                } else {
                    0.0
                };
                metrics.row(
                    self.step,
                    run_start.elapsed().as_secs_f64(),
                    mean_loss,
                    ppl,
                    wps,
                )?;
                update_best(ppl, &mut best_ppl);
                interval_loss_sum = 0.0;
                interval_steps = 0;
                interval_start = Instant::now();
            }
            if let (Some(path), Some(every)) = (&checkpoint_path, checkpoint_interval) {
                if self.step % every == 0 {
                    self.save_checkpoint(path)?;
                }
            }
        }
        if let Some(path) = &checkpoint_path {
            self.save_checkpoint(path)?;
        }
        Ok(TrainOutcome {
            steps_completed: self.step,
            best_ppl,
            held_out_ppl: self.held_out_perplexity()?,
            vocab_size: self.vocab.size(),
        })
    }

    /// Everything a resume needs: model tensors, Adagrad accumulators and
    /// the carried per-layer states, all under stable names.
    fn checkpoint_tensors(&self) -> Vec<(String, Vec<usize>, Vec<f64>)> {
        let mut out = Vec::new();
        for view in self.model.tensor_views() {
            out.push((view.name, view.shape, view.data.to_vec()));
        }
        for (view, acc) in self
            .model
            .tensor_views()
            .into_iter()
            .zip(self.opt.accumulators())
        {
            out.push((format!("adagrad.{}", view.name), view.shape, acc.clone()));
        }
        for (l, layer_states) in self.states.layers.iter().enumerate() {
            let batch = layer_states.len();
            let p = layer_states[0].h.dim();
            let n = layer_states[0].c.dim();
            let mut h = Vec::with_capacity(batch * p);
            let mut c = Vec::with_capacity(batch * n);
            for s in layer_states {
                h.extend_from_slice(s.h.as_slice());
                c.extend_from_slice(s.c.as_slice());
            }
            out.push((format!("state.layers.{l}.h"), vec![batch, p], h));
            out.push((format!("state.layers.{l}.c"), vec![batch, n], c));
        }
        out
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let owned = self.checkpoint_tensors();
        let views: Vec<(String, Vec<usize>, &[f64])> = owned
            .iter()
            .map(|(n, s, d)| (n.clone(), s.clone(), d.as_slice()))
            .collect();
        checkpoint::save(path, self.step, &views)
    }

    fn restore(&mut self, ckpt: &checkpoint::Checkpoint) -> Result<()> {
        use std::collections::HashMap;
        let mut by_name: HashMap<&str, &checkpoint::Tensor> =
            ckpt.tensors.iter().map(|t| (t.name.as_str(), t)).collect();
        let mut take = |name: &str, shape: &[usize]| -> Result<Vec<f64>> {
            let tensor = by_name
                .remove(name)
                .ok_or_else(|| LabError::data(format!("checkpoint is missing tensor {name}")))?;
            if tensor.shape != shape {
                return Err(LabError::data(format!(
                    "tensor {name}: checkpoint shape {:?} does not match expected {shape:?}",
                    tensor.shape
                )));
            }
            Ok(tensor.data.clone())
        };

        let expected: Vec<(String, Vec<usize>)> = self
            .checkpoint_tensors()
            .into_iter()
            .map(|(n, s, _)| (n, s))
            .collect();
        let mut restored: HashMap<String, Vec<f64>> = HashMap::new();
        for (name, shape) in &expected {
            restored.insert(name.clone(), take(name, shape)?);
        }
        if let Some(extra) = by_name.keys().next() {
            return Err(LabError::data(format!(
                "checkpoint has unexpected tensor {extra}"
            )));
        }

        for view in self.model.tensor_views_mut() {
            view.data.copy_from_slice(&restored[&view.name]);
        }
        let acc_names: Vec<String> = self
            .model
            .tensor_views()
            .into_iter()
            .map(|v| format!("adagrad.{}", v.name))
            .collect();
        for (acc, name) in self.opt.accumulators_mut().iter_mut().zip(&acc_names) {
            acc.copy_from_slice(&restored[name]);
        }
        for (l, layer_states) in self.states.layers.iter_mut().enumerate() {
            let h = &restored[&format!("state.layers.{l}.h")];
            let c = &restored[&format!("state.layers.{l}.c")];
            let p = layer_states[0].h.dim();
            let n = layer_states[0].c.dim();
            for (b, s) in layer_states.iter_mut().enumerate() {
                s.h.as_mut_slice().copy_from_slice(&h[b * p..(b + 1) * p]);
                s.c.as_mut_slice().copy_from_slice(&c[b * n..(b + 1) * n]);
            }
        }
        self.step = ckpt.step;
        Ok(())
    }
}

/// Loads, trains and reports in one call; the CLI `train` subcommand is a
/// thin wrapper over this.
pub fn train_run(config: RunConfig) -> Result<TrainOutcome> {
    let mut session = TrainSession::new(config)?;
    session.run()
}
