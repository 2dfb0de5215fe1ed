//! Wall-clock throughput benchmark: full forward/backward/update loops over
//! synthetic data, single-threaded, reported as words per second.
//!
//! Absolute numbers are hardware-bound; what the suite asserts elsewhere is
//! the relative ordering across variants at fixed dims, which follows the
//! MAC-count model once the gate transform dominates the step.

use std::time::Instant;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rnn_factor_core::accounting::{BenchReport, NamedConfig};
use rnn_factor_core::cells::CellConfig;
use rnn_factor_core::model::{BatchSequence, LanguageModel, ModelConfig, SequenceStates};
use rnn_factor_core::optim::{AdagradConfig, AdagradState};

use crate::trainer::training_step;
use crate::Result;

#[derive(Debug, Clone, Copy)]
pub struct BenchSettings {
    pub embed_dim: usize,
    pub cell_dim: usize,
    pub batch: usize,
    pub unroll: usize,
    pub vocab_size: usize,
    /// Timed steps; 0 produces a counts-only report flagged "no measurement".
    pub steps: usize,
    pub warmup: usize,
    pub seed: u64,
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings {
            embed_dim: 256,
            cell_dim: 1024,
            batch: 32,
            unroll: 16,
            vocab_size: 64,
            steps: 2,
            warmup: 1,
            seed: 0,
        }
    }
}

/// The single-layer comparison suite at the given dims: dense baseline,
/// factorized at rank p/2, and the 2/4/8-group variants.
pub fn variant_suite(embed_dim: usize, cell_dim: usize) -> Vec<NamedConfig> {
    vec![
        NamedConfig::new("dense", vec![CellConfig::dense(embed_dim, cell_dim)]),
        NamedConfig::new(
            &format!("f-lstm r={}", embed_dim / 2),
            vec![CellConfig::factorized(embed_dim, cell_dim, embed_dim / 2)],
        ),
        NamedConfig::new(
            "g-lstm k=2",
            vec![CellConfig::grouped(embed_dim, cell_dim, 2)],
        ),
        NamedConfig::new(
            "g-lstm k=4",
            vec![CellConfig::grouped(embed_dim, cell_dim, 4)],
        ),
        NamedConfig::new(
            "g-lstm k=8",
            vec![CellConfig::grouped(embed_dim, cell_dim, 8)],
        ),
    ]
}

fn random_batch(settings: &BenchSettings, rng: &mut ChaCha8Rng) -> Result<BatchSequence> {
    let width = settings.unroll + 1;
    let dist = Uniform::new(0, settings.vocab_size);
    let ids: Vec<usize> = (0..settings.batch * width)
        .map(|_| dist.sample(rng))
        .collect();
    Ok(BatchSequence::new(
        settings.batch,
        width,
        ids,
        settings.vocab_size,
    )?)
}

/// Times full training steps for each configuration. All configs see the
/// same synthetic id stream; warmup steps are excluded from timing.
pub fn throughput_bench(
    configs: &[NamedConfig],
    settings: &BenchSettings,
) -> Result<Vec<BenchReport>> {
    let mut reports = Vec::with_capacity(configs.len());
    for named in configs {
        let mut report = BenchReport::counts_only(named)?;
        if settings.steps > 0 {
            report.measured_words_per_sec = Some(measure_one(named, settings)?);
            report.steps_timed = settings.steps;
        }
        reports.push(report);
    }
    Ok(reports)
}

fn measure_one(named: &NamedConfig, settings: &BenchSettings) -> Result<f64> {
    let config = ModelConfig {
        vocab_size: settings.vocab_size,
        embed_dim: settings.embed_dim,
        layers: named.layers.clone(),
        unroll: settings.unroll,
        batch: settings.batch,
    };
    let mut model = LanguageModel::init(&config, settings.seed)?;
    let mut opt = AdagradState::new(AdagradConfig::default(), &model.tensor_lens());
    let mut states = SequenceStates::zeros(&config, settings.batch);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);

    for _ in 0..settings.warmup {
        let batch = random_batch(settings, &mut rng)?;
        training_step(&mut model, &mut opt, &mut states, &batch)?;
    }
    let timer = Instant::now();
    for _ in 0..settings.steps {
        let batch = random_batch(settings, &mut rng)?;
        training_step(&mut model, &mut opt, &mut states, &batch)?;
    }
    let elapsed = timer.elapsed().as_secs_f64();
    let words = (settings.batch * settings.unroll * settings.steps) as f64;
    Ok(words / elapsed)
}
