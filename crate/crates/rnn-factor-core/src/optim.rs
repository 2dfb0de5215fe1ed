//! Adagrad with global-norm gradient clipping.
//!
//! The update is the textbook one: `acc += g^2` then
//! `theta -= lr * g / (sqrt(acc) + eps)`, elementwise. Accumulators mirror
//! the model tensors exactly and only ever grow, so the step size for a
//! constant gradient is non-increasing.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};

/// Hyperparameters of the optimizer. Only the learning rate is a tuning
/// decision visible in run metadata; the rest default to stable values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdagradConfig {
    pub learning_rate: f64,
    pub epsilon: f64,
    pub initial_accumulator: f64,
    /// Global L2 clipping threshold; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for AdagradConfig {
    fn default() -> Self {
        AdagradConfig {
            learning_rate: 0.2,
            epsilon: 1e-10,
            initial_accumulator: 0.1,
            clip_norm: Some(1.0),
        }
    }
}

/// Squared-gradient accumulators for one flat list of tensors, in the same
/// traversal order as the model's tensor views.
#[derive(Debug, Clone, PartialEq)]
pub struct AdagradState {
    pub config: AdagradConfig,
    accumulators: Vec<Vec<f64>>,
}

impl AdagradState {
    /// One accumulator buffer per tensor, each filled with
    /// `initial_accumulator`.
    pub fn new(config: AdagradConfig, tensor_lens: &[usize]) -> Self {
        AdagradState {
            config,
            accumulators: tensor_lens
                .iter()
                .map(|&len| vec![config.initial_accumulator; len])
                .collect(),
        }
    }

    pub fn accumulators(&self) -> &[Vec<f64>] {
        &self.accumulators
    }

    pub fn accumulators_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.accumulators
    }
}

/// One Adagrad step over parallel flat views of params and grads.
///
/// The whole gradient is validated before any parameter is touched, so a
/// non-finite gradient refuses the step and leaves params and accumulators
/// unchanged.
pub fn adagrad_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut AdagradState,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.accumulators.len() {
        return Err(CoreError::DimMismatch {
            op: "adagrad_step: tensor count",
            expected: params.len(),
            got: grads.len(),
        });
    }
    for (p, g) in params.iter().zip(grads.iter()) {
        if p.len() != g.len() {
            return Err(CoreError::DimMismatch {
                op: "adagrad_step: tensor len",
                expected: p.len(),
                got: g.len(),
            });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite { what: "gradient" });
        }
    }
    let lr = state.config.learning_rate;
    let eps = state.config.epsilon;
    for ((p, g), acc) in params
        .iter_mut()
        .zip(grads.iter())
        .zip(state.accumulators.iter_mut())
    {
        for t in 0..g.len() {
            let gv = g[t];
            acc[t] += gv * gv;
            p[t] -= lr * gv / (libm::sqrt(acc[t]) + eps);
        }
    }
    Ok(())
}

/// Scales all gradients jointly so their global L2 norm does not exceed
/// `max_norm`. The trigger test carries a 1e-12 relative slack so that a
/// just-clipped gradient re-clips to itself bitwise (the recomputed norm of
/// a scaled gradient can land a few ulps above the threshold).
pub fn clip_global_norm(grads: &mut [&mut [f64]], max_norm: f64) -> f64 {
    let mut sum_sq = 0.0;
    for g in grads.iter() {
        for &v in g.iter() {
            sum_sq += v * v;
        }
    }
    let norm = libm::sqrt(sum_sq);
    if norm > max_norm * (1.0 + 1e-12) {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            for v in g.iter_mut() {
                *v *= scale;
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::distributions::{Distribution, Uniform};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(config: AdagradConfig, value: f64) -> (Vec<f64>, AdagradState) {
        (vec![value], AdagradState::new(config, &[1]))
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let cfg = AdagradConfig::default();
        let (mut p, mut state) = single(cfg, 3.0);
        let before_acc = state.accumulators()[0].clone();
        adagrad_step(&mut [&mut p], &[&[0.0]], &mut state).unwrap();
        assert_eq!(p[0], 3.0);
        assert_eq!(state.accumulators()[0], before_acc);
    }

    #[test]
    fn first_and_second_step_magnitudes() {
        let cfg = AdagradConfig {
            learning_rate: 0.2,
            epsilon: 1e-10,
            initial_accumulator: 0.1,
            clip_norm: None,
        };
        let (mut p, mut state) = single(cfg, 0.0);
        adagrad_step(&mut [&mut p], &[&[1.0]], &mut state).unwrap();
        let first = -p[0];
        assert!((first - 0.2 / (libm::sqrt(1.1) + 1e-10)).abs() < 1e-15);
        assert!((first - 0.190693).abs() < 1e-6);

        let before = p[0];
        adagrad_step(&mut [&mut p], &[&[1.0]], &mut state).unwrap();
        let second = before - p[0];
        assert!((second - 0.2 / (libm::sqrt(2.1) + 1e-10)).abs() < 1e-15);
        assert!((second - 0.138013).abs() < 1e-6);
    }

    #[test]
    fn update_magnitude_bounded_and_non_increasing() {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dist = Uniform::new_inclusive(-2.0, 2.0);
            let g: f64 = dist.sample(&mut rng);
            let cfg = AdagradConfig {
                learning_rate: 0.2,
                epsilon: 1e-10,
                initial_accumulator: 0.1,
                clip_norm: None,
            };
            let (mut p, mut state) = single(cfg, 0.0);
            let bound =
                cfg.learning_rate * g.abs() / (libm::sqrt(cfg.initial_accumulator) + cfg.epsilon);
            let mut prev_mag = f64::INFINITY;
            for _ in 0..5 {
                let before = p[0];
                adagrad_step(&mut [&mut p], &[&[g]], &mut state).unwrap();
                let mag = (before - p[0]).abs();
                assert!(mag <= bound + 1e-15);
                assert!(mag <= prev_mag + 1e-15);
                prev_mag = mag;
            }
        }
    }

    #[test]
    fn accumulators_monotone_under_random_grads() {
        let cfg = AdagradConfig::default();
        let mut p = vec![0.0; 8];
        let mut state = AdagradState::new(cfg, &[8]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let dist = Uniform::new_inclusive(-1.0, 1.0);
        let mut last = state.accumulators()[0].clone();
        for _ in 0..10 {
            let g: Vec<f64> = (0..8).map(|_| dist.sample(&mut rng)).collect();
            adagrad_step(&mut [&mut p], &[&g], &mut state).unwrap();
            for (now, before) in state.accumulators()[0].iter().zip(&last) {
                assert!(now >= before);
            }
            last = state.accumulators()[0].clone();
        }
    }

    #[test]
    fn non_finite_gradient_refuses_step() {
        let cfg = AdagradConfig::default();
        let (mut p, mut state) = single(cfg, 1.5);
        let acc_before = state.accumulators()[0].clone();
        let err = adagrad_step(&mut [&mut p], &[&[f64::NAN]], &mut state).unwrap_err();
        assert!(matches!(err, CoreError::NonFinite { .. }));
        assert_eq!(p[0], 1.5);
        assert_eq!(state.accumulators()[0], acc_before);
    }

    #[test]
    fn clip_below_threshold_is_identity() {
        let mut g = vec![0.3, 0.4];
        let orig = g.clone();
        clip_global_norm(&mut [&mut g], 1.0);
        assert_eq!(g, orig);
    }

    #[test]
    fn clip_three_four_five() {
        let mut g = vec![3.0, 4.0];
        clip_global_norm(&mut [&mut g], 1.0);
        assert!((g[0] - 0.6).abs() < 1e-15);
        assert!((g[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn clip_bounds_norm_and_preserves_direction() {
        for seed in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dist = Uniform::new_inclusive(-3.0, 3.0);
            let orig: Vec<f64> = (0..16).map(|_| dist.sample(&mut rng)).collect();
            let mut a = orig[..10].to_vec();
            let mut b = orig[10..].to_vec();
            clip_global_norm(&mut [&mut a, &mut b], 1.0);
            let clipped: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
            let norm: f64 = libm::sqrt(clipped.iter().map(|v| v * v).sum());
            assert!(norm <= 1.0 + 1e-12, "norm {norm}");
            // Direction preserved: clipped = s * orig for one shared s >= 0.
            let orig_norm: f64 = libm::sqrt(orig.iter().map(|v| v * v).sum());
            let s = norm / orig_norm;
            for (c, o) in clipped.iter().zip(&orig) {
                assert!((c - s * o).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn clip_is_idempotent_bitwise() {
        for seed in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dist = Uniform::new_inclusive(-5.0, 5.0);
            let mut g: Vec<f64> = (0..32).map(|_| dist.sample(&mut rng)).collect();
            clip_global_norm(&mut [&mut g], 1.0);
            let once = g.clone();
            clip_global_norm(&mut [&mut g], 1.0);
            assert_eq!(g, once);
        }
    }
}
