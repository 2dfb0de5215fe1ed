//! Cross-variant equivalence: the algebraic identities that tie the three
//! cell variants together, checked bitwise where the arithmetic is literally
//! the same and to 1e-10 where only reassociation differs.

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rnn_factor_core::cells::{
    flstm_forward, glstm_forward, lstmp_forward, CellConfig, CellParams, GateWeights, LstmState,
};
use rnn_factor_core::numerics::{matmul, Matrix, Vector};

fn random_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vector {
    let dist = Uniform::new_inclusive(-1.0, 1.0);
    Vector::from_vec((0..dim).map(|_| dist.sample(rng)).collect())
}

fn random_inputs(config: &CellConfig, rng: &mut ChaCha8Rng) -> (Vector, LstmState) {
    let x = random_vector(config.input_dim, rng);
    let prev = LstmState {
        h: random_vector(config.input_dim, rng),
        c: random_vector(config.cell_dim, rng),
    };
    (x, prev)
}

/// Builds grouped k=1 params sharing the dense cell's tensors.
fn as_single_group(dense: &CellParams) -> CellParams {
    let w = match &dense.gates {
        GateWeights::Dense { w } => w.clone(),
        _ => panic!("expected dense params"),
    };
    CellParams {
        config: CellConfig::grouped(dense.config.input_dim, dense.config.cell_dim, 1),
        gates: GateWeights::Grouped { blocks: vec![w] },
        bias: dense.bias.clone(),
        projection: dense.projection.clone(),
    }
}

#[test]
fn single_group_equals_dense_bitwise_100_seeds() {
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = rng.gen_range(1..=8usize);
        let n = p * rng.gen_range(1..=4usize);
        let config = CellConfig::dense(p, n);
        let dense = CellParams::init(&config, seed).unwrap();
        let grouped = as_single_group(&dense);
        let (x, prev) = random_inputs(&config, &mut rng);

        let (ds, dc) = lstmp_forward(&dense, &x, &prev).unwrap();
        let (gs, gc) = glstm_forward(&grouped, &x, &prev).unwrap();
        assert_eq!(ds.h.as_slice(), gs.h.as_slice(), "seed {seed}");
        assert_eq!(ds.c.as_slice(), gs.c.as_slice(), "seed {seed}");
        assert_eq!(
            dc.gates.pre_activation.as_slice(),
            gc.gates.pre_activation.as_slice()
        );
    }
}

#[test]
fn identity_first_factor_equals_dense_bitwise() {
    // r = 2p with w1 = I: the factorized path computes w2 * (I z) + b, which
    // must be bit-identical to the dense path on W = w2.
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let p = rng.gen_range(1..=6usize);
        let n = p * rng.gen_range(1..=3usize);
        let config = CellConfig::dense(p, n);
        let dense = CellParams::init(&config, seed).unwrap();
        let w2 = match &dense.gates {
            GateWeights::Dense { w } => w.clone(),
            _ => unreachable!(),
        };
        let factorized = CellParams {
            config: CellConfig::factorized(p, n, 2 * p),
            gates: GateWeights::Factorized {
                w1: Matrix::identity(2 * p),
                w2,
            },
            bias: dense.bias.clone(),
            projection: dense.projection.clone(),
        };
        let (x, prev) = random_inputs(&config, &mut rng);
        let (ds, _) = lstmp_forward(&dense, &x, &prev).unwrap();
        let (fs, _) = flstm_forward(&factorized, &x, &prev).unwrap();
        assert_eq!(ds.h.as_slice(), fs.h.as_slice(), "seed {seed}");
        assert_eq!(ds.c.as_slice(), fs.c.as_slice(), "seed {seed}");
    }
}

#[test]
fn zero_second_factor_leaves_only_bias() {
    let config = CellConfig::factorized(4, 8, 2);
    let mut params = CellParams::init(&config, 3).unwrap();
    if let GateWeights::Factorized { w2, .. } = &mut params.gates {
        w2.as_mut_slice().fill(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let beta = random_vector(32, &mut rng);
    params.bias = beta.clone();
    let (x, prev) = random_inputs(&config, &mut rng);
    let (_, cache) = flstm_forward(&params, &x, &prev).unwrap();
    assert_eq!(cache.gates.pre_activation.as_slice(), beta.as_slice());
}

#[test]
fn factorized_matches_dense_on_materialized_product_100_seeds() {
    // p <= 16, n <= 32, r < p: the two parenthesizations agree to 1e-10.
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let p = rng.gen_range(2..=16usize);
        let n = rng.gen_range(p..=32usize);
        let r = rng.gen_range(1..p);
        let fact_config = CellConfig::factorized(p, n, r);
        let fact = CellParams::init(&fact_config, seed).unwrap();
        let (w1, w2) = match &fact.gates {
            GateWeights::Factorized { w1, w2 } => (w1, w2),
            _ => unreachable!(),
        };
        let dense = CellParams {
            config: CellConfig::dense(p, n),
            gates: GateWeights::Dense {
                w: matmul(w2, w1).unwrap(),
            },
            bias: fact.bias.clone(),
            projection: fact.projection.clone(),
        };
        let (x, prev) = random_inputs(&fact_config, &mut rng);
        let (fs, _) = flstm_forward(&fact, &x, &prev).unwrap();
        let (ds, _) = lstmp_forward(&dense, &x, &prev).unwrap();
        for (a, b) in fs.h.as_slice().iter().zip(ds.h.as_slice()) {
            let tol = 1e-10 * a.abs().max(b.abs()).max(1.0);
            assert!((a - b).abs() <= tol, "seed {seed}: h {a} vs {b}");
        }
        for (a, b) in fs.c.as_slice().iter().zip(ds.c.as_slice()) {
            let tol = 1e-10 * a.abs().max(b.abs()).max(1.0);
            assert!((a - b).abs() <= tol, "seed {seed}: c {a} vs {b}");
        }
    }
}

#[test]
fn group_slices_are_independent_before_projection() {
    // k=2 paired run: perturbing everything in group 1 (inputs, state and
    // weights) must leave group 0's gate slices and memory slice bitwise
    // untouched. Post-projection h mixes groups through the shared P and is
    // intentionally not compared.
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
        let p = 2 * rng.gen_range(1..=4usize);
        let n = 2 * rng.gen_range(p / 2..=2 * p);
        let config = CellConfig::grouped(p, n, 2);
        let params = CellParams::init(&config, seed).unwrap();
        let (x, prev) = random_inputs(&config, &mut rng);

        let (_, cache_a) = glstm_forward(&params, &x, &prev).unwrap();

        let mut params_b = params.clone();
        if let GateWeights::Grouped { blocks } = &mut params_b.gates {
            let dist = Uniform::new_inclusive(-1.0, 1.0);
            let rows = blocks[1].rows();
            let cols = blocks[1].cols();
            blocks[1] = Matrix::from_fn(rows, cols, |_, _| dist.sample(&mut rng));
        }
        let mut x_b = x.clone();
        let mut prev_b = prev.clone();
        for v in &mut x_b.as_mut_slice()[p / 2..] {
            *v = rng.gen_range(-1.0..1.0);
        }
        for v in &mut prev_b.h.as_mut_slice()[p / 2..] {
            *v = rng.gen_range(-1.0..1.0);
        }
        for v in &mut prev_b.c.as_mut_slice()[n / 2..] {
            *v = rng.gen_range(-1.0..1.0);
        }
        let (state_b, cache_b) = glstm_forward(&params_b, &x_b, &prev_b).unwrap();
        let (state_a, _) = glstm_forward(&params, &x, &prev).unwrap();

        let half = n / 2;
        for t in 0..half {
            assert_eq!(cache_a.gates.i.at(t), cache_b.gates.i.at(t), "i[{t}]");
            assert_eq!(cache_a.gates.f.at(t), cache_b.gates.f.at(t), "f[{t}]");
            assert_eq!(cache_a.gates.o.at(t), cache_b.gates.o.at(t), "o[{t}]");
            assert_eq!(cache_a.gates.g.at(t), cache_b.gates.g.at(t), "g[{t}]");
            assert_eq!(state_a.c.at(t), state_b.c.at(t), "c[{t}]");
        }
        // And the perturbation really happened: group 1 slices moved.
        assert_ne!(
            state_a.c.as_slice()[half..],
            state_b.c.as_slice()[half..],
            "seed {seed}: perturbation had no effect"
        );
    }
}

#[test]
fn grouped_variants_share_bias_semantics_with_dense() {
    // With zero gate weights the pre-activations equal the bias for every
    // variant, exercising the shared full-size bias layout.
    let p = 4;
    let n = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let bias = random_vector(4 * n, &mut rng);
    let projection = Matrix::from_fn(p, n, |_, _| rng.gen_range(-0.5..0.5));
    let (x, prev) = random_inputs(&CellConfig::dense(p, n), &mut rng);

    let dense = CellParams {
        config: CellConfig::dense(p, n),
        gates: GateWeights::Dense {
            w: Matrix::zeros(4 * n, 2 * p),
        },
        bias: bias.clone(),
        projection: projection.clone(),
    };
    let (dense_state, dense_cache) = lstmp_forward(&dense, &x, &prev).unwrap();

    for k in [1usize, 2, 4] {
        let grouped = CellParams {
            config: CellConfig::grouped(p, n, k),
            gates: GateWeights::Grouped {
                blocks: (0..k)
                    .map(|_| Matrix::zeros(4 * n / k, 2 * p / k))
                    .collect(),
            },
            bias: bias.clone(),
            projection: projection.clone(),
        };
        let (state, cache) = glstm_forward(&grouped, &x, &prev).unwrap();
        assert_eq!(
            cache.gates.pre_activation.as_slice(),
            dense_cache.gates.pre_activation.as_slice(),
            "k={k}"
        );
        assert_eq!(state.h.as_slice(), dense_state.h.as_slice());
        assert_eq!(state.c.as_slice(), dense_state.c.as_slice());
    }
}
