//! Recurrent-network kernels for three LSTM cell variants — dense with
//! projection (LSTMP), factorized (F-LSTM) and grouped (G-LSTM) — together
//! with hand-derived backpropagation, exact parameter/FLOP accounting, a
//! small language-model stack and an Adagrad trainer core.
//!
//! The crate is `no_std`-compatible (it allocates, but performs no IO and
//! takes no clocks); the `rnn-factor-lab` companion crate adds file formats,
//! the CLI and wall-clock benchmarking on top. All floating-point work is
//! `f64` with fixed accumulation orders, so results are bitwise reproducible
//! for a fixed seed.

#![cfg_attr(not(feature = "std"), no_std)]

#[cfg(feature = "std")]
extern crate std;

extern crate alloc;

pub mod accounting;
pub mod cells;
pub mod error;
pub mod model;
pub mod numerics;
pub mod optim;

pub use error::{CoreError, Result};
