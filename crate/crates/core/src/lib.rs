//! Solution concepts for cooperative games and neural networks that learn them.
//!
//! The crate covers weighted voting games (exact and Monte-Carlo Shapley and
//! Banzhaf values, least-core LPs), procedural game datasets, from-scratch
//! feedforward payoff models with baselines and evaluation drivers, and a
//! feature-attribution pipeline that distills sampled Shapley values into a
//! network.

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod exact;
pub mod games;
pub mod lp;
pub mod matrix;
pub mod mc;
pub mod neural;
pub mod rng;
pub mod solver;
pub mod tree;
pub mod xai;

pub use error::{Error, Result};
pub use games::{
    normalize_weights, CharacteristicFn, Coalition, SolutionVector, WeightedVotingGame,
    DEFAULT_ENUMERATION_CAP, DEFAULT_TOLERANCE, EVAL_TOLERANCE, MAX_PLAYERS,
};
pub use matrix::Matrix;
pub use solver::{label_row, Concept, LabelPolicy, LabelSource};
