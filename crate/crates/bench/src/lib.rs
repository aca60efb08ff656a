//! Benchmark fixtures shared by the criterion targets.

use coopsolve_core::datagen::{sample_wvg_seeded, WeightDistribution};
use coopsolve_core::WeightedVotingGame;

/// A reproducible training-distribution game with `n` players.
pub fn game(n: usize, seed: u64) -> WeightedVotingGame {
    sample_wvg_seeded(n, &WeightDistribution::training(n), seed).expect("training distribution is valid")
}
