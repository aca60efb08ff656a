//! Monte-Carlo Shapley and Banzhaf estimators.
//!
//! Resample `r` draws from `rng::stream(seed, r)`; resamples are averaged in
//! index order, so estimates do not depend on how work is scheduled.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::{CharacteristicFn, Coalition, SolutionVector, WeightedVotingGame};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    /// Permutations (or subsets) sampled per resample.
    pub permutations: usize,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            permutations: 1000,
            resamples: 10,
            seed: 0,
        }
    }
}

impl McConfig {
    pub fn new(permutations: usize, resamples: usize, seed: u64) -> Self {
        McConfig {
            permutations,
            resamples,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.permutations == 0 || self.resamples == 0 {
            return Err(Error::Config(format!(
                "Monte-Carlo needs at least one permutation and one resample (got P={}, R={})",
                self.permutations, self.resamples
            )));
        }
        Ok(())
    }

    fn total_samples(&self) -> usize {
        self.permutations * self.resamples
    }
}

/// Estimate with per-player standard errors of the pooled sample mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub solution: SolutionVector,
    pub std_error: Vec<f64>,
}

/// Running sums of per-sample contributions for each player.
#[derive(Clone)]
struct Moments {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl Moments {
    fn new(n: usize) -> Self {
        Moments {
            sum: vec![0.0; n],
            sum_sq: vec![0.0; n],
        }
    }

    #[inline]
    fn add(&mut self, i: usize, x: f64) {
        self.sum[i] += x;
        self.sum_sq[i] += x * x;
    }
}

fn combine(parts: &[Moments], cfg: &McConfig) -> (Vec<f64>, Vec<f64>) {
    let n = parts[0].sum.len();
    let p = cfg.permutations as f64;
    let total = cfg.total_samples() as f64;
    let mut mean = vec![0.0; n];
    let mut se = vec![0.0; n];
    for i in 0..n {
        // Mean of per-resample means, matching the resample-average estimator.
        mean[i] = parts.iter().map(|m| m.sum[i] / p).sum::<f64>() / parts.len() as f64;
        let sum_sq: f64 = parts.iter().map(|m| m.sum_sq[i]).sum();
        let var = if total > 1.0 {
            ((sum_sq - total * mean[i] * mean[i]) / (total - 1.0)).max(0.0)
        } else {
            0.0
        };
        se[i] = (var / total).sqrt();
    }
    (mean, se)
}

/// Permutation-sampling Shapley estimate for a weighted voting game.
///
/// The pivot of each permutation is found from prefix weight sums.
pub fn shapley_mc(game: &WeightedVotingGame, cfg: &McConfig) -> Result<McEstimate> {
    cfg.validate()?;
    game.ensure_solvable()?;
    let n = game.n();
    let w = game.weights();
    let q = game.quota();
    let parts: Vec<Moments> = (0..cfg.resamples as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(cfg.seed, r);
            let mut order: Vec<usize> = (0..n).collect();
            let mut m = Moments::new(n);
            for _ in 0..cfg.permutations {
                order.shuffle(&mut rng);
                let mut acc = 0.0;
                for &i in &order {
                    acc += w[i];
                    if acc >= q {
                        m.add(i, 1.0);
                        break;
                    }
                }
            }
            m
        })
        .collect();
    let (mean, se) = combine(&parts, cfg);
    Ok(McEstimate {
        solution: SolutionVector::new(mean),
        std_error: se,
    })
}

/// Permutation-sampling Shapley estimate for any characteristic function.
pub fn shapley_mc_fn<F>(game: &F, cfg: &McConfig) -> Result<McEstimate>
where
    F: CharacteristicFn + Sync + ?Sized,
{
    cfg.validate()?;
    let n = game.players();
    if n == 0 {
        return Err(Error::InvalidGame("a game needs at least one player".into()));
    }
    let empty_value = game.value(Coalition::EMPTY);
    let parts: Vec<Moments> = (0..cfg.resamples as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(cfg.seed, r);
            let mut order: Vec<usize> = (0..n).collect();
            let mut m = Moments::new(n);
            for _ in 0..cfg.permutations {
                order.shuffle(&mut rng);
                let mut coalition = Coalition::EMPTY;
                let mut prev = empty_value;
                for &i in &order {
                    coalition = coalition.with(i);
                    let v = game.value(coalition);
                    m.add(i, v - prev);
                    prev = v;
                }
            }
            m
        })
        .collect();
    let (mean, se) = combine(&parts, cfg);
    Ok(McEstimate {
        solution: SolutionVector::new(mean),
        std_error: se,
    })
}

/// Banzhaf estimate from uniformly sampled subsets of the other players.
///
/// Each player gets `permutations * resamples` subset draws. The raw index is
/// the swing frequency; `normalized` rescales it to sum to one.
pub fn banzhaf_mc(game: &WeightedVotingGame, cfg: &McConfig, normalized: bool) -> Result<McEstimate> {
    cfg.validate()?;
    game.ensure_solvable()?;
    let n = game.n();
    let all = Coalition::grand(n).bits();
    let parts: Vec<Moments> = (0..cfg.resamples as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(cfg.seed, r);
            let mut m = Moments::new(n);
            for i in 0..n {
                let others = all & !(1u64 << i);
                for _ in 0..cfg.permutations {
                    let s = Coalition::from_bits(rng.random::<u64>() & others);
                    if !game.is_winning(s) && game.is_winning(s.with(i)) {
                        m.add(i, 1.0);
                    }
                }
            }
            m
        })
        .collect();
    let (mut mean, mut se) = combine(&parts, cfg);
    if normalized {
        let total: f64 = mean.iter().sum();
        if total <= 0.0 {
            return Err(Error::DegenerateGame(
                "no swings sampled; cannot normalize Banzhaf estimate".into(),
            ));
        }
        mean.iter_mut().for_each(|b| *b /= total);
        se.iter_mut().for_each(|s| *s /= total);
    }
    Ok(McEstimate {
        solution: SolutionVector::new(mean),
        std_error: se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn game(w: &[f64], q: f64) -> WeightedVotingGame {
        WeightedVotingGame::new(w.to_vec(), q).unwrap()
    }

    #[test]
    fn parliament_estimate_is_close_to_thirds() {
        let est = shapley_mc(&game(&[49.0, 49.0, 2.0], 50.0), &McConfig::new(1000, 10, 3)).unwrap();
        for p in &est.solution.payoffs {
            assert!((p - 1.0 / 3.0).abs() <= 0.02, "{p}");
        }
        assert!((est.solution.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_player_is_always_pivotal() {
        let est = shapley_mc(&game(&[2.0], 1.0), &McConfig::new(5, 2, 1)).unwrap();
        assert_eq!(est.solution.payoffs, vec![1.0]);
        assert_eq!(est.std_error, vec![0.0]);
    }

    #[test]
    fn generic_estimator_matches_specialised_one_on_wvg() {
        let g = game(&[3.0, 2.0, 2.0, 1.0], 5.0);
        let cfg = McConfig::new(200, 3, 11);
        let a = shapley_mc(&g, &cfg).unwrap();
        let b = shapley_mc_fn(&g, &cfg).unwrap();
        // Same streams and shuffles, so the same pivots.
        for (x, y) in a.solution.payoffs.iter().zip(&b.solution.payoffs) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let g = game(&[3.0, 2.0, 2.0, 1.0, 4.0], 6.0);
        let cfg = McConfig::new(100, 4, 99);
        assert_eq!(shapley_mc(&g, &cfg).unwrap(), shapley_mc(&g, &cfg).unwrap());
        assert_eq!(
            banzhaf_mc(&g, &cfg, false).unwrap(),
            banzhaf_mc(&g, &cfg, false).unwrap()
        );
        let other = McConfig { seed: 100, ..cfg };
        assert_ne!(shapley_mc(&g, &cfg).unwrap(), shapley_mc(&g, &other).unwrap());
    }

    #[test]
    fn banzhaf_unanimity_and_dummy() {
        let est = banzhaf_mc(&game(&[1.0, 1.0], 2.0), &McConfig::new(4000, 1, 5), false).unwrap();
        for (b, se) in est.solution.payoffs.iter().zip(&est.std_error) {
            assert!((b - 0.5).abs() <= 4.0 * se, "{b} ± {se}");
        }
        let est = banzhaf_mc(&game(&[2.0, 1.0, 0.0], 2.5), &McConfig::new(500, 2, 5), false).unwrap();
        assert_eq!(est.solution.payoffs[2], 0.0);
    }

    #[test]
    fn banzhaf_estimate_within_three_standard_errors() {
        let est = banzhaf_mc(&game(&[2.0, 1.0, 1.0], 3.0), &McConfig::new(2000, 5, 2), false).unwrap();
        for ((b, se), exact) in est
            .solution
            .payoffs
            .iter()
            .zip(&est.std_error)
            .zip([0.75, 0.25, 0.25])
        {
            assert!((b - exact).abs() <= 3.0 * se, "{b} vs {exact} (se {se})");
        }
    }

    #[test]
    fn config_is_validated() {
        let g = game(&[1.0], 1.0);
        assert!(matches!(
            shapley_mc(&g, &McConfig::new(0, 1, 0)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            shapley_mc(&game(&[1.0], 2.0), &McConfig::default()),
            Err(Error::LosingGrandCoalition { .. })
        ));
    }
}
