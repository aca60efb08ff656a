//! Enumeration solvers: winning and minimal winning coalitions, exact Shapley
//! values and Banzhaf indices.
//!
//! Everything here is driven by a [`WinningTable`], a bitmap over all `2^n`
//! coalitions. Pivot counts are kept as integers per (player, coalition size)
//! and only converted to floating point at the end.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::{Coalition, SolutionVector, WeightedVotingGame, DEFAULT_ENUMERATION_CAP};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoalitionKind {
    AllWinning,
    MinimalWinning,
}

/// Coalitions sorted by their bit pattern.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoalitionSet {
    pub kind: CoalitionKind,
    pub coalitions: Vec<Coalition>,
}

impl CoalitionSet {
    pub fn len(&self) -> usize {
        self.coalitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coalitions.is_empty()
    }

    pub fn contains(&self, c: Coalition) -> bool {
        self.coalitions.binary_search(&c).is_ok()
    }
}

/// Win/lose bit for every coalition of a game.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WinningTable {
    n: usize,
    bits: Vec<u64>,
}

impl WinningTable {
    /// Scans all `2^n` coalitions. Requires `n <= cap` but not `v(N) = 1`.
    pub fn build(game: &WeightedVotingGame, cap: usize) -> Result<Self> {
        game.check_enumerable(cap)?;
        let n = game.n();
        let w = game.weights();
        let q = game.quota();
        let size = 1usize << n;
        let mut bits = vec![0u64; size.div_ceil(64)];

        // Coalition weights must match `WeightedVotingGame::coalition_weight`,
        // which sums members in ascending order. Split players into a low and a
        // high block: the ascending sum is the low-block sum with the high
        // members folded on afterwards.
        let low = n / 2;
        let low_size = 1usize << low;
        let mut low_sums = vec![0.0f64; low_size];
        for s in 1..low_size {
            let top = usize::BITS as usize - 1 - s.leading_zeros() as usize;
            low_sums[s] = low_sums[s & !(1 << top)] + w[top];
        }
        let high_members: Vec<Vec<usize>> = (0..(1usize << (n - low)))
            .map(|h| {
                Coalition::from_bits(h as u64)
                    .members()
                    .map(|i| i + low)
                    .collect()
            })
            .collect();
        for (h, members) in high_members.iter().enumerate() {
            let base = h << low;
            for (l, &ls) in low_sums.iter().enumerate() {
                let s = base | l;
                if s == 0 {
                    continue;
                }
                let total = members.iter().fold(ls, |acc, &i| acc + w[i]);
                if total >= q {
                    bits[s >> 6] |= 1u64 << (s & 63);
                }
            }
        }
        Ok(WinningTable { n, bits })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_winning(&self, c: Coalition) -> bool {
        let s = c.bits() as usize;
        self.bits[s >> 6] & (1u64 << (s & 63)) != 0
    }

    pub fn grand_wins(&self) -> bool {
        self.is_winning(Coalition::grand(self.n))
    }

    fn ensure_grand_wins(&self, game: &WeightedVotingGame) -> Result<()> {
        if self.grand_wins() {
            Ok(())
        } else {
            Err(Error::LosingGrandCoalition {
                total: game.total_weight(),
                quota: game.quota(),
            })
        }
    }

    pub fn winning(&self) -> CoalitionSet {
        let coalitions = (1u64..(1u64 << self.n))
            .map(Coalition::from_bits)
            .filter(|&c| self.is_winning(c))
            .collect();
        CoalitionSet {
            kind: CoalitionKind::AllWinning,
            coalitions,
        }
    }

    pub fn minimal_winning(&self) -> CoalitionSet {
        let coalitions = (1u64..(1u64 << self.n))
            .map(Coalition::from_bits)
            .filter(|&c| self.is_winning(c) && c.members().all(|j| !self.is_winning(c.without(j))))
            .collect();
        CoalitionSet {
            kind: CoalitionKind::MinimalWinning,
            coalitions,
        }
    }

    /// `counts[i][s]`: number of losing coalitions of size `s` without `i` that
    /// `i` turns into winning ones.
    pub fn pivot_counts(&self) -> Vec<Vec<u64>> {
        let n = self.n;
        let mut counts = vec![vec![0u64; n.max(1)]; n];
        for s in 0u64..(1u64 << n) {
            let c = Coalition::from_bits(s);
            if self.is_winning(c) {
                continue;
            }
            let size = c.len();
            let mut outside = !s & ((1u64 << n) - 1);
            while outside != 0 {
                let i = outside.trailing_zeros() as usize;
                outside &= outside - 1;
                if self.is_winning(c.with(i)) {
                    counts[i][size] += 1;
                }
            }
        }
        counts
    }
}

/// `C(n, k)` exactly.
pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, j| acc * (n - j) as u128 / (j + 1) as u128)
}

fn shapley_from_table(table: &WinningTable) -> SolutionVector {
    let n = table.n();
    // |S|!(n-|S|-1)!/n! = 1 / (n * C(n-1, |S|))
    let weights: Vec<f64> = (0..n)
        .map(|s| 1.0 / (n as f64 * binomial(n - 1, s) as f64))
        .collect();
    let payoffs = table
        .pivot_counts()
        .iter()
        .map(|row| {
            row.iter()
                .zip(&weights)
                .map(|(&count, &w)| count as f64 * w)
                .sum()
        })
        .collect();
    SolutionVector::new(payoffs)
}

fn banzhaf_from_table(table: &WinningTable, normalized: bool) -> Result<SolutionVector> {
    let n = table.n();
    let swings: Vec<u64> = table.pivot_counts().iter().map(|row| row.iter().sum()).collect();
    let total: u64 = swings.iter().sum();
    if total == 0 {
        return Err(Error::DegenerateGame(
            "no player is ever pivotal, so Banzhaf indices are all zero".into(),
        ));
    }
    let denom = if normalized {
        total as f64
    } else {
        2f64.powi(n as i32 - 1)
    };
    Ok(SolutionVector::new(
        swings.iter().map(|&s| s as f64 / denom).collect(),
    ))
}

pub fn winning_coalitions(game: &WeightedVotingGame, cap: usize) -> Result<CoalitionSet> {
    let table = WinningTable::build(game, cap)?;
    table.ensure_grand_wins(game)?;
    Ok(table.winning())
}

pub fn minimal_winning_coalitions(game: &WeightedVotingGame, cap: usize) -> Result<CoalitionSet> {
    let table = WinningTable::build(game, cap)?;
    table.ensure_grand_wins(game)?;
    Ok(table.minimal_winning())
}

/// Shapley value via the subset-weighted marginal contribution formula.
pub fn shapley_exact(game: &WeightedVotingGame, cap: usize) -> Result<SolutionVector> {
    let table = WinningTable::build(game, cap)?;
    table.ensure_grand_wins(game)?;
    Ok(shapley_from_table(&table))
}

/// Banzhaf index; raw is `swings / 2^(n-1)`, normalized divides by the total swing count.
pub fn banzhaf_exact(game: &WeightedVotingGame, normalized: bool, cap: usize) -> Result<SolutionVector> {
    let table = WinningTable::build(game, cap)?;
    table.ensure_grand_wins(game)?;
    banzhaf_from_table(&table, normalized)
}

/// Convenience wrappers at the default enumeration cap.
pub fn shapley(game: &WeightedVotingGame) -> Result<SolutionVector> {
    shapley_exact(game, DEFAULT_ENUMERATION_CAP)
}

pub fn banzhaf(game: &WeightedVotingGame, normalized: bool) -> Result<SolutionVector> {
    banzhaf_exact(game, normalized, DEFAULT_ENUMERATION_CAP)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CAP: usize = DEFAULT_ENUMERATION_CAP;

    fn game(w: &[f64], q: f64) -> WeightedVotingGame {
        WeightedVotingGame::new(w.to_vec(), q).unwrap()
    }

    fn sets(cs: &CoalitionSet) -> Vec<Vec<usize>> {
        cs.coalitions.iter().map(|c| c.members().collect()).collect()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn winning_sets() {
        let w = winning_coalitions(&game(&[2.0, 1.0, 1.0], 3.0), CAP).unwrap();
        assert_eq!(sets(&w), vec![vec![0, 1], vec![0, 2], vec![0, 1, 2]]);
        let w = winning_coalitions(&game(&[1.0, 1.0], 2.0), CAP).unwrap();
        assert_eq!(sets(&w), vec![vec![0, 1]]);
        let w = winning_coalitions(&game(&[5.0, 1.0], 4.0), CAP).unwrap();
        assert_eq!(sets(&w), vec![vec![0], vec![0, 1]]);
    }

    #[test]
    fn minimal_winning_sets() {
        let m = minimal_winning_coalitions(&game(&[49.0, 49.0, 2.0], 50.0), CAP).unwrap();
        assert_eq!(sets(&m), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        let m = minimal_winning_coalitions(&game(&[2.8, 1.6, 6.6, 1.5], 12.1), CAP).unwrap();
        assert_eq!(sets(&m), vec![vec![0, 1, 2, 3]]);
        let m = minimal_winning_coalitions(&game(&[5.0, 1.0], 4.0), CAP).unwrap();
        assert_eq!(sets(&m), vec![vec![0]]);
    }

    #[test]
    fn shapley_known_values() {
        let s = shapley_exact(&game(&[49.0, 49.0, 2.0], 50.0), CAP).unwrap();
        assert_close(&s.payoffs, &[1.0 / 3.0; 3], 1e-15);
        let s = shapley_exact(&game(&[2.0, 1.0, 1.0], 3.0), CAP).unwrap();
        assert_close(&s.payoffs, &[2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1e-15);
        let s = shapley_exact(&game(&[1.0; 4], 3.0), CAP).unwrap();
        assert_close(&s.payoffs, &[0.25; 4], 1e-15);
    }

    #[test]
    fn banzhaf_known_values() {
        let g = game(&[2.0, 1.0, 1.0], 3.0);
        let raw = banzhaf_exact(&g, false, CAP).unwrap();
        assert_close(&raw.payoffs, &[0.75, 0.25, 0.25], 1e-15);
        let norm = banzhaf_exact(&g, true, CAP).unwrap();
        assert_close(&norm.payoffs, &[0.6, 0.2, 0.2], 1e-15);
        let norm = banzhaf_exact(&game(&[1.0, 1.0], 2.0), true, CAP).unwrap();
        assert_close(&norm.payoffs, &[0.5, 0.5], 0.0);
    }

    #[test]
    fn single_player_gets_everything() {
        let g = game(&[3.0], 1.0);
        assert_eq!(shapley_exact(&g, CAP).unwrap().payoffs, vec![1.0]);
        assert_eq!(banzhaf_exact(&g, false, CAP).unwrap().payoffs, vec![1.0]);
    }

    #[test]
    fn dummy_player_gets_zero() {
        let g = game(&[3.0, 2.0, 0.0], 4.0);
        assert_eq!(shapley_exact(&g, CAP).unwrap().payoffs[2], 0.0);
        assert_eq!(banzhaf_exact(&g, false, CAP).unwrap().payoffs[2], 0.0);
    }

    #[test]
    fn cap_and_losing_grand_coalition_are_errors() {
        let g = game(&[1.0; 6], 2.0);
        assert!(matches!(
            shapley_exact(&g, 5),
            Err(Error::EnumerationLimit { n: 6, cap: 5 })
        ));
        let g = game(&[1.0, 1.0], 3.0);
        assert!(matches!(
            banzhaf_exact(&g, true, CAP),
            Err(Error::LosingGrandCoalition { .. })
        ));
    }

    #[test]
    fn table_agrees_with_direct_evaluation() {
        let g = game(&[0.1, 0.2, 0.3, 0.7, 0.05, 1.1, 0.25], 1.3);
        let t = WinningTable::build(&g, CAP).unwrap();
        for s in 0u64..128 {
            let c = Coalition::from_bits(s);
            assert_eq!(t.is_winning(c), g.is_winning(c), "{c:?}");
        }
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(23, 11), 1_352_078);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(3, 4), 0);
    }
}
