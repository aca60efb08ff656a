//! Weighted voting games, coalitions and payoff vectors.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coalitions are `u64` bitsets, so no game may have more players than this.
pub const MAX_PLAYERS: usize = 64;

/// Default cap on `n` for solvers that scan all `2^n` coalitions.
pub const DEFAULT_ENUMERATION_CAP: usize = 24;

/// Tolerance for imputation and LP feasibility checks.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Tolerance for evaluation-level comparisons.
pub const EVAL_TOLERANCE: f64 = 1e-6;

/// A subset of players stored as a bitset; bit `i` is player `i` (0-based).
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coalition(u64);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub fn from_bits(bits: u64) -> Self {
        Coalition(bits)
    }

    /// All players `0..n`.
    pub fn grand(n: usize) -> Self {
        assert!(n <= MAX_PLAYERS, "at most {MAX_PLAYERS} players");
        if n == MAX_PLAYERS {
            Coalition(u64::MAX)
        } else {
            Coalition((1u64 << n) - 1)
        }
    }

    pub fn from_members<I: IntoIterator<Item = usize>>(members: I) -> Self {
        members.into_iter().fold(Coalition::EMPTY, |c, i| c.with(i))
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, player: usize) -> bool {
        player < MAX_PLAYERS && self.0 & (1u64 << player) != 0
    }

    pub fn with(self, player: usize) -> Self {
        assert!(player < MAX_PLAYERS);
        Coalition(self.0 | (1u64 << player))
    }

    pub fn without(self, player: usize) -> Self {
        assert!(player < MAX_PLAYERS);
        Coalition(self.0 & !(1u64 << player))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: Coalition) -> bool {
        self.0 & !other.0 == 0
    }

    /// Members in ascending order.
    pub fn members(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(i)
            }
        })
    }

    /// Sum of `values[i]` over members, accumulated in ascending player order.
    pub fn sum_over(self, values: &[f64]) -> f64 {
        self.members().map(|i| values[i]).sum()
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.members()).finish()
    }
}

impl fmt::Display for Coalition {
    /// 1-based member list, e.g. `{1,3}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.members().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

/// A cooperative game given by its characteristic function.
pub trait CharacteristicFn {
    fn players(&self) -> usize;

    fn value(&self, coalition: Coalition) -> f64;
}

/// A simple game where a coalition wins iff its total weight meets the quota.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GameLiteral", into = "GameLiteral")]
pub struct WeightedVotingGame {
    weights: Vec<f64>,
    quota: f64,
}

/// JSON literal form `{"weights": [..], "quota": q}`.
#[derive(Serialize, Deserialize)]
struct GameLiteral {
    weights: Vec<f64>,
    quota: f64,
}

impl TryFrom<GameLiteral> for WeightedVotingGame {
    type Error = Error;

    fn try_from(lit: GameLiteral) -> Result<Self> {
        WeightedVotingGame::new(lit.weights, lit.quota)
    }
}

impl From<WeightedVotingGame> for GameLiteral {
    fn from(game: WeightedVotingGame) -> Self {
        GameLiteral {
            weights: game.weights,
            quota: game.quota,
        }
    }
}

impl WeightedVotingGame {
    /// Validates weights (finite, non-negative) and quota (finite, positive).
    ///
    /// The grand coalition may lose here; solvers call [`Self::ensure_solvable`].
    pub fn new(weights: Vec<f64>, quota: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidGame("a game needs at least one player".into()));
        }
        if weights.len() > MAX_PLAYERS {
            return Err(Error::InvalidGame(format!(
                "{} players exceeds the {MAX_PLAYERS}-player coalition limit",
                weights.len()
            )));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::InvalidGame(format!(
                "weight of player {} is {w}; weights must be finite and non-negative",
                i + 1
            )));
        }
        if !quota.is_finite() || quota <= 0.0 {
            return Err(Error::InvalidGame(format!(
                "quota is {quota}; it must be finite and positive"
            )));
        }
        Ok(WeightedVotingGame { weights, quota })
    }

    /// Like [`Self::new`] but also requires the grand coalition to win.
    pub fn solvable(weights: Vec<f64>, quota: f64) -> Result<Self> {
        let game = Self::new(weights, quota)?;
        game.ensure_solvable()?;
        Ok(game)
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn quota(&self) -> f64 {
        self.quota
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn grand_coalition(&self) -> Coalition {
        Coalition::grand(self.n())
    }

    pub fn ensure_solvable(&self) -> Result<()> {
        if self.is_winning(self.grand_coalition()) {
            Ok(())
        } else {
            Err(Error::LosingGrandCoalition {
                total: self.total_weight(),
                quota: self.quota,
            })
        }
    }

    pub fn coalition_weight(&self, coalition: Coalition) -> f64 {
        coalition.sum_over(&self.weights)
    }

    pub fn is_winning(&self, coalition: Coalition) -> bool {
        !coalition.is_empty() && self.coalition_weight(coalition) >= self.quota
    }

    /// `v(C)`: 1 if the members' weight meets the quota, else 0.
    pub fn char_value(&self, coalition: Coalition) -> f64 {
        if self.is_winning(coalition) {
            1.0
        } else {
            0.0
        }
    }

    /// `v(N)`.
    pub fn grand_value(&self) -> f64 {
        self.char_value(self.grand_coalition())
    }

    /// Weights divided by the quota; `x_i > 1` means player `i` wins alone.
    pub fn normalized_weights(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w / self.quota).collect()
    }

    /// Game with weights and quota multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.weights.iter().map(|w| w * factor).collect(),
            self.quota * factor,
        )
    }

    /// Game whose quota is 1 and whose weights are `normalized`.
    pub fn from_normalized(normalized: Vec<f64>) -> Result<Self> {
        Self::new(normalized, 1.0)
    }

    /// Copy with a different weight for `player`.
    pub fn with_weight(&self, player: usize, weight: f64) -> Result<Self> {
        if player >= self.n() {
            return Err(Error::Dimension {
                expected: self.n(),
                got: player + 1,
            });
        }
        let mut weights = self.weights.clone();
        weights[player] = weight;
        Self::new(weights, self.quota)
    }

    pub fn with_quota(&self, quota: f64) -> Result<Self> {
        Self::new(self.weights.clone(), quota)
    }

    pub(crate) fn check_enumerable(&self, cap: usize) -> Result<()> {
        let cap = cap.min(MAX_PLAYERS - 1);
        if self.n() > cap {
            Err(Error::EnumerationLimit { n: self.n(), cap })
        } else {
            Ok(())
        }
    }
}

impl CharacteristicFn for WeightedVotingGame {
    fn players(&self) -> usize {
        self.n()
    }

    fn value(&self, coalition: Coalition) -> f64 {
        self.char_value(coalition)
    }
}

/// `w / q` elementwise.
pub fn normalize_weights(weights: &[f64], quota: f64) -> Result<Vec<f64>> {
    if !quota.is_finite() || quota <= 0.0 {
        return Err(Error::InvalidGame(format!(
            "quota is {quota}; it must be finite and positive"
        )));
    }
    Ok(weights.iter().map(|w| w / quota).collect())
}

/// A payoff allocation, with the least-core value when the allocation came from the least core.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionVector {
    pub payoffs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lcv: Option<f64>,
}

impl SolutionVector {
    pub fn new(payoffs: Vec<f64>) -> Self {
        SolutionVector { payoffs, lcv: None }
    }

    pub fn with_lcv(payoffs: Vec<f64>, lcv: f64) -> Self {
        SolutionVector {
            payoffs,
            lcv: Some(lcv),
        }
    }

    pub fn len(&self) -> usize {
        self.payoffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payoffs.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.payoffs.iter().sum()
    }

    /// Non-negative payoffs (within `tol`) that distribute exactly `v(N)`.
    pub fn is_imputation(&self, game: &WeightedVotingGame, tol: f64) -> Result<bool> {
        if self.len() != game.n() {
            return Err(Error::Dimension {
                expected: game.n(),
                got: self.len(),
            });
        }
        let nonnegative = self.payoffs.iter().all(|&p| p >= -tol);
        Ok(nonnegative && (self.total() - game.grand_value()).abs() <= tol)
    }
}
