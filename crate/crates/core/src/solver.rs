//! Ground-truth solutions by concept, with the exact-vs-sampled policy used for labels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{banzhaf_exact, shapley_exact};
use crate::games::{SolutionVector, WeightedVotingGame, DEFAULT_ENUMERATION_CAP};
use crate::lp::{least_core, LeastCoreOptions};
use crate::mc::{banzhaf_mc, shapley_mc, McConfig};
use crate::rng::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Concept {
    Shapley,
    Banzhaf,
    LeastCore,
}

impl Concept {
    pub const ALL: [Concept; 3] = [Concept::Shapley, Concept::Banzhaf, Concept::LeastCore];

    pub fn has_epsilon(self) -> bool {
        self == Concept::LeastCore
    }

    pub fn name(self) -> &'static str {
        match self {
            Concept::Shapley => "shapley",
            Concept::Banzhaf => "banzhaf",
            Concept::LeastCore => "leastcore",
        }
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Concept {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "shapley" => Ok(Concept::Shapley),
            "banzhaf" => Ok(Concept::Banzhaf),
            "leastcore" | "core" => Ok(Concept::LeastCore),
            _ => Err(Error::Config(format!(
                "unknown concept `{s}` (expected shapley, banzhaf or leastcore)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelSource {
    Exact,
    MonteCarlo,
    LinearProgram,
}

/// How ground-truth labels are computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelPolicy {
    /// Shapley and Banzhaf are enumerated exactly up to this many players, sampled above.
    pub exact_cap: usize,
    /// Sampling budget above the cap; the seed is mixed with a per-game index.
    pub mc: McConfig,
    pub least_core: LeastCoreOptions,
    /// Banzhaf labels are normalized to sum to one.
    pub banzhaf_normalized: bool,
}

impl Default for LabelPolicy {
    fn default() -> Self {
        LabelPolicy {
            exact_cap: DEFAULT_ENUMERATION_CAP,
            mc: McConfig::default(),
            least_core: LeastCoreOptions::default(),
            banzhaf_normalized: true,
        }
    }
}

impl LabelPolicy {
    pub fn source(&self, concept: Concept, n: usize) -> LabelSource {
        match concept {
            Concept::LeastCore => LabelSource::LinearProgram,
            _ if n <= self.exact_cap => LabelSource::Exact,
            _ => LabelSource::MonteCarlo,
        }
    }

    /// Solves `game` for `concept`; `index` keys the sampling stream when Monte-Carlo is used.
    pub fn solve(&self, game: &WeightedVotingGame, concept: Concept, index: u64) -> Result<SolutionVector> {
        let mc = McConfig {
            seed: derive_seed(self.mc.seed, index),
            ..self.mc
        };
        match (concept, self.source(concept, game.n())) {
            (Concept::Shapley, LabelSource::Exact) => shapley_exact(game, self.exact_cap),
            (Concept::Shapley, _) => shapley_mc(game, &mc).map(|e| e.solution),
            (Concept::Banzhaf, LabelSource::Exact) => {
                banzhaf_exact(game, self.banzhaf_normalized, self.exact_cap)
            }
            (Concept::Banzhaf, _) => banzhaf_mc(game, &mc, self.banzhaf_normalized).map(|e| e.solution),
            (Concept::LeastCore, _) => least_core(game, &self.least_core),
        }
    }
}

/// Solution as a label row: payoffs, then the least-core value when the concept has one.
pub fn label_row(solution: &SolutionVector, concept: Concept) -> Vec<f64> {
    let mut row = solution.payoffs.clone();
    if concept.has_epsilon() {
        row.push(solution.lcv.unwrap_or(0.0));
    }
    row
}
