//! Least-core payoffs, excess and feasibility checks for weighted voting games.

use serde::{Deserialize, Serialize};

use super::simplex::{solve_lp, LinearProgram, LpStatus, Sense};
use crate::error::{Error, Result};
use crate::exact::{CoalitionSet, WinningTable};
use crate::games::{
    Coalition, SolutionVector, WeightedVotingGame, DEFAULT_ENUMERATION_CAP, DEFAULT_TOLERANCE,
};

/// The naive LP has one row per winning coalition and is capped at this many players.
pub const NAIVE_PLAYER_CAP: usize = 14;

/// Violations kept verbatim in a [`FeasibilityReport`]; the rest are only counted.
pub const MAX_REPORTED_VIOLATIONS: usize = 1024;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formulation {
    /// One constraint per winning coalition.
    Naive,
    /// One constraint per minimal winning coalition.
    #[default]
    Minimal,
}

/// Which point of the (possibly non-singleton) least core to return.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeastCoreTarget {
    /// The simplex vertex.
    #[default]
    Vertex,
    /// The least-core payoff with minimum variance across players.
    Canonical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeastCoreOptions {
    pub formulation: Formulation,
    pub target: LeastCoreTarget,
    pub cap: usize,
}

impl Default for LeastCoreOptions {
    fn default() -> Self {
        LeastCoreOptions {
            formulation: Formulation::Minimal,
            target: LeastCoreTarget::Vertex,
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

/// Least-core payoff and value, plus the LP bookkeeping behind it.
#[derive(Clone, Debug, PartialEq)]
pub struct LeastCoreSolution {
    pub solution: SolutionVector,
    pub constraints: CoalitionSet,
    pub lp_iterations: usize,
}

fn constraint_set(game: &WeightedVotingGame, opts: &LeastCoreOptions) -> Result<CoalitionSet> {
    let cap = match opts.formulation {
        Formulation::Naive => opts.cap.min(NAIVE_PLAYER_CAP),
        Formulation::Minimal => opts.cap,
    };
    let table = WinningTable::build(game, cap)?;
    game.ensure_solvable()?;
    Ok(match opts.formulation {
        Formulation::Naive => table.winning(),
        Formulation::Minimal => table.minimal_winning(),
    })
}

/// `min eps` s.t. `sum_{i in C} p_i + eps >= 1` for every `C` in `set`, `sum p = 1`, `p, eps >= 0`.
pub fn least_core_lp(n: usize, set: &CoalitionSet) -> LinearProgram {
    let mut objective = vec![0.0; n + 1];
    objective[n] = 1.0;
    let mut lp = LinearProgram::new(objective);
    for c in &set.coalitions {
        let mut row = vec![0.0; n + 1];
        for i in c.members() {
            row[i] = 1.0;
        }
        row[n] = 1.0;
        lp.add_constraint(row, Sense::Ge, 1.0);
    }
    let mut total = vec![1.0; n + 1];
    total[n] = 0.0;
    lp.add_constraint(total, Sense::Eq, 1.0);
    lp
}

pub fn least_core_detailed(game: &WeightedVotingGame, opts: &LeastCoreOptions) -> Result<LeastCoreSolution> {
    let n = game.n();
    let set = constraint_set(game, opts)?;
    let lp = least_core_lp(n, &set);
    let sol = solve_lp(&lp);
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp {
            status: sol.status,
            detail: format!(
                "least-core LP for {n} players with {} {:?} constraints",
                set.len(),
                set.kind
            ),
        });
    }
    let eps = sol.x[n].max(0.0);
    let vertex = sol.x[..n].to_vec();
    let payoffs = match opts.target {
        LeastCoreTarget::Vertex => vertex,
        LeastCoreTarget::Canonical => min_variance_payoff(n, &set, eps)?,
    };
    Ok(LeastCoreSolution {
        solution: SolutionVector::with_lcv(payoffs, eps),
        constraints: set,
        lp_iterations: sol.iterations,
    })
}

/// Least-core payoff and least-core value.
pub fn least_core(game: &WeightedVotingGame, opts: &LeastCoreOptions) -> Result<SolutionVector> {
    least_core_detailed(game, opts).map(|s| s.solution)
}

/// Minimum-variance point of `{p : p(C) >= 1 - eps for C in set, sum p = 1, p >= 0}`.
///
/// With the total fixed, minimising variance is projecting the uniform split
/// onto the polytope. Solved by Hildreth's dual coordinate ascent over the
/// half-spaces.
fn min_variance_payoff(n: usize, set: &CoalitionSet, eps: f64) -> Result<Vec<f64>> {
    const MAX_SWEEPS: usize = 200_000;
    const STEP_TOL: f64 = 1e-14;

    let mut p = vec![1.0 / n as f64; n];
    // Inequality duals: coalitions, then non-negativity.
    let mut lambda_c = vec![0.0; set.len()];
    let mut lambda_b = vec![0.0; n];
    let members: Vec<Vec<usize>> = set.coalitions.iter().map(|c| c.members().collect()).collect();
    let rhs = 1.0 - eps;

    for _ in 0..MAX_SWEEPS {
        let mut largest = 0.0f64;
        for (k, idx) in members.iter().enumerate() {
            let slack: f64 = idx.iter().map(|&i| p[i]).sum::<f64>() - rhs;
            let new = (lambda_c[k] - slack / idx.len() as f64).max(0.0);
            let d = new - lambda_c[k];
            if d != 0.0 {
                for &i in idx {
                    p[i] += d;
                }
                lambda_c[k] = new;
                largest = largest.max(d.abs());
            }
        }
        for i in 0..n {
            let new = (lambda_b[i] - p[i]).max(0.0);
            let d = new - lambda_b[i];
            if d != 0.0 {
                p[i] += d;
                lambda_b[i] = new;
                largest = largest.max(d.abs());
            }
        }
        let d = (1.0 - p.iter().sum::<f64>()) / n as f64;
        if d != 0.0 {
            p.iter_mut().for_each(|v| *v += d);
            largest = largest.max(d.abs());
        }
        if largest <= STEP_TOL {
            p.iter_mut().for_each(|v| *v = v.max(0.0));
            let total: f64 = p.iter().sum();
            p.iter_mut().for_each(|v| *v /= total);
            return Ok(p);
        }
    }
    Err(Error::Numerical(format!(
        "minimum-variance least-core projection did not converge in {MAX_SWEEPS} sweeps"
    )))
}

/// Payoff sums of every coalition, indexed by bit pattern.
fn coalition_payoff_sums(payoff: &[f64]) -> Vec<f64> {
    let n = payoff.len();
    let mut sums = vec![0.0; 1usize << n];
    for s in 1..sums.len() {
        let top = usize::BITS as usize - 1 - s.leading_zeros() as usize;
        sums[s] = sums[s & !(1 << top)] + payoff[top];
    }
    sums
}

fn check_payoff_len(game: &WeightedVotingGame, payoff: &[f64]) -> Result<()> {
    if payoff.len() != game.n() {
        return Err(Error::Dimension {
            expected: game.n(),
            got: payoff.len(),
        });
    }
    Ok(())
}

/// The winning coalition with the largest excess `1 - p(C)`, and that excess.
pub fn max_excess_coalition(
    game: &WeightedVotingGame,
    payoff: &[f64],
    cap: usize,
) -> Result<(Coalition, f64)> {
    check_payoff_len(game, payoff)?;
    let table = WinningTable::build(game, cap)?;
    let sums = coalition_payoff_sums(payoff);
    let mut best: Option<(Coalition, f64)> = None;
    for (s, &sum) in sums.iter().enumerate().skip(1) {
        let c = Coalition::from_bits(s as u64);
        if !table.is_winning(c) {
            continue;
        }
        let excess = 1.0 - sum;
        if best.is_none_or(|(_, e)| excess > e) {
            best = Some((c, excess));
        }
    }
    best.ok_or_else(|| Error::LosingGrandCoalition {
        total: game.total_weight(),
        quota: game.quota(),
    })
}

/// Maximum excess over winning coalitions.
pub fn max_excess(game: &WeightedVotingGame, payoff: &[f64], cap: usize) -> Result<f64> {
    max_excess_coalition(game, payoff, cap).map(|(_, e)| e)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub coalition: Coalition,
    pub excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub epsilon: f64,
    /// Number of winning coalitions with `p(C) < 1 - eps - tol`.
    pub violation_count: usize,
    /// Up to [`MAX_REPORTED_VIOLATIONS`] of them, in bit-pattern order.
    pub violations: Vec<Violation>,
}

/// Checks `p(C) >= 1 - eps - tol` for every winning coalition.
pub fn check_feasibility(
    game: &WeightedVotingGame,
    payoff: &[f64],
    epsilon: f64,
    tol: f64,
    cap: usize,
) -> Result<FeasibilityReport> {
    check_payoff_len(game, payoff)?;
    let table = WinningTable::build(game, cap)?;
    let sums = coalition_payoff_sums(payoff);
    let mut violations = Vec::new();
    let mut violation_count = 0;
    for (s, &sum) in sums.iter().enumerate().skip(1) {
        let c = Coalition::from_bits(s as u64);
        if table.is_winning(c) && sum < 1.0 - epsilon - tol {
            violation_count += 1;
            if violations.len() < MAX_REPORTED_VIOLATIONS {
                violations.push(Violation {
                    coalition: c,
                    excess: 1.0 - sum,
                });
            }
        }
    }
    Ok(FeasibilityReport {
        feasible: violation_count == 0,
        epsilon,
        violation_count,
        violations,
    })
}

/// [`check_feasibility`] at the default tolerance and cap.
pub fn is_feasible(game: &WeightedVotingGame, payoff: &[f64], epsilon: f64) -> Result<bool> {
    check_feasibility(game, payoff, epsilon, DEFAULT_TOLERANCE, DEFAULT_ENUMERATION_CAP).map(|r| r.feasible)
}
