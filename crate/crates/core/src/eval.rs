//! Error metrics, distribution-shift evaluation, parameter sweeps and the EU
//! Council case study.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{weight_proportional, LinearPayoffModel};
use crate::datagen::{sample_wvg, WeightSource};
use crate::error::{Error, Result};
use crate::exact::WinningTable;
use crate::games::{SolutionVector, WeightedVotingGame, EVAL_TOLERANCE};
use crate::lp::{check_feasibility, least_core, max_excess, LeastCoreOptions, LeastCoreTarget};
use crate::matrix::Matrix;
use crate::mc::shapley_mc;
use crate::neural::{predict_payoffs, PayoffModel};
use crate::rng;
use crate::solver::{label_row, Concept, LabelPolicy, LabelSource};

/// Mean absolute per-player deviation.
pub fn mae(p: &[f64], p_hat: &[f64]) -> Result<f64> {
    if p.len() != p_hat.len() {
        return Err(Error::Dimension {
            expected: p.len(),
            got: p_hat.len(),
        });
    }
    if p.is_empty() {
        return Ok(0.0);
    }
    Ok(p.iter().zip(p_hat).map(|(a, b)| (a - b).abs()).sum::<f64>() / p.len() as f64)
}

/// Anything that maps a game to a predicted solution.
pub trait PayoffPredictor: Sync {
    fn id(&self) -> String;
    fn predict(&self, game: &WeightedVotingGame) -> Result<SolutionVector>;
}

impl PayoffPredictor for PayoffModel {
    fn id(&self) -> String {
        let kind = match &self.meta.layout {
            Some(l) if l.is_variable() => "variable",
            _ => "fixed",
        };
        let concept = self.meta.concept.map_or("unknown", Concept::name);
        format!("mlp-{kind}-{concept}-seed{}", self.meta.seed)
    }

    fn predict(&self, game: &WeightedVotingGame) -> Result<SolutionVector> {
        predict_payoffs(self, game)
    }
}

impl PayoffPredictor for LinearPayoffModel {
    fn id(&self) -> String {
        format!("multinomial-seed{}", self.model().meta.seed)
    }

    fn predict(&self, game: &WeightedVotingGame) -> Result<SolutionVector> {
        LinearPayoffModel::predict(self, game)
    }
}

/// `w / sum(w)`, with a zero least-core value when one is expected.
#[derive(Clone, Copy, Debug, Default)]
pub struct WeightProportional {
    pub with_epsilon: bool,
}

impl PayoffPredictor for WeightProportional {
    fn id(&self) -> String {
        "weight-proportional".into()
    }

    fn predict(&self, game: &WeightedVotingGame) -> Result<SolutionVector> {
        let s = weight_proportional(game)?;
        Ok(match self.with_epsilon {
            true => SolutionVector::with_lcv(s.payoffs, 0.0),
            false => s,
        })
    }
}

/// The ground-truth solver itself.
#[derive(Clone, Copy, Debug)]
pub struct ExactOracle {
    pub concept: Concept,
    pub policy: LabelPolicy,
}

impl PayoffPredictor for ExactOracle {
    fn id(&self) -> String {
        format!("oracle-{}", self.concept)
    }

    fn predict(&self, game: &WeightedVotingGame) -> Result<SolutionVector> {
        self.policy.solve(game, self.concept, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub concept: Concept,
    pub weights: WeightSource,
    pub n: usize,
    pub games: usize,
    pub seed: u64,
    pub policy: LabelPolicy,
}

impl EvalConfig {
    /// 1000 test games.
    pub fn new(concept: Concept, weights: WeightSource, n: usize, seed: u64) -> Self {
        EvalConfig {
            concept,
            weights,
            n,
            games: 1000,
            seed,
            policy: LabelPolicy::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub concept: Concept,
    pub distribution: WeightSource,
    pub n: usize,
    pub seed: u64,
    pub label_source: LabelSource,
    /// Payoff MAE per game.
    pub per_game_mae: Vec<f64>,
    pub mean_mae: f64,
    pub mae_std_error: f64,
    pub epsilon_mae: Option<f64>,
    /// Payoff MAE against the minimum-variance least-core point.
    pub canonical_mae: Option<f64>,
    /// Mean of the largest coalition excess under the predicted payoffs.
    pub mean_max_excess: Option<f64>,
    /// Share of games whose predicted payoff lies in the predicted-ε core.
    pub feasibility_rate: Option<f64>,
}

struct GameEval {
    mae: f64,
    eps_err: Option<f64>,
    canonical_mae: Option<f64>,
    max_excess: Option<f64>,
    feasible: Option<bool>,
}

fn evaluate_game(
    predictor: &dyn PayoffPredictor,
    game: &WeightedVotingGame,
    truth: &SolutionVector,
    concept: Concept,
    policy: &LabelPolicy,
) -> Result<GameEval> {
    let pred = predictor.predict(game)?;
    let err = mae(&truth.payoffs, &pred.payoffs)?;
    if !concept.has_epsilon() {
        return Ok(GameEval {
            mae: err,
            eps_err: None,
            canonical_mae: None,
            max_excess: None,
            feasible: None,
        });
    }
    let eps_hat = pred.lcv.unwrap_or(0.0);
    let canonical = least_core(
        game,
        &LeastCoreOptions {
            target: LeastCoreTarget::Canonical,
            ..policy.least_core
        },
    )?;
    let report = check_feasibility(
        game,
        &pred.payoffs,
        eps_hat,
        EVAL_TOLERANCE,
        policy.least_core.cap,
    )?;
    Ok(GameEval {
        mae: err,
        eps_err: Some((truth.lcv.unwrap_or(0.0) - eps_hat).abs()),
        canonical_mae: Some(mae(&canonical.payoffs, &pred.payoffs)?),
        max_excess: Some(max_excess(game, &pred.payoffs, policy.least_core.cap)?),
        feasible: Some(report.feasible),
    })
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = v.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if c == 0 {
        0.0
    } else {
        s / c as f64
    }
}

fn std_error(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v.iter().copied());
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
    (var / v.len() as f64).sqrt()
}

/// Test games for `cfg`: game `i` is drawn from stream `i` of the seed.
pub fn test_games(cfg: &EvalConfig) -> Result<Vec<WeightedVotingGame>> {
    let dist = cfg.weights.resolve(cfg.n);
    (0..cfg.games as u64)
        .into_par_iter()
        .map(|i| sample_wvg(cfg.n, &dist, &mut rng::stream(cfg.seed, i)))
        .collect()
}

/// Scores `predictor` on freshly drawn test games against the label policy's ground truth.
pub fn evaluate_model(predictor: &dyn PayoffPredictor, cfg: &EvalConfig) -> Result<EvalReport> {
    if cfg.games == 0 {
        return Err(Error::EmptyDataset);
    }
    let games = test_games(cfg)?;
    let rows: Vec<GameEval> = games
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            let truth = cfg.policy.solve(g, cfg.concept, i as u64)?;
            evaluate_game(predictor, g, &truth, cfg.concept, &cfg.policy)
        })
        .collect::<Result<_>>()?;
    let per_game_mae: Vec<f64> = rows.iter().map(|r| r.mae).collect();
    let opt_mean =
        |f: fn(&GameEval) -> Option<f64>| cfg.concept.has_epsilon().then(|| mean(rows.iter().filter_map(f)));
    Ok(EvalReport {
        model: predictor.id(),
        concept: cfg.concept,
        distribution: cfg.weights,
        n: cfg.n,
        seed: cfg.seed,
        label_source: cfg.policy.source(cfg.concept, cfg.n),
        mean_mae: mean(per_game_mae.iter().copied()),
        mae_std_error: std_error(&per_game_mae),
        per_game_mae,
        epsilon_mae: opt_mean(|r| r.eps_err),
        canonical_mae: opt_mean(|r| r.canonical_mae),
        mean_max_excess: opt_mean(|r| r.max_excess),
        feasibility_rate: opt_mean(|r| r.feasible.map(|f| if f { 1.0 } else { 0.0 })),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// `quota`, or `weight[j]` with a 0-based player index.
    pub parameter: String,
    pub grid: Vec<f64>,
    pub concept: Concept,
    /// Ground truth per grid point; least-core rows end with the least-core value.
    pub truth: Matrix,
    /// Minimum-variance least-core rows, least-core sweeps only.
    pub canonical: Option<Matrix>,
    pub predictions: Option<Matrix>,
    /// `|prediction - truth|` per grid point and column.
    pub abs_errors: Option<Matrix>,
    /// Grid indices whose winning-coalition set differs from the previous point.
    pub transitions: Vec<usize>,
}

impl SweepResult {
    /// Grid, truth and prediction columns as CSV text.
    pub fn to_csv(&self) -> String {
        let k = self.truth.cols();
        let mut header = vec![self.parameter.clone(), "transition".to_string()];
        header.extend((1..=k).map(|j| format!("truth_{j}")));
        if let Some(c) = &self.canonical {
            header.extend((1..=c.cols()).map(|j| format!("canonical_{j}")));
        }
        if self.predictions.is_some() {
            header.extend((1..=k).map(|j| format!("pred_{j}")));
            header.extend((1..=k).map(|j| format!("abs_err_{j}")));
        }
        let mut out = header.join(",");
        out.push('\n');
        for (i, x) in self.grid.iter().enumerate() {
            let mut row = vec![
                crate::datagen::fmt_f64(*x),
                u8::from(self.transitions.contains(&i)).to_string(),
            ];
            let mut push = |m: &Matrix| row.extend(m.row(i).iter().map(|&v| crate::datagen::fmt_f64(v)));
            push(&self.truth);
            if let Some(c) = &self.canonical {
                push(c);
            }
            if let (Some(p), Some(e)) = (&self.predictions, &self.abs_errors) {
                push(p);
                push(e);
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// `start, start + step, ...` up to `end`, with `end` itself always the last point.
fn grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !start.is_finite() || !end.is_finite() {
        return Err(Error::Config(format!(
            "invalid sweep grid {start}..{end} step {step}"
        )));
    }
    let mut g = Vec::new();
    let mut k = 0u64;
    loop {
        let x = start + k as f64 * step;
        if x >= end - 1e-9 * step {
            break;
        }
        g.push(x);
        k += 1;
    }
    g.push(end);
    Ok(g)
}

fn sweep(
    parameter: String,
    grid: Vec<f64>,
    games: Vec<WeightedVotingGame>,
    concept: Concept,
    policy: &LabelPolicy,
    predictor: Option<&dyn PayoffPredictor>,
) -> Result<SweepResult> {
    let cap = policy.exact_cap.max(policy.least_core.cap);
    let tables: Vec<WinningTable> = games
        .par_iter()
        .map(|g| WinningTable::build(g, cap))
        .collect::<Result<_>>()?;
    let transitions = (1..tables.len())
        .filter(|&i| tables[i] != tables[i - 1])
        .collect();
    let truth: Vec<SolutionVector> = games
        .par_iter()
        .enumerate()
        .map(|(i, g)| policy.solve(g, concept, i as u64))
        .collect::<Result<_>>()?;
    let truth_rows: Vec<Vec<f64>> = truth.iter().map(|s| label_row(s, concept)).collect();
    let canonical = if concept.has_epsilon() {
        let opts = LeastCoreOptions {
            target: LeastCoreTarget::Canonical,
            ..policy.least_core
        };
        let rows: Vec<Vec<f64>> = games
            .par_iter()
            .map(|g| least_core(g, &opts).map(|s| label_row(&s, concept)))
            .collect::<Result<_>>()?;
        Some(Matrix::from_rows(&rows)?)
    } else {
        None
    };
    let (predictions, abs_errors) = match predictor {
        Some(p) => {
            let preds: Vec<Vec<f64>> = games
                .par_iter()
                .map(|g| {
                    p.predict(g).map(|s| {
                        let mut row = s.payoffs;
                        if concept.has_epsilon() {
                            row.push(s.lcv.unwrap_or(0.0));
                        }
                        row
                    })
                })
                .collect::<Result<_>>()?;
            let errs: Vec<Vec<f64>> = preds
                .iter()
                .zip(&truth_rows)
                .map(|(p, t)| p.iter().zip(t).map(|(a, b)| (a - b).abs()).collect())
                .collect();
            (Some(Matrix::from_rows(&preds)?), Some(Matrix::from_rows(&errs)?))
        }
        None => (None, None),
    };
    Ok(SweepResult {
        parameter,
        grid,
        concept,
        truth: Matrix::from_rows(&truth_rows)?,
        canonical,
        predictions,
        abs_errors,
        transitions,
    })
}

/// Solutions for quotas `min(w), min(w) + step, ..., sum(w)`.
pub fn quota_sweep(
    weights: &[f64],
    concept: Concept,
    step: f64,
    policy: &LabelPolicy,
    predictor: Option<&dyn PayoffPredictor>,
) -> Result<SweepResult> {
    let lo = weights.iter().copied().fold(f64::INFINITY, f64::min);
    let hi: f64 = weights.iter().sum();
    let grid = grid(lo, hi, step)?;
    let games = grid
        .iter()
        .map(|&q| WeightedVotingGame::solvable(weights.to_vec(), q))
        .collect::<Result<Vec<_>>>()?;
    sweep("quota".into(), grid, games, concept, policy, predictor)
}

/// Raises `player`'s weight by `step` until it first exceeds the quota.
pub fn weight_sweep(
    game: &WeightedVotingGame,
    player: usize,
    concept: Concept,
    step: f64,
    policy: &LabelPolicy,
    predictor: Option<&dyn PayoffPredictor>,
) -> Result<SweepResult> {
    if player >= game.n() {
        return Err(Error::Config(format!(
            "player {player} out of range for a {}-player game",
            game.n()
        )));
    }
    if !(step > 0.0) {
        return Err(Error::Config(format!("sweep step must be positive, got {step}")));
    }
    let mut grid = Vec::new();
    let start = game.weights()[player];
    let mut k = 0u64;
    loop {
        let w = start + k as f64 * step;
        grid.push(w);
        if w > game.quota() {
            break;
        }
        k += 1;
    }
    let games = grid
        .iter()
        .map(|&w| game.with_weight(player, w))
        .collect::<Result<Vec<_>>>()?;
    sweep(
        format!("weight[{player}]"),
        grid,
        games,
        concept,
        policy,
        predictor,
    )
}

pub const EU4_STATES: [&str; 4] = ["Hungary", "Netherlands", "Poland", "Ireland"];
pub const EU4_WEIGHTS: [f64; 4] = [12.0, 13.0, 27.0, 7.0];
pub const EU4_QUOTA: f64 = 30.5;

pub const EU20_STATES: [&str; 20] = [
    "Germany",
    "France",
    "UK",
    "Italy",
    "Spain",
    "Poland",
    "Romania",
    "Netherlands",
    "Greece",
    "Portugal",
    "Belgium",
    "Czech Rep.",
    "Hungary",
    "Sweden",
    "Austria",
    "Bulgaria",
    "Denmark",
    "Slovakia",
    "Finland",
    "Ireland",
];
pub const EU20_WEIGHTS: [f64; 20] = [
    29.0, 29.0, 29.0, 29.0, 27.0, 27.0, 14.0, 13.0, 12.0, 12.0, 12.0, 12.0, 12.0, 10.0, 10.0, 10.0, 7.0, 7.0,
    7.0, 7.0,
];

/// Four-state council game with quota 30.5.
pub fn eu4_game() -> WeightedVotingGame {
    WeightedVotingGame::solvable(EU4_WEIGHTS.to_vec(), EU4_QUOTA).expect("valid council game")
}

/// Twenty-state council with quota half the total plus one.
pub fn eu20_game() -> WeightedVotingGame {
    let total: f64 = EU20_WEIGHTS.iter().sum();
    WeightedVotingGame::solvable(EU20_WEIGHTS.to_vec(), total / 2.0 + 1.0).expect("valid council game")
}

pub struct CaseStudyModel<'a> {
    pub concept: Concept,
    pub predictor: &'a dyn PayoffPredictor,
    /// Variable-size models are also scored on the twenty-state council.
    pub variable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyEntry {
    pub council: String,
    pub concept: Concept,
    pub model: String,
    pub ground_truth: String,
    pub states: Vec<String>,
    pub weights: Vec<f64>,
    pub quota: f64,
    pub truth: Vec<f64>,
    pub predicted: Vec<f64>,
    pub abs_error: Vec<f64>,
    pub mean_mae: f64,
    pub truth_lcv: Option<f64>,
    pub predicted_lcv: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyReport {
    pub entries: Vec<CaseStudyEntry>,
    /// Models that cannot take a council, with the reason.
    #[serde(default)]
    pub skipped: Vec<String>,
}

impl CaseStudyReport {
    /// Per-state table, one line per state and entry.
    pub fn table(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!(
                "{} / {} / {} (truth: {}), mean MAE {:.4}\n",
                e.council, e.concept, e.model, e.ground_truth, e.mean_mae
            ));
            out.push_str(&format!(
                "  {:<12} {:>6} {:>9} {:>9} {:>9}\n",
                "state", "weight", "truth", "pred", "abs err"
            ));
            for i in 0..e.states.len() {
                out.push_str(&format!(
                    "  {:<12} {:>6} {:>9.4} {:>9.4} {:>9.4}\n",
                    e.states[i], e.weights[i], e.truth[i], e.predicted[i], e.abs_error[i]
                ));
            }
            if let (Some(t), Some(p)) = (e.truth_lcv, e.predicted_lcv) {
                out.push_str(&format!("  least-core value: truth {t:.4}, pred {p:.4}\n"));
            }
        }
        for s in &self.skipped {
            out.push_str(&format!("skipped {s}\n"));
        }
        out
    }
}

fn case_truth(
    game: &WeightedVotingGame,
    concept: Concept,
    policy: &LabelPolicy,
    large: bool,
) -> Result<(SolutionVector, String)> {
    if large && concept == Concept::Shapley {
        let est = shapley_mc(game, &policy.mc)?;
        return Ok((est.solution, "monte-carlo".into()));
    }
    let source = match policy.source(concept, game.n()) {
        LabelSource::Exact => "exact",
        LabelSource::MonteCarlo => "monte-carlo",
        LabelSource::LinearProgram => "linear-program",
    };
    Ok((policy.solve(game, concept, 0)?, source.into()))
}

/// Scores each model on the four-state council, and variable models on the twenty-state council.
///
/// Twenty-state Shapley ground truth is the Monte-Carlo estimate under `policy.mc`.
pub fn eu_case_study(models: &[CaseStudyModel<'_>], policy: &LabelPolicy) -> Result<CaseStudyReport> {
    if models.is_empty() {
        return Err(Error::Config("case study needs at least one model".into()));
    }
    let councils: [(&str, WeightedVotingGame, &[&str], bool); 2] = [
        ("eu4", eu4_game(), &EU4_STATES, false),
        ("eu20", eu20_game(), &EU20_STATES, true),
    ];
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for (name, game, states, large) in &councils {
        for m in models.iter().filter(|m| !*large || m.variable) {
            let pred = match m.predictor.predict(game) {
                Ok(p) => p,
                Err(e @ Error::Capacity { .. }) => {
                    skipped.push(format!("{} on {name}: {e}", m.predictor.id()));
                    continue;
                }
                Err(e) => return Err(e),
            };
            let (truth, source) = case_truth(game, m.concept, policy, *large)?;
            let abs_error: Vec<f64> = truth
                .payoffs
                .iter()
                .zip(&pred.payoffs)
                .map(|(a, b)| (a - b).abs())
                .collect();
            entries.push(CaseStudyEntry {
                council: name.to_string(),
                concept: m.concept,
                model: m.predictor.id(),
                ground_truth: source,
                states: states.iter().map(|s| s.to_string()).collect(),
                weights: game.weights().to_vec(),
                quota: game.quota(),
                mean_mae: mae(&truth.payoffs, &pred.payoffs)?,
                truth: truth.payoffs,
                predicted: pred.payoffs,
                abs_error,
                truth_lcv: m.concept.has_epsilon().then(|| truth.lcv.unwrap_or(0.0)),
                predicted_lcv: m.concept.has_epsilon().then(|| pred.lcv.unwrap_or(0.0)),
            });
        }
    }
    Ok(CaseStudyReport { entries, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::TestDistribution;

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        assert_eq!(mae(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!((mae(&[0.5, 0.5], &[0.6, 0.4]).unwrap() - 0.1).abs() < 1e-15);
        assert!(mae(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn oracle_scores_perfectly_for_every_concept() {
        for concept in Concept::ALL {
            for dist in [TestDistribution::InSample, TestDistribution::SignificantOod] {
                let mut cfg = EvalConfig::new(concept, WeightSource::Test(dist), 5, 3);
                cfg.games = 40;
                let oracle = ExactOracle {
                    concept,
                    policy: cfg.policy,
                };
                let r = evaluate_model(&oracle, &cfg).unwrap();
                assert_eq!(r.per_game_mae.len(), 40);
                assert_eq!(r.mean_mae, 0.0, "{concept} {dist}");
                if concept.has_epsilon() {
                    assert_eq!(r.epsilon_mae, Some(0.0));
                    assert_eq!(r.feasibility_rate, Some(1.0));
                    let gap = r.mean_max_excess.unwrap();
                    assert!((0.0..1.0).contains(&gap));
                } else {
                    assert!(r.feasibility_rate.is_none());
                }
            }
        }
    }

    #[test]
    fn quota_grid_ends_at_total_weight() {
        let g = grid(1.0, 2.0, 0.1).unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(*g.last().unwrap(), 2.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn two_player_quota_sweep_ends_in_unanimity() {
        let r = quota_sweep(
            &[1.0, 1.0],
            Concept::LeastCore,
            0.1,
            &LabelPolicy::default(),
            None,
        )
        .unwrap();
        let last = r.truth.row(r.grid.len() - 1);
        assert_eq!(last[2], 0.0);
        assert_eq!(r.transitions, vec![1]);
        let first = r.truth.row(0);
        assert!((first[2] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn eu_quota_sweep_has_several_transitions() {
        let r = quota_sweep(&EU4_WEIGHTS, Concept::Shapley, 0.1, &LabelPolicy::default(), None).unwrap();
        assert!(r.transitions.len() >= 2, "{:?}", r.transitions);
        let mut bounds = vec![0];
        bounds.extend(&r.transitions);
        bounds.push(r.grid.len());
        for w in bounds.windows(2) {
            for i in w[0] + 1..w[1] {
                assert_eq!(r.truth.row(i), r.truth.row(w[0]));
            }
        }
    }

    #[test]
    fn eu_weight_sweep_gives_hungary_the_majority() {
        let r = weight_sweep(
            &eu4_game(),
            0,
            Concept::Shapley,
            1.0,
            &LabelPolicy::default(),
            None,
        )
        .unwrap();
        assert_eq!(r.grid.first(), Some(&12.0));
        assert_eq!(r.grid.last(), Some(&31.0));
        let last = r.grid.len() - 1;
        assert_eq!(*r.transitions.last().unwrap(), last);
        assert!(r.truth.get(last, 0) > 0.5);
        assert!((r.truth.get(last, 0) - 7.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn dummy_weight_sweep_is_flat() {
        let g = WeightedVotingGame::new(vec![10.0, 10.0, 0.0], 15.0).unwrap();
        let r = weight_sweep(&g, 2, Concept::Banzhaf, 1.0, &LabelPolicy::default(), None).unwrap();
        let first = r.transitions[0];
        assert_eq!(r.grid[first], 5.0);
        for i in 1..first {
            assert_eq!(r.truth.row(i), r.truth.row(0));
        }
    }

    #[test]
    fn case_study_reports_per_state_errors() {
        let wp = WeightProportional::default();
        let models = [CaseStudyModel {
            concept: Concept::Banzhaf,
            predictor: &wp,
            variable: true,
        }];
        let r = eu_case_study(&models, &LabelPolicy::default()).unwrap();
        assert_eq!(r.entries.len(), 2);
        assert_eq!(r.entries[1].states.len(), 20);
        assert_eq!(r.entries[1].weights.iter().sum::<f64>(), 315.0);
        assert_eq!(r.entries[1].quota, 158.5);
        assert!(r.table().contains("Hungary"));
        assert!(eu_case_study(&[], &LabelPolicy::default()).is_err());
    }
}
