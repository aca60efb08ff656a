use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use coopsolve_core::baselines::LinearPayoffModel;
use coopsolve_core::datagen::{
    make_fixed_dataset, make_variable_dataset, FixedDatasetConfig, GameDataset, TestDistribution,
    VariableDatasetConfig, WeightSource,
};
use coopsolve_core::eval::{
    eu_case_study, evaluate_model, quota_sweep, weight_sweep, CaseStudyModel, EvalConfig, ExactOracle,
    PayoffPredictor, WeightProportional,
};
use coopsolve_core::exact::{banzhaf_exact, shapley_exact};
use coopsolve_core::lp::{least_core_detailed, Formulation, LeastCoreOptions, LeastCoreTarget};
use coopsolve_core::mc::{banzhaf_mc, shapley_mc, McConfig};
use coopsolve_core::neural::{self, MlpArchitecture, PayoffModel, TrainConfig};
use coopsolve_core::tree::{Task, TreeConfig};
use coopsolve_core::xai::{
    self, build_attribution_dataset, fit_target_model, fraction_sweep, speedup_report, AttributionConfig,
    SchemaConfig, TargetConfig,
};
use coopsolve_core::{Concept, LabelPolicy, WeightedVotingGame, DEFAULT_ENUMERATION_CAP};

use crate::output::{json_bytes, Run};

#[derive(Parser, Debug)]
#[command(
    name = "coopsolve",
    version,
    about = "Solution concepts for weighted voting games and networks that learn them"
)]
pub struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true, env = "COOPSOLVE_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve one game exactly, by sampling, or by linear programming.
    Solve(SolveArgs),
    /// Generate a labelled dataset of random games.
    Gen(GenArgs),
    /// Train a payoff network (or the multinomial baseline) on a dataset.
    Train(TrainArgs),
    /// Evaluate a model or baseline on freshly drawn test games.
    Eval(EvalArgs),
    /// Sweep the quota or one player's weight and record solutions.
    Sweep(SweepArgs),
    /// Run the feature-attribution pipeline on a CSV table.
    Xai(XaiArgs),
    /// Compare trained models with ground truth on the EU Council games.
    CaseEu(CaseEuArgs),
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Solve(a) => solve(a),
        Command::Gen(a) => gen(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::Xai(a) => xai_cmd(a),
        Command::CaseEu(a) => case_eu(a),
    }
}

fn parse_concept(s: &str) -> Result<Concept, String> {
    s.parse().map_err(|e: coopsolve_core::Error| e.to_string())
}

fn parse_distribution(s: &str) -> Result<WeightSource, String> {
    if s == "training" {
        return Ok(WeightSource::Training);
    }
    s.parse::<TestDistribution>()
        .map(WeightSource::Test)
        .map_err(|e| format!("{e} (expected training, in-sample, out-of-sample, slight-ood, moderate-ood or significant-ood)"))
}

#[derive(Clone, Debug, Serialize)]
struct PlayerCounts(Vec<usize>);

/// `4-10`, `4..10` or `4,5,6`.
fn parse_players(s: &str) -> Result<PlayerCounts, String> {
    parse_player_list(s).map(PlayerCounts)
}

fn parse_player_list(s: &str) -> Result<Vec<usize>, String> {
    let range = s.split_once("..").or_else(|| s.split_once('-'));
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    match range {
        Some((a, b)) => {
            let (a, b) = (parse(a)?, parse(b.trim_start_matches('='))?);
            if a > b {
                return Err(format!("empty player range {s}"));
            }
            Ok((a..=b).collect())
        }
        None => s.split(',').map(parse).collect(),
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Method {
    Exact,
    Mc,
    Lp,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum FormulationArg {
    Naive,
    Minimal,
}

impl From<FormulationArg> for Formulation {
    fn from(f: FormulationArg) -> Self {
        match f {
            FormulationArg::Naive => Formulation::Naive,
            FormulationArg::Minimal => Formulation::Minimal,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum TargetArg {
    Vertex,
    Canonical,
}

impl From<TargetArg> for LeastCoreTarget {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Vertex => LeastCoreTarget::Vertex,
            TargetArg::Canonical => LeastCoreTarget::Canonical,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct GameArgs {
    /// Player weights, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    weights: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    quota: Option<f64>,
    /// JSON file with `weights` and `quota`, instead of the flags.
    #[arg(long, conflicts_with_all = ["weights", "quota"])]
    game: Option<PathBuf>,
}

impl GameArgs {
    fn load(&self) -> Result<WeightedVotingGame> {
        match (&self.game, &self.weights, self.quota) {
            (Some(path), _, _) => {
                let text = fs::read_to_string(path)
                    .map_err(coopsolve_core::Error::from)
                    .with_context(|| format!("reading {}", path.display()))?;
                let g: WeightedVotingGame = serde_json::from_str(&text)
                    .map_err(|e| coopsolve_core::Error::InvalidGame(format!("{}: {e}", path.display())))?;
                Ok(g)
            }
            (None, Some(w), Some(q)) => Ok(WeightedVotingGame::new(w.clone(), q)?),
            _ => bail!("give either --game FILE or both --weights and --quota"),
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct LpArgs {
    /// Least-core constraint set.
    #[arg(long, value_enum, default_value = "minimal")]
    formulation: FormulationArg,
    /// Least-core payoff: the simplex vertex or the minimum-variance point.
    #[arg(long, value_enum, default_value = "vertex")]
    target: TargetArg,
}

impl LpArgs {
    fn options(&self, cap: usize) -> LeastCoreOptions {
        LeastCoreOptions {
            formulation: self.formulation.into(),
            target: self.target.into(),
            cap,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct McArgs {
    /// Permutations (or subsets) per resample.
    #[arg(long, default_value_t = 1000)]
    permutations: usize,
    #[arg(long, default_value_t = 10)]
    resamples: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    game: GameArgs,
    #[arg(long, value_parser = parse_concept)]
    concept: Concept,
    /// Defaults to exact for indices (sampling above the cap) and lp for the least core.
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Normalized Banzhaf index (the default).
    #[arg(long, conflicts_with = "raw")]
    normalized: bool,
    /// Raw Banzhaf index.
    #[arg(long)]
    raw: bool,
    #[command(flatten)]
    lp: LpArgs,
    #[command(flatten)]
    mc: McArgs,
    /// Seed for sampling methods.
    #[arg(long)]
    seed: Option<u64>,
    /// Largest player count enumerated exactly.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    cap: usize,
    /// Output JSON file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct SolveRecord<'a> {
    game: &'a WeightedVotingGame,
    concept: Concept,
    method: Method,
    normalized: Option<bool>,
    payoffs: &'a [f64],
    lcv: Option<f64>,
    std_error: Option<Vec<f64>>,
    seed: Option<u64>,
    permutations: Option<usize>,
    resamples: Option<usize>,
    least_core: Option<LeastCoreOptions>,
    lp_iterations: Option<usize>,
    constraints: Option<usize>,
}

fn solve(a: SolveArgs) -> Result<()> {
    let mut run = Run::new("solve");
    let game = a.game.load()?;
    let method = a.method.unwrap_or(match a.concept {
        Concept::LeastCore => Method::Lp,
        _ if game.n() <= a.cap => Method::Exact,
        _ => Method::Mc,
    });
    let normalized = !a.raw;
    let mut seed = None;
    let mut std_error = None;
    let mut lp_info = None;
    let solution = match (a.concept, method) {
        (Concept::LeastCore, Method::Lp) => {
            let d = least_core_detailed(&game, &a.lp.options(a.cap))?;
            lp_info = Some((d.lp_iterations, d.constraints.coalitions.len()));
            d.solution
        }
        (Concept::LeastCore, m) => bail!("the least core is solved with --method lp, not {m:?}"),
        (_, Method::Lp) => bail!("--method lp applies to the least core only"),
        (Concept::Shapley, Method::Exact) => shapley_exact(&game, a.cap)?,
        (Concept::Banzhaf, Method::Exact) => banzhaf_exact(&game, normalized, a.cap)?,
        (c, Method::Mc) => {
            let s = run.seed(a.seed);
            seed = Some(s);
            let cfg = McConfig::new(a.mc.permutations, a.mc.resamples, s);
            let est = match c {
                Concept::Shapley => shapley_mc(&game, &cfg)?,
                _ => banzhaf_mc(&game, &cfg, normalized)?,
            };
            std_error = Some(est.std_error);
            est.solution
        }
    };
    for (i, p) in solution.payoffs.iter().enumerate() {
        match &std_error {
            Some(se) => println!("player {}: {p:.12} (se {:.2e})", i + 1, se[i]),
            None => println!("player {}: {p:.12}", i + 1),
        }
    }
    if let Some(l) = solution.lcv {
        println!("least-core value: {l:.12}");
    }
    let sampled = matches!(method, Method::Mc);
    let record = SolveRecord {
        game: &game,
        concept: a.concept,
        method,
        normalized: (a.concept == Concept::Banzhaf).then_some(normalized),
        payoffs: &solution.payoffs,
        lcv: solution.lcv,
        std_error,
        seed,
        permutations: sampled.then_some(a.mc.permutations),
        resamples: sampled.then_some(a.mc.resamples),
        least_core: lp_info.is_some().then(|| a.lp.options(a.cap)),
        lp_iterations: lp_info.map(|i| i.0),
        constraints: lp_info.map(|i| i.1),
    };
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("solve-{}.json", a.concept)));
    let path = run.emit(&out, &json_bytes(&record)?)?;
    eprintln!("wrote {}", path.display());
    run.finish(&a)?;
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct GenArgs {
    /// Players per game (fixed layout).
    #[arg(long, required_unless_present = "players")]
    n: Option<usize>,
    /// Number of games (fixed layout).
    #[arg(long, default_value_t = 5000)]
    games: usize,
    #[arg(long, value_parser = parse_concept)]
    concept: Concept,
    #[arg(long)]
    seed: Option<u64>,
    /// Weight distribution: training or a test distribution name.
    #[arg(long, value_parser = parse_distribution, default_value = "training")]
    dist: WeightSource,
    /// Player counts for a variable layout, e.g. `4-10` or `4,6,8`.
    #[arg(long, value_parser = parse_players, conflicts_with = "n")]
    players: Option<PlayerCounts>,
    /// Games per player count (variable layout).
    #[arg(long, default_value_t = 2500)]
    games_per_n: usize,
    /// Feature slots of the variable layout.
    #[arg(long, default_value_t = 20)]
    max_players: usize,
    #[command(flatten)]
    lp: LpArgs,
    #[command(flatten)]
    mc: McArgs,
    /// Exact index labels up to this many players, sampled above.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    exact_cap: usize,
    /// Raw rather than normalized Banzhaf labels.
    #[arg(long)]
    raw_banzhaf: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn gen(a: GenArgs) -> Result<()> {
    let mut run = Run::new("gen");
    let seed = run.seed(a.seed);
    let policy = LabelPolicy {
        exact_cap: a.exact_cap,
        mc: McConfig::new(a.mc.permutations, a.mc.resamples, seed),
        least_core: a.lp.options(a.exact_cap),
        banzhaf_normalized: !a.raw_banzhaf,
    };
    let (ds, default_name) = match (&a.players, a.n) {
        (Some(players), _) => {
            let cfg = VariableDatasetConfig {
                player_counts: players.0.clone(),
                games_per_n: a.games_per_n,
                max_players: a.max_players,
                concept: a.concept,
                weights: a.dist,
                policy,
                seed,
            };
            (
                make_variable_dataset(&cfg)?,
                format!("dataset-{}-variable-m{}.csv", a.concept, a.max_players),
            )
        }
        (None, Some(n)) => {
            let cfg = FixedDatasetConfig {
                n,
                games: a.games,
                concept: a.concept,
                weights: a.dist,
                policy,
                seed,
            };
            (
                make_fixed_dataset(&cfg)?,
                format!("dataset-{}-n{n}.csv", a.concept),
            )
        }
        (None, None) => bail!("give --n for a fixed layout or --players for a variable one"),
    };
    let mut bytes = Vec::new();
    ds.write_to(&mut bytes)?;
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from(default_name));
    let path = run.emit(&out, &bytes)?;
    println!(
        "{} games, {} features, {} label columns, {} regenerated rows -> {}",
        ds.len(),
        ds.features.cols(),
        ds.labels.cols(),
        ds.meta.regenerated_rows,
        path.display()
    );
    run.finish(&a)?;
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    /// Dataset written by `gen`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "128,128,128")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    dropout: f64,
    /// Maximum epochs (default 6000 fixed, 15000 variable).
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 500)]
    baseline_epochs: usize,
    #[arg(long, default_value_t = 75)]
    patience: usize,
    /// Train for exactly `--epochs` epochs.
    #[arg(long)]
    no_early_stopping: bool,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 128)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.0)]
    weight_decay: f64,
    /// Independent runs; the best validation loss is kept.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// Train the multinomial (no hidden layer) baseline instead.
    #[arg(long)]
    linear: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn train(a: TrainArgs) -> Result<()> {
    let mut run = Run::new("train");
    let seed = run.seed(a.seed);
    let ds = GameDataset::read(&a.data)?;
    let base = TrainConfig::for_layout(&ds.meta.layout, seed);
    let cfg = TrainConfig {
        max_epochs: a.epochs.unwrap_or(base.max_epochs),
        baseline_epochs: a.baseline_epochs,
        patience: a.patience,
        early_stopping: !a.no_early_stopping,
        learning_rate: a.lr,
        batch_size: a.batch_size,
        weight_decay: a.weight_decay,
        runs: a.runs,
        ..base
    };
    let arch = if a.linear {
        LinearPayoffModel::architecture(ds.meta.layout.width(), ds.concept().has_epsilon())
    } else {
        MlpArchitecture::for_dataset(&ds)
            .with_hidden(a.hidden.clone())
            .with_dropout(a.dropout)
    };
    if a.linear && ds.meta.layout.is_variable() {
        bail!("the multinomial baseline needs a fixed-size dataset");
    }
    let outcome = neural::train(&ds, &arch, &cfg)?;
    let m = &outcome.model.meta;
    println!(
        "epochs {} (best {}), best validation loss {:.6e}",
        m.epochs_run, m.best_epoch, m.best_loss
    );
    let default = if a.linear {
        format!("multinomial-{}.json", ds.concept())
    } else {
        format!("model-{}.json", ds.concept())
    };
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from(default));
    let path = run.emit(&out, &json_bytes(&outcome.model.to_file())?)?;
    let mut curve = String::from("epoch,train_loss,val_loss,best_val_loss\n");
    for e in &outcome.curve {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.16e}"));
        curve.push_str(&format!(
            "{},{:.16e},{},{}\n",
            e.epoch,
            e.train_loss,
            opt(e.val_loss),
            opt(e.best_val_loss)
        ));
    }
    let curve_path = path.with_extension("curve.csv");
    run.emit(&curve_path, curve.as_bytes())?;
    println!("model -> {}", path.display());
    run.finish(&(&a, &cfg))?;
    Ok(())
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Baseline {
    WeightProportional,
    Oracle,
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    /// Model file written by `train`.
    #[arg(long, required_unless_present = "baseline")]
    model: Option<PathBuf>,
    /// Evaluate a baseline instead of a model.
    #[arg(long, value_enum, conflicts_with = "model")]
    baseline: Option<Baseline>,
    /// Concept to score (default: the model's).
    #[arg(long, value_parser = parse_concept)]
    concept: Option<Concept>,
    #[arg(long, value_parser = parse_distribution, default_value = "in-sample")]
    dist: WeightSource,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    games: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn eval(a: EvalArgs) -> Result<()> {
    let mut run = Run::new("eval");
    let seed = run.seed(a.seed);
    let model = a.model.as_ref().map(|p| PayoffModel::load(p)).transpose()?;
    let concept = match (a.concept, model.as_ref().and_then(|m| m.meta.concept)) {
        (Some(c), _) | (None, Some(c)) => c,
        (None, None) => bail!("--concept is required when the model does not record one"),
    };
    let mut cfg = EvalConfig::new(concept, a.dist, a.n, seed);
    cfg.games = a.games;
    let wp = WeightProportional {
        with_epsilon: concept.has_epsilon(),
    };
    let oracle = ExactOracle {
        concept,
        policy: cfg.policy,
    };
    let predictor: &dyn PayoffPredictor = match (&model, a.baseline) {
        (Some(m), _) => m,
        (None, Some(Baseline::WeightProportional)) => &wp,
        (None, Some(Baseline::Oracle)) => &oracle,
        (None, None) => bail!("give --model or --baseline"),
    };
    let report = evaluate_model(predictor, &cfg)?;
    println!(
        "{} on {} games (n={}, {}): mean MAE {:.6} (se {:.2e})",
        report.model, a.games, a.n, a.dist, report.mean_mae, report.mae_std_error
    );
    if let (Some(e), Some(f), Some(x)) = (
        report.epsilon_mae,
        report.feasibility_rate,
        report.mean_max_excess,
    ) {
        println!("epsilon MAE {e:.6}, feasibility rate {f:.3}, mean max excess {x:.6}");
    }
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("eval-{concept}-n{}.json", a.n)));
    let path = run.emit(&out, &json_bytes(&report)?)?;
    println!("report -> {}", path.display());
    run.finish(&a)?;
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    weights: Vec<f64>,
    #[arg(long, value_parser = parse_concept)]
    concept: Concept,
    /// Sweep this player's weight (1-based) instead of the quota.
    #[arg(long, requires = "quota")]
    player: Option<usize>,
    /// Fixed quota for a weight sweep.
    #[arg(long)]
    quota: Option<f64>,
    /// Grid step (default 0.1 for quotas, 1 for weights).
    #[arg(long)]
    step: Option<f64>,
    /// Model whose predictions are recorded alongside the truth.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut run = Run::new("sweep");
    let model = a.model.as_ref().map(|p| PayoffModel::load(p)).transpose()?;
    let predictor = model.as_ref().map(|m| m as &dyn PayoffPredictor);
    let policy = LabelPolicy::default();
    let result = match (a.player, a.quota) {
        (Some(j), Some(q)) => {
            if j == 0 || j > a.weights.len() {
                bail!("--player is 1-based and must be at most {}", a.weights.len());
            }
            let game = WeightedVotingGame::solvable(a.weights.clone(), q)?;
            weight_sweep(&game, j - 1, a.concept, a.step.unwrap_or(1.0), &policy, predictor)?
        }
        (None, _) => quota_sweep(&a.weights, a.concept, a.step.unwrap_or(0.1), &policy, predictor)?,
        (Some(_), None) => bail!("--player needs --quota"),
    };
    println!(
        "{} grid points, transitions at {}",
        result.grid.len(),
        result
            .transitions
            .iter()
            .map(|&i| format!("{}={:.6}", result.parameter, result.grid[i]))
            .collect::<Vec<_>>()
            .join(", ")
    );
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("sweep-{}.csv", a.concept)));
    let path = run.emit(&out, result.to_csv().as_bytes())?;
    run.emit(&path.with_extension("json"), &json_bytes(&result)?)?;
    println!("sweep -> {}", path.display());
    run.finish(&a)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum TaskArg {
    Regression,
    Classification,
}

#[derive(Args, Debug, Serialize)]
pub struct XaiArgs {
    /// CSV table with a header row.
    #[arg(long)]
    data: PathBuf,
    /// JSON schema: `{"target": .., "categorical": [..], "ignore": [..]}`.
    #[arg(long)]
    schema: PathBuf,
    #[arg(long, value_enum, default_value = "regression")]
    task: TaskArg,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; an attribution file left by an interrupted run is resumed.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 32)]
    background: usize,
    #[command(flatten)]
    mc: McArgs,
    #[arg(long, default_value_t = 8)]
    max_depth: usize,
    /// Bagged trees in the target model.
    #[arg(long, default_value_t = 1)]
    trees: usize,
    /// Training fractions (default: 20 log-spaced points in [0.005, 0.5]).
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// Fraction used for the speedup report.
    #[arg(long, default_value_t = 0.1)]
    speedup_fraction: f64,
}

fn xai_cmd(a: XaiArgs) -> Result<()> {
    let mut run = Run::new("xai");
    let seed = run.seed(a.seed);
    let schema: SchemaConfig = serde_json::from_str(
        &fs::read_to_string(&a.schema)
            .map_err(coopsolve_core::Error::from)
            .with_context(|| format!("reading {}", a.schema.display()))?,
    )
    .map_err(coopsolve_core::Error::from)?;
    let ds = xai::ingest(&a.data, &schema)?;
    println!("{} rows, {} features", ds.len(), ds.features.cols());
    fs::create_dir_all(&a.out_dir).map_err(coopsolve_core::Error::from)?;
    let dir = |name: &str| a.out_dir.join(name);
    run.emit(&dir("encoding.json"), &json_bytes(&ds.encoding)?)?;

    let task = match a.task {
        TaskArg::Regression => Task::Regression,
        TaskArg::Classification => Task::Classification,
    };
    let target_cfg = TargetConfig {
        tree: TreeConfig {
            max_depth: a.max_depth,
            ..TreeConfig::default()
        },
        trees: a.trees,
        ..TargetConfig::new(task, seed)
    };
    let target = fit_target_model(&ds, &target_cfg)?;
    println!(
        "target model: train error {:.6}, test error {}",
        target.train_error,
        target.test_error.map_or("n/a".into(), |e| format!("{e:.6}"))
    );
    run.emit(&dir("target-model.json"), &json_bytes(&target)?)?;

    let attr_cfg = AttributionConfig {
        background_size: a.background,
        mc: McConfig::new(a.mc.permutations, a.mc.resamples, seed),
        seed,
    };
    let attr_path = dir("attributions.csv");
    let attributions = build_attribution_dataset(&ds.features, &target, &attr_cfg, Some(&attr_path))?;
    run.record(attr_path);

    let fractions = a.fractions.clone().unwrap_or_else(xai::default_fractions);
    let mut all = fractions.clone();
    if !all.iter().any(|&f| (f - a.speedup_fraction).abs() < 1e-12) {
        all.push(a.speedup_fraction);
    }
    let arch = xai::distillation_architecture(ds.features.cols());
    let cfg = TrainConfig::epochs(a.epochs, seed);
    let points = fraction_sweep(&ds.features, &attributions.phi, &all, &arch, &cfg)?;
    for (p, _) in &points {
        println!("t={:.4} rows={} rmse={:.6}", p.fraction, p.train_rows, p.rmse);
    }
    let speed_point = points
        .iter()
        .find(|(p, _)| (p.fraction - a.speedup_fraction).abs() < 1e-12)
        .map(|(p, _)| p)
        .expect("speedup fraction is in the sweep");
    let speedup = speedup_report(&attributions.row_seconds, speed_point)?;
    println!("speedup at t={}: {:.2}x", speedup.fraction, speedup.speedup);
    let sweep: Vec<_> = points.iter().map(|(p, _)| p).collect();
    run.emit(&dir("fraction-sweep.json"), &json_bytes(&sweep)?)?;
    run.emit(&dir("speedup.json"), &json_bytes(&speedup)?)?;
    run.finish(&a)?;
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct CaseEuArgs {
    /// Directory of model files written by `train`.
    #[arg(long)]
    models: PathBuf,
    /// Seed of the Monte-Carlo ground truth for the twenty-state council.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    mc: McArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_models(dir: &Path) -> Result<Vec<(PathBuf, PayoffModel)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(coopsolve_core::Error::from)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    Ok(paths
        .into_iter()
        .filter_map(|p| PayoffModel::load(&p).ok().map(|m| (p, m)))
        .filter(|(_, m)| m.meta.concept.is_some())
        .collect())
}

fn case_eu(a: CaseEuArgs) -> Result<()> {
    let mut run = Run::new("case-eu");
    let seed = run.seed(a.seed);
    let models = load_models(&a.models)?;
    if models.is_empty() {
        return Err(coopsolve_core::Error::Config(format!(
            "no model files with a recorded concept in {}",
            a.models.display()
        ))
        .into());
    }
    for (p, m) in &models {
        eprintln!("using {} ({})", p.display(), m.id());
    }
    let entries: Vec<CaseStudyModel<'_>> = models
        .iter()
        .map(|(_, m)| CaseStudyModel {
            concept: m.meta.concept.expect("filtered above"),
            predictor: m,
            variable: m.meta.layout.as_ref().is_some_and(|l| l.is_variable()),
        })
        .collect();
    let policy = LabelPolicy {
        mc: McConfig::new(a.mc.permutations, a.mc.resamples, seed),
        ..LabelPolicy::default()
    };
    let report = eu_case_study(&entries, &policy)?;
    print!("{}", report.table());
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("case-eu.json"));
    let path = run.emit(&out, &json_bytes(&report)?)?;
    println!("report -> {}", path.display());
    run.finish(&a)?;
    Ok(())
}
