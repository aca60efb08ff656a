//! Procedurally generated weighted voting games and labelled datasets.
//!
//! Weights are `location + width * Beta(alpha, beta)`. Quotas are drawn from
//! `N((2n + 1) n / 4, 2n)`, whose mean is half the expected total weight under
//! the training distribution, and redrawn until `0 < q <= sum(w)` so the grand
//! coalition always wins.
//!
//! Dataset files are one JSON metadata line, a column-name line, then one CSV
//! line per game with every float written to 17 significant digits.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::WeightedVotingGame;
use crate::matrix::Matrix;
use crate::rng;
use crate::solver::{label_row, Concept, LabelPolicy, LabelSource};

pub const DATASET_FORMAT: &str = "coopsolve.dataset/1";

/// Quota draws allowed per game before generation gives up.
pub const MAX_QUOTA_ATTEMPTS: usize = 1000;

/// Label failures tolerated per row before generation gives up.
pub const MAX_ROW_ATTEMPTS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightDistribution {
    pub alpha: f64,
    pub beta: f64,
    /// Lower end of the support.
    pub location: f64,
    /// Length of the support.
    pub width: f64,
}

impl WeightDistribution {
    /// Uniform on `[1, 2n]`.
    pub fn training(n: usize) -> Self {
        WeightDistribution {
            alpha: 1.0,
            beta: 1.0,
            location: 1.0,
            width: training_width(n),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.alpha) || !ok(self.beta) {
            return Err(Error::Generation(format!(
                "beta shape parameters must be positive (alpha={}, beta={})",
                self.alpha, self.beta
            )));
        }
        if !ok(self.width) {
            return Err(Error::Generation(format!(
                "weight support width must be positive (got {})",
                self.width
            )));
        }
        if !self.location.is_finite() || self.location < 0.0 {
            return Err(Error::Generation(format!(
                "weight support must start at a non-negative location (got {})",
                self.location
            )));
        }
        Ok(())
    }
}

fn training_width(n: usize) -> f64 {
    2.0 * n as f64 - 1.0
}

/// The five weight distributions used for evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestDistribution {
    InSample,
    OutOfSample,
    SlightOod,
    ModerateOod,
    SignificantOod,
}

impl TestDistribution {
    pub const ALL: [TestDistribution; 5] = [
        TestDistribution::InSample,
        TestDistribution::OutOfSample,
        TestDistribution::SlightOod,
        TestDistribution::ModerateOod,
        TestDistribution::SignificantOod,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestDistribution::InSample => "in-sample",
            TestDistribution::OutOfSample => "out-of-sample",
            TestDistribution::SlightOod => "slight-ood",
            TestDistribution::ModerateOod => "moderate-ood",
            TestDistribution::SignificantOod => "significant-ood",
        }
    }

    /// Shape and location for `n` players; every support has the training width.
    pub fn distribution(self, n: usize) -> WeightDistribution {
        let nf = n as f64;
        let (alpha, beta, location) = match self {
            TestDistribution::InSample => (1.0, 1.0, 1.0),
            TestDistribution::OutOfSample => (1.0, 1.0, 2.5 * nf),
            TestDistribution::SlightOod => (8.0, 12.0, 2.0),
            TestDistribution::ModerateOod => (7.0, 1.5, 1.5 * nf),
            TestDistribution::SignificantOod => (12.0, 8.0, 3.0 * nf),
        };
        WeightDistribution {
            alpha,
            beta,
            location,
            width: training_width(n),
        }
    }
}

impl fmt::Display for TestDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TestDistribution::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::UnknownDistribution(s.to_string()))
    }
}

/// Looks up a named test distribution for `n` players.
pub fn test_distribution(name: &str, n: usize) -> Result<WeightDistribution> {
    name.parse::<TestDistribution>().map(|d| d.distribution(n))
}

/// Where a dataset's weights come from; resolved per player count.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightSource {
    #[default]
    Training,
    Test(TestDistribution),
    Custom(WeightDistribution),
}

impl WeightSource {
    pub fn resolve(&self, n: usize) -> WeightDistribution {
        match *self {
            WeightSource::Training => WeightDistribution::training(n),
            WeightSource::Test(t) => t.distribution(n),
            WeightSource::Custom(d) => d,
        }
    }
}

impl fmt::Display for WeightSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSource::Training => f.write_str("training"),
            WeightSource::Test(t) => write!(f, "{t}"),
            WeightSource::Custom(d) => write!(
                f,
                "beta({}, {}) on [{}, {}]",
                d.alpha,
                d.beta,
                d.location,
                d.location + d.width
            ),
        }
    }
}

/// Mean and standard deviation of the quota for `n` players.
pub fn quota_distribution(n: usize) -> (f64, f64) {
    let nf = n as f64;
    ((2.0 * nf + 1.0) * nf / 4.0, (2.0 * nf).sqrt())
}

/// Draws one game with `v(N) = 1`.
pub fn sample_wvg<R: Rng + ?Sized>(
    n: usize,
    dist: &WeightDistribution,
    rng: &mut R,
) -> Result<WeightedVotingGame> {
    if n < 2 {
        return Err(Error::Generation(format!("need at least two players, got {n}")));
    }
    dist.validate()?;
    let beta = Beta::new(dist.alpha, dist.beta).map_err(|e| Error::Generation(e.to_string()))?;
    let weights: Vec<f64> = (0..n)
        .map(|_| dist.location + dist.width * beta.sample(rng))
        .collect();
    let total: f64 = weights.iter().sum();
    let (mean, sd) = quota_distribution(n);
    let normal = Normal::new(mean, sd).map_err(|e| Error::Generation(e.to_string()))?;
    for _ in 0..MAX_QUOTA_ATTEMPTS {
        let q = normal.sample(rng);
        if q > 0.0 && q <= total {
            return WeightedVotingGame::solvable(weights, q);
        }
    }
    Err(Error::Generation(format!(
        "no quota in (0, {total:.4}] after {MAX_QUOTA_ATTEMPTS} draws from N({mean}, {sd}^2)"
    )))
}

/// [`sample_wvg`] on stream 0 of `seed`.
pub fn sample_wvg_seeded(n: usize, dist: &WeightDistribution, seed: u64) -> Result<WeightedVotingGame> {
    sample_wvg(n, dist, &mut rng::stream(seed, 0))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Layout {
    Fixed {
        n: usize,
    },
    /// Games of several sizes zero-padded to `max_players` slots.
    Variable {
        max_players: usize,
        player_counts: Vec<usize>,
    },
}

impl Layout {
    /// Feature width.
    pub fn width(&self) -> usize {
        match *self {
            Layout::Fixed { n } => n,
            Layout::Variable { max_players, .. } => max_players,
        }
    }

    pub fn is_variable(&self) -> bool {
        matches!(self, Layout::Variable { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionRecord {
    pub n: usize,
    #[serde(flatten)]
    pub distribution: WeightDistribution,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format: String,
    pub concept: Concept,
    pub layout: Layout,
    pub seed: u64,
    pub games: usize,
    pub weights: WeightSource,
    pub distributions: Vec<DistributionRecord>,
    pub quota: String,
    pub label_policy: LabelPolicy,
    pub label_sources: Vec<(usize, LabelSource)>,
    /// Rows redrawn because their label solver failed.
    pub regenerated_rows: usize,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GameDataset {
    /// Normalized weights `w / q`, zero in padded slots.
    pub features: Matrix,
    /// Payoffs in the same slots, then the least-core value for that concept.
    pub labels: Matrix,
    pub meta: DatasetMeta,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedDatasetConfig {
    pub n: usize,
    pub games: usize,
    pub concept: Concept,
    pub weights: WeightSource,
    pub policy: LabelPolicy,
    pub seed: u64,
}

impl FixedDatasetConfig {
    pub fn new(n: usize, games: usize, concept: Concept, seed: u64) -> Self {
        FixedDatasetConfig {
            n,
            games,
            concept,
            weights: WeightSource::Training,
            policy: LabelPolicy::default(),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariableDatasetConfig {
    pub player_counts: Vec<usize>,
    pub games_per_n: usize,
    pub max_players: usize,
    pub concept: Concept,
    pub weights: WeightSource,
    pub policy: LabelPolicy,
    pub seed: u64,
}

impl VariableDatasetConfig {
    /// Games with 4 to 10 players, 2500 each, padded to 20 slots.
    pub fn standard(concept: Concept, seed: u64) -> Self {
        VariableDatasetConfig {
            player_counts: (4..=10).collect(),
            games_per_n: 2500,
            max_players: 20,
            concept,
            weights: WeightSource::Training,
            policy: LabelPolicy::default(),
            seed,
        }
    }
}

struct Row {
    features: Vec<f64>,
    labels: Vec<f64>,
    retries: usize,
}

/// Draws and labels the game for row `index`, redrawing on solver failure.
fn generate_row(
    index: u64,
    n: usize,
    dist: &WeightDistribution,
    concept: Concept,
    policy: &LabelPolicy,
    seed: u64,
    slots: Option<usize>,
) -> Result<Row> {
    let mut rng = rng::stream(seed, index);
    let mut retries = 0;
    loop {
        let game = sample_wvg(n, dist, &mut rng)?;
        match policy.solve(&game, concept, index) {
            Ok(solution) => {
                let x = game.normalized_weights();
                let labels = label_row(&solution, concept);
                let Some(m) = slots else {
                    return Ok(Row {
                        features: x,
                        labels,
                        retries,
                    });
                };
                let mut positions: Vec<usize> = (0..m).collect();
                positions.shuffle(&mut rng);
                let mut features = vec![0.0; m];
                let mut padded = vec![0.0; m + usize::from(concept.has_epsilon())];
                for (i, &slot) in positions[..n].iter().enumerate() {
                    features[slot] = x[i];
                    padded[slot] = labels[i];
                }
                if concept.has_epsilon() {
                    padded[m] = labels[n];
                }
                return Ok(Row {
                    features,
                    labels: padded,
                    retries,
                });
            }
            Err(e) if e.is_solver_error() && retries + 1 < MAX_ROW_ATTEMPTS => retries += 1,
            Err(e) => return Err(e),
        }
    }
}

fn assemble(rows: Vec<Row>) -> Result<(Matrix, Matrix, usize)> {
    let mut features = Matrix::default();
    let mut labels = Matrix::default();
    let mut retries = 0;
    for row in rows {
        features.push_row(&row.features)?;
        labels.push_row(&row.labels)?;
        retries += row.retries;
    }
    Ok((features, labels, retries))
}

fn quota_note() -> String {
    "quota ~ Normal(mean=(2n+1)n/4, sd=sqrt(2n)), redrawn until 0 < q <= sum(w)".into()
}

fn width_note(weights: &WeightSource) -> Vec<String> {
    match weights {
        WeightSource::Test(_) => vec![
            "test distributions give only a location; support width taken as the training width 2n-1".into(),
        ],
        _ => Vec::new(),
    }
}

/// `games` i.i.d. games with `n` players.
pub fn make_fixed_dataset(cfg: &FixedDatasetConfig) -> Result<GameDataset> {
    let dist = cfg.weights.resolve(cfg.n);
    let rows: Vec<Row> = (0..cfg.games as u64)
        .into_par_iter()
        .map(|i| generate_row(i, cfg.n, &dist, cfg.concept, &cfg.policy, cfg.seed, None))
        .collect::<Result<_>>()?;
    let (features, labels, regenerated_rows) = assemble(rows)?;
    Ok(GameDataset {
        features,
        labels,
        meta: DatasetMeta {
            format: DATASET_FORMAT.into(),
            concept: cfg.concept,
            layout: Layout::Fixed { n: cfg.n },
            seed: cfg.seed,
            games: cfg.games,
            weights: cfg.weights,
            distributions: vec![DistributionRecord {
                n: cfg.n,
                distribution: dist,
            }],
            quota: quota_note(),
            label_policy: cfg.policy,
            label_sources: vec![(cfg.n, cfg.policy.source(cfg.concept, cfg.n))],
            regenerated_rows,
            notes: width_note(&cfg.weights),
        },
    })
}

/// Games of every size in `player_counts`, with players scattered over `max_players` slots.
pub fn make_variable_dataset(cfg: &VariableDatasetConfig) -> Result<GameDataset> {
    if cfg.player_counts.is_empty() {
        return Err(Error::Config(
            "variable dataset needs at least one player count".into(),
        ));
    }
    if let Some(&n) = cfg.player_counts.iter().find(|&&n| n > cfg.max_players) {
        return Err(Error::Capacity {
            n,
            capacity: cfg.max_players,
        });
    }
    let g = cfg.games_per_n as u64;
    let jobs: Vec<(u64, usize)> = cfg
        .player_counts
        .iter()
        .enumerate()
        .flat_map(|(k, &n)| (0..g).map(move |j| (k as u64 * g + j, n)))
        .collect();
    let rows: Vec<Row> = jobs
        .into_par_iter()
        .map(|(i, n)| {
            let dist = cfg.weights.resolve(n);
            generate_row(
                i,
                n,
                &dist,
                cfg.concept,
                &cfg.policy,
                cfg.seed,
                Some(cfg.max_players),
            )
        })
        .collect::<Result<_>>()?;
    let (features, labels, regenerated_rows) = assemble(rows)?;
    Ok(GameDataset {
        features,
        labels,
        meta: DatasetMeta {
            format: DATASET_FORMAT.into(),
            concept: cfg.concept,
            layout: Layout::Variable {
                max_players: cfg.max_players,
                player_counts: cfg.player_counts.clone(),
            },
            seed: cfg.seed,
            games: cfg.player_counts.len() * cfg.games_per_n,
            weights: cfg.weights,
            distributions: cfg
                .player_counts
                .iter()
                .map(|&n| DistributionRecord {
                    n,
                    distribution: cfg.weights.resolve(n),
                })
                .collect(),
            quota: quota_note(),
            label_policy: cfg.policy,
            label_sources: cfg
                .player_counts
                .iter()
                .map(|&n| (n, cfg.policy.source(cfg.concept, n)))
                .collect(),
            regenerated_rows,
            notes: width_note(&cfg.weights),
        },
    })
}

/// Formats a float with 17 significant digits.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl GameDataset {
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn concept(&self) -> Concept {
        self.meta.concept
    }

    /// Slots holding a real player in row `i`.
    pub fn player_mask(&self, i: usize) -> Vec<bool> {
        match self.meta.layout {
            Layout::Fixed { n } => vec![true; n],
            Layout::Variable { .. } => self.features.row(i).iter().map(|&x| x != 0.0).collect(),
        }
    }

    /// Rows `idx` as a new dataset with the same metadata.
    pub fn subset(&self, idx: &[usize]) -> GameDataset {
        let mut meta = self.meta.clone();
        meta.games = idx.len();
        GameDataset {
            features: self.features.select_rows(idx),
            labels: self.labels.select_rows(idx),
            meta,
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &self.meta)?;
        writeln!(w)?;
        let f = self.features.cols();
        let k = self.labels.cols();
        let header: Vec<String> = (1..=f)
            .map(|i| format!("x_{i}"))
            .chain((1..=k).map(|i| format!("p_{i}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for r in 0..self.len() {
            let line: Vec<String> = self
                .features
                .row(r)
                .iter()
                .chain(self.labels.row(r))
                .map(|&v| fmt_f64(v))
                .collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn read_from<R: Read>(r: R, path: &Path) -> Result<GameDataset> {
        let mut lines = BufReader::new(r).lines();
        let parse_err = |line: u64, detail: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            detail,
        };
        let meta_line = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing metadata line".into()))??;
        let meta: DatasetMeta = serde_json::from_str(&meta_line).map_err(|e| parse_err(1, e.to_string()))?;
        if meta.format != DATASET_FORMAT {
            return Err(parse_err(1, format!("unsupported format `{}`", meta.format)));
        }
        let header = lines
            .next()
            .ok_or_else(|| parse_err(2, "missing column header".into()))??;
        let columns = header.split(',').count();
        let f = meta.layout.width();
        let k = columns
            .checked_sub(f)
            .ok_or_else(|| parse_err(2, format!("{columns} columns for {f} features")))?;
        let mut features = Matrix::zeros(0, f);
        let mut labels = Matrix::zeros(0, k);
        for (i, line) in lines.enumerate() {
            let line_no = i as u64 + 3;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let values: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(line_no, e.to_string()))?;
            if values.len() != columns {
                return Err(parse_err(
                    line_no,
                    format!("expected {columns} values, found {}", values.len()),
                ));
            }
            features.push_row(&values[..f])?;
            labels.push_row(&values[f..])?;
        }
        Ok(GameDataset {
            features,
            labels,
            meta,
        })
    }

    pub fn read(path: &Path) -> Result<GameDataset> {
        Self::read_from(File::open(path)?, path)
    }
}
