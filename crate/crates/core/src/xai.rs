//! Feature-attribution pipeline: ingest a table, fit a tree, label rows with
//! sampled Shapley attributions, and distill the attributions into a network.
//!
//! The value of a feature coalition `C` at instance `x` is the mean model
//! output over background rows with the features in `C` replaced by `x`'s.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::Instant;

use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::fmt_f64;
use crate::error::{Error, Result};
use crate::games::{CharacteristicFn, Coalition, MAX_PLAYERS};
use crate::matrix::Matrix;
use crate::mc::{shapley_mc_fn, McConfig};
use crate::neural::{self, MlpArchitecture, PayoffModel, TrainConfig};
use crate::rng::{self, derive_seed};
use crate::tree::{Forest, Task, TreeConfig};

pub const ATTRIBUTION_FORMAT: &str = "coopsolve.attributions/1";

const MISSING: [&str; 5] = ["", "NA", "NaN", "nan", "null"];

/// Which columns are categorical, which to drop, and which is the target.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SchemaConfig {
    pub target: String,
    #[serde(default)]
    pub categorical: Vec<String>,
    #[serde(default)]
    pub ignore: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ColumnEncoding {
    /// `(v - mean) / std`; a zero std maps every value to 0.
    Numeric { name: String, mean: f64, std: f64 },
    /// Code is the position in `levels`, in order of first appearance.
    Categorical { name: String, levels: Vec<String> },
}

impl ColumnEncoding {
    pub fn name(&self) -> &str {
        match self {
            ColumnEncoding::Numeric { name, .. } | ColumnEncoding::Categorical { name, .. } => name,
        }
    }
}

/// Fitted preprocessing; applying it to the same file reproduces the matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Encoding {
    pub features: Vec<ColumnEncoding>,
    pub target: ColumnEncoding,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularDataset {
    pub features: Matrix,
    pub target: Vec<f64>,
    pub encoding: Encoding,
}

impl TabularDataset {
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.encoding
            .features
            .iter()
            .map(|c| c.name().to_string())
            .collect()
    }
}

struct RawTable {
    header: Vec<String>,
    records: Vec<(u64, Vec<String>)>,
}

fn read_raw<R: Read>(reader: R, path: &Path) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            detail: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        records.push((line, rec.iter().map(|v| v.trim().to_string()).collect()));
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(RawTable { header, records })
}

fn is_missing(v: &str) -> bool {
    MISSING.contains(&v)
}

fn column_index(header: &[String], name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Config(format!("column `{name}` not found in header")))
}

fn parse_numeric(v: &str, line: u64, name: &str, path: &Path) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line,
            detail: format!("column `{name}`: `{v}` is not a number"),
        })
}

fn fit_column(raw: &RawTable, col: usize, categorical: bool, path: &Path) -> Result<ColumnEncoding> {
    let name = raw.header[col].clone();
    if categorical {
        let mut levels: Vec<String> = Vec::new();
        for (_, rec) in &raw.records {
            let v = &rec[col];
            if !is_missing(v) && !levels.contains(v) {
                levels.push(v.clone());
            }
        }
        return Ok(ColumnEncoding::Categorical { name, levels });
    }
    let mut vals = Vec::new();
    for (line, rec) in &raw.records {
        if !is_missing(&rec[col]) {
            vals.push(parse_numeric(&rec[col], *line, &name, path)?);
        }
    }
    let n = vals.len().max(1) as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let std = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    Ok(ColumnEncoding::Numeric { name, mean, std })
}

fn encode_value(enc: &ColumnEncoding, v: &str, line: u64, path: &Path) -> Result<f64> {
    if is_missing(v) {
        return Ok(0.0);
    }
    match enc {
        ColumnEncoding::Numeric { name, mean, std } => {
            let x = parse_numeric(v, line, name, path)?;
            Ok(if *std > 0.0 { (x - mean) / std } else { 0.0 })
        }
        ColumnEncoding::Categorical { name, levels } => levels
            .iter()
            .position(|l| l == v)
            .map(|i| i as f64)
            .ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line,
                detail: format!("column `{name}`: unseen category `{v}`"),
            }),
    }
}

fn apply(raw: &RawTable, encoding: &Encoding, path: &Path) -> Result<TabularDataset> {
    let cols: Vec<usize> = encoding
        .features
        .iter()
        .map(|c| column_index(&raw.header, c.name()))
        .collect::<Result<_>>()?;
    let tcol = column_index(&raw.header, encoding.target.name())?;
    let mut features = Matrix::zeros(0, cols.len());
    let mut target = Vec::with_capacity(raw.records.len());
    let mut row = vec![0.0; cols.len()];
    for (line, rec) in &raw.records {
        for (k, (&c, enc)) in cols.iter().zip(&encoding.features).enumerate() {
            row[k] = encode_value(enc, &rec[c], *line, path)?;
        }
        features.push_row(&row)?;
        let t = &rec[tcol];
        if is_missing(t) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: *line,
                detail: "missing target value".into(),
            });
        }
        target.push(match &encoding.target {
            ColumnEncoding::Numeric { name, .. } => parse_numeric(t, *line, name, path)?,
            enc => encode_value(enc, t, *line, path)?,
        });
    }
    Ok(TabularDataset {
        features,
        target,
        encoding: encoding.clone(),
    })
}

/// Reads a CSV with a header row and fits z-scoring and category codes.
///
/// Missing values become 0 after encoding. The target is left unscaled;
/// a categorical target is coded like any categorical column.
pub fn ingest_reader<R: Read>(reader: R, path: &Path, schema: &SchemaConfig) -> Result<TabularDataset> {
    let raw = read_raw(reader, path)?;
    let tcol = column_index(&raw.header, &schema.target)?;
    for c in schema.categorical.iter().chain(&schema.ignore) {
        column_index(&raw.header, c)?;
    }
    let mut features = Vec::new();
    for (i, name) in raw.header.iter().enumerate() {
        if i == tcol || schema.ignore.contains(name) {
            continue;
        }
        features.push(fit_column(&raw, i, schema.categorical.contains(name), path)?);
    }
    if features.is_empty() {
        return Err(Error::Config("no feature columns left after the schema".into()));
    }
    if features.len() > MAX_PLAYERS {
        return Err(Error::Config(format!(
            "{} features; attribution supports at most {MAX_PLAYERS}",
            features.len()
        )));
    }
    let target = fit_column(&raw, tcol, schema.categorical.contains(&schema.target), path)?;
    apply(&raw, &Encoding { features, target }, path)
}

pub fn ingest(path: &Path, schema: &SchemaConfig) -> Result<TabularDataset> {
    ingest_reader(File::open(path)?, path, schema)
}

/// Applies a stored encoding instead of fitting one.
pub fn ingest_with_encoding(path: &Path, encoding: &Encoding) -> Result<TabularDataset> {
    apply(&read_raw(File::open(path)?, path)?, encoding, path)
}

/// Anything that maps a feature row to a real output.
pub trait InstanceModel: Sync {
    fn predict(&self, x: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64 + Sync> InstanceModel for F {
    fn predict(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetConfig {
    pub task: Task,
    pub tree: TreeConfig,
    /// Bagged trees; 1 fits a single tree on the whole training split.
    pub trees: usize,
    pub test_fraction: f64,
    pub seed: u64,
}

impl TargetConfig {
    pub fn new(task: Task, seed: u64) -> Self {
        TargetConfig {
            task,
            tree: TreeConfig::default(),
            trees: 1,
            test_fraction: 0.2,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetModel {
    pub forest: Forest,
    pub train_rows: usize,
    pub test_rows: usize,
    /// Mean squared error (regression) or error rate at 0.5 (classification).
    pub train_error: f64,
    pub test_error: Option<f64>,
}

impl InstanceModel for TargetModel {
    fn predict(&self, x: &[f64]) -> f64 {
        self.forest.predict(x)
    }
}

fn model_error(m: &Forest, x: &Matrix, y: &[f64], rows: &[usize]) -> f64 {
    let errs = rows.iter().map(|&r| {
        let p = m.predict(x.row(r));
        match m.task {
            Task::Regression => (p - y[r]).powi(2),
            Task::Classification => f64::from(u8::from((p >= 0.5) != (y[r] >= 0.5))),
        }
    });
    errs.sum::<f64>() / rows.len().max(1) as f64
}

/// Fits the target tree (or bagged forest) on a shuffled training split.
pub fn fit_target_model(ds: &TabularDataset, cfg: &TargetConfig) -> Result<TargetModel> {
    let n = ds.len();
    if n < 2 {
        return Err(Error::Config(format!("need at least two rows, got {n}")));
    }
    if !(0.0..1.0).contains(&cfg.test_fraction) {
        return Err(Error::Config("test fraction must lie in [0, 1)".into()));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(cfg.seed, 0));
    let n_test = ((n as f64 * cfg.test_fraction).round() as usize).min(n - 1);
    let test = idx.split_off(n - n_test);
    let x = ds.features.select_rows(&idx);
    let y: Vec<f64> = idx.iter().map(|&i| ds.target[i]).collect();
    let forest = Forest::fit(&x, &y, cfg.task, &cfg.tree, cfg.trees, derive_seed(cfg.seed, 1))?;
    let all: Vec<usize> = (0..idx.len()).collect();
    let train_error = model_error(&forest, &x, &y, &all);
    let test_error = (!test.is_empty()).then(|| model_error(&forest, &ds.features, &ds.target, &test));
    Ok(TargetModel {
        forest,
        train_rows: idx.len(),
        test_rows: test.len(),
        train_error,
        test_error,
    })
}

/// Background-averaged model value of feature coalitions at one instance.
pub struct FeatureGame<'a, M: ?Sized> {
    model: &'a M,
    x: &'a [f64],
    background: &'a Matrix,
}

impl<'a, M: InstanceModel + ?Sized> FeatureGame<'a, M> {
    pub fn new(model: &'a M, x: &'a [f64], background: &'a Matrix) -> Result<Self> {
        if background.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if background.cols() != x.len() {
            return Err(Error::Dimension {
                expected: x.len(),
                got: background.cols(),
            });
        }
        if x.len() > MAX_PLAYERS {
            return Err(Error::Config(format!("at most {MAX_PLAYERS} features")));
        }
        Ok(FeatureGame { model, x, background })
    }
}

impl<M: InstanceModel + ?Sized> CharacteristicFn for FeatureGame<'_, M> {
    fn players(&self) -> usize {
        self.x.len()
    }

    fn value(&self, coalition: Coalition) -> f64 {
        let mut z = vec![0.0; self.x.len()];
        let mut total = 0.0;
        for b in self.background.iter_rows() {
            for (i, zi) in z.iter_mut().enumerate() {
                *zi = if coalition.contains(i) { self.x[i] } else { b[i] };
            }
            total += self.model.predict(&z);
        }
        total / self.background.rows() as f64
    }
}

/// A characteristic function with every coalition value precomputed.
struct Tabled {
    players: usize,
    values: Vec<f64>,
}

impl Tabled {
    fn build<G: CharacteristicFn + ?Sized>(g: &G) -> Self {
        let n = g.players();
        Tabled {
            players: n,
            values: (0..1u64 << n).map(|b| g.value(Coalition::from_bits(b))).collect(),
        }
    }
}

impl CharacteristicFn for Tabled {
    fn players(&self) -> usize {
        self.players
    }

    fn value(&self, coalition: Coalition) -> f64 {
        self.values[coalition.bits() as usize]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub phi: Vec<f64>,
    /// Mean model output over the background.
    pub base: f64,
    pub std_error: Vec<f64>,
}

/// Permutation-sampled Shapley attribution of `x` against `background`.
///
/// When `2^F` coalition values cost less than the sampled ones, they are all
/// precomputed; the estimate is the same either way.
pub fn attribute_instance<M: InstanceModel + ?Sized>(
    model: &M,
    x: &[f64],
    background: &Matrix,
    cfg: &McConfig,
) -> Result<Attribution> {
    let game = FeatureGame::new(model, x, background)?;
    let f = x.len();
    let sampled = cfg.permutations.saturating_mul(cfg.resamples).saturating_mul(f);
    let est = if f < 20 && (1usize << f) <= sampled {
        shapley_mc_fn(&Tabled::build(&game), cfg)?
    } else {
        shapley_mc_fn(&game, cfg)?
    };
    Ok(Attribution {
        phi: est.solution.payoffs,
        base: game.value(Coalition::EMPTY),
        std_error: est.std_error,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributionConfig {
    pub background_size: usize,
    pub mc: McConfig,
    pub seed: u64,
}

impl AttributionConfig {
    /// 32 background rows, 1000 permutations x 10 resamples.
    pub fn new(seed: u64) -> Self {
        AttributionConfig {
            background_size: 32,
            mc: McConfig::new(1000, 10, seed),
            seed,
        }
    }
}

/// Background rows drawn uniformly without replacement.
pub fn sample_background(x: &Matrix, size: usize, seed: u64) -> Result<Vec<usize>> {
    if size == 0 || x.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if size >= x.rows() {
        return Ok((0..x.rows()).collect());
    }
    let mut rows = index::sample(&mut rng::stream(seed, u64::MAX), x.rows(), size).into_vec();
    rows.sort_unstable();
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributionMatrix {
    /// Instance by feature attributions.
    pub phi: Matrix,
    pub base: f64,
    pub background_rows: Vec<usize>,
    /// Wall-clock labeling time per row.
    pub row_seconds: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct AttributionHeader {
    format: String,
    rows: usize,
    features: usize,
    config: AttributionConfig,
    background_rows: Vec<usize>,
    base: f64,
}

const CHUNK: usize = 64;

fn label_row<M: InstanceModel + ?Sized>(
    model: &M,
    x: &Matrix,
    bg: &Matrix,
    cfg: &AttributionConfig,
    row: usize,
) -> Result<(Vec<f64>, f64)> {
    let start = Instant::now();
    let mc = McConfig {
        seed: derive_seed(cfg.mc.seed, row as u64),
        ..cfg.mc
    };
    let a = attribute_instance(model, x.row(row), bg, &mc)?;
    Ok((a.phi, start.elapsed().as_secs_f64()))
}

/// Attribution rows, per-row seconds, and the byte length they occupy.
type Resumed = (Vec<Vec<f64>>, Vec<f64>, u64);

/// Reads finished rows of an attribution file, dropping a torn final line.
fn resume(path: &Path, header: &AttributionHeader) -> Result<Option<Resumed>> {
    if !path.exists() {
        return Ok(None);
    }
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    let complete = text.rfind('\n').map_or(0, |i| i + 1);
    let mut lines = text[..complete].lines();
    let parse_err = |line: u64, detail: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        detail,
    };
    let Some(first) = lines.next() else {
        return Ok(None);
    };
    let existing: AttributionHeader = serde_json::from_str(first).map_err(|e| parse_err(1, e.to_string()))?;
    if &existing != header {
        return Err(Error::Config(format!(
            "{} was written with different settings; choose another output path",
            path.display()
        )));
    }
    lines.next();
    let f = header.features;
    let mut phi = Vec::new();
    let mut secs = Vec::new();
    for (i, line) in lines.enumerate() {
        let vals: Vec<f64> = line
            .split(',')
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e: std::num::ParseFloatError| parse_err(i as u64 + 3, e.to_string()))?;
        if vals.len() != f + 1 {
            return Err(parse_err(i as u64 + 3, format!("expected {} values", f + 1)));
        }
        secs.push(vals[f]);
        phi.push(vals[..f].to_vec());
    }
    Ok(Some((phi, secs, complete as u64)))
}

/// Attributions for every row of `x`.
///
/// With `out`, rows are appended to that file in chunks and an existing file
/// written with the same settings is resumed rather than recomputed.
pub fn build_attribution_dataset<M: InstanceModel + ?Sized>(
    x: &Matrix,
    model: &M,
    cfg: &AttributionConfig,
    out: Option<&Path>,
) -> Result<AttributionMatrix> {
    let bg_rows = sample_background(x, cfg.background_size, cfg.seed)?;
    let bg = x.select_rows(&bg_rows);
    let base = FeatureGame::new(model, x.row(0), &bg)?.value(Coalition::EMPTY);
    let header = AttributionHeader {
        format: ATTRIBUTION_FORMAT.into(),
        rows: x.rows(),
        features: x.cols(),
        config: *cfg,
        background_rows: bg_rows.clone(),
        base,
    };
    let (mut phi, mut secs) = (Vec::new(), Vec::new());
    let mut writer = match out {
        Some(path) => {
            let file = match resume(path, &header)? {
                Some((p, s, len)) => {
                    phi = p;
                    secs = s;
                    let f = OpenOptions::new().append(true).open(path)?;
                    f.set_len(len)?;
                    f
                }
                None => {
                    let mut f = File::create(path)?;
                    serde_json::to_writer(&mut f, &header)?;
                    let cols: Vec<String> = (1..=x.cols())
                        .map(|i| format!("phi_{i}"))
                        .chain(std::iter::once("seconds".to_string()))
                        .collect();
                    write!(f, "\n{}\n", cols.join(","))?;
                    f
                }
            };
            Some(BufWriter::new(file))
        }
        None => None,
    };
    let mut next = phi.len();
    while next < x.rows() {
        let end = (next + CHUNK).min(x.rows());
        let chunk: Vec<(Vec<f64>, f64)> = (next..end)
            .into_par_iter()
            .map(|r| label_row(model, x, &bg, cfg, r))
            .collect::<Result<_>>()?;
        for (p, s) in chunk {
            if let Some(w) = writer.as_mut() {
                let line: Vec<String> = p.iter().chain(std::iter::once(&s)).map(|&v| fmt_f64(v)).collect();
                writeln!(w, "{}", line.join(","))?;
            }
            phi.push(p);
            secs.push(s);
        }
        if let Some(w) = writer.as_mut() {
            w.flush()?;
        }
        next = end;
    }
    Ok(AttributionMatrix {
        phi: if phi.is_empty() {
            Matrix::zeros(0, x.cols())
        } else {
            Matrix::from_rows(&phi)?
        },
        base,
        background_rows: bg_rows,
        row_seconds: secs,
    })
}

/// Reads an attribution file written by [`build_attribution_dataset`].
pub fn read_attributions(path: &Path) -> Result<AttributionMatrix> {
    let first = BufReader::new(File::open(path)?)
        .lines()
        .next()
        .ok_or(Error::EmptyDataset)??;
    let header: AttributionHeader = serde_json::from_str(&first).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        detail: e.to_string(),
    })?;
    let (phi, secs, _) = resume(path, &header)?.ok_or(Error::EmptyDataset)?;
    Ok(AttributionMatrix {
        phi: Matrix::from_rows(&phi)?,
        base: header.base,
        background_rows: header.background_rows,
        row_seconds: secs,
    })
}

/// `count` log-spaced fractions from `lo` to `hi`.
pub fn log_fractions(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// 20 log-spaced fractions in `[0.005, 0.5]`.
pub fn default_fractions() -> Vec<f64> {
    log_fractions(0.005, 0.5, 20)
}

/// Distillation network: input and output width `features`, linear head.
pub fn distillation_architecture(features: usize) -> MlpArchitecture {
    MlpArchitecture::linear(features, features)
}

/// 100 epochs, no early stopping.
pub fn distillation_config(seed: u64) -> TrainConfig {
    TrainConfig::epochs(100, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractionPoint {
    pub fraction: f64,
    pub train_rows: usize,
    pub test_rows: usize,
    pub rmse: f64,
    pub train_seconds: f64,
    pub predict_seconds: f64,
}

/// Trains on the first `t * N` shuffled rows for each fraction `t` and scores the rest.
pub fn fraction_sweep(
    x: &Matrix,
    phi: &Matrix,
    fractions: &[f64],
    arch: &MlpArchitecture,
    cfg: &TrainConfig,
) -> Result<Vec<(FractionPoint, PayoffModel)>> {
    if x.rows() != phi.rows() {
        return Err(Error::Dimension {
            expected: x.rows(),
            got: phi.rows(),
        });
    }
    let n = x.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(derive_seed(cfg.seed, 0x46524143), 0));
    fractions
        .iter()
        .map(|&t| {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Config(format!("fraction {t} outside (0, 1)")));
            }
            let k = (t * n as f64).round() as usize;
            if k == 0 || k >= n {
                return Err(Error::Config(format!(
                    "fraction {t} of {n} rows leaves an empty training or test set"
                )));
            }
            let (tr, te) = order.split_at(k);
            let start = Instant::now();
            let outcome = neural::fit(&x.select_rows(tr), &phi.select_rows(tr), None, arch, cfg)?;
            let train_seconds = start.elapsed().as_secs_f64();
            let start = Instant::now();
            let pred = outcome.model.predict(&x.select_rows(te))?;
            let predict_seconds = start.elapsed().as_secs_f64();
            let truth = phi.select_rows(te);
            let mse = pred
                .as_slice()
                .iter()
                .zip(truth.as_slice())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / truth.as_slice().len() as f64;
            Ok((
                FractionPoint {
                    fraction: t,
                    train_rows: k,
                    test_rows: n - k,
                    rmse: mse.sqrt(),
                    train_seconds,
                    predict_seconds,
                },
                outcome.model,
            ))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedupReport {
    pub fraction: f64,
    pub rows: usize,
    /// Labeling every row with sampled attributions.
    pub full_seconds: f64,
    /// Labeling `t * N` rows, training, and predicting the rest.
    pub distilled_seconds: f64,
    /// `full_seconds / distilled_seconds`.
    pub speedup: f64,
    /// Mean squared error of distilled against sampled attributions.
    pub mse: f64,
}

/// Time saved by labeling a fraction of rows and predicting the rest.
pub fn speedup_report(row_seconds: &[f64], point: &FractionPoint) -> Result<SpeedupReport> {
    if row_seconds.is_empty() {
        return Err(Error::MissingTimings("no per-row labeling times recorded".into()));
    }
    let rows = point.train_rows + point.test_rows;
    let per_row = row_seconds.iter().sum::<f64>() / row_seconds.len() as f64;
    let full = per_row * rows as f64;
    let distilled = per_row * point.train_rows as f64 + point.train_seconds + point.predict_seconds;
    if !(distilled > 0.0) {
        return Err(Error::MissingTimings("distillation timings are zero".into()));
    }
    Ok(SpeedupReport {
        fraction: point.fraction,
        rows,
        full_seconds: full,
        distilled_seconds: distilled,
        speedup: full / distilled,
        mse: point.rmse * point.rmse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(target: &str, categorical: &[&str]) -> SchemaConfig {
        SchemaConfig {
            target: target.into(),
            categorical: categorical.iter().map(|s| s.to_string()).collect(),
            ignore: Vec::new(),
        }
    }

    #[test]
    fn zscore_and_first_appearance_codes() {
        let csv = "a,c,y\n2,a,1\n4,b,0\n6,a,1\n";
        let ds = ingest_reader(csv.as_bytes(), Path::new("t.csv"), &schema("y", &["c"])).unwrap();
        let z = 1.5f64.sqrt();
        assert!((ds.features.get(0, 0) + z).abs() < 1e-15);
        assert_eq!(ds.features.get(1, 0), 0.0);
        assert!((ds.features.get(2, 0) - z).abs() < 1e-15);
        assert_eq!(ds.features.column(1), vec![0.0, 1.0, 0.0]);
        assert_eq!(ds.target, vec![1.0, 0.0, 1.0]);
        assert_eq!(ds.feature_names(), vec!["a", "c"]);
    }

    #[test]
    fn missing_values_become_zero() {
        let csv = "a,b,y\n1,,3\n,x,4\n3,y,5\n";
        let ds = ingest_reader(csv.as_bytes(), Path::new("t.csv"), &schema("y", &["b"])).unwrap();
        assert_eq!(ds.features.row(1), &[0.0, 0.0]);
        assert_eq!(ds.features.get(0, 1), 0.0);
        assert_eq!(ds.features.get(2, 1), 1.0);
    }

    #[test]
    fn ingest_errors() {
        let p = Path::new("t.csv");
        assert!(matches!(
            ingest_reader("a,y\n".as_bytes(), p, &schema("y", &[])),
            Err(Error::EmptyDataset)
        ));
        match ingest_reader("a,y\n1,2\noops,3\n".as_bytes(), p, &schema("y", &[])) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match ingest_reader("a,y\n1,2\n1,2,3\n".as_bytes(), p, &schema("y", &[])) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(ingest_reader("a,y\n1,2\n".as_bytes(), p, &schema("z", &[])).is_err());
    }

    #[test]
    fn null_feature_gets_zero_attribution() {
        let model = |x: &[f64]| 3.0 * x[0] - x[2] * x[0];
        let bg = Matrix::from_rows(&[[0.5, 1.0, -1.0], [1.5, 2.0, 0.0]]).unwrap();
        let a = attribute_instance(&model, &[1.0, 7.0, 2.0], &bg, &McConfig::new(50, 2, 1)).unwrap();
        assert_eq!(a.phi[1], 0.0);
        let total = a.base + a.phi.iter().sum::<f64>();
        assert!((total - model(&[1.0, 7.0, 2.0])).abs() < 1e-12);
    }

    #[test]
    fn additive_model_has_closed_form_attribution() {
        let a = [2.0, -1.0, 0.5, 3.0];
        let model = move |x: &[f64]| x.iter().zip(&a).map(|(x, a)| x * a).sum::<f64>();
        let b = [0.1, 0.2, -0.3, 0.4];
        let bg = Matrix::from_rows(&[b]).unwrap();
        let x = [1.0, 2.0, 3.0, -4.0];
        let r = attribute_instance(&model, &x, &bg, &McConfig::new(3, 1, 9)).unwrap();
        for i in 0..4 {
            assert!((r.phi[i] - a[i] * (x[i] - b[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn speedup_arithmetic() {
        let point = FractionPoint {
            fraction: 1.0 - 1e-9,
            train_rows: 100,
            test_rows: 0,
            rmse: 0.0,
            train_seconds: 1.0,
            predict_seconds: 0.0,
        };
        assert!(speedup_report(&[0.1; 100], &point).unwrap().speedup <= 1.0);
        let point = FractionPoint {
            fraction: 0.1,
            train_rows: 1000,
            test_rows: 9000,
            rmse: 0.1,
            train_seconds: 0.0,
            predict_seconds: 9000.0 * 1e-5,
        };
        let r = speedup_report(&[1e-3], &point).unwrap();
        assert!((r.speedup - 10.0).abs() < 1.0, "{}", r.speedup);
        assert!(matches!(
            speedup_report(&[], &point),
            Err(Error::MissingTimings(_))
        ));
    }

    #[test]
    fn log_fraction_grid() {
        let f = default_fractions();
        assert_eq!(f.len(), 20);
        assert!((f[0] - 0.005).abs() < 1e-15 && (f[19] - 0.5).abs() < 1e-15);
        assert!(f.windows(2).all(|w| w[1] > w[0]));
    }
}
