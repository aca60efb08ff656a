//! Feedforward payoff networks trained with backpropagation and Adam.
//!
//! Hidden layers are ReLU with inverted dropout. The payoff head is a softmax
//! over the player slots, optionally followed by a sigmoid least-core value;
//! the linear head leaves outputs unconstrained. Loss is the mean squared
//! error over every output column.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{s, Array1, Array2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{GameDataset, Layout};
use crate::error::{Error, Result};
use crate::games::{SolutionVector, WeightedVotingGame};
use crate::matrix::Matrix;
use crate::rng::{self, derive_seed};
use crate::solver::Concept;

pub const MODEL_FORMAT: &str = "coopsolve.model/1";

const SPLIT_SALT: u64 = 0x53_504c_4954;
const INIT_STREAM: u64 = 0;
const TRAIN_STREAM: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OutputHead {
    /// Softmax payoffs, optionally followed by a sigmoid least-core value.
    Payoff {
        epsilon: bool,
    },
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub dropout: f64,
    /// Payoff slots, or the full width of a linear head.
    pub outputs: usize,
    pub head: OutputHead,
}

impl MlpArchitecture {
    /// Three hidden layers of 128 units, dropout 0.1.
    pub fn payoff(input: usize, outputs: usize, epsilon: bool) -> Self {
        MlpArchitecture {
            input,
            hidden: vec![128; 3],
            dropout: 0.1,
            outputs,
            head: OutputHead::Payoff { epsilon },
        }
    }

    /// Payoff network sized for a dataset's features and concept.
    pub fn for_dataset(ds: &GameDataset) -> Self {
        let width = ds.meta.layout.width();
        Self::payoff(width, width, ds.concept().has_epsilon())
    }

    pub fn linear(input: usize, outputs: usize) -> Self {
        MlpArchitecture {
            input,
            hidden: vec![128; 3],
            dropout: 0.1,
            outputs,
            head: OutputHead::Linear,
        }
    }

    pub fn with_hidden(mut self, hidden: Vec<usize>) -> Self {
        self.hidden = hidden;
        self
    }

    pub fn with_dropout(mut self, dropout: f64) -> Self {
        self.dropout = dropout;
        self
    }

    pub fn has_epsilon(&self) -> bool {
        matches!(self.head, OutputHead::Payoff { epsilon: true })
    }

    pub fn output_dim(&self) -> usize {
        self.outputs + usize::from(self.has_epsilon())
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut prev = self.input;
        for &h in &self.hidden {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.output_dim()));
        dims
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.input == 0 || self.outputs == 0 || self.hidden.contains(&0) {
            return Err(Error::Config(format!(
                "layer widths must be at least 1 (input {}, hidden {:?}, outputs {})",
                self.input, self.hidden, self.outputs
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Dense {
    /// `inputs x outputs`
    w: Array2<f64>,
    b: Array1<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            w: Array2::zeros((inputs, outputs)),
            b: Array1::zeros(outputs),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub seed: u64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    /// Validation loss of the kept parameters, or final training loss without a validation set.
    pub best_loss: f64,
    pub run_index: usize,
    pub runs: usize,
    pub concept: Option<Concept>,
    pub layout: Option<Layout>,
    pub dataset_seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PayoffModel {
    arch: MlpArchitecture,
    layers: Vec<Dense>,
    pub meta: ModelMeta,
}

struct Cache {
    /// Input to each layer.
    inputs: Vec<Array2<f64>>,
    /// ReLU derivative times dropout scale, per hidden layer.
    masks: Vec<Array2<f64>>,
    out: Array2<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in v.iter_mut() {
        *x /= total;
    }
}

fn to_array(m: &Matrix) -> Array2<f64> {
    Array2::from_shape_vec((m.rows(), m.cols()), m.as_slice().to_vec())
        .expect("matrix dimensions are consistent")
}

fn to_matrix(a: &Array2<f64>) -> Matrix {
    let (r, c) = a.dim();
    Matrix::from_vec(r, c, a.iter().copied().collect()).expect("array dimensions are consistent")
}

impl PayoffModel {
    /// Kaiming-uniform hidden layers, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` output layer, zero biases.
    pub fn init(arch: &MlpArchitecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = rng::stream(seed, INIT_STREAM);
        let dims = arch.layer_dims();
        let last = dims.len() - 1;
        let layers = dims
            .iter()
            .enumerate()
            .map(|(l, &(fan_in, fan_out))| {
                let bound = if l == last {
                    1.0 / (fan_in as f64).sqrt()
                } else {
                    (6.0 / fan_in as f64).sqrt()
                };
                let w = Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-bound..=bound));
                Dense {
                    w,
                    b: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(PayoffModel {
            arch: arch.clone(),
            layers,
            meta: ModelMeta {
                seed,
                runs: 1,
                ..Default::default()
            },
        })
    }

    pub fn architecture(&self) -> &MlpArchitecture {
        &self.arch
    }

    /// Weight matrix (`inputs x outputs`, row-major) and bias of layer `l`.
    pub fn layer(&self, l: usize) -> (Matrix, Vec<f64>) {
        (to_matrix(&self.layers[l].w), self.layers[l].b.to_vec())
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    fn apply_head(&self, z: &mut Array2<f64>) {
        if let OutputHead::Payoff { epsilon } = self.arch.head {
            let k = self.arch.outputs;
            for mut row in z.rows_mut() {
                softmax_in_place(
                    row.slice_mut(s![..k])
                        .as_slice_mut()
                        .expect("rows are contiguous"),
                );
                if epsilon {
                    row[k] = sigmoid(row[k]);
                }
            }
        }
    }

    fn forward_cached<R: Rng + ?Sized>(&self, x: Array2<f64>, mut rng: Option<&mut R>) -> Cache {
        let last = self.layers.len() - 1;
        let keep = 1.0 - self.arch.dropout;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut masks = Vec::with_capacity(last);
        let mut a = x;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.w) + &layer.b;
            inputs.push(a);
            if l == last {
                self.apply_head(&mut z);
                return Cache {
                    inputs,
                    masks,
                    out: z,
                };
            }
            let mut mask = z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
            if let Some(r) = rng.as_deref_mut() {
                if self.arch.dropout > 0.0 {
                    mask.mapv_inplace(|m| if r.random::<f64>() < keep { m / keep } else { 0.0 });
                }
            }
            z *= &mask;
            masks.push(mask);
            a = z;
        }
        unreachable!("a network has at least one layer")
    }

    /// Mean squared error of `cache.out` against `target` and its parameter gradient.
    fn backward(&self, cache: &Cache, target: &Array2<f64>) -> (f64, Vec<Dense>) {
        let (b, k) = cache.out.dim();
        let count = (b * k) as f64;
        let diff = &cache.out - target;
        let loss = diff.iter().map(|d| d * d).sum::<f64>() / count;
        let mut g = diff * (2.0 / count);
        if let OutputHead::Payoff { epsilon } = self.arch.head {
            let m = self.arch.outputs;
            for (mut gr, yr) in g.rows_mut().into_iter().zip(cache.out.rows()) {
                let dot: f64 = (0..m).map(|j| gr[j] * yr[j]).sum();
                for j in 0..m {
                    gr[j] = yr[j] * (gr[j] - dot);
                }
                if epsilon {
                    gr[m] *= yr[m] * (1.0 - yr[m]);
                }
            }
        }
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let gw = cache.inputs[l].t().dot(&g);
            let gb = g.sum_axis(Axis(0));
            if l > 0 {
                g = g.dot(&self.layers[l].w.t()) * &cache.masks[l - 1];
            }
            grads.push(Dense { w: gw, b: gb });
        }
        grads.reverse();
        (loss, grads)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.arch.input {
            return Err(Error::Dimension {
                expected: self.arch.input,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite model input".into()));
        }
        Ok(())
    }

    /// Evaluation-mode outputs for one input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let a = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("one row");
        Ok(self
            .forward_cached::<rng::StreamRng>(a, None)
            .out
            .into_raw_vec_and_offset()
            .0)
    }

    /// Training-mode outputs: dropout active, masks drawn from `rng`.
    pub fn forward_train<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let a = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("one row");
        Ok(self.forward_cached(a, Some(rng)).out.into_raw_vec_and_offset().0)
    }

    /// Evaluation-mode outputs for every row of `x`.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.arch.input {
            return Err(Error::Dimension {
                expected: self.arch.input,
                got: x.cols(),
            });
        }
        if x.is_empty() {
            return Ok(Matrix::zeros(0, self.arch.output_dim()));
        }
        if x.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite model input".into()));
        }
        Ok(to_matrix(
            &self.forward_cached::<rng::StreamRng>(to_array(x), None).out,
        ))
    }

    /// Mean squared error over all outputs, evaluation mode.
    pub fn loss(&self, x: &Matrix, y: &Matrix) -> Result<f64> {
        let p = self.predict(x)?;
        if p.cols() != y.cols() || p.rows() != y.rows() {
            return Err(Error::Dimension {
                expected: p.cols(),
                got: y.cols(),
            });
        }
        let n = p.as_slice().len().max(1) as f64;
        Ok(p.as_slice()
            .iter()
            .zip(y.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n)
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.w.iter_mut().chain(l.b.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            format: MODEL_FORMAT.into(),
            architecture: self.arch.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    inputs: l.w.nrows(),
                    outputs: l.w.ncols(),
                    weights: l.w.iter().copied().collect(),
                    bias: l.b.to_vec(),
                })
                .collect(),
            meta: self.meta.clone(),
        }
    }

    pub fn from_file(file: ModelFile) -> Result<Self> {
        if file.format != MODEL_FORMAT {
            return Err(Error::Config(format!(
                "unsupported model format `{}`",
                file.format
            )));
        }
        file.architecture.validate()?;
        let dims = file.architecture.layer_dims();
        if dims.len() != file.layers.len() {
            return Err(Error::Dimension {
                expected: dims.len(),
                got: file.layers.len(),
            });
        }
        let layers = dims
            .iter()
            .zip(file.layers)
            .map(|(&(i, o), l)| {
                if (l.inputs, l.outputs) != (i, o) || l.bias.len() != o {
                    return Err(Error::Dimension {
                        expected: i * o,
                        got: l.weights.len(),
                    });
                }
                let w = Array2::from_shape_vec((i, o), l.weights).map_err(|_| Error::Dimension {
                    expected: i * o,
                    got: 0,
                })?;
                Ok(Dense {
                    w,
                    b: Array1::from(l.bias),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let model = PayoffModel {
            arch: file.architecture,
            layers,
            meta: file.meta,
        };
        if !model.is_finite() {
            return Err(Error::Numerical("model file holds non-finite parameters".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, &self.to_file())?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: ModelFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        Self::from_file(file)
    }
}

/// On-disk model: architecture, row-major weights per layer, training metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub architecture: MlpArchitecture,
    pub layers: Vec<LayerFile>,
    pub meta: ModelMeta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerFile {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// Epochs always run before early stopping may trigger.
    pub baseline_epochs: usize,
    /// Epochs without validation improvement that end training.
    pub patience: usize,
    pub early_stopping: bool,
    pub train_fraction: f64,
    pub learning_rate: f64,
    pub adam_eps: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// L2 penalty on weight matrices, added to the gradient.
    pub weight_decay: f64,
    /// Rows per step; 0 means the whole training set.
    pub batch_size: usize,
    /// Independent initialisations; the one with the lowest validation loss is kept.
    pub runs: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn fixed(seed: u64) -> Self {
        TrainConfig {
            max_epochs: 6000,
            baseline_epochs: 500,
            patience: 75,
            early_stopping: true,
            train_fraction: 0.7,
            learning_rate: 1e-4,
            adam_eps: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            weight_decay: 0.0,
            batch_size: 128,
            runs: 1,
            seed,
        }
    }

    pub fn variable(seed: u64) -> Self {
        TrainConfig {
            max_epochs: 15000,
            ..Self::fixed(seed)
        }
    }

    /// Fixed epoch count, no early stopping.
    pub fn epochs(epochs: usize, seed: u64) -> Self {
        TrainConfig {
            max_epochs: epochs,
            early_stopping: false,
            ..Self::fixed(seed)
        }
    }

    /// Default for a dataset's layout.
    pub fn for_layout(layout: &Layout, seed: u64) -> Self {
        if layout.is_variable() {
            Self::variable(seed)
        } else {
            Self::fixed(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train fraction must lie strictly between 0 and 1");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.max_epochs == 0 || self.runs == 0 {
            return bad("need at least one epoch and one run");
        }
        if !(self.learning_rate > 0.0) || !(self.adam_eps > 0.0) {
            return bad("learning rate and Adam epsilon must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight decay must be non-negative");
        }
        Ok(())
    }
}

struct Adam {
    m: Vec<Dense>,
    v: Vec<Dense>,
    t: i32,
}

impl Adam {
    fn new(layers: &[Dense]) -> Self {
        let zeros = || {
            layers
                .iter()
                .map(|l| Dense::zeros(l.w.nrows(), l.w.ncols()))
                .collect()
        };
        Adam {
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    fn step(&mut self, layers: &mut [Dense], grads: &[Dense], cfg: &TrainConfig) {
        self.t += 1;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let bc1 = 1.0 - b1.powi(self.t);
        let bc2 = 1.0 - b2.powi(self.t);
        let lr = cfg.learning_rate;
        let eps = cfg.adam_eps;
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
        };
        for (((p, g), m), v) in layers.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            Zip::from(&mut p.w)
                .and(&g.w)
                .and(&mut m.w)
                .and(&mut v.w)
                .for_each(|p, &g, m, v| {
                    let g = g + cfg.weight_decay * *p;
                    update(p, g, m, v)
                });
            Zip::from(&mut p.b)
                .and(&g.b)
                .and(&mut m.b)
                .and(&mut v.b)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub best_val_loss: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: PayoffModel,
    /// Curve of the selected run.
    pub curve: Vec<EpochStats>,
    /// Selection loss of every run, in run order.
    pub run_losses: Vec<f64>,
}

/// Shuffled train/validation row indices.
pub fn split_indices(len: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if len < 2 {
        return Err(Error::Config(format!(
            "need at least two rows to split, got {len}"
        )));
    }
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(&mut rng::stream(derive_seed(seed, SPLIT_SALT), 0));
    let n_train = ((len as f64 * train_fraction).round() as usize).clamp(1, len - 1);
    let val = idx.split_off(n_train);
    Ok((idx, val))
}

fn train_run(
    x: &Array2<f64>,
    y: &Array2<f64>,
    val: Option<(&Array2<f64>, &Array2<f64>)>,
    arch: &MlpArchitecture,
    cfg: &TrainConfig,
    run: usize,
) -> Result<(PayoffModel, Vec<EpochStats>, f64)> {
    let seed = if cfg.runs == 1 {
        cfg.seed
    } else {
        derive_seed(cfg.seed, run as u64)
    };
    let mut model = PayoffModel::init(arch, seed)?;
    let mut rng = rng::stream(seed, TRAIN_STREAM);
    let mut adam = Adam::new(&model.layers);
    let rows = x.nrows();
    let batch = if cfg.batch_size == 0 {
        rows
    } else {
        cfg.batch_size.min(rows)
    };
    let mut order: Vec<usize> = (0..rows).collect();
    let mut curve = Vec::new();
    let mut best: Option<(f64, usize, Vec<Dense>)> = None;
    let mut since_best = 0;
    let mut last_train = f64::INFINITY;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            let xb = x.select(Axis(0), chunk);
            let yb = y.select(Axis(0), chunk);
            let cache = model.forward_cached(xb, Some(&mut rng));
            let (loss, grads) = model.backward(&cache, &yb);
            if !loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    detail: format!("non-finite training loss in run {run}"),
                });
            }
            adam.step(&mut model.layers, &grads, cfg);
            total += loss * chunk.len() as f64;
        }
        last_train = total / rows as f64;
        let val_loss = match val {
            Some((xv, yv)) => {
                let out = model.forward_cached::<rng::StreamRng>(xv.clone(), None).out;
                let l = (&out - yv).mapv(|d| d * d).mean().unwrap_or(0.0);
                if !l.is_finite() {
                    return Err(Error::Training {
                        epoch,
                        detail: format!("non-finite validation loss in run {run}"),
                    });
                }
                Some(l)
            }
            None => None,
        };
        if let Some(l) = val_loss {
            if best.as_ref().is_none_or(|(b, _, _)| l < *b) {
                best = Some((l, epoch, model.layers.clone()));
                since_best = 0;
            } else {
                since_best += 1;
            }
        }
        curve.push(EpochStats {
            epoch,
            train_loss: last_train,
            val_loss,
            best_val_loss: best.as_ref().map(|b| b.0),
        });
        if cfg.early_stopping && val.is_some() && epoch >= cfg.baseline_epochs && since_best >= cfg.patience {
            break;
        }
    }

    let epochs_run = curve.len();
    let (loss, best_epoch) = match best {
        Some((l, e, layers)) => {
            model.layers = layers;
            (l, e)
        }
        None => (last_train, epochs_run),
    };
    model.meta = ModelMeta {
        seed,
        epochs_run,
        best_epoch,
        best_loss: loss,
        run_index: run,
        runs: cfg.runs,
        ..Default::default()
    };
    Ok((model, curve, loss))
}

/// Trains on explicit matrices; without a validation set the final parameters are kept.
pub fn fit(
    x: &Matrix,
    y: &Matrix,
    val: Option<(&Matrix, &Matrix)>,
    arch: &MlpArchitecture,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    arch.validate()?;
    let check = |m: &Matrix, cols: usize| {
        if m.cols() != cols {
            Err(Error::Dimension {
                expected: cols,
                got: m.cols(),
            })
        } else {
            Ok(())
        }
    };
    check(x, arch.input)?;
    check(y, arch.output_dim())?;
    if x.rows() != y.rows() {
        return Err(Error::Dimension {
            expected: x.rows(),
            got: y.rows(),
        });
    }
    if x.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some((xv, yv)) = val {
        check(xv, arch.input)?;
        check(yv, arch.output_dim())?;
        if xv.is_empty() || xv.rows() != yv.rows() {
            return Err(Error::Config(
                "validation set must be non-empty and aligned".into(),
            ));
        }
    }
    let xa = to_array(x);
    let ya = to_array(y);
    let va = val.map(|(a, b)| (to_array(a), to_array(b)));
    let runs: Vec<(PayoffModel, Vec<EpochStats>, f64)> = (0..cfg.runs)
        .into_par_iter()
        .map(|r| train_run(&xa, &ya, va.as_ref().map(|(a, b)| (a, b)), arch, cfg, r))
        .collect::<Result<_>>()?;
    let run_losses: Vec<f64> = runs.iter().map(|r| r.2).collect();
    let best = run_losses
        .iter()
        .enumerate()
        .fold(0, |b, (i, &l)| if l < run_losses[b] { i } else { b });
    let (model, curve, _) = runs.into_iter().nth(best).expect("at least one run");
    Ok(TrainOutcome {
        model,
        curve,
        run_losses,
    })
}

/// Trains on a game dataset with a shuffled train/validation split.
pub fn train(ds: &GameDataset, arch: &MlpArchitecture, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (tr, va) = split_indices(ds.len(), cfg.train_fraction, cfg.seed)?;
    let xv = ds.features.select_rows(&va);
    let yv = ds.labels.select_rows(&va);
    let mut outcome = fit(
        &ds.features.select_rows(&tr),
        &ds.labels.select_rows(&tr),
        Some((&xv, &yv)),
        arch,
        cfg,
    )?;
    outcome.model.meta.concept = Some(ds.concept());
    outcome.model.meta.layout = Some(ds.meta.layout.clone());
    outcome.model.meta.dataset_seed = Some(ds.meta.seed);
    Ok(outcome)
}

/// Largest relative gap between backpropagated and central-difference gradients.
///
/// Relative error is `|a - f| / max(|a| + |f|, 1e-6)`, so gradients at
/// rounding-noise scale are compared absolutely.
pub fn grad_check(arch: &MlpArchitecture, seed: u64) -> Result<f64> {
    let arch = arch.clone().with_dropout(0.0);
    let mut model = PayoffModel::init(&arch, seed)?;
    let mut rng = rng::stream(seed, 7);
    for v in model.params_mut() {
        *v += rng.random_range(-0.1..0.1);
    }
    let rows = 5;
    let x = Array2::from_shape_simple_fn((rows, arch.input), || rng.random_range(-1.0..1.0));
    let k = arch.output_dim();
    let mut y = Array2::from_shape_simple_fn((rows, k), || rng.random::<f64>());
    if let OutputHead::Payoff { .. } = arch.head {
        for mut row in y.rows_mut() {
            let total: f64 = row.slice(s![..arch.outputs]).sum();
            row.slice_mut(s![..arch.outputs]).mapv_inplace(|v| v / total);
        }
    }
    let loss_at = |m: &PayoffModel| {
        let out = m.forward_cached::<rng::StreamRng>(x.clone(), None).out;
        (&out - &y).mapv(|d| d * d).mean().unwrap_or(0.0)
    };
    let cache = model.forward_cached::<rng::StreamRng>(x.clone(), None);
    let (_, grads) = model.backward(&cache, &y);
    let analytic: Vec<f64> = grads
        .iter()
        .flat_map(|g| g.w.iter().chain(g.b.iter()).copied())
        .collect();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = *model.params_mut().nth(i).expect("parameter index");
        *model.params_mut().nth(i).expect("parameter index") = orig + h;
        let up = loss_at(&model);
        *model.params_mut().nth(i).expect("parameter index") = orig - h;
        let down = loss_at(&model);
        *model.params_mut().nth(i).expect("parameter index") = orig;
        let f = (up - down) / (2.0 * h);
        worst = worst.max((a - f).abs() / (a.abs() + f.abs()).max(1e-6));
    }
    Ok(worst)
}

/// Payoffs (and least-core value) predicted for `game`.
///
/// Variable-layout models see the normalized weights in the first `n` slots;
/// payoff mass on padded slots is dropped and the rest rescaled to sum to one.
/// The least-core value is passed through unchanged.
pub fn predict_payoffs(model: &PayoffModel, game: &WeightedVotingGame) -> Result<SolutionVector> {
    let arch = model.architecture();
    if !matches!(arch.head, OutputHead::Payoff { .. }) {
        return Err(Error::Config("model has no payoff head".into()));
    }
    let n = game.n();
    let slots = arch.outputs;
    let variable = model.meta.layout.as_ref().is_some_and(Layout::is_variable);
    if n > slots {
        return Err(Error::Capacity { n, capacity: slots });
    }
    if !variable && n != slots {
        return Err(Error::Dimension {
            expected: slots,
            got: n,
        });
    }
    let mut x = vec![0.0; arch.input];
    x[..n].copy_from_slice(&game.normalized_weights());
    let out = model.forward(&x)?;
    let payoffs = redistribute(&out[..slots], &(0..n).collect::<Vec<_>>())?;
    Ok(match arch.has_epsilon() {
        true => SolutionVector::with_lcv(payoffs, out[slots]),
        false => SolutionVector::new(payoffs),
    })
}

/// Mass on `players` slots rescaled to sum to one, in the order given.
pub fn redistribute(raw: &[f64], players: &[usize]) -> Result<Vec<f64>> {
    let total: f64 = players.iter().map(|&i| raw[i]).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Numerical(format!(
            "predicted mass on real players is {total}; cannot redistribute"
        )));
    }
    Ok(players.iter().map(|&i| raw[i] / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(head: OutputHead) -> MlpArchitecture {
        MlpArchitecture {
            input: 3,
            hidden: vec![5, 4],
            dropout: 0.0,
            outputs: 3,
            head,
        }
    }

    #[test]
    fn payoff_head_is_a_simplex() {
        let m = PayoffModel::init(&tiny(OutputHead::Payoff { epsilon: true }), 1).unwrap();
        let out = m.forward(&[0.3, -2.0, 5.0]).unwrap();
        assert_eq!(out.len(), 4);
        assert!((out[..3].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(out[3] > 0.0 && out[3] < 1.0);
    }

    #[test]
    fn zero_output_layer_gives_uniform_payoffs_and_half_epsilon() {
        let mut m = PayoffModel::init(&tiny(OutputHead::Payoff { epsilon: true }), 1).unwrap();
        let last = m.layers.len() - 1;
        m.layers[last].w.fill(0.0);
        let out = m.forward(&[1.0, 2.0, 3.0]).unwrap();
        for p in &out[..3] {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(out[3], 0.5);
    }

    #[test]
    fn input_checks() {
        let m = PayoffModel::init(&tiny(OutputHead::Linear), 1).unwrap();
        assert!(matches!(m.forward(&[1.0]), Err(Error::Dimension { .. })));
        assert!(matches!(
            m.forward(&[1.0, f64::NAN, 0.0]),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn gradients_match_finite_differences() {
        for head in [
            OutputHead::Linear,
            OutputHead::Payoff { epsilon: false },
            OutputHead::Payoff { epsilon: true },
        ] {
            let e = grad_check(&tiny(head), 3).unwrap();
            assert!(e < 1e-4, "{head:?}: {e}");
        }
        let e = grad_check(&tiny(OutputHead::Linear).with_hidden(vec![]), 3).unwrap();
        assert!(e < 1e-6, "{e}");
    }

    #[test]
    fn dropout_only_in_training_mode() {
        let arch = tiny(OutputHead::Linear).with_dropout(0.5);
        let m = PayoffModel::init(&arch, 2).unwrap();
        let x = [0.5, 0.5, 0.5];
        assert_eq!(m.forward(&x).unwrap(), m.forward(&x).unwrap());
        let mut rng = rng::stream(0, 0);
        let a = m.forward_train(&x, &mut rng).unwrap();
        let b = m.forward_train(&x, &mut rng).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn memorises_a_constant_target() {
        let target = [0.6, 0.3, 0.1];
        let x = Matrix::from_rows(&vec![vec![0.2, 0.5, 0.3]; 40]).unwrap();
        let y = Matrix::from_rows(&vec![target.to_vec(); 40]).unwrap();
        let arch = tiny(OutputHead::Payoff { epsilon: false });
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            ..TrainConfig::epochs(300, 4)
        };
        let out = fit(&x, &y, None, &arch, &cfg).unwrap();
        let p = out.model.forward(&[0.2, 0.5, 0.3]).unwrap();
        let mae: f64 = p.iter().zip(target).map(|(a, b)| (a - b).abs()).sum::<f64>() / 3.0;
        assert!(mae < 1e-2, "{p:?}");
    }

    #[test]
    fn training_is_deterministic_and_curve_is_monotone() {
        let x = Matrix::from_rows(
            &(0..30)
                .map(|i| vec![i as f64 / 30.0, 1.0 - i as f64 / 30.0, 0.5])
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let y = Matrix::from_rows(
            &(0..30)
                .map(|i| vec![i as f64 / 30.0, 1.0 - i as f64 / 30.0, 0.0])
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let arch = tiny(OutputHead::Payoff { epsilon: false }).with_dropout(0.1);
        let cfg = TrainConfig {
            max_epochs: 60,
            baseline_epochs: 10,
            patience: 5,
            batch_size: 8,
            runs: 2,
            ..TrainConfig::fixed(9)
        };
        let (tr, va) = split_indices(30, 0.7, 9).unwrap();
        let xv = x.select_rows(&va);
        let yv = y.select_rows(&va);
        let xt = x.select_rows(&tr);
        let yt = y.select_rows(&tr);
        let a = fit(&xt, &yt, Some((&xv, &yv)), &arch, &cfg).unwrap();
        let b = fit(&xt, &yt, Some((&xv, &yv)), &arch, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.run_losses.len(), 2);
        let best: Vec<f64> = a.curve.iter().map(|e| e.best_val_loss.unwrap()).collect();
        assert!(best.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(a.model.meta.best_loss, *best.last().unwrap());
    }

    #[test]
    fn redistribution_drops_padded_mass() {
        let p = redistribute(&[0.2, 0.2, 0.1, 0.5], &[0, 1, 2]).unwrap();
        for (a, b) in p.iter().zip([0.4, 0.4, 0.2]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(redistribute(&[0.0, 1.0], &[0]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let m = PayoffModel::init(&tiny(OutputHead::Payoff { epsilon: true }), 5).unwrap();
        let json = serde_json::to_string(&m.to_file()).unwrap();
        let back = PayoffModel::from_file(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, m);
        let mut bad = m.to_file();
        bad.layers[0].weights.pop();
        assert!(PayoffModel::from_file(bad).is_err());
    }

    #[test]
    fn variable_model_checks_capacity() {
        let mut m = PayoffModel::init(&MlpArchitecture::payoff(4, 4, false).with_hidden(vec![8]), 1).unwrap();
        m.meta.layout = Some(Layout::Variable {
            max_players: 4,
            player_counts: vec![2, 3],
        });
        let g = WeightedVotingGame::new(vec![1.0; 3], 2.0).unwrap();
        let p = predict_payoffs(&m, &g).unwrap();
        assert!((p.total() - 1.0).abs() < 1e-12);
        let big = WeightedVotingGame::new(vec![1.0; 5], 2.0).unwrap();
        assert!(matches!(
            predict_payoffs(&m, &big),
            Err(Error::Capacity { n: 5, capacity: 4 })
        ));
    }
}
