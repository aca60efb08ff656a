//! CART regression and binary classification trees, with optional bagging.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    /// Squared-error splits, leaves predict the mean.
    Regression,
    /// Gini splits on 0/1 targets, leaves predict the positive fraction.
    Classification,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 8,
            min_samples_split: 2,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub features: usize,
}

struct Best {
    feature: usize,
    threshold: f64,
    score: f64,
}

/// Impurity times row count, from running sums.
fn impurity(task: Task, count: f64, sum: f64, sum_sq: f64) -> f64 {
    match task {
        Task::Regression => sum_sq - sum * sum / count,
        // Targets are 0/1, so sum counts positives and Gini is 2p(1-p).
        Task::Classification => {
            let p = sum / count;
            2.0 * p * (1.0 - p) * count
        }
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    task: Task,
    cfg: TreeConfig,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn best_split(&self, rows: &[usize]) -> Option<Best> {
        let n = rows.len() as f64;
        let (sum, sum_sq) = rows.iter().fold((0.0, 0.0), |(s, q), &r| {
            (s + self.y[r], q + self.y[r] * self.y[r])
        });
        let parent = impurity(self.task, n, sum, sum_sq);
        if parent <= 1e-12 * n.max(1.0) {
            return None;
        }
        let leaf = self.cfg.min_samples_leaf.max(1);
        let mut best: Option<Best> = None;
        let mut order = rows.to_vec();
        for f in 0..self.x.cols() {
            order.sort_by(|&a, &b| self.x.get(a, f).total_cmp(&self.x.get(b, f)).then(a.cmp(&b)));
            let (mut ls, mut lq) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                let r = order[k];
                ls += self.y[r];
                lq += self.y[r] * self.y[r];
                let (a, b) = (self.x.get(r, f), self.x.get(order[k + 1], f));
                let left = k + 1;
                if a == b || left < leaf || order.len() - left < leaf {
                    continue;
                }
                let nl = left as f64;
                let score =
                    impurity(self.task, nl, ls, lq) + impurity(self.task, n - nl, sum - ls, sum_sq - lq);
                if score < parent - 1e-12 && best.as_ref().is_none_or(|b| score < b.score) {
                    best = Some(Best {
                        feature: f,
                        threshold: a + (b - a) / 2.0,
                        score,
                    });
                }
            }
        }
        best
    }

    fn leaf_value(&self, rows: &[usize]) -> f64 {
        rows.iter().map(|&r| self.y[r]).sum::<f64>() / rows.len() as f64
    }

    fn grow(&mut self, rows: &[usize], depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: self.leaf_value(rows),
        });
        if depth >= self.cfg.max_depth || rows.len() < self.cfg.min_samples_split.max(2) {
            return id;
        }
        let Some(best) = self.best_split(rows) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.x.get(i, best.feature) <= best.threshold);
        let left = self.grow(&l, depth + 1);
        let right = self.grow(&r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }
}

impl DecisionTree {
    /// Fits on the given rows (with repeats allowed, for bootstrap samples).
    pub fn fit_rows(x: &Matrix, y: &[f64], rows: &[usize], task: Task, cfg: &TreeConfig) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::Dimension {
                expected: x.rows(),
                got: y.len(),
            });
        }
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if task == Task::Classification && rows.iter().any(|&r| y[r] != 0.0 && y[r] != 1.0) {
            return Err(Error::Config("classification targets must be 0 or 1".into()));
        }
        let mut b = Builder {
            x,
            y,
            task,
            cfg: *cfg,
            nodes: Vec::new(),
        };
        b.grow(rows, 0);
        Ok(DecisionTree {
            nodes: b.nodes,
            features: x.cols(),
        })
    }

    pub fn fit(x: &Matrix, y: &[f64], task: Task, cfg: &TreeConfig) -> Result<Self> {
        Self::fit_rows(x, y, &(0..x.rows()).collect::<Vec<_>>(), task, cfg)
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Features used by at least one split.
    pub fn used_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

/// One tree, or the mean of bootstrap-trained trees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub task: Task,
    pub trees: Vec<DecisionTree>,
}

impl Forest {
    /// `trees == 1` fits on all rows; more trees each see a bootstrap sample.
    pub fn fit(x: &Matrix, y: &[f64], task: Task, cfg: &TreeConfig, trees: usize, seed: u64) -> Result<Self> {
        if trees == 0 {
            return Err(Error::Config("a forest needs at least one tree".into()));
        }
        let n = x.rows();
        let trees = if trees == 1 {
            vec![DecisionTree::fit(x, y, task, cfg)?]
        } else {
            (0..trees as u64)
                .map(|t| {
                    let mut r = rng::stream(seed, t);
                    let rows: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
                    DecisionTree::fit_rows(x, y, &rows, task, cfg)
                })
                .collect::<Result<_>>()?
        };
        Ok(Forest { task, trees })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}
