//! Gradient-boosted regression trees with squared-error loss, exact greedy
//! split search and gain-based feature importance.

mod format;
mod tree;

pub use tree::{fit_tree, Node, SortedColumns, Tree};

use crate::error::{Error, Result};
use crate::ingest::NormStats;
use crate::matrix::Matrix;

/// Tree depths searched by the paper grid.
pub const GRID_MAX_DEPTH: [usize; 7] = [1, 3, 5, 10, 15, 20, 30];
/// Minimum child weight values searched by the paper grid.
pub const GRID_MIN_CHILD_WEIGHT: [f64; 5] = [1.0, 3.0, 5.0, 7.0, 10.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbdtParams {
    pub max_depth: usize,
    /// Minimum total instance weight in each child of a split.
    pub min_child_weight: f64,
    pub n_trees: usize,
    pub learning_rate: f64,
    /// Recorded in the model fingerprint. Exact greedy training draws no
    /// random numbers.
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            max_depth: 5,
            min_child_weight: 1.0,
            n_trees: 100,
            learning_rate: 0.1,
            seed: 0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::invalid("max_depth must be at least 1"));
        }
        if self.n_trees == 0 {
            return Err(Error::invalid("n_trees must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid("learning_rate must lie in (0, 1]"));
        }
        if !(self.min_child_weight >= 0.0) || !self.min_child_weight.is_finite() {
            return Err(Error::invalid("min_child_weight must be finite and nonnegative"));
        }
        Ok(())
    }

    pub fn with_depth_and_weight(self, max_depth: usize, min_child_weight: f64) -> Self {
        GbdtParams {
            max_depth,
            min_child_weight,
            ..self
        }
    }
}

/// The 7 x 5 hyperparameter grid (depth-major order).
pub fn paper_grid() -> Vec<(usize, f64)> {
    GRID_MAX_DEPTH
        .iter()
        .flat_map(|&d| GRID_MIN_CHILD_WEIGHT.iter().map(move |&w| (d, w)))
        .collect()
}

/// A trained boosted ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthModel {
    pub params: GbdtParams,
    /// Weighted mean of the training labels.
    pub base_score: f64,
    pub trees: Vec<Tree>,
    pub feature_names: Vec<String>,
    pub norm_stats: Option<NormStats>,
    /// Number of training rows.
    pub n_rows: usize,
}

fn weighted_mse(y: &[f64], pred: &[f64], w: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    y.iter()
        .zip(pred)
        .zip(w)
        .map(|((y, p), w)| w * (y - p) * (y - p))
        .sum::<f64>()
        / total
}

/// Trains a model and returns it with the training loss after each round
/// (entry 0 is the loss of the base score alone).
pub fn train_with_history(
    x: &Matrix,
    y: &[f64],
    weights: Option<&[f64]>,
    params: &GbdtParams,
) -> Result<(WealthModel, Vec<f64>)> {
    params.validate()?;
    let n = x.rows();
    if n < 2 {
        return Err(Error::TooFewRows {
            context: "training".into(),
            needed: 2,
            got: n,
        });
    }
    if y.len() != n {
        return Err(Error::Arity {
            expected: n,
            got: y.len(),
        });
    }
    if !x.all_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("NaN or infinite value in training data"));
    }
    let unit;
    let w = match weights {
        Some(w) => {
            if w.len() != n {
                return Err(Error::Arity {
                    expected: n,
                    got: w.len(),
                });
            }
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) || w.iter().sum::<f64>() <= 0.0 {
                return Err(Error::invalid("weights must be nonnegative with a positive sum"));
            }
            w
        }
        None => {
            unit = vec![1.0; n];
            &unit[..]
        }
    };

    let total_w: f64 = w.iter().sum();
    let base_score = y.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / total_w;
    let mut pred = vec![base_score; n];
    let mut history = vec![weighted_mse(y, &pred, w)];
    let sorted = SortedColumns::new(x);
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut residuals = vec![0.0; n];
    for _ in 0..params.n_trees {
        for i in 0..n {
            residuals[i] = y[i] - pred[i];
        }
        let tree = tree::fit_tree_presorted(x, &sorted, &residuals, w, params);
        for (i, p) in pred.iter_mut().enumerate() {
            *p += params.learning_rate * tree.predict_row(x.row(i));
        }
        let loss = weighted_mse(y, &pred, w);
        let prev = *history.last().expect("history starts non-empty");
        debug_assert!(
            loss <= prev * (1.0 + 1e-12) + 1e-300,
            "training loss increased: {prev} -> {loss}"
        );
        history.push(loss);
        trees.push(tree);
    }
    Ok((
        WealthModel {
            params: *params,
            base_score,
            trees,
            feature_names: Vec::new(),
            norm_stats: None,
            n_rows: n,
        },
        history,
    ))
}

pub fn train(x: &Matrix, y: &[f64], weights: Option<&[f64]>, params: &GbdtParams) -> Result<WealthModel> {
    train_with_history(x, y, weights, params).map(|(m, _)| m)
}

/// Per-feature split statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct GainImportance {
    /// Mean split gain over every split on the feature, 0 when unused.
    pub mean_gain: Vec<f64>,
    pub split_count: Vec<usize>,
}

impl WealthModel {
    pub fn with_metadata(mut self, feature_names: Vec<String>, norm_stats: Option<NormStats>) -> Self {
        self.feature_names = feature_names;
        self.norm_stats = norm_stats;
        self
    }

    /// Number of input features the trees may reference.
    pub fn arity(&self) -> Option<usize> {
        if !self.feature_names.is_empty() {
            return Some(self.feature_names.len());
        }
        self.trees
            .iter()
            .flat_map(|t| t.splits().map(|(f, _)| f + 1))
            .max()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.base_score
            + self.params.learning_rate * self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if !self.feature_names.is_empty() && x.cols() != self.feature_names.len() {
            return Err(Error::Arity {
                expected: self.feature_names.len(),
                got: x.cols(),
            });
        }
        if let Some(needed) = self.arity() {
            if x.cols() < needed {
                return Err(Error::Arity {
                    expected: needed,
                    got: x.cols(),
                });
            }
        }
        Ok(x.iter_rows().map(|r| self.predict_row(r)).collect())
    }

    pub fn gain_importance(&self, n_features: usize) -> GainImportance {
        let mut total = vec![0.0; n_features];
        let mut split_count = vec![0usize; n_features];
        for t in &self.trees {
            for (f, gain) in t.splits() {
                if f < n_features {
                    total[f] += gain;
                    split_count[f] += 1;
                }
            }
        }
        let mean_gain = total
            .iter()
            .zip(&split_count)
            .map(|(g, &c)| if c > 0 { g / c as f64 } else { 0.0 })
            .collect();
        GainImportance {
            mean_gain,
            split_count,
        }
    }
}
