//! Generalized boosted propensity model: one boosted logistic model per
//! treatment (that treatment versus the rest) whose probabilities are
//! normalized across treatments. The number of trees is chosen by covariate
//! balance.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::balance::{pooled_sds, standardized_bias_with_sd};
use super::tree::{BinnedMatrix, RegressionTree};
use crate::data::{Dataset, GpsMatrix};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct GbmConfig {
    pub max_iter: usize,
    pub shrinkage: f64,
    pub depth: usize,
    pub subsample: f64,
    /// Balance is recorded at iteration 1, every `eval_every` iterations and at `max_iter`.
    pub eval_every: usize,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for GbmConfig {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            shrinkage: 0.01,
            depth: 3,
            subsample: 0.5,
            eval_every: 100,
            min_leaf: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbmModel {
    pub init: Vec<f64>,
    /// `trees[w]` holds the boosting sequence of treatment `w`.
    pub trees: Vec<Vec<RegressionTree>>,
    pub shrinkage: f64,
    pub design_width: usize,
    /// Iteration numbers at which balance was evaluated.
    pub checkpoints: Vec<usize>,
    /// Maximum absolute standardized bias at each checkpoint.
    pub balance_trace: Vec<f64>,
    pub selected_iteration: usize,
}

/// 1-based position of the smallest entry of the balance trace; ties go to
/// the earliest position.
pub fn select_stopping_iteration(trace: &[f64]) -> usize {
    assert!(!trace.is_empty(), "balance trace is empty");
    let mut best = 0;
    for (i, &v) in trace.iter().enumerate() {
        if v < trace[best] {
            best = i;
        }
    }
    best + 1
}

fn normalized_gps(scores: &[Vec<f64>], n: usize) -> Result<GpsMatrix> {
    let z = scores.len();
    let mut m = Matrix::zeros(n, z);
    for i in 0..n {
        let row = m.row_mut(i);
        let mut s = 0.0;
        for w in 0..z {
            row[w] = math::expit(scores[w][i]);
            s += row[w];
        }
        row.iter_mut().for_each(|v| *v /= s);
    }
    GpsMatrix::from_probabilities(m)
}

fn max_bias(d: &Dataset, g: &GpsMatrix, sds: &[f64]) -> Result<f64> {
    let weights: Vec<f64> = d
        .treatment()
        .iter()
        .enumerate()
        .map(|(i, &w)| 1.0 / g.get(i, w))
        .collect();
    Ok(standardized_bias_with_sd(d, &weights, sds)?.max)
}

pub fn fit_gbm(d: &Dataset, config: &GbmConfig) -> Result<GbmModel> {
    let n = d.n();
    if n < 50 {
        return Err(Error::TooFewUnits(n));
    }
    if config.max_iter == 0 || !(config.subsample > 0.0 && config.subsample <= 1.0) {
        return Err(Error::Precondition("GBM needs max_iter >= 1 and subsample in (0, 1]".into()));
    }
    let z = d.z();
    let x = d.design_matrix();
    let binned = BinnedMatrix::new(&x);
    let sds = pooled_sds(d);
    let sizes = d.group_sizes();
    let init: Vec<f64> = sizes
        .iter()
        .map(|&c| {
            let p = (c as f64 / n as f64).clamp(1e-6, 1.0 - 1e-6);
            math::logit(p)
        })
        .collect();
    let mut scores: Vec<Vec<f64>> = init.iter().map(|&f| vec![f; n]).collect();
    let mut trees: Vec<Vec<RegressionTree>> = (0..z).map(|_| Vec::with_capacity(config.max_iter)).collect();
    let mut checkpoints = Vec::new();
    let mut trace = Vec::new();
    let n_sub = ((config.subsample * n as f64) as usize).clamp(1, n);
    let mut resid = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut perm: Vec<usize> = (0..n).collect();
    let mut r = rng::stream(config.seed, &[rng::label::GBM]);
    let treat = d.treatment();

    for it in 1..=config.max_iter {
        for w in 0..z {
            // Partial Fisher–Yates for a subsample without replacement.
            for k in 0..n_sub {
                let j = r.random_range(k..n);
                perm.swap(k, j);
            }
            let rows = &perm[..n_sub];
            for &i in rows {
                let p = math::expit(scores[w][i]);
                let y = if treat[i] == w { 1.0 } else { 0.0 };
                resid[i] = y - p;
                hess[i] = p * (1.0 - p);
            }
            let tree = RegressionTree::grow(&binned, rows, &resid, &hess, config.depth, config.min_leaf);
            for i in 0..n {
                scores[w][i] += config.shrinkage * tree.predict(x.row(i));
            }
            trees[w].push(tree);
        }
        if it == 1 || it % config.eval_every.max(1) == 0 || it == config.max_iter {
            let g = normalized_gps(&scores, n)?;
            checkpoints.push(it);
            trace.push(max_bias(d, &g, &sds)?);
        }
    }
    let selected_iteration = checkpoints[select_stopping_iteration(&trace) - 1];
    Ok(GbmModel {
        init,
        trees,
        shrinkage: config.shrinkage,
        design_width: x.cols(),
        checkpoints,
        balance_trace: trace,
        selected_iteration,
    })
}

/// Propensity rows using the first `iteration` trees of each treatment
/// (the balance-selected iteration when `None`).
pub fn predict_gps_gbm(m: &GbmModel, d: &Dataset, iteration: Option<usize>) -> Result<GpsMatrix> {
    if d.z() != m.trees.len() || d.design_width() != m.design_width {
        return Err(Error::Schema("GBM model and data schema differ".into()));
    }
    let upto = iteration.unwrap_or(m.selected_iteration);
    let x = d.design_matrix();
    let n = d.n();
    let scores: Vec<Vec<f64>> = m
        .trees
        .iter()
        .zip(&m.init)
        .map(|(ts, &f0)| {
            (0..n)
                .map(|i| {
                    f0 + m.shrinkage
                        * ts.iter().take(upto).map(|t| t.predict(x.row(i))).sum::<f64>()
                })
                .collect()
        })
        .collect();
    normalized_gps(&scores, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stopping_rule_examples() {
        assert_eq!(select_stopping_iteration(&[0.5, 0.3, 0.4]), 2);
        assert_eq!(select_stopping_iteration(&[0.2, 0.2]), 1);
    }
}
