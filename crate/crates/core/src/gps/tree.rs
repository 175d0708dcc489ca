//! Least-squares regression trees on pre-binned features, the base learner
//! of the boosted propensity model.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::stats;

const MAX_BINS: usize = 64;

/// Candidate split thresholds per feature and the bin index of every cell.
#[derive(Debug, Clone)]
pub(crate) struct BinnedMatrix {
    pub thresholds: Vec<Vec<f64>>,
    bins: Vec<u8>,
    cols: usize,
}

impl BinnedMatrix {
    pub fn new(x: &Matrix) -> Self {
        let (rows, cols) = (x.rows(), x.cols());
        let mut thresholds = Vec::with_capacity(cols);
        for j in 0..cols {
            let col = stats::sorted(&x.column(j));
            let mut uniq = col.clone();
            uniq.dedup();
            let mut t: Vec<f64> = if uniq.len() <= MAX_BINS {
                uniq.clone()
            } else {
                (1..MAX_BINS)
                    .map(|k| stats::nearest_rank(&col, k as f64 / MAX_BINS as f64))
                    .collect()
            };
            t.dedup();
            // Splitting at the maximum sends everything left.
            if let Some(&last) = uniq.last() {
                t.retain(|&v| v < last);
            }
            thresholds.push(t);
        }
        let mut bins = vec![0u8; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                let v = x[(i, j)];
                bins[i * cols + j] = thresholds[j].partition_point(|&t| t < v) as u8;
            }
        }
        Self {
            thresholds,
            bins,
            cols,
        }
    }

    #[inline]
    fn bin(&self, i: usize, j: usize) -> usize {
        self.bins[i * self.cols + j] as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Binary regression tree; an observation goes left when
/// `x[feature] <= threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match self.nodes[idx] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => idx = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Grows a depth-limited tree on `rows`, splitting on least squares for
    /// `resid` and setting leaves to the Newton step `Σ resid / Σ hess`.
    pub(crate) fn grow(
        x: &BinnedMatrix,
        rows: &[usize],
        resid: &[f64],
        hess: &[f64],
        max_depth: usize,
        min_leaf: usize,
    ) -> Self {
        let mut tree = RegressionTree { nodes: Vec::new() };
        tree.build(x, rows.to_vec(), resid, hess, 0, max_depth, min_leaf);
        tree
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        &mut self,
        x: &BinnedMatrix,
        rows: Vec<usize>,
        resid: &[f64],
        hess: &[f64],
        depth: usize,
        max_depth: usize,
        min_leaf: usize,
    ) -> usize {
        let idx = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });
        let split = if depth < max_depth && rows.len() >= 2 * min_leaf {
            best_split(x, &rows, resid, min_leaf)
        } else {
            None
        };
        match split {
            None => {
                let s: f64 = rows.iter().map(|&i| resid[i]).sum();
                let h: f64 = rows.iter().map(|&i| hess[i]).sum();
                let value = if h > 1e-12 { s / h } else { 0.0 };
                self.nodes[idx] = Node::Leaf { value };
            }
            Some((feature, bin)) => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.into_iter().partition(|&i| x.bin(i, feature) <= bin);
                let left = self.build(x, l, resid, hess, depth + 1, max_depth, min_leaf);
                let right = self.build(x, r, resid, hess, depth + 1, max_depth, min_leaf);
                self.nodes[idx] = Node::Split {
                    feature,
                    threshold: x.thresholds[feature][bin],
                    left,
                    right,
                };
            }
        }
        idx
    }
}

fn best_split(x: &BinnedMatrix, rows: &[usize], resid: &[f64], min_leaf: usize) -> Option<(usize, usize)> {
    let n = rows.len() as f64;
    let total: f64 = rows.iter().map(|&i| resid[i]).sum();
    let parent = total * total / n;
    let mut best: Option<(usize, usize)> = None;
    let mut best_gain = 1e-12;
    let mut sums = [0.0f64; MAX_BINS + 1];
    let mut counts = [0usize; MAX_BINS + 1];
    for j in 0..x.cols {
        let nt = x.thresholds[j].len();
        if nt == 0 {
            continue;
        }
        sums[..=nt].iter_mut().for_each(|v| *v = 0.0);
        counts[..=nt].iter_mut().for_each(|v| *v = 0);
        for &i in rows {
            let b = x.bin(i, j);
            sums[b] += resid[i];
            counts[b] += 1;
        }
        let mut sl = 0.0;
        let mut nl = 0usize;
        for b in 0..nt {
            sl += sums[b];
            nl += counts[b];
            let nr = rows.len() - nl;
            if nl < min_leaf {
                continue;
            }
            if nr < min_leaf {
                break;
            }
            let sr = total - sl;
            let gain = sl * sl / nl as f64 + sr * sr / nr as f64 - parent;
            if gain > best_gain {
                best_gain = gain;
                best = Some((j, b));
            }
        }
    }
    best
}
