use alloc::vec;
use alloc::vec::Vec;

use super::tree::{SplitRule, Tree, TreeNode};
use crate::data::{CausalEstimate, Dataset, Estimand, Interval, TreatmentPair};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;
use crate::stats;

/// Retained ensembles of a probit BART fit.
#[derive(Debug, Clone, PartialEq)]
pub struct BartPosterior {
    /// `Φ^{-1}(ȳ)`, added to every ensemble sum.
    pub offset: f64,
    pub n_covariates: usize,
    pub n_treatments: usize,
    /// One ensemble per retained draw.
    pub draws: Vec<Vec<Tree>>,
    /// Posterior mean of the in-sample fitted probabilities (empty when the
    /// posterior was assembled by hand).
    pub fitted_mean: Vec<f64>,
    /// `(accepted, proposed)` for grow, prune and change moves.
    pub acceptance: [(u64, u64); 3],
}

impl BartPosterior {
    pub fn from_ensembles(
        offset: f64,
        n_covariates: usize,
        n_treatments: usize,
        draws: Vec<Vec<Tree>>,
    ) -> Result<Self> {
        if draws.is_empty() || draws.iter().any(|e| e.is_empty()) {
            return Err(Error::Precondition("posterior needs non-empty ensembles".into()));
        }
        Ok(Self {
            offset,
            n_covariates,
            n_treatments,
            draws,
            fitted_mean: Vec::new(),
            acceptance: [(0, 0); 3],
        })
    }

    pub fn n_draws(&self) -> usize {
        self.draws.len()
    }

    fn check(&self, d: &Dataset) -> Result<()> {
        if d.p() != self.n_covariates || d.z() != self.n_treatments {
            return Err(Error::Schema("data do not match the fitted posterior".into()));
        }
        Ok(())
    }

    /// `Φ(offset + Σ_j g_j(w, x))` for ensemble `s`.
    pub fn probability(&self, s: usize, x: &[f64], w: usize) -> f64 {
        let p = self.n_covariates;
        let sum: f64 = self.draws[s]
            .iter()
            .map(|t| t.eval(|v| if v < p { x[v] } else { w as f64 }))
            .sum();
        to_probability(self.offset + sum)
    }
}

/// Flattened ensemble; trees not splitting on the treatment are evaluated
/// once per unit for all levels.
struct Compiled {
    nodes: Vec<Flat>,
    plain: Vec<u32>,
    treated: Vec<u32>,
}

#[derive(Clone, Copy)]
struct Flat {
    /// `u32::MAX` marks a leaf.
    var: u32,
    left: u32,
    right: u32,
    /// Cut for continuous splits, leaf value for leaves.
    value: f64,
    /// Left levels for categorical splits.
    mask: u64,
    categorical: bool,
}

impl Compiled {
    fn new(ensemble: &[Tree], p: usize) -> Self {
        let mut c = Compiled {
            nodes: Vec::new(),
            plain: Vec::new(),
            treated: Vec::new(),
        };
        for t in ensemble {
            let base = c.nodes.len() as u32;
            for n in &t.nodes {
                c.nodes.push(match *n {
                    TreeNode::Leaf { mu } => Flat {
                        var: u32::MAX,
                        left: 0,
                        right: 0,
                        value: mu,
                        mask: 0,
                        categorical: false,
                    },
                    TreeNode::Internal { var, rule, left, right } => {
                        let (value, mask, categorical) = match rule {
                            SplitRule::Continuous { cut } => (cut, 0, false),
                            SplitRule::Categorical { left_levels } => (0.0, left_levels, true),
                        };
                        Flat {
                            var: var as u32,
                            left: base + left as u32,
                            right: base + right as u32,
                            value,
                            mask,
                            categorical,
                        }
                    }
                });
            }
            if t.uses(p) {
                c.treated.push(base);
            } else {
                c.plain.push(base);
            }
        }
        c
    }

    #[inline]
    fn eval(&self, root: u32, x: &[f64], p: usize, w: usize) -> f64 {
        let mut k = root as usize;
        loop {
            let n = &self.nodes[k];
            if n.var == u32::MAX {
                return n.value;
            }
            let v = n.var as usize;
            let left = if v == p {
                n.mask & (1u64 << w) != 0
            } else if n.categorical {
                let lvl = x[v] as u32;
                lvl < 64 && n.mask & (1u64 << lvl) != 0
            } else {
                x[v] <= n.value
            };
            k = if left { n.left } else { n.right } as usize;
        }
    }
}

/// Calls `f(s, i, probs)` with `probs[w] = f^s(w, X_i)` for every draw and
/// every unit in `units`.
fn for_each_draw(p: &BartPosterior, d: &Dataset, units: &[usize], mut f: impl FnMut(usize, usize, &[f64])) {
    let x = d.covariates();
    let z = d.z();
    let pc = p.n_covariates;
    let mut sums = vec![0.0; units.len() * z];
    let mut probs = vec![0.0; z];
    for s in 0..p.n_draws() {
        let c = Compiled::new(&p.draws[s], pc);
        sums.iter_mut().for_each(|v| *v = p.offset);
        for &root in &c.plain {
            for (u, &i) in units.iter().enumerate() {
                let g = c.eval(root, x.row(i), pc, 0);
                for v in &mut sums[u * z..(u + 1) * z] {
                    *v += g;
                }
            }
        }
        for &root in &c.treated {
            for (u, &i) in units.iter().enumerate() {
                for w in 0..z {
                    sums[u * z + w] += c.eval(root, x.row(i), pc, w);
                }
            }
        }
        for (u, &i) in units.iter().enumerate() {
            for w in 0..z {
                probs[w] = to_probability(sums[u * z + w]);
            }
            f(s, i, &probs);
        }
    }
}

fn to_probability(eta: f64) -> f64 {
    math::norm_cdf(eta).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// N × S matrix of `f^s(w, X_i)` for every unit, whatever its observed arm.
pub fn predict_counterfactuals(p: &BartPosterior, d: &Dataset, w: usize) -> Result<Matrix> {
    p.check(d)?;
    if w >= d.z() {
        return Err(Error::Precondition("treatment level out of range".into()));
    }
    let mut out = Matrix::zeros(d.n(), p.n_draws());
    let all: Vec<usize> = (0..d.n()).collect();
    for_each_draw(p, d, &all, |s, i, probs| out[(i, s)] = probs[w]);
    Ok(out)
}

/// Posterior SD of `f(w, X_i)` for every unit and level (N × Z).
pub fn counterfactual_sds(p: &BartPosterior, d: &Dataset) -> Result<Matrix> {
    p.check(d)?;
    let (n, z) = (d.n(), d.z());
    let mut mean = Matrix::zeros(n, z);
    let mut m2 = Matrix::zeros(n, z);
    let all: Vec<usize> = (0..n).collect();
    for_each_draw(p, d, &all, |s, i, probs| {
        let c = (s + 1) as f64;
        for (w, &v) in probs.iter().enumerate() {
            let delta = v - mean[(i, w)];
            mean[(i, w)] += delta / c;
            m2[(i, w)] += delta * (v - mean[(i, w)]);
        }
    });
    let denom = (p.n_draws().max(2) - 1) as f64;
    let mut sd = Matrix::zeros(n, z);
    for i in 0..n {
        for w in 0..z {
            sd[(i, w)] = math::sqrt(m2[(i, w)].max(0.0) / denom);
        }
    }
    Ok(sd)
}

/// Units kept by the common-support rule: unit `i` observed under `w` is
/// dropped when some `w' ≠ w` has `sd[i][w'] > max_{j: W_j = w} sd[j][w]`.
pub fn discard_rule(sd: &Matrix, treatment: &[usize]) -> Vec<usize> {
    let z = sd.cols();
    let mut threshold = vec![f64::NEG_INFINITY; z];
    for (i, &w) in treatment.iter().enumerate() {
        threshold[w] = threshold[w].max(sd[(i, w)]);
    }
    treatment
        .iter()
        .enumerate()
        .filter(|&(i, &w)| (0..z).all(|v| v == w || sd[(i, v)] <= threshold[w]))
        .map(|(i, _)| i)
        .collect()
}

pub fn discard_common_support(p: &BartPosterior, d: &Dataset) -> Result<Vec<usize>> {
    let sd = counterfactual_sds(p, d)?;
    Ok(discard_rule(&sd, d.treatment()))
}

/// Per-draw mean counterfactual risk over a fixed set of units.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawMeans {
    /// S × Z.
    pub means: Matrix,
    pub n_used: usize,
}

pub fn draw_means(p: &BartPosterior, d: &Dataset, units: &[usize]) -> Result<DrawMeans> {
    p.check(d)?;
    if units.is_empty() {
        return Err(Error::Precondition("no units retained".into()));
    }
    if units.iter().any(|&i| i >= d.n()) {
        return Err(Error::Precondition("unit index out of range".into()));
    }
    let mut means = Matrix::zeros(p.n_draws(), d.z());
    for_each_draw(p, d, units, |s, _, probs| {
        for (w, &v) in probs.iter().enumerate() {
            means[(s, w)] += v;
        }
    });
    let k = units.len() as f64;
    for v in means.as_mut_slice() {
        *v /= k;
    }
    Ok(DrawMeans {
        means,
        n_used: units.len(),
    })
}

/// Posterior mean of the per-draw contrast with a 95% equal-tailed interval.
pub fn estimate_ate_bart(
    m: &DrawMeans,
    pair: TreatmentPair,
    estimand: Estimand,
    method: &str,
) -> Result<CausalEstimate> {
    pair.check(m.means.cols())?;
    let deltas = (0..m.means.rows())
        .map(|s| estimand.contrast(m.means[(s, pair.k)], m.means[(s, pair.l)]))
        .collect::<Result<Vec<f64>>>()?;
    let point = stats::mean(&deltas);
    let sorted = stats::sorted(&deltas);
    let interval = Interval {
        lower: stats::quantile_linear(&sorted, 0.025),
        upper: stats::quantile_linear(&sorted, 0.975),
    };
    let mut e = CausalEstimate::new(pair, estimand, point, method, m.n_used);
    e.interval = Some(interval);
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ColumnKind;
    use alloc::string::ToString;

    fn toy() -> Dataset {
        Dataset::new(
            vec!["x".to_string()],
            vec![ColumnKind::Continuous],
            Matrix::from_rows(&[vec![-1.0], vec![0.5], vec![2.0]]),
            vec![0, 1, 0],
            vec![0, 1, 1],
            2,
            None,
        )
        .unwrap()
    }

    #[test]
    fn zero_leaf_is_one_half() {
        let p = BartPosterior::from_ensembles(0.0, 1, 2, vec![vec![Tree::leaf(0.0)]; 3]).unwrap();
        let f = predict_counterfactuals(&p, &toy(), 1).unwrap();
        assert!(f.as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn hand_built_two_tree_ensemble() {
        let t1 = Tree {
            nodes: vec![
                TreeNode::Internal {
                    var: 0,
                    rule: SplitRule::Continuous { cut: 0.0 },
                    left: 1,
                    right: 2,
                },
                TreeNode::Leaf { mu: -0.5 },
                TreeNode::Leaf { mu: 0.25 },
            ],
        };
        let t2 = Tree {
            nodes: vec![
                TreeNode::Internal {
                    var: 1,
                    rule: SplitRule::Categorical { left_levels: 0b01 },
                    left: 1,
                    right: 2,
                },
                TreeNode::Leaf { mu: 0.1 },
                TreeNode::Leaf { mu: 0.7 },
            ],
        };
        let p = BartPosterior::from_ensembles(-0.2, 1, 2, vec![vec![t1, t2]]).unwrap();
        let d = toy();
        let f0 = predict_counterfactuals(&p, &d, 0).unwrap();
        let f1 = predict_counterfactuals(&p, &d, 1).unwrap();
        let phi = math::norm_cdf;
        let close = |a: f64, b: f64| assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        close(f0[(0, 0)], phi(-0.2 - 0.5 + 0.1));
        close(f1[(0, 0)], phi(-0.2 - 0.5 + 0.7));
        close(f0[(1, 0)], phi(-0.2 + 0.25 + 0.1));
        close(f1[(2, 0)], phi(-0.2 + 0.25 + 0.7));
    }

    #[test]
    fn known_draw_means_average() {
        let m = DrawMeans {
            means: Matrix::from_rows(&[
                vec![0.10, 0.05],
                vec![0.20, 0.10],
                vec![0.30, 0.10],
                vec![0.40, 0.15],
            ]),
            n_used: 10,
        };
        let e = estimate_ate_bart(&m, TreatmentPair::new(0, 1).unwrap(), Estimand::Rd, "bart").unwrap();
        assert!((e.point - 0.15).abs() < 1e-15);
        let same = DrawMeans {
            means: Matrix::from_rows(&[vec![0.1, 0.1], vec![0.3, 0.3]]),
            n_used: 2,
        };
        let e = estimate_ate_bart(&same, TreatmentPair::new(0, 1).unwrap(), Estimand::Rd, "bart").unwrap();
        assert_eq!(e.point, 0.0);
        assert_eq!(e.interval, Some(Interval { lower: 0.0, upper: 0.0 }));
    }

    #[test]
    fn equal_sds_discard_nothing() {
        let sd = Matrix::from_rows(&vec![vec![0.2, 0.2, 0.2]; 6]);
        assert_eq!(discard_rule(&sd, &[0, 1, 2, 0, 1, 2]), vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn large_counterfactual_sd_discards_unit() {
        let mut sd = Matrix::from_rows(&vec![vec![0.03, 0.03, 0.03]; 6]);
        sd[(3, 2)] = 10.0 * 0.03;
        assert_eq!(discard_rule(&sd, &[0, 1, 2, 0, 1, 2]), vec![0, 1, 2, 4, 5]);
    }
}
