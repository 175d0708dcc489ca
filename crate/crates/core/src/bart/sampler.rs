use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::posterior::BartPosterior;
use super::tree::{SplitRule, Tree, TreeNode};
use crate::data::{ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::math;
use crate::rng::{self, label, StreamRng};
use crate::stats;

#[derive(Debug, Clone, PartialEq)]
pub struct BartConfig {
    pub trees: usize,
    /// Leaf prior scale: `μ ~ N(0, (3 / (k √J))²)`.
    pub k: f64,
    pub alpha: f64,
    pub beta: f64,
    pub total: usize,
    pub burn_in: usize,
    pub p_grow: f64,
    pub p_prune: f64,
    pub p_change: f64,
    /// Candidate cutpoints per continuous covariate.
    pub max_cutpoints: usize,
    pub seed: u64,
}

impl Default for BartConfig {
    fn default() -> Self {
        Self {
            trees: 100,
            k: 2.0,
            alpha: 0.95,
            beta: 2.0,
            total: 5000,
            burn_in: 3000,
            p_grow: 0.28,
            p_prune: 0.28,
            p_change: 0.44,
            max_cutpoints: 100,
            seed: 0,
        }
    }
}

impl BartConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Precondition(m.into()));
        if self.trees == 0 {
            return bad("at least one tree required");
        }
        if self.burn_in >= self.total {
            return bad("burn-in must be smaller than the total number of iterations");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) || !(self.beta >= 0.0) {
            return bad("tree prior needs alpha in (0,1) and beta >= 0");
        }
        if !(self.k > 0.0) || !self.k.is_finite() {
            return bad("k must be positive");
        }
        let probs = [self.p_grow, self.p_prune, self.p_change];
        if probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("proposal probabilities must be non-negative and sum to 1");
        }
        if self.max_cutpoints == 0 {
            return bad("at least one cutpoint per covariate");
        }
        Ok(())
    }

    pub fn leaf_sd(&self) -> f64 {
        3.0 / (self.k * math::sqrt(self.trees as f64))
    }

    pub fn retained(&self) -> usize {
        self.total - self.burn_in
    }
}

/// Draws `Z ~ N(mean, 1)` conditioned on `Z > 0` (`positive`) or `Z < 0`.
pub fn sample_truncated_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, positive: bool) -> f64 {
    if positive {
        let z = mean + lower_tail(rng, -mean);
        if z > 0.0 {
            z
        } else {
            f64::MIN_POSITIVE
        }
    } else {
        let z = mean - lower_tail(rng, mean);
        if z < 0.0 {
            z
        } else {
            -f64::MIN_POSITIVE
        }
    }
}

/// Standard normal conditioned on `T >= a`.
fn lower_tail<R: Rng + ?Sized>(rng: &mut R, a: f64) -> f64 {
    if a < 0.25 {
        loop {
            let t = rng::std_normal(rng);
            if t >= a {
                return t;
            }
        }
    }
    // Exponential proposal with the optimal rate.
    let rate = 0.5 * (a + math::sqrt(a * a + 4.0));
    loop {
        let t = a - math::ln(1.0 - rng::uniform(rng)) / rate;
        let d = t - rate;
        if rng::uniform(rng) <= math::exp(-0.5 * d * d) {
            return t;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum FeatureKind {
    Continuous { cuts: Vec<f64> },
    Categorical { levels: usize },
}

pub(crate) struct Features {
    pub kinds: Vec<FeatureKind>,
    /// Column-major codes: cut bin for continuous, level for categorical.
    pub codes: Vec<Vec<u16>>,
}

fn cutpoints(values: &[f64], max_cuts: usize) -> Vec<f64> {
    let sorted = stats::sorted(values);
    let mut unique = sorted.clone();
    unique.dedup();
    let top = *unique.last().expect("non-empty");
    let mut cuts: Vec<f64> = if unique.len() <= max_cuts + 1 {
        unique[..unique.len() - 1].to_vec()
    } else {
        (1..=max_cuts)
            .map(|k| stats::quantile_linear(&sorted, k as f64 / (max_cuts + 1) as f64))
            .collect()
    };
    cuts.dedup();
    cuts.retain(|&c| c < top);
    cuts
}

pub(crate) fn build_features(d: &Dataset, max_cuts: usize) -> Result<Features> {
    let x = d.covariates();
    let mut kinds = Vec::with_capacity(d.p() + 1);
    let mut codes = Vec::with_capacity(d.p() + 1);
    for (j, kind) in d.kinds().iter().enumerate() {
        let col = x.column(j);
        match *kind {
            ColumnKind::Continuous => {
                let cuts = cutpoints(&col, max_cuts);
                codes.push(
                    col.iter()
                        .map(|&v| cuts.partition_point(|&c| c < v) as u16)
                        .collect(),
                );
                kinds.push(FeatureKind::Continuous { cuts });
            }
            ColumnKind::Categorical { levels } => {
                if levels > 64 {
                    return Err(Error::Precondition(
                        "categorical covariates are limited to 64 levels".into(),
                    ));
                }
                codes.push(col.iter().map(|&v| v as u16).collect());
                kinds.push(FeatureKind::Categorical { levels });
            }
        }
    }
    kinds.push(FeatureKind::Categorical { levels: d.z() });
    codes.push(d.treatment().iter().map(|&w| w as u16).collect());
    Ok(Features { kinds, codes })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Rule {
    /// Left when the bin code is at most the cut index.
    Cut(u16),
    Mask(u64),
}

impl Rule {
    fn left(self, code: u16) -> bool {
        match self {
            Rule::Cut(c) => code <= c,
            Rule::Mask(m) => m & (1u64 << code) != 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Avail {
    /// Cut indices `lo..hi`.
    Range(u16, u16),
    Mask(u64),
}

impl Avail {
    fn any(self) -> bool {
        match self {
            Avail::Range(lo, hi) => hi > lo,
            Avail::Mask(m) => m.count_ones() >= 2,
        }
    }

    fn restrict(self, rule: Rule, left: bool) -> Avail {
        match (self, rule) {
            (Avail::Range(lo, hi), Rule::Cut(c)) => {
                if left {
                    Avail::Range(lo, hi.min(c))
                } else {
                    Avail::Range(lo.max(c + 1), hi)
                }
            }
            (Avail::Mask(a), Rule::Mask(m)) => Avail::Mask(if left { a & m } else { a & !m }),
            (a, _) => a,
        }
    }
}

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Kind {
    Leaf { mu: f64 },
    Internal { var: usize, rule: Rule, left: u32, right: u32 },
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Node {
    parent: u32,
    depth: u32,
    kind: Kind,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct STree {
    nodes: Vec<Node>,
    free: Vec<u32>,
}

impl STree {
    pub fn root(mu: f64) -> Self {
        Self {
            nodes: vec![Node {
                parent: NONE,
                depth: 0,
                kind: Kind::Leaf { mu },
            }],
            free: Vec::new(),
        }
    }

    fn alloc(&mut self, node: Node) -> u32 {
        if let Some(k) = self.free.pop() {
            self.nodes[k as usize] = node;
            k
        } else {
            self.nodes.push(node);
            (self.nodes.len() - 1) as u32
        }
    }

    fn mu(&self, k: u32) -> f64 {
        match self.nodes[k as usize].kind {
            Kind::Leaf { mu } => mu,
            _ => unreachable!("leaf assignment points at a non-leaf"),
        }
    }

    fn leaves(&self) -> Vec<u32> {
        (0..self.nodes.len() as u32)
            .filter(|&k| matches!(self.nodes[k as usize].kind, Kind::Leaf { .. }))
            .collect()
    }

    fn is_leaf(&self, k: u32) -> bool {
        matches!(self.nodes[k as usize].kind, Kind::Leaf { .. })
    }

    fn nog(&self) -> Vec<u32> {
        (0..self.nodes.len() as u32)
            .filter(|&k| match self.nodes[k as usize].kind {
                Kind::Internal { left, right, .. } => self.is_leaf(left) && self.is_leaf(right),
                _ => false,
            })
            .collect()
    }

    fn is_nog(&self, k: u32) -> bool {
        match self.nodes[k as usize].kind {
            Kind::Internal { left, right, .. } => self.is_leaf(left) && self.is_leaf(right),
            _ => false,
        }
    }

    /// Splitting rules still able to separate points in node `k`'s region.
    fn region(&self, k: u32, full: &[Avail]) -> Vec<Avail> {
        let mut reg = full.to_vec();
        let mut child = k;
        let mut p = self.nodes[k as usize].parent;
        while p != NONE {
            if let Kind::Internal { var, rule, left, .. } = self.nodes[p as usize].kind {
                reg[var] = reg[var].restrict(rule, left == child);
            }
            child = p;
            p = self.nodes[p as usize].parent;
        }
        reg
    }

    pub fn grow(&mut self, leaf: u32, var: usize, rule: Rule, mu_left: f64, mu_right: f64) -> (u32, u32) {
        let depth = self.nodes[leaf as usize].depth + 1;
        let l = self.alloc(Node {
            parent: leaf,
            depth,
            kind: Kind::Leaf { mu: mu_left },
        });
        let r = self.alloc(Node {
            parent: leaf,
            depth,
            kind: Kind::Leaf { mu: mu_right },
        });
        self.nodes[leaf as usize].kind = Kind::Internal {
            var,
            rule,
            left: l,
            right: r,
        };
        (l, r)
    }

    pub fn prune(&mut self, k: u32, mu: f64) {
        if let Kind::Internal { left, right, .. } = self.nodes[k as usize].kind {
            for c in [left, right] {
                self.nodes[c as usize].kind = Kind::Free;
                self.free.push(c);
            }
            self.nodes[k as usize].kind = Kind::Leaf { mu };
        }
    }

    pub fn to_tree(&self, kinds: &[FeatureKind]) -> Tree {
        let mut nodes = Vec::new();
        self.emit(0, kinds, &mut nodes);
        Tree { nodes }
    }

    fn emit(&self, k: u32, kinds: &[FeatureKind], out: &mut Vec<TreeNode>) -> usize {
        let at = out.len();
        match self.nodes[k as usize].kind {
            Kind::Leaf { mu } => out.push(TreeNode::Leaf { mu }),
            Kind::Internal {
                var,
                rule,
                left,
                right,
            } => {
                let rule = match (rule, &kinds[var]) {
                    (Rule::Cut(c), FeatureKind::Continuous { cuts }) => SplitRule::Continuous {
                        cut: cuts[c as usize],
                    },
                    (Rule::Mask(m), _) => SplitRule::Categorical { left_levels: m },
                    _ => unreachable!("rule kind matches covariate kind"),
                };
                out.push(TreeNode::Leaf { mu: 0.0 });
                let l = self.emit(left, kinds, out);
                let r = self.emit(right, kinds, out);
                out[at] = TreeNode::Internal {
                    var,
                    rule,
                    left: l,
                    right: r,
                };
            }
            Kind::Free => unreachable!("free slot reached from root"),
        }
        at
    }
}

struct Chain<'a> {
    cfg: &'a BartConfig,
    features: &'a Features,
    full: Vec<Avail>,
    tau2: f64,
    n: usize,
    accepted: [u64; 3],
    proposed: [u64; 3],
}

#[derive(Default, Clone, Copy)]
struct Suff {
    n: f64,
    sum: f64,
}

impl Chain<'_> {
    fn split_prob(&self, depth: u32, region: &[Avail]) -> f64 {
        if region.iter().any(|a| a.any()) {
            self.cfg.alpha * math::powf(1.0 + depth as f64, -self.cfg.beta)
        } else {
            0.0
        }
    }

    fn log_marginal(&self, s: Suff) -> f64 {
        let v = 1.0 + s.n * self.tau2;
        -0.5 * math::ln(v) + 0.5 * self.tau2 * s.sum * s.sum / v
    }

    fn growable(&self, t: &STree, k: u32) -> bool {
        t.region(k, &self.full).iter().any(|a| a.any())
    }

    fn draw_rule(&self, rng: &mut StreamRng, region: &[Avail]) -> (usize, Rule) {
        let vars: Vec<usize> = (0..region.len()).filter(|&v| region[v].any()).collect();
        let var = vars[rng.random_range(0..vars.len())];
        let rule = match region[var] {
            Avail::Range(lo, hi) => Rule::Cut(rng.random_range(lo..hi)),
            Avail::Mask(a) => loop {
                let m = rng.random::<u64>() & a;
                if m != 0 && m != a {
                    break Rule::Mask(m);
                }
            },
        };
        (var, rule)
    }

    /// Left/right sufficient statistics of the units in `node` under `rule`.
    fn split_stats(&self, leaf_of: &[u32], members: &[u32], resid: &[f64], var: usize, rule: Rule) -> (Suff, Suff) {
        let codes = &self.features.codes[var];
        let (mut l, mut r) = (Suff::default(), Suff::default());
        for i in 0..self.n {
            if members.contains(&leaf_of[i]) {
                let s = if rule.left(codes[i]) { &mut l } else { &mut r };
                s.n += 1.0;
                s.sum += resid[i];
            }
        }
        (l, r)
    }

    fn reroute(&self, t: &STree, leaf_of: &mut [u32], members: &[u32], k: u32) {
        let Kind::Internal { var, rule, left, right } = t.nodes[k as usize].kind else {
            return;
        };
        let codes = &self.features.codes[var];
        for i in 0..self.n {
            if members.contains(&leaf_of[i]) {
                leaf_of[i] = if rule.left(codes[i]) { left } else { right };
            }
        }
    }

    fn step(&mut self, rng: &mut StreamRng, t: &mut STree, leaf_of: &mut [u32], resid: &[f64], stats: &[Suff]) -> bool {
        let u = rng::uniform(rng);
        let move_kind = if u < self.cfg.p_grow {
            0
        } else if u < self.cfg.p_grow + self.cfg.p_prune {
            1
        } else {
            2
        };
        self.proposed[move_kind] += 1;
        let accepted = match move_kind {
            0 => self.grow(rng, t, leaf_of, resid),
            1 => self.prune(rng, t, leaf_of, stats),
            _ => self.change(rng, t, leaf_of, resid, stats),
        };
        if accepted {
            self.accepted[move_kind] += 1;
        }
        accepted
    }

    fn grow(&self, rng: &mut StreamRng, t: &mut STree, leaf_of: &mut [u32], resid: &[f64]) -> bool {
        let growable: Vec<u32> = t.leaves().into_iter().filter(|&k| self.growable(t, k)).collect();
        if growable.is_empty() {
            return false;
        }
        let eta = growable[rng.random_range(0..growable.len())];
        let region = t.region(eta, &self.full);
        let (var, rule) = self.draw_rule(rng, &region);
        let (sl, sr) = self.split_stats(leaf_of, &[eta], resid, var, rule);
        if sl.n == 0.0 || sr.n == 0.0 {
            return false;
        }
        let parent = Suff {
            n: sl.n + sr.n,
            sum: sl.sum + sr.sum,
        };
        let depth = t.nodes[eta as usize].depth;
        let mut lreg = region.clone();
        lreg[var] = region[var].restrict(rule, true);
        let mut rreg = region.clone();
        rreg[var] = region[var].restrict(rule, false);
        let ps = self.split_prob(depth, &region);
        let psl = self.split_prob(depth + 1, &lreg);
        let psr = self.split_prob(depth + 1, &rreg);
        let p = t.nodes[eta as usize].parent;
        let nog_after = t.nog().len() + 1 - usize::from(p != NONE && t.is_nog(p));
        let log_r = math::ln(self.cfg.p_prune / nog_after as f64)
            - math::ln(self.cfg.p_grow / growable.len() as f64)
            + math::ln(ps)
            + math::ln(1.0 - psl)
            + math::ln(1.0 - psr)
            - math::ln(1.0 - ps)
            + self.log_marginal(sl)
            + self.log_marginal(sr)
            - self.log_marginal(parent);
        if math::ln(1.0 - rng::uniform(rng)) < log_r {
            let mu = t.mu(eta);
            t.grow(eta, var, rule, mu, mu);
            self.reroute(t, leaf_of, &[eta], eta);
            true
        } else {
            false
        }
    }

    fn prune(&self, rng: &mut StreamRng, t: &mut STree, leaf_of: &mut [u32], stats: &[Suff]) -> bool {
        let nog = t.nog();
        if nog.is_empty() {
            return false;
        }
        let eta = nog[rng.random_range(0..nog.len())];
        let Kind::Internal { var, rule, left, right } = t.nodes[eta as usize].kind else {
            return false;
        };
        let growable_before = t.leaves().into_iter().filter(|&k| self.growable(t, k)).count();
        let growable_after = growable_before + 1
            - usize::from(self.growable(t, left))
            - usize::from(self.growable(t, right));
        let region = t.region(eta, &self.full);
        let depth = t.nodes[eta as usize].depth;
        let mut lreg = region.clone();
        lreg[var] = region[var].restrict(rule, true);
        let mut rreg = region.clone();
        rreg[var] = region[var].restrict(rule, false);
        let ps = self.split_prob(depth, &region);
        let psl = self.split_prob(depth + 1, &lreg);
        let psr = self.split_prob(depth + 1, &rreg);
        let (sl, sr) = (stats[left as usize], stats[right as usize]);
        let parent = Suff {
            n: sl.n + sr.n,
            sum: sl.sum + sr.sum,
        };
        let log_r = math::ln(self.cfg.p_grow / growable_after as f64)
            - math::ln(self.cfg.p_prune / nog.len() as f64)
            + math::ln(1.0 - ps)
            - math::ln(ps)
            - math::ln(1.0 - psl)
            - math::ln(1.0 - psr)
            + self.log_marginal(parent)
            - self.log_marginal(sl)
            - self.log_marginal(sr);
        if math::ln(1.0 - rng::uniform(rng)) < log_r {
            for l in leaf_of.iter_mut() {
                if *l == left || *l == right {
                    *l = eta;
                }
            }
            t.prune(eta, 0.0);
            true
        } else {
            false
        }
    }

    fn change(&self, rng: &mut StreamRng, t: &mut STree, leaf_of: &mut [u32], resid: &[f64], stats: &[Suff]) -> bool {
        let nog = t.nog();
        if nog.is_empty() {
            return false;
        }
        let eta = nog[rng.random_range(0..nog.len())];
        let Kind::Internal { var: ov, rule: orule, left, right } = t.nodes[eta as usize].kind else {
            return false;
        };
        let region = t.region(eta, &self.full);
        let (var, rule) = self.draw_rule(rng, &region);
        let (nl, nr) = self.split_stats(leaf_of, &[left, right], resid, var, rule);
        if nl.n == 0.0 || nr.n == 0.0 {
            return false;
        }
        let (ol, or) = (stats[left as usize], stats[right as usize]);
        let depth = t.nodes[eta as usize].depth + 1;
        let child_prior = |v: usize, r: Rule| {
            let mut lreg = region.clone();
            lreg[v] = region[v].restrict(r, true);
            let mut rreg = region.clone();
            rreg[v] = region[v].restrict(r, false);
            math::ln(1.0 - self.split_prob(depth, &lreg)) + math::ln(1.0 - self.split_prob(depth, &rreg))
        };
        let log_r = self.log_marginal(nl) + self.log_marginal(nr)
            - self.log_marginal(ol)
            - self.log_marginal(or)
            + child_prior(var, rule)
            - child_prior(ov, orule);
        if math::ln(1.0 - rng::uniform(rng)) < log_r {
            t.nodes[eta as usize].kind = Kind::Internal {
                var,
                rule,
                left,
                right,
            };
            self.reroute(t, leaf_of, &[left, right], eta);
            true
        } else {
            false
        }
    }

    fn leaf_stats(&self, t: &STree, leaf_of: &[u32], resid: &[f64], stats: &mut Vec<Suff>) {
        stats.clear();
        stats.resize(t.nodes.len(), Suff::default());
        for i in 0..self.n {
            let s = &mut stats[leaf_of[i] as usize];
            s.n += 1.0;
            s.sum += resid[i];
        }
    }

    fn draw_leaves(&self, rng: &mut StreamRng, t: &mut STree, stats: &[Suff]) {
        for k in 0..t.nodes.len() {
            if let Kind::Leaf { mu } = &mut t.nodes[k].kind {
                let s = stats[k];
                let v = 1.0 + s.n * self.tau2;
                let mean = self.tau2 * s.sum / v;
                let sd = math::sqrt(self.tau2 / v);
                *mu = mean + sd * rng::std_normal(rng);
            }
        }
    }
}

fn full_region(features: &Features) -> Vec<Avail> {
    features
        .kinds
        .iter()
        .map(|k| match k {
            FeatureKind::Continuous { cuts } => Avail::Range(0, cuts.len() as u16),
            FeatureKind::Categorical { levels } => Avail::Mask(if *levels >= 64 {
                u64::MAX
            } else {
                (1u64 << levels) - 1
            }),
        })
        .collect()
}

/// Runs the backfitting chain and keeps every post-burn-in ensemble.
pub fn fit_probit_bart(d: &Dataset, config: &BartConfig) -> Result<BartPosterior> {
    config.validate()?;
    let events = d.events();
    if events == 0 {
        return Err(Error::DegenerateOutcome(0));
    }
    if events == d.n() {
        return Err(Error::DegenerateOutcome(1));
    }
    let features = build_features(d, config.max_cutpoints)?;
    let n = d.n();
    let y = d.outcome();
    let offset = math::norm_inv(events as f64 / n as f64);
    let sd = config.leaf_sd();
    let mut chain = Chain {
        cfg: config,
        features: &features,
        full: full_region(&features),
        tau2: sd * sd,
        n,
        accepted: [0; 3],
        proposed: [0; 3],
    };
    let mut rng = rng::stream(config.seed, &[label::MCMC]);
    let mut trees = vec![STree::root(0.0); config.trees];
    let mut leaf_of = vec![vec![0u32; n]; config.trees];
    let mut fit = vec![0.0; n];
    let mut z: Vec<f64> = (0..n)
        .map(|i| sample_truncated_normal(&mut rng, offset, y[i] == 1))
        .collect();
    let mut resid = vec![0.0; n];
    let mut stats = Vec::new();
    let mut draws = Vec::with_capacity(config.retained());
    let mut fitted_mean = vec![0.0; n];
    for iter in 0..config.total {
        for j in 0..config.trees {
            let (t, lo) = (&mut trees[j], &mut leaf_of[j]);
            for i in 0..n {
                fit[i] -= t.mu(lo[i]);
                resid[i] = z[i] - offset - fit[i];
            }
            chain.leaf_stats(t, lo, &resid, &mut stats);
            if chain.step(&mut rng, t, lo, &resid, &stats) {
                chain.leaf_stats(t, lo, &resid, &mut stats);
            }
            chain.draw_leaves(&mut rng, t, &stats);
            for i in 0..n {
                fit[i] += t.mu(lo[i]);
            }
        }
        for i in 0..n {
            z[i] = sample_truncated_normal(&mut rng, offset + fit[i], y[i] == 1);
            debug_assert!((z[i] > 0.0) == (y[i] == 1));
        }
        if iter >= config.burn_in {
            draws.push(trees.iter().map(|t| t.to_tree(&features.kinds)).collect());
            for i in 0..n {
                fitted_mean[i] += math::norm_cdf(offset + fit[i]);
            }
        }
    }
    let s = draws.len() as f64;
    for v in fitted_mean.iter_mut() {
        *v /= s;
    }
    log::debug!(
        "bart acceptance grow {}/{} prune {}/{} change {}/{}",
        chain.accepted[0],
        chain.proposed[0],
        chain.accepted[1],
        chain.proposed[1],
        chain.accepted[2],
        chain.proposed[2]
    );
    let mut post = BartPosterior::from_ensembles(offset, d.p(), d.z(), draws)?;
    post.fitted_mean = fitted_mean;
    post.acceptance = [
        (chain.accepted[0], chain.proposed[0]),
        (chain.accepted[1], chain.proposed[1]),
        (chain.accepted[2], chain.proposed[2]),
    ];
    Ok(post)
}
