use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitRule {
    /// Left when `x <= cut`.
    Continuous { cut: f64 },
    /// Left when bit `level` of the mask is set.
    Categorical { left_levels: u64 },
}

impl SplitRule {
    pub fn goes_left(&self, x: f64) -> bool {
        match *self {
            SplitRule::Continuous { cut } => x <= cut,
            SplitRule::Categorical { left_levels } => {
                let lvl = x as u32;
                lvl < 64 && left_levels & (1u64 << lvl) != 0
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreeNode {
    Leaf {
        mu: f64,
    },
    Internal {
        /// Covariate index; the treatment is the index after the last
        /// covariate.
        var: usize,
        rule: SplitRule,
        left: usize,
        right: usize,
    },
}

/// Arena tree with the root at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf(mu: f64) -> Self {
        Self {
            nodes: vec![TreeNode::Leaf { mu }],
        }
    }

    /// Leaf value reached by the point whose `var`-th coordinate is `x(var)`.
    pub fn eval(&self, x: impl Fn(usize) -> f64) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                TreeNode::Leaf { mu } => return mu,
                TreeNode::Internal {
                    var,
                    rule,
                    left,
                    right,
                } => k = if rule.goes_left(x(var)) { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, k: usize) -> usize {
            match t.nodes[k] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Internal { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    /// Whether any split uses covariate `var`.
    pub fn uses(&self, var: usize) -> bool {
        self.nodes
            .iter()
            .any(|n| matches!(n, TreeNode::Internal { var: v, .. } if *v == var))
    }
}
