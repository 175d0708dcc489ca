//! Probit Bayesian additive regression trees.
//!
//! `P(Y = 1 | W, X) = Φ(offset + Σ_j g_j(W, X))` with the treatment entering
//! as one categorical covariate. Posterior draws are obtained with
//! Albert–Chib latent augmentation and Bayesian backfitting; retained
//! ensembles are stored so that counterfactual surfaces can be evaluated for
//! any treatment level afterwards.

mod posterior;
mod sampler;
mod tree;

pub use posterior::{
    counterfactual_sds, discard_common_support, discard_rule, draw_means, estimate_ate_bart,
    predict_counterfactuals, BartPosterior, DrawMeans,
};
pub use sampler::{fit_probit_bart, sample_truncated_normal, BartConfig};
pub use tree::{SplitRule, Tree, TreeNode};
