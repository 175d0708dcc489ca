//! Generalized propensity score models, balance diagnostics and trimming.

mod balance;
mod gbm;
mod mlr;
mod tree;
mod trim;

pub use balance::{standardized_bias, BalanceReport};
pub use gbm::{fit_gbm, predict_gps_gbm, select_stopping_iteration, GbmConfig, GbmModel};
pub use mlr::{fit_mlr, predict_gps_mlr, MlrModel};
pub use tree::RegressionTree;
pub use trim::trim_gps;
