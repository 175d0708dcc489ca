//! Regression adjustment on a multivariate spline of the generalized
//! propensity score (RAMS).
//!
//! The outcome model is `logit P(Y = 1) = β_{W_i} + h(r_1(X_i), r_2(X_i))` with
//! `h` a penalized tensor-product cubic B-spline of the first two propensity
//! columns and `β` reference-coded (`β_z = 0`). Effects are obtained by
//! switching the treatment term for every unit while holding `h` fixed.

mod basis;
mod fit;

pub use basis::{build_tensor_basis, MarginBasis, SplineBasis, DEFAULT_INTERIOR_KNOTS};
pub use fit::{
    estimate_ate_rams, fit_rams, lambda_grid, potential_risks, Lambda, RamsModel,
};
