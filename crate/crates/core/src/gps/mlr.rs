//! Multinomial logistic regression fitted by damped Newton iterations.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::{Dataset, GpsMatrix};
use crate::error::{Error, FitWarning, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::math;

const MAX_HALVINGS: usize = 10;

/// Fitted multinomial logit with the last treatment as reference.
#[derive(Debug, Clone, PartialEq)]
pub struct MlrModel {
    /// `(z - 1) × (width + 1)`: row `w` holds the intercept followed by the
    /// design coefficients of treatment `w` against the reference.
    pub coefficients: Matrix,
    pub converged: bool,
    pub deviance: f64,
    /// Deviance after every accepted iterate, starting at the initial value.
    pub deviance_trace: Vec<f64>,
    pub iterations: usize,
    pub warnings: Vec<FitWarning>,
}

impl MlrModel {
    pub fn n_treatments(&self) -> usize {
        self.coefficients.rows() + 1
    }

    pub fn design_width(&self) -> usize {
        self.coefficients.cols() - 1
    }
}

fn with_intercept(design: &Matrix) -> Matrix {
    let n = design.rows();
    let p = design.cols() + 1;
    let mut x = Matrix::zeros(n, p);
    for i in 0..n {
        let dst = x.row_mut(i);
        dst[0] = 1.0;
        dst[1..].copy_from_slice(design.row(i));
    }
    x
}

/// Softmax probabilities of one row given the stacked coefficients. The
/// reference category has linear predictor zero.
fn row_probs(coef: &[f64], q: usize, x: &[f64], out: &mut [f64]) {
    let p = x.len();
    let mut max_eta = 0.0f64;
    for w in 0..q {
        let eta: f64 = coef[w * p..(w + 1) * p].iter().zip(x).map(|(b, v)| b * v).sum();
        out[w] = eta;
        max_eta = max_eta.max(eta);
    }
    let mut total = math::exp(-max_eta);
    for v in out[..q].iter_mut() {
        *v = math::exp(*v - max_eta);
        total += *v;
    }
    for v in out[..q].iter_mut() {
        *v /= total;
    }
    out[q] = math::exp(-max_eta) / total;
}

fn deviance(coef: &[f64], q: usize, x: &Matrix, w: &[usize]) -> f64 {
    let mut probs = vec![0.0; q + 1];
    let mut dev = 0.0;
    for i in 0..x.rows() {
        row_probs(coef, q, x.row(i), &mut probs);
        dev -= 2.0 * math::ln(probs[w[i]].max(1e-300));
    }
    dev
}

/// Maximizes the multinomial log-likelihood of treatment given covariates.
///
/// Converges when the relative deviance change drops below `tol`. Running
/// out of iterations is not an error: the model is returned with
/// `converged = false` and a warning.
pub fn fit_mlr(d: &Dataset, tol: f64, max_iter: usize) -> Result<MlrModel> {
    let z = d.z();
    if z < 2 {
        return Err(Error::Precondition("MLR needs at least two treatments".into()));
    }
    let x = with_intercept(&d.design_matrix());
    let (n, p) = (x.rows(), x.cols());
    if n <= p {
        return Err(Error::Precondition(alloc::format!(
            "N = {n} must exceed the number of design columns {p}"
        )));
    }
    let gram = x.transpose().matmul(&x);
    if Cholesky::new(&gram).is_err() {
        return Err(Error::SingularDesign);
    }

    let q = z - 1;
    let w = d.treatment();
    let dim = q * p;
    let mut coef = vec![0.0; dim];
    // Start from the intercept-only solution.
    let sizes = d.group_sizes();
    for k in 0..q {
        coef[k * p] = math::ln(sizes[k] as f64 / sizes[q] as f64);
    }
    let mut dev = deviance(&coef, q, &x, w);
    let mut trace = vec![dev];
    let mut warnings = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut probs = vec![0.0; z];

    while iterations < max_iter {
        iterations += 1;
        let mut grad = vec![0.0; dim];
        let mut info = Matrix::zeros(dim, dim);
        for i in 0..n {
            let xi = x.row(i);
            row_probs(&coef, q, xi, &mut probs);
            for a in 0..q {
                let resid = if w[i] == a { 1.0 } else { 0.0 } - probs[a];
                for (j, &xv) in xi.iter().enumerate() {
                    grad[a * p + j] += resid * xv;
                }
                for b in a..q {
                    let wab = if a == b {
                        probs[a] * (1.0 - probs[a])
                    } else {
                        -probs[a] * probs[b]
                    };
                    if wab == 0.0 {
                        continue;
                    }
                    for j in 0..p {
                        let s = wab * xi[j];
                        if s == 0.0 {
                            continue;
                        }
                        for (l, &xl) in xi.iter().enumerate() {
                            info[(a * p + j, b * p + l)] += s * xl;
                        }
                    }
                }
            }
        }
        for a in 0..q {
            for b in 0..a {
                for j in 0..p {
                    for l in 0..p {
                        info[(a * p + j, b * p + l)] = info[(b * p + l, a * p + j)];
                    }
                }
            }
        }
        let step = match Cholesky::new(&info) {
            Ok(ch) => ch.solve(&grad),
            Err(_) => {
                // Near-singular information under separation: add a small ridge.
                let ridge = 1e-8 * info.trace().max(1.0) / dim as f64;
                for j in 0..dim {
                    info[(j, j)] += ridge;
                }
                match Cholesky::new(&info) {
                    Ok(ch) => ch.solve(&grad),
                    Err(_) => {
                        warnings.push(FitWarning::StepHalvingFailed { iteration: iterations });
                        break;
                    }
                }
            }
        };

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = coef.iter().zip(&step).map(|(c, s)| c + t * s).collect();
            let trial_dev = deviance(&trial, q, &x, w);
            if trial_dev.is_finite() && trial_dev <= dev {
                accepted = Some((trial, trial_dev));
                break;
            }
            t *= 0.5;
        }
        let Some((new_coef, new_dev)) = accepted else {
            warnings.push(FitWarning::StepHalvingFailed { iteration: iterations });
            break;
        };
        let rel = math::abs(dev - new_dev) / math::abs(dev).max(1e-300);
        coef = new_coef;
        dev = new_dev;
        trace.push(dev);
        if rel < tol {
            converged = true;
            break;
        }
    }
    if !converged && !warnings.iter().any(|w| matches!(w, FitWarning::StepHalvingFailed { .. })) {
        warnings.push(FitWarning::NotConverged { iterations });
    }
    if !converged {
        log::warn!("multinomial logistic fit: {}", warnings[warnings.len() - 1]);
    }
    // Separation shows up as fitted probabilities pinned at 0 or 1.
    let mut saturated = false;
    for i in 0..n {
        row_probs(&coef, q, x.row(i), &mut probs);
        if probs[w[i]] > 1.0 - 1e-8 {
            saturated = true;
            break;
        }
    }
    if saturated {
        warnings.push(FitWarning::Separation);
    }
    if coef.iter().any(|c| !c.is_finite()) {
        return Err(Error::Failed("non-finite MLR coefficients".into()));
    }
    Ok(MlrModel {
        coefficients: Matrix::from_row_major(q, p, coef),
        converged,
        deviance: dev,
        deviance_trace: trace,
        iterations,
        warnings,
    })
}

/// Softmax propensity rows for `d` under a fitted model.
pub fn predict_gps_mlr(m: &MlrModel, d: &Dataset) -> Result<GpsMatrix> {
    if d.z() != m.n_treatments() || d.design_width() != m.design_width() {
        return Err(Error::Schema(alloc::format!(
            "model expects {} treatments and {} design columns, data has {} and {}",
            m.n_treatments(),
            m.design_width(),
            d.z(),
            d.design_width()
        )));
    }
    let x = with_intercept(&d.design_matrix());
    let q = m.n_treatments() - 1;
    let mut out = Matrix::zeros(d.n(), q + 1);
    for i in 0..d.n() {
        let row = out.row_mut(i);
        row_probs(m.coefficients.as_slice(), q, x.row(i), row);
    }
    GpsMatrix::from_probabilities(out)
}
