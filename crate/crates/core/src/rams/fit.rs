use alloc::vec;
use alloc::vec::Vec;

use super::basis::SplineBasis;
use crate::data::{CausalEstimate, Dataset, Estimand, TreatmentPair};
use crate::error::{Error, FitWarning, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::math;

const MAX_ITER: usize = 100;
const TOL: f64 = 1e-10;
const MAX_HALVINGS: usize = 10;
const RIDGE_FLOOR: f64 = 1e-4;
/// Linear predictor magnitude treated as separation.
const ETA_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    Fixed(f64),
    /// Generalized cross-validation over [`lambda_grid`].
    Auto,
}

/// 20 log-spaced smoothing values from 1e-3 to 1e5.
pub fn lambda_grid() -> Vec<f64> {
    (0..20)
        .map(|i| math::powf(10.0, -3.0 + 8.0 * i as f64 / 19.0))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RamsModel {
    /// Treatment coefficients, last entry fixed at 0.
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub lambda: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Effective degrees of freedom of the spline part.
    pub edf: f64,
    pub deviance: f64,
    /// Penalized deviance after each accepted step, starting value first.
    pub penalized_deviance_trace: Vec<f64>,
    /// `(λ, GCV score, spline edf)` per grid point when λ was selected.
    pub gcv_trace: Vec<(f64, f64, f64)>,
    pub warnings: Vec<FitWarning>,
}

impl RamsModel {
    pub fn z(&self) -> usize {
        self.beta.len()
    }

    /// `h(R(X_i))` for every row of `basis`.
    pub fn spline_values(&self, basis: &SplineBasis) -> Vec<f64> {
        (0..basis.n())
            .map(|i| basis.row(i).iter().map(|&(j, v)| v * self.gamma[j]).sum())
            .collect()
    }

    /// Logit-scale prediction for row `i` of `basis` under treatment `k`.
    pub fn linear_predictor(&self, basis: &SplineBasis, i: usize, k: usize) -> f64 {
        self.beta[k] + basis.row(i).iter().map(|&(j, v)| v * self.gamma[j]).sum::<f64>()
    }
}

struct Problem<'a> {
    basis: &'a SplineBasis,
    treatment: &'a [usize],
    y: Vec<f64>,
    n_beta: usize,
}

struct Solution {
    theta: Vec<f64>,
    converged: bool,
    iterations: usize,
    deviance: f64,
    trace: Vec<f64>,
    edf_spline: f64,
    edf_total: f64,
    separated: bool,
    halving_failed: Option<usize>,
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        self.n_beta + self.basis.width
    }

    fn eta(&self, theta: &[f64], i: usize) -> f64 {
        let w = self.treatment[i];
        let mut e = if w < self.n_beta { theta[w] } else { 0.0 };
        for &(j, v) in self.basis.row(i) {
            e += v * theta[self.n_beta + j];
        }
        e
    }

    fn deviance(&self, theta: &[f64]) -> f64 {
        let mut dev = 0.0;
        for i in 0..self.y.len() {
            let e = self.eta(theta, i);
            dev += if self.y[i] > 0.5 {
                math::softplus(-e)
            } else {
                math::softplus(e)
            };
        }
        2.0 * dev
    }

    fn penalty(&self, lambda: f64, ridge: f64) -> Matrix {
        let p = self.dim();
        let mut m = Matrix::zeros(p, p);
        let b = self.basis.width;
        for a in 0..b {
            for c in 0..b {
                m[(self.n_beta + a, self.n_beta + c)] = lambda * self.basis.penalty[(a, c)];
            }
        }
        for j in 0..p {
            m[(j, j)] += ridge;
        }
        m
    }

    fn quad(pen: &Matrix, theta: &[f64]) -> f64 {
        crate::linalg::dot(theta, &pen.mul_vec(theta))
    }

    /// Weighted cross-product and score at `theta`.
    fn information(&self, theta: &[f64]) -> (Matrix, Vec<f64>) {
        let p = self.dim();
        let mut xwx = Matrix::zeros(p, p);
        let mut score = vec![0.0; p];
        let mut idx: Vec<(usize, f64)> = Vec::with_capacity(32);
        for i in 0..self.y.len() {
            let mu = math::expit(self.eta(theta, i));
            let w = mu * (1.0 - mu);
            idx.clear();
            let t = self.treatment[i];
            if t < self.n_beta {
                idx.push((t, 1.0));
            }
            idx.extend(self.basis.row(i).iter().map(|&(j, v)| (self.n_beta + j, v)));
            let r = self.y[i] - mu;
            for &(a, va) in &idx {
                score[a] += va * r;
                for &(c, vc) in &idx {
                    xwx[(a, c)] += w * va * vc;
                }
            }
        }
        (xwx, score)
    }

    fn solve(&self, lambda: f64, ridge: f64, start: &[f64]) -> Result<Solution> {
        let pen = self.penalty(lambda, ridge);
        let mut theta = start.to_vec();
        let mut dev = self.deviance(&theta);
        let mut pdev = dev + Self::quad(&pen, &theta);
        let mut trace = vec![pdev];
        let mut converged = false;
        let mut halving_failed = None;
        let mut iterations = 0;
        for it in 1..=MAX_ITER {
            iterations = it;
            let (mut h, mut g) = self.information(&theta);
            let pt = pen.mul_vec(&theta);
            for (gj, pj) in g.iter_mut().zip(&pt) {
                *gj -= pj;
            }
            h.add_scaled(&pen, 1.0);
            let step = Cholesky::new(&h)?.solve(&g);
            let mut scale = 1.0;
            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                let trial: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t + scale * s).collect();
                let tdev = self.deviance(&trial);
                let tp = tdev + Self::quad(&pen, &trial);
                if tp.is_finite() && tp <= pdev {
                    accepted = Some((trial, tdev, tp));
                    break;
                }
                scale *= 0.5;
            }
            let Some((trial, tdev, tp)) = accepted else {
                // No decrease available: at the optimum to machine precision
                // or stuck.
                let gnorm = g.iter().map(|v| v * v).sum::<f64>();
                converged = gnorm < 1e-12 * (1.0 + pdev * pdev);
                if !converged {
                    halving_failed = Some(it);
                }
                break;
            };
            let change = (pdev - tp).abs() / (tp.abs() + 0.1);
            theta = trial;
            dev = tdev;
            pdev = tp;
            trace.push(pdev);
            if change < TOL {
                converged = true;
                break;
            }
        }
        let (xwx, _) = self.information(&theta);
        let mut h = xwx.clone();
        h.add_scaled(&pen, 1.0);
        let hinv = Cholesky::new(&h)?.inverse();
        let p = self.dim();
        let mut edf_spline = 0.0;
        let mut edf_total = 0.0;
        for j in 0..p {
            let fjj: f64 = (0..p).map(|m| hinv[(j, m)] * xwx[(m, j)]).sum();
            edf_total += fjj;
            if j >= self.n_beta {
                edf_spline += fjj;
            }
        }
        let separated = !converged
            || (0..self.y.len()).any(|i| math::abs(self.eta(&theta, i)) > ETA_LIMIT);
        Ok(Solution {
            theta,
            converged,
            iterations,
            deviance: dev,
            trace,
            edf_spline,
            edf_total,
            separated,
            halving_failed,
        })
    }

    /// Fit at one λ, retrying with a ridge floor on separation or a
    /// singular system.
    fn fit(&self, lambda: f64, start: &[f64], warnings: &mut Vec<FitWarning>) -> Result<Solution> {
        match self.solve(lambda, 0.0, start) {
            Ok(s) if !s.separated => Ok(s),
            first => {
                if matches!(first, Ok(ref s) if s.separated) {
                    log::debug!("separation in spline outcome model at lambda {lambda}; using ridge floor");
                }
                let lam = lambda.max(RIDGE_FLOOR);
                let s = self.solve(lam, RIDGE_FLOOR, &self.initial())?;
                warnings.push(FitWarning::RidgeFallback { lambda: RIDGE_FLOOR });
                Ok(s)
            }
        }
    }

    fn initial(&self) -> Vec<f64> {
        let mut theta = vec![0.0; self.dim()];
        let ybar = self.y.iter().sum::<f64>() / self.y.len() as f64;
        let unity = (0..self.basis.n()).all(|i| {
            let s: f64 = self.basis.row(i).iter().map(|&(_, v)| v).sum();
            (s - 1.0).abs() < 1e-8
        });
        if unity {
            for t in theta[self.n_beta..].iter_mut() {
                *t = math::logit(ybar);
            }
        }
        theta
    }
}

/// Penalized IRLS fit of `logit P(Y=1) = β_W + B(R) γ` with penalty
/// `λ γ' S γ`. `Lambda::Auto` minimizes `GCV = N D / (N − edf)^2` over
/// [`lambda_grid`].
pub fn fit_rams(d: &Dataset, basis: &SplineBasis, lambda: Lambda) -> Result<RamsModel> {
    if basis.n() != d.n() {
        return Err(Error::Schema("basis rows must match units".into()));
    }
    for (w, &s) in d.group_sizes().iter().enumerate() {
        if s == 0 {
            return Err(Error::EmptyGroup(w + 1));
        }
    }
    let events = d.events();
    if events == 0 {
        return Err(Error::NoEvents);
    }
    if events == d.n() {
        return Err(Error::DegenerateOutcome(1));
    }
    if let Lambda::Fixed(l) = lambda {
        if !(l >= 0.0) || !l.is_finite() {
            return Err(Error::Precondition("lambda must be finite and >= 0".into()));
        }
    }
    let problem = Problem {
        basis,
        treatment: d.treatment(),
        y: d.outcome().iter().map(|&y| y as f64).collect(),
        n_beta: d.z() - 1,
    };
    let n = d.n() as f64;
    let mut warnings = Vec::new();
    let (lam, sol, gcv_trace) = match lambda {
        Lambda::Fixed(l) => {
            let s = problem.fit(l, &problem.initial(), &mut warnings)?;
            (l, s, Vec::new())
        }
        Lambda::Auto => {
            let mut start = problem.initial();
            let mut best: Option<(f64, f64, Solution, Vec<FitWarning>)> = None;
            let mut trace = Vec::new();
            for l in lambda_grid() {
                let mut w = Vec::new();
                let s = problem.fit(l, &start, &mut w)?;
                let denom = n - s.edf_total;
                let gcv = if denom > 0.0 {
                    n * s.deviance / (denom * denom)
                } else {
                    f64::INFINITY
                };
                trace.push((l, gcv, s.edf_spline));
                start = s.theta.clone();
                if best.as_ref().is_none_or(|b| gcv < b.1) {
                    best = Some((l, gcv, s, w));
                }
            }
            let (l, _, s, w) = best.expect("grid is non-empty");
            warnings.extend(w);
            (l, s, trace)
        }
    };
    if !sol.converged {
        warnings.push(FitWarning::NotConverged {
            iterations: sol.iterations,
        });
    }
    if let Some(iteration) = sol.halving_failed {
        warnings.push(FitWarning::StepHalvingFailed { iteration });
    }
    let mut beta = sol.theta[..problem.n_beta].to_vec();
    beta.push(0.0);
    Ok(RamsModel {
        beta,
        gamma: sol.theta[problem.n_beta..].to_vec(),
        lambda: lam,
        converged: sol.converged,
        iterations: sol.iterations,
        edf: sol.edf_spline,
        deviance: sol.deviance,
        penalized_deviance_trace: sol.trace,
        gcv_trace,
        warnings,
    })
}

/// Mean predicted risk under each treatment with `h` held at its fitted value.
pub fn potential_risks(m: &RamsModel, basis: &SplineBasis) -> Vec<f64> {
    let h = m.spline_values(basis);
    let n = h.len() as f64;
    m.beta
        .iter()
        .map(|&b| h.iter().map(|&hi| math::expit(b + hi)).sum::<f64>() / n)
        .collect()
}

pub fn estimate_ate_rams(
    m: &RamsModel,
    d: &Dataset,
    basis: &SplineBasis,
    pair: TreatmentPair,
    estimand: Estimand,
) -> Result<CausalEstimate> {
    if basis.n() != d.n() || m.z() != d.z() || m.gamma.len() != basis.width {
        return Err(Error::Schema("model, basis and data do not match".into()));
    }
    pair.check(d.z())?;
    let risks = potential_risks(m, basis);
    let point = estimand.contrast(risks[pair.k], risks[pair.l])?;
    Ok(CausalEstimate::new(pair, estimand, point, "rams", d.n()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnKind, GpsMatrix};
    use crate::rams::build_tensor_basis;
    use crate::rng;
    use alloc::string::ToString;
    use rand::Rng;

    fn toy(n: usize, seed: u64, effect: impl Fn(f64, usize) -> f64) -> (Dataset, GpsMatrix) {
        let mut r = rng::stream(seed, &[1]);
        let mut x = Matrix::zeros(n, 1);
        let mut w = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        let mut probs = Matrix::zeros(n, 3);
        for i in 0..n {
            let xi = rng::std_normal(&mut r);
            x[(i, 0)] = xi;
            let s = [0.0, 0.6 * xi, -0.6 * xi];
            let m = s.iter().map(|v| math::exp(*v)).sum::<f64>();
            let p: Vec<f64> = s.iter().map(|v| math::exp(*v) / m).collect();
            probs.row_mut(i).copy_from_slice(&p);
            let wi = rng::categorical(&mut r, &p);
            w.push(wi);
            y.push(u8::from(r.random::<f64>() < math::expit(effect(xi, wi))));
        }
        let d = Dataset::new(
            vec!["x1".to_string()],
            vec![ColumnKind::Continuous],
            x,
            w,
            y,
            3,
            None,
        )
        .unwrap();
        (d, GpsMatrix::from_valid(probs).unwrap())
    }

    #[test]
    fn logit_contrast_is_beta_difference() {
        let (d, g) = toy(600, 3, |x, w| -1.0 + 0.8 * x + 0.3 * w as f64);
        let b = build_tensor_basis(&g, 5, 3).unwrap();
        let m = fit_rams(&d, &b, Lambda::Fixed(1.0)).unwrap();
        for i in 0..d.n() {
            let diff = m.linear_predictor(&b, i, 0) - m.linear_predictor(&b, i, 2);
            assert!((diff - (m.beta[0] - m.beta[2])).abs() < 1e-10);
        }
    }

    #[test]
    fn penalized_deviance_never_increases() {
        let (d, g) = toy(500, 5, |x, _| -1.5 + x * x);
        let b = build_tensor_basis(&g, 5, 3).unwrap();
        let m = fit_rams(&d, &b, Lambda::Fixed(0.1)).unwrap();
        assert!(m.converged);
        for w in m.penalized_deviance_trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn equal_betas_give_zero_difference() {
        let (d, g) = toy(300, 9, |_, _| -1.0);
        let b = build_tensor_basis(&g, 3, 3).unwrap();
        let mut m = fit_rams(&d, &b, Lambda::Fixed(10.0)).unwrap();
        m.beta[1] = m.beta[0];
        let e = estimate_ate_rams(&m, &d, &b, TreatmentPair::new(0, 1).unwrap(), Estimand::Rd).unwrap();
        assert_eq!(e.point, 0.0);
    }

    #[test]
    fn antisymmetric_risk_difference() {
        let (d, g) = toy(400, 11, |x, w| -1.0 + 0.5 * x - 0.4 * w as f64);
        let b = build_tensor_basis(&g, 5, 3).unwrap();
        let m = fit_rams(&d, &b, Lambda::Auto).unwrap();
        let kl = estimate_ate_rams(&m, &d, &b, TreatmentPair::new(0, 2).unwrap(), Estimand::Rd).unwrap();
        let lk = estimate_ate_rams(&m, &d, &b, TreatmentPair::new(2, 0).unwrap(), Estimand::Rd).unwrap();
        assert_eq!(kl.point, -lk.point);
        assert_eq!(m.gcv_trace.len(), 20);
    }

    #[test]
    fn no_events_is_an_error() {
        let (d, g) = toy(100, 1, |_, _| -50.0);
        let b = build_tensor_basis(&g, 3, 3).unwrap();
        assert_eq!(fit_rams(&d, &b, Lambda::Auto).unwrap_err(), Error::NoEvents);
    }
}
