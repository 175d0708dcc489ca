//! Simulation designs: covariates, multinomial treatment assignment,
//! logistic response surfaces, intercept/prevalence calibration and
//! population truths.
//!
//! Covariates are `x1..x5 ~ N(0, 1)` and `x6..x10` three-level categorical.
//! The linear part of both models uses the 15 reference-coded columns
//! (5 continuous + 2 indicators per categorical); the nonlinear part uses the
//! transforms in [`CoefficientSet::q_terms`].

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::data::{ColumnKind, Dataset, Estimand, TreatmentPair};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;
use crate::rng::{self, label};

pub const N_CONTINUOUS: usize = 5;
pub const N_CATEGORICAL: usize = 5;
pub const N_COVARIATES: usize = N_CONTINUOUS + N_CATEGORICAL;
/// Reference-coded width of the linear predictor.
pub const LINEAR_WIDTH: usize = N_CONTINUOUS + 2 * N_CATEGORICAL;
pub const N_TREATMENTS: usize = 3;
pub const CATEGORY_PROBS: [f64; 3] = [0.3, 0.3, 0.4];
pub const SIM3_TREATMENT_PROBS: [f64; 3] = [0.05, 0.53, 0.42];
pub const CALIBRATION_SIZE: usize = 100_000;
pub const POPULATION_SIZE: usize = 100_000;
/// Master seed for slopes, calibration populations and truths.
pub const COEFFICIENT_SEED: u64 = 20_230_917;
/// Prevalence band for Simulation I and the demo data.
pub const SIM1_BAND: (f64, f64) = (0.02, 0.03);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Design {
    I,
    II,
    III,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Overlap {
    Strong,
    Moderate,
    Weak,
}

impl Overlap {
    pub fn as_str(self) -> &'static str {
        match self {
            Overlap::Strong => "strong",
            Overlap::Moderate => "moderate",
            Overlap::Weak => "weak",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub design: Design,
    pub scenario: u8,
    pub n: usize,
    /// Target group ratio `n_1 : n_2 : n_3` (Simulations I and II).
    pub ratio: [f64; 3],
    pub band: (f64, f64),
    pub overlap: Option<Overlap>,
    pub seed: u64,
}

impl SimConfig {
    /// Named scenarios: `sim1-s{1,2,3}`, `sim2-s{1,2}`, `sim3-s{1,2,3}`
    /// (strong, moderate, weak overlap).
    pub fn scenario(design: Design, scenario: u8, seed: u64) -> Result<Self> {
        let base = |n, ratio, band| SimConfig {
            design,
            scenario,
            n,
            ratio,
            band,
            overlap: None,
            seed,
        };
        let cfg = match (design, scenario) {
            (Design::I, 1) => base(1500, [1.0, 1.0, 1.0], SIM1_BAND),
            (Design::I, 2) => base(4000, [1.0, 4.0, 3.0], SIM1_BAND),
            (Design::I, 3) => base(9500, [1.0, 10.0, 8.0], SIM1_BAND),
            (Design::II, 1) => base(9500, [1.0, 10.0, 8.0], (0.01, 0.05)),
            (Design::II, 2) => base(9500, [1.0, 10.0, 8.0], (0.05, 0.10)),
            (Design::III, 1..=3) => SimConfig {
                overlap: Some([Overlap::Strong, Overlap::Moderate, Overlap::Weak][scenario as usize - 1]),
                ..base(9500, SIM3_TREATMENT_PROBS, (0.01, 0.05))
            },
            _ => {
                return Err(Error::Precondition(format!(
                    "unknown scenario {scenario} for design {design:?}"
                )))
            }
        };
        Ok(cfg)
    }

    /// Parses names such as `sim1-s3` or `sim3-weak`.
    pub fn from_name(name: &str, seed: u64) -> Result<Self> {
        let err = || Error::Precondition(format!("unknown scenario name '{name}'"));
        let (d, s) = name.split_once('-').ok_or_else(err)?;
        let design = match d {
            "sim1" => Design::I,
            "sim2" => Design::II,
            "sim3" => Design::III,
            _ => return Err(err()),
        };
        let id = match s {
            "strong" => 1,
            "moderate" => 2,
            "weak" => 3,
            _ => s.strip_prefix('s').and_then(|v| v.parse().ok()).ok_or_else(err)?,
        };
        Self::scenario(design, id, seed)
    }

    pub fn name(&self) -> String {
        let d = match self.design {
            Design::I => 1,
            Design::II => 2,
            Design::III => 3,
        };
        format!("sim{d}-s{}", self.scenario)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Precondition("N must be positive".into()));
        }
        if self.ratio.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::Precondition("ratio components must be positive".into()));
        }
        check_band(self.band)
    }
}

fn check_band(band: (f64, f64)) -> Result<()> {
    if !(band.0 > 0.0 && band.0 < band.1 && band.1 < 1.0) {
        return Err(Error::Precondition(format!(
            "prevalence band must satisfy 0 < lo < hi < 1, got ({}, {})",
            band.0, band.1
        )));
    }
    Ok(())
}

/// One term of the nonlinear vector `Q`; indices are 0-based covariate
/// columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QTerm {
    Square(usize),
    Product(usize, usize),
    /// `I(x_var > at) · x_var`.
    Threshold { var: usize, at: f64 },
    /// `I(x_cat = level) · x_var`.
    LevelTimes { cat: usize, level: usize, var: usize },
}

impl QTerm {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            QTerm::Square(v) => x[v] * x[v],
            QTerm::Product(a, b) => x[a] * x[b],
            QTerm::Threshold { var, at } => {
                if x[var] > at {
                    x[var]
                } else {
                    0.0
                }
            }
            QTerm::LevelTimes { cat, level, var } => {
                if x[cat] as usize == level {
                    x[var]
                } else {
                    0.0
                }
            }
        }
    }

    fn vars(&self) -> [usize; 2] {
        match *self {
            QTerm::Square(v) | QTerm::Threshold { var: v, .. } => [v, v],
            QTerm::Product(a, b) => [a, b],
            QTerm::LevelTimes { cat, var, .. } => [cat, var],
        }
    }
}

impl fmt::Display for QTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            QTerm::Square(v) => write!(f, "sq(x{})", v + 1),
            QTerm::Product(a, b) => write!(f, "prod(x{},x{})", a + 1, b + 1),
            QTerm::Threshold { var, at } => write!(f, "gt(x{},{at})", var + 1),
            QTerm::LevelTimes { cat, level, var } => {
                write!(f, "lvl(x{},{level},x{})", cat + 1, var + 1)
            }
        }
    }
}

impl FromStr for QTerm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::Validation(format!("bad transform '{s}'"));
        let (head, rest) = s.split_once('(').ok_or_else(err)?;
        let args: Vec<&str> = rest.strip_suffix(')').ok_or_else(err)?.split(',').collect();
        let var = |a: &str| -> Result<usize> {
            a.strip_prefix('x')
                .and_then(|v| v.parse::<usize>().ok())
                .filter(|&v| v >= 1)
                .map(|v| v - 1)
                .ok_or_else(err)
        };
        match (head, args.as_slice()) {
            ("sq", [a]) => Ok(QTerm::Square(var(a)?)),
            ("prod", [a, b]) => Ok(QTerm::Product(var(a)?, var(b)?)),
            ("gt", [a, t]) => Ok(QTerm::Threshold {
                var: var(a)?,
                at: t.parse().map_err(|_| err())?,
            }),
            ("lvl", [c, l, a]) => Ok(QTerm::LevelTimes {
                cat: var(c)?,
                level: l.parse().map_err(|_| err())?,
                var: var(a)?,
            }),
            _ => Err(err()),
        }
    }
}

/// `{x1², x2², x1·x2, x3·x4, I(x5 > 0.5)·x5}` plus `x6 × x1` and `x7 × x3`
/// through the indicators of their two non-reference levels.
pub fn default_q_terms() -> Vec<QTerm> {
    vec![
        QTerm::Square(0),
        QTerm::Square(1),
        QTerm::Product(0, 1),
        QTerm::Product(2, 3),
        QTerm::Threshold { var: 4, at: 0.5 },
        QTerm::LevelTimes { cat: 5, level: 1, var: 0 },
        QTerm::LevelTimes { cat: 5, level: 2, var: 0 },
        QTerm::LevelTimes { cat: 6, level: 1, var: 2 },
        QTerm::LevelTimes { cat: 6, level: 2, var: 2 },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    /// Treatment-model intercepts for arms 1 and 2 (arm 3 is the reference).
    pub alpha: [f64; 2],
    pub xi_linear: [Vec<f64>; 2],
    pub xi_nonlinear: [Vec<f64>; 2],
    /// Response-surface intercepts per arm.
    pub tau: [f64; 3],
    pub eta_linear: [Vec<f64>; 3],
    pub eta_nonlinear: [Vec<f64>; 3],
    pub q_terms: Vec<QTerm>,
}

impl CoefficientSet {
    /// Zero intercepts with every slope drawn from `Uniform(-0.4, 0.4)`.
    pub fn random_slopes(seed: u64) -> Self {
        let mut r = rng::stream(seed, &[label::COEFFICIENTS]);
        let q_terms = default_q_terms();
        let mut draw = |len: usize| -> Vec<f64> {
            (0..len).map(|_| r.random_range(-0.4..0.4)).collect()
        };
        let xi_linear = [draw(LINEAR_WIDTH), draw(LINEAR_WIDTH)];
        let xi_nonlinear = [draw(q_terms.len()), draw(q_terms.len())];
        let eta_linear = [draw(LINEAR_WIDTH), draw(LINEAR_WIDTH), draw(LINEAR_WIDTH)];
        let eta_nonlinear = [draw(q_terms.len()), draw(q_terms.len()), draw(q_terms.len())];
        Self {
            alpha: [0.0; 2],
            xi_linear,
            xi_nonlinear,
            tau: [0.0; 3],
            eta_linear,
            eta_nonlinear,
            q_terms,
        }
    }

    /// All intercepts and slopes zero.
    pub fn zeros() -> Self {
        let q_terms = default_q_terms();
        let q = q_terms.len();
        Self {
            alpha: [0.0; 2],
            xi_linear: [vec![0.0; LINEAR_WIDTH], vec![0.0; LINEAR_WIDTH]],
            xi_nonlinear: [vec![0.0; q], vec![0.0; q]],
            tau: [0.0; 3],
            eta_linear: [vec![0.0; LINEAR_WIDTH], vec![0.0; LINEAR_WIDTH], vec![0.0; LINEAR_WIDTH]],
            eta_nonlinear: [vec![0.0; q], vec![0.0; q], vec![0.0; q]],
            q_terms,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.q_terms.len();
        let lin_ok = self.xi_linear.iter().chain(&self.eta_linear).all(|v| v.len() == LINEAR_WIDTH);
        let nl_ok = self.xi_nonlinear.iter().chain(&self.eta_nonlinear).all(|v| v.len() == q);
        if !lin_ok || !nl_ok {
            return Err(Error::Validation("coefficient vector lengths do not match".into()));
        }
        let finite = self
            .alpha
            .iter()
            .chain(&self.tau)
            .chain(self.xi_linear.iter().flatten())
            .chain(self.xi_nonlinear.iter().flatten())
            .chain(self.eta_linear.iter().flatten())
            .chain(self.eta_nonlinear.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Validation("coefficients must be finite".into()));
        }
        for t in &self.q_terms {
            if t.vars().iter().any(|&v| v >= N_COVARIATES) {
                return Err(Error::Validation(format!("transform {t} references a missing covariate")));
            }
            if let QTerm::LevelTimes { cat, level, var } = *t {
                if cat < N_CONTINUOUS || var >= N_CONTINUOUS || level == 0 || level > 2 {
                    return Err(Error::Validation(format!("transform {t} is not categorical x continuous")));
                }
            }
        }
        Ok(())
    }

    fn q_values(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.q_terms.iter().map(|t| t.eval(x)));
    }

    /// Linear predictors `(α_1 + X ξ_1 + Q ξ_1', α_2 + X ξ_2 + Q ξ_2')`.
    fn treatment_scores(&self, lin: &[f64], q: &[f64]) -> [f64; 2] {
        [0, 1].map(|a| {
            self.alpha[a]
                + crate::linalg::dot(lin, &self.xi_linear[a])
                + crate::linalg::dot(q, &self.xi_nonlinear[a])
        })
    }

    fn outcome_scores(&self, lin: &[f64], q: &[f64]) -> [f64; 3] {
        [0, 1, 2].map(|w| {
            self.tau[w]
                + crate::linalg::dot(lin, &self.eta_linear[w])
                + crate::linalg::dot(q, &self.eta_nonlinear[w])
        })
    }
}

pub fn covariate_names() -> Vec<String> {
    (1..=N_COVARIATES).map(|j| format!("x{j}")).collect()
}

pub fn covariate_kinds() -> Vec<ColumnKind> {
    let mut k = vec![ColumnKind::Continuous; N_CONTINUOUS];
    k.extend(vec![ColumnKind::Categorical { levels: 3 }; N_CATEGORICAL]);
    k
}

/// Reference-coded linear features of one covariate row.
pub fn linear_features(x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend_from_slice(&x[..N_CONTINUOUS]);
    for &c in &x[N_CONTINUOUS..N_COVARIATES] {
        let lvl = c as usize;
        out.push(if lvl == 1 { 1.0 } else { 0.0 });
        out.push(if lvl == 2 { 1.0 } else { 0.0 });
    }
}

/// `N × 10` covariates: standard normal continuous columns and categorical
/// columns with level probabilities (0.3, 0.3, 0.4).
pub fn generate_covariates_sim12(n: usize, seed: u64) -> Matrix {
    let mut r = rng::stream(seed, &[label::COVARIATES]);
    let mut x = Matrix::zeros(n, N_COVARIATES);
    for i in 0..n {
        let row = x.row_mut(i);
        for v in row.iter_mut().take(N_CONTINUOUS) {
            *v = rng::std_normal(&mut r);
        }
        for v in row.iter_mut().skip(N_CONTINUOUS) {
            *v = rng::categorical(&mut r, &CATEGORY_PROBS) as f64;
        }
    }
    x
}

/// True multinomial-logit treatment probabilities (arm 3 reference), N × 3.
pub fn treatment_probabilities(x: &Matrix, coeffs: &CoefficientSet) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), N_TREATMENTS);
    let (mut lin, mut q) = (Vec::new(), Vec::new());
    for i in 0..x.rows() {
        linear_features(x.row(i), &mut lin);
        coeffs.q_values(x.row(i), &mut q);
        let s = coeffs.treatment_scores(&lin, &q);
        let m = s[0].max(s[1]).max(0.0);
        let e = [math::exp(s[0] - m), math::exp(s[1] - m), math::exp(-m)];
        let tot = e[0] + e[1] + e[2];
        let row = out.row_mut(i);
        for w in 0..3 {
            row[w] = e[w] / tot;
        }
    }
    out
}

pub fn assign_treatment(x: &Matrix, coeffs: &CoefficientSet, seed: u64) -> Vec<usize> {
    let probs = treatment_probabilities(x, coeffs);
    let mut r = rng::stream(seed, &[label::TREATMENT]);
    (0..x.rows()).map(|i| rng::categorical(&mut r, probs.row(i))).collect()
}

/// `truth[i][w] = expit(τ_w + X_i η_w + Q_i η_w')`, N × 3.
pub fn outcome_probabilities(x: &Matrix, coeffs: &CoefficientSet) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), N_TREATMENTS);
    let (mut lin, mut q) = (Vec::new(), Vec::new());
    for i in 0..x.rows() {
        linear_features(x.row(i), &mut lin);
        coeffs.q_values(x.row(i), &mut q);
        let s = coeffs.outcome_scores(&lin, &q);
        let row = out.row_mut(i);
        for w in 0..3 {
            // Kept strictly inside (0, 1).
            row[w] = math::expit(s[w]).clamp(1e-300, 1.0 - 1e-16);
        }
    }
    out
}

/// Draws `Y_i ~ Bernoulli(truth[i][W_i])`; returns outcomes and the truth matrix.
pub fn generate_outcomes(
    x: &Matrix,
    w: &[usize],
    coeffs: &CoefficientSet,
    seed: u64,
) -> (Vec<u8>, Matrix) {
    let truth = outcome_probabilities(x, coeffs);
    let mut r = rng::stream(seed, &[label::OUTCOME]);
    let y = w
        .iter()
        .enumerate()
        .map(|(i, &wi)| u8::from(rng::uniform(&mut r) < truth[(i, wi)]))
        .collect();
    (y, truth)
}

/// Treatment intercepts giving expected group shares equal to `ratio`
/// (normalized) on a calibration population; every share ends within 1e-4.
pub fn calibrate_intercepts(coeffs: &CoefficientSet, ratio: [f64; 3], population: &Matrix) -> Result<[f64; 2]> {
    if ratio.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(Error::Precondition("ratio components must be positive".into()));
    }
    let total: f64 = ratio.iter().sum();
    let target = ratio.map(|r| r / total);
    let mut c = coeffs.clone();
    for _ in 0..100 {
        let shares = mean_columns(&treatment_probabilities(population, &c));
        if (0..3).all(|w| (shares[w] - target[w]).abs() < 1e-4) {
            return Ok(c.alpha);
        }
        for a in 0..2 {
            c.alpha[a] += math::ln(target[a] / shares[a]) - math::ln(target[2] / shares[2]);
        }
    }
    Err(Error::Calibration("treatment intercepts after 100 evaluations".into()))
}

fn mean_columns(m: &Matrix) -> Vec<f64> {
    let mut s = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        for (a, b) in s.iter_mut().zip(m.row(i)) {
            *a += b;
        }
    }
    s.iter().map(|v| v / m.rows() as f64).collect()
}

/// Expected prevalence among units of each arm, with `membership[i][w]` the
/// probability (or indicator) that unit `i` belongs to arm `w`.
pub fn group_prevalence(truth: &Matrix, membership: &Matrix) -> [f64; 3] {
    let mut num = [0.0; 3];
    let mut den = [0.0; 3];
    for i in 0..truth.rows() {
        for w in 0..3 {
            num[w] += membership[(i, w)] * truth[(i, w)];
            den[w] += membership[(i, w)];
        }
    }
    [0, 1, 2].map(|w| num[w] / den[w])
}

/// Response intercepts `τ_w` moving each arm's expected prevalence to the
/// midpoint of `band` (bisection on each `τ_w`, at most 100 evaluations).
pub fn calibrate_prevalence(
    coeffs: &CoefficientSet,
    band: (f64, f64),
    population: &Matrix,
    membership: &Matrix,
) -> Result<[f64; 3]> {
    check_band(band)?;
    let target = 0.5 * (band.0 + band.1);
    let mut c = coeffs.clone();
    let mut out = [0.0; 3];
    for w in 0..3 {
        let (mut lo, mut hi) = (-30.0, 30.0);
        let mut found = None;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            c.tau[w] = mid;
            let prev = group_prevalence(&outcome_probabilities(population, &c), membership)[w];
            if (prev - target).abs() < 1e-6 * target {
                found = Some(mid);
                break;
            }
            if prev < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out[w] = found.ok_or_else(|| Error::Calibration(format!("outcome intercept for arm {}", w + 1)))?;
        c.tau[w] = out[w];
    }
    Ok(out)
}

/// Treatment first: `W ~ Categorical(0.05, 0.53, 0.42)`.
pub fn draw_sim3_treatment(n: usize, seed: u64) -> Vec<usize> {
    let mut r = rng::stream(seed, &[label::TREATMENT]);
    (0..n).map(|_| rng::categorical(&mut r, &SIM3_TREATMENT_PROBS)).collect()
}

/// Covariates given treatment (arms 1-based in the formulas):
/// strong `N(0, 1 − 0.01W)`, categorical (0.3, 0.3, 0.4);
/// moderate `N(0.05W, 1 − 0.05W)`, categorical (0.3 − 0.01W, 0.3 + 0.01W, 0.4);
/// weak `N(−0.5 | 1 | 2, 1)`, categorical (0.3 − 0.001W, 0.3 + 0.001W, 0.4).
/// The second normal parameter is a variance.
pub fn generate_sim3_covariates(w: &[usize], level: Overlap, seed: u64) -> Matrix {
    let mut r = rng::stream(seed, &[label::COVARIATES]);
    let mut x = Matrix::zeros(w.len(), N_COVARIATES);
    for (i, &wi) in w.iter().enumerate() {
        let wf = (wi + 1) as f64;
        let (mean, var, cat) = match level {
            Overlap::Strong => (0.0, 1.0 - 0.01 * wf, CATEGORY_PROBS),
            Overlap::Moderate => (0.05 * wf, 1.0 - 0.05 * wf, [0.3 - 0.01 * wf, 0.3 + 0.01 * wf, 0.4]),
            Overlap::Weak => ([-0.5, 1.0, 2.0][wi], 1.0, [0.3 - 0.001 * wf, 0.3 + 0.001 * wf, 0.4]),
        };
        let sd = math::sqrt(var);
        let row = x.row_mut(i);
        for v in row.iter_mut().take(N_CONTINUOUS) {
            *v = mean + sd * rng::std_normal(&mut r);
        }
        for v in row.iter_mut().skip(N_CONTINUOUS) {
            *v = rng::categorical(&mut r, &cat) as f64;
        }
    }
    x
}

fn indicator_membership(w: &[usize]) -> Matrix {
    let mut m = Matrix::zeros(w.len(), 3);
    for (i, &wi) in w.iter().enumerate() {
        m[(i, wi)] = 1.0;
    }
    m
}

/// Covariates (and for Simulation III treatments) of a population drawn
/// from the scenario's joint distribution.
pub fn population(cfg: &SimConfig, n: usize, seed: u64) -> (Matrix, Option<Vec<usize>>) {
    match cfg.overlap {
        Some(level) if cfg.design == Design::III => {
            let w = draw_sim3_treatment(n, seed);
            (generate_sim3_covariates(&w, level, seed), Some(w))
        }
        _ => (generate_covariates_sim12(n, seed), None),
    }
}

/// Population mean risk under each arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueEffects {
    pub risks: [f64; 3],
}

impl TrueEffects {
    pub fn effect(&self, pair: TreatmentPair, estimand: Estimand) -> Result<f64> {
        if pair.k >= 3 || pair.l >= 3 {
            return Err(Error::Precondition("treatment level out of range".into()));
        }
        if pair.k == pair.l {
            return Ok(match estimand {
                Estimand::Rd => 0.0,
                Estimand::Rr => 1.0,
            });
        }
        estimand.contrast(self.risks[pair.k], self.risks[pair.l])
    }
}

/// Mean of `truth[·][w]` over a population of covariate rows.
pub fn true_effects(coeffs: &CoefficientSet, population: &Matrix) -> TrueEffects {
    let m = mean_columns(&outcome_probabilities(population, coeffs));
    TrueEffects {
        risks: [m[0], m[1], m[2]],
    }
}

/// `mean_i truth[i][k] − mean_i truth[i][l]` (or the ratio) over a fresh
/// population of `n_pop` units from the scenario's covariate distribution.
pub fn true_ate(
    cfg: &SimConfig,
    coeffs: &CoefficientSet,
    pair: TreatmentPair,
    estimand: Estimand,
    n_pop: usize,
    seed: u64,
) -> Result<f64> {
    if pair.k == pair.l {
        return TrueEffects { risks: [0.0; 3] }.effect(pair, estimand);
    }
    let (x, _) = population(cfg, n_pop, seed);
    true_effects(coeffs, &x).effect(pair, estimand)
}

/// Frozen coefficients for a scenario: shared slopes, calibrated intercepts.
/// Simulation III keeps zero treatment intercepts (treatment is drawn first)
/// and calibrates `τ` against observed group membership.
pub fn build_coefficients(cfg: &SimConfig) -> Result<CoefficientSet> {
    cfg.validate()?;
    let mut c = CoefficientSet::random_slopes(COEFFICIENT_SEED);
    let cal_seed = rng::derive_seed(COEFFICIENT_SEED, &[label::CALIBRATION]);
    let (x, w) = population(cfg, CALIBRATION_SIZE, cal_seed);
    let membership = match w {
        Some(w) => indicator_membership(&w),
        None => {
            c.alpha = calibrate_intercepts(&c, cfg.ratio, &x)?;
            treatment_probabilities(&x, &c)
        }
    };
    c.tau = calibrate_prevalence(&c, cfg.band, &x, &membership)?;
    Ok(c)
}

/// Stored truths are computed on this population.
pub fn reference_truth(cfg: &SimConfig, coeffs: &CoefficientSet) -> TrueEffects {
    let seed = rng::derive_seed(COEFFICIENT_SEED, &[label::POPULATION]);
    let (x, _) = population(cfg, POPULATION_SIZE, seed);
    true_effects(coeffs, &x)
}

/// One simulated dataset of replication `rep`, with the per-unit truth
/// matrix attached.
pub fn simulate(cfg: &SimConfig, coeffs: &CoefficientSet, rep: u64) -> Result<Dataset> {
    cfg.validate()?;
    coeffs.validate()?;
    let seed = rng::derive_seed(cfg.seed, &[label::REPLICATION, rep]);
    let (x, w) = population(cfg, cfg.n, seed);
    let w = match w {
        Some(w) => w,
        None => assign_treatment(&x, coeffs, seed),
    };
    let (y, truth) = generate_outcomes(&x, &w, coeffs, seed);
    Dataset::new_unvalidated_groups(covariate_names(), covariate_kinds(), x, w, y, N_TREATMENTS, Some(truth))
}

/// Demo data shaped like a three-arm registry extract (11,980 units,
/// 396 : 6,582 : 5,002), built on the Simulation I slopes.
pub fn demo_config(seed: u64) -> SimConfig {
    SimConfig {
        design: Design::I,
        scenario: 0,
        n: 11_980,
        ratio: [396.0, 6582.0, 5002.0],
        band: SIM1_BAND,
        overlap: None,
        seed,
    }
}

impl fmt::Display for SimConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl Design {
    pub fn as_str(self) -> &'static str {
        match self {
            Design::I => "sim1",
            Design::II => "sim2",
            Design::III => "sim3",
        }
    }
}

impl fmt::Display for Overlap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
