//! Shared domain types: the observed dataset, the generalized propensity
//! score matrix, and pairwise effect estimates.
//!
//! Treatment labels are 0-based inside the crate (`0..z`). File formats and
//! displays use the 1-based labels `1..=z`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Lower clamp applied to every propensity entry; the upper clamp is `1 - GPS_CLAMP`.
pub const GPS_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Continuous,
    /// Integer-coded with contiguous levels `0..levels`.
    Categorical { levels: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    kinds: Vec<ColumnKind>,
    covariates: Matrix,
    treatment: Vec<usize>,
    outcome: Vec<u8>,
    n_treatments: usize,
    truth: Option<Matrix>,
}

impl Dataset {
    /// Validates and assembles a dataset.
    ///
    /// `treatment` holds 0-based labels; each of `0..n_treatments` must occur.
    pub fn new(
        names: Vec<String>,
        kinds: Vec<ColumnKind>,
        covariates: Matrix,
        treatment: Vec<usize>,
        outcome: Vec<u8>,
        n_treatments: usize,
        truth: Option<Matrix>,
    ) -> Result<Self> {
        let d = Self::new_unvalidated_groups(
            names,
            kinds,
            covariates,
            treatment,
            outcome,
            n_treatments,
            truth,
        )?;
        let sizes = d.group_sizes();
        if let Some(w) = sizes.iter().position(|&c| c == 0) {
            return Err(Error::Validation(format!(
                "treatment label {} does not appear in the data",
                w + 1
            )));
        }
        Ok(d)
    }

    /// Like [`Dataset::new`] but tolerates empty treatment groups. Used for
    /// resamples and subsets where a group may legitimately vanish.
    pub fn new_unvalidated_groups(
        names: Vec<String>,
        kinds: Vec<ColumnKind>,
        covariates: Matrix,
        treatment: Vec<usize>,
        outcome: Vec<u8>,
        n_treatments: usize,
        truth: Option<Matrix>,
    ) -> Result<Self> {
        let n = treatment.len();
        let p = kinds.len();
        if names.len() != p || covariates.cols() != p {
            return Err(Error::Schema(format!(
                "{} names, {} kinds and {} covariate columns",
                names.len(),
                p,
                covariates.cols()
            )));
        }
        if covariates.rows() != n || outcome.len() != n {
            return Err(Error::Validation(format!(
                "row counts differ: covariates {}, treatment {}, outcome {}",
                covariates.rows(),
                n,
                outcome.len()
            )));
        }
        if n_treatments == 0 {
            return Err(Error::Validation("at least one treatment level required".into()));
        }
        if n < n_treatments {
            return Err(Error::Validation(format!(
                "N = {n} is smaller than the number of treatments {n_treatments}"
            )));
        }
        if let Some(&w) = treatment.iter().find(|&&w| w >= n_treatments) {
            return Err(Error::Validation(format!(
                "treatment label {} outside 1..={n_treatments}",
                w + 1
            )));
        }
        if let Some(&y) = outcome.iter().find(|&&y| y > 1) {
            return Err(Error::Validation(format!("outcome value {y} is not 0/1")));
        }
        for (j, kind) in kinds.iter().enumerate() {
            for i in 0..n {
                let v = covariates[(i, j)];
                if !v.is_finite() {
                    return Err(Error::Validation(format!(
                        "covariate '{}' row {i}: missing or non-finite value",
                        names[j]
                    )));
                }
                if let ColumnKind::Categorical { levels } = *kind {
                    if v < 0.0 || v != crate::math::floor(v) || v as usize >= levels {
                        return Err(Error::Validation(format!(
                            "categorical covariate '{}' row {i}: level {v} outside 0..{levels}",
                            names[j]
                        )));
                    }
                }
            }
        }
        if let Some(t) = &truth {
            if t.rows() != n || t.cols() != n_treatments {
                return Err(Error::Validation("truth matrix shape must be N x Z".into()));
            }
            if t.as_slice().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::Validation("truth entries must lie in [0, 1]".into()));
            }
        }
        Ok(Self {
            names,
            kinds,
            covariates,
            treatment,
            outcome,
            n_treatments,
            truth,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.treatment.len()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.kinds.len()
    }

    #[inline]
    pub fn z(&self) -> usize {
        self.n_treatments
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn covariates(&self) -> &Matrix {
        &self.covariates
    }

    pub fn treatment(&self) -> &[usize] {
        &self.treatment
    }

    pub fn outcome(&self) -> &[u8] {
        &self.outcome
    }

    pub fn truth(&self) -> Option<&Matrix> {
        self.truth.as_ref()
    }

    pub fn events(&self) -> usize {
        self.outcome.iter().map(|&y| y as usize).sum()
    }

    /// Number of units in each treatment group.
    pub fn group_sizes(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_treatments];
        for &w in &self.treatment {
            counts[w] += 1;
        }
        counts
    }

    /// Width of the reference-coded design (without intercept).
    pub fn design_width(&self) -> usize {
        self.kinds
            .iter()
            .map(|k| match k {
                ColumnKind::Continuous => 1,
                ColumnKind::Categorical { levels } => levels.saturating_sub(1),
            })
            .sum()
    }

    /// Numeric design matrix: continuous columns copied, each categorical
    /// column expanded to indicators for levels `1..levels` (level 0 is the
    /// reference). No intercept column.
    pub fn design_matrix(&self) -> Matrix {
        let n = self.n();
        let width = self.design_width();
        let mut m = Matrix::zeros(n, width);
        for i in 0..n {
            let src = self.covariates.row(i);
            let dst = m.row_mut(i);
            let mut c = 0;
            for (j, kind) in self.kinds.iter().enumerate() {
                match *kind {
                    ColumnKind::Continuous => {
                        dst[c] = src[j];
                        c += 1;
                    }
                    ColumnKind::Categorical { levels } => {
                        let lvl = src[j] as usize;
                        if lvl > 0 {
                            dst[c + lvl - 1] = 1.0;
                        }
                        c += levels - 1;
                    }
                }
            }
        }
        m
    }

    /// Names of the design-matrix columns, e.g. `x6=2` for the indicator of
    /// the third level of `x6` (levels are shown 0-based).
    pub fn design_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.design_width());
        for (name, kind) in self.names.iter().zip(&self.kinds) {
            match *kind {
                ColumnKind::Continuous => out.push(name.clone()),
                ColumnKind::Categorical { levels } => {
                    for l in 1..levels {
                        out.push(format!("{name}={l}"));
                    }
                }
            }
        }
        out
    }

    /// Rows `indices` (with repetition allowed) as a new dataset that keeps
    /// the column schema and number of treatments.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let p = self.p();
        let mut cov = Vec::with_capacity(indices.len() * p);
        let mut truth = self
            .truth
            .as_ref()
            .map(|_| Vec::with_capacity(indices.len() * self.z()));
        for &i in indices {
            cov.extend_from_slice(self.covariates.row(i));
            if let (Some(t), Some(src)) = (truth.as_mut(), self.truth.as_ref()) {
                t.extend_from_slice(src.row(i));
            }
        }
        Dataset::new_unvalidated_groups(
            self.names.clone(),
            self.kinds.clone(),
            Matrix::from_row_major(indices.len(), p, cov),
            indices.iter().map(|&i| self.treatment[i]).collect(),
            indices.iter().map(|&i| self.outcome[i]).collect(),
            self.z(),
            truth.map(|t| Matrix::from_row_major(indices.len(), self.z(), t)),
        )
    }

    /// Observed outcome rate within each treatment group (NaN for an empty group).
    pub fn group_outcome_rates(&self) -> Vec<f64> {
        let sizes = self.group_sizes();
        let mut events = vec![0usize; self.z()];
        for (&w, &y) in self.treatment.iter().zip(&self.outcome) {
            events[w] += y as usize;
        }
        events
            .iter()
            .zip(&sizes)
            .map(|(&e, &n)| if n == 0 { f64::NAN } else { e as f64 / n as f64 })
            .collect()
    }

    pub fn with_truth(mut self, truth: Option<Matrix>) -> Result<Self> {
        if let Some(t) = &truth {
            if t.rows() != self.n() || t.cols() != self.z() {
                return Err(Error::Validation("truth matrix shape must be N x Z".into()));
            }
        }
        self.truth = truth;
        Ok(self)
    }
}

/// Per-unit treatment assignment probabilities, rows summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct GpsMatrix {
    probs: Matrix,
}

impl GpsMatrix {
    /// Clamps each entry to `[GPS_CLAMP, 1 - GPS_CLAMP]` and renormalizes rows.
    pub fn from_probabilities(mut probs: Matrix) -> Result<Self> {
        if probs.cols() == 0 {
            return Err(Error::Precondition("propensity matrix needs columns".into()));
        }
        for i in 0..probs.rows() {
            let row = probs.row_mut(i);
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Precondition(format!(
                    "propensity row {i} has invalid entries"
                )));
            }
            if row.len() == 1 {
                row[0] = 1.0;
                continue;
            }
            for v in row.iter_mut() {
                *v = v.clamp(GPS_CLAMP, 1.0 - GPS_CLAMP);
            }
            let s: f64 = row.iter().sum();
            for v in row.iter_mut() {
                *v /= s;
            }
        }
        Ok(Self { probs })
    }

    /// Wraps rows already known to be valid (sum to one within 1e-8 and lie
    /// in (0, 1]).
    pub fn from_valid(probs: Matrix) -> Result<Self> {
        for i in 0..probs.rows() {
            let row = probs.row(i);
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-8 || row.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
                return Err(Error::Precondition(format!("propensity row {i} is not a probability vector")));
            }
        }
        Ok(Self { probs })
    }

    pub fn n(&self) -> usize {
        self.probs.rows()
    }

    pub fn z(&self) -> usize {
        self.probs.cols()
    }

    #[inline]
    pub fn get(&self, i: usize, w: usize) -> f64 {
        self.probs[(i, w)]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.probs.row(i)
    }

    pub fn column(&self, w: usize) -> Vec<f64> {
        self.probs.column(w)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.probs
    }

    pub fn subset(&self, indices: &[usize]) -> GpsMatrix {
        let z = self.z();
        let mut data = Vec::with_capacity(indices.len() * z);
        for &i in indices {
            data.extend_from_slice(self.probs.row(i));
        }
        GpsMatrix {
            probs: Matrix::from_row_major(indices.len(), z, data),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Estimand {
    /// Risk difference, in probability units.
    Rd,
    /// Relative risk.
    Rr,
}

impl Estimand {
    /// Contrast of two marginal risks.
    pub fn contrast(self, risk_k: f64, risk_l: f64) -> Result<f64> {
        match self {
            Estimand::Rd => Ok(risk_k - risk_l),
            Estimand::Rr => {
                if risk_l == 0.0 {
                    Err(Error::UndefinedRatio)
                } else {
                    Ok(risk_k / risk_l)
                }
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Estimand::Rd => "rd",
            Estimand::Rr => "rr",
        }
    }
}

impl fmt::Display for Estimand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Estimand {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rd" => Ok(Estimand::Rd),
            "rr" => Ok(Estimand::Rr),
            other => Err(Error::Precondition(format!("unknown estimand '{other}'"))),
        }
    }
}

/// Ordered pair of distinct 0-based treatment labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TreatmentPair {
    pub k: usize,
    pub l: usize,
}

impl TreatmentPair {
    pub fn new(k: usize, l: usize) -> Result<Self> {
        if k == l {
            return Err(Error::Precondition(format!(
                "treatment pair needs distinct labels, got ({}, {})",
                k + 1,
                l + 1
            )));
        }
        Ok(Self { k, l })
    }

    /// All pairs `k < l`, in lexicographic order: (1,2), (1,3), (2,3), ...
    pub fn all(z: usize) -> Vec<TreatmentPair> {
        let mut out = Vec::new();
        for k in 0..z {
            for l in (k + 1)..z {
                out.push(TreatmentPair { k, l });
            }
        }
        out
    }

    pub fn check(&self, z: usize) -> Result<()> {
        if self.k == self.l || self.k >= z || self.l >= z {
            return Err(Error::Precondition(format!("invalid pair {self} for {z} treatments")));
        }
        Ok(())
    }
}

impl fmt::Display for TreatmentPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.k + 1, self.l + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

/// Pairwise effect estimate produced by one method.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalEstimate {
    pub pair: TreatmentPair,
    pub estimand: Estimand,
    pub point: f64,
    pub interval: Option<Interval>,
    pub method: String,
    pub n_used: usize,
}

impl CausalEstimate {
    pub fn new(
        pair: TreatmentPair,
        estimand: Estimand,
        point: f64,
        method: impl ToString,
        n_used: usize,
    ) -> Self {
        Self {
            pair,
            estimand,
            point,
            interval: None,
            method: method.to_string(),
            n_used,
        }
    }

    pub fn with_interval(mut self, lower: f64, upper: f64) -> Self {
        self.interval = Some(Interval { lower, upper });
        self
    }
}
