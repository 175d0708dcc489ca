use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{ColumnKind, Dataset, TreatmentPair};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::stats;

/// Absolute standardized mean differences after weighting, one row per
/// covariate (categorical covariates contribute one row per level) and one
/// column per treatment pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport {
    pub covariates: Vec<String>,
    pub pairs: Vec<TreatmentPair>,
    pub bias: Matrix,
    /// Rows whose pooled standard deviation is zero; their bias is reported as 0.
    pub zero_sd: Vec<bool>,
    pub max: f64,
}

/// Indicator-expanded covariate columns used for balance checks.
fn balance_columns(d: &Dataset) -> (Vec<String>, Vec<Vec<f64>>) {
    let n = d.n();
    let x = d.covariates();
    let mut names = Vec::new();
    let mut cols = Vec::new();
    for (j, (name, kind)) in d.names().iter().zip(d.kinds()).enumerate() {
        match *kind {
            ColumnKind::Continuous => {
                names.push(name.clone());
                cols.push(x.column(j));
            }
            ColumnKind::Categorical { levels } => {
                for l in 0..levels {
                    names.push(format!("{name}={l}"));
                    cols.push(
                        (0..n)
                            .map(|i| if x[(i, j)] as usize == l { 1.0 } else { 0.0 })
                            .collect(),
                    );
                }
            }
        }
    }
    (names, cols)
}

/// Pooled (whole-sample, unweighted) standard deviation of each balance column.
pub(crate) fn pooled_sds(d: &Dataset) -> Vec<f64> {
    balance_columns(d).1.iter().map(|c| stats::sample_sd(c)).collect()
}

/// Pairwise absolute standardized bias of every covariate under `weights`:
/// `|m_k − m_l| / s`, with `m_w` the weighted mean in group `w` and `s` the
/// unweighted standard deviation over all units.
pub fn standardized_bias(d: &Dataset, weights: &[f64]) -> Result<BalanceReport> {
    if weights.len() != d.n() {
        return Err(Error::Precondition("one weight per unit required".into()));
    }
    if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
        return Err(Error::Precondition("weights must be finite and positive".into()));
    }
    let sds = pooled_sds(d);
    standardized_bias_with_sd(d, weights, &sds)
}

pub(crate) fn standardized_bias_with_sd(
    d: &Dataset,
    weights: &[f64],
    sds: &[f64],
) -> Result<BalanceReport> {
    let (names, cols) = balance_columns(d);
    let z = d.z();
    let w = d.treatment();
    let pairs = TreatmentPair::all(z);
    let mut bias = Matrix::zeros(names.len(), pairs.len());
    let mut zero_sd = vec![false; names.len()];
    let mut max = 0.0f64;
    let mut wsum = vec![0.0; z];
    for (i, &g) in w.iter().enumerate() {
        wsum[g] += weights[i];
    }
    for (c, col) in cols.iter().enumerate() {
        let mut means = vec![0.0; z];
        for (i, &g) in w.iter().enumerate() {
            means[g] += weights[i] * col[i];
        }
        for (m, s) in means.iter_mut().zip(&wsum) {
            *m = if *s > 0.0 { *m / s } else { f64::NAN };
        }
        if sds[c] <= 0.0 {
            zero_sd[c] = true;
            continue;
        }
        for (p, pair) in pairs.iter().enumerate() {
            let b = (means[pair.k] - means[pair.l]).abs() / sds[c];
            let b = if b.is_finite() { b } else { 0.0 };
            bias[(c, p)] = b;
            max = max.max(b);
        }
    }
    Ok(BalanceReport {
        covariates: names,
        pairs,
        bias,
        zero_sd,
        max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math;
    use alloc::string::ToString;

    fn two_group(values: &[f64], groups: &[usize]) -> Dataset {
        Dataset::new(
            vec!["x".to_string()],
            vec![ColumnKind::Continuous],
            Matrix::from_row_major(values.len(), 1, values.to_vec()),
            groups.to_vec(),
            vec![0; values.len()],
            2,
            None,
        )
        .unwrap()
    }

    #[test]
    fn identical_groups_have_zero_bias() {
        let d = two_group(&[1.0, 2.0, 1.0, 2.0], &[0, 0, 1, 1]);
        let r = standardized_bias(&d, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(r.max, 0.0);
    }

    #[test]
    fn unit_mean_gap_with_unit_sd() {
        // Group means 0 and 1; whole-sample sample SD is exactly 1.
        let a = math::sqrt(0.5);
        let d = two_group(&[-a, a, 1.0 - a, 1.0 + a], &[0, 0, 1, 1]);
        let r = standardized_bias(&d, &[1.0; 4]).unwrap();
        assert!((r.max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_column_is_flagged() {
        let d = two_group(&[3.0; 4], &[0, 1, 0, 1]);
        let r = standardized_bias(&d, &[1.0; 4]).unwrap();
        assert_eq!(r.zero_sd, vec![true]);
        assert_eq!(r.bias[(0, 0)], 0.0);
    }

    #[test]
    fn rejects_nonpositive_weights() {
        let d = two_group(&[1.0, 2.0], &[0, 1]);
        assert!(standardized_bias(&d, &[1.0, 0.0]).is_err());
    }
}
