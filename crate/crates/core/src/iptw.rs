//! Inverse probability of treatment weighting.
//!
//! Risks are Hájek (self-normalized) weighted means within each arm:
//! `p_w = Σ_{W_i = w} v_i Y_i / Σ_{W_i = w} v_i`.

use alloc::vec::Vec;

use crate::data::{CausalEstimate, Dataset, Estimand, GpsMatrix, TreatmentPair};
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    /// Cap bounds when the vector has been trimmed.
    pub trim_bounds: Option<(f64, f64)>,
}

/// `v_i = 1 / r(W_i, X_i)`.
pub fn compute_weights(g: &GpsMatrix, d: &Dataset) -> Result<WeightVector> {
    if g.n() != d.n() || g.z() != d.z() {
        return Err(Error::Schema("propensity matrix and data shapes differ".into()));
    }
    let weights = d
        .treatment()
        .iter()
        .enumerate()
        .map(|(i, &w)| 1.0 / g.get(i, w))
        .collect();
    Ok(WeightVector {
        weights,
        trim_bounds: None,
    })
}

/// Caps weights at their nearest-rank `lower_pct` / `upper_pct` percentiles
/// over all units.
pub fn trim_weights(v: &WeightVector, lower_pct: f64, upper_pct: f64) -> Result<WeightVector> {
    if !(0.0..1.0).contains(&lower_pct) || !(lower_pct < upper_pct && upper_pct <= 1.0) {
        return Err(Error::Precondition(alloc::format!(
            "trim percentiles must satisfy 0 <= lower < upper <= 1, got {lower_pct}, {upper_pct}"
        )));
    }
    if v.weights.is_empty() {
        return Ok(v.clone());
    }
    let sorted = stats::sorted(&v.weights);
    let lo = stats::nearest_rank(&sorted, lower_pct);
    let hi = stats::nearest_rank(&sorted, upper_pct);
    Ok(WeightVector {
        weights: v.weights.iter().map(|w| w.clamp(lo, hi)).collect(),
        trim_bounds: Some((lo, hi)),
    })
}

/// Weighted outcome risk of every treatment arm.
pub fn weighted_risks(d: &Dataset, v: &WeightVector) -> Result<Vec<f64>> {
    if v.weights.len() != d.n() {
        return Err(Error::Schema("one weight per unit required".into()));
    }
    let z = d.z();
    let mut num = alloc::vec![0.0; z];
    let mut den = alloc::vec![0.0; z];
    for ((&w, &y), &wt) in d.treatment().iter().zip(d.outcome()).zip(&v.weights) {
        num[w] += wt * y as f64;
        den[w] += wt;
    }
    let mut out = Vec::with_capacity(z);
    for w in 0..z {
        if den[w] <= 0.0 {
            return Err(Error::EmptyGroup(w + 1));
        }
        out.push(num[w] / den[w]);
    }
    Ok(out)
}

pub fn estimate_ate_iptw(
    d: &Dataset,
    v: &WeightVector,
    pair: TreatmentPair,
    estimand: Estimand,
    method: &str,
) -> Result<CausalEstimate> {
    pair.check(d.z())?;
    let risks = weighted_risks(d, v)?;
    let point = estimand.contrast(risks[pair.k], risks[pair.l])?;
    Ok(CausalEstimate::new(pair, estimand, point, method, d.n()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ColumnKind;
    use crate::linalg::Matrix;
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    fn data(w: Vec<usize>, y: Vec<u8>, z: usize) -> Dataset {
        let n = w.len();
        Dataset::new(
            vec!["x".to_string()],
            vec![ColumnKind::Continuous],
            Matrix::zeros(n, 1),
            w,
            y,
            z,
            None,
        )
        .unwrap()
    }

    #[test]
    fn uniform_gps_gives_weight_three() {
        let d = data(vec![0, 1, 2], vec![0, 1, 0], 3);
        let g = GpsMatrix::from_valid(Matrix::from_rows(&vec![vec![1.0 / 3.0; 3]; 3])).unwrap();
        let v = compute_weights(&g, &d).unwrap();
        assert!(v.weights.iter().all(|w| (w - 3.0).abs() < 1e-12));
    }

    #[test]
    fn small_propensity_gives_large_weight() {
        let d = data(vec![0, 1], vec![0, 1], 2);
        let g = GpsMatrix::from_valid(Matrix::from_rows(&[vec![0.05, 0.95], vec![0.5, 0.5]])).unwrap();
        let v = compute_weights(&g, &d).unwrap();
        assert!((v.weights[0] - 20.0).abs() < 1e-12);
    }

    #[test]
    fn trim_caps_at_order_statistics() {
        let v = WeightVector {
            weights: (1..=100).map(f64::from).collect(),
            trim_bounds: None,
        };
        let t = trim_weights(&v, 0.05, 0.95).unwrap();
        assert_eq!(t.trim_bounds, Some((5.0, 95.0)));
        assert_eq!(t.weights[0], 5.0);
        assert_eq!(t.weights[99], 95.0);
        assert_eq!(t.weights[49], 50.0);
        let equal = WeightVector {
            weights: vec![2.0; 10],
            trim_bounds: None,
        };
        assert_eq!(trim_weights(&equal, 0.05, 0.95).unwrap().weights, equal.weights);
    }

    #[test]
    fn identical_pair_is_rejected() {
        let d = data(vec![0, 1], vec![0, 1], 2);
        let v = WeightVector {
            weights: vec![1.0; 2],
            trim_bounds: None,
        };
        let pair = TreatmentPair { k: 0, l: 0 };
        assert!(estimate_ate_iptw(&d, &v, pair, Estimand::Rd, "iptw").is_err());
    }

    #[test]
    fn all_zero_outcomes() {
        let d = data(vec![0, 1, 0, 1], vec![0; 4], 2);
        let v = WeightVector {
            weights: vec![1.5, 2.0, 1.1, 3.0],
            trim_bounds: None,
        };
        let pair = TreatmentPair::new(0, 1).unwrap();
        let rd = estimate_ate_iptw(&d, &v, pair, Estimand::Rd, "iptw").unwrap();
        assert_eq!(rd.point, 0.0);
        assert_eq!(
            estimate_ate_iptw(&d, &v, pair, Estimand::Rr, "iptw").unwrap_err(),
            Error::UndefinedRatio
        );
    }

    fn arb_case() -> impl Strategy<Value = (Vec<usize>, Vec<u8>, Vec<f64>)> {
        (6usize..40).prop_flat_map(|n| {
            (
                proptest::collection::vec(0usize..3, n),
                proptest::collection::vec(0u8..2, n),
                proptest::collection::vec(0.1f64..20.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn scale_invariance_and_antisymmetry((mut w, mut y, wt) in arb_case(), c in 0.01f64..100.0) {
            // Make sure every arm is present and has an event.
            w[0] = 0; w[1] = 1; w[2] = 2; y[0] = 1; y[1] = 1; y[2] = 1;
            let d = data(w, y, 3);
            let v = WeightVector { weights: wt.clone(), trim_bounds: None };
            let scaled = WeightVector { weights: wt.iter().map(|x| x * c).collect(), trim_bounds: None };
            for pair in TreatmentPair::all(3) {
                let swapped = TreatmentPair::new(pair.l, pair.k).unwrap();
                let a = estimate_ate_iptw(&d, &v, pair, Estimand::Rd, "t").unwrap().point;
                let b = estimate_ate_iptw(&d, &scaled, pair, Estimand::Rd, "t").unwrap().point;
                prop_assert!((a - b).abs() < 1e-12);
                let s = estimate_ate_iptw(&d, &v, swapped, Estimand::Rd, "t").unwrap().point;
                prop_assert!((a + s).abs() < 1e-15);
                let rr = estimate_ate_iptw(&d, &v, pair, Estimand::Rr, "t").unwrap().point;
                let rr_scaled = estimate_ate_iptw(&d, &scaled, pair, Estimand::Rr, "t").unwrap().point;
                let rr_swapped = estimate_ate_iptw(&d, &v, swapped, Estimand::Rr, "t").unwrap().point;
                prop_assert!((rr - rr_scaled).abs() < 1e-10 * rr.abs().max(1.0));
                prop_assert!((rr * rr_swapped - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn uniform_weights_give_difference_of_means((mut w, mut y, _wt) in arb_case()) {
            w[0] = 0; w[1] = 1; w[2] = 2; y[0] = 1;
            let d = data(w, y, 3);
            let v = WeightVector { weights: vec![1.0; d.n()], trim_bounds: None };
            let rates = d.group_outcome_rates();
            let pair = TreatmentPair::new(0, 2).unwrap();
            let rd = estimate_ate_iptw(&d, &v, pair, Estimand::Rd, "t").unwrap().point;
            prop_assert!((rd - (rates[0] - rates[2])).abs() < 1e-15);
        }

        #[test]
        fn weight_trim_is_idempotent(wt in proptest::collection::vec(0.5f64..50.0, 1..80)) {
            let v = WeightVector { weights: wt, trim_bounds: None };
            let once = trim_weights(&v, 0.05, 0.95).unwrap();
            let twice = trim_weights(&once, 0.05, 0.95).unwrap();
            prop_assert_eq!(once.weights, twice.weights);
        }

        #[test]
        fn reciprocal_oracle(rows in proptest::collection::vec((0.01f64..1.0, 0.01f64..1.0, 0.01f64..1.0), 3..20)) {
            let n = rows.len();
            let mut m = Matrix::zeros(n, 3);
            for (i, (a, b, c)) in rows.iter().enumerate() {
                let s = a + b + c;
                m[(i, 0)] = a / s; m[(i, 1)] = b / s; m[(i, 2)] = c / s;
            }
            let g = GpsMatrix::from_valid(m.clone()).unwrap();
            let w: Vec<usize> = (0..n).map(|i| i % 3).collect();
            let d = data(w.clone(), vec![0; n], 3);
            let v = compute_weights(&g, &d).unwrap();
            for i in 0..n {
                prop_assert_eq!(v.weights[i], 1.0 / m[(i, w[i])]);
            }
        }
    }
}
