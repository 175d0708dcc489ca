use alloc::vec::Vec;

use crate::data::GpsMatrix;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::stats;

const SUM_TOL: f64 = 1e-12;

/// Caps each propensity column at its nearest-rank `lower_pct` / `upper_pct`
/// percentiles and restores unit row sums.
///
/// Row sums are restored by rescaling the entries strictly inside their
/// column bounds, so capped entries stay exactly at the bound and trimming
/// again is a no-op. Entries on a bound are moved only when a row cannot be
/// fixed otherwise; every column stays inside its pre-trim percentile range
/// whenever the bounds admit a probability vector.
pub fn trim_gps(g: &GpsMatrix, lower_pct: f64, upper_pct: f64) -> Result<GpsMatrix> {
    if !(0.0..1.0).contains(&lower_pct) || !(lower_pct < upper_pct && upper_pct <= 1.0) {
        return Err(Error::Precondition(alloc::format!(
            "trim percentiles must satisfy 0 <= lower < upper <= 1, got {lower_pct}, {upper_pct}"
        )));
    }
    let (n, z) = (g.n(), g.z());
    if n == 0 {
        return Ok(g.clone());
    }
    let bounds: Vec<(f64, f64)> = (0..z)
        .map(|w| {
            let col = stats::sorted(&g.column(w));
            (stats::nearest_rank(&col, lower_pct), stats::nearest_rank(&col, upper_pct))
        })
        .collect();
    let mut out = Matrix::zeros(n, z);
    for i in 0..n {
        let row = out.row_mut(i);
        row.copy_from_slice(g.row(i));
        rebalance_row(row, &bounds);
    }
    GpsMatrix::from_valid(out)
}

fn rebalance_row(row: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in row.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
    // Interior entries absorb the gap first so capped entries stay on their
    // bounds; entries sitting on a bound move only if that is not enough.
    for strict in [true, false] {
        if rescale(row, bounds, strict) {
            return;
        }
    }
    // Bounds infeasible for this row: plain renormalization.
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= s);
}

fn rescale(row: &mut [f64], bounds: &[(f64, f64)], strict: bool) -> bool {
    for _ in 0..=row.len() {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() <= SUM_TOL {
            return true;
        }
        let grow = s < 1.0;
        let movable = |v: f64, (lo, hi): (f64, f64)| {
            if strict {
                v > lo && v < hi
            } else if grow {
                v < hi
            } else {
                v > lo
            }
        };
        let (mut fixed, mut free) = (0.0, 0.0);
        for (&v, &b) in row.iter().zip(bounds) {
            if movable(v, b) {
                free += v;
            } else {
                fixed += v;
            }
        }
        if free <= 0.0 {
            return false;
        }
        let f = (1.0 - fixed) / free;
        for (v, &b) in row.iter_mut().zip(bounds) {
            if movable(*v, b) {
                *v = (*v * f).clamp(b.0, b.1);
            }
        }
    }
    let s: f64 = row.iter().sum();
    (s - 1.0).abs() <= SUM_TOL
}
