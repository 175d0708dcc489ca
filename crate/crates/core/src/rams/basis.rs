use alloc::vec;
use alloc::vec::Vec;

use crate::data::GpsMatrix;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::stats;

pub const DEFAULT_INTERIOR_KNOTS: usize = 5;

/// B-spline basis on one propensity margin with clamped boundary knots.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginBasis {
    /// Full knot vector: `degree + 1` copies of each boundary plus interior knots.
    pub knots: Vec<f64>,
    pub degree: usize,
}

impl MarginBasis {
    /// Interior knots at the empirical quantiles `k / (m + 1)`, `k = 1..=m`,
    /// boundary knots at the observed range.
    pub fn from_quantiles(values: &[f64], interior: usize, degree: usize) -> Option<Self> {
        let sorted = stats::sorted(values);
        let (lo, hi) = (*sorted.first()?, *sorted.last()?);
        if !(hi > lo) {
            return None;
        }
        let mut knots = vec![lo; degree + 1];
        for k in 1..=interior {
            knots.push(stats::quantile_linear(&sorted, k as f64 / (interior + 1) as f64));
        }
        knots.extend(core::iter::repeat(hi).take(degree + 1));
        Some(Self { knots, degree })
    }

    pub fn n_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn lower(&self) -> f64 {
        self.knots[0]
    }

    pub fn upper(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    /// Knot span `s` with `t_s <= x < t_{s+1}`; the right boundary belongs to
    /// the last non-empty span. `x` is clamped to the boundary knots.
    fn span(&self, x: f64) -> usize {
        let p = self.degree;
        let n = self.n_basis();
        if x >= self.knots[n] {
            // Last span with positive length.
            let mut s = n - 1;
            while s > p && self.knots[s] >= self.knots[n] {
                s -= 1;
            }
            return s;
        }
        let mut s = self.knots[p..=n].partition_point(|&t| t <= x) + p - 1;
        s = s.clamp(p, n - 1);
        s
    }

    /// Non-zero basis values at `x`: returns the index of the first non-zero
    /// function and fills `out[..=degree]`.
    pub fn eval_nonzero(&self, x: f64, out: &mut [f64]) -> usize {
        let p = self.degree;
        let x = x.clamp(self.lower(), self.upper());
        let s = self.span(x);
        let t = &self.knots;
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        out[0] = 1.0;
        for j in 1..=p {
            left[j] = x - t[s + 1 - j];
            right[j] = t[s + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom > 0.0 { out[r] / denom } else { 0.0 };
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
        s - p
    }

    /// Dense basis row at `x`.
    pub fn eval(&self, x: f64) -> Vec<f64> {
        let mut nz = vec![0.0; self.degree + 1];
        let first = self.eval_nonzero(x, &mut nz);
        let mut row = vec![0.0; self.n_basis()];
        row[first..first + nz.len()].copy_from_slice(&nz);
        row
    }

    /// Second-order difference penalty `D'D`.
    pub fn difference_penalty(&self) -> Matrix {
        difference_penalty(self.n_basis())
    }
}

pub(crate) fn difference_penalty(n: usize) -> Matrix {
    let mut s = Matrix::zeros(n, n);
    if n < 3 {
        return s;
    }
    for r in 0..n - 2 {
        let d = [(r, 1.0), (r + 1, -2.0), (r + 2, 1.0)];
        for &(a, va) in &d {
            for &(b, vb) in &d {
                s[(a, b)] += va * vb;
            }
        }
    }
    s
}

/// Spline design over the propensity scores plus its penalty.
///
/// Rows are stored sparsely: each row has at most `(degree + 1)^margins`
/// non-zero entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    /// Propensity columns the margins are built on (empty for a custom basis).
    pub gps_columns: Vec<usize>,
    pub margins: Vec<MarginBasis>,
    pub width: usize,
    /// Symmetric positive semi-definite `width × width` penalty.
    pub penalty: Matrix,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SplineBasis {
    /// Wraps an arbitrary design (for example stratum indicators) and penalty.
    pub fn custom(basis: &Matrix, penalty: Matrix) -> Result<Self> {
        if penalty.rows() != basis.cols() || penalty.cols() != basis.cols() {
            return Err(Error::Precondition("penalty must be width x width".into()));
        }
        let rows = (0..basis.rows())
            .map(|i| {
                basis
                    .row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, &v)| (j, v))
                    .collect()
            })
            .collect();
        Ok(Self {
            gps_columns: Vec::new(),
            margins: Vec::new(),
            width: basis.cols(),
            penalty,
            rows,
        })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n(), self.width);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Evaluates the same margins (same knots) at new propensity rows.
    pub fn evaluate(&self, g: &GpsMatrix) -> Result<SplineBasis> {
        if self.margins.is_empty() {
            return Err(Error::Precondition("custom basis cannot be re-evaluated".into()));
        }
        let rows = tensor_rows(&self.margins, &self.gps_columns, g);
        Ok(SplineBasis {
            rows,
            ..self.clone_without_rows()
        })
    }

    fn clone_without_rows(&self) -> SplineBasis {
        SplineBasis {
            gps_columns: self.gps_columns.clone(),
            margins: self.margins.clone(),
            width: self.width,
            penalty: self.penalty.clone(),
            rows: Vec::new(),
        }
    }
}

fn tensor_rows(margins: &[MarginBasis], cols: &[usize], g: &GpsMatrix) -> Vec<Vec<(usize, f64)>> {
    let mut out = Vec::with_capacity(g.n());
    let mut bufs: Vec<Vec<f64>> = margins.iter().map(|m| vec![0.0; m.degree + 1]).collect();
    for i in 0..g.n() {
        let mut firsts = Vec::with_capacity(margins.len());
        for ((m, &c), buf) in margins.iter().zip(cols).zip(bufs.iter_mut()) {
            firsts.push(m.eval_nonzero(g.get(i, c), buf));
        }
        let row = match margins.len() {
            1 => bufs[0]
                .iter()
                .enumerate()
                .map(|(a, &v)| (firsts[0] + a, v))
                .filter(|(_, v)| *v != 0.0)
                .collect(),
            _ => {
                let n2 = margins[1].n_basis();
                let mut row = Vec::with_capacity(bufs[0].len() * bufs[1].len());
                for (a, &va) in bufs[0].iter().enumerate() {
                    for (b, &vb) in bufs[1].iter().enumerate() {
                        let v = va * vb;
                        if v != 0.0 {
                            row.push(((firsts[0] + a) * n2 + firsts[1] + b, v));
                        }
                    }
                }
                row
            }
        };
        out.push(row);
    }
    out
}

/// Cubic (or `degree`) B-spline bases on the first two propensity columns
/// joined by a row-wise tensor product, with the sum of the per-margin
/// second-difference penalties. With two treatments only the first column
/// is used.
pub fn build_tensor_basis(g: &GpsMatrix, knots_per_margin: usize, degree: usize) -> Result<SplineBasis> {
    if knots_per_margin < 2 {
        return Err(Error::Precondition("at least two interior knots per margin".into()));
    }
    let cols: Vec<usize> = match g.z() {
        0 | 1 => return Err(Error::Precondition("spline of the GPS needs two or more treatments".into())),
        2 => vec![0],
        _ => vec![0, 1],
    };
    let mut margins = Vec::with_capacity(cols.len());
    for &c in &cols {
        let m = MarginBasis::from_quantiles(&g.column(c), knots_per_margin, degree)
            .ok_or(Error::DegenerateGpsColumn(c + 1))?;
        margins.push(m);
    }
    let (width, penalty) = if margins.len() == 1 {
        (margins[0].n_basis(), margins[0].difference_penalty())
    } else {
        let (n1, n2) = (margins[0].n_basis(), margins[1].n_basis());
        let mut s = margins[0].difference_penalty().kron(&Matrix::identity(n2));
        s.add_scaled(&Matrix::identity(n1).kron(&margins[1].difference_penalty()), 1.0);
        (n1 * n2, s)
    };
    let rows = tensor_rows(&margins, &cols, g);
    Ok(SplineBasis {
        gps_columns: cols,
        margins,
        width,
        penalty,
        rows,
    })
}
