use multitreat_core::gps::trim_gps;
use multitreat_core::linalg::Matrix;
use multitreat_core::rams::{
    build_tensor_basis, estimate_ate_rams, fit_rams, potential_risks, Lambda, MarginBasis,
    SplineBasis,
};
use multitreat_core::rng;
use multitreat_core::{ColumnKind, Dataset, Estimand, GpsMatrix, TreatmentPair};
use rand::Rng;

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Three-arm data with propensities driven by one covariate and an outcome
/// model `risk(gps, w)`.
fn arms(n: usize, seed: u64, spread: f64, risk: impl Fn(&[f64], usize) -> f64) -> (Dataset, GpsMatrix) {
    let mut r = rng::stream(seed, &[7]);
    let mut x = Matrix::zeros(n, 1);
    let mut probs = Matrix::zeros(n, 3);
    let mut w = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let xi = rng::std_normal(&mut r);
        x[(i, 0)] = xi;
        let s = [0.0, spread * xi, -spread * xi + 0.2];
        let m: f64 = s.iter().map(|v| v.exp()).sum();
        let p: Vec<f64> = s.iter().map(|v| v.exp() / m).collect();
        probs.row_mut(i).copy_from_slice(&p);
        let wi = rng::categorical(&mut r, &p);
        w.push(wi);
        y.push(u8::from(r.random::<f64>() < risk(&p, wi)));
    }
    let d = Dataset::new(vec!["x1".into()], vec![ColumnKind::Continuous], x, w, y, 3, None).unwrap();
    (d, GpsMatrix::from_valid(probs).unwrap())
}

fn cox_de_boor(t: &[f64], i: usize, p: usize, x: f64) -> f64 {
    if p == 0 {
        return if t[i] <= x && x < t[i + 1] { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    if t[i + p] > t[i] {
        v += (x - t[i]) / (t[i + p] - t[i]) * cox_de_boor(t, i, p - 1, x);
    }
    if t[i + p + 1] > t[i + 1] {
        v += (t[i + p + 1] - x) / (t[i + p + 1] - t[i + 1]) * cox_de_boor(t, i + 1, p - 1, x);
    }
    v
}

#[test]
fn margin_basis_matches_the_recursive_definition() {
    let values: Vec<f64> = (0..40).map(|i| ((i * 17) % 40) as f64 / 41.0 + 0.01).collect();
    let m = MarginBasis::from_quantiles(&values, 5, 3).unwrap();
    for x in [0.05, 0.37, 0.81] {
        let fast = m.eval(x);
        for (j, v) in fast.iter().enumerate() {
            assert!((v - cox_de_boor(&m.knots, j, 3, x)).abs() < 1e-12, "x={x} j={j}");
        }
    }
}

#[test]
fn tensor_rows_are_kronecker_products_of_margins() {
    let (_, g) = arms(200, 1, 0.8, |_, _| 0.2);
    let b = build_tensor_basis(&g, 5, 3).unwrap();
    let dense = b.dense();
    let n2 = b.margins[1].n_basis();
    for i in [0, 17, 150] {
        let ba = b.margins[0].eval(g.get(i, 0));
        let bb = b.margins[1].eval(g.get(i, 1));
        for (a, va) in ba.iter().enumerate() {
            for (c, vb) in bb.iter().enumerate() {
                assert!((dense[(i, a * n2 + c)] - va * vb).abs() < 1e-14);
            }
        }
    }
}

#[test]
fn null_outcome_gives_null_treatment_contrasts() {
    let (d, g) = arms(2000, 3, 0.6, |_, _| 0.3);
    let b = build_tensor_basis(&g, 5, 3).unwrap();
    let m = fit_rams(&d, &b, Lambda::Auto).unwrap();
    let sizes = d.group_sizes();
    let p = d.events() as f64 / d.n() as f64;
    for pair in TreatmentPair::all(3) {
        let se = (1.0 / (sizes[pair.k] as f64 * p * (1.0 - p))
            + 1.0 / (sizes[pair.l] as f64 * p * (1.0 - p)))
            .sqrt();
        let c = m.beta[pair.k] - m.beta[pair.l];
        assert!(c.abs() < 3.0 * se, "{pair:?}: {c} vs se {se}");
    }
}

/// Unpenalized logistic regression by Newton–Raphson with Gauss–Jordan solves.
fn newton_logistic(x: &[Vec<f64>], y: &[f64], penalty: Option<&[Vec<f64>]>) -> Vec<f64> {
    let p = x[0].len();
    let mut b = vec![0.0; p];
    for _ in 0..200 {
        let mut grad = vec![0.0; p];
        let mut h = vec![vec![0.0; p]; p];
        for (xi, &yi) in x.iter().zip(y) {
            let eta: f64 = xi.iter().zip(&b).map(|(a, c)| a * c).sum();
            let mu = expit(eta);
            for a in 0..p {
                grad[a] += (yi - mu) * xi[a];
                for c in 0..p {
                    h[a][c] += mu * (1.0 - mu) * xi[a] * xi[c];
                }
            }
        }
        if let Some(s) = penalty {
            for a in 0..p {
                for c in 0..p {
                    grad[a] -= 2.0 * s[a][c] * b[c];
                    h[a][c] += 2.0 * s[a][c];
                }
            }
        }
        let step = gauss_jordan(h, grad);
        let size = step.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (bj, s) in b.iter_mut().zip(&step) {
            *bj += s;
        }
        if size < 1e-12 {
            break;
        }
    }
    b
}

fn gauss_jordan(mut a: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Vec<f64> {
    let n = rhs.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap()).unwrap();
        a.swap(c, piv);
        rhs.swap(c, piv);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                rhs[r] -= f * rhs[c];
            }
        }
    }
    (0..n).map(|i| rhs[i] / a[i][i]).collect()
}

#[test]
fn huge_lambda_converges_to_the_penalty_null_space_fit() {
    let (d, g) = arms(1500, 5, 1.2, |p, w| expit(-2.0 + 4.0 * (p[0] - 0.33).powi(2) * 9.0 + 0.2 * w as f64));
    let b = build_tensor_basis(&g, 5, 3).unwrap();
    let stiff = fit_rams(&d, &b, Lambda::Fixed(1e12)).unwrap();
    let free = fit_rams(&d, &b, Lambda::Fixed(0.0)).unwrap();

    // Null space of the tensor second-difference penalty: γ_ab = c0 + c1 a + c2 b + c3 a b.
    let n2 = b.margins[1].n_basis();
    let dense = b.dense();
    let treat = d.treatment();
    let x: Vec<Vec<f64>> = (0..d.n())
        .map(|i| {
            let mut row = vec![0.0; 6];
            if treat[i] < 2 {
                row[treat[i]] = 1.0;
            }
            for j in 0..b.width {
                let (a, c) = ((j / n2) as f64, (j % n2) as f64);
                let v = dense[(i, j)];
                row[2] += v;
                row[3] += v * a;
                row[4] += v * c;
                row[5] += v * a * c;
            }
            row
        })
        .collect();
    let y: Vec<f64> = d.outcome().iter().map(|&v| v as f64).collect();
    let coef = newton_logistic(&x, &y, None);
    let oracle: Vec<f64> = x
        .iter()
        .map(|r| expit(r.iter().zip(&coef).map(|(a, c)| a * c).sum()))
        .collect();

    let fitted = |m: &multitreat_core::rams::RamsModel| -> Vec<f64> {
        (0..d.n()).map(|i| expit(m.linear_predictor(&b, i, treat[i]))).collect()
    };
    let gap = |a: &[f64]| a.iter().zip(&oracle).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
    assert!(gap(&fitted(&stiff)) < 1e-2, "stiff gap {}", gap(&fitted(&stiff)));
    assert!(gap(&fitted(&free)) > 5e-2, "free gap {}", gap(&fitted(&free)));
}

#[test]
fn two_arms_match_a_direct_penalized_logistic_fit() {
    let mut r = rng::stream(8, &[2]);
    let n = 600;
    let mut probs = Matrix::zeros(n, 2);
    let mut w = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let xi = rng::std_normal(&mut r);
        let p0 = expit(0.9 * xi);
        probs.row_mut(i).copy_from_slice(&[p0, 1.0 - p0]);
        let wi = usize::from(r.random::<f64>() >= p0);
        w.push(wi);
        y.push(u8::from(r.random::<f64>() < expit(-1.0 + 1.5 * p0 - 0.4 * wi as f64)));
    }
    let d = Dataset::new(vec!["x1".into()], vec![ColumnKind::Continuous], Matrix::zeros(n, 1), w.clone(), y.clone(), 2, None).unwrap();
    let g = GpsMatrix::from_valid(probs).unwrap();
    let b = build_tensor_basis(&g, 5, 3).unwrap();
    assert_eq!(b.margins.len(), 1);
    let lambda = 2.5;
    let m = fit_rams(&d, &b, Lambda::Fixed(lambda)).unwrap();

    let dense = b.dense();
    let x: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = vec![if w[i] == 0 { 1.0 } else { 0.0 }];
            row.extend_from_slice(dense.row(i));
            row
        })
        .collect();
    let k = b.width;
    let mut s = vec![vec![0.0; k + 1]; k + 1];
    for a in 0..k {
        for c in 0..k {
            s[a + 1][c + 1] = lambda * b.penalty[(a, c)] / 2.0;
        }
    }
    let yv: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let coef = newton_logistic(&x, &yv, Some(&s));
    assert!((m.beta[0] - coef[0]).abs() < 1e-6, "{} vs {}", m.beta[0], coef[0]);
    for j in 0..k {
        assert!((m.gamma[j] - coef[j + 1]).abs() < 1e-6);
    }
}

#[test]
fn stratum_indicator_model_equals_stratified_g_computation() {
    // Odds a_w · b_s with integer cell sizes chosen so the additive logit
    // model fits every cell frequency exactly.
    let a = [(1u32, 1u32), (2, 1), (1, 2)];
    let strata = [(1u32, 1u32), (1, 4), (1, 2), (2, 1)];
    let mut rows = Vec::new();
    let mut w = Vec::new();
    let mut y = Vec::new();
    let mut cell = [[0.0; 3]; 4];
    let mut stratum_n = [0usize; 4];
    for (s, &(bn, bd)) in strata.iter().enumerate() {
        for (t, &(an, ad)) in a.iter().enumerate() {
            let (num, den) = (an * bn, ad * bd);
            let size = 3 * (num + den) as usize;
            let events = 3 * num as usize;
            cell[s][t] = events as f64 / size as f64;
            stratum_n[s] += size;
            for k in 0..size {
                rows.push(vec![(s / 2) as f64, (s % 2) as f64]);
                w.push(t);
                y.push(u8::from(k < events));
            }
        }
    }
    let n = w.len();
    let mut ind = Matrix::zeros(n, 4);
    for (i, r) in rows.iter().enumerate() {
        ind[(i, (r[0] * 2.0 + r[1]) as usize)] = 1.0;
    }
    let d = Dataset::new(
        vec!["c1".into(), "c2".into()],
        vec![ColumnKind::Categorical { levels: 2 }; 2],
        Matrix::from_rows(&rows),
        w,
        y,
        3,
        None,
    )
    .unwrap();
    let basis = SplineBasis::custom(&ind, Matrix::zeros(4, 4)).unwrap();
    let m = fit_rams(&d, &basis, Lambda::Fixed(0.0)).unwrap();
    let risks = potential_risks(&m, &basis);
    for t in 0..3 {
        let oracle: f64 = (0..4).map(|s| stratum_n[s] as f64 / n as f64 * cell[s][t]).sum();
        assert!((risks[t] - oracle).abs() < 1e-6, "arm {t}: {} vs {oracle}", risks[t]);
    }
    let pair = TreatmentPair::new(0, 2).unwrap();
    let rd = estimate_ate_rams(&m, &d, &basis, pair, Estimand::Rd).unwrap();
    assert!((rd.point - (risks[0] - risks[2])).abs() < 1e-15);
}

#[test]
fn spline_edf_falls_along_the_lambda_grid() {
    let (d, g) = arms(1500, 9, 1.0, |p, _| expit(-1.5 + 3.0 * p[1]));
    let b = build_tensor_basis(&g, 5, 3).unwrap();
    let m = fit_rams(&d, &b, Lambda::Auto).unwrap();
    assert_eq!(m.gcv_trace.len(), 20);
    for pair in m.gcv_trace.windows(2) {
        assert!(pair[1].2 <= pair[0].2 + 1e-6, "{:?}", pair);
    }
    let best = m.gcv_trace.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
    assert_eq!(m.gcv_trace.iter().find(|t| t.0 == m.lambda).unwrap().1, best);
}

#[test]
fn counterfactual_risks_stay_inside_the_unit_interval() {
    let (d, g) = arms(800, 4, 1.5, |p, w| expit(-3.0 + 2.0 * p[0] + 0.5 * w as f64));
    let b = build_tensor_basis(&g, 5, 3).unwrap();
    let m = fit_rams(&d, &b, Lambda::Auto).unwrap();
    for i in 0..d.n() {
        for k in 0..3 {
            let p = expit(m.linear_predictor(&b, i, k));
            assert!(p > 0.0 && p < 1.0);
        }
    }
}

#[test]
fn trimming_the_gps_moves_strong_overlap_estimates_only_slightly() {
    let (d, g) = arms(3000, 12, 0.4, |p, w| expit(-1.8 + 1.5 * p[0] + 0.3 * w as f64));
    let pair = TreatmentPair::new(0, 2).unwrap();
    let rd = |g: &GpsMatrix| {
        let b = build_tensor_basis(g, 5, 3).unwrap();
        let m = fit_rams(&d, &b, Lambda::Auto).unwrap();
        estimate_ate_rams(&m, &d, &b, pair, Estimand::Rd).unwrap().point
    };
    let full = rd(&g);
    let trimmed = rd(&trim_gps(&g, 0.05, 0.95).unwrap());
    assert!((full - trimmed).abs() < 2e-3, "{full} vs {trimmed}");
}
