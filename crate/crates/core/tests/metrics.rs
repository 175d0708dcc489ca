use multitreat_core::metrics::{mab, mcse, rmse};
use multitreat_core::rng;
use rand::Rng;

#[test]
fn summaries_match_naive_formulas() {
    let mut r = rng::stream(1, &[1]);
    let b: Vec<f64> = (0..200).map(|_| r.random_range(-0.05..0.05)).collect();
    let n = b.len() as f64;
    let mut abs = 0.0;
    let mut sq = 0.0;
    let mut sum = 0.0;
    for v in &b {
        abs += v.abs();
        sq += v * v;
        sum += v;
    }
    let mean = sum / n;
    let mut dev = 0.0;
    for v in &b {
        dev += (v - mean) * (v - mean);
    }
    assert!((mab(&b).unwrap() - abs / n).abs() < 1e-12);
    assert!((rmse(&b).unwrap() - (sq / n).sqrt()).abs() < 1e-12);
    assert!((mcse(&b).unwrap() - (dev / (n - 1.0)).sqrt() / n.sqrt()).abs() < 1e-12);
}

#[test]
fn hand_cases() {
    assert_eq!(mab(&[1.0, -1.0]).unwrap(), 1.0);
    assert_eq!(rmse(&[1.0, -1.0]).unwrap(), 1.0);
    assert_eq!(mab(&[0.0; 3]).unwrap(), 0.0);
    assert_eq!(mcse(&[0.0; 3]).unwrap(), 0.0);
}
