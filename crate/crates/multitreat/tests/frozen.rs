use multitreat::coefficients::{format_scenario, parse_scenario};
use multitreat::scenarios::{self, SHIPPED};
use multitreat_core::dgp::CoefficientSet;

fn flat(c: &CoefficientSet) -> Vec<f64> {
    let mut v: Vec<f64> = c.alpha.iter().chain(&c.tau).copied().collect();
    for s in c.xi_linear.iter().chain(&c.xi_nonlinear).chain(&c.eta_linear).chain(&c.eta_nonlinear) {
        v.extend(s);
    }
    v
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn shipped_files_parse_and_reformat_identically() {
    for (name, text) in SHIPPED {
        let s = parse_scenario(text).unwrap();
        assert_eq!(s.name, name);
        assert_eq!(format_scenario(&s), text, "{name}");
    }
}

#[test]
fn shipped_coefficients_are_reproducible() {
    for cfg in scenarios::all_configs(1) {
        let shipped = scenarios::load(&cfg).unwrap();
        let fresh = scenarios::freeze(&cfg).unwrap();
        let (a, b) = (&shipped.coefficients, &fresh.coefficients);
        assert_eq!(a.q_terms, b.q_terms);
        let (mut x, mut y) = (flat(a), flat(b));
        assert_eq!(x.len(), y.len());
        x.extend(shipped.truth.risks);
        y.extend(fresh.truth.risks);
        for (x, y) in x.iter().zip(&y) {
            assert!(close(*x, *y), "{}: {x} vs {y}", scenarios::key(&cfg));
        }
    }
}
