//! Frozen coefficient files: `key = value` lines holding one scenario's
//! coefficient set and the true marginal risks computed from it.

use std::collections::BTreeMap;
use std::fmt::Write;

use anyhow::{anyhow, bail, Context, Result};
use multitreat_core::dgp::{CoefficientSet, QTerm, TrueEffects};
use multitreat_core::{Estimand, TreatmentPair};

#[derive(Debug, Clone, PartialEq)]
pub struct FrozenScenario {
    pub name: String,
    pub coefficients: CoefficientSet,
    pub truth: TrueEffects,
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

pub fn format_scenario(s: &FrozenScenario) -> String {
    let c = &s.coefficients;
    let mut out = String::new();
    let mut line = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
    line("scenario", s.name.clone());
    line("q_terms", c.q_terms.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" "));
    line("alpha", join(&c.alpha));
    for a in 0..2 {
        line(&format!("xi_linear.{}", a + 1), join(&c.xi_linear[a]));
        line(&format!("xi_nonlinear.{}", a + 1), join(&c.xi_nonlinear[a]));
    }
    line("tau", join(&c.tau));
    for w in 0..3 {
        line(&format!("eta_linear.{}", w + 1), join(&c.eta_linear[w]));
        line(&format!("eta_nonlinear.{}", w + 1), join(&c.eta_nonlinear[w]));
    }
    line("truth.risk", join(&s.truth.risks));
    for pair in TreatmentPair::all(3) {
        for e in [Estimand::Rd, Estimand::Rr] {
            let v = s.truth.effect(pair, e).expect("risks are positive");
            line(&format!("truth.{e}.{}-{}", pair.k + 1, pair.l + 1), format!("{v:?}"));
        }
    }
    out
}

pub fn parse_scenario(text: &str) -> Result<FrozenScenario> {
    let mut kv = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let (k, v) = l.split_once('=').ok_or_else(|| anyhow!("line {}: expected key = value", no + 1))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| kv.get(k).ok_or_else(|| anyhow!("missing key '{k}'"));
    let nums = |k: &str| -> Result<Vec<f64>> {
        get(k)?
            .split_whitespace()
            .map(|t| t.parse::<f64>().with_context(|| format!("bad number '{t}' in '{k}'")))
            .collect()
    };
    let fixed = |k: &str, n: usize| -> Result<Vec<f64>> {
        let v = nums(k)?;
        if v.len() != n {
            bail!("'{k}' needs {n} values, found {}", v.len());
        }
        Ok(v)
    };
    let q_terms = get("q_terms")?
        .split_whitespace()
        .map(|t| t.parse::<QTerm>().map_err(|e| anyhow!("{e}")))
        .collect::<Result<Vec<_>>>()?;
    let alpha = fixed("alpha", 2)?;
    let tau = fixed("tau", 3)?;
    let risks = fixed("truth.risk", 3)?;
    let coefficients = CoefficientSet {
        alpha: [alpha[0], alpha[1]],
        xi_linear: [nums("xi_linear.1")?, nums("xi_linear.2")?],
        xi_nonlinear: [nums("xi_nonlinear.1")?, nums("xi_nonlinear.2")?],
        tau: [tau[0], tau[1], tau[2]],
        eta_linear: [nums("eta_linear.1")?, nums("eta_linear.2")?, nums("eta_linear.3")?],
        eta_nonlinear: [nums("eta_nonlinear.1")?, nums("eta_nonlinear.2")?, nums("eta_nonlinear.3")?],
        q_terms,
    };
    coefficients.validate()?;
    Ok(FrozenScenario {
        name: get("scenario")?.clone(),
        coefficients,
        truth: TrueEffects { risks: [risks[0], risks[1], risks[2]] },
    })
}
