//! Coefficient files shipped with the crate, one per named scenario.

use anyhow::{anyhow, Result};
use multitreat_core::dgp::{self, Design, SimConfig};

use crate::coefficients::{parse_scenario, FrozenScenario};

pub const SHIPPED: [(&str, &str); 9] = [
    ("sim1-s1", include_str!("../data/coefficients/sim1-s1.txt")),
    ("sim1-s2", include_str!("../data/coefficients/sim1-s2.txt")),
    ("sim1-s3", include_str!("../data/coefficients/sim1-s3.txt")),
    ("sim2-s1", include_str!("../data/coefficients/sim2-s1.txt")),
    ("sim2-s2", include_str!("../data/coefficients/sim2-s2.txt")),
    ("sim3-s1", include_str!("../data/coefficients/sim3-s1.txt")),
    ("sim3-s2", include_str!("../data/coefficients/sim3-s2.txt")),
    ("sim3-s3", include_str!("../data/coefficients/sim3-s3.txt")),
    ("demo", include_str!("../data/coefficients/demo.txt")),
];

/// Every shipped scenario with its configuration at `seed`.
pub fn all_configs(seed: u64) -> Vec<SimConfig> {
    SHIPPED.iter().map(|(name, _)| config(name, seed).expect("shipped names parse")).collect()
}

pub fn config(name: &str, seed: u64) -> Result<SimConfig> {
    if name == "demo" {
        Ok(dgp::demo_config(seed))
    } else {
        Ok(SimConfig::from_name(name, seed)?)
    }
}

/// File key of a configuration: its scenario name, or `demo`.
pub fn key(cfg: &SimConfig) -> String {
    if cfg.design == Design::I && cfg.scenario == 0 {
        "demo".into()
    } else {
        cfg.name()
    }
}

pub fn shipped_text(cfg: &SimConfig) -> Result<&'static str> {
    let k = key(cfg);
    SHIPPED
        .iter()
        .find(|(n, _)| *n == k)
        .map(|(_, t)| *t)
        .ok_or_else(|| anyhow!("no shipped coefficients for '{k}'"))
}

pub fn load(cfg: &SimConfig) -> Result<FrozenScenario> {
    parse_scenario(shipped_text(cfg)?)
}

/// Recomputes a scenario's coefficients and stored truth from scratch.
pub fn freeze(cfg: &SimConfig) -> Result<FrozenScenario> {
    let coefficients = dgp::build_coefficients(cfg)?;
    let truth = dgp::reference_truth(cfg, &coefficients);
    Ok(FrozenScenario {
        name: key(cfg),
        coefficients,
        truth,
    })
}
