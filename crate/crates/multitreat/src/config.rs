//! Run configuration as flat `key = value` text. Command-line flags are
//! applied on top of a config file through the same keys.

use std::collections::BTreeMap;
use std::fmt::Write;

use anyhow::{anyhow, bail, Context, Result};
use multitreat_core::pipeline::{Method, Settings};
use multitreat_core::rams::Lambda;
use multitreat_core::Estimand;

pub const DEFAULT_BOOTSTRAP: usize = 1000;
pub const DEFAULT_REPLICATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub design: String,
    pub scenario: u8,
    pub seed: u64,
    /// Overrides the scenario's sample size.
    pub n: Option<usize>,
    pub replication: u64,
    pub replications: usize,
    pub methods: Vec<Method>,
    pub estimands: Vec<Estimand>,
    pub bootstrap_b: usize,
    pub settings: Settings,
    /// Worker threads; never affects outputs and is not part of the manifest.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            design: "I".into(),
            scenario: 1,
            seed: 1,
            n: None,
            replication: 0,
            replications: DEFAULT_REPLICATIONS,
            methods: Method::ALL.to_vec(),
            estimands: vec![Estimand::Rd],
            bootstrap_b: DEFAULT_BOOTSTRAP,
            settings: Settings::default(),
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| anyhow!("invalid value '{v}' for '{key}'"))
}

/// `5,95` (percent) or `0.05,0.95` (fractions).
pub fn parse_trim(v: &str) -> Result<(f64, f64)> {
    let (a, b) = v.split_once(',').ok_or_else(|| anyhow!("trim needs 'lower,upper', got '{v}'"))?;
    let (mut lo, mut hi): (f64, f64) = (parse("trim", a.trim())?, parse("trim", b.trim())?);
    if hi > 1.0 {
        lo /= 100.0;
        hi /= 100.0;
    }
    if !(0.0..1.0).contains(&lo) || !(lo < hi && hi <= 1.0) {
        bail!("trim percentiles must satisfy 0 <= lower < upper <= 100");
    }
    Ok((lo, hi))
}

/// `key = value` pairs, skipping blank lines, `#` comments and `meta.*` keys.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let (k, v) = l.split_once('=').ok_or_else(|| anyhow!("line {}: expected key = value", no + 1))?;
        let k = k.trim();
        if !k.starts_with("meta.") {
            out.push((k.to_string(), v.trim().to_string()));
        }
    }
    Ok(out)
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (k, v) in parse_pairs(text)? {
            c.set(&k, &v)?;
        }
        Ok(c)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let s = &mut self.settings;
        match key {
            "design" => self.design = v.to_string(),
            "scenario" => self.scenario = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "n" => self.n = if v == "default" { None } else { Some(parse(key, v)?) },
            "replication" => self.replication = parse(key, v)?,
            "replications" => self.replications = parse(key, v)?,
            "methods" => self.methods = Method::parse_list(v)?,
            "estimands" => {
                self.estimands = v
                    .split(',')
                    .map(|e| e.parse::<Estimand>().map_err(|e| anyhow!("{e}")))
                    .collect::<Result<_>>()?
            }
            "bootstrap_b" => self.bootstrap_b = parse(key, v)?,
            "workers" => self.workers = parse(key, v)?,
            "trim" => s.trim = parse_trim(v)?,
            "mlr.tol" => s.mlr_tol = parse(key, v)?,
            "mlr.max_iter" => s.mlr_max_iter = parse(key, v)?,
            "gbm.max_iter" => s.gbm.max_iter = parse(key, v)?,
            "gbm.shrinkage" => s.gbm.shrinkage = parse(key, v)?,
            "gbm.depth" => s.gbm.depth = parse(key, v)?,
            "gbm.subsample" => s.gbm.subsample = parse(key, v)?,
            "gbm.eval_every" => s.gbm.eval_every = parse(key, v)?,
            "gbm.min_leaf" => s.gbm.min_leaf = parse(key, v)?,
            "rams.knots" => s.knots = parse(key, v)?,
            "rams.degree" => s.degree = parse(key, v)?,
            "rams.lambda" => {
                s.lambda = if v == "auto" { Lambda::Auto } else { Lambda::Fixed(parse(key, v)?) }
            }
            "bart.trees" => s.bart.trees = parse(key, v)?,
            "bart.k" => s.bart.k = parse(key, v)?,
            "bart.alpha" => s.bart.alpha = parse(key, v)?,
            "bart.beta" => s.bart.beta = parse(key, v)?,
            "bart.total" => s.bart.total = parse(key, v)?,
            "bart.burn_in" => s.bart.burn_in = parse(key, v)?,
            "bart.max_cutpoints" => s.bart.max_cutpoints = parse(key, v)?,
            _ => bail!("unknown configuration key '{key}'"),
        }
        Ok(())
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::from_text(&text)
    }

    /// Canonical text of every output-relevant key, sorted. Parsing it gives
    /// back an equal configuration (up to `workers`).
    pub fn canonical(&self) -> String {
        let s = &self.settings;
        let mut m: BTreeMap<&str, String> = BTreeMap::new();
        m.insert("design", self.design.clone());
        m.insert("scenario", self.scenario.to_string());
        m.insert("seed", self.seed.to_string());
        m.insert("n", self.n.map_or("default".into(), |n| n.to_string()));
        m.insert("replication", self.replication.to_string());
        m.insert("replications", self.replications.to_string());
        m.insert("methods", self.methods.iter().map(|x| x.as_str()).collect::<Vec<_>>().join(","));
        m.insert("estimands", self.estimands.iter().map(|e| e.as_str()).collect::<Vec<_>>().join(","));
        m.insert("bootstrap_b", self.bootstrap_b.to_string());
        m.insert("trim", format!("{:?},{:?}", s.trim.0, s.trim.1));
        m.insert("mlr.tol", format!("{:?}", s.mlr_tol));
        m.insert("mlr.max_iter", s.mlr_max_iter.to_string());
        m.insert("gbm.max_iter", s.gbm.max_iter.to_string());
        m.insert("gbm.shrinkage", format!("{:?}", s.gbm.shrinkage));
        m.insert("gbm.depth", s.gbm.depth.to_string());
        m.insert("gbm.subsample", format!("{:?}", s.gbm.subsample));
        m.insert("gbm.eval_every", s.gbm.eval_every.to_string());
        m.insert("gbm.min_leaf", s.gbm.min_leaf.to_string());
        m.insert("rams.knots", s.knots.to_string());
        m.insert("rams.degree", s.degree.to_string());
        m.insert(
            "rams.lambda",
            match s.lambda {
                Lambda::Auto => "auto".into(),
                Lambda::Fixed(l) => format!("{l:?}"),
            },
        );
        m.insert("bart.trees", s.bart.trees.to_string());
        m.insert("bart.k", format!("{:?}", s.bart.k));
        m.insert("bart.alpha", format!("{:?}", s.bart.alpha));
        m.insert("bart.beta", format!("{:?}", s.bart.beta));
        m.insert("bart.total", s.bart.total.to_string());
        m.insert("bart.burn_in", s.bart.burn_in.to_string());
        m.insert("bart.max_cutpoints", s.bart.max_cutpoints.to_string());
        let mut out = String::new();
        for (k, v) in m {
            writeln!(out, "{k} = {v}").unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_round_trips() {
        let mut c = RunConfig::default();
        c.set("methods", "bart,iptw-mlr").unwrap();
        c.set("estimands", "rd,rr").unwrap();
        c.set("trim", "1,99").unwrap();
        c.set("rams.lambda", "0.5").unwrap();
        c.set("n", "300").unwrap();
        let back = RunConfig::from_text(&c.canonical()).unwrap();
        assert_eq!(RunConfig { workers: c.workers, ..back }, c);
    }

    #[test]
    fn trim_accepts_percent_or_fraction() {
        assert_eq!(parse_trim("5,95").unwrap(), (0.05, 0.95));
        assert_eq!(parse_trim("0.1,0.9").unwrap(), (0.1, 0.9));
        assert!(parse_trim("95,5").is_err());
    }

    #[test]
    fn unknown_keys_and_meta_lines() {
        assert!(RunConfig::from_text("colour = blue").is_err());
        let c = RunConfig::from_text("# note\nmeta.command = simulate\nseed = 9\n").unwrap();
        assert_eq!(c.seed, 9);
    }
}
