//! The `simulate`, `estimate` and `report` commands.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use multitreat_core::dgp::{self, Design, SimConfig};
use multitreat_core::pipeline::{self, Method, MethodOutput};
use multitreat_core::{Dataset, Estimand, TreatmentPair};

use crate::config::RunConfig;
use crate::eval::{self, MetricSummary, ReplicationTable};
use crate::manifest::{sha256_hex, Manifest};
use crate::tables::{self, EstimateRow};
use crate::{io, plot, scenarios};

/// Set when some method (or its interval) failed; maps to exit code 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Complete,
    Partial,
}

pub fn parse_design(s: &str) -> Result<Option<Design>> {
    Ok(Some(match s.to_ascii_lowercase().as_str() {
        "i" | "1" | "sim1" => Design::I,
        "ii" | "2" | "sim2" => Design::II,
        "iii" | "3" | "sim3" => Design::III,
        "demo" => return Ok(None),
        other => bail!("unknown design '{other}' (expected I, II, III or demo)"),
    }))
}

pub fn sim_config(cfg: &RunConfig) -> Result<SimConfig> {
    let mut sim = match parse_design(&cfg.design)? {
        Some(d) => SimConfig::scenario(d, cfg.scenario, cfg.seed)?,
        None => dgp::demo_config(cfg.seed),
    };
    if let Some(n) = cfg.n {
        sim.n = n;
    }
    sim.validate()?;
    Ok(sim)
}

fn ratio_text(r: &[f64; 3]) -> String {
    r.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(":")
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<Status> {
    let sim = sim_config(cfg)?;
    let text = scenarios::shipped_text(&sim)?;
    let frozen = scenarios::load(&sim)?;
    let d = dgp::simulate(&sim, &frozen.coefficients, cfg.replication)?;
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    io::write_dataset(&d, &out.join("data.csv"))?;
    std::fs::write(out.join("coefficients.txt"), text)?;

    let mut w = csv::Writer::from_path(out.join("true_ate.csv"))?;
    w.write_record(["k", "l", "estimand", "truth"])?;
    for pair in TreatmentPair::all(3) {
        for e in [Estimand::Rd, Estimand::Rr] {
            w.write_record([
                (pair.k + 1).to_string(),
                (pair.l + 1).to_string(),
                e.to_string(),
                frozen.truth.effect(pair, e)?.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut m = Manifest::new("simulate", cfg);
    m.add("scenario", scenarios::key(&sim))
        .add("n", sim.n)
        .add("ratio", ratio_text(&sim.ratio))
        .add("prevalence_band", format!("{},{}", sim.band.0, sim.band.1))
        .add("coefficients_sha256", sha256_hex(text.as_bytes()));
    if let Some(o) = sim.overlap {
        m.add("overlap", o);
    }
    m.write(out)?;
    Ok(Status::Complete)
}

fn outputs_by_method(outputs: &[MethodOutput]) -> BTreeMap<Method, &MethodOutput> {
    outputs.iter().map(|o| (o.method, o)).collect()
}

/// Point estimates for every method; BART intervals from the posterior,
/// the others from a stratified full-pipeline bootstrap (skipped when
/// `bootstrap_b` is 0).
pub fn estimate_rows(cfg: &RunConfig, d: &Dataset) -> Result<Vec<EstimateRow>> {
    let outputs = pipeline::run_methods(d, &cfg.methods, &cfg.estimands, &cfg.settings, cfg.seed);
    let gps_methods: Vec<Method> = cfg
        .methods
        .iter()
        .copied()
        .filter(|m| !m.is_bart())
        .filter(|m| outputs.iter().any(|o| o.method == *m && o.estimates.is_ok()))
        .collect();

    // intervals[(method, pair, estimand)] -> interval or failure message
    let mut intervals: BTreeMap<(Method, TreatmentPair, Estimand), Result<eval::BootstrapInterval, String>> =
        BTreeMap::new();
    if cfg.bootstrap_b > 0 && !gps_methods.is_empty() {
        let reps = eval::bootstrap_replicates(d, cfg.bootstrap_b, cfg.seed, cfg.workers, &|rd, seed| {
            Ok(pipeline::run_methods(rd, &gps_methods, &cfg.estimands, &cfg.settings, seed))
        })?;
        for &m in &gps_methods {
            for pair in TreatmentPair::all(d.z()) {
                for &e in &cfg.estimands {
                    let values: Vec<Option<f64>> = reps
                        .iter()
                        .map(|r| {
                            let outs = r.as_ref().ok()?;
                            let o = outs.iter().find(|o| o.method == m)?;
                            let ests = o.estimates.as_ref().ok()?;
                            ests.iter().find(|x| x.pair == pair && x.estimand == e).map(|x| x.point)
                        })
                        .collect();
                    let ci = eval::percentile_interval(&values, (0.025, 0.975)).map_err(|e| e.to_string());
                    intervals.insert((m, pair, e), ci);
                }
            }
        }
    }

    let mut rows = Vec::new();
    for (&method, out) in outputs_by_method(&outputs).iter() {
        let name = method.as_str().to_string();
        match &out.estimates {
            Err(msg) => {
                for pair in TreatmentPair::all(d.z()) {
                    for &estimand in &cfg.estimands {
                        rows.push(EstimateRow {
                            method: name.clone(),
                            pair,
                            estimand,
                            estimate: None,
                            lower: None,
                            upper: None,
                            interval: String::new(),
                            n_used: None,
                            status: "failed".into(),
                            message: msg.clone(),
                        });
                    }
                }
            }
            Ok(ests) => {
                for e in ests {
                    let mut row = EstimateRow {
                        method: name.clone(),
                        pair: e.pair,
                        estimand: e.estimand,
                        estimate: Some(e.point),
                        lower: e.interval.map(|i| i.lower),
                        upper: e.interval.map(|i| i.upper),
                        interval: if e.interval.is_some() { "posterior".into() } else { String::new() },
                        n_used: Some(e.n_used),
                        status: "ok".into(),
                        message: out.warnings.join("; "),
                    };
                    match intervals.get(&(method, e.pair, e.estimand)) {
                        Some(Ok(ci)) => {
                            row.lower = Some(ci.lower);
                            row.upper = Some(ci.upper);
                            row.interval = "bootstrap".into();
                            if ci.skipped > 0 {
                                row.message = join_msg(&row.message, &format!("{} resamples skipped", ci.skipped));
                            }
                        }
                        Some(Err(msg)) => {
                            row.status = "interval-failed".into();
                            row.message = join_msg(&row.message, msg);
                        }
                        None => {}
                    }
                    rows.push(row);
                }
            }
        }
    }
    // Keep the requested method order.
    rows.sort_by_key(|r| {
        (
            cfg.methods.iter().position(|m| m.as_str() == r.method),
            r.pair,
            cfg.estimands.iter().position(|e| *e == r.estimand),
        )
    });
    Ok(rows)
}

fn join_msg(a: &str, b: &str) -> String {
    if a.is_empty() {
        b.to_string()
    } else {
        format!("{a}; {b}")
    }
}

pub fn estimate(cfg: &RunConfig, data: &Path, out: &Path) -> Result<Status> {
    let d = io::read_dataset(data)?;
    let rows = estimate_rows(cfg, &d)?;
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    tables::write_estimates(&rows, &out.join("estimates.csv"))?;
    for &e in &cfg.estimands {
        tables::write_estimate_grid(&rows, e, &out.join(format!("estimates_grid_{e}.csv")))?;
    }
    let mut m = Manifest::new("estimate", cfg);
    m.add("data_sha256", sha256_hex(&std::fs::read(data)?)).add("n", d.n());
    m.write(out)?;
    Ok(if rows.iter().any(|r| r.status != "ok") { Status::Partial } else { Status::Complete })
}

/// MAB ordering checks `a < b` per pair for the method pairs present.
pub fn ordering_checks(s: &[MetricSummary], estimand: Estimand) -> Vec<(String, bool)> {
    let chains: [&[&str]; 2] = [&["bart", "rams-mlr", "iptw-mlr"], &["iptw-mlr-trim", "iptw-mlr"]];
    let mut out = Vec::new();
    for chain in chains {
        for pair in TreatmentPair::all(3) {
            let mabs: Option<Vec<f64>> =
                chain.iter().map(|m| eval::find(s, m, pair, estimand).map(|x| x.mab)).collect();
            if let Some(v) = mabs {
                let strict = chain.len() > 2;
                let ok = v.windows(2).all(|w| if strict { w[0] < w[1] } else { w[0] <= w[1] });
                let rel = if strict { " < " } else { " <= " };
                let desc = chain
                    .iter()
                    .zip(&v)
                    .map(|(m, x)| format!("{m} {:.4}", x * 100.0))
                    .collect::<Vec<_>>()
                    .join(rel);
                out.push((format!("MAB% {estimand} {pair}: {desc}"), ok));
            }
        }
    }
    out
}

pub fn report(cfg: &RunConfig, table: Option<&Path>, out: &Path) -> Result<Status> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let mut m = Manifest::new("report", cfg);
    let t: ReplicationTable = match table {
        Some(p) => {
            m.add("table_sha256", sha256_hex(&std::fs::read(p)?));
            tables::read_replications(p)?
        }
        None => {
            let sim = sim_config(cfg)?;
            let frozen = scenarios::load(&sim)?;
            m.add("scenario", scenarios::key(&sim))
                .add("n", sim.n)
                .add("coefficients_sha256", sha256_hex(scenarios::shipped_text(&sim)?.as_bytes()));
            let runner = eval::Methods {
                methods: &cfg.methods,
                estimands: &cfg.estimands,
                settings: &cfg.settings,
            };
            let t = eval::run_replications(
                &sim,
                &frozen.coefficients,
                &frozen.truth,
                &runner,
                &cfg.estimands,
                cfg.replications,
                cfg.workers,
            )?;
            tables::write_replications(&t, &out.join("replications.csv"))?;
            t
        }
    };
    let summary = eval::summarize(&t)?;
    tables::write_summary(&summary, &out.join("summary.csv"))?;

    let mut estimands: Vec<Estimand> = t.rows.iter().map(|r| r.estimand).collect();
    estimands.sort();
    estimands.dedup();
    let mut methods: Vec<&str> = Vec::new();
    for r in &t.rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let mut checks = csv::Writer::from_path(out.join("checks.csv"))?;
    checks.write_record(["check", "holds"])?;
    for &e in &estimands {
        let mut pairs: Vec<TreatmentPair> = t.rows.iter().map(|r| r.pair).collect();
        pairs.sort();
        pairs.dedup();
        for pair in pairs {
            let groups: Vec<(String, Vec<f64>)> = methods
                .iter()
                .map(|&name| {
                    let b = t
                        .rows
                        .iter()
                        .filter(|r| r.method == name && r.pair == pair && r.estimand == e)
                        .filter_map(|r| r.bias())
                        .collect();
                    (name.to_string(), b)
                })
                .collect();
            let title = format!("Bias of {} estimates, pair ({pair})", e.as_str().to_uppercase());
            std::fs::write(
                out.join(format!("bias_{e}_{}{}.svg", pair.k + 1, pair.l + 1)),
                plot::boxplot_svg(&title, &groups),
            )?;
        }
        for (desc, ok) in ordering_checks(&summary, e) {
            println!("{} {desc}", if ok { "holds:" } else { "fails:" });
            checks.write_record([desc, ok.to_string()])?;
        }
    }
    checks.flush()?;
    let failed = t.rows.iter().filter(|r| r.failed()).count();
    if failed > 0 {
        println!("{failed} failed cells excluded from the summary");
    }
    m.add("failed_cells", failed);
    m.write(out)?;
    Ok(if failed > 0 { Status::Partial } else { Status::Complete })
}
