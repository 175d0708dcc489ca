//! CSV forms of estimates, replication tables and metric summaries.

use std::path::Path;

use anyhow::{anyhow, Context, Result};
use multitreat_core::{Estimand, TreatmentPair};

use crate::eval::{MetricSummary, ReplicationRow, ReplicationTable};

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

fn pair_cells(p: TreatmentPair) -> [String; 2] {
    [(p.k + 1).to_string(), (p.l + 1).to_string()]
}

pub const REPLICATION_HEADER: [&str; 13] = [
    "replication", "method", "k", "l", "estimand", "estimate", "lower", "upper", "truth", "bias", "n_used",
    "discarded", "error",
];

pub fn write_replications(t: &ReplicationTable, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(REPLICATION_HEADER)?;
    for r in &t.rows {
        let [k, l] = pair_cells(r.pair);
        w.write_record([
            r.replication.to_string(),
            r.method.clone(),
            k,
            l,
            r.estimand.to_string(),
            opt(r.estimate),
            opt(r.lower),
            opt(r.upper),
            r.truth.to_string(),
            opt(r.bias()),
            r.n_used.to_string(),
            opt(r.discarded),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_replications(path: &Path) -> Result<ReplicationTable> {
    let mut rd = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let f = |c: usize| rec.get(c).unwrap_or("");
        let bad = |c: usize| anyhow!("row {}: bad '{}' value '{}'", i + 1, REPLICATION_HEADER[c], f(c));
        let num = |c: usize| -> Result<Option<f64>> {
            if f(c).is_empty() {
                Ok(None)
            } else {
                f(c).parse().map(Some).map_err(|_| bad(c))
            }
        };
        let label = |c: usize| -> Result<usize> {
            f(c).parse::<usize>().ok().filter(|v| *v >= 1).map(|v| v - 1).ok_or_else(|| bad(c))
        };
        rows.push(ReplicationRow {
            replication: f(0).parse().map_err(|_| bad(0))?,
            method: f(1).to_string(),
            pair: TreatmentPair::new(label(2)?, label(3)?)?,
            estimand: f(4).parse::<Estimand>().map_err(|_| bad(4))?,
            estimate: num(5)?,
            lower: num(6)?,
            upper: num(7)?,
            truth: num(8)?.ok_or_else(|| bad(8))?,
            n_used: f(10).parse().map_err(|_| bad(10))?,
            discarded: if f(11).is_empty() { None } else { Some(f(11).parse().map_err(|_| bad(11))?) },
            error: (!f(12).is_empty()).then(|| f(12).to_string()),
        });
    }
    Ok(ReplicationTable { rows })
}

pub fn write_summary(s: &[MetricSummary], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record([
        "method", "k", "l", "estimand", "completed", "failed", "mab", "rmse", "mcse", "mean_bias", "mean_discarded",
    ])?;
    for m in s {
        let [k, l] = pair_cells(m.pair);
        w.write_record([
            m.method.clone(),
            k,
            l,
            m.estimand.to_string(),
            m.completed.to_string(),
            m.failed.to_string(),
            m.mab.to_string(),
            m.rmse.to_string(),
            opt(m.mcse),
            m.mean_bias.to_string(),
            opt(m.mean_discarded),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row of the `estimate` command output.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub method: String,
    pub pair: TreatmentPair,
    pub estimand: Estimand,
    pub estimate: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    /// `posterior`, `bootstrap` or empty.
    pub interval: String,
    pub n_used: Option<usize>,
    pub status: String,
    pub message: String,
}

pub fn write_estimates(rows: &[EstimateRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record([
        "method", "k", "l", "estimand", "estimate", "lower", "upper", "interval", "n_used", "status", "message",
    ])?;
    for r in rows {
        let [k, l] = pair_cells(r.pair);
        w.write_record([
            r.method.clone(),
            k,
            l,
            r.estimand.to_string(),
            opt(r.estimate),
            opt(r.lower),
            opt(r.upper),
            r.interval.clone(),
            opt(r.n_used),
            r.status.clone(),
            r.message.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Method × pair grid of `estimate (lower, upper)` cells for one estimand,
/// scaled to percent for risk differences.
pub fn write_estimate_grid(rows: &[EstimateRow], estimand: Estimand, path: &Path) -> Result<()> {
    let mut pairs: Vec<TreatmentPair> = rows.iter().map(|r| r.pair).collect();
    pairs.sort();
    pairs.dedup();
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let scale = if estimand == Estimand::Rd { 100.0 } else { 1.0 };
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut header = vec!["method".to_string()];
    header.extend(pairs.iter().map(|p| format!("ATE_{}{}", p.k + 1, p.l + 1)));
    w.write_record(&header)?;
    for m in methods {
        let mut rec = vec![m.to_string()];
        for p in &pairs {
            let cell = rows
                .iter()
                .find(|r| r.method == m && r.pair == *p && r.estimand == estimand)
                .map(|r| match (r.estimate, r.lower, r.upper) {
                    (Some(e), Some(lo), Some(hi)) => {
                        format!("{:.2} ({:.2}, {:.2})", e * scale, lo * scale, hi * scale)
                    }
                    (Some(e), _, _) => format!("{:.2}", e * scale),
                    _ => "failed".into(),
                })
                .unwrap_or_default();
            rec.push(cell);
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
