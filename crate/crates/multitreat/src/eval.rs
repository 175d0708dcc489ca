//! Replication sweeps, bias summaries and the nonparametric bootstrap.

use std::collections::BTreeMap;

use anyhow::{bail, Result};
use multitreat_core::dgp::{self, CoefficientSet, SimConfig, TrueEffects};
use multitreat_core::metrics;
use multitreat_core::pipeline::{self, Method, MethodOutput, Settings};
use multitreat_core::rng::{self, label};
use multitreat_core::stats;
use multitreat_core::{CausalEstimate, Dataset, Estimand, TreatmentPair};
use rayon::prelude::*;

/// One cell of a sweep: replication × method × pair × estimand.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRow {
    pub replication: u64,
    pub method: String,
    pub pair: TreatmentPair,
    pub estimand: Estimand,
    /// `None` when the method failed on this replication.
    pub estimate: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub truth: f64,
    pub n_used: usize,
    pub discarded: Option<usize>,
    pub error: Option<String>,
}

impl ReplicationRow {
    pub fn bias(&self) -> Option<f64> {
        self.estimate.map(|e| e - self.truth)
    }

    pub fn failed(&self) -> bool {
        self.estimate.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReplicationTable {
    pub rows: Vec<ReplicationRow>,
}

/// What a sweep runs on each simulated dataset: `(data, seed)` to one
/// output per method.
pub trait Runner: Sync {
    fn run(&self, d: &Dataset, seed: u64) -> Vec<MethodOutput>;
}

impl<F: Fn(&Dataset, u64) -> Vec<MethodOutput> + Sync> Runner for F {
    fn run(&self, d: &Dataset, seed: u64) -> Vec<MethodOutput> {
        self(d, seed)
    }
}

/// Runs the closed-set methods through [`pipeline::run_methods`].
pub struct Methods<'a> {
    pub methods: &'a [Method],
    pub estimands: &'a [Estimand],
    pub settings: &'a Settings,
}

impl Runner for Methods<'_> {
    fn run(&self, d: &Dataset, seed: u64) -> Vec<MethodOutput> {
        pipeline::run_methods(d, self.methods, self.estimands, self.settings, seed)
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?)
}

/// Simulates `r` replications of `cfg` and runs every method on each.
/// Replication `i` uses data seed and method seed derived from
/// `(cfg.seed, i)` only, so the table does not depend on `workers`.
/// A method failure leaves flagged rows and never stops the sweep.
pub fn run_replications(
    cfg: &SimConfig,
    coeffs: &CoefficientSet,
    truth: &TrueEffects,
    runner: &dyn Runner,
    estimands: &[Estimand],
    r: usize,
    workers: usize,
) -> Result<ReplicationTable> {
    if r == 0 {
        bail!("at least one replication is required");
    }
    let per_rep: Vec<Result<Vec<ReplicationRow>>> = pool(workers)?.install(|| {
        (0..r as u64)
            .into_par_iter()
            .map(|rep| {
                let d = dgp::simulate(cfg, coeffs, rep)?;
                let seed = rng::derive_seed(cfg.seed, &[label::REPLICATION, rep]);
                let outputs = runner.run(&d, seed);
                Ok(rows_of(rep, &outputs, truth, estimands, d.n(), d.z()))
            })
            .collect()
    });
    let mut rows = Vec::new();
    for r in per_rep {
        rows.extend(r?);
    }
    Ok(ReplicationTable { rows })
}

fn rows_of(
    rep: u64,
    outputs: &[MethodOutput],
    truth: &TrueEffects,
    estimands: &[Estimand],
    n: usize,
    z: usize,
) -> Vec<ReplicationRow> {
    let mut rows = Vec::new();
    for out in outputs {
        let name = out.method.as_str().to_string();
        match &out.estimates {
            Ok(ests) => {
                for e in ests {
                    rows.push(ReplicationRow {
                        replication: rep,
                        method: name.clone(),
                        pair: e.pair,
                        estimand: e.estimand,
                        estimate: Some(e.point),
                        lower: e.interval.map(|i| i.lower),
                        upper: e.interval.map(|i| i.upper),
                        truth: truth.effect(e.pair, e.estimand).unwrap_or(f64::NAN),
                        n_used: e.n_used,
                        discarded: out.discarded,
                        error: None,
                    });
                }
            }
            Err(msg) => {
                for pair in TreatmentPair::all(z) {
                    for &estimand in estimands {
                        rows.push(ReplicationRow {
                            replication: rep,
                            method: name.clone(),
                            pair,
                            estimand,
                            estimate: None,
                            lower: None,
                            upper: None,
                            truth: truth.effect(pair, estimand).unwrap_or(f64::NAN),
                            n_used: n,
                            discarded: None,
                            error: Some(msg.clone()),
                        });
                    }
                }
            }
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub method: String,
    pub pair: TreatmentPair,
    pub estimand: Estimand,
    pub completed: usize,
    pub failed: usize,
    pub mab: f64,
    pub rmse: f64,
    /// `None` with fewer than two completed replications.
    pub mcse: Option<f64>,
    pub mean_bias: f64,
    /// Mean number of units removed by a common-support rule.
    pub mean_discarded: Option<f64>,
}

/// Summaries per (method, pair, estimand), in order of first appearance of
/// the method and then by pair and estimand. Failed cells are excluded and
/// counted.
pub fn summarize(table: &ReplicationTable) -> Result<Vec<MetricSummary>> {
    if table.rows.is_empty() {
        bail!("replication table is empty");
    }
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<(usize, TreatmentPair, Estimand), Vec<&ReplicationRow>> = BTreeMap::new();
    for row in &table.rows {
        let m = match order.iter().position(|m| *m == row.method) {
            Some(i) => i,
            None => {
                order.push(row.method.clone());
                order.len() - 1
            }
        };
        groups.entry((m, row.pair, row.estimand)).or_default().push(row);
    }
    let mut out = Vec::new();
    for ((m, pair, estimand), rows) in groups {
        let biases: Vec<f64> = rows.iter().filter_map(|r| r.bias()).collect();
        let failed = rows.len() - biases.len();
        let discarded: Vec<f64> = rows.iter().filter_map(|r| r.discarded.map(|d| d as f64)).collect();
        let (mab, rmse, mean_bias) = if biases.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            (metrics::mab(&biases)?, metrics::rmse(&biases)?, stats::mean(&biases))
        };
        out.push(MetricSummary {
            method: order[m].clone(),
            pair,
            estimand,
            completed: biases.len(),
            failed,
            mab,
            rmse,
            mcse: metrics::mcse(&biases).ok(),
            mean_bias,
            mean_discarded: (!discarded.is_empty()).then(|| stats::mean(&discarded)),
        });
    }
    Ok(out)
}

pub fn find<'a>(s: &'a [MetricSummary], method: &str, pair: TreatmentPair, estimand: Estimand) -> Option<&'a MetricSummary> {
    s.iter().find(|m| m.method == method && m.pair == pair && m.estimand == estimand)
}

pub const MIN_BOOTSTRAP: usize = 100;
/// Largest tolerated share of failed resamples.
pub const MAX_SKIPPED: f64 = 0.10;

/// Refits `f` on `b` resamples drawn with replacement within each treatment
/// group. Resample `i` uses a stream derived from `(seed, i)`, so results do
/// not depend on `workers`. Entry `i` is the outcome of resample `i`.
pub fn bootstrap_replicates<T: Send>(
    d: &Dataset,
    b: usize,
    seed: u64,
    workers: usize,
    f: &(dyn Fn(&Dataset, u64) -> Result<T> + Sync),
) -> Result<Vec<Result<T>>> {
    if b < MIN_BOOTSTRAP {
        bail!("bootstrap needs B >= {MIN_BOOTSTRAP}, got {b}");
    }
    Ok(pool(workers)?.install(|| {
        (0..b as u64)
            .into_par_iter()
            .map(|i| {
                let mut r = rng::stream(seed, &[label::BOOTSTRAP, i]);
                let idx = pipeline::stratified_resample(d.treatment(), d.z(), &mut r);
                let rd = d.subset(&idx)?;
                f(&rd, rng::derive_seed(seed, &[label::BOOTSTRAP, i, 1]))
            })
            .collect()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapInterval {
    pub lower: f64,
    pub upper: f64,
    pub used: usize,
    pub skipped: usize,
}

/// Percentile interval (type 7) of the successful replicates; an error if
/// more than 10% of them failed.
pub fn percentile_interval(values: &[Option<f64>], level: (f64, f64)) -> Result<BootstrapInterval> {
    let ok: Vec<f64> = values.iter().flatten().copied().filter(|v| v.is_finite()).collect();
    let skipped = values.len() - ok.len();
    if ok.is_empty() || skipped as f64 > MAX_SKIPPED * values.len() as f64 {
        bail!("{skipped} of {} bootstrap resamples failed", values.len());
    }
    let s = stats::sorted(&ok);
    Ok(BootstrapInterval {
        lower: stats::quantile_linear(&s, level.0),
        upper: stats::quantile_linear(&s, level.1),
        used: ok.len(),
        skipped,
    })
}

/// 95% stratified percentile bootstrap interval of one estimate.
pub fn bootstrap_ci(
    estimator: &(dyn Fn(&Dataset) -> Result<CausalEstimate> + Sync),
    d: &Dataset,
    b: usize,
    seed: u64,
    workers: usize,
) -> Result<BootstrapInterval> {
    let reps = bootstrap_replicates(d, b, seed, workers, &|rd, _| estimator(rd))?;
    let values: Vec<Option<f64>> = reps.iter().map(|r| r.as_ref().ok().map(|e| e.point)).collect();
    percentile_interval(&values, (0.025, 0.975))
}
