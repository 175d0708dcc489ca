//! The ten estimation methods as one closed set, each mapped to its
//! propensity model, optional trimming and outcome estimator.
//!
//! Methods sharing a propensity model (or a BART fit) share one fit when run
//! together.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::bart::{self, BartConfig};
use crate::data::{CausalEstimate, Dataset, Estimand, GpsMatrix, TreatmentPair};
use crate::error::{Error, Result};
use crate::gps::{self, GbmConfig};
use crate::iptw;
use crate::rams::{self, Lambda};
use crate::rng::{self, label, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    IptwMlr,
    IptwMlrTrim,
    IptwGbm,
    IptwGbmTrim,
    RamsMlr,
    RamsMlrTrim,
    RamsGbm,
    RamsGbmTrim,
    Bart,
    BartDiscard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpsModel {
    Mlr,
    Gbm,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::IptwMlr,
        Method::IptwMlrTrim,
        Method::IptwGbm,
        Method::IptwGbmTrim,
        Method::RamsMlr,
        Method::RamsMlrTrim,
        Method::RamsGbm,
        Method::RamsGbmTrim,
        Method::Bart,
        Method::BartDiscard,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::IptwMlr => "iptw-mlr",
            Method::IptwMlrTrim => "iptw-mlr-trim",
            Method::IptwGbm => "iptw-gbm",
            Method::IptwGbmTrim => "iptw-gbm-trim",
            Method::RamsMlr => "rams-mlr",
            Method::RamsMlrTrim => "rams-mlr-trim",
            Method::RamsGbm => "rams-gbm",
            Method::RamsGbmTrim => "rams-gbm-trim",
            Method::Bart => "bart",
            Method::BartDiscard => "bart-discard",
        }
    }

    pub fn gps_model(self) -> Option<GpsModel> {
        match self {
            Method::IptwMlr | Method::IptwMlrTrim | Method::RamsMlr | Method::RamsMlrTrim => Some(GpsModel::Mlr),
            Method::IptwGbm | Method::IptwGbmTrim | Method::RamsGbm | Method::RamsGbmTrim => Some(GpsModel::Gbm),
            Method::Bart | Method::BartDiscard => None,
        }
    }

    pub fn is_trimmed(self) -> bool {
        matches!(
            self,
            Method::IptwMlrTrim | Method::IptwGbmTrim | Method::RamsMlrTrim | Method::RamsGbmTrim
        )
    }

    pub fn is_bart(self) -> bool {
        self.gps_model().is_none()
    }

    /// Parses a comma-separated list; `all` selects every method.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let mut out: Vec<Method> = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "all" {
                out.extend(Method::ALL);
            } else {
                out.push(part.parse()?);
            }
        }
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(Error::Precondition("no methods selected".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Precondition(alloc::format!("unknown method '{s}'")))
    }
}

/// Hyperparameters of every method.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub mlr_tol: f64,
    pub mlr_max_iter: usize,
    pub gbm: GbmConfig,
    /// Lower and upper trimming percentiles (weights for IPTW, GPS for RAMS).
    pub trim: (f64, f64),
    pub knots: usize,
    pub degree: usize,
    pub lambda: Lambda,
    pub bart: BartConfig,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            mlr_tol: 1e-8,
            mlr_max_iter: 25,
            gbm: GbmConfig::default(),
            trim: (0.05, 0.95),
            knots: rams::DEFAULT_INTERIOR_KNOTS,
            degree: 3,
            lambda: Lambda::Auto,
            bart: BartConfig::default(),
        }
    }
}

/// Estimates of one method on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutput {
    pub method: Method,
    /// All pairs (lexicographic) × requested estimands, or the failure.
    pub estimates: core::result::Result<Vec<CausalEstimate>, String>,
    /// Units removed by the common-support rule (BART-Discard).
    pub discarded: Option<usize>,
    pub warnings: Vec<String>,
}

fn all_contrasts(
    z: usize,
    estimands: &[Estimand],
    mut f: impl FnMut(TreatmentPair, Estimand) -> Result<CausalEstimate>,
) -> Result<Vec<CausalEstimate>> {
    let mut out = Vec::new();
    for pair in TreatmentPair::all(z) {
        for &e in estimands {
            out.push(f(pair, e)?);
        }
    }
    Ok(out)
}

/// IPTW contrasts from a given propensity matrix, optionally with weights
/// capped at the `trim` percentiles.
pub fn iptw_estimates(
    d: &Dataset,
    g: &GpsMatrix,
    trim: Option<(f64, f64)>,
    estimands: &[Estimand],
    method: &str,
) -> Result<Vec<CausalEstimate>> {
    let mut v = iptw::compute_weights(g, d)?;
    if let Some((lo, hi)) = trim {
        v = iptw::trim_weights(&v, lo, hi)?;
    }
    all_contrasts(d.z(), estimands, |p, e| iptw::estimate_ate_iptw(d, &v, p, e, method))
}

/// RAMS contrasts from a given propensity matrix.
pub fn rams_estimates(
    d: &Dataset,
    g: &GpsMatrix,
    settings: &Settings,
    estimands: &[Estimand],
    method: &str,
    warnings: &mut Vec<String>,
) -> Result<Vec<CausalEstimate>> {
    let basis = rams::build_tensor_basis(g, settings.knots, settings.degree)?;
    let m = rams::fit_rams(d, &basis, settings.lambda)?;
    warnings.extend(m.warnings.iter().map(|w| w.to_string()));
    all_contrasts(d.z(), estimands, |p, e| {
        let mut est = rams::estimate_ate_rams(&m, d, &basis, p, e)?;
        est.method = method.to_string();
        Ok(est)
    })
}

/// Fits the propensity model behind `model`.
pub fn fit_gps(d: &Dataset, model: GpsModel, settings: &Settings, seed: u64, warnings: &mut Vec<String>) -> Result<GpsMatrix> {
    match model {
        GpsModel::Mlr => {
            let m = gps::fit_mlr(d, settings.mlr_tol, settings.mlr_max_iter)?;
            warnings.extend(m.warnings.iter().map(|w| alloc::format!("mlr: {w}")));
            gps::predict_gps_mlr(&m, d)
        }
        GpsModel::Gbm => {
            let cfg = GbmConfig {
                seed: rng::derive_seed(seed, &[label::GBM]),
                ..settings.gbm.clone()
            };
            let m = gps::fit_gbm(d, &cfg)?;
            gps::predict_gps_gbm(&m, d, None)
        }
    }
}

/// Point estimates (and BART credible intervals) for every requested method.
/// Failures are reported per method and never abort the others.
pub fn run_methods(
    d: &Dataset,
    methods: &[Method],
    estimands: &[Estimand],
    settings: &Settings,
    seed: u64,
) -> Vec<MethodOutput> {
    let mut gps_cache: [Option<(core::result::Result<GpsMatrix, String>, Vec<String>)>; 2] = [None, None];
    let mut bart_cache: Option<core::result::Result<(bart::BartPosterior, Vec<String>), String>> = None;
    let mut out = Vec::with_capacity(methods.len());
    for &method in methods {
        let mut warnings = Vec::new();
        let mut discarded = None;
        let estimates = match method.gps_model() {
            Some(model) => {
                let slot = &mut gps_cache[model as usize];
                let (g, gw) = slot.get_or_insert_with(|| {
                    let mut w = Vec::new();
                    let g = fit_gps(d, model, settings, seed, &mut w).map_err(|e| e.to_string());
                    (g, w)
                });
                warnings.extend(gw.iter().cloned());
                match g {
                    Err(e) => Err(e.clone()),
                    Ok(g) => gps_method(d, g, method, settings, estimands, &mut warnings).map_err(|e| e.to_string()),
                }
            }
            None => {
                let post = bart_cache.get_or_insert_with(|| {
                    let cfg = BartConfig {
                        seed: rng::derive_seed(seed, &[label::MCMC]),
                        ..settings.bart.clone()
                    };
                    bart::fit_probit_bart(d, &cfg)
                        .map(|p| (p, Vec::new()))
                        .map_err(|e| e.to_string())
                });
                match post {
                    Err(e) => Err(e.clone()),
                    Ok((p, _)) => bart_method(d, p, method, estimands, &mut discarded).map_err(|e| e.to_string()),
                }
            }
        };
        out.push(MethodOutput {
            method,
            estimates,
            discarded,
            warnings,
        });
    }
    out
}

/// Runs a propensity-based method on an already estimated GPS.
pub fn gps_method(
    d: &Dataset,
    g: &GpsMatrix,
    method: Method,
    settings: &Settings,
    estimands: &[Estimand],
    warnings: &mut Vec<String>,
) -> Result<Vec<CausalEstimate>> {
    let name = method.as_str();
    let (lo, hi) = settings.trim;
    match method {
        Method::IptwMlr | Method::IptwGbm => iptw_estimates(d, g, None, estimands, name),
        Method::IptwMlrTrim | Method::IptwGbmTrim => iptw_estimates(d, g, Some(settings.trim), estimands, name),
        Method::RamsMlr | Method::RamsGbm => rams_estimates(d, g, settings, estimands, name, warnings),
        Method::RamsMlrTrim | Method::RamsGbmTrim => {
            let t = gps::trim_gps(g, lo, hi)?;
            rams_estimates(d, &t, settings, estimands, name, warnings)
        }
        Method::Bart | Method::BartDiscard => Err(Error::Precondition("BART does not use a GPS".into())),
    }
}

fn bart_method(
    d: &Dataset,
    p: &bart::BartPosterior,
    method: Method,
    estimands: &[Estimand],
    discarded: &mut Option<usize>,
) -> Result<Vec<CausalEstimate>> {
    let units: Vec<usize> = if method == Method::BartDiscard {
        let kept = bart::discard_common_support(p, d)?;
        *discarded = Some(d.n() - kept.len());
        kept
    } else {
        (0..d.n()).collect()
    };
    let means = bart::draw_means(p, d, &units)?;
    all_contrasts(d.z(), estimands, |pair, e| bart::estimate_ate_bart(&means, pair, e, method.as_str()))
}

/// Bootstrap resample drawn with replacement within each treatment group,
/// keeping group sizes fixed. Indices are returned group by group.
pub fn stratified_resample(treatment: &[usize], z: usize, rng: &mut StreamRng) -> Vec<usize> {
    use rand::Rng;
    let mut groups: Vec<Vec<usize>> = (0..z).map(|_| Vec::new()).collect();
    for (i, &w) in treatment.iter().enumerate() {
        groups[w].push(i);
    }
    let mut out = Vec::with_capacity(treatment.len());
    for g in &groups {
        for _ in 0..g.len() {
            out.push(g[rng.random_range(0..g.len())]);
        }
    }
    out
}
