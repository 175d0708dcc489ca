use multitreat::eval::{self, bootstrap_ci, Methods};
use multitreat::scenarios;
use multitreat_core::dgp;
use multitreat_core::pipeline::{run_methods, Method, MethodOutput, Settings};
use multitreat_core::{CausalEstimate, Dataset, Estimand, TreatmentPair};

fn small(name: &str, n: usize) -> (multitreat_core::dgp::SimConfig, multitreat::coefficients::FrozenScenario) {
    let mut cfg = scenarios::config(name, 9).unwrap();
    cfg.n = n;
    let f = scenarios::load(&cfg).unwrap();
    (cfg, f)
}

#[test]
fn sweep_is_identical_across_runs_and_worker_counts() {
    let (cfg, f) = small("sim1-s1", 600);
    let settings = Settings::default();
    let runner = Methods {
        methods: &[Method::IptwMlrTrim],
        estimands: &[Estimand::Rd, Estimand::Rr],
        settings: &settings,
    };
    let run = |w| eval::run_replications(&cfg, &f.coefficients, &f.truth, &runner, runner.estimands, 2, w).unwrap();
    let a = run(1);
    assert_eq!(a.rows.len(), 2 * 3 * 2);
    assert_eq!(a, run(1));
    assert_eq!(a, run(4));
}

#[test]
fn failing_method_is_flagged_and_others_complete() {
    let (cfg, f) = small("sim1-s1", 500);
    let settings = Settings::default();
    let runner = |d: &Dataset, seed: u64| {
        let mut out = run_methods(d, &[Method::IptwMlr], &[Estimand::Rd], &settings, seed);
        out.push(MethodOutput {
            method: Method::IptwGbm,
            estimates: Err("stub failure".into()),
            discarded: None,
            warnings: Vec::new(),
        });
        out
    };
    let t = eval::run_replications(&cfg, &f.coefficients, &f.truth, &runner, &[Estimand::Rd], 3, 2).unwrap();
    let (bad, good): (Vec<_>, Vec<_>) = t.rows.iter().partition(|r| r.method == "iptw-gbm");
    assert_eq!(bad.len(), 9);
    assert!(bad.iter().all(|r| r.failed() && r.error.as_deref() == Some("stub failure")));
    assert_eq!(good.len(), 9);
    assert!(good.iter().all(|r| !r.failed()));
    let s = eval::summarize(&t).unwrap();
    let gbm = eval::find(&s, "iptw-gbm", TreatmentPair::new(0, 2).unwrap(), Estimand::Rd).unwrap();
    assert_eq!((gbm.completed, gbm.failed), (0, 3));
}

fn constant(d: &Dataset) -> anyhow::Result<CausalEstimate> {
    Ok(CausalEstimate::new(TreatmentPair::new(0, 1).unwrap(), Estimand::Rd, 0.125, "const", d.n()))
}

#[test]
fn constant_estimator_gives_degenerate_interval() {
    let (cfg, f) = small("sim1-s1", 300);
    let d = dgp::simulate(&cfg, &f.coefficients, 0).unwrap();
    let ci = bootstrap_ci(&constant, &d, 100, 5, 2).unwrap();
    assert_eq!((ci.lower, ci.upper, ci.used, ci.skipped), (0.125, 0.125, 100, 0));
    assert!(bootstrap_ci(&constant, &d, 50, 5, 2).is_err());
}

#[test]
fn resamples_keep_group_sizes_and_ignore_worker_count() {
    let (cfg, f) = small("sim1-s2", 400);
    let d = dgp::simulate(&cfg, &f.coefficients, 1).unwrap();
    let sizes = d.group_sizes();
    let reps = |w| {
        eval::bootstrap_replicates(&d, 100, 77, w, &|r, _| {
            assert_eq!(r.group_sizes(), sizes);
            Ok(r.outcome().iter().map(|&y| u32::from(y)).sum::<u32>())
        })
        .unwrap()
        .into_iter()
        .map(Result::unwrap)
        .collect::<Vec<_>>()
    };
    assert_eq!(reps(1), reps(3));
}
