use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use multitreat::commands::{self, Status};
use multitreat::config::RunConfig;

#[derive(Parser)]
#[command(name = "multitreat", version, about = "Causal effects of several treatments on a rare binary outcome")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one dataset of a named scenario with its truth sidecar.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Replication index of the dataset.
        #[arg(long)]
        replication: Option<u64>,
    },
    /// Estimate pairwise effects on a dataset CSV.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Summarize a replication table, or run a sweep first when no table is given.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        replications: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// Flat key = value config file (a manifest also works).
    #[arg(long)]
    config: Option<PathBuf>,
    /// I, II, III or demo.
    #[arg(long)]
    design: Option<String>,
    #[arg(long)]
    scenario: Option<u8>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated method names, or `all`.
    #[arg(long)]
    methods: Option<String>,
    /// Comma-separated subset of rd,rr.
    #[arg(long)]
    estimands: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long = "bootstrap-B")]
    bootstrap_b: Option<usize>,
    /// Trim percentiles as `lower,upper`, e.g. 5,95.
    #[arg(long)]
    trim: Option<String>,
    /// Sample size override.
    #[arg(long)]
    n: Option<usize>,
    /// Further overrides as key=value (e.g. bart.trees=50).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        let flags: [(&str, Option<String>); 9] = [
            ("design", self.design.clone()),
            ("scenario", self.scenario.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("methods", self.methods.clone()),
            ("estimands", self.estimands.clone()),
            ("workers", self.workers.map(|v| v.to_string())),
            ("bootstrap_b", self.bootstrap_b.map(|v| v.to_string())),
            ("trim", self.trim.clone()),
            ("n", self.n.map(|v| v.to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                c.set(k, &v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| anyhow::anyhow!("--set expects KEY=VALUE, got '{kv}'"))?;
            c.set(k.trim(), v.trim())?;
        }
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::Simulate { common, replication } => {
            let mut c = common.config()?;
            if let Some(r) = replication {
                c.replication = r;
            }
            commands::simulate(&c, &common.out)
        }
        Command::Estimate { common, data } => commands::estimate(&common.config()?, &data, &common.out),
        Command::Report {
            common,
            table,
            replications,
        } => {
            let mut c = common.config()?;
            if let Some(r) = replications {
                c.replications = r;
            }
            commands::report(&c, table.as_deref(), &common.out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Status::Complete) => ExitCode::SUCCESS,
        Ok(Status::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
