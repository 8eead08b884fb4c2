//! `logdiff`: scalar checks, simulations, cascade studies and reports.
//!
//! Exit status: 0 when everything passes, 1 on a runtime error, 2 on a
//! validation error or a failed invariant.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use logdiff::config::RunConfig;
use logdiff::error::Error;
use logdiff::experiment::{run_cascade, run_report, run_simulate, scalar_suite, Manifest};

#[derive(Parser)]
#[command(name = "logdiff", version, about = "Stochastic fast logarithmic diffusion toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Property suite of the scalar resolvent calculus.
    CheckScalar {
        /// Values of lambda swept by the suite.
        #[arg(long = "lambda", value_delimiter = ',', default_values_t = [0.5, 0.25, 0.1, 0.01])]
        lambdas: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Runs the ensemble described by a configuration.
    Simulate(RunArgs),
    /// Runs the epsilon, nu and lambda schedules with coupled noise.
    Cascade(RunArgs),
    /// Verifies and summarizes run directories.
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Directory for the overlay script (default: the first run directory).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn load(args: &RunArgs) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(&args.config).map_err(|e| match e {
        Error::MissingArtifact(p) => Failure::Runtime(anyhow::anyhow!("config file {} not found", p.display())),
        other => Failure::from(other),
    })?;
    cfg.apply_env_overrides()?;
    if let Some(s) = args.seed {
        cfg.ensemble.seed = s;
    }
    if let Some(n) = args.paths {
        cfg.ensemble.n_paths = n;
    }
    if let Some(w) = args.workers {
        cfg.ensemble.workers = w;
    }
    if let Some(o) = &args.out {
        cfg.output.dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_manifest(m: &Manifest, dir: &Path, json: bool) -> anyhow::Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(m)?);
        return Ok(());
    }
    println!("run directory: {}", dir.display());
    println!("manifest hash: {}", m.manifest_hash);
    println!("dt = {:e}, steps = {}, paths = {}", m.dt, m.n_steps, m.n_paths);
    for (k, v) in &m.fitted {
        println!("fitted {k} = {v:e}");
    }
    for l in &m.ledger {
        println!(
            "{} {} (value {:e}, threshold {:e})",
            match (l.asserted, l.pass) {
                (false, _) => "INFO",
                (true, true) => "PASS",
                (true, false) => "FAIL",
            },
            l.criterion,
            l.value,
            l.threshold
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::CheckScalar { lambdas, seed, json } => {
            let report = scalar_suite(&lambdas, seed)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report).context("encoding ledger")?);
            } else {
                for c in &report.checks {
                    println!(
                        "{} {} ({} samples, {} violations, worst {:e})",
                        if c.pass { "PASS" } else { "FAIL" },
                        c.name,
                        c.samples,
                        c.violations,
                        c.worst
                    );
                }
            }
            Ok(report.pass)
        }
        Command::Simulate(args) => {
            let cfg = load(&args)?;
            let out = cfg.output.dir.clone();
            let o = run_simulate(&cfg, &out)?;
            print_manifest(&o.manifest, &out, args.json)?;
            Ok(o.manifest.all_pass())
        }
        Command::Cascade(args) => {
            let cfg = load(&args)?;
            let out = cfg.output.dir.clone();
            let o = run_cascade(&cfg, &out)?;
            print_manifest(&o.manifest, &out, args.json)?;
            if !args.json {
                for s in &o.report.stages {
                    for c in s.consecutive.iter().chain(&s.to_reference) {
                        println!(
                            "{} {:e} vs {:e}: mean sup dist^2 {:e} (band {:e})",
                            s.name, c.a, c.b, c.mean_sup_dist_sq, c.band
                        );
                    }
                }
            }
            Ok(o.manifest.all_pass())
        }
        Command::Report { dirs, out, json } => {
            let r = run_report(&dirs, out.as_deref())?;
            for w in &r.warnings {
                eprintln!("{w}");
            }
            if json {
                println!("{}", serde_json::to_string_pretty(&r).context("encoding report")?);
            } else {
                for p in &r.written {
                    println!("wrote {}", p.display());
                }
            }
            Ok(r.warnings.is_empty())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
