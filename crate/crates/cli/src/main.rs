use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use mmd_quant::algorithms::Registry;
use mmd_quant::error::Error;
use mmd_quant::harness::run::{baseline, compare, run, write_csv};
use mmd_quant::harness::verify::{run_check, SuiteOptions, CRITERIA};
use mmd_quant::harness::RunConfig;

/// Greedy MMD quantisation of probability measures.
#[derive(Parser)]
#[command(name = "mmdq", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write its trace CSV and manifest JSON.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run several configurations on the same problem and write a long-format CSV.
    Compare {
        #[arg(long = "config", required = true, num_args = 1..)]
        configs: Vec<PathBuf>,
        /// Append the iid baseline with this many repetitions.
        #[arg(long)]
        baseline_reps: Option<usize>,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance suite.
    Verify {
        /// Smaller problem sizes, same tolerances.
        #[arg(long)]
        quick: bool,
    },
    /// Mean and spread of MMD² for iid samples from the target.
    Baseline {
        #[arg(long)]
        config: PathBuf,
        /// Repetitions; defaults to `baseline.reps` of the config.
        #[arg(long)]
        reps: Option<usize>,
    },
}

enum Failure {
    Check(String),
    Error(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Error(e)) if e.is_config_error() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn execute(cmd: Command) -> Result<(), Failure> {
    let registry = Registry::default();
    match cmd {
        Command::Run { config } => {
            let cfg = RunConfig::from_file(&config)?;
            let out = run(&cfg, &registry)?;
            let m = &out.manifest;
            println!(
                "{}: {} iterations, final MMD² {}, trace {}, manifest {}",
                m.algorithm,
                m.iterations,
                m.final_mmd2
                    .map_or("n/a".to_string(), |v| format!("{v:.6e}")),
                out.trace_path.display(),
                out.manifest_path.display()
            );
            if let Some(reason) = &m.stop_reason {
                println!("stopped early: {reason}");
            }
            if m.bound_violations > 0 {
                return Err(Failure::Check(format!(
                    "{} iterations exceed the bound",
                    m.bound_violations
                )));
            }
        }
        Command::Compare {
            configs,
            baseline_reps,
            out,
        } => {
            let cfgs = configs
                .iter()
                .map(|p| RunConfig::from_file(p))
                .collect::<Result<Vec<_>, _>>()?;
            let rows = compare(&cfgs, &registry, baseline_reps)?;
            match out {
                Some(path) => {
                    write_csv(&path, &rows)?;
                    info!("wrote {} rows to {}", rows.len(), path.display());
                }
                None => {
                    let mut w = csv::Writer::from_writer(std::io::stdout());
                    for r in &rows {
                        w.serialize(r).map_err(Error::from)?;
                    }
                    w.flush().map_err(|source| Error::Io {
                        path: PathBuf::from("<stdout>"),
                        source,
                    })?;
                }
            }
        }
        Command::Verify { quick } => {
            let opts = SuiteOptions { quick };
            let mut failed = 0;
            for id in 1..=CRITERIA {
                let r = run_check(id, &opts);
                println!("{r}");
                failed += usize::from(!r.acceptable());
            }
            if failed > 0 {
                return Err(Failure::Check(format!(
                    "{failed} of {CRITERIA} criteria failed"
                )));
            }
            println!("all {CRITERIA} criteria met");
        }
        Command::Baseline { config, reps } => {
            let cfg = RunConfig::from_file(&config)?;
            let (rows, path) = baseline(&cfg, reps.unwrap_or(cfg.baseline.reps))?;
            println!("{} rows written to {}", rows.len(), path.display());
        }
    }
    Ok(())
}
