//! `rkf` command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input, 2 runtime failure.

use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use rkf::experiment::{run_experiment, write_outputs, ExperimentSpec};
use rkf::{enumerate_combinations, DomainSchema, Parallelism, RelevanceStore, RewardScript, RkfParams};
use rkf_service::ServiceConfig;

#[derive(Parser)]
#[command(name = "rkf", version, about = "Relevance-guided product configuration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count every combination the build phase can produce.
    Enumerate {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        root: String,
        /// Also classify each combination against the n:m relations.
        #[arg(long)]
        relations: bool,
        /// Use one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Run a batch experiment and write CSV traces.
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the base seed of the spec.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        sequential: bool,
    },
    /// Serve interactive configuration sessions over HTTP.
    Serve {
        #[arg(long)]
        port: u16,
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        rewards: PathBuf,
        /// Relevance store file; created if missing, rewritten after changes.
        #[arg(long)]
        store: Option<PathBuf>,
        /// Task class for sessions that do not name one.
        #[arg(long, default_value = "default")]
        class: String,
        /// Seconds before an unrated session is dropped.
        #[arg(long, default_value_t = 1800)]
        idle_timeout: u64,
        /// Parameters for a new store.
        #[arg(long, default_value_t = 1.4)]
        b_t: f64,
        #[arg(long, default_value_t = 1.1)]
        b_f: f64,
        #[arg(long, default_value_t = 1.9)]
        v: f64,
    },
    /// Delete objects whose relevance is below the threshold in every class.
    Sweep {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        threshold: f64,
    },
    /// Replace a task class by two copies of it.
    SplitClass {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        class: String,
        #[arg(long, num_args = 2, value_names = ["C1", "C2"])]
        into: Vec<String>,
    },
}

enum Failure {
    Invalid(anyhow::Error),
    Runtime(anyhow::Error),
}

trait Classify<T> {
    fn invalid(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn invalid(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Invalid(e.into()))
    }
    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn mode(sequential: bool) -> Parallelism {
    if sequential {
        Parallelism::Sequential
    } else {
        Parallelism::Parallel
    }
}

fn load_store(path: &Path) -> Result<RelevanceStore, Failure> {
    RelevanceStore::load(path).with_context(|| format!("loading store {}", path.display())).invalid()
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Enumerate { domain, root, relations, sequential } => {
            let schema = DomainSchema::load(&domain).with_context(|| format!("loading {}", domain.display())).invalid()?;
            let e = enumerate_combinations(&schema, &root, relations, mode(sequential)).invalid()?;
            if relations {
                println!("total {}\nvalid {}\ninvalid {}", e.total, e.valid, e.invalid);
            } else {
                println!("{}", e.total);
            }
        }
        Command::Run { spec, out, seed, sequential } => {
            let mut exp = ExperimentSpec::load(&spec).with_context(|| format!("loading {}", spec.display())).invalid()?;
            if let Some(seed) = seed {
                exp.spec.seed = seed;
            }
            let outcome = run_experiment(&exp, mode(sequential));
            let written = write_outputs(&exp, &outcome, &out).runtime()?;
            for path in &written {
                println!("{}", path.display());
            }
            if !outcome.failures.is_empty() {
                let list: Vec<String> =
                    outcome.failures.iter().map(|f| format!("repetition {}: {}", f.repetition, f.error)).collect();
                return Err(Failure::Runtime(anyhow!("{} repetitions failed\n{}", list.len(), list.join("\n"))));
            }
        }
        Command::Serve { port, domain, rewards, store, class, idle_timeout, b_t, b_f, v } => {
            let schema = DomainSchema::load(&domain).with_context(|| format!("loading {}", domain.display())).invalid()?;
            let script = RewardScript::load(&rewards).with_context(|| format!("loading {}", rewards.display())).invalid()?;
            let relevance = match &store {
                Some(p) if p.exists() => load_store(p)?,
                _ => RelevanceStore::new(RkfParams::new(b_t, b_f, v).invalid()?),
            };
            let mut config = ServiceConfig::new(schema, relevance);
            config.rewards = Some(script);
            config.store_path = store;
            config.default_class = class;
            config.idle_timeout = Duration::from_secs(idle_timeout);
            let runtime = tokio::runtime::Runtime::new().runtime()?;
            let addr = SocketAddr::from((Ipv4Addr::UNSPECIFIED, port));
            runtime.block_on(rkf_service::serve(config, addr)).context("serving").runtime()?;
        }
        Command::Sweep { store, threshold } => {
            let mut relevance = load_store(&store)?;
            let deleted = relevance.sweep_at_clocks(threshold).invalid()?;
            relevance.save(&store).with_context(|| format!("writing {}", store.display())).runtime()?;
            for key in &deleted {
                println!("{key}");
            }
            eprintln!("deleted {} objects", deleted.len());
        }
        Command::SplitClass { store, class, into } => {
            let mut relevance = load_store(&store)?;
            relevance.split_task_class(&class, &into[0], &into[1]).invalid()?;
            relevance.save(&store).with_context(|| format!("writing {}", store.display())).runtime()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
