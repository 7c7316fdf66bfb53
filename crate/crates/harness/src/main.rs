use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use toda_core::Execution;
use toda_harness::config::{parse_entries, Entry};
use toda_harness::experiment::analyze_directory;
use toda_harness::{run_experiment, ExperimentConfig, HarnessError, RunSummary, SpectralCache, Stages};

#[derive(Parser)]
#[command(name = "toda", version, about = "Quantum and classical entanglement in the two-particle Toda model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quantum and classical sweeps, surface of section and analysis
    Run(RunArgs),
    /// Quantum entanglement curves only
    Quantum(RunArgs),
    /// Classical cell-entropy curves only
    Classical(RunArgs),
    /// Surface of section only
    Poincare(RunArgs),
    /// Redo the analysis report from the curve files in a directory
    Analyze {
        dir: PathBuf,
        /// Override an analysis setting, e.g. `analysis.window_factor=0.6`
        #[arg(short, long = "set", value_name = "SECTION.KEY=VALUE")]
        set: Vec<String>,
    },
    /// Inspect or empty the spectral cache
    Cache {
        #[command(subcommand)]
        action: CacheAction,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CacheAction {
    /// One line per entry
    List,
    /// Delete all entries
    Purge,
    /// Print the cache directory
    Path,
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Set any configuration key; repeatable, applied after the file
    #[arg(short, long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    /// regular, chaotic or custom
    #[arg(long)]
    preset: Option<String>,
    /// Output directory (run.output)
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Comma-separated hbar schedule (quantum.hbar)
    #[arg(long)]
    hbar: Option<String>,
    /// Comma-separated cell areas (classical.delta)
    #[arg(long)]
    delta: Option<String>,
    /// Ensemble size (classical.m)
    #[arg(long)]
    m: Option<usize>,
    /// Ensemble seed (classical.seed)
    #[arg(long)]
    seed: Option<u64>,
    /// Ensemble RK4 step (classical.dt)
    #[arg(long)]
    dt: Option<f64>,
    /// End of the time grid (time.t_max)
    #[arg(long)]
    t_max: Option<f64>,
    /// Number of grid points including both ends (time.samples)
    #[arg(long)]
    samples: Option<usize>,
    /// Concurrent sweep cells (run.workers)
    #[arg(long)]
    workers: Option<usize>,
    /// Spectral cache directory; defaults to $TODA_CACHE_DIR, then .toda-cache
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Run every loop on the calling thread
    #[arg(long)]
    sequential: bool,
    /// Print the resolved configuration instead of running
    #[arg(long)]
    print_config: bool,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut entries = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
                    path: path.clone(),
                    source: e,
                })?;
                parse_entries(&text)?
            }
            None => Vec::new(),
        };
        let mut flag = |key: &str, value: Option<String>| {
            if let Some(value) = value {
                entries.push(Entry {
                    key: key.into(),
                    value,
                    line: 0,
                });
            }
        };
        flag("model.preset", self.preset.clone());
        flag("run.output", self.output.as_ref().map(|p| p.display().to_string()));
        flag("quantum.hbar", self.hbar.clone());
        flag("classical.delta", self.delta.clone());
        flag("classical.m", self.m.map(|x| x.to_string()));
        flag("classical.seed", self.seed.map(|x| x.to_string()));
        flag("classical.dt", self.dt.map(|x| x.to_string()));
        flag("time.t_max", self.t_max.map(|x| x.to_string()));
        flag("time.samples", self.samples.map(|x| x.to_string()));
        flag("run.workers", self.workers.map(|x| x.to_string()));
        for s in &self.set {
            entries.push(Entry::from_assignment(s)?);
        }
        Ok(ExperimentConfig::from_entries(&entries)?)
    }
}

fn cache_at(dir: Option<PathBuf>) -> SpectralCache {
    match dir {
        Some(d) => SpectralCache::new(d),
        None => SpectralCache::from_env(".toda-cache"),
    }
}

fn report(summary: &RunSummary) {
    println!("{}", summary.dir.display());
    for (name, hash) in &summary.files {
        println!("  {hash}  {name}");
    }
    for (cell, message, _) in &summary.failures {
        eprintln!("  failed {cell}: {message}");
    }
}

fn execute(command: Command) -> Result<(), HarnessError> {
    let (args, stages) = match command {
        Command::Run(a) => (a, Stages::ALL),
        Command::Quantum(a) => (
            a,
            Stages {
                quantum: true,
                ..Stages::NONE
            },
        ),
        Command::Classical(a) => (
            a,
            Stages {
                classical: true,
                ..Stages::NONE
            },
        ),
        Command::Poincare(a) => (
            a,
            Stages {
                poincare: true,
                ..Stages::NONE
            },
        ),
        Command::Analyze { dir, set } => {
            let overrides = set
                .iter()
                .map(|s| Entry::from_assignment(s))
                .collect::<Result<Vec<_>, _>>()?;
            let summary = analyze_directory(&dir, &overrides)?;
            report(&summary);
            summary.into_result()?;
            return Ok(());
        }
        Command::Cache { action, cache_dir } => {
            let cache = cache_at(cache_dir);
            match action {
                CacheAction::Path => println!("{}", cache.dir().display()),
                CacheAction::List => {
                    for e in cache.entries()? {
                        let what = e.description.unwrap_or_else(|| "unreadable header".into());
                        println!("{}  {:>12}  {what}", e.key, e.bytes);
                    }
                }
                CacheAction::Purge => println!("removed {} entries", cache.purge()?),
            }
            return Ok(());
        }
    };
    let config = args.config()?;
    if args.print_config {
        print!("{}", config.to_text());
        return Ok(());
    }
    let exec = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let summary = run_experiment(&config, stages, &cache_at(args.cache_dir), exec)?;
    report(&summary);
    summary.into_result()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
