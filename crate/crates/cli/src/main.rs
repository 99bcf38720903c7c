use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dptraj_cli::{
    cmd_account, cmd_eval, cmd_fit, cmd_sample, cmd_simulate, config_time_count, init_threads, read_dataset_dir,
    CliConfig, CliResult, LedgerSource, Metric, PlanKind,
};

/// Differentially private continuous-time synthetic trajectories.
///
/// Thread count follows DPTRAJ_THREADS when set.
#[derive(Parser)]
#[command(name = "dptraj", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset (and ground truth when available).
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Fit particles and plans to a dataset directory.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Directory holding dataset.jsonl and grid.json.
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated δ values for the privacy report.
        #[arg(long, value_delimiter = ',')]
        delta: Option<Vec<f64>>,
    },
    /// Sample trajectories from a fit directory.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        fit: PathBuf,
        /// `grid` or a comma-separated list of times.
        #[arg(long)]
        times: Option<String>,
        #[arg(long, value_enum)]
        plans: Option<PlanKind>,
        #[arg(long)]
        n_paths: Option<usize>,
    },
    /// Compare a fit directory, trajectory file or snapshot file with a dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',')]
        metric: Option<Vec<Metric>>,
    },
    /// Compose a privacy ledger and convert it to (ε, δ).
    Account {
        #[command(flatten)]
        common: Common,
        /// ledger.json from a fit; without it the ledger is rebuilt from --config.
        #[arg(long)]
        ledger: Option<PathBuf>,
        /// Dataset directory used to label partitions of a rebuilt ledger.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        delta: Option<Vec<f64>>,
    },
}

fn load(common: &Common) -> CliResult<CliConfig> {
    let mut cfg = match &common.config {
        Some(p) => CliConfig::load(p)?,
        None => CliConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn print_pairs(report: &dptraj::privacy::PrivacyReport) {
    println!("mu_gdp = {}", report.mu_gdp);
    for p in &report.pairs {
        println!("eps = {} at delta = {}", p.eps, p.delta);
    }
    for n in &report.notes {
        println!("note: {n}");
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    init_threads()?;
    match cli.command {
        Command::Simulate { common } => {
            let cfg = load(&common)?;
            cmd_simulate(&cfg, &common.out)?;
            println!("wrote {}", common.out.display());
        }
        Command::Fit { common, data, delta } => {
            let cfg = load(&common)?;
            let s = cmd_fit(&cfg, &data, &common.out, delta.as_deref())?;
            println!("{} iterations; wrote {}", s.iterations, common.out.display());
            print_pairs(&s.report);
        }
        Command::Sample {
            common,
            fit,
            times,
            plans,
            n_paths,
        } => {
            let mut cfg = load(&common)?;
            if let Some(n) = n_paths {
                cfg.sample.n_paths = n;
            }
            let set = cmd_sample(&cfg, &fit, &common.out, times.as_deref(), plans)?;
            println!("{} paths; wrote {}", set.len(), common.out.display());
        }
        Command::Eval {
            common,
            data,
            input,
            metric,
        } => {
            let cfg = load(&common)?;
            let rows = cmd_eval(&cfg, &data, &input, &common.out, metric.as_deref())?;
            for r in rows.iter().filter(|r| r.time_index.is_none()) {
                println!("mean {} = {}", r.metric, r.value);
            }
        }
        Command::Account {
            common,
            ledger,
            data,
            delta,
        } => {
            let cfg = load(&common)?;
            let source = match &ledger {
                Some(p) => LedgerSource::File(p),
                None => {
                    let t = match &data {
                        Some(d) => read_dataset_dir(d)?.len(),
                        None => config_time_count(&cfg).unwrap_or(1),
                    };
                    LedgerSource::Planned(t)
                }
            };
            let report = cmd_account(&cfg, source, &common.out, delta.as_deref())?;
            print_pairs(&report);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
