use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bulletin_queues::charts::BoxGrouping;
use bulletin_queues::config::{parse_config, ExperimentConfig};
use bulletin_queues::experiment::{cmd_charts, cmd_conformance, cmd_optimize, cmd_sweep};
use bulletin_queues::sim::PolicyFilter;
use bulletin_queues::{Error, Result};

/// Simulate and tune a pair of queues whose tenants renege or switch sides
/// in response to periodic service bulletins.
#[derive(Parser)]
#[command(name = "bulletin-queues", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration file; built-in defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override the base random seed
    #[arg(long)]
    seed: Option<u64>,

    /// Directory for output files
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Copy, Clone, ValueEnum)]
enum PolicyArg {
    On,
    Off,
    Both,
}

#[derive(Copy, Clone, ValueEnum)]
enum GroupArg {
    /// One box per outcome and policy flag, pooled over intervals
    Pooled,
    /// Separate boxes per dispatch interval
    Interval,
}

#[derive(Subcommand)]
enum Command {
    /// Run the replication sweep over dispatch intervals and arrival rates
    Sweep {
        #[command(flatten)]
        common: Common,

        /// Replications per sweep cell
        #[arg(long)]
        replications: Option<usize>,

        /// Bulletin dispatch intervals, comma-separated seconds
        #[arg(long, value_delimiter = ',')]
        intervals: Option<Vec<f64>>,

        /// Total arrival rates, comma-separated
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,

        /// Which policy arms to run
        #[arg(long, value_enum, default_value_t = PolicyArg::Both)]
        policy: PolicyArg,
    },
    /// Scan the service-rate lattice per interval and tabulate the optima
    Optimize {
        #[command(flatten)]
        common: Common,

        /// Dispatch intervals to optimize, comma-separated seconds
        #[arg(long, value_delimiter = ',')]
        intervals: Option<Vec<f64>>,
    },
    /// Render SVG charts from a sweep CSV
    Charts {
        #[command(flatten)]
        common: Common,

        /// Per-replication sweep CSV to plot
        #[arg(long, default_value = "out/sweep.csv")]
        csv: PathBuf,

        /// Box-plot grouping for waiting times
        #[arg(long, value_enum, default_value_t = GroupArg::Pooled)]
        group: GroupArg,
    },
    /// Compare the numeric switching probability against its printed series
    Conformance {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::MissingInput(format!("{}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None => parse_config("")?,
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn report_written(paths: &[PathBuf]) {
    for path in paths {
        println!("wrote {}", path.display());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sweep {
            common,
            replications,
            intervals,
            lambdas,
            policy,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(n) = replications {
                cfg.replications = n;
            }
            if let Some(list) = intervals {
                cfg.intervals = list;
            }
            if let Some(list) = lambdas {
                cfg.lambdas = list;
            }
            cfg.validate()?;
            let filter = match policy {
                PolicyArg::On => PolicyFilter::On,
                PolicyArg::Off => PolicyFilter::Off,
                PolicyArg::Both => PolicyFilter::Both,
            };
            let written = cmd_sweep(&cfg, filter, &common.out)?;
            report_written(&written);
        }
        Command::Optimize { common, intervals } => {
            let mut cfg = load_config(&common)?;
            if let Some(list) = intervals {
                cfg.intervals = list;
            }
            cfg.validate()?;
            let (table, written) = cmd_optimize(&cfg, &common.out)?;
            print!("{}", table.render_text());
            report_written(&written);
        }
        Command::Charts { common, csv, group } => {
            let cfg = load_config(&common)?;
            let grouping = match group {
                GroupArg::Pooled => BoxGrouping::Pooled,
                GroupArg::Interval => BoxGrouping::ByInterval,
            };
            let written = cmd_charts(&cfg, &csv, grouping, &common.out)?;
            report_written(&written);
        }
        Command::Conformance { common } => {
            let cfg = load_config(&common)?;
            let written = cmd_conformance(&cfg, &common.out)?;
            report_written(&written);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
