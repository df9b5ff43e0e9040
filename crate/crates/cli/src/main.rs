//! `semalloc` command-line front-end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use semalloc_core::config::{load_config, ExperimentConfig};
use semalloc_core::experiment::{self, MetricsInputs};
use semalloc_core::perf_model::PerfCurve;

#[derive(Debug, Parser)]
#[command(
    name = "semalloc",
    version,
    about = "Semantic-aware energy auctions for wireless powered IoT networks"
)]
struct Cli {
    /// Experiment configuration (TOML). Without it every block takes its
    /// defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Global seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory; overrides the config file. Defaults to `.`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the case study: curves, a device snapshot and auction training.
    Simulate(SimulateArgs),
    /// Train the learned auction and write its revenue trace.
    TrainAuction(TrainArgs),
    /// Compute BLEU, CIDEr, similarity, AoI and AoII over input files.
    EvalMetrics(MetricsArgs),
    /// Write the dimension / semantic-quality table.
    ExportCurves,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(subcommand)]
    target: Option<SimulateTarget>,

    #[command(flatten)]
    auction: AuctionOverrides,
}

#[derive(Debug, Subcommand)]
enum SimulateTarget {
    /// Federated semantic-extraction rounds.
    Fedse {
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        groups: Option<usize>,
    },
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    auction: AuctionOverrides,

    #[arg(long)]
    batch: Option<usize>,
}

#[derive(Debug, Args)]
struct AuctionOverrides {
    /// Training iterations.
    #[arg(long)]
    iters: Option<usize>,

    /// Number of IoT devices (bidders).
    #[arg(long)]
    devices: Option<usize>,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    /// Candidate sentences, one per line.
    #[arg(long, requires = "references")]
    candidates: Option<PathBuf>,
    /// Reference sentences, one per line, paired with the candidates.
    #[arg(long, requires = "candidates")]
    references: Option<PathBuf>,
    /// Embedding vectors, one CSV row each, compared two rows at a time.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Receiver trace with header `t,source,estimate,gen_time`.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Averaging horizon for the trace; defaults to its last timestamp.
    #[arg(long)]
    horizon: Option<f64>,
    /// Highest n-gram order for BLEU and CIDEr.
    #[arg(long, default_value_t = 4)]
    max_n: usize,
}

fn base_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}

fn apply_auction_overrides(cfg: &mut ExperimentConfig, o: &AuctionOverrides, batch: Option<usize>) -> Result<()> {
    if let Some(n) = o.devices {
        anyhow::ensure!(n >= 1, "--devices must be >= 1");
        cfg.wpcn
            .as_mut()
            .ok_or(semalloc_core::config::ConfigError::MissingBlock("wpcn"))?
            .num_devices = n;
    }
    if o.iters.is_some() || batch.is_some() {
        let auction = cfg
            .auction
            .as_mut()
            .ok_or(semalloc_core::config::ConfigError::MissingBlock("auction"))?;
        if let Some(iters) = o.iters {
            anyhow::ensure!(iters >= 1, "--iters must be >= 1");
            auction.train.iterations = iters;
        }
        if let Some(batch) = batch {
            anyhow::ensure!(batch >= 1, "--batch must be >= 1");
            auction.train.batch_size = batch;
        }
    }
    Ok(())
}

fn report_auction(dir: &Path, report: &experiment::AuctionReport) {
    let last = report.result.trace.last().expect("trace has iteration 0");
    println!(
        "trained {} iterations: final dl_revenue {:.6}, spa_revenue {:.6}",
        last.iteration, last.dl_revenue, last.spa_revenue
    );
    println!(
        "held-out revenue: learned {:.6}, second-price {:.6}",
        report.heldout_learned, report.heldout_second_price
    );
    println!("wrote {}", dir.join(experiment::REVENUE_TRACE_FILE).display());
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = base_config(&cli)?;
    let dir = out_dir(&cli, &cfg);
    match &cli.command {
        Command::Simulate(args) => match &args.target {
            None => {
                apply_auction_overrides(&mut cfg, &args.auction, None)?;
                let report = experiment::run_case_study(&cfg, &dir).context("case study")?;
                report_auction(&dir, &report);
            }
            Some(SimulateTarget::Fedse { rounds, groups }) => {
                let fedse = cfg
                    .fedse
                    .as_mut()
                    .ok_or(semalloc_core::config::ConfigError::MissingBlock("fedse"))?;
                if let Some(r) = rounds {
                    anyhow::ensure!(*r >= 1, "--rounds must be >= 1");
                    fedse.rounds = *r;
                }
                if let Some(g) = groups {
                    anyhow::ensure!(*g >= 1, "--groups must be >= 1");
                    fedse.groups = *g;
                }
                let logs = experiment::run_fedse(&cfg, &dir).context("fedse simulation")?;
                let last = logs.last().expect("at least one round");
                println!("{} rounds, final global loss {:.3e}", logs.len(), last.global_loss);
                println!("wrote {}", dir.join(experiment::FEDSE_FILE).display());
            }
        },
        Command::TrainAuction(args) => {
            apply_auction_overrides(&mut cfg, &args.auction, args.batch)?;
            let report = experiment::train_auction(&cfg, &dir).context("auction training")?;
            report_auction(&dir, &report);
        }
        Command::EvalMetrics(args) => {
            let inputs = MetricsInputs {
                candidates: args.candidates.clone(),
                references: args.references.clone(),
                embeddings: args.embeddings.clone(),
                trace: args.trace.clone(),
                horizon: args.horizon,
                max_n: args.max_n,
            };
            let path = experiment::run_metrics(&inputs, &dir).context("metrics")?;
            println!("wrote {}", path.display());
        }
        Command::ExportCurves => {
            let curve = match &cfg.wpcn {
                Some(w) => w.curve.clone(),
                None => PerfCurve::embedded(),
            };
            let path = experiment::export_curves(&curve, &dir)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
