//! Reproducible experiment runs writing CSV outputs.
//!
//! Every run is a pure function of its configuration, input files and seed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::auction::{self, ProfileSet, TrainResult};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::fedse::{self, FedConfig, ModelParams, RoundLog};
use crate::fmt::f8;
use crate::metrics::{self, StateTrace};
use crate::perf_model::PerfCurve;
use crate::rng::{stream, stream_rng};

pub const CURVES_FILE: &str = "curves.csv";
pub const DEVICES_FILE: &str = "devices.csv";
pub const REVENUE_TRACE_FILE: &str = "revenue_trace.csv";
pub const HELDOUT_FILE: &str = "heldout_revenue.csv";
pub const PARAMS_FILE: &str = "auction_params.txt";
pub const FEDSE_FILE: &str = "fedse_rounds.csv";
pub const METRICS_FILE: &str = "metrics.csv";

pub const REVENUE_TRACE_HEADER: &str = "iteration,dl_revenue,spa_revenue";
pub const FEDSE_HEADER: &str = "round,global_loss,uploads";
pub const DEVICES_HEADER: &str =
    "device,channel_gain,harvested_energy_j,bit_budget,dimension,similarity,bleu,valuation,bid";
pub const METRICS_HEADER: &str = "metric,input,value";

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    Ok(BufWriter::new(file))
}

fn finish(mut w: BufWriter<File>, dir: &Path, name: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    w.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    Ok(path)
}

macro_rules! wline {
    ($w:expr, $ctx:expr, $($arg:tt)*) => {
        writeln!($w, $($arg)*).map_err(|e| Error::io(format!("writing {}", $ctx), e))
    };
}

/// Writes the dimension/quality table.
pub fn export_curves(curve: &PerfCurve, out_dir: &Path) -> Result<PathBuf> {
    let mut w = create(out_dir, CURVES_FILE)?;
    curve
        .write_csv(&mut w)
        .map_err(|e| Error::io(format!("writing {CURVES_FILE}"), e))?;
    finish(w, out_dir, CURVES_FILE)
}

/// One snapshot of the network: a device state per sampled channel.
pub fn write_devices(config: &ExperimentConfig, out_dir: &Path) -> Result<PathBuf> {
    let wpcn = config.wpcn()?;
    let devices = wpcn.sample_devices(&mut stream_rng(config.seed, stream::SNAPSHOT))?;
    let mut w = create(out_dir, DEVICES_FILE)?;
    wline!(w, DEVICES_FILE, "{DEVICES_HEADER}")?;
    for d in &devices {
        wline!(
            w,
            DEVICES_FILE,
            "{},{},{},{},{},{},{},{},{}",
            d.id,
            f8(d.channel_gain),
            f8(d.harvested_energy_j),
            d.bit_budget,
            d.dimension.unwrap_or(0),
            f8(d.similarity),
            f8(d.bleu),
            f8(d.valuation),
            f8(d.bid)
        )?;
    }
    finish(w, out_dir, DEVICES_FILE)
}

#[derive(Debug, Clone)]
pub struct AuctionReport {
    pub result: TrainResult,
    pub heldout_learned: f64,
    pub heldout_second_price: f64,
}

/// Trains the learned auction on the network's valuation distribution and
/// writes the revenue trace, the held-out comparison and the parameters.
pub fn train_auction(config: &ExperimentConfig, out_dir: &Path) -> Result<AuctionReport> {
    let wpcn = config.wpcn()?;
    let settings = config.auction()?;
    let mut train_cfg = settings.train.clone();
    train_cfg.seed = config.seed;
    let result = auction::train(&train_cfg, wpcn)?;

    let heldout = ProfileSet::sample(
        wpcn,
        settings.heldout_samples,
        &mut stream_rng(config.seed, stream::HELD_OUT),
    );
    let heldout_learned = heldout.learned_revenue(&result.nets)?;
    let heldout_second_price = heldout.second_price_revenue()?;

    let mut w = create(out_dir, REVENUE_TRACE_FILE)?;
    wline!(w, REVENUE_TRACE_FILE, "{REVENUE_TRACE_HEADER}")?;
    for p in &result.trace {
        wline!(
            w,
            REVENUE_TRACE_FILE,
            "{},{},{}",
            p.iteration,
            f8(p.dl_revenue),
            f8(p.spa_revenue)
        )?;
    }
    finish(w, out_dir, REVENUE_TRACE_FILE)?;

    let mut w = create(out_dir, HELDOUT_FILE)?;
    wline!(w, HELDOUT_FILE, "mechanism,revenue")?;
    wline!(w, HELDOUT_FILE, "learned,{}", f8(heldout_learned))?;
    wline!(w, HELDOUT_FILE, "second_price,{}", f8(heldout_second_price))?;
    finish(w, out_dir, HELDOUT_FILE)?;

    let params_path = out_dir.join(PARAMS_FILE);
    std::fs::write(&params_path, auction::write_params(&result.nets))
        .map_err(|e| Error::io(format!("writing {}", params_path.display()), e))?;

    Ok(AuctionReport {
        result,
        heldout_learned,
        heldout_second_price,
    })
}

/// The end-to-end case study: curves, a device snapshot, and auction
/// training with its revenue trace.
pub fn run_case_study(config: &ExperimentConfig, out_dir: &Path) -> Result<AuctionReport> {
    export_curves(&config.wpcn()?.curve, out_dir)?;
    write_devices(config, out_dir)?;
    train_auction(config, out_dir)
}

/// Federated semantic-extraction rounds on synthetic linear data.
pub fn run_fedse(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<RoundLog>> {
    let s = config.fedse()?;
    let mut rng = stream_rng(config.seed, stream::FEDSE);
    let truth = ModelParams::new((0..s.dim).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let mut groups = fedse::synthetic_groups(s.groups, s.devices_per_group, s.samples_per_group, &truth, &mut rng)?;
    let fed = FedConfig {
        local_epochs: s.local_epochs,
        learning_rate: s.learning_rate,
        upload_batch: s.upload_batch,
        label_noise: s.label_noise,
        truth,
    };
    let logs = fedse::run_rounds(&mut groups, s.rounds, &fed, &mut rng)?;
    let mut w = create(out_dir, FEDSE_FILE)?;
    wline!(w, FEDSE_FILE, "{FEDSE_HEADER}")?;
    for log in &logs {
        wline!(w, FEDSE_FILE, "{},{},{}", log.round, f8(log.global_loss), log.uploads)?;
    }
    finish(w, out_dir, FEDSE_FILE)?;
    Ok(logs)
}

/// Inputs for a metrics report. Candidate and reference files pair up line
/// by line; embedding rows pair up two by two.
#[derive(Debug, Clone, Default)]
pub struct MetricsInputs {
    pub candidates: Option<PathBuf>,
    pub references: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub horizon: Option<f64>,
    pub max_n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub metric: &'static str,
    pub input: String,
    pub value: f64,
}

pub fn compute_metrics(inputs: &MetricsInputs) -> Result<Vec<MetricRow>> {
    let mut rows = Vec::new();
    match (&inputs.candidates, &inputs.references) {
        (Some(c), Some(r)) => sentence_rows(c, r, inputs.max_n, &mut rows)?,
        (None, None) => {}
        _ => return Err(Error::invalid("candidates and references must be given together")),
    }
    if let Some(path) = &inputs.embeddings {
        let vectors = metrics::read_embeddings(path)?;
        if vectors.len() % 2 != 0 {
            return Err(Error::Parse {
                path: path.clone(),
                line: vectors.len() as u64,
                message: "embedding rows must come in pairs".into(),
            });
        }
        for (k, pair) in vectors.chunks_exact(2).enumerate() {
            let value = metrics::sentence_similarity(&pair[0], &pair[1]).map_err(|e| Error::Parse {
                path: path.clone(),
                line: 2 * k as u64 + 2,
                message: e.to_string(),
            })?;
            rows.push(MetricRow {
                metric: "similarity",
                input: format!("pair:{}", k + 1),
                value,
            });
        }
    }
    if let Some(path) = &inputs.trace {
        let trace = StateTrace::from_csv(path)?;
        let horizon = match inputs.horizon {
            Some(h) => h,
            None => trace.events().last().map_or(0.0, |e| e.timestamp),
        };
        let name = path
            .file_name()
            .map_or_else(|| "trace".into(), |n| n.to_string_lossy().into_owned());
        rows.push(MetricRow {
            metric: "aoi",
            input: format!("trace:{name}"),
            value: metrics::average_aoi(&trace, horizon)?,
        });
        rows.push(MetricRow {
            metric: "aoii",
            input: format!("trace:{name}"),
            value: metrics::average_aoii(&trace, horizon)?,
        });
    }
    if rows.is_empty() {
        return Err(Error::invalid("no metric inputs given"));
    }
    Ok(rows)
}

fn sentence_rows(cand_path: &Path, ref_path: &Path, max_n: usize, rows: &mut Vec<MetricRow>) -> Result<()> {
    let cands = metrics::read_sentences(cand_path)?;
    let refs = metrics::read_sentences(ref_path)?;
    if cands.len() != refs.len() {
        return Err(Error::invalid(format!(
            "{} candidate lines but {} reference lines",
            cands.len(),
            refs.len()
        )));
    }
    for (i, (c, r)) in cands.iter().zip(&refs).enumerate() {
        let line = i as u64 + 1;
        let at = |path: &Path, e: Error| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        };
        if c.is_empty() {
            return Err(at(cand_path, Error::invalid("empty sentence")));
        }
        if r.is_empty() {
            return Err(at(ref_path, Error::invalid("empty sentence")));
        }
        let refs = std::slice::from_ref(r);
        let n = max_n.min(c.len()).max(1);
        let input = format!("sentence:{line}");
        for (metric, value) in [
            ("bleu_1gram", metrics::bleu(c, refs, 1)),
            ("bleu", metrics::bleu(c, refs, n)),
            ("cider", metrics::cider(c, refs, n)),
        ] {
            rows.push(MetricRow {
                metric,
                input: input.clone(),
                value: value.map_err(|e| at(cand_path, e))?,
            });
        }
    }
    Ok(())
}

pub fn run_metrics(inputs: &MetricsInputs, out_dir: &Path) -> Result<PathBuf> {
    let rows = compute_metrics(inputs)?;
    let mut w = create(out_dir, METRICS_FILE)?;
    wline!(w, METRICS_FILE, "{METRICS_HEADER}")?;
    for r in &rows {
        wline!(w, METRICS_FILE, "{},{},{}", r.metric, r.input, f8(r.value))?;
    }
    finish(w, out_dir, METRICS_FILE)
}
