//! Experiment configuration files (TOML).
//!
//! ```toml
//! seed = 42
//! output_dir = "out"
//!
//! [wpcn]
//! devices = 5
//! eta = 0.5
//! power_w = 1.0
//! slot_s = 0.01
//! energy_per_bit_j = 5e-7
//! w_sim = 0.5
//! w_bleu = 0.5
//! channel = "exp"   # exp | const | uniform
//!
//! [auction]
//! iterations = 2000
//! batch_size = 128
//!
//! [fedse]
//! groups = 2
//! rounds = 50
//! ```
//!
//! Omitted keys inside a block take their defaults; omitted blocks stay
//! absent so that commands needing them fail with an explicit error.
//! Validation reports every violated constraint, each with its field path.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::auction::TrainConfig;
use crate::perf_model::{PayloadModel, PerfCurve, MAX_DIMENSION};
use crate::wpcn::{ChannelModel, NetworkConfig};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config:\n{}", list(.0))]
    Invalid(Vec<FieldError>),
    #[error("config has no [{0}] block, which this command requires")]
    MissingBlock(&'static str),
}

fn list(errors: &[FieldError]) -> String {
    errors.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    seed: u64,
    output_dir: Option<PathBuf>,
    wpcn: Option<RawWpcn>,
    auction: Option<RawAuction>,
    fedse: Option<RawFedse>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawWpcn {
    devices: i64,
    eta: f64,
    power_w: f64,
    slot_s: f64,
    energy_per_bit_j: f64,
    w_sim: f64,
    w_bleu: f64,
    channel: String,
    channel_mean: f64,
    channel_gain: f64,
    channel_low: f64,
    channel_high: f64,
    words_per_sentence: i64,
    bits_per_feature: i64,
    max_dimension: i64,
}

impl Default for RawWpcn {
    fn default() -> Self {
        let n = NetworkConfig::default();
        RawWpcn {
            devices: n.num_devices as i64,
            eta: n.harvest_efficiency,
            power_w: n.hap_power_w,
            slot_s: n.slot_s,
            energy_per_bit_j: n.energy_per_bit_j,
            w_sim: n.w_sim,
            w_bleu: n.w_bleu,
            channel: "exp".into(),
            channel_mean: 1.0,
            channel_gain: 1.0,
            channel_low: 0.1,
            channel_high: 2.0,
            words_per_sentence: n.payload.words_per_sentence() as i64,
            bits_per_feature: n.payload.bits_per_feature() as i64,
            max_dimension: MAX_DIMENSION as i64,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawAuction {
    iterations: i64,
    batch_size: i64,
    learning_rate: f64,
    temperature_start: f64,
    temperature_end: f64,
    groups: i64,
    units: i64,
    init_noise: f64,
    eval_samples: i64,
    heldout_samples: i64,
}

impl Default for RawAuction {
    fn default() -> Self {
        let t = TrainConfig::default();
        RawAuction {
            iterations: t.iterations as i64,
            batch_size: t.batch_size as i64,
            learning_rate: t.learning_rate,
            temperature_start: t.temperature_start,
            temperature_end: t.temperature_end,
            groups: t.groups as i64,
            units: t.units as i64,
            init_noise: t.init_noise,
            eval_samples: t.eval_samples as i64,
            heldout_samples: AuctionSettings::DEFAULT_HELDOUT as i64,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawFedse {
    groups: i64,
    rounds: i64,
    dim: i64,
    samples_per_group: i64,
    devices_per_group: i64,
    local_epochs: i64,
    learning_rate: f64,
    upload_batch: i64,
    label_noise: f64,
}

impl Default for RawFedse {
    fn default() -> Self {
        let f = FedseSettings::default();
        RawFedse {
            groups: f.groups as i64,
            rounds: f.rounds as i64,
            dim: f.dim as i64,
            samples_per_group: f.samples_per_group as i64,
            devices_per_group: f.devices_per_group as i64,
            local_epochs: f.local_epochs as i64,
            learning_rate: f.learning_rate,
            upload_batch: f.upload_batch as i64,
            label_noise: f.label_noise,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuctionSettings {
    pub train: TrainConfig,
    /// Fresh profiles for the final held-out revenue comparison.
    pub heldout_samples: usize,
}

impl AuctionSettings {
    pub const DEFAULT_HELDOUT: usize = 100_000;
}

impl Default for AuctionSettings {
    fn default() -> Self {
        AuctionSettings {
            train: TrainConfig::default(),
            heldout_samples: Self::DEFAULT_HELDOUT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FedseSettings {
    pub groups: usize,
    pub rounds: usize,
    pub dim: usize,
    pub samples_per_group: usize,
    pub devices_per_group: usize,
    pub local_epochs: usize,
    pub learning_rate: f64,
    pub upload_batch: usize,
    pub label_noise: f64,
}

impl Default for FedseSettings {
    fn default() -> Self {
        FedseSettings {
            groups: 2,
            rounds: 50,
            dim: 4,
            samples_per_group: 32,
            devices_per_group: 4,
            local_epochs: 1,
            learning_rate: 0.05,
            upload_batch: 4,
            label_noise: 0.01,
        }
    }
}

/// A validated experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub wpcn: Option<NetworkConfig>,
    pub auction: Option<AuctionSettings>,
    pub fedse: Option<FedseSettings>,
}

impl Default for ExperimentConfig {
    /// Every block present with its defaults.
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            output_dir: None,
            wpcn: Some(NetworkConfig::default()),
            auction: Some(AuctionSettings::default()),
            fedse: Some(FedseSettings::default()),
        }
    }
}

impl ExperimentConfig {
    pub fn wpcn(&self) -> Result<&NetworkConfig, ConfigError> {
        self.wpcn.as_ref().ok_or(ConfigError::MissingBlock("wpcn"))
    }

    pub fn auction(&self) -> Result<&AuctionSettings, ConfigError> {
        self.auction.as_ref().ok_or(ConfigError::MissingBlock("auction"))
    }

    pub fn fedse(&self) -> Result<&FedseSettings, ConfigError> {
        self.fedse.as_ref().ok_or(ConfigError::MissingBlock("fedse"))
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut v = Validator::default();
        let wpcn = raw.wpcn.as_ref().and_then(|w| v.wpcn(w));
        let auction = raw.auction.as_ref().and_then(|a| v.auction(a, raw.seed));
        let fedse = raw.fedse.as_ref().and_then(|f| v.fedse(f));
        if !v.errors.is_empty() {
            return Err(ConfigError::Invalid(v.errors));
        }
        Ok(ExperimentConfig {
            seed: raw.seed,
            output_dir: raw.output_dir,
            wpcn,
            auction,
            fedse,
        })
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    ExperimentConfig::parse(&text, path)
}

#[derive(Default)]
struct Validator {
    errors: Vec<FieldError>,
}

impl Validator {
    fn fail(&mut self, path: &str, message: impl Into<String>) {
        self.errors.push(FieldError {
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn count(&mut self, path: &str, v: i64, min: i64) -> usize {
        if v < min {
            self.fail(path, format!("must be >= {min}, got {v}"));
        }
        v.max(min) as usize
    }

    fn positive(&mut self, path: &str, v: f64) {
        if !(v.is_finite() && v > 0.0) {
            self.fail(path, format!("must be positive, got {v}"));
        }
    }

    fn non_negative(&mut self, path: &str, v: f64) {
        if !(v.is_finite() && v >= 0.0) {
            self.fail(path, format!("must be non-negative, got {v}"));
        }
    }

    fn wpcn(&mut self, w: &RawWpcn) -> Option<NetworkConfig> {
        let start = self.errors.len();
        let num_devices = self.count("wpcn.devices", w.devices, 1);
        if !(w.eta > 0.0 && w.eta <= 1.0) {
            self.fail("wpcn.eta", format!("must lie in (0, 1], got {}", w.eta));
        }
        self.positive("wpcn.power_w", w.power_w);
        self.positive("wpcn.slot_s", w.slot_s);
        self.positive("wpcn.energy_per_bit_j", w.energy_per_bit_j);
        self.non_negative("wpcn.w_sim", w.w_sim);
        self.non_negative("wpcn.w_bleu", w.w_bleu);
        if (w.w_sim + w.w_bleu - 1.0).abs() > 1e-12 {
            self.fail(
                "wpcn.w_bleu",
                format!("w_sim + w_bleu must equal 1, got {}", w.w_sim + w.w_bleu),
            );
        }
        let channel = match w.channel.as_str() {
            "exp" => {
                self.positive("wpcn.channel_mean", w.channel_mean);
                ChannelModel::Exponential { mean: w.channel_mean }
            }
            "const" => {
                self.positive("wpcn.channel_gain", w.channel_gain);
                ChannelModel::Constant { gain: w.channel_gain }
            }
            "uniform" => {
                self.positive("wpcn.channel_low", w.channel_low);
                if !(w.channel_high > w.channel_low && w.channel_high.is_finite()) {
                    self.fail("wpcn.channel_high", "must be finite and exceed channel_low");
                }
                ChannelModel::Uniform {
                    low: w.channel_low,
                    high: w.channel_high,
                }
            }
            other => {
                self.fail("wpcn.channel", format!("expected exp, const or uniform, got {other:?}"));
                ChannelModel::default()
            }
        };
        let words = self.count("wpcn.words_per_sentence", w.words_per_sentence, 1);
        let bits = self.count("wpcn.bits_per_feature", w.bits_per_feature, 1);
        if !(1..=MAX_DIMENSION as i64).contains(&w.max_dimension) {
            self.fail("wpcn.max_dimension", format!("must lie in 1..={MAX_DIMENSION}"));
        }
        if self.errors.len() > start {
            return None;
        }
        let payload = PayloadModel::new(words as u64, bits as u64, w.max_dimension as u32).ok()?;
        Some(NetworkConfig {
            num_devices,
            harvest_efficiency: w.eta,
            hap_power_w: w.power_w,
            slot_s: w.slot_s,
            energy_per_bit_j: w.energy_per_bit_j,
            channel,
            w_sim: w.w_sim,
            w_bleu: w.w_bleu,
            payload,
            curve: PerfCurve::embedded(),
        })
    }

    fn auction(&mut self, a: &RawAuction, seed: u64) -> Option<AuctionSettings> {
        let start = self.errors.len();
        let train = TrainConfig {
            iterations: self.count("auction.iterations", a.iterations, 1),
            batch_size: self.count("auction.batch_size", a.batch_size, 1),
            learning_rate: a.learning_rate,
            temperature_start: a.temperature_start,
            temperature_end: a.temperature_end,
            groups: self.count("auction.groups", a.groups, 1),
            units: self.count("auction.units", a.units, 1),
            init_noise: a.init_noise,
            eval_samples: self.count("auction.eval_samples", a.eval_samples, 1),
            seed,
        };
        self.positive("auction.learning_rate", a.learning_rate);
        self.positive("auction.temperature_start", a.temperature_start);
        self.positive("auction.temperature_end", a.temperature_end);
        self.non_negative("auction.init_noise", a.init_noise);
        let heldout_samples = self.count("auction.heldout_samples", a.heldout_samples, 1);
        (self.errors.len() == start).then_some(AuctionSettings { train, heldout_samples })
    }

    fn fedse(&mut self, f: &RawFedse) -> Option<FedseSettings> {
        let start = self.errors.len();
        let s = FedseSettings {
            groups: self.count("fedse.groups", f.groups, 1),
            rounds: self.count("fedse.rounds", f.rounds, 1),
            dim: self.count("fedse.dim", f.dim, 1),
            samples_per_group: self.count("fedse.samples_per_group", f.samples_per_group, 1),
            devices_per_group: self.count("fedse.devices_per_group", f.devices_per_group, 1),
            local_epochs: self.count("fedse.local_epochs", f.local_epochs, 0),
            learning_rate: f.learning_rate,
            upload_batch: self.count("fedse.upload_batch", f.upload_batch, 0),
            label_noise: f.label_noise,
        };
        self.positive("fedse.learning_rate", f.learning_rate);
        self.non_negative("fedse.label_noise", f.label_noise);
        (self.errors.len() == start).then_some(s)
    }
}
