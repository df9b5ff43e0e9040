//! Semantic-aware energy allocation for wireless powered IoT networks.
//!
//! Devices harvest energy from a hybrid access point (HAP), pick the largest
//! semantic-encoder output dimension their bit budget allows, and bid for the
//! next energy slot with a valuation derived from the semantic quality they
//! can achieve at that dimension. The HAP sells the slot with either a
//! second-price auction or a learned revenue-maximizing auction built from
//! monotone bid transforms.
//!
//! Modules:
//! - [`metrics`]: BLEU, CIDEr, cosine sentence similarity, AoI and AoII.
//! - [`perf_model`]: the dimension to semantic-quality table and payload sizes.
//! - [`wpcn`]: channel, harvested energy, bit budget and valuation per device.
//! - [`auction`]: second-price and learned mechanisms plus training.
//! - [`grad`]: a small reverse-mode differentiation engine used by training.
//! - [`fedse`]: federated semantic-extraction rounds over communication groups.
//! - [`config`] and [`experiment`]: configuration and reproducible runs.

pub mod auction;
pub mod config;
pub mod error;
pub mod experiment;
pub mod fedse;
pub mod fmt;
pub mod grad;
pub mod metrics;
pub mod perf_model;
pub mod rng;
pub mod wpcn;

pub use auction::{learned_auction, second_price, AuctionOutcome, Bid, MonotoneNet, TrainConfig, TrainResult};
pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use metrics::{EmbeddingVec, StateTrace, TokenSeq, TraceEvent};
pub use perf_model::{PayloadModel, PerfCurve, SemanticScore};
pub use wpcn::{ChannelModel, DeviceState, NetworkConfig};
