//! Wireless powered network model: channel gains, harvested energy, bit
//! budgets, and the valuation each device derives from the semantic quality
//! it can reach with that budget.

use rand::Rng;
use rand_distr::{Distribution, Exp, Uniform};

use crate::error::{Error, Result};
use crate::perf_model::{PayloadModel, PerfCurve};

/// Fading law for the downlink power gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelModel {
    /// Rayleigh fading: exponentially distributed power gain.
    Exponential {
        mean: f64,
    },
    Constant {
        gain: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel::Exponential { mean: 1.0 }
    }
}

impl ChannelModel {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ChannelModel::Exponential { mean } => mean.is_finite() && mean > 0.0,
            ChannelModel::Constant { gain } => gain.is_finite() && gain > 0.0,
            ChannelModel::Uniform { low, high } => low.is_finite() && high.is_finite() && 0.0 < low && low < high,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid channel model {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ChannelModel::Exponential { mean } => {
                let exp = Exp::new(1.0 / mean).expect("validated mean");
                loop {
                    let h = exp.sample(rng);
                    if h > 0.0 {
                        return h;
                    }
                }
            }
            ChannelModel::Constant { gain } => gain,
            ChannelModel::Uniform { low, high } => Uniform::new(low, high).expect("validated bounds").sample(rng),
        }
    }
}

/// Network parameters. The defaults
/// spread devices over the whole dimension range around the mean
/// channel gain.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub num_devices: usize,
    pub harvest_efficiency: f64,
    pub hap_power_w: f64,
    pub slot_s: f64,
    pub energy_per_bit_j: f64,
    pub channel: ChannelModel,
    pub w_sim: f64,
    pub w_bleu: f64,
    pub payload: PayloadModel,
    pub curve: PerfCurve,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            num_devices: 5,
            harvest_efficiency: 0.5,
            hap_power_w: 1.0,
            slot_s: 0.01,
            energy_per_bit_j: 5e-7,
            channel: ChannelModel::default(),
            w_sim: 0.5,
            w_bleu: 0.5,
            payload: PayloadModel::default(),
            curve: PerfCurve::embedded(),
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_devices == 0 {
            return Err(Error::invalid("num_devices must be >= 1"));
        }
        if !(self.harvest_efficiency > 0.0 && self.harvest_efficiency <= 1.0) {
            return Err(Error::invalid("harvest_efficiency must lie in (0, 1]"));
        }
        for (name, v) in [
            ("hap_power_w", self.hap_power_w),
            ("slot_s", self.slot_s),
            ("energy_per_bit_j", self.energy_per_bit_j),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if !(self.w_sim >= 0.0 && self.w_bleu >= 0.0 && (self.w_sim + self.w_bleu - 1.0).abs() < 1e-12) {
            return Err(Error::invalid("bid weights must be non-negative and sum to 1"));
        }
        self.channel.validate()
    }

    /// Linear harvest `E = eta * P * h * tau`.
    pub fn harvested_energy(&self, gain: f64) -> Result<f64> {
        if !(gain.is_finite() && gain > 0.0) {
            return Err(Error::invalid(format!("channel gain {gain} must be positive")));
        }
        Ok(self.harvest_efficiency * self.hap_power_w * gain * self.slot_s)
    }

    pub fn device_state(&self, id: usize, gain: f64) -> Result<DeviceState> {
        let harvested_energy_j = self.harvested_energy(gain)?;
        let bit_budget = (harvested_energy_j / self.energy_per_bit_j).floor() as u64;
        let dimension = self.payload.feasible_dimension(bit_budget);
        let (similarity, bleu) = match dimension {
            Some(d) => {
                let p = self.curve.lookup(d)?;
                (p.similarity, p.bleu)
            }
            None => (0.0, 0.0),
        };
        let valuation = self.w_sim * similarity + self.w_bleu * bleu;
        Ok(DeviceState {
            id,
            channel_gain: gain,
            harvested_energy_j,
            bit_budget,
            dimension,
            similarity,
            bleu,
            valuation,
            bid: valuation,
        })
    }

    /// Valuation of a device transmitting at dimension `d`, or of a silent
    /// device for `None`.
    pub fn valuation_at(&self, d: Option<u32>) -> Result<f64> {
        match d {
            Some(d) => {
                let p = self.curve.lookup(d)?;
                Ok(self.w_sim * p.similarity + self.w_bleu * p.bleu)
            }
            None => Ok(0.0),
        }
    }

    pub fn sample_channels<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.num_devices).map(|_| self.channel.sample(rng)).collect()
    }

    pub fn sample_devices<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<DeviceState>> {
        self.sample_channels(rng)
            .into_iter()
            .enumerate()
            .map(|(i, h)| self.device_state(i, h))
            .collect()
    }

    /// One valuation per device under truthful bidding.
    pub fn sample_valuation_profile<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.sample_devices(rng)
            .expect("sampled gains are positive")
            .into_iter()
            .map(|d| d.valuation)
            .collect()
    }
}

/// Per-device snapshot for one energy slot.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceState {
    pub id: usize,
    pub channel_gain: f64,
    pub harvested_energy_j: f64,
    pub bit_budget: u64,
    /// `None` when not even a single dimension fits the budget.
    pub dimension: Option<u32>,
    pub similarity: f64,
    pub bleu: f64,
    pub valuation: f64,
    pub bid: f64,
}
