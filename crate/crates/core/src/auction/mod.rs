//! Single-item energy auctions run by the HAP.
//!
//! Two mechanisms share one outcome type:
//! - [`second_price`]: highest bid wins and pays the runner-up bid.
//! - [`learned_auction`]: bids pass through per-bidder [`MonotoneNet`]
//!   transforms, a zero reserve joins in transform space, the highest
//!   transformed bid wins and pays the smallest bid that would still have
//!   won. Threshold payments on monotone transforms make the mechanism
//!   truthful and individually rational for any parameters.
//!
//! Ties go to the lowest bidder id. A transformed bid exactly at the reserve
//! still wins (and pays the reserve), which keeps the identity transform
//! equivalent to the second-price auction on every profile, including the
//! all-zero one.

mod net;
pub mod objective;
mod train;

use rand::Rng;

pub use net::{read_params, write_params, MonotoneNet, PARAMS_FORMAT, PARAMS_VERSION};
pub use train::{train, TracePoint, TrainConfig, TrainResult};

use crate::error::{Error, Result};
use crate::wpcn::NetworkConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bid {
    pub bidder: usize,
    pub amount: f64,
}

impl Bid {
    pub fn new(bidder: usize, amount: f64) -> Result<Self> {
        if !(amount.is_finite() && amount >= 0.0) {
            return Err(Error::invalid(format!("bid {amount} must be finite and non-negative")));
        }
        Ok(Bid { bidder, amount })
    }

    /// Bids `amounts[i]` from bidder `i`.
    pub fn profile(amounts: &[f64]) -> Result<Vec<Bid>> {
        amounts.iter().enumerate().map(|(i, &a)| Bid::new(i, a)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuctionOutcome {
    /// Winning bidder id, `None` for no sale.
    pub winner: Option<usize>,
    pub payment: f64,
}

impl AuctionOutcome {
    pub const NO_SALE: AuctionOutcome = AuctionOutcome {
        winner: None,
        payment: 0.0,
    };

    /// Single item: the HAP's revenue is the payment.
    pub fn revenue(&self) -> f64 {
        self.payment
    }

    /// Quasi-linear utility of `bidder` with true value `value`.
    pub fn utility(&self, bidder: usize, value: f64) -> f64 {
        if self.winner == Some(bidder) {
            value - self.payment
        } else {
            0.0
        }
    }
}

/// Position of the highest score, lowest id first on ties.
fn argmax_by_id(bids: &[Bid], score: impl Fn(usize) -> f64) -> usize {
    let mut best = 0;
    for i in 1..bids.len() {
        let (s, sb) = (score(i), score(best));
        if s > sb || (s == sb && bids[i].bidder < bids[best].bidder) {
            best = i;
        }
    }
    best
}

/// Vickrey auction. A lone bidder wins at price zero.
pub fn second_price(bids: &[Bid]) -> Result<AuctionOutcome> {
    if bids.is_empty() {
        return Err(Error::invalid("second-price auction needs at least one bid"));
    }
    let w = argmax_by_id(bids, |i| bids[i].amount);
    let payment = bids
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != w)
        .map(|(_, b)| b.amount)
        .fold(0.0, f64::max);
    Ok(AuctionOutcome {
        winner: Some(bids[w].bidder),
        payment,
    })
}

/// Auction on monotone-transformed bids; `nets[i]` belongs to `bids[i]`.
pub fn learned_auction(nets: &[MonotoneNet], bids: &[Bid]) -> Result<AuctionOutcome> {
    if nets.len() != bids.len() {
        return Err(Error::invalid(format!("{} nets for {} bids", nets.len(), bids.len())));
    }
    if bids.is_empty() {
        return Ok(AuctionOutcome::NO_SALE);
    }
    let transformed: Vec<f64> = nets.iter().zip(bids).map(|(n, b)| n.transform(b.amount)).collect();
    let w = argmax_by_id(bids, |i| transformed[i]);
    if transformed[w] < 0.0 {
        return Ok(AuctionOutcome::NO_SALE);
    }
    let competing = transformed
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != w)
        .map(|(_, &t)| t)
        .fold(0.0, f64::max);
    // Bids are non-negative, so the threshold bid is too.
    let payment = nets[w].transform_inverse(competing).max(0.0);
    Ok(AuctionOutcome {
        winner: Some(bids[w].bidder),
        payment,
    })
}

/// Source of bidder valuation profiles.
pub trait ValueDistribution {
    fn bidders(&self) -> usize;
    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]);
}

/// Independent uniform valuations on `[low, high)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformValues {
    pub bidders: usize,
    pub low: f64,
    pub high: f64,
}

impl UniformValues {
    pub fn unit(bidders: usize) -> Self {
        UniformValues {
            bidders,
            low: 0.0,
            high: 1.0,
        }
    }
}

impl ValueDistribution for UniformValues {
    fn bidders(&self) -> usize {
        self.bidders
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for v in out {
            *v = self.low + (self.high - self.low) * rng.random::<f64>();
        }
    }
}

impl ValueDistribution for NetworkConfig {
    fn bidders(&self) -> usize {
        self.num_devices
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let profile = self.sample_valuation_profile(rng);
        out.copy_from_slice(&profile);
    }
}

/// A fixed set of sampled valuation profiles, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    bidders: usize,
    values: Vec<f64>,
}

impl ProfileSet {
    pub fn sample<D: ValueDistribution, R: Rng + ?Sized>(dist: &D, count: usize, rng: &mut R) -> Self {
        let bidders = dist.bidders();
        let mut values = vec![0.0; bidders * count];
        for row in values.chunks_exact_mut(bidders) {
            dist.sample_into(rng, row);
        }
        ProfileSet { bidders, values }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let bidders = rows.first().map_or(0, Vec::len);
        if bidders == 0 || rows.iter().any(|r| r.len() != bidders) {
            return Err(Error::invalid("profiles must be non-empty and of equal length"));
        }
        Ok(ProfileSet {
            bidders,
            values: rows.concat(),
        })
    }

    pub fn bidders(&self) -> usize {
        self.bidders
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.bidders
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.bidders)
    }

    /// Mean revenue of an arbitrary mechanism over the set.
    pub fn mean_revenue(&self, mut mechanism: impl FnMut(&[Bid]) -> Result<AuctionOutcome>) -> Result<f64> {
        let mut total = 0.0;
        for row in self.iter() {
            total += mechanism(&Bid::profile(row)?)?.revenue();
        }
        Ok(total / self.len() as f64)
    }

    pub fn second_price_revenue(&self) -> Result<f64> {
        self.mean_revenue(second_price)
    }

    pub fn learned_revenue(&self, nets: &[MonotoneNet]) -> Result<f64> {
        self.mean_revenue(|bids| learned_auction(nets, bids))
    }
}

/// Monte-Carlo revenue of the learned auction over `num_samples` fresh
/// profiles.
pub fn expected_revenue<D: ValueDistribution, R: Rng + ?Sized>(
    nets: &[MonotoneNet],
    dist: &D,
    num_samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if num_samples == 0 {
        return Err(Error::invalid("num_samples must be >= 1"));
    }
    ProfileSet::sample(dist, num_samples, rng).learned_revenue(nets)
}
