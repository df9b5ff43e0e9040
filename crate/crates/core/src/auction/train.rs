//! Gradient-ascent training of the learned auction.

use crate::error::{Error, Result};
use crate::rng::{stream, stream_rng};

use super::objective::RevenueObjective;
use super::{MonotoneNet, ProfileSet, ValueDistribution};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    /// Adam step size.
    pub learning_rate: f64,
    /// Softmax temperature at the first iteration, annealed linearly.
    pub temperature_start: f64,
    pub temperature_end: f64,
    /// Min-groups per net.
    pub groups: usize,
    /// Max-units per group.
    pub units: usize,
    /// Jitter of the inactive units at initialization.
    pub init_noise: f64,
    /// Profiles in the fixed set used for the per-iteration revenue trace.
    pub eval_samples: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 2000,
            batch_size: 128,
            learning_rate: 0.001,
            temperature_start: 10.0,
            temperature_end: 100.0,
            groups: 5,
            units: 10,
            init_noise: 0.01,
            eval_samples: 1000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.batch_size == 0 || self.groups == 0 || self.units == 0 || self.eval_samples == 0
        {
            return Err(Error::invalid(
                "iterations, batch_size, groups, units and eval_samples must be positive",
            ));
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("temperature_start", self.temperature_start),
            ("temperature_end", self.temperature_end),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if !(self.init_noise.is_finite() && self.init_noise >= 0.0) {
            return Err(Error::invalid("init_noise must be non-negative"));
        }
        Ok(())
    }

    /// Temperature used at update `iteration` (0-based).
    pub fn temperature(&self, iteration: usize) -> f64 {
        let span = self.iterations.saturating_sub(1).max(1) as f64;
        let frac = (iteration as f64 / span).min(1.0);
        self.temperature_start + (self.temperature_end - self.temperature_start) * frac
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    /// Number of updates applied before this evaluation.
    pub iteration: usize,
    pub dl_revenue: f64,
    pub spa_revenue: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub nets: Vec<MonotoneNet>,
    /// Hard-allocation revenue on the fixed evaluation set, one point before
    /// training and one after each update.
    pub trace: Vec<TracePoint>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Ascent step on `params` along `grad`.
    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            params[i] += lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Trains one monotone net per bidder to maximize expected revenue under
/// `dist`. Deterministic given `config.seed`.
pub fn train<D: ValueDistribution>(config: &TrainConfig, dist: &D) -> Result<TrainResult> {
    config.validate()?;
    let bidders = dist.bidders();
    if bidders == 0 {
        return Err(Error::invalid("distribution has no bidders"));
    }
    let mut init_rng = stream_rng(config.seed, stream::NET_INIT);
    let mut nets: Vec<MonotoneNet> = (0..bidders)
        .map(|_| MonotoneNet::identity_with_noise(config.groups, config.units, config.init_noise, &mut init_rng))
        .collect();

    let eval = ProfileSet::sample(dist, config.eval_samples, &mut stream_rng(config.seed, stream::EVAL));
    let spa_revenue = eval.second_price_revenue()?;
    let mut trace = Vec::with_capacity(config.iterations + 1);
    trace.push(TracePoint {
        iteration: 0,
        dl_revenue: eval.learned_revenue(&nets)?,
        spa_revenue,
    });

    let mut objective = RevenueObjective::new(bidders, config.groups, config.units, config.batch_size)?;
    let mut batch_rng = stream_rng(config.seed, stream::TRAIN);
    let mut params: Vec<f64> = nets.iter().flat_map(MonotoneNet::parameters).collect();
    let per_net = nets[0].num_parameters();
    let mut adam = Adam::new(params.len());
    let mut batch = vec![0.0; config.batch_size * bidders];

    for it in 0..config.iterations {
        for row in batch.chunks_exact_mut(bidders) {
            dist.sample_into(&mut batch_rng, row);
        }
        objective.set_profiles(&batch)?;
        objective.set_nets(&nets)?;
        objective.set_temperature(config.temperature(it));
        let (value, grad) = objective.value_and_gradient()?;
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::TrainingDiverged { iteration: it });
        }
        adam.step(&mut params, &grad, config.learning_rate);
        for (net, chunk) in nets.iter_mut().zip(params.chunks_exact(per_net)) {
            net.set_parameters(chunk)
                .map_err(|_| Error::TrainingDiverged { iteration: it })?;
        }
        trace.push(TracePoint {
            iteration: it + 1,
            dl_revenue: eval.learned_revenue(&nets)?,
            spa_revenue,
        });
    }
    Ok(TrainResult { nets, trace })
}
