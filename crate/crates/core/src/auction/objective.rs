//! Differentiable revenue surrogate for training the learned auction.
//!
//! For each profile in a batch and each bidder `i`:
//!
//! - `t_i = phi_i(b_i)` built from the bidder's parameters,
//! - `a_i = softmax(lambda * t_1, ..., lambda * t_n, 0)_i`, the relaxed
//!   allocation with the zero reserve as an extra slot,
//! - `p_i = phi_i^-1(max(0, max_{j != i} t_j))`, the threshold payment.
//!
//! The objective is the batch mean of `sum_i a_i * p_i`. The graph is built
//! once per shape; bids, temperature and parameters are leaves updated in
//! place between evaluations.

use crate::error::{Error, Result};
use crate::grad::{check_gradients, Graph, NodeId};

use super::MonotoneNet;

struct BidderParams {
    log_weights: Vec<NodeId>,
    biases: Vec<NodeId>,
}

pub struct RevenueObjective {
    graph: Graph,
    bidders: usize,
    groups: usize,
    units: usize,
    batch: usize,
    params: Vec<BidderParams>,
    /// `batch x bidders`, row-major.
    bids: Vec<NodeId>,
    temperature: NodeId,
    root: NodeId,
}

impl RevenueObjective {
    pub fn new(bidders: usize, groups: usize, units: usize, batch: usize) -> Result<Self> {
        if bidders == 0 || groups == 0 || units == 0 || batch == 0 {
            return Err(Error::invalid("objective dimensions must be positive"));
        }
        let mut g = Graph::new();
        let n_units = groups * units;
        let params: Vec<BidderParams> = (0..bidders)
            .map(|_| BidderParams {
                log_weights: (0..n_units).map(|_| g.parameter(0.0)).collect(),
                biases: (0..n_units).map(|_| g.parameter(0.0)).collect(),
            })
            .collect();
        // Shared per-unit factors: exp(w), exp(-w) and -beta.
        let mut slopes = Vec::with_capacity(bidders);
        let mut inv_slopes = Vec::with_capacity(bidders);
        let mut neg_biases = Vec::with_capacity(bidders);
        for p in &params {
            slopes.push(p.log_weights.iter().map(|&w| g.exp(w)).collect::<Vec<_>>());
            inv_slopes.push(
                p.log_weights
                    .iter()
                    .map(|&w| {
                        let nw = g.neg(w);
                        g.exp(nw)
                    })
                    .collect::<Vec<_>>(),
            );
            neg_biases.push(p.biases.iter().map(|&b| g.neg(b)).collect::<Vec<_>>());
        }
        let temperature = g.constant(1.0);
        let zero = g.constant(0.0);

        let mut bids = Vec::with_capacity(batch * bidders);
        let mut sample_revenues = Vec::with_capacity(batch);
        for _ in 0..batch {
            let row: Vec<NodeId> = (0..bidders).map(|_| g.constant(0.0)).collect();
            bids.extend_from_slice(&row);
            let transformed: Vec<NodeId> = (0..bidders)
                .map(|i| {
                    let group_max: Vec<NodeId> = (0..groups)
                        .map(|k| {
                            let pieces: Vec<NodeId> = (0..units)
                                .map(|j| {
                                    let u = k * units + j;
                                    let wb = g.mul(slopes[i][u], row[i]);
                                    g.add(&[wb, params[i].biases[u]])
                                })
                                .collect();
                            g.max(&pieces)
                        })
                        .collect();
                    g.min(&group_max)
                })
                .collect();
            let mut logits: Vec<NodeId> = transformed.iter().map(|&t| g.mul(temperature, t)).collect();
            logits.push(zero);
            let mut terms = Vec::with_capacity(bidders);
            for i in 0..bidders {
                let mut competing = vec![zero];
                competing.extend(transformed.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &t)| t));
                let threshold = g.max(&competing);
                let group_min: Vec<NodeId> = (0..groups)
                    .map(|k| {
                        let pieces: Vec<NodeId> = (0..units)
                            .map(|j| {
                                let u = k * units + j;
                                let shifted = g.add(&[threshold, neg_biases[i][u]]);
                                g.mul(shifted, inv_slopes[i][u])
                            })
                            .collect();
                        g.min(&pieces)
                    })
                    .collect();
                let payment = g.max(&group_min);
                let alloc = g.softmax_component(&logits, i);
                terms.push(g.mul(alloc, payment));
            }
            sample_revenues.push(g.add(&terms));
        }
        let total = g.add(&sample_revenues);
        let root = g.scale(total, 1.0 / batch as f64);
        Ok(RevenueObjective {
            graph: g,
            bidders,
            groups,
            units,
            batch,
            params,
            bids,
            temperature,
            root,
        })
    }

    pub fn bidders(&self) -> usize {
        self.bidders
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn set_nets(&mut self, nets: &[MonotoneNet]) -> Result<()> {
        if nets.len() != self.bidders {
            return Err(Error::invalid("one net per bidder required"));
        }
        for (net, p) in nets.iter().zip(&self.params) {
            if net.groups() != self.groups || net.units() != self.units {
                return Err(Error::invalid("net shape does not match the objective"));
            }
            for (&id, &w) in p.log_weights.iter().zip(net.log_weights()) {
                self.graph.set_value(id, w);
            }
            for (&id, &b) in p.biases.iter().zip(net.biases()) {
                self.graph.set_value(id, b);
            }
        }
        Ok(())
    }

    /// Loads `batch` profiles of `bidders` values each, row-major.
    pub fn set_profiles(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.bids.len() {
            return Err(Error::invalid(format!(
                "expected {} bid values, got {}",
                self.bids.len(),
                values.len()
            )));
        }
        for (&id, &v) in self.bids.iter().zip(values) {
            self.graph.set_value(id, v);
        }
        Ok(())
    }

    pub fn set_temperature(&mut self, lambda: f64) {
        self.graph.set_value(self.temperature, lambda);
    }

    /// Parameter nodes in the order of [`MonotoneNet::parameters`], bidder
    /// by bidder.
    pub fn parameter_nodes(&self) -> Vec<NodeId> {
        self.params
            .iter()
            .flat_map(|p| p.log_weights.iter().chain(&p.biases).copied())
            .collect()
    }

    pub fn value(&mut self) -> Result<f64> {
        self.graph.forward(self.root)
    }

    /// Objective value and its gradient, flattened like
    /// [`RevenueObjective::parameter_nodes`].
    pub fn value_and_gradient(&mut self) -> Result<(f64, Vec<f64>)> {
        let v = self.graph.forward(self.root)?;
        let grads = self.graph.backward(self.root)?;
        Ok((v, self.parameter_nodes().into_iter().map(|id| grads.get(id)).collect()))
    }

    /// Distance to the nearest `max`/`min` kink at the current point.
    pub fn kink_margin(&mut self) -> Result<f64> {
        self.graph.forward(self.root)?;
        Ok(self.graph.kink_margin())
    }

    /// Worst relative error of the analytic gradient against central
    /// differences with step `h`.
    pub fn check_gradients(&mut self, h: f64) -> Result<f64> {
        let params = self.parameter_nodes();
        check_gradients(&mut self.graph, self.root, &params, h)
    }
}
