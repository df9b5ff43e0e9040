//! Monotone bid transforms: `phi(b) = min_k max_j (exp(w_kj) * b + beta_kj)`.
//!
//! Slopes are stored as logs, so every linear piece is strictly increasing
//! and `phi` is strictly increasing, continuous and piecewise linear.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};

pub const PARAMS_FORMAT: &str = "semalloc-monotone-nets";
pub const PARAMS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneNet {
    groups: usize,
    units: usize,
    /// Row-major `groups x units`.
    log_weights: Vec<f64>,
    biases: Vec<f64>,
    /// `exp(log_weights)`, kept in sync by every mutation.
    slopes: Vec<f64>,
}

impl MonotoneNet {
    pub fn new(groups: usize, units: usize, log_weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if groups == 0 || units == 0 {
            return Err(Error::invalid("a monotone net needs at least one group and one unit"));
        }
        let n = groups * units;
        if log_weights.len() != n || biases.len() != n {
            return Err(Error::invalid(format!(
                "expected {n} log-weights and biases, got {} and {}",
                log_weights.len(),
                biases.len()
            )));
        }
        if log_weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::invalid("monotone net parameters must be finite"));
        }
        Ok(MonotoneNet {
            groups,
            units,
            slopes: log_weights.iter().map(|w| w.exp()).collect(),
            log_weights,
            biases,
        })
    }

    /// `phi(b) = b` exactly.
    pub fn identity(groups: usize, units: usize) -> Self {
        let n = groups * units;
        MonotoneNet::new(groups, units, vec![0.0; n], vec![0.0; n]).expect("valid shape")
    }

    /// Single linear unit `weight * b + bias`.
    pub fn linear(weight: f64, bias: f64) -> Result<Self> {
        if weight.is_nan() || weight <= 0.0 {
            return Err(Error::invalid("slope must be positive"));
        }
        MonotoneNet::new(1, 1, vec![weight.ln()], vec![bias])
    }

    /// Builds from `(slope, bias)` pieces, one inner vector per group.
    pub fn from_pieces(pieces: &[Vec<(f64, f64)>]) -> Result<Self> {
        let units = pieces.first().map_or(0, Vec::len);
        if pieces.iter().any(|g| g.len() != units) {
            return Err(Error::invalid("every group needs the same number of units"));
        }
        if pieces.iter().flatten().any(|&(w, _)| w.is_nan() || w <= 0.0) {
            return Err(Error::invalid("slopes must be positive"));
        }
        let flat = pieces.iter().flatten();
        MonotoneNet::new(
            pieces.len(),
            units,
            flat.clone().map(|&(w, _)| w.ln()).collect(),
            flat.map(|&(_, b)| b).collect(),
        )
    }

    /// Identity transform with jittered extra units.
    ///
    /// Unit 0 of every group is exactly `b`; the others get slopes within
    /// `exp(+-noise)` and biases in `[-1 - noise, -1]`, so they stay inactive
    /// on `[0, 1]` and the transform and its inverse equal the identity there
    /// bit for bit.
    pub fn identity_with_noise<R: Rng + ?Sized>(groups: usize, units: usize, noise: f64, rng: &mut R) -> Self {
        let mut net = MonotoneNet::identity(groups, units);
        if units > 1 {
            for k in 0..groups {
                for j in 1..units {
                    let i = k * units + j;
                    net.log_weights[i] = noise * rng.random_range(-1.0..=1.0);
                    net.biases[i] = -1.0 - noise * rng.random::<f64>();
                    net.slopes[i] = net.log_weights[i].exp();
                }
            }
        }
        net
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn num_parameters(&self) -> usize {
        2 * self.groups * self.units
    }

    /// Log-weights followed by biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = self.log_weights.clone();
        p.extend_from_slice(&self.biases);
        p
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        let n = self.groups * self.units;
        if params.len() != 2 * n {
            return Err(Error::invalid("parameter count mismatch"));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("monotone net parameters must be finite"));
        }
        self.log_weights.copy_from_slice(&params[..n]);
        self.biases.copy_from_slice(&params[n..]);
        for (s, w) in self.slopes.iter_mut().zip(&self.log_weights) {
            *s = w.exp();
        }
        Ok(())
    }

    pub fn transform(&self, b: f64) -> f64 {
        let mut out = f64::INFINITY;
        for k in 0..self.groups {
            let mut best = f64::NEG_INFINITY;
            for j in 0..self.units {
                let i = k * self.units + j;
                best = best.max(self.slopes[i] * b + self.biases[i]);
            }
            out = out.min(best);
        }
        out
    }

    /// `phi^-1(y) = max_k min_j (y - beta_kj) / exp(w_kj)`.
    pub fn transform_inverse(&self, y: f64) -> f64 {
        let mut out = f64::NEG_INFINITY;
        for k in 0..self.groups {
            let mut best = f64::INFINITY;
            for j in 0..self.units {
                let i = k * self.units + j;
                best = best.min((y - self.biases[i]) / self.slopes[i]);
            }
            out = out.max(best);
        }
        out
    }

    /// Bid at which `phi` crosses zero: the reserve in bid space.
    pub fn reserve(&self) -> f64 {
        self.transform_inverse(0.0)
    }
}

/// Serializes nets as `key = value` lines. Floats use the shortest
/// representation that parses back to the same bits.
pub fn write_params(nets: &[MonotoneNet]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "format = {PARAMS_FORMAT}");
    let _ = writeln!(out, "version = {PARAMS_VERSION}");
    let _ = writeln!(out, "bidders = {}", nets.len());
    for (b, net) in nets.iter().enumerate() {
        let _ = writeln!(out, "bidder.{b}.groups = {}", net.groups);
        let _ = writeln!(out, "bidder.{b}.units = {}", net.units);
        for k in 0..net.groups {
            for j in 0..net.units {
                let i = k * net.units + j;
                let _ = writeln!(
                    out,
                    "bidder.{b}.group.{k}.unit.{j}.log_weight = {:?}",
                    net.log_weights[i]
                );
                let _ = writeln!(out, "bidder.{b}.group.{k}.unit.{j}.bias = {:?}", net.biases[i]);
            }
        }
    }
    out
}

pub fn read_params(text: &str) -> Result<Vec<MonotoneNet>> {
    let mut entries = std::collections::HashMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("line {}: expected `key = value`", n + 1)))?;
        entries.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |key: &str| -> Result<&String> {
        entries
            .get(key)
            .ok_or_else(|| Error::invalid(format!("missing key `{key}`")))
    };
    let num = |key: &str| -> Result<usize> { get(key)?.parse().map_err(|e| Error::invalid(format!("`{key}`: {e}"))) };
    let float = |key: &str| -> Result<f64> { get(key)?.parse().map_err(|e| Error::invalid(format!("`{key}`: {e}"))) };
    if get("format")? != PARAMS_FORMAT {
        return Err(Error::invalid("not a monotone-net parameter file"));
    }
    let version = num("version")?;
    if version != PARAMS_VERSION as usize {
        return Err(Error::invalid(format!("unsupported parameter file version {version}")));
    }
    (0..num("bidders")?)
        .map(|b| {
            let groups = num(&format!("bidder.{b}.groups"))?;
            let units = num(&format!("bidder.{b}.units"))?;
            let mut log_weights = Vec::with_capacity(groups * units);
            let mut biases = Vec::with_capacity(groups * units);
            for k in 0..groups {
                for j in 0..units {
                    log_weights.push(float(&format!("bidder.{b}.group.{k}.unit.{j}.log_weight"))?);
                    biases.push(float(&format!("bidder.{b}.group.{k}.unit.{j}.bias"))?);
                }
            }
            MonotoneNet::new(groups, units, log_weights, biases)
        })
        .collect()
}
