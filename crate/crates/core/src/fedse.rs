//! Federated semantic-extraction rounds over communication groups.
//!
//! Each round runs the six-step loop: edge servers fine-tune their group's
//! model, models are aggregated across groups sharing a communication goal,
//! the global model is broadcast back, devices extract and label new
//! semantic information, upload it, and the edge servers fold the uploads
//! into their knowledge sets for the next round.
//!
//! The semantic-extraction model is a linear least-squares surrogate,
//! `L(theta) = mean((x . theta - y)^2)`, so convergence is checkable in
//! closed form.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams(Vec<f64>);

impl ModelParams {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("model parameters must be finite"));
        }
        Ok(ModelParams(values))
    }

    pub fn zeros(dim: usize) -> Self {
        ModelParams(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.0).map(|(a, b)| a * b).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommGroup {
    pub id: usize,
    pub edge_server: usize,
    pub devices: Vec<usize>,
    pub dataset: Vec<Sample>,
    pub model: ModelParams,
    knowledge_version: u64,
}

impl CommGroup {
    pub fn new(
        id: usize,
        edge_server: usize,
        devices: Vec<usize>,
        dataset: Vec<Sample>,
        model: ModelParams,
    ) -> Result<Self> {
        if devices.is_empty() {
            return Err(Error::invalid(format!("group {id} has no devices")));
        }
        if let Some(s) = dataset.iter().find(|s| s.input.len() != model.dim()) {
            return Err(Error::invalid(format!(
                "group {id}: sample of dimension {} for a model of dimension {}",
                s.input.len(),
                model.dim()
            )));
        }
        Ok(CommGroup {
            id,
            edge_server,
            devices,
            dataset,
            model,
            knowledge_version: 0,
        })
    }

    pub fn knowledge_version(&self) -> u64 {
        self.knowledge_version
    }

    /// Mean squared error of `model` on this group's data.
    pub fn loss(&self, model: &ModelParams) -> Result<f64> {
        least_squares_loss(&self.dataset, model)
    }
}

pub fn least_squares_loss(data: &[Sample], model: &ModelParams) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    let sum: f64 = data
        .iter()
        .map(|s| {
            let r = model.predict(&s.input) - s.target;
            r * r
        })
        .sum();
    Ok(sum / data.len() as f64)
}

/// One full-batch gradient step on the least-squares loss.
pub fn gradient_step(data: &[Sample], model: &ModelParams, lr: f64) -> ModelParams {
    let m = data.len() as f64;
    let mut grad = vec![0.0; model.dim()];
    for s in data {
        let r = model.predict(&s.input) - s.target;
        for (g, x) in grad.iter_mut().zip(&s.input) {
            *g += 2.0 * r * x / m;
        }
    }
    ModelParams(model.0.iter().zip(&grad).map(|(t, g)| t - lr * g).collect())
}

/// `epochs` gradient steps on the group's data. Returns the loss after the
/// update.
pub fn local_update(group: &mut CommGroup, epochs: usize, lr: f64) -> Result<f64> {
    if group.dataset.is_empty() {
        return Err(Error::invalid(format!("group {} has an empty dataset", group.id)));
    }
    if !(lr.is_finite() && lr >= 0.0) {
        return Err(Error::invalid("learning rate must be non-negative"));
    }
    for _ in 0..epochs {
        group.model = gradient_step(&group.dataset, &group.model, lr);
    }
    group.loss(&group.model)
}

/// Sample-count weighted mean of the models, accumulated in argument order.
pub fn federated_aggregate(models: &[(&ModelParams, u64)]) -> Result<ModelParams> {
    let (first, _) = models.first().ok_or_else(|| Error::invalid("nothing to aggregate"))?;
    let dim = first.dim();
    if models.iter().any(|(m, _)| m.dim() != dim) {
        return Err(Error::invalid("models have different dimensions"));
    }
    if models.iter().any(|&(_, n)| n == 0) {
        return Err(Error::invalid("sample counts must be positive"));
    }
    let total: u64 = models.iter().map(|&(_, n)| n).sum();
    let mut out = vec![0.0; dim];
    for &(m, n) in models {
        let w = n as f64 / total as f64;
        for (o, v) in out.iter_mut().zip(&m.0) {
            *o += w * v;
        }
    }
    Ok(ModelParams(out))
}

pub fn broadcast(global: &ModelParams, groups: &mut [CommGroup]) -> Result<()> {
    if groups.iter().any(|g| g.model.dim() != global.dim()) {
        return Err(Error::invalid("broadcast dimension mismatch"));
    }
    for g in groups {
        g.model = global.clone();
    }
    Ok(())
}

/// Devices label `batch` fresh inputs against `truth` with Gaussian noise
/// `noise_std` and upload them; the group's knowledge version advances even
/// when the batch is empty.
pub fn label_and_upload<R: Rng + ?Sized>(
    group: &mut CommGroup,
    truth: &ModelParams,
    batch: usize,
    noise_std: f64,
    rng: &mut R,
) -> Result<usize> {
    if !(noise_std.is_finite() && noise_std >= 0.0) {
        return Err(Error::invalid("label noise must be non-negative"));
    }
    if truth.dim() != group.model.dim() {
        return Err(Error::invalid("labeling model dimension mismatch"));
    }
    for _ in 0..batch {
        let input: Vec<f64> = (0..truth.dim()).map(|_| StandardNormal.sample(rng)).collect();
        let noise: f64 = StandardNormal.sample(rng);
        let target = truth.predict(&input) + noise_std * noise;
        group.dataset.push(Sample { input, target });
    }
    group.knowledge_version += 1;
    Ok(batch)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FedConfig {
    pub local_epochs: usize,
    pub learning_rate: f64,
    pub upload_batch: usize,
    pub label_noise: f64,
    /// Generating model devices label against.
    pub truth: ModelParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundLog {
    pub round: usize,
    /// Per group, loss of the broadcast model before the local update.
    pub local_loss_before: Vec<f64>,
    pub local_loss_after: Vec<f64>,
    /// Sample-weighted loss of the global model over all groups' data,
    /// measured right after aggregation.
    pub global_loss: f64,
    pub uploads: usize,
}

pub fn run_rounds<R: Rng + ?Sized>(
    groups: &mut [CommGroup],
    num_rounds: usize,
    config: &FedConfig,
    rng: &mut R,
) -> Result<Vec<RoundLog>> {
    if num_rounds == 0 {
        return Err(Error::invalid("num_rounds must be >= 1"));
    }
    if groups.is_empty() {
        return Err(Error::invalid("no communication groups"));
    }
    groups.sort_by_key(|g| g.id);
    let mut logs = Vec::with_capacity(num_rounds);
    for round in 0..num_rounds {
        // Step 1: fine-tune per group, then aggregate across groups.
        let mut before = Vec::with_capacity(groups.len());
        let mut after = Vec::with_capacity(groups.len());
        for g in groups.iter_mut() {
            before.push(g.loss(&g.model)?);
            after.push(local_update(g, config.local_epochs, config.learning_rate)?);
        }
        let weighted: Vec<(&ModelParams, u64)> = groups.iter().map(|g| (&g.model, g.dataset.len() as u64)).collect();
        let global = federated_aggregate(&weighted)?;
        let global_loss = weighted_loss(groups, &global)?;
        // Step 2: broadcast.
        broadcast(&global, groups)?;
        // Steps 3-5: extract, label and upload.
        let mut uploads = 0;
        for g in groups.iter_mut() {
            uploads += label_and_upload(g, &config.truth, config.upload_batch, config.label_noise, rng)?;
        }
        // Step 6: the uploads are already part of each knowledge set and are
        // used by the next round's fine-tuning.
        logs.push(RoundLog {
            round,
            local_loss_before: before,
            local_loss_after: after,
            global_loss,
            uploads,
        });
    }
    Ok(logs)
}

fn weighted_loss(groups: &[CommGroup], model: &ModelParams) -> Result<f64> {
    let total: usize = groups.iter().map(|g| g.dataset.len()).sum();
    let mut loss = 0.0;
    for g in groups {
        loss += (g.dataset.len() as f64 / total as f64) * g.loss(model)?;
    }
    Ok(loss)
}

/// Synthetic groups: `samples` noiseless standard-normal points per group,
/// labeled by `truth`, models starting at zero.
pub fn synthetic_groups<R: Rng + ?Sized>(
    num_groups: usize,
    devices_per_group: usize,
    samples: usize,
    truth: &ModelParams,
    rng: &mut R,
) -> Result<Vec<CommGroup>> {
    (0..num_groups)
        .map(|id| {
            let dataset = (0..samples)
                .map(|_| {
                    let input: Vec<f64> = (0..truth.dim()).map(|_| StandardNormal.sample(rng)).collect();
                    Sample {
                        target: truth.predict(&input),
                        input,
                    }
                })
                .collect();
            let devices = (id * devices_per_group..(id + 1) * devices_per_group).collect();
            CommGroup::new(id, id, devices, dataset, ModelParams::zeros(truth.dim()))
        })
        .collect()
}
