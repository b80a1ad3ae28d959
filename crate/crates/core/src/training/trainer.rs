use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diffusion::{forward_noise_rng, Conditioning, InpaintChannels, NoiseSchedule, TextEncoder};
use crate::error::{Error, Result};
use crate::grid::{Image, LatentGrid, Mask};
use crate::hand::DepthMap;
use crate::inpaint::{blank_region, downsample_mask, Codec};
use crate::rng::{self, Rng};

use super::{inpaint_loss_grad, AdamW, AdamWConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub rgb: Image,
    pub hand_mask: Mask,
    pub depth: DepthMap,
    pub caption: String,
}

impl TrainSample {
    pub fn validate(&self) -> Result<()> {
        if self.hand_mask.is_empty() {
            return Err(Error::EmptyMask);
        }
        if self.rgb.spatial() != self.hand_mask.dim() || self.depth.dim() != self.hand_mask.dim() {
            return Err(Error::shape(self.rgb.spatial(), (self.hand_mask.dim(), self.depth.dim())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optimizer: AdamWConfig,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    /// Frozen-set checksum is re-verified every this many steps.
    pub check_every: usize,
    /// Control strength applied while fine-tuning.
    pub strength: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: AdamWConfig::default(),
            batch_size: 16,
            steps: 2307,
            seed: 0,
            check_every: 100,
            strength: 1.0,
        }
    }
}

impl TrainConfig {
    /// Settings small enough for a CPU run in minutes.
    pub fn toy() -> Self {
        Self {
            optimizer: AdamWConfig {
                lr: 3e-3,
                weight_decay: 0.0,
                ..AdamWConfig::default()
            },
            batch_size: 4,
            steps: 300,
            check_every: 50,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.optimizer.lr >= 0.0) {
            return Err(Error::Config("learning rate must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.strength) {
            return Err(Error::Strength(self.strength));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// One denoiser input during fine-tuning.
#[derive(Debug, Clone)]
pub struct TrainInput {
    pub x_t: LatentGrid,
    pub t: usize,
    pub cond: Conditioning,
    pub inpaint: InpaintChannels,
    pub control: LatentGrid,
    pub strength: f64,
}

/// A denoiser whose control branch can be fine-tuned while the base stays
/// fixed. Only `params` is ever written by the trainer.
pub trait TrainableControl {
    type Tape;

    fn params(&self) -> &[f32];
    fn params_mut(&mut self) -> &mut [f32];
    /// Bytes of every frozen parameter, in a stable order.
    fn frozen_bytes(&self) -> Vec<u8>;
    fn forward(&self, input: &TrainInput) -> Result<(LatentGrid, Self::Tape)>;
    /// Gradient of a scalar loss with respect to `params`, given its gradient
    /// with respect to the predicted noise.
    fn backward(&self, tape: Self::Tape, d_eps: &LatentGrid) -> Result<Vec<f64>>;
}

/// Checksum of the frozen parameter set, captured before training.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrozenPartition {
    pub frozen_sha256: String,
    pub trainable: usize,
}

impl FrozenPartition {
    pub fn capture<M: TrainableControl>(model: &M) -> Self {
        Self {
            frozen_sha256: sha256_hex(&model.frozen_bytes()),
            trainable: model.params().len(),
        }
    }

    pub fn verify<M: TrainableControl>(&self, model: &M) -> Result<()> {
        let now = Self::capture(model);
        if now != *self {
            return Err(Error::Numerical(format!(
                "frozen parameters changed: {} -> {}",
                self.frozen_sha256, now.frozen_sha256
            )));
        }
        Ok(())
    }
}

pub struct TrainContext<'a> {
    pub schedule: &'a NoiseSchedule,
    pub encoder: &'a dyn TextEncoder,
    pub codec: &'a dyn Codec,
}

/// Noisy input, target noise and latent mask for one sample.
pub fn make_input(
    sample: &TrainSample,
    ctx: &TrainContext<'_>,
    strength: f64,
    r: &mut Rng,
) -> Result<(TrainInput, LatentGrid, Mask)> {
    sample.validate()?;
    let x0 = ctx.codec.encode(&sample.rgb)?;
    let t = r.random_range(1..=ctx.schedule.steps());
    let (x_t, eps) = forward_noise_rng(&x0, t, ctx.schedule, r)?;
    let m = downsample_mask(&sample.hand_mask, x0.spatial());
    let masked_latent = ctx.codec.encode(&blank_region(&sample.rgb, &sample.hand_mask)?)?;
    let input = TrainInput {
        x_t,
        t,
        cond: ctx.encoder.encode(&sample.caption),
        inpaint: InpaintChannels {
            mask: m.clone(),
            masked_latent,
        },
        control: sample.depth.to_grid(),
        strength,
    };
    Ok((input, eps, m))
}

/// One optimizer step on `batch`; returns the mean loss before the update.
#[allow(clippy::too_many_arguments)]
pub fn train_step<M: TrainableControl>(
    model: &mut M,
    optimizer: &mut AdamW,
    batch: &[&TrainSample],
    ctx: &TrainContext<'_>,
    strength: f64,
    r: &mut Rng,
    step: usize,
    trace: &[f64],
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InsufficientData { count: 0, needed: 1 });
    }
    let mut grad = vec![0.0; model.params().len()];
    let mut loss = 0.0;
    for s in batch {
        let (input, eps, m) = make_input(s, ctx, strength, r)?;
        let (pred, tape) = model.forward(&input)?;
        let (l, d) = inpaint_loss_grad(&eps, &pred, &m)?;
        let g = model.backward(tape, &d)?;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
        loss += l;
    }
    let n = batch.len() as f64;
    loss /= n;
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        let mut t = trace.to_vec();
        t.push(loss);
        return Err(Error::NonFiniteLoss { step, trace: t });
    }
    grad.iter_mut().for_each(|g| *g /= n);
    optimizer.step(model.params_mut(), &grad)?;
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub losses: Vec<f64>,
    pub partition: FrozenPartition,
    pub config_hash: String,
}

/// Fine-tunes the control branch for `config.steps` steps, sampling batches
/// with replacement. Fails if the frozen set ever changes.
pub fn train<M: TrainableControl>(
    model: &mut M,
    data: &[TrainSample],
    ctx: &TrainContext<'_>,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if data.is_empty() && config.steps > 0 {
        return Err(Error::InsufficientData { count: 0, needed: 1 });
    }
    let partition = FrozenPartition::capture(model);
    let mut optimizer = AdamW::new(config.optimizer, model.params().len());
    let mut r = rng::rng(config.seed);
    let mut losses = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let batch: Vec<&TrainSample> = (0..config.batch_size).map(|_| &data[r.random_range(0..data.len())]).collect();
        let l = train_step(model, &mut optimizer, &batch, ctx, config.strength, &mut r, step, &losses)?;
        losses.push(l);
        if config.check_every > 0 && (step + 1) % config.check_every == 0 {
            partition.verify(model)?;
        }
    }
    partition.verify(model)?;
    Ok(TrainReport {
        losses,
        partition,
        config_hash: config.hash(),
    })
}

/// Trainable parameters only, tagged with the config that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config_hash: String,
    pub frozen_sha256: String,
    pub params: Vec<f32>,
}

impl Checkpoint {
    pub const VERSION: u32 = 1;

    pub fn of<M: TrainableControl>(model: &M, config_hash: &str) -> Self {
        Self {
            version: Self::VERSION,
            config_hash: config_hash.to_string(),
            frozen_sha256: FrozenPartition::capture(model).frozen_sha256,
            params: model.params().to_vec(),
        }
    }

    /// Loads parameters into a model with the same frozen base.
    pub fn apply<M: TrainableControl>(&self, model: &mut M) -> Result<()> {
        if self.frozen_sha256 != FrozenPartition::capture(model).frozen_sha256 {
            return Err(Error::Config("checkpoint was trained against a different base model".into()));
        }
        if self.params.len() != model.params().len() {
            return Err(Error::shape(model.params().len(), self.params.len()));
        }
        model.params_mut().copy_from_slice(&self.params);
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, &serde_json::to_vec(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::ModelLoad {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let c: Self = serde_json::from_slice(&bytes).map_err(|e| Error::ModelLoad {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        if c.version != Self::VERSION {
            return Err(Error::ModelLoad {
                path: path.to_path_buf(),
                reason: format!("unsupported checkpoint version {}", c.version),
            });
        }
        Ok(c)
    }
}
