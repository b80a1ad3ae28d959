use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::glyph::{glyph_train_sample, GLYPH_SIZE};
use super::model::{ToyConfig, ToyModel};
use crate::diffusion::{forward_noise_rng, HashingTextEncoder, InpaintChannels, NoiseSchedule, TextEncoder};
use crate::error::{Error, Result};
use crate::grid::Mask;
use crate::inpaint::{blank_region, IdentityCodec};
use crate::rng::{self, sub_seed};
use crate::training::{train, AdamW, AdamWConfig, TrainConfig, TrainContext, TrainReport, TrainSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyTrainConfig {
    pub model: ToyConfig,
    pub dataset_size: usize,
    pub base_steps: usize,
    pub base_batch: usize,
    pub base_optimizer: AdamWConfig,
    pub control: TrainConfig,
    pub seed: u64,
}

impl Default for ToyTrainConfig {
    fn default() -> Self {
        Self {
            model: ToyConfig::default(),
            dataset_size: 256,
            base_steps: 600,
            base_batch: 4,
            base_optimizer: AdamWConfig {
                lr: 3e-3,
                weight_decay: 0.0,
                ..AdamWConfig::default()
            },
            control: TrainConfig::toy(),
            seed: 0,
        }
    }
}

impl ToyTrainConfig {
    pub fn hash(&self) -> String {
        crate::training::sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

pub fn toy_encoder(config: &ToyConfig) -> HashingTextEncoder {
    HashingTextEncoder::new(config.cond_dim)
}

/// Masks seen by the base: the sample's hand mask, the whole frame, or a
/// random box.
fn base_mask(sample: &TrainSample, r: &mut crate::rng::Rng) -> Mask {
    let u: f64 = r.random();
    if u < 0.5 {
        sample.hand_mask.clone()
    } else if u < 0.8 {
        Mask::full(GLYPH_SIZE, GLYPH_SIZE)
    } else {
        let (y0, x0) = (r.random_range(0..48), r.random_range(0..48));
        let (hh, ww) = (r.random_range(8..32), r.random_range(8..32));
        Mask::from_fn(GLYPH_SIZE, GLYPH_SIZE, |y, x| (y0..y0 + hh).contains(&y) && (x0..x0 + ww).contains(&x))
    }
}

/// Plain noise-prediction MSE training of every base parameter.
pub fn train_base(
    model: &mut ToyModel,
    data: &[TrainSample],
    schedule: &NoiseSchedule,
    encoder: &dyn TextEncoder,
    config: &ToyTrainConfig,
) -> Result<Vec<f64>> {
    let base = &mut model.base;
    let mut opt = AdamW::new(config.base_optimizer, base.params().len());
    let mut r = rng::rng(sub_seed(config.seed, 0xba5e));
    let mut losses = Vec::with_capacity(config.base_steps);
    for step in 0..config.base_steps {
        let mut grad = vec![0.0f32; base.params().len()];
        let mut loss = 0.0;
        for _ in 0..config.base_batch {
            let s = &data[r.random_range(0..data.len())];
            let t = r.random_range(1..=schedule.steps());
            let (x_t, eps) = forward_noise_rng(&s.rgb, t, schedule, &mut r)?;
            let mask = base_mask(s, &mut r);
            let inpaint = InpaintChannels {
                masked_latent: blank_region(&s.rgb, &mask)?,
                mask,
            };
            let cond = encoder.encode(&s.caption);
            let (out, tape) = base.run(&x_t, t, &cond, Some(&inpaint), None)?;
            let n = out.len() as f32;
            let d: Vec<f32> = out.iter().zip(eps.iter()).map(|(&p, &e)| 2.0 * (p - e as f32) / n).collect();
            loss += out.iter().zip(eps.iter()).map(|(&p, &e)| (p as f64 - e).powi(2)).sum::<f64>() / n as f64;
            base.backward(&tape, &d, Some(&mut grad));
        }
        let b = config.base_batch as f64;
        loss /= b;
        if !loss.is_finite() {
            losses.push(loss);
            return Err(Error::NonFiniteLoss { step, trace: losses });
        }
        let g: Vec<f64> = grad.iter().map(|&v| v as f64 / b).collect();
        opt.step(base.params_mut(), &g)?;
        losses.push(loss);
    }
    Ok(losses)
}

#[derive(Debug, Clone)]
pub struct ToyTrained {
    pub model: ToyModel,
    pub base_losses: Vec<f64>,
    pub control: TrainReport,
}

pub fn toy_training_data(n: usize, seed: u64) -> Result<Vec<TrainSample>> {
    (0..n).map(|i| glyph_train_sample(sub_seed(seed, i as u64))).collect()
}

/// Trains the base on glyphs, then fine-tunes the control branch on
/// depth-to-glyph pairs with the base frozen.
pub fn train_toy_end_to_end(config: &ToyTrainConfig) -> Result<ToyTrained> {
    let data = toy_training_data(config.dataset_size, config.seed)?;
    let schedule = NoiseSchedule::default();
    let encoder = toy_encoder(&config.model);
    let mut model = ToyModel::new(config.model);
    let base_losses = train_base(&mut model, &data, &schedule, &encoder, config)?;
    let ctx = TrainContext {
        schedule: &schedule,
        encoder: &encoder,
        codec: &IdentityCodec,
    };
    let mut control_cfg = config.control.clone();
    control_cfg.seed = sub_seed(config.seed, 0xc0de);
    let report = train(&mut model, &data, &ctx, &control_cfg)?;
    Ok(ToyTrained {
        model,
        base_losses,
        control: report,
    })
}

/// Mean loss over `from..to`, clipped to the curve.
pub fn window_mean(losses: &[f64], from: usize, to: usize) -> f64 {
    let w = &losses[from.min(losses.len())..to.min(losses.len())];
    w.iter().sum::<f64>() / w.len().max(1) as f64
}
