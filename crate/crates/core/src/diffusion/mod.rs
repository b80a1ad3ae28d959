//! Sampling mathematics: noise schedules, forward noising, deterministic DDIM
//! steps and guidance composition. Nothing here depends on a concrete network.

mod guidance;
mod sampler;
mod schedule;
mod text;

use serde::{Deserialize, Serialize};

pub use guidance::{
    combine_negative_conditioning, combine_negative_prompts, guidance_compose, GuidanceConfig, Prompts,
    DEFAULT_EXTRA_NEGATIVE,
};
pub use sampler::{ddim_step, ddim_update, forward_noise, forward_noise_rng, forward_noise_with, predict_x0};
pub use schedule::{NoiseSchedule, TimestepPlan};
pub use text::{HashingTextEncoder, TextEncoder};

use crate::error::Result;
use crate::grid::{LatentGrid, Mask};

/// Opaque prompt embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conditioning(pub Vec<f64>);

/// Extra inputs of an inpainting denoiser: the latent mask and the encoded
/// image with the hand region blanked out.
#[derive(Debug, Clone, PartialEq)]
pub struct InpaintChannels {
    pub mask: Mask,
    pub masked_latent: LatentGrid,
}

/// A noise predictor `eps_theta(x_t, t, c, x_mask, control)`.
///
/// Implementations must return a grid shaped like `x_t` and be deterministic
/// in their inputs.
pub trait Denoiser: Sync {
    fn predict_noise(
        &self,
        x_t: &LatentGrid,
        t: usize,
        cond: &Conditioning,
        inpaint: Option<&InpaintChannels>,
        control: Option<&[LatentGrid]>,
    ) -> Result<LatentGrid>;
}
