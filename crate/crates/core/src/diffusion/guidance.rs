//! Classifier-free guidance with an extended negative prompt.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::LatentGrid;

use super::{Conditioning, TextEncoder};

/// Extra negative prompt appended ahead of the standard negatives.
pub const DEFAULT_EXTRA_NEGATIVE: &str = "fake 3D rendered image";

/// Combines branch predictions as `eps_neg + w (eps_pos - eps_neg)`.
///
/// Evaluated in the affine form `(1 - w) eps_neg + w eps_pos`. At `w = 1`
/// the positive branch is returned unchanged.
pub fn guidance_compose(eps_pos: &LatentGrid, eps_neg: &LatentGrid, w: f64) -> Result<LatentGrid> {
    eps_pos.ensure_same_shape(eps_neg)?;
    if w == 1.0 {
        return Ok(eps_pos.clone());
    }
    eps_neg.axpby(1.0 - w, eps_pos, w)
}

/// Joins the extra negative prompt and the standard negative prompt into the
/// single text whose encoding drives the negative branch.
pub fn combine_negative_prompts(extra: &str, standard: &str) -> String {
    let extra = extra.trim();
    let standard = standard.trim();
    match (extra.is_empty(), standard.is_empty()) {
        (true, _) => standard.to_string(),
        (false, true) => extra.to_string(),
        (false, false) => format!("{extra}, {standard}"),
    }
}

/// Encodes the combined negative prompt.
pub fn combine_negative_conditioning(encoder: &dyn TextEncoder, extra: &str, standard: &str) -> Conditioning {
    encoder.encode(&combine_negative_prompts(extra, standard))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompts {
    pub positive: String,
    /// Standard negatives ("long body, low-resolution, ...").
    pub negative: String,
    pub extra_negative: String,
}

impl Default for Prompts {
    fn default() -> Self {
        Self {
            positive: String::new(),
            negative: String::new(),
            extra_negative: DEFAULT_EXTRA_NEGATIVE.to_string(),
        }
    }
}

/// Encoded prompts and guidance strength for one sampling run.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceConfig {
    pub w: f64,
    pub positive: Conditioning,
    pub negative: Conditioning,
}

impl GuidanceConfig {
    pub fn encode(encoder: &dyn TextEncoder, prompts: &Prompts, w: f64) -> Result<Self> {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(crate::Error::Config(format!("guidance strength must be >= 0, got {w}")));
        }
        Ok(Self {
            w,
            positive: encoder.encode(&prompts.positive),
            negative: combine_negative_conditioning(encoder, &prompts.extra_negative, &prompts.negative),
        })
    }

    /// With `w = 1` the negative branch cancels and is never evaluated.
    pub fn needs_negative_branch(&self) -> bool {
        self.w != 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::HashingTextEncoder;

    fn scalar(v: f64) -> LatentGrid {
        LatentGrid::filled(1, 1, 1, v)
    }

    #[test]
    fn endpoints() {
        let pos = LatentGrid::from_vec((1, 1, 3), vec![0.3, -0.0, 1e-300]).unwrap();
        let neg = LatentGrid::from_vec((1, 1, 3), vec![0.1, 5.0, -2.0]).unwrap();
        let one = guidance_compose(&pos, &neg, 1.0).unwrap();
        assert!(one.iter().zip(pos.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(guidance_compose(&pos, &neg, 0.0).unwrap(), neg);
    }

    #[test]
    fn scalar_example_is_exact() {
        let out = guidance_compose(&scalar(0.3), &scalar(0.1), 7.5).unwrap();
        assert_eq!(out.data()[[0, 0, 0]], 1.6);
    }

    #[test]
    fn shape_mismatch() {
        assert!(guidance_compose(&scalar(0.0), &LatentGrid::zeros(1, 2, 1), 2.0).is_err());
    }

    #[test]
    fn negative_prompt_joining() {
        assert_eq!(combine_negative_prompts("", "long body"), "long body");
        assert_eq!(combine_negative_prompts("fake 3D rendered image", ""), "fake 3D rendered image");
        assert_eq!(
            combine_negative_prompts(DEFAULT_EXTRA_NEGATIVE, "long body, low-resolution"),
            "fake 3D rendered image, long body, low-resolution"
        );
        let enc = HashingTextEncoder::new(32);
        let x = "long body, low-resolution";
        assert_eq!(combine_negative_conditioning(&enc, "", x), enc.encode(x));
        assert_eq!(
            combine_negative_conditioning(&enc, DEFAULT_EXTRA_NEGATIVE, x),
            enc.encode(&format!("{DEFAULT_EXTRA_NEGATIVE}, {x}"))
        );
    }

    #[test]
    fn negative_guidance_rejected() {
        let enc = HashingTextEncoder::new(8);
        assert!(GuidanceConfig::encode(&enc, &Prompts::default(), -1.0).is_err());
        let g = GuidanceConfig::encode(&enc, &Prompts::default(), 1.0).unwrap();
        assert!(!g.needs_negative_branch());
    }
}
