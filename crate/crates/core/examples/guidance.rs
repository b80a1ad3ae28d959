//! Classifier-free guidance and negative-prompt handling.
//!
//! cargo run --example guidance

use handfix::diffusion::{
    combine_negative_prompts, guidance_compose, GuidanceConfig, HashingTextEncoder, Prompts, DEFAULT_EXTRA_NEGATIVE,
};
use handfix::{LatentGrid, Result};

fn main() -> Result<()> {
    let pos = LatentGrid::filled(1, 1, 1, 0.2);
    let neg = LatentGrid::filled(1, 1, 1, 0.1);
    for w in [0.0, 1.0, 7.5] {
        let g = guidance_compose(&pos, &neg, w)?;
        println!("w = {w:<4} -> {}", g.data()[[0, 0, 0]]);
    }

    println!("negative prompt: {:?}", combine_negative_prompts(DEFAULT_EXTRA_NEGATIVE, "blurry, lowres"));

    let encoder = HashingTextEncoder::new(16);
    let prompts = Prompts {
        positive: "a hand with five fingers".into(),
        ..Prompts::default()
    };
    for w in [1.0, 7.5] {
        let cfg = GuidanceConfig::encode(&encoder, &prompts, w)?;
        println!("w = {w}: negative branch evaluated = {}", cfg.needs_negative_branch());
    }
    Ok(())
}
