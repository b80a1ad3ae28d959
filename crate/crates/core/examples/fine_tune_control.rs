//! Fine-tunes only the control branch on glyph samples, checks that the
//! base weights are untouched and round-trips a checkpoint.
//!
//! cargo run --release --example fine_tune_control -- [steps]

use handfix::diffusion::NoiseSchedule;
use handfix::inpaint::IdentityCodec;
use handfix::toy::{toy_encoder, toy_training_data, ToyConfig, ToyModel};
use handfix::training::{train, Checkpoint, FrozenPartition, TrainConfig, TrainContext};
use handfix::Result;

fn main() -> Result<()> {
    let steps = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20);
    let mut model = ToyModel::new(ToyConfig::default());
    let before = FrozenPartition::capture(&model);

    let data = toy_training_data(32, 0)?;
    let encoder = toy_encoder(&model.base.config());
    let schedule = NoiseSchedule::default();
    let ctx = TrainContext {
        schedule: &schedule,
        encoder: &encoder,
        codec: &IdentityCodec,
    };
    let cfg = TrainConfig {
        steps,
        ..TrainConfig::toy()
    };
    let report = train(&mut model, &data, &ctx, &cfg)?;
    println!("loss {:.3e} -> {:.3e}", report.losses[0], report.losses[report.losses.len() - 1]);
    before.verify(&model)?;
    println!("base checksum unchanged: {}", before.frozen_sha256);

    let path = std::env::temp_dir().join("handfix-control.json");
    Checkpoint::of(&model, &cfg.hash()).save(&path)?;
    let mut fresh = ToyModel::new(ToyConfig::default());
    Checkpoint::load(&path)?.apply(&mut fresh)?;
    println!("checkpoint restored: {}", fresh.control.params() == model.control.params());
    Ok(())
}
