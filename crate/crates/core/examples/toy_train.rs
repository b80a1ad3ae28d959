//! Trains the toy base denoiser and its control branch end to end, then
//! saves both under `<out_dir>` for the other toy examples and the CLI.
//!
//! cargo run --release --example toy_train -- <out_dir> [base_steps] [control_steps]

use std::path::PathBuf;
use std::time::Instant;

use handfix::toy::{train_toy_end_to_end, window_mean, ToyTrainConfig};
use handfix::Result;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "toy-models".into()));
    let mut cfg = ToyTrainConfig::default();
    if let Some(n) = args.next().and_then(|a| a.parse().ok()) {
        cfg.base_steps = n;
    }
    if let Some(n) = args.next().and_then(|a| a.parse().ok()) {
        cfg.control.steps = n;
    }

    let t = Instant::now();
    let trained = train_toy_end_to_end(&cfg)?;
    let (bl, cl) = (&trained.base_losses, &trained.control.losses);
    println!("trained in {:.1?}", t.elapsed());
    println!("base loss    {:.4} -> {:.4}", window_mean(bl, 0, 20), window_mean(bl, bl.len().saturating_sub(20), bl.len()));
    println!("control loss {:.3e} -> {:.3e}", window_mean(cl, 0, 20), window_mean(cl, cl.len().saturating_sub(20), cl.len()));
    println!("frozen base sha256 {}", trained.control.partition.frozen_sha256);

    std::fs::create_dir_all(&out)?;
    trained.model.base.save(&out.join("base.json"))?;
    trained.model.control.save(&out.join("control.json"))?;
    println!("wrote {}", out.display());
    Ok(())
}
