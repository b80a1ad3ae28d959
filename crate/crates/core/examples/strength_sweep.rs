//! Sweeps control strength over a batch of toy scenarios and prints the
//! mean structure error per strength.
//!
//! cargo run --release --example strength_sweep -- <model_dir> [scenarios]

use std::path::Path;

use handfix::toy::{ToyBase, ToyControl, ToyModel, ToyPipeline};
use handfix::Result;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().unwrap_or_else(|| "toy-models".into());
    let n: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(8);
    let pipeline = ToyPipeline::new(ToyModel {
        base: ToyBase::load(&Path::new(&dir).join("base.json"))?,
        control: ToyControl::load(&Path::new(&dir).join("control.json"))?,
    });
    let strengths = [0.0, 0.25, 0.5, 0.75, 1.0];
    let seeds: Vec<u64> = (0..n).collect();
    let trend = pipeline.strength_trend(&seeds, &strengths)?;
    println!("strength  structure error");
    for (s, e) in strengths.iter().zip(&trend) {
        println!("{s:>8.2}  {e:.4}");
    }
    Ok(())
}
