//! Adaptive control strength: first on a table of mocked pose errors,
//! then on a toy scenario through the real pipeline.
//!
//! cargo run --release --example adaptive_strength -- [model_dir]

use std::path::Path;

use handfix::control::{adaptive_strength, AdaptiveConfig};
use handfix::toy::{MockErrorDetector, ToyBase, ToyConfig, ToyControl, ToyModel, ToyPipeline, ToyScenario};
use handfix::Result;

fn main() -> Result<()> {
    let table = MockErrorDetector::new(vec![
        (1.0, Some(10.0)),
        (0.4, Some(14.0)),
        (0.5, None),
        (0.6, Some(11.2)),
        (0.7, Some(9.0)),
    ]);
    let cfg = AdaptiveConfig::default();
    let out = adaptive_strength(&cfg, |s| Ok(s.value()), |&s| table.error_at(s))?;
    println!("mocked: picked {} after {} sampler calls (threshold {:.2})", out.strength.value(), out.sampler_calls(), out.threshold);
    for a in &out.attempts {
        println!("  {:.1}: {:?} {}", a.strength, a.error, a.failure.as_deref().unwrap_or(""));
    }

    let model = match std::env::args().nth(1) {
        Some(d) => ToyModel {
            base: ToyBase::load(&Path::new(&d).join("base.json"))?,
            control: ToyControl::load(&Path::new(&d).join("control.json"))?,
        },
        None => ToyModel::new(ToyConfig::default()),
    };
    let pipeline = ToyPipeline::new(model);
    let sc = ToyScenario::generate(3)?;
    match pipeline.adaptive(&sc, 3) {
        Ok(r) => println!("toy: strength {:?}, mpjpe {:?}, trace {:?}", r.strength, r.mpjpe, r.metadata.adaptive_trace),
        Err(e) => println!("toy: {e}"),
    }
    Ok(())
}
