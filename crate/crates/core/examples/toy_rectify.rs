//! Repairs one malformed glyph with the full inpainting pipeline.
//!
//! Pass the directory written by `toy_train` to use trained weights;
//! without it the untrained toy model is used (the output is then noise,
//! but every stage still runs).
//!
//! cargo run --release --example toy_rectify -- [model_dir] [scenario_seed] [strength]

use std::path::Path;

use handfix::control::StrengthStrategy;
use handfix::io::save_image;
use handfix::toy::{ToyBase, ToyConfig, ToyControl, ToyModel, ToyPipeline, ToyScenario};
use handfix::Result;

fn load(dir: Option<&str>) -> Result<ToyModel> {
    match dir {
        Some(d) => Ok(ToyModel {
            base: ToyBase::load(&Path::new(d).join("base.json"))?,
            control: ToyControl::load(&Path::new(d).join("control.json"))?,
        }),
        None => Ok(ToyModel::new(ToyConfig::default())),
    }
}

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let pipeline = ToyPipeline::new(load(args.first().map(String::as_str))?);
    let seed = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(1);
    let strength = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(1.0);

    let sc = ToyScenario::generate(seed)?;
    println!("target: {}", sc.target.caption);
    println!("structure error of the input: {:.3}", sc.structure_error(&sc.input));

    let out = pipeline.rectify(&sc, &sc.request(StrengthStrategy::fixed(strength)?, seed)?)?;
    println!("structure error after repair:  {:.3}", sc.structure_error(&out.image));
    println!("mpjpe {:?} px, {} denoiser calls", out.mpjpe, out.metadata.denoiser_calls);

    save_image(&sc.input, Path::new("toy_input.png"))?;
    save_image(&out.image, Path::new("toy_output.png"))?;
    if let Some(d) = &out.depth {
        d.save_png16(Path::new("toy_depth.png"))?;
    }
    println!("wrote toy_input.png, toy_output.png, toy_depth.png");
    Ok(())
}
