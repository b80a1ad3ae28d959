//! Writes a synthetic glyph dataset (images, depth, masks, manifest).
//!
//! cargo run --example glyph_dataset -- <out_dir> [count] [seed]

use std::path::PathBuf;

use handfix::toy::write_glyph_dataset;
use handfix::training::{ingest_dataset, IngestConfig};
use handfix::Result;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "glyphs".into()));
    let count = args.next().and_then(|a| a.parse().ok()).unwrap_or(16);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);

    let records = write_glyph_dataset(&out, count, seed)?;
    for r in records.iter().take(4) {
        println!("{} \"{}\"", r.rgb.display(), r.caption);
    }

    let cfg = IngestConfig {
        size: 64,
        ..IngestConfig::default()
    };
    let ingested = ingest_dataset(&out.join("manifest.jsonl"), &cfg)?;
    println!(
        "{} records, {} ingested, {} skipped, {} filtered",
        records.len(),
        ingested.samples.len(),
        ingested.skipped,
        ingested.filtered
    );
    Ok(())
}
