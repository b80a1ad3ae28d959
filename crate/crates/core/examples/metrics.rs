//! FID, KID and detection confidence between two glyph sets.
//!
//! cargo run --example metrics

use handfix::metrics::{accumulate_stats, detection_confidence, fid, kid, FeatureExtractor, KidConfig, RandomProjectionExtractor};
use handfix::toy::{generate_glyph_dataset, GlyphDetector};
use handfix::{Image, Result};

fn features(images: &[Image], ex: &dyn FeatureExtractor) -> Result<Vec<Vec<f64>>> {
    images.iter().map(|i| ex.extract(i)).collect()
}

fn main() -> Result<()> {
    let ex = RandomProjectionExtractor::default();
    let a: Vec<Image> = generate_glyph_dataset(120, 1)?.into_iter().map(|s| s.image).collect();
    let b: Vec<Image> = generate_glyph_dataset(120, 2)?.into_iter().map(|s| s.image).collect();
    // a degraded copy of the second set
    let c: Vec<Image> = b.iter().map(|i| i.map(|v| 0.5 * v + 0.3)).collect();

    let (fa, fb, fc) = (features(&a, &ex)?, features(&b, &ex)?, features(&c, &ex)?);
    let sa = accumulate_stats(fa.iter().map(|v| v.as_slice()))?;
    let kc = KidConfig {
        subset_size: 50,
        subsets: 20,
        seed: 0,
    };
    for (name, f) in [("same generator", &fb), ("degraded", &fc)] {
        let s = accumulate_stats(f.iter().map(|v| v.as_slice()))?;
        let k = kid(&fa, f, &kc)?;
        println!("{name:<15} FID {:8.4}  KID {:.5} ± {:.5}", fid(&sa, &s)?, k.mean, k.std);
    }
    let conf = detection_confidence(&c, &GlyphDetector)?;
    println!("detection confidence on degraded set: {:?}", conf.mean);
    Ok(())
}
