mod common;

use common::*;
use handfix::control::StrengthStrategy;
use handfix::diffusion::TimestepPlan;
use handfix::inpaint::{rectify, rectify_sweep, InpaintRequest};
use handfix::training::sha256_hex;
use handfix::toy::{ToyConfig, ToyModel, ToyPipeline, ToyScenario};
use handfix::LatentGrid;

const SIZE: usize = 24;

fn request(image: LatentGrid, steps: usize) -> InpaintRequest {
    let mut r = InpaintRequest::new(
        image,
        vec![rect_mask(SIZE, SIZE, 8, 8, 16, 16)],
        TimestepPlan::uniform(1000, steps).unwrap(),
    );
    r.dilation = 0;
    r.seed = 11;
    r
}

fn outside_rms(a: &LatentGrid, b: &LatentGrid, mask: &handfix::Mask) -> f64 {
    let mut acc = 0.0;
    let mut n = 0;
    for ((_, y, x), v) in a.data().indexed_iter() {
        if !mask.get(y, x) {
            acc += (v - b.data()[[0, y, x]]).powi(2);
            n += 1;
        }
    }
    (acc / n as f64).sqrt()
}

#[test]
fn empty_mask_list_without_localizer_is_a_noop() {
    let fx = Fixture::new(SIZE);
    let image = ramp_image(SIZE, SIZE);
    let mut req = request(image.clone(), 5);
    req.masks.clear();
    let out = rectify(&req, &fx.models(&ZeroDenoiser)).unwrap();
    assert_eq!(out.image, image);
    assert_eq!(out.metadata.hands, 0);
    assert_eq!(out.metadata.denoiser_calls, 0);
    assert!(!out.metadata.warnings.is_empty());
}

#[test]
fn oracle_denoiser_recovers_target() {
    // target differs from the input only inside the mask
    let image = ramp_image(SIZE, SIZE);
    let mask = rect_mask(SIZE, SIZE, 8, 8, 16, 16);
    let mut target = image.clone();
    for y in 8..16 {
        for x in 8..16 {
            target.data_mut()[[0, y, x]] = 0.9;
        }
    }
    let oracle = OracleDenoiser::new(target.clone());
    let fx = Fixture::new(SIZE);
    let out = rectify(&request(image, 10), &fx.models(&oracle)).unwrap();
    assert!(out.image.max_abs_diff(&target).unwrap() < 1e-9);
    assert_eq!(out.mask.unwrap(), mask);
}

#[test]
fn known_region_deviation_is_one_step_of_noise() {
    let image = ramp_image(SIZE, SIZE);
    let fx = Fixture::new(SIZE);
    let req = request(image.clone(), 10);
    let out = rectify(&req, &fx.models(&ZeroDenoiser)).unwrap();
    let mask = out.mask.clone().unwrap();
    // a zero prediction leaves the final unmasked step's noise in place:
    // RMS sqrt((1 - ab1) / ab1), about 1.4e-2 for the default schedule
    let rms = outside_rms(&out.image, &image, &mask);
    let ab1 = fx.schedule.alpha_bar(1).unwrap();
    let expected = ((1.0 - ab1) / ab1).sqrt();
    assert!(rms < 0.02, "rms {rms}");
    assert!((rms / expected - 1.0).abs() < 0.25, "rms {rms} vs {expected}");
}

#[test]
fn exact_composite_preserves_unmasked_pixels() {
    let image = ramp_image(SIZE, SIZE);
    let fx = Fixture::new(SIZE);
    let mut req = request(image.clone(), 6);
    req.exact_composite = true;
    let out = rectify(&req, &fx.models(&ZeroDenoiser)).unwrap();
    let mask = out.mask.clone().unwrap();
    for ((c, y, x), v) in out.image.data().indexed_iter() {
        if !mask.get(y, x) {
            assert_eq!(v.to_bits(), image.data()[[c, y, x]].to_bits());
        }
    }
}

#[test]
fn denoiser_call_counts() {
    let image = ramp_image(SIZE, SIZE);
    let fx = Fixture::new(SIZE);
    for (w, per_step) in [(1.0, 1), (7.5, 2)] {
        let oracle = OracleDenoiser::new(image.clone());
        let mut req = request(image.clone(), 8);
        req.guidance = w;
        let out = rectify(&req, &fx.models(&oracle)).unwrap();
        assert_eq!(oracle.calls(), 8 * per_step);
        assert_eq!(out.metadata.denoiser_calls, 8 * per_step);
    }
}

#[test]
fn rectify_is_deterministic_and_seed_sensitive() {
    let image = ramp_image(SIZE, SIZE);
    let fx = Fixture::new(SIZE);
    let req = request(image.clone(), 6);
    let a = rectify(&req, &fx.models(&ZeroDenoiser)).unwrap();
    let b = rectify(&req, &fx.models(&ZeroDenoiser)).unwrap();
    assert_eq!(a.image, b.image);
    let mut other = req.clone();
    other.seed += 1;
    let c = rectify(&other, &fx.models(&ZeroDenoiser)).unwrap();
    assert_ne!(a.image, c.image);
}

#[test]
fn missing_mesh_skips_hand_and_all_missing_fails() {
    let image = ramp_image(SIZE, SIZE);
    let mut fx = Fixture::new(SIZE);
    let mut req = request(image.clone(), 4);
    req.masks.push(rect_mask(SIZE, SIZE, 18, 18, 22, 22));
    let out = rectify(&req, &fx.models(&ZeroDenoiser)).unwrap();
    assert_eq!(out.metadata.hands, 1);
    assert!(out.metadata.warnings.iter().any(|w| w.contains("hand 1")));

    fx.provider = handfix::hand::FixtureMeshProvider::new(vec![None, None]);
    let err = rectify(&req, &fx.models(&ZeroDenoiser)).unwrap_err();
    assert!(matches!(err, handfix::Error::MeshReconstruction { .. }));
}

#[test]
fn sweep_rows_match_single_runs() {
    let image = ramp_image(SIZE, SIZE);
    let fx = Fixture::new(SIZE);
    let req = request(image, 4);
    let (report, results) = rectify_sweep(&req, &fx.models(&ZeroDenoiser), &[0.0, 0.5]).unwrap();
    assert_eq!(report.rows.len(), 2);
    for (s, r) in [0.0, 0.5].iter().zip(&results) {
        let mut single = req.clone();
        single.strategy = StrengthStrategy::fixed(*s).unwrap();
        let one = rectify(&single, &fx.models(&ZeroDenoiser)).unwrap();
        assert_eq!(r.as_ref().unwrap().image, one.image);
    }
}

/// Golden hash of an untrained toy model run at the default strength. The
/// network kernels are plain f32 loops, so the bytes are stable across
/// machines with IEEE arithmetic.
#[test]
fn toy_golden_output() {
    let pipeline = ToyPipeline::new(ToyModel::new(ToyConfig::default()));
    let sc = ToyScenario::generate(5).unwrap();
    let req = sc.request(StrengthStrategy::fixed(0.55).unwrap(), 5).unwrap();
    let out = pipeline.rectify(&sc, &req).unwrap();
    let bytes: Vec<u8> = out.image.iter().flat_map(|v| v.to_le_bytes()).collect();
    let hash = sha256_hex(&bytes);
    let again = pipeline.rectify(&sc, &req).unwrap();
    assert_eq!(out.image, again.image);
    assert_eq!(hash, GOLDEN, "golden hash changed");
}

const GOLDEN: &str = "575292d3c56ddba20f006347ccfe95e8d2ec3429fd75aaef884ab46f9f3324bf";
