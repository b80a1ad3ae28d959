use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{ProbeKind, RunConfig};
use super::*;
use crate::control::{AdaptiveAttempt, PhaseSweepReport};
use crate::diffusion::NoiseSchedule;
use crate::error::{Error, Result};
use crate::grid::{Image, LatentGrid};
use crate::hand::{BrightRegionLocalizer, FixtureMeshProvider, Mesh, PinholeCamera};
use crate::inpaint::{rectify, rectify_sweep, IdentityCodec, InpaintModels, InpaintRequest, PoseProbe, RectifiedResult};
use crate::io::{encode_png, load_image, load_mask, write_atomic};
use crate::metrics::{evaluate_dirs, HandDetector, KidConfig, RandomProjectionExtractor};
use crate::toy::{
    structure_error, toy_encoder, train_toy_end_to_end, write_glyph_dataset, GlyphDetector, GlyphPoseProbe, ToyBase,
    ToyControl, ToyModel, ToyPipeline, ToyScenario,
};
use crate::training::{ingest_dataset, train, Checkpoint, TrainContext};

pub(super) fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Rectify(a) => cmd_rectify(a, cli.json),
        Command::Sweep(a) => cmd_sweep(a, cli.json),
        Command::Train(a) => cmd_train(a, cli.json),
        Command::Eval(a) => cmd_eval(a, cli.json),
        Command::Toy(ToyCommand::GenData(a)) => cmd_toy_gen(a, cli.json),
        Command::Toy(ToyCommand::Train(a)) => cmd_toy_train(a, cli.json),
        Command::Toy(ToyCommand::DemoSweep(a)) => cmd_toy_sweep(a, cli.json),
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.resolve_model_root(common.model_root.clone());
    Ok(cfg)
}

fn apply_sampling(cfg: &mut RunConfig, a: &SamplingArgs) {
    if let Some(v) = &a.prompt {
        cfg.prompt = v.clone();
    }
    if let Some(v) = &a.neg_prompt {
        cfg.negative_prompt = v.clone();
    }
    if let Some(v) = &a.extra_neg_prompt {
        cfg.extra_negative_prompt = v.clone();
    }
    if let Some(v) = a.steps {
        cfg.steps = v;
    }
    if let Some(v) = a.guidance {
        cfg.guidance = v;
    }
    if let Some(v) = a.dilation {
        cfg.dilation = v;
    }
    if a.exact_composite {
        cfg.exact_composite = true;
    }
    if let Some(v) = &a.checkpoint {
        cfg.checkpoint = Some(v.clone());
    }
    if let Some(v) = a.probe {
        cfg.probe = v;
    }
}

fn sidecar(command: &str, cfg: &RunConfig, inputs: Value, result: impl Serialize) -> Result<Value> {
    let mut v = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": cfg.hash(),
        "config": cfg,
        "inputs": inputs,
    });
    if let (Value::Object(dst), Value::Object(src)) = (&mut v, serde_json::to_value(result)?) {
        dst.extend(src);
    }
    Ok(v)
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(v)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn emit(json_mode: bool, v: &Value, human: impl FnOnce() -> String) {
    if json_mode {
        println!("{}", serde_json::to_string(v).expect("json value serializes"));
    } else {
        println!("{}", human());
    }
}

fn sidecar_path(out: &Path) -> PathBuf {
    if out.extension().is_some_and(|e| e == "json") {
        out.with_extension("run.json")
    } else {
        out.with_extension("json")
    }
}

pub(super) fn load_toy_model(cfg: &RunConfig) -> Result<ToyModel> {
    let root = cfg.model_root()?;
    let mut model = ToyModel {
        base: ToyBase::load(&root.join("base.json"))?,
        control: ToyControl::load(&root.join("control.json"))?,
    };
    if let Some(ck) = &cfg.checkpoint {
        Checkpoint::load(ck)?.apply(&mut model).map_err(|e| Error::ModelLoad {
            path: ck.clone(),
            reason: e.to_string(),
        })?;
    }
    Ok(model)
}

fn grayscale(image: Image) -> Image {
    if image.channels() == 1 {
        return image;
    }
    let c = image.channels() as f64;
    let (_, h, w) = image.shape();
    let d = image.data();
    LatentGrid::from_plane(ndarray::Array2::from_shape_fn((h, w), |(y, x)| {
        (0..image.channels()).map(|k| d[[k, y, x]]).sum::<f64>() / c
    }))
}

/// Everything loaded from disk for one rectification.
struct Inputs {
    request: InpaintRequest,
    provider: FixtureMeshProvider,
    model: ToyModel,
    mesh_warnings: Vec<String>,
    paths: Value,
}

/// Inputs recorded in a sidecar passed as `--config`.
#[derive(Default, serde::Deserialize)]
#[serde(default)]
struct RecordedInputs {
    image: Option<PathBuf>,
    masks: Vec<PathBuf>,
    meshes: Vec<PathBuf>,
    manifest: Option<PathBuf>,
    ref_dir: Option<PathBuf>,
    gen_dir: Option<PathBuf>,
    detector: Option<DetectorKind>,
    count: Option<usize>,
}

fn required<T>(flag: Option<T>, recorded: Option<T>, name: &str) -> Result<T> {
    flag.or(recorded).ok_or_else(|| Error::Config(format!("--{name} is required")))
}

fn recorded_inputs(common: &CommonArgs) -> Result<RecordedInputs> {
    let Some(path) = &common.config else {
        return Ok(RecordedInputs::default());
    };
    let value: Value = serde_json::from_slice(&std::fs::read(path)?)?;
    match value.get("inputs") {
        Some(v) if value.get("command").is_some() => Ok(serde_json::from_value(v.clone()).unwrap_or_default()),
        _ => Ok(RecordedInputs::default()),
    }
}

fn prepare(cfg: &RunConfig, a: &SamplingArgs) -> Result<Inputs> {
    let recorded = recorded_inputs(&a.common)?;
    let image_path = required(a.image.clone(), recorded.image, "image")?;
    let mask_paths = if a.image.is_none() && a.masks.is_empty() { recorded.masks } else { a.masks.clone() };
    let mesh_paths = if a.image.is_none() && a.meshes.is_empty() { recorded.meshes } else { a.meshes.clone() };
    let model = load_toy_model(cfg)?;
    let image = grayscale(load_image(&image_path)?);
    let masks = mask_paths.iter().map(|p| load_mask(p)).collect::<Result<Vec<_>>>()?;
    let mut mesh_warnings = Vec::new();
    let fixtures: Vec<Option<Mesh>> = mesh_paths
        .iter()
        .map(|p| match Mesh::load(p) {
            Ok(m) => Some(m),
            Err(e) => {
                eprintln!("warning: mesh {}: {e}", p.display());
                mesh_warnings.push(format!("{}: {e}", p.display()));
                None
            }
        })
        .collect();
    let mut request = InpaintRequest::new(image, masks, cfg.plan()?);
    request.prompts = cfg.prompts();
    request.guidance = cfg.guidance;
    request.strategy = cfg.strategy()?;
    request.seed = cfg.seed;
    request.exact_composite = cfg.exact_composite;
    request.dilation = cfg.dilation;
    let paths = json!({
        "image": image_path,
        "masks": mask_paths,
        "meshes": mesh_paths,
        "model_root": cfg.model_root,
    });
    Ok(Inputs {
        request,
        provider: FixtureMeshProvider::new(fixtures),
        model,
        mesh_warnings,
        paths,
    })
}

fn with_models<R>(cfg: &RunConfig, inputs: &Inputs, f: impl FnOnce(&InpaintModels<'_>) -> Result<R>) -> Result<R> {
    let encoder = toy_encoder(&inputs.model.base.config());
    let schedule = NoiseSchedule::default();
    let localizer = BrightRegionLocalizer::default();
    let probe: Option<&dyn PoseProbe> = match cfg.probe {
        ProbeKind::Glyph => Some(&GlyphPoseProbe),
        ProbeKind::None => None,
    };
    let (h, w) = inputs.request.image.spatial();
    let models = InpaintModels {
        denoiser: &inputs.model.base,
        control: &inputs.model.control,
        codec: &IdentityCodec,
        encoder: &encoder,
        schedule: &schedule,
        meshes: &inputs.provider,
        localizer: Some(&localizer),
        probe,
        camera: Some(cfg.camera.unwrap_or_else(|| PinholeCamera::default_for(w, h))),
    };
    f(&models)
}

#[derive(Serialize)]
struct RectifyRecord<'a> {
    output: &'a Path,
    seed: u64,
    strength: Option<f64>,
    mpjpe: Option<f64>,
    per_hand_mpjpe: &'a [Option<f64>],
    camera: Option<PinholeCamera>,
    steps: usize,
    timesteps: &'a [usize],
    guidance: f64,
    hands: usize,
    denoiser_calls: usize,
    warnings: Vec<String>,
    adaptive_trace: &'a Option<Vec<AdaptiveAttempt>>,
}

fn record<'a>(r: &'a RectifiedResult, output: &'a Path, extra_warnings: &[String]) -> RectifyRecord<'a> {
    let m = &r.metadata;
    let mut warnings = extra_warnings.to_vec();
    warnings.extend(m.warnings.iter().cloned());
    RectifyRecord {
        output,
        seed: m.seed,
        strength: r.strength,
        mpjpe: r.mpjpe,
        per_hand_mpjpe: &r.per_hand_mpjpe,
        camera: m.camera,
        steps: m.steps,
        timesteps: &m.timesteps,
        guidance: m.guidance,
        hands: m.hands,
        denoiser_calls: m.denoiser_calls,
        warnings,
        adaptive_trace: &m.adaptive_trace,
    }
}

fn cmd_rectify(a: &RectifyArgs, json_mode: bool) -> Result<i32> {
    let mut cfg = load_config(&a.sampling.common)?;
    apply_sampling(&mut cfg, &a.sampling);
    if let Some(s) = a.strength {
        cfg.strength = s;
        cfg.adaptive = false;
    }
    if a.adaptive {
        cfg.adaptive = true;
    }
    let inputs = prepare(&cfg, &a.sampling)?;
    let result = with_models(&cfg, &inputs, |m| rectify(&inputs.request, m))?;
    write_atomic(&a.out, &encode_png(&result.image)?)?;
    let side = sidecar("rectify", &cfg, inputs.paths.clone(), record(&result, &a.out, &inputs.mesh_warnings))?;
    write_json(&sidecar_path(&a.out), &side)?;
    emit(json_mode, &side, || match result.strength {
        Some(s) => format!(
            "wrote {} (strength {s:.2}, mpjpe {})",
            a.out.display(),
            result.mpjpe.map_or("n/a".to_string(), |e| format!("{e:.3}"))
        ),
        None => format!("no hands found; wrote unchanged image to {}", a.out.display()),
    });
    Ok(if result.metadata.hands == 0 { EXIT_NO_HANDS } else { EXIT_OK })
}

fn strength_file(s: f64) -> String {
    format!("strength_{s:.2}.png")
}

fn cmd_sweep(a: &SweepArgs, json_mode: bool) -> Result<i32> {
    let mut cfg = load_config(&a.sampling.common)?;
    apply_sampling(&mut cfg, &a.sampling);
    if let Some(s) = &a.strengths {
        cfg.sweep_strengths = s.clone();
    }
    cfg.adaptive = false;
    let inputs = prepare(&cfg, &a.sampling)?;
    let (report, results) = with_models(&cfg, &inputs, |m| rectify_sweep(&inputs.request, m, &cfg.sweep_strengths))?;
    std::fs::create_dir_all(&a.out_dir)?;
    let mut report = report;
    for (row, res) in report.rows.iter_mut().zip(&results) {
        if let Some(r) = res {
            let name = strength_file(row.strength);
            write_atomic(&a.out_dir.join(&name), &encode_png(&r.image)?)?;
            row.output = Some(name);
        }
    }
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    write_atomic(&a.out_dir.join("sweep.csv"), &csv)?;
    let side = sidecar("sweep", &cfg, inputs.paths.clone(), json!({ "rows": report.rows, "seed": cfg.seed }))?;
    write_json(&a.out_dir.join("run.json"), &side)?;
    emit(json_mode, &side, || sweep_table(&report));
    Ok(EXIT_OK)
}

fn sweep_table(report: &PhaseSweepReport) -> String {
    report
        .rows
        .iter()
        .map(|r| {
            format!(
                "{:.2}\t{}",
                r.strength,
                r.mpjpe.map_or("n/a".to_string(), |e| format!("{e:.3}"))
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn cmd_train(a: &TrainArgs, json_mode: bool) -> Result<i32> {
    let mut cfg = load_config(&a.common)?;
    if let Some(v) = a.steps {
        cfg.train.steps = v;
    }
    if let Some(v) = a.batch {
        cfg.train.batch_size = v;
    }
    if let Some(v) = a.lr {
        cfg.train.optimizer.lr = v;
    }
    if let Some(v) = a.size {
        cfg.ingest.size = v;
    }
    cfg.train.seed = cfg.seed;
    cfg.ingest.seed = cfg.seed;
    let manifest = required(a.manifest.clone(), recorded_inputs(&a.common)?.manifest, "manifest")?;
    let mut model = load_toy_model(&cfg)?;
    let data = ingest_dataset(&manifest, &cfg.ingest)?;
    let data_samples: Vec<_> = data.samples.into_iter().map(|mut s| {
        s.rgb = grayscale(s.rgb);
        s
    }).collect();
    let encoder = toy_encoder(&model.base.config());
    let schedule = NoiseSchedule::default();
    let ctx = TrainContext {
        schedule: &schedule,
        encoder: &encoder,
        codec: &IdentityCodec,
    };
    let report = train(&mut model, &data_samples, &ctx, &cfg.train)?;
    let hash = cfg.hash();
    Checkpoint::of(&model, &hash).save(&a.out)?;
    let side = sidecar(
        "train",
        &cfg,
        json!({ "manifest": manifest, "model_root": cfg.model_root }),
        json!({
            "output": a.out,
            "seed": cfg.seed,
            "samples": data_samples.len(),
            "skipped": data.skipped,
            "filtered": data.filtered,
            "losses": report.losses,
            "frozen_sha256": report.partition.frozen_sha256,
        }),
    )?;
    write_json(&sidecar_path(&a.out), &side)?;
    emit(json_mode, &side, || {
        format!(
            "trained {} steps on {} samples ({} skipped, {} filtered); wrote {}",
            report.losses.len(),
            data_samples.len(),
            data.skipped,
            data.filtered,
            a.out.display()
        )
    });
    Ok(EXIT_OK)
}

fn cmd_eval(a: &EvalArgs, json_mode: bool) -> Result<i32> {
    let mut cfg = load_config(&a.common)?;
    if let Some(v) = a.kid_subset_size {
        cfg.kid.subset_size = v;
    }
    if let Some(v) = a.kid_subsets {
        cfg.kid.subsets = v;
    }
    cfg.kid.seed = cfg.seed;
    let recorded = recorded_inputs(&a.common)?;
    let ref_dir = required(a.ref_dir.clone(), recorded.ref_dir, "ref-dir")?;
    let gen_dir = required(a.gen_dir.clone(), recorded.gen_dir, "gen-dir")?;
    let detector_kind = a.detector.or(recorded.detector).unwrap_or(DetectorKind::None);
    let extractor = match a.extractor {
        ExtractorKind::RandomProjection => {
            RandomProjectionExtractor::new(cfg.extractor_dim, RandomProjectionExtractor::DEFAULT_GRID, cfg.seed)
        }
    };
    let detector: Option<&dyn HandDetector> = match detector_kind {
        DetectorKind::None => None,
        DetectorKind::Glyph => Some(&GlyphDetector),
    };
    let kid: KidConfig = cfg.kid;
    let report = evaluate_dirs(&ref_dir, &gen_dir, &extractor, &kid, detector)?;
    let mut v = serde_json::to_value(&report)?;
    if let Value::Object(o) = &mut v {
        o.insert(
            "inputs".into(),
            json!({ "ref_dir": ref_dir, "gen_dir": gen_dir, "detector": detector_kind }),
        );
        o.insert("config_hash".into(), json!(cfg.hash()));
        o.insert("config".into(), serde_json::to_value(&cfg)?);
        o.insert("command".into(), json!("eval"));
    }
    write_json(&a.report, &v)?;
    emit(json_mode, &v, || {
        format!(
            "FID {:.4}  KID {:.5}  Det. Conf. {}",
            report.fid,
            report.kid,
            report.detection_confidence.map_or("n/a".to_string(), |c| format!("{c:.3}"))
        )
    });
    Ok(EXIT_OK)
}

fn cmd_toy_gen(a: &ToyGenArgs, json_mode: bool) -> Result<i32> {
    let cfg = load_config(&a.common)?;
    let count = a.count.or(recorded_inputs(&a.common)?.count).unwrap_or(100);
    if count == 0 {
        return Err(Error::Config("--count must be positive".into()));
    }
    let records = write_glyph_dataset(&a.out, count, cfg.seed)?;
    let side = sidecar(
        "toy gen-data",
        &cfg,
        json!({ "count": count }),
        json!({ "output": a.out, "seed": cfg.seed, "count": records.len(), "manifest": "manifest.jsonl" }),
    )?;
    write_json(&a.out.join("run.json"), &side)?;
    emit(json_mode, &side, || format!("wrote {} glyphs to {}", records.len(), a.out.display()));
    Ok(EXIT_OK)
}

fn cmd_toy_train(a: &ToyTrainArgs, json_mode: bool) -> Result<i32> {
    let mut cfg = load_config(&a.common)?;
    if let Some(v) = a.dataset_size {
        cfg.toy.dataset_size = v;
    }
    if let Some(v) = a.base_steps {
        cfg.toy.base_steps = v;
    }
    if let Some(v) = a.control_steps {
        cfg.toy.control.steps = v;
    }
    cfg.toy.seed = cfg.seed;
    let trained = train_toy_end_to_end(&cfg.toy)?;
    std::fs::create_dir_all(&a.out)?;
    trained.model.base.save(&a.out.join("base.json"))?;
    trained.model.control.save(&a.out.join("control.json"))?;
    let side = sidecar(
        "toy train",
        &cfg,
        json!({}),
        json!({
            "output": a.out,
            "seed": cfg.seed,
            "toy_config_hash": cfg.toy.hash(),
            "base_losses": trained.base_losses,
            "control_losses": trained.control.losses,
            "frozen_sha256": trained.control.partition.frozen_sha256,
        }),
    )?;
    write_json(&a.out.join("run.json"), &side)?;
    emit(json_mode, &side, || format!("wrote toy models to {}", a.out.display()));
    Ok(EXIT_OK)
}

/// Standard deviation of pixel values inside the target region, the
/// texture ("wrinkle") proxy reported next to structure error.
fn texture_std(image: &Image, sc: &ToyScenario) -> f64 {
    let vals: Vec<f64> = sc
        .target
        .mask
        .cells()
        .indexed_iter()
        .filter(|(_, &m)| m)
        .map(|((y, x), _)| image.data()[[0, y, x]].clamp(0.0, 1.0))
        .collect();
    let n = vals.len().max(1) as f64;
    let mean = vals.iter().sum::<f64>() / n;
    (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

#[derive(Serialize)]
struct DemoRow {
    strength: f64,
    structure_error: f64,
    texture_std: f64,
    mpjpe: Option<f64>,
}

fn cmd_toy_sweep(a: &ToySweepArgs, json_mode: bool) -> Result<i32> {
    let mut cfg = load_config(&a.common)?;
    if let Some(v) = a.scenarios {
        cfg.demo_scenarios = v;
    }
    if let Some(v) = &a.strengths {
        cfg.sweep_strengths = v.clone();
    }
    if cfg.demo_scenarios == 0 {
        return Err(Error::Config("--scenarios must be positive".into()));
    }
    let pipeline = ToyPipeline::new(load_toy_model(&cfg)?);
    let scenarios = (0..cfg.demo_scenarios as u64)
        .map(|i| ToyScenario::generate(crate::rng::sub_seed(cfg.seed, i)))
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(&a.out)?;
    write_atomic(&a.out.join("scenario_input.png"), &encode_png(&scenarios[0].input)?)?;
    write_atomic(&a.out.join("scenario_target.png"), &encode_png(&scenarios[0].target.image)?)?;
    write_atomic(&a.out.join("scenario_mask.png"), &encode_png(&scenarios[0].mask.to_grid())?)?;
    scenarios[0].mesh.save(&a.out.join("scenario_mesh.obj"))?;
    let mut rows = Vec::new();
    for &s in &cfg.sweep_strengths {
        let strategy = crate::control::StrengthStrategy::fixed(s)?;
        let (mut se, mut tx, mut mp, mut nmp) = (0.0, 0.0, 0.0, 0usize);
        for (i, sc) in scenarios.iter().enumerate() {
            let req = sc.request(strategy.clone(), crate::rng::sub_seed(cfg.seed, i as u64))?;
            let out = pipeline.rectify(sc, &req)?;
            se += structure_error(&out.image, &sc.target.mask);
            tx += texture_std(&out.image, sc);
            if let Some(e) = out.mpjpe {
                mp += e;
                nmp += 1;
            }
            if i == 0 {
                write_atomic(&a.out.join(strength_file(s)), &encode_png(&out.image)?)?;
            }
        }
        let n = scenarios.len() as f64;
        rows.push(DemoRow {
            strength: s,
            structure_error: se / n,
            texture_std: tx / n,
            mpjpe: (nmp > 0).then(|| mp / nmp as f64),
        });
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    write_atomic(&a.out.join("demo.csv"), &bytes)?;
    let side = sidecar(
        "toy demo-sweep",
        &cfg,
        json!({ "model_root": cfg.model_root }),
        json!({ "output": a.out, "seed": cfg.seed, "scenarios": scenarios.len(), "rows": rows }),
    )?;
    write_json(&a.out.join("run.json"), &side)?;
    emit(json_mode, &side, || {
        rows.iter()
            .map(|r| format!("{:.2}\tstructure {:.4}\ttexture {:.4}", r.strength, r.structure_error, r.texture_std))
            .collect::<Vec<_>>()
            .join("\n")
    });
    Ok(EXIT_OK)
}
