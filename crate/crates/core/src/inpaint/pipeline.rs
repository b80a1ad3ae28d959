//! The rectification loop: localize hands, render their depth, then re-denoise
//! only the hand region with known-region replacement at every step and one
//! final unmasked step.

use serde::{Deserialize, Serialize};

use crate::control::{
    adaptive_strength, phase_sweep, scale_control, AdaptiveAttempt, ControlBranch, ControlStrength, PhaseSweepReport,
    RowMetrics, StrengthStrategy,
};
use crate::diffusion::{
    ddim_step, forward_noise, guidance_compose, Conditioning, Denoiser, GuidanceConfig, InpaintChannels, NoiseSchedule,
    Prompts, TextEncoder, TimestepPlan,
};
use crate::error::{Error, Result};
use crate::grid::{Image, LatentGrid, Mask};
use crate::hand::{image_mpjpe, mpjpe, render_hands, DepthMap, HandLocalizer, Keypoints2D, Mesh, MeshProvider, PinholeCamera};
use crate::rng::{self, sub_seed};

use super::{blank_region, downsample_mask, masked_compose, Codec, PoseProbe, DEFAULT_DILATION};

const STREAM_INIT_KNOWN: u64 = 1;
const STREAM_INIT_NOISE: u64 = 2;
const STREAM_KNOWN: u64 = 0x100;

/// Fresh Gaussian noise inside the mask, the noised known content outside.
pub fn init_noise(x_known_t: &LatentGrid, m: &Mask, seed: u64) -> Result<LatentGrid> {
    let mut r = rng::rng(seed);
    let noise = LatentGrid::standard_normal(x_known_t.shape(), &mut r);
    masked_compose(&noise, x_known_t, m)
}

#[derive(Debug, Clone)]
pub struct InpaintRequest {
    pub image: Image,
    /// Pixel-resolution hand masks. Empty means "ask the localizer".
    pub masks: Vec<Mask>,
    pub prompts: Prompts,
    pub guidance: f64,
    pub strategy: StrengthStrategy,
    pub plan: TimestepPlan,
    pub seed: u64,
    /// Paste original pixels back outside the hand mask after decoding.
    pub exact_composite: bool,
    pub dilation: usize,
}

impl InpaintRequest {
    pub fn new(image: Image, masks: Vec<Mask>, plan: TimestepPlan) -> Self {
        Self {
            image,
            masks,
            prompts: Prompts::default(),
            guidance: 1.0,
            strategy: StrengthStrategy::default(),
            plan,
            seed: 0,
            exact_composite: false,
            dilation: DEFAULT_DILATION,
        }
    }
}

/// Everything a rectification needs besides the request.
#[derive(Clone, Copy)]
pub struct InpaintModels<'a> {
    pub denoiser: &'a dyn Denoiser,
    pub control: &'a dyn ControlBranch,
    pub codec: &'a dyn Codec,
    pub encoder: &'a dyn TextEncoder,
    pub schedule: &'a NoiseSchedule,
    pub meshes: &'a dyn MeshProvider,
    pub localizer: Option<&'a dyn HandLocalizer>,
    pub probe: Option<&'a dyn PoseProbe>,
    /// Defaults to [`PinholeCamera::default_for`] the image size.
    pub camera: Option<PinholeCamera>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectifyMetadata {
    pub seed: u64,
    pub camera: Option<PinholeCamera>,
    pub steps: usize,
    pub timesteps: Vec<usize>,
    pub guidance: f64,
    pub hands: usize,
    /// Denoiser evaluations for the returned sample.
    pub denoiser_calls: usize,
    pub warnings: Vec<String>,
    pub adaptive_trace: Option<Vec<AdaptiveAttempt>>,
}

#[derive(Debug, Clone)]
pub struct RectifiedResult {
    pub image: Image,
    /// `None` when nothing was rectified.
    pub strength: Option<f64>,
    /// Image-level pose error (mean over hands) against the conditioning keypoints.
    pub mpjpe: Option<f64>,
    pub per_hand_mpjpe: Vec<Option<f64>>,
    pub depth: Option<DepthMap>,
    /// Dilated union of the rectified hand regions, pixel resolution.
    pub mask: Option<Mask>,
    pub metadata: RectifyMetadata,
}

/// Runs the request's strength strategy.
pub fn rectify(request: &InpaintRequest, models: &InpaintModels<'_>) -> Result<RectifiedResult> {
    request.strategy.validate()?;
    let prepared = match Prepared::new(request, models)? {
        Preparation::Ready(p) => p,
        Preparation::NoHands(result) => return Ok(*result),
    };
    match &request.strategy {
        StrengthStrategy::Fixed { strength } => {
            let sample = prepared.sample(*strength)?;
            Ok(prepared.finish(sample, None))
        }
        StrengthStrategy::Adaptive(cfg) => {
            if prepared.reference.is_none() {
                return Err(Error::Config("adaptive strength needs a pose probe and reference keypoints".into()));
            }
            let outcome = adaptive_strength(cfg, |s| prepared.sample(s), |x: &Sample| x.pose_error())?;
            Ok(prepared.finish(outcome.selected, Some(outcome.attempts)))
        }
    }
}

/// Rectifies once at a fixed strength, ignoring the request's strategy.
pub fn rectify_at(request: &InpaintRequest, models: &InpaintModels<'_>, strength: ControlStrength) -> Result<RectifiedResult> {
    let mut r = request.clone();
    r.strategy = StrengthStrategy::Fixed { strength };
    rectify(&r, models)
}

/// One full rectification per strength under the request's seed.
pub fn rectify_sweep(
    request: &InpaintRequest,
    models: &InpaintModels<'_>,
    strengths: &[f64],
) -> Result<(PhaseSweepReport, Vec<Option<RectifiedResult>>)> {
    let prepared = match Prepared::new(request, models)? {
        Preparation::Ready(p) => p,
        Preparation::NoHands(_) => return Err(Error::NoHands),
    };
    let (report, samples) = phase_sweep(
        strengths,
        |s| prepared.sample(s),
        |x: &Sample| {
            Ok(RowMetrics {
                mpjpe: x.mpjpe,
                auxiliary: Default::default(),
            })
        },
    )?;
    let results = samples
        .into_iter()
        .map(|s| s.map(|s| prepared.finish(s, None)))
        .collect();
    Ok((report, results))
}

enum Preparation<'r, 'm> {
    Ready(Box<Prepared<'r, 'm>>),
    NoHands(Box<RectifiedResult>),
}

struct Sample {
    strength: ControlStrength,
    image: Image,
    denoiser_calls: usize,
    mpjpe: Option<f64>,
    per_hand: Vec<Option<f64>>,
    detection_error: Option<String>,
}

impl Sample {
    fn pose_error(&self) -> Result<f64> {
        self.mpjpe.ok_or_else(|| {
            Error::Numerical(self.detection_error.clone().unwrap_or_else(|| "no pose measurement".into()))
        })
    }
}

struct Prepared<'r, 'm> {
    request: &'r InpaintRequest,
    models: &'m InpaintModels<'m>,
    camera: PinholeCamera,
    regions: Vec<Mask>,
    pixel_mask: Mask,
    latent_mask: Mask,
    depth: DepthMap,
    control_image: LatentGrid,
    x0_known: LatentGrid,
    inpaint: InpaintChannels,
    guidance: GuidanceConfig,
    reference: Option<Vec<Keypoints2D>>,
    warnings: Vec<String>,
}

impl<'r, 'm> Prepared<'r, 'm> {
    fn new(request: &'r InpaintRequest, models: &'m InpaintModels<'m>) -> Result<Preparation<'r, 'm>> {
        let image = &request.image;
        if !image.is_finite() {
            return Err(Error::Numerical("input image has non-finite pixels".into()));
        }
        let (h, w) = image.spatial();
        let camera = models.camera.unwrap_or_else(|| PinholeCamera::default_for(w, h));
        if (camera.height, camera.width) != (h, w) {
            return Err(Error::shape((h, w), (camera.height, camera.width)));
        }
        let mut warnings = Vec::new();

        let candidates = if request.masks.is_empty() {
            models.localizer.map(|l| l.localize(image)).unwrap_or_default()
        } else {
            request.masks.clone()
        };
        for m in &candidates {
            if m.dim() != (h, w) {
                return Err(Error::shape((h, w), m.dim()));
            }
        }
        let regions: Vec<Mask> = candidates.into_iter().filter(|m| !m.is_empty()).collect();
        if regions.is_empty() {
            warnings.push("no hands found; image returned unchanged".to_string());
            return Ok(Preparation::NoHands(Box::new(no_op(request, camera, warnings))));
        }

        let mut kept_regions = Vec::new();
        let mut meshes: Vec<Mesh> = Vec::new();
        let mut first_failure = None;
        for (hand, (region, mesh)) in regions.iter().zip(models.meshes.reconstruct(image, &regions)).enumerate() {
            match mesh.and_then(|m| if m.is_renderable() { Ok(m) } else { Err(Error::InvalidMesh("vertex behind camera".into())) }) {
                Ok(m) => {
                    kept_regions.push(region.clone());
                    meshes.push(m);
                }
                Err(e) => {
                    warnings.push(format!("hand {hand} skipped: {e}"));
                    let reason = match e {
                        Error::MeshReconstruction { reason, .. } => reason,
                        other => other.to_string(),
                    };
                    first_failure.get_or_insert((hand, reason));
                }
            }
        }
        if meshes.is_empty() {
            let (hand, reason) = first_failure.unwrap_or((0, "no meshes".into()));
            return Err(Error::MeshReconstruction { hand, reason });
        }

        let rendered = render_hands(&meshes, &camera)?;
        let mut union = Mask::empty(h, w);
        for r in &kept_regions {
            union = union.union(r)?;
        }
        let pixel_mask = union.dilate(request.dilation);

        let codec = models.codec;
        let x0_known = codec.encode(image)?;
        let latent_mask = downsample_mask(&pixel_mask, x0_known.spatial());
        let masked_latent = codec.encode(&blank_region(image, &pixel_mask)?)?;
        if masked_latent.shape() != x0_known.shape() {
            return Err(Error::Codec("codec returned inconsistent latent shapes".into()));
        }

        let guidance = GuidanceConfig::encode(models.encoder, &request.prompts, request.guidance)?;
        let reference = match models.probe {
            Some(p) => match p.reference(&meshes, &kept_regions, &camera) {
                Ok(k) => Some(k),
                Err(e) => {
                    warnings.push(format!("reference keypoints unavailable: {e}"));
                    None
                }
            },
            None => None,
        };

        Ok(Preparation::Ready(Box::new(Self {
            request,
            models,
            camera,
            regions: kept_regions,
            control_image: rendered.depth.to_grid(),
            depth: rendered.depth,
            pixel_mask,
            inpaint: InpaintChannels {
                mask: latent_mask.clone(),
                masked_latent,
            },
            latent_mask,
            x0_known,
            guidance,
            reference,
            warnings,
        })))
    }

    fn eps(&self, x: &LatentGrid, t: usize, cond: &Conditioning, s: ControlStrength) -> Result<LatentGrid> {
        let features = if s.value() > 0.0 {
            let raw = self.models.control.features(&self.control_image, x, t, cond)?;
            Some(scale_control(&raw, s))
        } else {
            None
        };
        let eps = self
            .models
            .denoiser
            .predict_noise(x, t, cond, Some(&self.inpaint), features.as_deref())?;
        x.ensure_same_shape(&eps)?;
        Ok(eps)
    }

    fn guided_eps(&self, x: &LatentGrid, t: usize, s: ControlStrength, calls: &mut usize) -> Result<LatentGrid> {
        let pos = self.eps(x, t, &self.guidance.positive, s)?;
        *calls += 1;
        if !self.guidance.needs_negative_branch() {
            return Ok(pos);
        }
        let neg = self.eps(x, t, &self.guidance.negative, s)?;
        *calls += 1;
        guidance_compose(&pos, &neg, self.guidance.w)
    }

    fn sample(&self, s: ControlStrength) -> Result<Sample> {
        let schedule = self.models.schedule;
        let plan = &self.request.plan;
        if plan.first() > schedule.steps() {
            return Err(Error::InvalidPlan(format!(
                "plan reaches t = {} but the schedule has {} steps",
                plan.first(),
                schedule.steps()
            )));
        }
        let seed = self.request.seed;
        let start = plan.first();
        let known_start = forward_noise(&self.x0_known, start, schedule, sub_seed(seed, STREAM_INIT_KNOWN))?;
        let mut x = init_noise(&known_start, &self.latent_mask, sub_seed(seed, STREAM_INIT_NOISE))?;
        let mut calls = 0;

        for (t_from, t_to) in plan.transitions() {
            let eps = self.guided_eps(&x, t_from, s, &mut calls)?;
            let candidate = ddim_step(&x, &eps, t_from, t_to, schedule)?;
            x = if t_to > 0 {
                let known = forward_noise(&self.x0_known, t_to, schedule, sub_seed(seed, STREAM_KNOWN + t_to as u64))?;
                masked_compose(&candidate, &known, &self.latent_mask)?
            } else {
                // last step runs unmasked so hand and context blend
                candidate
            };
            if !x.is_finite() {
                return Err(Error::Numerical(format!("sampler diverged at t = {t_from}")));
            }
        }

        let mut image = self.models.codec.decode(&x)?;
        if image.shape() != self.request.image.shape() {
            return Err(Error::Codec(format!(
                "decoded shape {:?} differs from input {:?}",
                image.shape(),
                self.request.image.shape()
            )));
        }
        if self.request.exact_composite {
            image = masked_compose(&image, &self.request.image, &self.pixel_mask)?;
        }

        let (per_hand, mpjpe, detection_error) = self.measure(&image);
        Ok(Sample {
            strength: s,
            image,
            denoiser_calls: calls,
            mpjpe,
            per_hand,
            detection_error,
        })
    }

    fn measure(&self, image: &Image) -> (Vec<Option<f64>>, Option<f64>, Option<String>) {
        let (Some(probe), Some(reference)) = (self.models.probe, &self.reference) else {
            return (vec![None; self.regions.len()], None, None);
        };
        let detected = probe.detect(image, &self.regions, &self.camera);
        let mut last_error = None;
        let per_hand: Vec<Option<f64>> = reference
            .iter()
            .zip(detected)
            .map(|(k, d)| match d.and_then(|kp| mpjpe(k.points(), kp.points())) {
                Ok(e) => Some(e),
                Err(e) => {
                    last_error = Some(e.to_string());
                    None
                }
            })
            .collect();
        let measured: Vec<f64> = per_hand.iter().flatten().copied().collect();
        let mean = image_mpjpe(&measured);
        (per_hand, mean, if mean.is_none() { last_error } else { None })
    }

    fn finish(&self, sample: Sample, trace: Option<Vec<AdaptiveAttempt>>) -> RectifiedResult {
        let mut warnings = self.warnings.clone();
        if let Some(e) = &sample.detection_error {
            warnings.push(format!("pose measurement failed: {e}"));
        }
        RectifiedResult {
            image: sample.image,
            strength: Some(sample.strength.value()),
            mpjpe: sample.mpjpe,
            per_hand_mpjpe: sample.per_hand,
            depth: Some(self.depth.clone()),
            mask: Some(self.pixel_mask.clone()),
            metadata: RectifyMetadata {
                seed: self.request.seed,
                camera: Some(self.camera),
                steps: self.request.plan.len(),
                timesteps: self.request.plan.taus().to_vec(),
                guidance: self.request.guidance,
                hands: self.regions.len(),
                denoiser_calls: sample.denoiser_calls,
                warnings,
                adaptive_trace: trace,
            },
        }
    }
}

fn no_op(request: &InpaintRequest, camera: PinholeCamera, warnings: Vec<String>) -> RectifiedResult {
    RectifiedResult {
        image: request.image.clone(),
        strength: None,
        mpjpe: None,
        per_hand_mpjpe: Vec::new(),
        depth: None,
        mask: None,
        metadata: RectifyMetadata {
            seed: request.seed,
            camera: Some(camera),
            steps: request.plan.len(),
            timesteps: request.plan.taus().to_vec(),
            guidance: request.guidance,
            hands: 0,
            denoiser_calls: 0,
            warnings,
            adaptive_trace: None,
        },
    }
}
