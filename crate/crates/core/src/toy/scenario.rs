use crate::control::{AdaptiveConfig, ControlStrength, StrengthStrategy};
use crate::diffusion::{HashingTextEncoder, NoiseSchedule, Prompts, TimestepPlan};
use crate::error::Result;
use crate::grid::{Image, Mask};
use crate::hand::{FixtureMeshProvider, Mesh};
use crate::inpaint::{rectify, IdentityCodec, InpaintModels, InpaintRequest, RectifiedResult};
use crate::rng::{self, sub_seed};

use super::glyph::{glyph_camera, structure_error, GlyphGeometry, GlyphSample, GLYPH_DILATION};
use super::model::ToyModel;
use super::probe::GlyphPoseProbe;
use super::train::toy_encoder;

pub const TOY_SAMPLING_STEPS: usize = 25;

/// A malformed glyph image together with the geometry it should have.
#[derive(Debug, Clone)]
pub struct ToyScenario {
    pub input: Image,
    pub target: GlyphSample,
    /// Union of the malformed and target regions.
    pub mask: Mask,
    pub mesh: Mesh,
}

impl ToyScenario {
    pub fn generate(seed: u64) -> Result<Self> {
        let mut r = rng::rng(sub_seed(seed, 0x5ce7e));
        let geometry = GlyphGeometry::random(&mut r);
        let bad = geometry.malformed(&mut r);
        let mesh = geometry.mesh(&glyph_camera())?;
        let target = GlyphSample::from_geometry(geometry)?;
        let mask = target.mask.union(&bad.coverage())?;
        Ok(Self {
            input: bad.render(),
            target,
            mask,
            mesh,
        })
    }

    pub fn request(&self, strategy: StrengthStrategy, seed: u64) -> Result<InpaintRequest> {
        let mut req = InpaintRequest::new(
            self.input.clone(),
            vec![self.mask.clone()],
            TimestepPlan::uniform(NoiseSchedule::DEFAULT_STEPS, TOY_SAMPLING_STEPS)?,
        );
        req.prompts = Prompts {
            positive: self.target.caption.clone(),
            ..Prompts::default()
        };
        req.strategy = strategy;
        req.seed = seed;
        req.dilation = GLYPH_DILATION;
        Ok(req)
    }

    pub fn provider(&self) -> FixtureMeshProvider {
        FixtureMeshProvider::new(vec![Some(self.mesh.clone())])
    }

    pub fn structure_error(&self, image: &Image) -> f64 {
        structure_error(image, &self.target.mask)
    }
}

/// Shared read-only pieces for running the toy model through [`rectify`].
pub struct ToyPipeline {
    pub model: ToyModel,
    pub schedule: NoiseSchedule,
    pub encoder: HashingTextEncoder,
}

impl ToyPipeline {
    pub fn new(model: ToyModel) -> Self {
        let encoder = toy_encoder(&model.base.config());
        Self {
            model,
            schedule: NoiseSchedule::default(),
            encoder,
        }
    }

    pub fn rectify(&self, scenario: &ToyScenario, request: &InpaintRequest) -> Result<RectifiedResult> {
        let provider = scenario.provider();
        let models = InpaintModels {
            denoiser: &self.model.base,
            control: &self.model.control,
            codec: &IdentityCodec,
            encoder: &self.encoder,
            schedule: &self.schedule,
            meshes: &provider,
            localizer: None,
            probe: Some(&GlyphPoseProbe),
            camera: Some(glyph_camera()),
        };
        rectify(request, &models)
    }

    /// Structure error of one scenario at a fixed strength.
    pub fn structure_error_at(&self, scenario_seed: u64, strength: f64) -> Result<f64> {
        let sc = ToyScenario::generate(scenario_seed)?;
        let req = sc.request(StrengthStrategy::Fixed { strength: ControlStrength::new(strength)? }, scenario_seed)?;
        let out = self.rectify(&sc, &req)?;
        Ok(sc.structure_error(&out.image))
    }

    /// Mean structure error over `seeds` for each strength.
    pub fn strength_trend(&self, seeds: &[u64], strengths: &[f64]) -> Result<Vec<f64>> {
        strengths
            .iter()
            .map(|&s| {
                let total = seeds.iter().map(|&seed| self.structure_error_at(seed, s)).sum::<Result<f64>>()?;
                Ok(total / seeds.len() as f64)
            })
            .collect()
    }

    pub fn adaptive(&self, scenario: &ToyScenario, seed: u64) -> Result<RectifiedResult> {
        let req = scenario.request(StrengthStrategy::Adaptive(AdaptiveConfig::default()), seed)?;
        self.rectify(scenario, &req)
    }
}
