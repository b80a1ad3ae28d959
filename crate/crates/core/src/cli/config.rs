use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{AdaptiveConfig, ControlStrength, StrengthStrategy};
use crate::diffusion::{NoiseSchedule, Prompts, TimestepPlan};
use crate::error::{Error, Result};
use crate::hand::PinholeCamera;
use crate::inpaint::DEFAULT_DILATION;
use crate::metrics::KidConfig;
use crate::toy::ToyTrainConfig;
use crate::training::{sha256_hex, IngestConfig, TrainConfig};

pub const MODEL_ROOT_ENV: &str = "HANDFIX_MODEL_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeKind {
    /// Radial glyph profile (toy models).
    Glyph,
    /// No pose measurement; adaptive strength is unavailable.
    None,
}

/// Every setting a command can read. Missing fields in a config file take
/// their defaults; command-line flags override both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub steps: usize,
    pub guidance: f64,
    pub strength: f64,
    pub adaptive: bool,
    pub adaptive_factor: f64,
    pub candidates: Vec<f64>,
    pub prompt: String,
    pub negative_prompt: String,
    pub extra_negative_prompt: String,
    pub dilation: usize,
    pub exact_composite: bool,
    pub camera: Option<PinholeCamera>,
    pub probe: ProbeKind,
    pub model_root: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub sweep_strengths: Vec<f64>,
    pub train: TrainConfig,
    pub ingest: IngestConfig,
    pub kid: KidConfig,
    pub extractor_dim: usize,
    pub toy: ToyTrainConfig,
    pub demo_scenarios: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let prompts = Prompts::default();
        Self {
            seed: 0,
            steps: TimestepPlan::DEFAULT_STEPS,
            guidance: 1.0,
            strength: ControlStrength::DEFAULT,
            adaptive: false,
            adaptive_factor: AdaptiveConfig::DEFAULT_FACTOR,
            candidates: AdaptiveConfig::default_candidates(),
            prompt: prompts.positive,
            negative_prompt: prompts.negative,
            extra_negative_prompt: prompts.extra_negative,
            dilation: DEFAULT_DILATION,
            exact_composite: false,
            camera: None,
            probe: ProbeKind::Glyph,
            model_root: None,
            checkpoint: None,
            sweep_strengths: (0..=10).map(|i| i as f64 / 10.0).collect(),
            train: TrainConfig::default(),
            ingest: IngestConfig::default(),
            kid: KidConfig::default(),
            extractor_dim: 64,
            toy: ToyTrainConfig::default(),
            demo_scenarios: 32,
        }
    }
}

impl RunConfig {
    /// Reads a bare config or the `config` field of an output sidecar.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let inner = match value.get("config") {
            Some(c) if value.get("command").is_some() => c.clone(),
            _ => value,
        };
        serde_json::from_value(inner).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }

    pub fn prompts(&self) -> Prompts {
        Prompts {
            positive: self.prompt.clone(),
            negative: self.negative_prompt.clone(),
            extra_negative: self.extra_negative_prompt.clone(),
        }
    }

    pub fn strategy(&self) -> Result<StrengthStrategy> {
        if self.adaptive {
            Ok(StrengthStrategy::Adaptive(AdaptiveConfig::new(self.candidates.clone(), self.adaptive_factor)?))
        } else {
            StrengthStrategy::fixed(self.strength)
        }
    }

    pub fn plan(&self) -> Result<TimestepPlan> {
        TimestepPlan::uniform(NoiseSchedule::DEFAULT_STEPS, self.steps)
    }

    /// Flag, then config file, then environment.
    pub fn resolve_model_root(&mut self, flag: Option<PathBuf>) {
        if let Some(f) = flag {
            self.model_root = Some(f);
        } else if self.model_root.is_none() {
            self.model_root = std::env::var_os(MODEL_ROOT_ENV).map(PathBuf::from);
        }
    }

    pub fn model_root(&self) -> Result<&Path> {
        self.model_root.as_deref().ok_or_else(|| Error::ModelLoad {
            path: PathBuf::from("<unset>"),
            reason: format!("no model root given (use --model-root or {MODEL_ROOT_ENV})"),
        })
    }
}
