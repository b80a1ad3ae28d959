use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::LatentGrid;

/// Scalar applied to every control-branch block output; always in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ControlStrength(f64);

impl ControlStrength {
    pub const DEFAULT: f64 = 0.55;
    pub const FULL: ControlStrength = ControlStrength(1.0);
    pub const OFF: ControlStrength = ControlStrength(0.0);

    pub fn new(s: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&s) {
            Ok(Self(s))
        } else {
            Err(Error::Strength(s))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for ControlStrength {
    fn default() -> Self {
        Self(Self::DEFAULT)
    }
}

impl TryFrom<f64> for ControlStrength {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ControlStrength> for f64 {
    fn from(s: ControlStrength) -> f64 {
        s.0
    }
}

/// Multiplies every block of control features by `s`.
pub fn scale_control(features: &[LatentGrid], s: ControlStrength) -> Vec<LatentGrid> {
    if s.0 == 1.0 {
        return features.to_vec();
    }
    features.iter().map(|f| f.scale(s.0)).collect()
}

/// Parameters of the adaptive search: reference run at `reference_strength`,
/// then candidates in increasing order until one beats `factor` times the
/// reference error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub candidates: Vec<f64>,
    pub factor: f64,
    pub reference_strength: f64,
}

impl AdaptiveConfig {
    pub const DEFAULT_FACTOR: f64 = 1.15;

    pub fn default_candidates() -> Vec<f64> {
        vec![0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
    }

    pub fn new(candidates: Vec<f64>, factor: f64) -> Result<Self> {
        let cfg = Self {
            candidates,
            factor,
            reference_strength: 1.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::Config("adaptive strength needs at least one candidate".into()));
        }
        if self.candidates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("adaptive candidates must be strictly increasing".into()));
        }
        if self.candidates.iter().any(|&c| !(c > 0.0 && c <= 1.0)) {
            return Err(Error::Config("adaptive candidates must lie in (0, 1]".into()));
        }
        if !(self.factor > 1.0) || !self.factor.is_finite() {
            return Err(Error::Config(format!("adaptive factor must exceed 1, got {}", self.factor)));
        }
        ControlStrength::new(self.reference_strength)?;
        Ok(())
    }
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            candidates: Self::default_candidates(),
            factor: Self::DEFAULT_FACTOR,
            reference_strength: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrengthStrategy {
    Fixed { strength: ControlStrength },
    Adaptive(AdaptiveConfig),
}

impl StrengthStrategy {
    pub fn fixed(s: f64) -> Result<Self> {
        Ok(Self::Fixed { strength: ControlStrength::new(s)? })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Fixed { .. } => Ok(()),
            Self::Adaptive(cfg) => cfg.validate(),
        }
    }
}

impl Default for StrengthStrategy {
    fn default() -> Self {
        Self::Fixed { strength: ControlStrength::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(v: f64) -> LatentGrid {
        LatentGrid::filled(2, 3, 3, v)
    }

    #[test]
    fn strength_bounds() {
        assert!(ControlStrength::new(-0.01).is_err());
        assert!(ControlStrength::new(1.01).is_err());
        assert!(ControlStrength::new(f64::NAN).is_err());
        assert_eq!(ControlStrength::default().value(), 0.55);
        assert!(serde_json::from_str::<ControlStrength>("1.5").is_err());
    }

    #[test]
    fn scaling_examples() {
        let f = vec![block(1.0), block(-2.0)];
        assert_eq!(scale_control(&f, ControlStrength::FULL), f);
        assert!(scale_control(&f, ControlStrength::OFF).iter().all(|b| b.iter().all(|&v| v == 0.0)));
        let s = scale_control(&[block(1.0)], ControlStrength::new(0.55).unwrap());
        assert!(s[0].iter().all(|&v| v == 0.55));
        assert_eq!(s[0].shape(), (2, 3, 3));
    }

    #[test]
    fn adaptive_config_validation() {
        assert!(AdaptiveConfig::default().validate().is_ok());
        assert!(AdaptiveConfig::new(vec![], 1.15).is_err());
        assert!(AdaptiveConfig::new(vec![0.5, 0.4], 1.15).is_err());
        assert!(AdaptiveConfig::new(vec![0.0, 0.4], 1.15).is_err());
        assert!(AdaptiveConfig::new(vec![0.4], 1.0).is_err());
    }

    #[test]
    fn strategy_json() {
        let s = StrengthStrategy::default();
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"kind":"fixed","strength":0.55}"#);
        let a = StrengthStrategy::Adaptive(AdaptiveConfig::default());
        let back: StrengthStrategy = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
    }
}
