//! Adaptive control strength: sample once at the reference strength, then scan
//! increasing candidates and keep the first whose pose error beats
//! `factor * reference_error`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{AdaptiveConfig, ControlStrength};

/// One sampler invocation in the scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveAttempt {
    pub strength: f64,
    pub error: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct AdaptiveOutcome<T> {
    pub strength: ControlStrength,
    pub selected: T,
    /// `None` when the reference sample could not be measured.
    pub reference_error: Option<f64>,
    pub threshold: f64,
    pub attempts: Vec<AdaptiveAttempt>,
}

impl<T> AdaptiveOutcome<T> {
    pub fn sampler_calls(&self) -> usize {
        self.attempts.len()
    }
}

/// Runs the adaptive search.
///
/// `sample` produces an output at a given strength; `measure` returns its pose
/// error (MPJPE against the conditioning keypoints). A failed measurement never
/// qualifies a candidate. If the reference itself cannot be measured the
/// threshold is unbounded, so the first measurable candidate is taken; if no
/// sample at all can be measured, [`Error::DetectionFailed`] carries the trace.
pub fn adaptive_strength<T, S, M>(config: &AdaptiveConfig, mut sample: S, mut measure: M) -> Result<AdaptiveOutcome<T>>
where
    S: FnMut(ControlStrength) -> Result<T>,
    M: FnMut(&T) -> Result<f64>,
{
    config.validate()?;
    let mut attempts = Vec::with_capacity(config.candidates.len() + 1);
    let reference_strength = ControlStrength::new(config.reference_strength)?;

    let reference = sample(reference_strength)?;
    let reference_error = record(&mut attempts, reference_strength, measure(&reference));
    let threshold = reference_error.map_or(f64::INFINITY, |e| e * config.factor);

    for &c in &config.candidates {
        let strength = ControlStrength::new(c)?;
        let x = sample(strength)?;
        if let Some(err) = record(&mut attempts, strength, measure(&x)) {
            if err < threshold {
                return Ok(AdaptiveOutcome {
                    strength,
                    selected: x,
                    reference_error,
                    threshold,
                    attempts,
                });
            }
        }
    }

    if reference_error.is_none() {
        return Err(Error::DetectionFailed {
            attempts: attempts
                .into_iter()
                .map(|a| (a.strength, a.failure.unwrap_or_default()))
                .collect(),
        });
    }
    Ok(AdaptiveOutcome {
        strength: reference_strength,
        selected: reference,
        reference_error,
        threshold,
        attempts,
    })
}

fn record(attempts: &mut Vec<AdaptiveAttempt>, strength: ControlStrength, measured: Result<f64>) -> Option<f64> {
    let (error, failure) = match measured {
        Ok(e) if e.is_finite() => (Some(e), None),
        Ok(e) => (None, Some(format!("non-finite error {e}"))),
        Err(e) => (None, Some(e.to_string())),
    };
    attempts.push(AdaptiveAttempt {
        strength: strength.value(),
        error,
        failure,
    });
    error
}
