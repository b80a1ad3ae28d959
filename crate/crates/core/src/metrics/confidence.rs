use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Image;

/// Per-hand keypoint confidences in `[0, 1]`; an empty list means no hand
/// was detected.
pub trait HandDetector: Sync {
    fn detect(&self, image: &Image) -> Result<Vec<f64>>;
}

/// Mean over detected hands. Images without detections are excluded from the
/// mean and counted separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSummary {
    pub mean: Option<f64>,
    pub hands: usize,
    pub images: usize,
    pub images_without_hands: usize,
}

pub fn summarize_confidences(per_image: &[Vec<f64>]) -> Result<ConfidenceSummary> {
    let mut sum = 0.0;
    let mut hands = 0;
    let mut empty = 0;
    for c in per_image {
        if c.is_empty() {
            empty += 1;
        }
        for &v in c {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Numerical(format!("confidence {v} outside [0, 1]")));
            }
            sum += v;
            hands += 1;
        }
    }
    Ok(ConfidenceSummary {
        mean: (hands > 0).then(|| sum / hands as f64),
        hands,
        images: per_image.len(),
        images_without_hands: empty,
    })
}

pub fn detection_confidence(images: &[Image], detector: &dyn HandDetector) -> Result<ConfidenceSummary> {
    let per_image = images.iter().map(|i| detector.detect(i)).collect::<Result<Vec<_>>>()?;
    summarize_confidences(&per_image)
}
