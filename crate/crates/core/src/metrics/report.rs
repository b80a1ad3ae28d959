use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{accumulate_stats, fid, kid, summarize_confidences, FeatureExtractor, HandDetector, KidConfig};
use crate::error::{Error, Result};
use crate::io::load_image;

/// Table-style evaluation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(rename = "FID")]
    pub fid: f64,
    #[serde(rename = "KID")]
    pub kid: f64,
    #[serde(rename = "KID std")]
    pub kid_std: f64,
    /// `None` (serialized as `"n/a"`) when nothing was detected or no detector ran.
    #[serde(rename = "Det. Conf.", with = "opt_na")]
    pub detection_confidence: Option<f64>,
    #[serde(rename = "MPJPE", default, skip_serializing_if = "Option::is_none")]
    pub mpjpe: Option<f64>,
    pub reference_count: usize,
    pub generated_count: usize,
    pub detected_hands: usize,
}

mod opt_na {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => s.serialize_f64(*x),
            None => s.serialize_str("n/a"),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum V {
            N(f64),
            Other(serde::de::IgnoredAny),
        }
        Ok(match V::deserialize(d)? {
            V::N(x) => Some(x),
            V::Other(_) => None,
        })
    }
}

/// PNG files of a directory in name order.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    out.sort();
    Ok(out)
}

pub fn extract_dir(dir: &Path, extractor: &dyn FeatureExtractor) -> Result<Vec<Vec<f64>>> {
    list_images(dir)?
        .iter()
        .map(|p| extractor.extract(&load_image(p)?))
        .collect()
}

pub fn evaluate_features(
    reference: &[Vec<f64>],
    generated: &[Vec<f64>],
    kid_config: &KidConfig,
    detections: Option<&[Vec<f64>]>,
) -> Result<MetricReport> {
    if reference.is_empty() || generated.is_empty() {
        return Err(Error::InsufficientData { count: 0, needed: 2 });
    }
    let a = accumulate_stats(reference.iter().map(|v| &v[..]))?;
    let b = accumulate_stats(generated.iter().map(|v| &v[..]))?;
    let k = kid(reference, generated, kid_config)?;
    let conf = detections.map(summarize_confidences).transpose()?;
    Ok(MetricReport {
        fid: fid(&a, &b)?,
        kid: k.mean,
        kid_std: k.std,
        detection_confidence: conf.as_ref().and_then(|c| c.mean),
        mpjpe: None,
        reference_count: reference.len(),
        generated_count: generated.len(),
        detected_hands: conf.map(|c| c.hands).unwrap_or(0),
    })
}

pub fn evaluate_dirs(
    reference: &Path,
    generated: &Path,
    extractor: &dyn FeatureExtractor,
    kid_config: &KidConfig,
    detector: Option<&dyn HandDetector>,
) -> Result<MetricReport> {
    let fa = extract_dir(reference, extractor)?;
    let fb = extract_dir(generated, extractor)?;
    let det = match detector {
        Some(d) => Some(
            list_images(generated)?
                .iter()
                .map(|p| d.detect(&load_image(p)?))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    evaluate_features(&fa, &fb, kid_config, det.as_deref())
}
