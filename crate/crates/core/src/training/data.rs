use std::fs;
use std::path::{Path, PathBuf};

use image::imageops::{self, FilterType};
use image::{DynamicImage, GenericImageView, GrayImage, ImageBuffer, Luma};
use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Mask;
use crate::hand::DepthMap;
use crate::io::from_dynamic;
use crate::rng::{self, sub_seed};

use super::TrainSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordStyle {
    /// Whole frame resized to the training size.
    Resize,
    /// Random crop of the training size that contains the hand when it fits.
    Crop,
}

/// One manifest line. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub rgb: PathBuf,
    pub depth: PathBuf,
    pub seg: PathBuf,
    pub caption: String,
    pub style: RecordStyle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    pub size: u32,
    /// Segmentation values that count as hand; empty means any nonzero value.
    pub hand_labels: Vec<u8>,
    pub seed: u64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            size: 512,
            hand_labels: Vec::new(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub samples: Vec<TrainSample>,
    /// Records whose files could not be read.
    pub skipped: usize,
    /// Records dropped for having no hand pixels.
    pub filtered: usize,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Format {
                path: path.to_path_buf(),
                reason: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}

pub fn write_manifest(path: &Path, records: &[ManifestRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    crate::io::write_atomic(path, out.as_bytes())
}

/// Loads every usable record of a JSON-lines manifest.
pub fn ingest_dataset(manifest: &Path, config: &IngestConfig) -> Result<Ingested> {
    let records = read_manifest(manifest)?;
    let root = manifest.parent().unwrap_or(Path::new("."));
    let mut out = Ingested::default();
    for (i, rec) in records.iter().enumerate() {
        match load_record(root, rec, config, sub_seed(config.seed, i as u64)) {
            Ok(Some(s)) => out.samples.push(s),
            Ok(None) => out.filtered += 1,
            Err(_) => out.skipped += 1,
        }
    }
    Ok(out)
}

struct Frames {
    rgb: DynamicImage,
    seg: GrayImage,
    depth: ImageBuffer<Luma<u16>, Vec<u16>>,
}

fn load_record(root: &Path, rec: &ManifestRecord, config: &IngestConfig, seed: u64) -> Result<Option<TrainSample>> {
    let rgb = image::open(root.join(&rec.rgb))?;
    let seg = image::open(root.join(&rec.seg))?.into_luma8();
    let depth = image::open(root.join(&rec.depth))?.into_luma16();
    if rgb.dimensions() != seg.dimensions() || rgb.dimensions() != depth.dimensions() {
        return Err(Error::shape(rgb.dimensions(), (seg.dimensions(), depth.dimensions())));
    }
    let is_hand = |v: u8| {
        if config.hand_labels.is_empty() {
            v != 0
        } else {
            config.hand_labels.contains(&v)
        }
    };
    let seg = GrayImage::from_fn(seg.width(), seg.height(), |x, y| {
        Luma([if is_hand(seg.get_pixel(x, y).0[0]) { 255 } else { 0 }])
    });
    let Some(bbox) = bounding_box(&seg) else {
        return Ok(None);
    };
    let frames = Frames { rgb, seg, depth };
    let frames = match rec.style {
        RecordStyle::Crop if frames.rgb.width() >= config.size && frames.rgb.height() >= config.size => {
            let (x, y) = crop_origin(frames.rgb.dimensions(), bbox, config.size, seed);
            crop(&frames, x, y, config.size)
        }
        _ => resize(&frames, config.size),
    };
    let (w, h) = frames.seg.dimensions();
    let mask = Mask::from_fn(h as usize, w as usize, |y, x| frames.seg.get_pixel(x as u32, y as u32).0[0] != 0);
    if mask.is_empty() {
        return Ok(None);
    }
    let depth = DepthMap::new(Array2::from_shape_fn((h as usize, w as usize), |(y, x)| {
        frames.depth.get_pixel(x as u32, y as u32).0[0] as f64 / 65535.0
    }));
    Ok(Some(TrainSample {
        rgb: from_dynamic(&frames.rgb),
        hand_mask: mask,
        depth,
        caption: rec.caption.clone(),
    }))
}

/// Inclusive `(x0, y0, x1, y1)` of nonzero pixels.
fn bounding_box(seg: &GrayImage) -> Option<(u32, u32, u32, u32)> {
    let mut bb: Option<(u32, u32, u32, u32)> = None;
    for (x, y, p) in seg.enumerate_pixels() {
        if p.0[0] != 0 {
            bb = Some(match bb {
                None => (x, y, x, y),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
            });
        }
    }
    bb
}

/// Top-left corner of a `size` crop inside `dims` containing `bbox` when
/// possible, otherwise centred on it.
pub fn crop_origin(dims: (u32, u32), bbox: (u32, u32, u32, u32), size: u32, seed: u64) -> (u32, u32) {
    let mut r = rng::rng(seed);
    let mut axis = |full: u32, lo: u32, hi: u32| {
        let max_start = full - size;
        if hi - lo < size {
            let a = (hi + 1).saturating_sub(size);
            let b = lo.min(max_start);
            r.random_range(a..=b)
        } else {
            ((lo + hi) / 2).saturating_sub(size / 2).min(max_start)
        }
    };
    let x = axis(dims.0, bbox.0, bbox.2);
    let y = axis(dims.1, bbox.1, bbox.3);
    (x, y)
}

fn crop(f: &Frames, x: u32, y: u32, size: u32) -> Frames {
    Frames {
        rgb: f.rgb.crop_imm(x, y, size, size),
        seg: imageops::crop_imm(&f.seg, x, y, size, size).to_image(),
        depth: imageops::crop_imm(&f.depth, x, y, size, size).to_image(),
    }
}

fn resize(f: &Frames, size: u32) -> Frames {
    Frames {
        rgb: f.rgb.resize_exact(size, size, FilterType::Triangle),
        seg: imageops::resize(&f.seg, size, size, FilterType::Nearest),
        depth: imageops::resize(&f.depth, size, size, FilterType::Nearest),
    }
}
