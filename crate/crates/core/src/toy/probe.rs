use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{Image, Mask};
use crate::hand::{rasterize_depth, Keypoints2D, Mesh, PinholeCamera, KEYPOINT_COUNT};
use crate::inpaint::PoseProbe;
use crate::metrics::HandDetector;

use super::glyph::{glyph_foreground, GLYPH_DILATION};

/// Farthest covered point along 21 evenly spaced rays from `center`.
pub fn radial_keypoints(mask: &Mask, center: [f64; 2]) -> Keypoints2D {
    let (h, w) = mask.dim();
    let reach = (h.max(w) * 2) as f64;
    let points = (0..KEYPOINT_COUNT)
        .map(|j| {
            let a = 2.0 * PI * j as f64 / KEYPOINT_COUNT as f64;
            let (dx, dy) = (a.cos(), a.sin());
            let mut last = center;
            let mut r = 0.0;
            while r <= reach {
                let (x, y) = (center[0] + r * dx, center[1] + r * dy);
                if x >= 0.0 && y >= 0.0 && (x as usize) < w && (y as usize) < h && mask.get(y as usize, x as usize) {
                    last = [x, y];
                }
                r += 0.25;
            }
            last
        })
        .collect();
    Keypoints2D::new(points).expect("21 finite points")
}

fn region_center(region: &Mask) -> Result<[f64; 2]> {
    let (y0, x0, y1, x1) = region.bounding_box().ok_or(Error::EmptyMask)?;
    Ok([(x0 + x1 + 1) as f64 / 2.0, (y0 + y1 + 1) as f64 / 2.0])
}

/// Pose proxy for glyphs: radial extent profile around the hand region's
/// center, measured on the rendered silhouette (reference) or on the
/// thresholded image (detection).
#[derive(Debug, Clone, Copy, Default)]
pub struct GlyphPoseProbe;

impl PoseProbe for GlyphPoseProbe {
    fn reference(&self, meshes: &[Mesh], regions: &[Mask], camera: &PinholeCamera) -> Result<Vec<Keypoints2D>> {
        meshes
            .iter()
            .zip(regions)
            .map(|(m, r)| {
                let sil = Mask::new(rasterize_depth(m, camera)?.mapv(f64::is_finite));
                Ok(radial_keypoints(&sil, region_center(r)?))
            })
            .collect()
    }

    fn detect(&self, image: &Image, regions: &[Mask], _camera: &PinholeCamera) -> Vec<Result<Keypoints2D>> {
        let fg = glyph_foreground(image);
        regions
            .iter()
            .map(|r| {
                let c = region_center(r)?;
                let near = r.dilate(2 * GLYPH_DILATION);
                let (h, w) = fg.dim();
                let local = Mask::from_fn(h, w, |y, x| fg.get(y, x) && near.get(y, x));
                if local.is_empty() {
                    return Err(Error::Numerical("no foreground in hand region".into()));
                }
                Ok(radial_keypoints(&local, c))
            })
            .collect()
    }
}

/// Deterministic stand-in detector: a table from control strength to the
/// pose error it reports (`None` = detection failure).
#[derive(Debug, Clone, PartialEq)]
pub struct MockErrorDetector {
    pub table: Vec<(f64, Option<f64>)>,
}

impl MockErrorDetector {
    pub fn new(table: Vec<(f64, Option<f64>)>) -> Self {
        Self { table }
    }

    pub fn error_at(&self, strength: f64) -> Result<f64> {
        self.table
            .iter()
            .find(|(s, _)| (s - strength).abs() < 1e-9)
            .and_then(|(_, e)| *e)
            .ok_or_else(|| Error::Numerical(format!("no detection at strength {strength}")))
    }

    /// Reference keypoints shifted so that their error equals the table entry.
    pub fn keypoints(&self, reference: &Keypoints2D, strength: f64) -> Result<Keypoints2D> {
        Ok(reference.translated(self.error_at(strength)?, 0.0))
    }
}

/// Confidence per bright component: the share of its pixels in the glyph
/// texture band `[0.45, 0.85]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GlyphDetector;

impl HandDetector for GlyphDetector {
    fn detect(&self, image: &Image) -> Result<Vec<f64>> {
        use crate::hand::{BrightRegionLocalizer, HandLocalizer};
        let regions = BrightRegionLocalizer::default().localize(image);
        let fg = glyph_foreground(image);
        let d = image.data();
        Ok(regions
            .iter()
            .map(|r| {
                let (mut n, mut good) = (0usize, 0usize);
                for ((y, x), &inside) in r.cells().indexed_iter() {
                    if inside && fg.get(y, x) {
                        n += 1;
                        let v = (0..image.channels()).map(|k| d[[k, y, x]]).sum::<f64>() / image.channels() as f64;
                        if (0.45..=0.85).contains(&v) {
                            good += 1;
                        }
                    }
                }
                if n == 0 { 0.0 } else { good as f64 / n as f64 }
            })
            .collect())
    }
}
