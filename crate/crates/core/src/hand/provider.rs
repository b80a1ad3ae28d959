//! Pluggable hand localization and mesh reconstruction.
//!
//! Real detectors and mesh regressors live outside this crate; the fixture
//! implementations here read their outputs from files.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::grid::{Image, Mask};

use super::Mesh;

/// Reconstructs one camera-frame mesh per hand region.
pub trait MeshProvider: Sync {
    fn reconstruct(&self, image: &Image, regions: &[Mask]) -> Vec<Result<Mesh>>;
}

/// Finds hand regions in an image.
pub trait HandLocalizer: Sync {
    fn localize(&self, image: &Image) -> Vec<Mask>;
}

/// Serves pre-computed meshes by region index.
#[derive(Debug, Clone, Default)]
pub struct FixtureMeshProvider {
    fixtures: Vec<Option<Mesh>>,
}

impl FixtureMeshProvider {
    pub fn new(fixtures: Vec<Option<Mesh>>) -> Self {
        Self { fixtures }
    }

    /// Loads one mesh file per region, in region order.
    pub fn from_paths(paths: &[PathBuf]) -> Result<Self> {
        let fixtures = paths.iter().map(|p| Mesh::load(p).map(Some)).collect::<Result<_>>()?;
        Ok(Self { fixtures })
    }
}

impl MeshProvider for FixtureMeshProvider {
    fn reconstruct(&self, _image: &Image, regions: &[Mask]) -> Vec<Result<Mesh>> {
        (0..regions.len())
            .map(|hand| {
                self.fixtures
                    .get(hand)
                    .cloned()
                    .flatten()
                    .ok_or(Error::MeshReconstruction {
                        hand,
                        reason: "no fixture mesh for this region".into(),
                    })
            })
            .collect()
    }
}

/// Returns user-supplied masks verbatim.
#[derive(Debug, Clone)]
pub struct OverrideLocalizer {
    masks: Vec<Mask>,
}

impl OverrideLocalizer {
    pub fn new(masks: Vec<Mask>) -> Self {
        Self { masks }
    }
}

impl HandLocalizer for OverrideLocalizer {
    fn localize(&self, _image: &Image) -> Vec<Mask> {
        self.masks.clone()
    }
}

/// Marks the bounding box of every 4-connected component of pixels brighter
/// than `threshold` (channel mean) with at least `min_area` pixels.
#[derive(Debug, Clone, Copy)]
pub struct BrightRegionLocalizer {
    pub threshold: f64,
    pub min_area: usize,
}

impl Default for BrightRegionLocalizer {
    fn default() -> Self {
        Self {
            threshold: 0.35,
            min_area: 16,
        }
    }
}

impl HandLocalizer for BrightRegionLocalizer {
    fn localize(&self, image: &Image) -> Vec<Mask> {
        let fg = foreground(image, self.threshold);
        connected_components(&fg)
            .into_iter()
            .filter(|c| c.len() >= self.min_area)
            .map(|c| {
                let (h, w) = fg.dim();
                let y0 = c.iter().map(|p| p.0).min().unwrap();
                let y1 = c.iter().map(|p| p.0).max().unwrap();
                let x0 = c.iter().map(|p| p.1).min().unwrap();
                let x1 = c.iter().map(|p| p.1).max().unwrap();
                Mask::from_fn(h, w, |y, x| (y0..=y1).contains(&y) && (x0..=x1).contains(&x))
            })
            .collect()
    }
}

/// Pixels whose channel mean exceeds `threshold`.
pub fn foreground(image: &Image, threshold: f64) -> Mask {
    let (c, h, w) = image.shape();
    let data = image.data();
    Mask::from_fn(h, w, |y, x| (0..c).map(|k| data[[k, y, x]]).sum::<f64>() / c as f64 > threshold)
}

fn connected_components(mask: &Mask) -> Vec<Vec<(usize, usize)>> {
    let (h, w) = mask.dim();
    let mut seen = Mask::empty(h, w);
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(y, x) || seen.get(y, x) {
                continue;
            }
            let mut comp = Vec::new();
            let mut stack = vec![(y, x)];
            seen.set(y, x, true);
            while let Some((cy, cx)) = stack.pop() {
                comp.push((cy, cx));
                let neighbors = [
                    (cy.wrapping_sub(1), cx),
                    (cy + 1, cx),
                    (cy, cx.wrapping_sub(1)),
                    (cy, cx + 1),
                ];
                for (ny, nx) in neighbors {
                    if ny < h && nx < w && mask.get(ny, nx) && !seen.get(ny, nx) {
                        seen.set(ny, nx, true);
                        stack.push((ny, nx));
                    }
                }
            }
            out.push(comp);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::LatentGrid;

    #[test]
    fn fixture_provider_reports_missing_regions() {
        let m = Mesh::new(vec![[0.0, 0.0, 1.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        let p = FixtureMeshProvider::new(vec![Some(m.clone())]);
        let img = LatentGrid::zeros(1, 4, 4);
        let out = p.reconstruct(&img, &[Mask::full(4, 4), Mask::full(4, 4)]);
        assert_eq!(out[0].as_ref().unwrap(), &m);
        assert!(matches!(out[1], Err(Error::MeshReconstruction { hand: 1, .. })));
    }

    #[test]
    fn override_masks_are_verbatim() {
        let masks = vec![Mask::from_fn(5, 5, |y, x| y == x)];
        let l = OverrideLocalizer::new(masks.clone());
        assert_eq!(l.localize(&LatentGrid::zeros(1, 5, 5)), masks);
    }

    #[test]
    fn bright_regions_become_bounding_boxes() {
        let mut img = LatentGrid::filled(1, 20, 20, 0.1);
        // an L-shaped glyph and a speck
        for y in 3..10 {
            img.data_mut()[[0, y, 4]] = 0.9;
        }
        for x in 4..9 {
            img.data_mut()[[0, 9, x]] = 0.9;
        }
        img.data_mut()[[0, 15, 15]] = 0.9;
        let masks = BrightRegionLocalizer { threshold: 0.5, min_area: 4 }.localize(&img);
        assert_eq!(masks.len(), 1);
        assert_eq!(masks[0].bounding_box(), Some((3, 4, 9, 8)));
        assert_eq!(masks[0].count(), 7 * 5);
        assert!(BrightRegionLocalizer::default().localize(&LatentGrid::zeros(1, 8, 8)).is_empty());
    }
}
