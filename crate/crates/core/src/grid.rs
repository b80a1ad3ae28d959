//! Real-valued grids and binary masks shared by every stage of the sampler.
//!
//! A [`LatentGrid`] is a `(channels, height, width)` array. The same type
//! carries pixel-space images (values nominally in `[0, 1]`) and codec
//! latents, so the sampling math never cares which space it runs in.

use ndarray::{Array2, Array3, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentGrid {
    data: Array3<f64>,
}

/// Images are grids in pixel space.
pub type Image = LatentGrid;

impl LatentGrid {
    pub fn new(data: Array3<f64>) -> Self {
        Self { data }
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::new(Array3::zeros((channels, height, width)))
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Self {
        Self::new(Array3::from_elem((channels, height, width), value))
    }

    pub fn from_vec(shape: (usize, usize, usize), values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Array3::from_shape_vec(shape, values)
            .map(Self::new)
            .map_err(|_| Error::shape(shape, n))
    }

    /// Single-channel grid from a 2-D array.
    pub fn from_plane(plane: Array2<f64>) -> Self {
        Self::new(plane.insert_axis(Axis(0)))
    }

    /// Standard-normal grid drawn from `rng`.
    pub fn standard_normal(shape: (usize, usize, usize), rng: &mut Rng) -> Self {
        Self::new(Array3::from_shape_simple_fn(shape, || rng::standard_normal(rng)))
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.data.dim()
    }

    pub fn channels(&self) -> usize {
        self.data.dim().0
    }

    pub fn height(&self) -> usize {
        self.data.dim().1
    }

    pub fn width(&self) -> usize {
        self.data.dim().2
    }

    pub fn spatial(&self) -> (usize, usize) {
        let (_, h, w) = self.data.dim();
        (h, w)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array3<f64> {
        &mut self.data
    }

    pub fn into_data(self) -> Array3<f64> {
        self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.data.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_same_shape(&self, other: &LatentGrid) -> Result<()> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(Error::shape(self.shape(), other.shape()))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> LatentGrid {
        Self::new(self.data.mapv(f))
    }

    pub fn scale(&self, s: f64) -> LatentGrid {
        self.map(|v| v * s)
    }

    /// Elementwise `a * self + b * other`.
    pub fn axpby(&self, a: f64, other: &LatentGrid, b: f64) -> Result<LatentGrid> {
        self.ensure_same_shape(other)?;
        let mut out = self.data.clone();
        Zip::from(&mut out)
            .and(&other.data)
            .for_each(|o, &y| *o = a * *o + b * y);
        Ok(Self::new(out))
    }

    pub fn add(&self, other: &LatentGrid) -> Result<LatentGrid> {
        self.axpby(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &LatentGrid) -> Result<LatentGrid> {
        self.axpby(1.0, other, -1.0)
    }

    pub fn mean(&self) -> f64 {
        self.data.mean().unwrap_or(0.0)
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs_diff(&self, other: &LatentGrid) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn channel(&self, c: usize) -> ndarray::ArrayView2<'_, f64> {
        self.data.index_axis(Axis(0), c)
    }

    /// Stacks grids along the channel axis.
    pub fn concat_channels(parts: &[&LatentGrid]) -> Result<LatentGrid> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Config("nothing to concatenate".into()))?;
        let spatial = first.spatial();
        for p in parts {
            if p.spatial() != spatial {
                return Err(Error::shape(spatial, p.spatial()));
            }
        }
        let views: Vec<_> = parts.iter().map(|p| p.data.view()).collect();
        let data = ndarray::concatenate(Axis(0), &views).map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self::new(data))
    }
}

/// Binary spatial mask; `true` marks the hand region. Broadcast across
/// channels when applied to a [`LatentGrid`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    cells: Array2<bool>,
}

impl Mask {
    pub fn new(cells: Array2<bool>) -> Self {
        Self { cells }
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self::new(Array2::from_elem((height, width), false))
    }

    pub fn full(height: usize, width: usize) -> Self {
        Self::new(Array2::from_elem((height, width), true))
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        Self::new(Array2::from_shape_fn((height, width), |(y, x)| f(y, x)))
    }

    pub fn dim(&self) -> (usize, usize) {
        self.cells.dim()
    }

    pub fn cells(&self) -> &Array2<bool> {
        &self.cells
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.cells[[y, x]]
    }

    pub fn set(&mut self, y: usize, x: usize, v: bool) {
        self.cells[[y, x]] = v;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.cells.iter().any(|&v| v)
    }

    pub fn union(&self, other: &Mask) -> Result<Mask> {
        if self.dim() != other.dim() {
            return Err(Error::shape(self.dim(), other.dim()));
        }
        let mut out = self.cells.clone();
        Zip::from(&mut out).and(&other.cells).for_each(|a, &b| *a |= b);
        Ok(Mask::new(out))
    }

    pub fn intersection_count(&self, other: &Mask) -> usize {
        self.cells
            .iter()
            .zip(other.cells.iter())
            .filter(|(&a, &b)| a && b)
            .count()
    }

    /// Inclusive bounding box `(y0, x0, y1, x1)` of the set cells.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for ((y, x), &v) in self.cells.indexed_iter() {
            if v {
                bb = Some(match bb {
                    None => (y, x, y, x),
                    Some((y0, x0, y1, x1)) => (y0.min(y), x0.min(x), y1.max(y), x1.max(x)),
                });
            }
        }
        bb
    }

    /// Square (Chebyshev) dilation by `radius` cells.
    pub fn dilate(&self, radius: usize) -> Mask {
        if radius == 0 {
            return self.clone();
        }
        let (h, w) = self.dim();
        // separable: rows then columns
        let mut rows = Array2::from_elem((h, w), false);
        for y in 0..h {
            for x in 0..w {
                if self.cells[[y, x]] {
                    let lo = x.saturating_sub(radius);
                    let hi = (x + radius).min(w - 1);
                    for xx in lo..=hi {
                        rows[[y, xx]] = true;
                    }
                }
            }
        }
        let mut out = Array2::from_elem((h, w), false);
        for y in 0..h {
            for x in 0..w {
                if rows[[y, x]] {
                    let lo = y.saturating_sub(radius);
                    let hi = (y + radius).min(h - 1);
                    for yy in lo..=hi {
                        out[[yy, x]] = true;
                    }
                }
            }
        }
        Mask::new(out)
    }

    pub fn to_grid(&self) -> LatentGrid {
        LatentGrid::from_plane(self.cells.mapv(|v| if v { 1.0 } else { 0.0 }))
    }
}
