use ndarray::Array2;

use crate::error::Result;
use crate::grid::Image;
use crate::rng;

pub trait FeatureExtractor: Sync {
    fn dim(&self) -> usize;
    fn extract(&self, image: &Image) -> Result<Vec<f64>>;
}

/// Channel-averaged image, area-pooled to a fixed grid, then multiplied by a
/// seeded Gaussian matrix. Stands in for a pretrained network in tests.
#[derive(Debug, Clone)]
pub struct RandomProjectionExtractor {
    grid: usize,
    projection: Array2<f64>,
}

impl RandomProjectionExtractor {
    pub const DEFAULT_DIM: usize = 64;
    pub const DEFAULT_GRID: usize = 16;

    pub fn new(dim: usize, grid: usize, seed: u64) -> Self {
        let mut r = rng::rng(seed);
        let n = grid * grid;
        let scale = 1.0 / (n as f64).sqrt();
        let projection = Array2::from_shape_simple_fn((dim, n), || rng::standard_normal(&mut r) * scale);
        Self { grid, projection }
    }

    fn pooled(&self, image: &Image) -> Vec<f64> {
        let (c, h, w) = image.shape();
        let g = self.grid;
        let d = image.data();
        let mut out = vec![0.0; g * g];
        for i in 0..g {
            let (y0, y1) = (i * h / g, ((i + 1) * h).div_ceil(g).max(i * h / g + 1).min(h));
            for j in 0..g {
                let (x0, x1) = (j * w / g, ((j + 1) * w).div_ceil(g).max(j * w / g + 1).min(w));
                let mut s = 0.0;
                let mut n = 0usize;
                for k in 0..c {
                    for y in y0..y1 {
                        for x in x0..x1 {
                            s += d[[k, y, x]];
                            n += 1;
                        }
                    }
                }
                out[i * g + j] = if n > 0 { s / n as f64 } else { 0.0 };
            }
        }
        out
    }
}

impl Default for RandomProjectionExtractor {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIM, Self::DEFAULT_GRID, 0)
    }
}

impl FeatureExtractor for RandomProjectionExtractor {
    fn dim(&self) -> usize {
        self.projection.nrows()
    }

    fn extract(&self, image: &Image) -> Result<Vec<f64>> {
        let v = ndarray::Array1::from(self.pooled(image));
        Ok(self.projection.dot(&v).to_vec())
    }
}
