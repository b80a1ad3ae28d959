use ndarray::Array3;

use crate::error::{Error, Result};
use crate::grid::{Image, LatentGrid};

/// Projection between image space and the space the denoiser works in.
pub trait Codec: Sync {
    fn encode(&self, image: &Image) -> Result<LatentGrid>;
    fn decode(&self, latent: &LatentGrid) -> Result<Image>;
    /// Latent spatial shape for an image of the given size.
    fn latent_shape(&self, height: usize, width: usize) -> Result<(usize, usize)>;
    /// Max absolute error of `decode(encode(x))` on images in `[0, 1]`.
    fn round_trip_tolerance(&self) -> f64;
}

/// Pixel-space "codec"; round trips exactly.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityCodec;

impl Codec for IdentityCodec {
    fn encode(&self, image: &Image) -> Result<LatentGrid> {
        Ok(image.clone())
    }

    fn decode(&self, latent: &LatentGrid) -> Result<Image> {
        Ok(latent.clone())
    }

    fn latent_shape(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        Ok((height, width))
    }

    fn round_trip_tolerance(&self) -> f64 {
        0.0
    }
}

/// Block-average encoder with nearest-neighbour decoder. Exact on images that
/// are constant over each `factor x factor` block.
#[derive(Debug, Clone, Copy)]
pub struct AvgPoolCodec {
    pub factor: usize,
}

impl Codec for AvgPoolCodec {
    fn encode(&self, image: &Image) -> Result<LatentGrid> {
        let (c, h, w) = image.shape();
        let (lh, lw) = self.latent_shape(h, w)?;
        let f = self.factor;
        let d = image.data();
        let norm = (f * f) as f64;
        Ok(LatentGrid::new(Array3::from_shape_fn((c, lh, lw), |(k, i, j)| {
            let mut s = 0.0;
            for y in i * f..(i + 1) * f {
                for x in j * f..(j + 1) * f {
                    s += d[[k, y, x]];
                }
            }
            s / norm
        })))
    }

    fn decode(&self, latent: &LatentGrid) -> Result<Image> {
        let (c, lh, lw) = latent.shape();
        let f = self.factor;
        let d = latent.data();
        Ok(LatentGrid::new(Array3::from_shape_fn((c, lh * f, lw * f), |(k, y, x)| d[[k, y / f, x / f]])))
    }

    fn latent_shape(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        if self.factor == 0 || !height.is_multiple_of(self.factor) || !width.is_multiple_of(self.factor) {
            return Err(Error::Codec(format!(
                "image {height}x{width} not divisible by pooling factor {}",
                self.factor
            )));
        }
        Ok((height / self.factor, width / self.factor))
    }

    fn round_trip_tolerance(&self) -> f64 {
        1.0
    }
}
