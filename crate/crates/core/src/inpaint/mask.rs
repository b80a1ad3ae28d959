use crate::error::{Error, Result};
use crate::grid::{LatentGrid, Mask};

/// Default dilation (pixels) applied to hand masks so wrist seams are regenerated.
pub const DEFAULT_DILATION: usize = 8;

/// A hand region at pixel and latent resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    pub pixel: Mask,
    pub latent: Mask,
}

impl RegionMask {
    pub fn new(pixel: Mask, latent_shape: (usize, usize)) -> Self {
        let latent = downsample_mask(&pixel, latent_shape);
        Self { pixel, latent }
    }
}

/// Marks every latent cell that overlaps at least one set pixel.
///
/// Latent cell `(i, j)` spans pixel rows `floor(i H / h) .. ceil((i + 1) H / h)`
/// (likewise for columns), which reduces to exact blocks when `h` divides `H`.
pub fn downsample_mask(pixel: &Mask, latent_shape: (usize, usize)) -> Mask {
    let (ph, pw) = pixel.dim();
    let (lh, lw) = latent_shape;
    let span = |i: usize, n: usize, full: usize| {
        let lo = i * full / n;
        let hi = ((i + 1) * full).div_ceil(n).min(full);
        lo..hi.max(lo + 1).min(full.max(1))
    };
    Mask::from_fn(lh, lw, |i, j| {
        span(i, lh, ph).any(|y| span(j, lw, pw).any(|x| pixel.get(y, x)))
    })
}

/// `m * a + (1 - m) * b` with the spatial mask broadcast over channels.
pub fn masked_compose(a: &LatentGrid, b: &LatentGrid, m: &Mask) -> Result<LatentGrid> {
    a.ensure_same_shape(b)?;
    if a.spatial() != m.dim() {
        return Err(Error::shape(a.spatial(), m.dim()));
    }
    let mut out = b.clone();
    let (c, h, w) = a.shape();
    let src = a.data();
    let dst = out.data_mut();
    for y in 0..h {
        for x in 0..w {
            if m.get(y, x) {
                for k in 0..c {
                    dst[[k, y, x]] = src[[k, y, x]];
                }
            }
        }
    }
    Ok(out)
}

/// Zeroes the masked pixels of an image.
pub fn blank_region(image: &LatentGrid, m: &Mask) -> Result<LatentGrid> {
    let (c, h, w) = image.shape();
    masked_compose(&LatentGrid::zeros(c, h, w), image, m)
}
