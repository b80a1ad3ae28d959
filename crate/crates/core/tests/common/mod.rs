#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};

use handfix::control::ControlBranch;
use handfix::diffusion::{Conditioning, Denoiser, HashingTextEncoder, InpaintChannels, NoiseSchedule};
use handfix::hand::{FixtureMeshProvider, Mesh, PinholeCamera};
use handfix::inpaint::{IdentityCodec, InpaintModels};
use handfix::{LatentGrid, Mask, Result};

/// Predicts the exact noise that takes `x0` to `x_t`, so DDIM lands on `x0`.
pub struct OracleDenoiser {
    pub x0: LatentGrid,
    pub schedule: NoiseSchedule,
    pub calls: AtomicUsize,
}

impl OracleDenoiser {
    pub fn new(x0: LatentGrid) -> Self {
        Self {
            x0,
            schedule: NoiseSchedule::default(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Denoiser for OracleDenoiser {
    fn predict_noise(
        &self,
        x_t: &LatentGrid,
        t: usize,
        _cond: &Conditioning,
        _inpaint: Option<&InpaintChannels>,
        _control: Option<&[LatentGrid]>,
    ) -> Result<LatentGrid> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let ab = self.schedule.alpha_bar(t)?;
        x_t.axpby(1.0 / (1.0 - ab).sqrt(), &self.x0, -ab.sqrt() / (1.0 - ab).sqrt())
    }
}

/// Always predicts zero noise.
pub struct ZeroDenoiser;

impl Denoiser for ZeroDenoiser {
    fn predict_noise(
        &self,
        x_t: &LatentGrid,
        _t: usize,
        _cond: &Conditioning,
        _inpaint: Option<&InpaintChannels>,
        _control: Option<&[LatentGrid]>,
    ) -> Result<LatentGrid> {
        Ok(x_t.scale(0.0))
    }
}

pub struct NoControl;

impl ControlBranch for NoControl {
    fn features(&self, _c: &LatentGrid, _x: &LatentGrid, _t: usize, _cond: &Conditioning) -> Result<Vec<LatentGrid>> {
        Ok(Vec::new())
    }
}

/// Flat square patch covering pixels `[x0, x1) x [y0, y1)` at depth `z`.
pub fn square_mesh(camera: &PinholeCamera, x0: f64, y0: f64, x1: f64, y1: f64, z: f64) -> Mesh {
    let p = |u: f64, v: f64| camera.unproject(u, v, z);
    Mesh::new(vec![p(x0, y0), p(x1, y0), p(x1, y1), p(x0, y1)], vec![[0, 1, 2], [0, 2, 3]]).unwrap()
}

pub fn ramp_image(h: usize, w: usize) -> LatentGrid {
    LatentGrid::new(ndarray::Array3::from_shape_fn((1, h, w), |(_, y, x)| {
        0.2 + 0.6 * ((y * w + x) as f64 / (h * w) as f64)
    }))
}

pub fn rect_mask(h: usize, w: usize, y0: usize, x0: usize, y1: usize, x1: usize) -> Mask {
    Mask::from_fn(h, w, |y, x| y >= y0 && y < y1 && x >= x0 && x < x1)
}

pub struct Fixture {
    pub schedule: NoiseSchedule,
    pub encoder: HashingTextEncoder,
    pub provider: FixtureMeshProvider,
    pub camera: PinholeCamera,
}

impl Fixture {
    /// One hand mesh over pixels 8..16 of a `size` x `size` image.
    pub fn new(size: usize) -> Self {
        let camera = PinholeCamera::default_for(size, size);
        let mesh = square_mesh(&camera, 8.0, 8.0, 16.0, 16.0, 3.0);
        Self {
            schedule: NoiseSchedule::default(),
            encoder: HashingTextEncoder::new(8),
            provider: FixtureMeshProvider::new(vec![Some(mesh)]),
            camera,
        }
    }

    pub fn models<'a>(&'a self, denoiser: &'a dyn Denoiser) -> InpaintModels<'a> {
        InpaintModels {
            denoiser,
            control: &NoControl,
            codec: &IdentityCodec,
            encoder: &self.encoder,
            schedule: &self.schedule,
            meshes: &self.provider,
            localizer: None,
            probe: None,
            camera: Some(self.camera),
        }
    }
}
