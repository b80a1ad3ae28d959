use std::path::Path;

use serde::{Deserialize, Serialize};

use super::nn::{silu, silu_grad, Conv};
use crate::control::ControlBranch;
use crate::diffusion::{Conditioning, Denoiser, InpaintChannels};
use crate::error::{Error, Result};
use crate::grid::LatentGrid;
use crate::rng;
use crate::training::{TrainInput, TrainableControl};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    pub hidden: usize,
    pub cond_dim: usize,
    /// Diffusion length used to map `t` to the noise-level input channel.
    pub steps: usize,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            hidden: 12,
            cond_dim: 16,
            steps: 1000,
            seed: 0,
        }
    }
}

fn to_f32(g: &LatentGrid) -> Vec<f32> {
    g.iter().map(|&v| v as f32).collect()
}

fn plane(value: f32, hw: usize) -> Vec<f32> {
    vec![value; hw]
}

fn noise_level(t: usize, steps: usize) -> f32 {
    t as f32 / steps as f32
}

fn check_single_channel(x: &LatentGrid) -> Result<(usize, usize)> {
    if x.channels() != 1 {
        return Err(Error::shape(1, x.channels()));
    }
    Ok(x.spatial())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Stored {
    kind: String,
    version: u32,
    config: ToyConfig,
    params: Vec<f32>,
}

fn save(kind: &str, config: ToyConfig, params: &[f32], path: &Path) -> Result<()> {
    let s = Stored {
        kind: kind.into(),
        version: 1,
        config,
        params: params.to_vec(),
    };
    crate::io::write_atomic(path, &serde_json::to_vec(&s)?)
}

fn load(kind: &str, path: &Path) -> Result<Stored> {
    let fail = |reason: String| Error::ModelLoad {
        path: path.to_path_buf(),
        reason,
    };
    let bytes = std::fs::read(path).map_err(|e| fail(e.to_string()))?;
    let s: Stored = serde_json::from_slice(&bytes).map_err(|e| fail(e.to_string()))?;
    if s.kind != kind || s.version != 1 {
        return Err(fail(format!("expected {kind} v1, found {} v{}", s.kind, s.version)));
    }
    Ok(s)
}

/// Inpainting noise predictor over `[x_t, mask, masked image, noise level]`
/// with three control injection points.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyBase {
    config: ToyConfig,
    convs: [Conv; 5],
    cond_offset: usize,
    params: Vec<f32>,
}

#[derive(Debug, Clone)]
pub struct BaseTape {
    h: usize,
    w: usize,
    cond: Vec<f32>,
    cols: [Vec<f32>; 5],
    pre: [Vec<f32>; 4],
}

pub const CONTROL_BLOCKS: usize = 3;

impl ToyBase {
    pub const INPUTS: usize = 4;

    fn layout(config: &ToyConfig) -> ([Conv; 5], usize, usize) {
        let hd = config.hidden;
        let mut off = 0;
        let convs = [
            Conv::new(Self::INPUTS, hd, 3, 1, &mut off),
            Conv::new(hd, hd, 3, 2, &mut off),
            Conv::new(hd, hd, 3, 4, &mut off),
            Conv::new(hd, hd, 3, 1, &mut off),
            Conv::new(hd, 1, 3, 1, &mut off),
        ];
        let cond_offset = off;
        (convs, cond_offset, off + hd * config.cond_dim)
    }

    pub fn new(config: ToyConfig) -> Self {
        let (convs, cond_offset, len) = Self::layout(&config);
        let mut params = vec![0.0f32; len];
        let mut r = rng::rng(rng::sub_seed(config.seed, 0xba5e));
        for c in &convs {
            c.init(&mut params, &mut r, false);
        }
        let out = convs[4];
        for v in &mut params[out.offset..out.offset + out.cout * out.fan_in()] {
            *v *= 0.1;
        }
        for v in &mut params[cond_offset..] {
            *v = (rng::standard_normal(&mut r) * 0.1) as f32;
        }
        Self {
            config,
            convs,
            cond_offset,
            params,
        }
    }

    pub fn from_params(config: ToyConfig, params: Vec<f32>) -> Result<Self> {
        let (convs, cond_offset, len) = Self::layout(&config);
        if params.len() != len {
            return Err(Error::shape(len, params.len()));
        }
        Ok(Self {
            config,
            convs,
            cond_offset,
            params,
        })
    }

    pub fn config(&self) -> ToyConfig {
        self.config
    }

    pub fn params(&self) -> &[f32] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f32] {
        &mut self.params
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save("toy-base", self.config, &self.params, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = load("toy-base", path)?;
        Self::from_params(s.config, s.params)
    }

    fn inputs(&self, x_t: &LatentGrid, t: usize, inpaint: Option<&InpaintChannels>) -> Result<Vec<f32>> {
        let (h, w) = check_single_channel(x_t)?;
        let hw = h * w;
        let mut input = Vec::with_capacity(Self::INPUTS * hw);
        input.extend(to_f32(x_t));
        match inpaint {
            Some(ic) => {
                if ic.mask.dim() != (h, w) {
                    return Err(Error::shape((h, w), ic.mask.dim()));
                }
                x_t.ensure_same_shape(&ic.masked_latent)?;
                input.extend(ic.mask.cells().iter().map(|&m| if m { 1.0f32 } else { 0.0 }));
                input.extend(to_f32(&ic.masked_latent));
            }
            None => {
                input.extend(plane(1.0, hw));
                input.extend(plane(0.0, hw));
            }
        }
        input.extend(plane(noise_level(t, self.config.steps), hw));
        Ok(input)
    }

    fn cond_bias(&self, cond: &[f32]) -> Vec<f32> {
        let d = self.config.cond_dim;
        (0..self.config.hidden)
            .map(|o| {
                let row = &self.params[self.cond_offset + o * d..self.cond_offset + (o + 1) * d];
                row.iter().zip(cond).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// Raw forward pass; `ctrl` holds the already-scaled control residuals.
    pub fn run(
        &self,
        x_t: &LatentGrid,
        t: usize,
        cond: &Conditioning,
        inpaint: Option<&InpaintChannels>,
        ctrl: Option<&[Vec<f32>]>,
    ) -> Result<(Vec<f32>, BaseTape)> {
        if cond.0.len() != self.config.cond_dim {
            return Err(Error::shape(self.config.cond_dim, cond.0.len()));
        }
        let (h, w) = x_t.spatial();
        let hw = h * w;
        let hd = self.config.hidden;
        if let Some(c) = ctrl {
            if c.len() != CONTROL_BLOCKS || c.iter().any(|f| f.len() != hd * hw) {
                return Err(Error::shape((CONTROL_BLOCKS, hd * hw), c.iter().map(|f| f.len()).collect::<Vec<_>>()));
            }
        }
        let input = self.inputs(x_t, t, inpaint)?;
        let cond: Vec<f32> = cond.0.iter().map(|&v| v as f32).collect();
        let p = &self.params;
        let [c1, c2, c3, c4, c5] = self.convs;

        let (mut z1, k1) = c1.forward(p, &input, h, w);
        for (o, b) in self.cond_bias(&cond).into_iter().enumerate() {
            z1[o * hw..(o + 1) * hw].iter_mut().for_each(|v| *v += b);
        }
        let inject = |z: &mut Vec<f32>, i: usize| {
            if let Some(c) = ctrl {
                z.iter_mut().zip(&c[i]).for_each(|(a, b)| *a += b);
            }
        };
        inject(&mut z1, 0);
        let a1: Vec<f32> = z1.iter().map(|&v| silu(v)).collect();
        let (mut z2, k2) = c2.forward(p, &a1, h, w);
        inject(&mut z2, 1);
        let a2: Vec<f32> = z2.iter().zip(&a1).map(|(&v, &r)| silu(v) + r).collect();
        let (mut z3, k3) = c3.forward(p, &a2, h, w);
        inject(&mut z3, 2);
        let a3: Vec<f32> = z3.iter().zip(&a2).map(|(&v, &r)| silu(v) + r).collect();
        let (z4, k4) = c4.forward(p, &a3, h, w);
        let a4: Vec<f32> = z4.iter().zip(&a3).map(|(&v, &r)| silu(v) + r).collect();
        let (out, k5) = c5.forward(p, &a4, h, w);
        Ok((
            out,
            BaseTape {
                h,
                w,
                cond,
                cols: [k1, k2, k3, k4, k5],
                pre: [z1, z2, z3, z4],
            },
        ))
    }

    /// Gradients with respect to the three control residuals; parameter
    /// gradients are accumulated into `grad` when given.
    pub fn backward(&self, tape: &BaseTape, d_out: &[f32], mut grad: Option<&mut [f32]>) -> Vec<Vec<f32>> {
        let (h, w) = (tape.h, tape.w);
        let p = &self.params;
        let [c1, c2, c3, c4, c5] = self.convs;
        let [z1, z2, z3, z4] = &tape.pre;
        let [k1, k2, k3, k4, k5] = &tape.cols;
        let act = |z: &[f32], d: &[f32]| -> Vec<f32> { z.iter().zip(d).map(|(&z, &d)| d * silu_grad(z)).collect() };

        let d_a4 = c5.backward(p, k5, d_out, h, w, grad.as_deref_mut(), true).unwrap();
        let d_z4 = act(z4, &d_a4);
        let mut d_a3 = c4.backward(p, k4, &d_z4, h, w, grad.as_deref_mut(), true).unwrap();
        d_a3.iter_mut().zip(&d_a4).for_each(|(a, b)| *a += b);
        let d_z3 = act(z3, &d_a3);
        let mut d_a2 = c3.backward(p, k3, &d_z3, h, w, grad.as_deref_mut(), true).unwrap();
        d_a2.iter_mut().zip(&d_a3).for_each(|(a, b)| *a += b);
        let d_z2 = act(z2, &d_a2);
        let mut d_a1 = c2.backward(p, k2, &d_z2, h, w, grad.as_deref_mut(), true).unwrap();
        d_a1.iter_mut().zip(&d_a2).for_each(|(a, b)| *a += b);
        let d_z1 = act(z1, &d_a1);
        if let Some(g) = grad {
            c1.backward(p, k1, &d_z1, h, w, Some(&mut *g), false);
            let hw = h * w;
            let d = self.config.cond_dim;
            for o in 0..self.config.hidden {
                let s = super::nn::sum(&d_z1[o * hw..(o + 1) * hw]);
                for j in 0..d {
                    g[self.cond_offset + o * d + j] += s * tape.cond[j];
                }
            }
        }
        vec![d_z1, d_z2, d_z3]
    }
}

impl Denoiser for ToyBase {
    fn predict_noise(
        &self,
        x_t: &LatentGrid,
        t: usize,
        cond: &Conditioning,
        inpaint: Option<&InpaintChannels>,
        control: Option<&[LatentGrid]>,
    ) -> Result<LatentGrid> {
        let ctrl: Option<Vec<Vec<f32>>> = control.map(|c| c.iter().map(to_f32).collect());
        let (out, _) = self.run(x_t, t, cond, inpaint, ctrl.as_deref())?;
        LatentGrid::from_vec(x_t.shape(), out.into_iter().map(f64::from).collect())
    }
}

/// Depth-conditioned branch producing one residual per base block through
/// zero-initialized 1x1 convolutions.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyControl {
    config: ToyConfig,
    convs: [Conv; 3],
    zero: [Conv; 3],
    params: Vec<f32>,
}

#[derive(Debug, Clone)]
pub struct ControlTape {
    h: usize,
    w: usize,
    cols: [Vec<f32>; 3],
    pre: [Vec<f32>; 3],
    act: [Vec<f32>; 3],
}

impl ToyControl {
    pub const INPUTS: usize = 3;

    fn layout(config: &ToyConfig) -> ([Conv; 3], [Conv; 3], usize) {
        let hd = config.hidden;
        let mut off = 0;
        let convs = [
            Conv::new(Self::INPUTS, hd, 3, 1, &mut off),
            Conv::new(hd, hd, 3, 2, &mut off),
            Conv::new(hd, hd, 3, 4, &mut off),
        ];
        let zero = [
            Conv::new(hd, hd, 1, 1, &mut off),
            Conv::new(hd, hd, 1, 1, &mut off),
            Conv::new(hd, hd, 1, 1, &mut off),
        ];
        (convs, zero, off)
    }

    pub fn new(config: ToyConfig) -> Self {
        let (convs, zero, len) = Self::layout(&config);
        let mut params = vec![0.0f32; len];
        let mut r = rng::rng(rng::sub_seed(config.seed, 0xc0de));
        for c in &convs {
            c.init(&mut params, &mut r, false);
        }
        for c in &zero {
            c.init(&mut params, &mut r, true);
        }
        Self {
            config,
            convs,
            zero,
            params,
        }
    }

    pub fn from_params(config: ToyConfig, params: Vec<f32>) -> Result<Self> {
        let (convs, zero, len) = Self::layout(&config);
        if params.len() != len {
            return Err(Error::shape(len, params.len()));
        }
        Ok(Self {
            config,
            convs,
            zero,
            params,
        })
    }

    pub fn config(&self) -> ToyConfig {
        self.config
    }

    pub fn params(&self) -> &[f32] {
        &self.params
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save("toy-control", self.config, &self.params, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = load("toy-control", path)?;
        Self::from_params(s.config, s.params)
    }

    pub fn run(&self, control: &LatentGrid, x_t: &LatentGrid, t: usize) -> Result<(Vec<Vec<f32>>, ControlTape)> {
        let (h, w) = check_single_channel(x_t)?;
        if control.shape() != x_t.shape() {
            return Err(Error::shape(x_t.shape(), control.shape()));
        }
        let hw = h * w;
        let mut input = to_f32(control);
        input.extend(to_f32(x_t));
        input.extend(plane(noise_level(t, self.config.steps), hw));
        let p = &self.params;
        let [c1, c2, c3] = self.convs;

        let (q1, k1) = c1.forward(p, &input, h, w);
        let y1: Vec<f32> = q1.iter().map(|&v| silu(v)).collect();
        let (q2, k2) = c2.forward(p, &y1, h, w);
        let y2: Vec<f32> = q2.iter().zip(&y1).map(|(&v, &r)| silu(v) + r).collect();
        let (q3, k3) = c3.forward(p, &y2, h, w);
        let y3: Vec<f32> = q3.iter().zip(&y2).map(|(&v, &r)| silu(v) + r).collect();
        let features = vec![
            self.zero[0].forward(p, &y1, h, w).0,
            self.zero[1].forward(p, &y2, h, w).0,
            self.zero[2].forward(p, &y3, h, w).0,
        ];
        Ok((
            features,
            ControlTape {
                h,
                w,
                cols: [k1, k2, k3],
                pre: [q1, q2, q3],
                act: [y1, y2, y3],
            },
        ))
    }

    pub fn backward(&self, tape: &ControlTape, d_features: &[Vec<f32>], grad: &mut [f32]) {
        let (h, w) = (tape.h, tape.w);
        let p = &self.params;
        let [c1, c2, c3] = self.convs;
        let [z1, z2, z3] = self.zero;
        let [q1, q2, q3] = &tape.pre;
        let [y1, y2, y3] = &tape.act;
        let [k1, k2, k3] = &tape.cols;
        let act = |z: &[f32], d: &[f32]| -> Vec<f32> { z.iter().zip(d).map(|(&z, &d)| d * silu_grad(z)).collect() };
        let add = |a: &mut Vec<f32>, b: &[f32]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);

        let d_y3 = z3.backward(p, y3, &d_features[2], h, w, Some(&mut *grad), true).unwrap();
        let d_q3 = act(q3, &d_y3);
        let mut d_y2 = z2.backward(p, y2, &d_features[1], h, w, Some(&mut *grad), true).unwrap();
        add(&mut d_y2, &d_y3);
        add(&mut d_y2, &c3.backward(p, k3, &d_q3, h, w, Some(&mut *grad), true).unwrap());
        let d_q2 = act(q2, &d_y2);
        let mut d_y1 = z1.backward(p, y1, &d_features[0], h, w, Some(&mut *grad), true).unwrap();
        add(&mut d_y1, &d_y2);
        add(&mut d_y1, &c2.backward(p, k2, &d_q2, h, w, Some(&mut *grad), true).unwrap());
        let d_q1 = act(q1, &d_y1);
        c1.backward(p, k1, &d_q1, h, w, Some(&mut *grad), false);
    }
}

impl ControlBranch for ToyControl {
    fn features(&self, control: &LatentGrid, x_t: &LatentGrid, t: usize, _cond: &Conditioning) -> Result<Vec<LatentGrid>> {
        let (f, _) = self.run(control, x_t, t)?;
        let (h, w) = x_t.spatial();
        f.into_iter()
            .map(|v| LatentGrid::from_vec((self.config.hidden, h, w), v.into_iter().map(f64::from).collect()))
            .collect()
    }
}

/// A frozen base plus its trainable control branch.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    pub base: ToyBase,
    pub control: ToyControl,
}

impl ToyModel {
    pub fn new(config: ToyConfig) -> Self {
        Self {
            base: ToyBase::new(config),
            control: ToyControl::new(config),
        }
    }
}

pub struct ToyTape {
    base: BaseTape,
    control: ControlTape,
    strength: f32,
}

impl TrainableControl for ToyModel {
    type Tape = ToyTape;

    fn params(&self) -> &[f32] {
        &self.control.params
    }

    fn params_mut(&mut self) -> &mut [f32] {
        &mut self.control.params
    }

    fn frozen_bytes(&self) -> Vec<u8> {
        self.base.params.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    fn forward(&self, input: &TrainInput) -> Result<(LatentGrid, ToyTape)> {
        let s = input.strength as f32;
        let (mut f, control) = self.control.run(&input.control, &input.x_t, input.t)?;
        f.iter_mut().flatten().for_each(|v| *v *= s);
        let (out, base) = self.base.run(&input.x_t, input.t, &input.cond, Some(&input.inpaint), Some(&f))?;
        let pred = LatentGrid::from_vec(input.x_t.shape(), out.into_iter().map(f64::from).collect())?;
        Ok((pred, ToyTape { base, control, strength: s }))
    }

    fn backward(&self, tape: ToyTape, d_eps: &LatentGrid) -> Result<Vec<f64>> {
        let d_out = to_f32(d_eps);
        let mut d_f = self.base.backward(&tape.base, &d_out, None);
        d_f.iter_mut().flatten().for_each(|v| *v *= tape.strength);
        let mut grad = vec![0.0f32; self.control.params.len()];
        self.control.backward(&tape.control, &d_f, &mut grad);
        Ok(grad.into_iter().map(f64::from).collect())
    }
}
