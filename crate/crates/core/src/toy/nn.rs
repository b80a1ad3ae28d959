//! Minimal convolution layers with hand-written backward passes.
//!
//! Kernels are plain loops with a fixed summation order per output element.
//! Rust never contracts `a * b + c` into a fused multiply-add on its own, so
//! results are bit-identical on every IEEE-754 target regardless of SIMD width.

use crate::rng::{self, Rng};

/// `out[m x n] += a[m x k] * b[k x n]`.
pub fn gemm_acc(a: &[f32], b: &[f32], m: usize, k: usize, n: usize, out: &mut [f32]) {
    for i in 0..m {
        let o = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let w = a[i * k + p];
            if w == 0.0 {
                continue;
            }
            let row = &b[p * n..(p + 1) * n];
            for (x, &y) in o.iter_mut().zip(row) {
                *x += w * y;
            }
        }
    }
}

/// `out[k x n] += a[m x k]^T * b[m x n]`.
pub fn gemm_at_acc(a: &[f32], b: &[f32], m: usize, k: usize, n: usize, out: &mut [f32]) {
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let w = a[i * k + p];
            if w == 0.0 {
                continue;
            }
            let o = &mut out[p * n..(p + 1) * n];
            for (x, &y) in o.iter_mut().zip(brow) {
                *x += w * y;
            }
        }
    }
}

const LANES: usize = 8;

/// Dot product with eight fixed-order partial sums.
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; LANES];
    let chunks = a.len() / LANES;
    for c in 0..chunks {
        let (x, y) = (&a[c * LANES..(c + 1) * LANES], &b[c * LANES..(c + 1) * LANES]);
        for l in 0..LANES {
            acc[l] += x[l] * y[l];
        }
    }
    let mut s = 0.0f32;
    for i in chunks * LANES..a.len() {
        s += a[i] * b[i];
    }
    acc.iter().sum::<f32>() + s
}

pub fn sum(a: &[f32]) -> f32 {
    let mut acc = [0.0f32; LANES];
    let chunks = a.len() / LANES;
    for c in 0..chunks {
        for l in 0..LANES {
            acc[l] += a[c * LANES + l];
        }
    }
    acc.iter().sum::<f32>() + a[chunks * LANES..].iter().sum::<f32>()
}

pub fn silu(x: f32) -> f32 {
    x / (1.0 + (-x).exp())
}

pub fn silu_grad(x: f32) -> f32 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

/// A same-padded 2-D convolution stored at `offset` inside a flat parameter
/// vector: `cout * cin * k * k` weights, then `cout` biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv {
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub dil: usize,
    pub offset: usize,
}

impl Conv {
    pub fn new(cin: usize, cout: usize, k: usize, dil: usize, offset: &mut usize) -> Self {
        let c = Self { cin, cout, k, dil, offset: *offset };
        *offset += c.len();
        c
    }

    pub fn len(&self) -> usize {
        self.cout * self.fan_in() + self.cout
    }

    pub fn fan_in(&self) -> usize {
        self.cin * self.k * self.k
    }

    fn weights<'a>(&self, p: &'a [f32]) -> &'a [f32] {
        &p[self.offset..self.offset + self.cout * self.fan_in()]
    }

    fn bias<'a>(&self, p: &'a [f32]) -> &'a [f32] {
        let w = self.offset + self.cout * self.fan_in();
        &p[w..w + self.cout]
    }

    /// He-style normal weights and zero bias, or all zeros.
    pub fn init(&self, p: &mut [f32], r: &mut Rng, zero: bool) {
        let n = self.cout * self.fan_in();
        let scale = (2.0 / self.fan_in() as f64).sqrt();
        for v in &mut p[self.offset..self.offset + n] {
            *v = if zero { 0.0 } else { (rng::standard_normal(r) * scale) as f32 };
        }
        for v in &mut p[self.offset + n..self.offset + self.len()] {
            *v = 0.0;
        }
    }

    /// Column matrix `[cin * k * k, h * w]` of `input` (`[cin, h * w]`).
    pub fn im2col(&self, input: &[f32], h: usize, w: usize) -> Vec<f32> {
        if self.k == 1 {
            return input.to_vec();
        }
        let hw = h * w;
        let half = (self.k / 2) as isize;
        let mut cols = vec![0.0f32; self.fan_in() * hw];
        for c in 0..self.cin {
            let plane = &input[c * hw..(c + 1) * hw];
            for ky in 0..self.k {
                let dy = (ky as isize - half) * self.dil as isize;
                for kx in 0..self.k {
                    let dx = (kx as isize - half) * self.dil as isize;
                    let row = (c * self.k + ky) * self.k + kx;
                    let dst = &mut cols[row * hw..(row + 1) * hw];
                    for y in 0..h {
                        let sy = y as isize + dy;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let (x0, x1) = ((-dx).max(0) as usize, (w as isize - dx).min(w as isize).max(0) as usize);
                        for x in x0..x1 {
                            dst[y * w + x] = plane[sy as usize * w + (x as isize + dx) as usize];
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, cols: &[f32], h: usize, w: usize) -> Vec<f32> {
        if self.k == 1 {
            return cols.to_vec();
        }
        let hw = h * w;
        let half = (self.k / 2) as isize;
        let mut out = vec![0.0f32; self.cin * hw];
        for c in 0..self.cin {
            for ky in 0..self.k {
                let dy = (ky as isize - half) * self.dil as isize;
                for kx in 0..self.k {
                    let dx = (kx as isize - half) * self.dil as isize;
                    let row = (c * self.k + ky) * self.k + kx;
                    let src = &cols[row * hw..(row + 1) * hw];
                    let plane = &mut out[c * hw..(c + 1) * hw];
                    for y in 0..h {
                        let sy = y as isize + dy;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let (x0, x1) = ((-dx).max(0) as usize, (w as isize - dx).min(w as isize).max(0) as usize);
                        for x in x0..x1 {
                            plane[sy as usize * w + (x as isize + dx) as usize] += src[y * w + x];
                        }
                    }
                }
            }
        }
        out
    }

    /// Output `[cout, h * w]` and the column matrix needed for backward.
    pub fn forward(&self, p: &[f32], input: &[f32], h: usize, w: usize) -> (Vec<f32>, Vec<f32>) {
        let hw = h * w;
        let cols = self.im2col(input, h, w);
        let mut out = vec![0.0f32; self.cout * hw];
        for (o, &b) in self.bias(p).iter().enumerate() {
            out[o * hw..(o + 1) * hw].fill(b);
        }
        gemm_acc(self.weights(p), &cols, self.cout, self.fan_in(), hw, &mut out);
        (out, cols)
    }

    /// Accumulates parameter gradients into `grad` (same layout as the
    /// parameter vector) when given, and returns the input gradient when
    /// `want_input` is set.
    pub fn backward(
        &self,
        p: &[f32],
        cols: &[f32],
        d_out: &[f32],
        h: usize,
        w: usize,
        grad: Option<&mut [f32]>,
        want_input: bool,
    ) -> Option<Vec<f32>> {
        let hw = h * w;
        let fan = self.fan_in();
        if let Some(g) = grad {
            for o in 0..self.cout {
                let dor = &d_out[o * hw..(o + 1) * hw];
                for q in 0..fan {
                    g[self.offset + o * fan + q] += dot(dor, &cols[q * hw..(q + 1) * hw]);
                }
                g[self.offset + self.cout * fan + o] += sum(dor);
            }
        }
        want_input.then(|| {
            let mut d_cols = vec![0.0f32; fan * hw];
            gemm_at_acc(self.weights(p), d_out, self.cout, fan, hw, &mut d_cols);
            self.col2im(&d_cols, h, w)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loss(conv: &Conv, p: &[f32], x: &[f32], h: usize, w: usize, g: &[f32]) -> f64 {
        let (y, _) = conv.forward(p, x, h, w);
        y.iter().zip(g).map(|(a, b)| (*a as f64) * (*b as f64)).sum()
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let (h, w) = (5, 6);
        let mut off = 0;
        let conv = Conv::new(2, 3, 3, 2, &mut off);
        let mut r = rng::rng(4);
        let mut p = vec![0.0f32; off];
        conv.init(&mut p, &mut r, false);
        for v in &mut p[conv.offset + conv.cout * conv.fan_in()..] {
            *v = 0.1;
        }
        let x: Vec<f32> = (0..2 * h * w).map(|_| rng::standard_normal(&mut r) as f32).collect();
        let g: Vec<f32> = (0..3 * h * w).map(|_| rng::standard_normal(&mut r) as f32).collect();
        let (_, cols) = conv.forward(&p, &x, h, w);
        let mut gp = vec![0.0f32; off];
        let gx = conv.backward(&p, &cols, &g, h, w, Some(&mut gp), true).unwrap();
        let eps = 1e-2f32;
        for i in [0, 5, 17, 40, off - 1] {
            let mut a = p.clone();
            a[i] += eps;
            let mut b = p.clone();
            b[i] -= eps;
            let fd = (loss(&conv, &a, &x, h, w, &g) - loss(&conv, &b, &x, h, w, &g)) / (2.0 * eps as f64);
            assert!((fd - gp[i] as f64).abs() < 1e-2 * (1.0 + fd.abs()), "param {i}: {fd} vs {}", gp[i]);
        }
        for i in [0, 7, 29, 59] {
            let mut a = x.clone();
            a[i] += eps;
            let mut b = x.clone();
            b[i] -= eps;
            let fd = (loss(&conv, &p, &a, h, w, &g) - loss(&conv, &p, &b, h, w, &g)) / (2.0 * eps as f64);
            assert!((fd - gx[i] as f64).abs() < 1e-2 * (1.0 + fd.abs()), "input {i}: {fd} vs {}", gx[i]);
        }
    }

    #[test]
    fn identity_kernel() {
        let mut off = 0;
        let conv = Conv::new(1, 1, 3, 1, &mut off);
        let mut p = vec![0.0f32; off];
        p[4] = 1.0;
        let x: Vec<f32> = (0..12).map(|v| v as f32).collect();
        assert_eq!(conv.forward(&p, &x, 3, 4).0, x);
    }

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f32> = (0..37).map(|v| v as f32 * 0.5).collect();
        let b: Vec<f32> = (0..37).map(|v| 1.0 - v as f32 * 0.1).collect();
        let naive: f32 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-3);
        assert_eq!(sum(&a), a.iter().sum::<f32>());
    }
}
