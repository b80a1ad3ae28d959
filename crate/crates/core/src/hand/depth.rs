//! Z-buffered depth rendering of hand meshes with per-hand normalization.
//!
//! Each hand is rasterized into its own depth buffer, remapped so its nearest
//! rendered surface reads 1.0 and its furthest 0.2, and the hands are then
//! composited nearest-surface-wins. Background pixels are 0.

use std::path::Path;

use image::{ImageBuffer, Luma};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{LatentGrid, Mask};

use super::{Mesh, PinholeCamera};

pub const DEPTH_NEAR: f64 = 1.0;
pub const DEPTH_FAR: f64 = 0.2;

/// Relative depth span below which a hand counts as flat and maps to 1.0.
const FLAT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthMap {
    values: Array2<f64>,
}

impl DepthMap {
    pub fn new(values: Array2<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::new(Array2::zeros((height, width)))
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn coverage(&self) -> Mask {
        Mask::new(self.values.mapv(|v| v != 0.0))
    }

    pub fn to_grid(&self) -> LatentGrid {
        LatentGrid::from_plane(self.values.clone())
    }

    /// True when every value is 0 or lies in `[0.2, 1.0]`.
    pub fn values_in_range(&self) -> bool {
        self.values
            .iter()
            .all(|&v| v == 0.0 || (DEPTH_FAR..=DEPTH_NEAR).contains(&v))
    }

    /// 16-bit grayscale PNG with `value = round(65535 d)`.
    pub fn save_png16(&self, path: &Path) -> Result<()> {
        let (h, w) = self.dim();
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
            let d = self.values[[y as usize, x as usize]].clamp(0.0, 1.0);
            Luma([(d * 65535.0).round() as u16])
        });
        let mut bytes = Vec::new();
        buf.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)?;
        crate::io::write_atomic(path, &bytes)
    }

    pub fn load_png16(path: &Path) -> Result<Self> {
        let img = image::open(path)?.into_luma16();
        let (w, h) = img.dimensions();
        Ok(Self::new(Array2::from_shape_fn((h as usize, w as usize), |(y, x)| {
            img.get_pixel(x as u32, y as u32).0[0] as f64 / 65535.0
        })))
    }
}

/// Rendering output with the per-pixel owning hand (`None` for background).
#[derive(Debug, Clone)]
pub struct RenderedHands {
    pub depth: DepthMap,
    pub owner: Array2<Option<usize>>,
    /// Per-hand coverage before occlusion by other hands.
    pub silhouettes: Vec<Mask>,
}

/// Renders normalized depth for all meshes into one map.
pub fn render_depth<M: AsRef<Mesh>>(meshes: &[M], camera: &PinholeCamera) -> Result<DepthMap> {
    render_hands(meshes, camera).map(|r| r.depth)
}

pub fn render_hands<M: AsRef<Mesh>>(meshes: &[M], camera: &PinholeCamera) -> Result<RenderedHands> {
    camera.validate()?;
    let (h, w) = (camera.height, camera.width);
    let mut depth = Array2::zeros((h, w));
    let mut nearest = Array2::from_elem((h, w), f64::INFINITY);
    let mut owner = Array2::from_elem((h, w), None);
    let mut silhouettes = Vec::with_capacity(meshes.len());

    for (hand, mesh) in meshes.iter().enumerate() {
        let zbuf = rasterize_depth(mesh.as_ref(), camera)?;
        let covered: Vec<f64> = zbuf.iter().copied().filter(|z| z.is_finite()).collect();
        silhouettes.push(Mask::new(zbuf.mapv(f64::is_finite)));
        if covered.is_empty() {
            continue;
        }
        let zmin = covered.iter().copied().fold(f64::INFINITY, f64::min);
        let zmax = covered.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let remap = DepthRemap::new(zmin, zmax);
        for ((y, x), &z) in zbuf.indexed_iter() {
            if z < nearest[[y, x]] {
                nearest[[y, x]] = z;
                depth[[y, x]] = remap.apply(z);
                owner[[y, x]] = Some(hand);
            }
        }
    }
    Ok(RenderedHands {
        depth: DepthMap::new(depth),
        owner,
        silhouettes,
    })
}

/// Linear map from metric depth to the normalized `[0.2, 1.0]` range.
#[derive(Debug, Clone, Copy)]
pub struct DepthRemap {
    near: f64,
    far: f64,
}

impl DepthRemap {
    pub fn new(near: f64, far: f64) -> Self {
        Self { near, far }
    }

    pub fn apply(&self, z: f64) -> f64 {
        let span = self.far - self.near;
        if span <= FLAT_TOLERANCE * self.far.abs().max(1.0) {
            return DEPTH_NEAR;
        }
        let t = ((self.far - z) / span).clamp(0.0, 1.0);
        DEPTH_FAR + (DEPTH_NEAR - DEPTH_FAR) * t
    }
}

/// Metric depth per pixel (`+inf` where uncovered) for a single mesh.
///
/// Pixel centers are sampled with edge functions and a top-left fill rule;
/// depth is interpolated perspective-correctly, which equals the exact ray
/// intersection depth for planar triangles.
pub fn rasterize_depth(mesh: &Mesh, camera: &PinholeCamera) -> Result<Array2<f64>> {
    mesh.validate()?;
    let (h, w) = (camera.height, camera.width);
    let mut zbuf = Array2::from_elem((h, w), f64::INFINITY);
    let screen = super::project(&mesh.vertices, camera)?;

    for face in &mesh.faces {
        let mut v = [screen[face[0]], screen[face[1]], screen[face[2]]];
        let mut z = [mesh.vertices[face[0]][2], mesh.vertices[face[1]][2], mesh.vertices[face[2]][2]];
        let mut area = edge(v[0], v[1], v[2]);
        if area == 0.0 || !area.is_finite() {
            continue;
        }
        if area < 0.0 {
            v.swap(1, 2);
            z.swap(1, 2);
            area = -area;
        }

        let xmin = v.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let xmax = v.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        let ymin = v.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
        let ymax = v.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
        let x0 = (xmin - 0.5).ceil().max(0.0) as usize;
        let y0 = (ymin - 0.5).ceil().max(0.0) as usize;
        let x1 = ((xmax - 0.5).floor() as i64).min(w as i64 - 1);
        let y1 = ((ymax - 0.5).floor() as i64).min(h as i64 - 1);
        if x1 < 0 || y1 < 0 {
            continue;
        }
        let edges = [(v[1], v[2]), (v[2], v[0]), (v[0], v[1])];
        let top_left = edges.map(|(a, b)| is_top_left(a, b));

        for py in y0..=y1 as usize {
            for px in x0..=x1 as usize {
                let p = [px as f64 + 0.5, py as f64 + 0.5];
                let mut bary = [0.0; 3];
                let mut inside = true;
                for k in 0..3 {
                    let e = edge(edges[k].0, edges[k].1, p);
                    if e < 0.0 || (e == 0.0 && !top_left[k]) {
                        inside = false;
                        break;
                    }
                    bary[k] = e / area;
                }
                if !inside {
                    continue;
                }
                let inv_z = bary[0] / z[0] + bary[1] / z[1] + bary[2] / z[2];
                let depth = 1.0 / inv_z;
                if depth < zbuf[[py, px]] {
                    zbuf[[py, px]] = depth;
                }
            }
        }
    }
    Ok(zbuf)
}

fn edge(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

// With y pointing down and positive edge-function area, top edges run in +x
// and left edges run upwards.
fn is_top_left(a: [f64; 2], b: [f64; 2]) -> bool {
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    (dy == 0.0 && dx > 0.0) || dy < 0.0
}
