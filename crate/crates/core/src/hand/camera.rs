use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pinhole intrinsics in pixels. Pixel `(i, j)` has its center at
/// `(i + 0.5, j + 0.5)` in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinholeCamera {
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl PinholeCamera {
    pub fn new(focal: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let cam = Self { focal, cx, cy, width, height };
        cam.validate()?;
        Ok(cam)
    }

    /// Focal length `max(W, H)` with the principal point at the image center.
    pub fn default_for(width: usize, height: usize) -> Self {
        Self {
            focal: width.max(height) as f64,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal > 0.0) || !self.focal.is_finite() {
            return Err(Error::Config(format!("focal length must be positive, got {}", self.focal)));
        }
        if !(0.0..=self.width as f64).contains(&self.cx) || !(0.0..=self.height as f64).contains(&self.cy) {
            return Err(Error::Config("principal point lies outside the image".into()));
        }
        Ok(())
    }

    pub fn project_point(&self, p: [f64; 3]) -> Option<[f64; 2]> {
        (p[2] > 0.0).then(|| [self.focal * p[0] / p[2] + self.cx, self.focal * p[1] / p[2] + self.cy])
    }

    /// Camera-frame point at depth `z` that projects to pixel coordinate `(u, v)`.
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> [f64; 3] {
        [(u - self.cx) * z / self.focal, (v - self.cy) * z / self.focal, z]
    }
}

/// Projects camera-frame points; fails on the first nonpositive depth.
pub fn project(points: &[[f64; 3]], camera: &PinholeCamera) -> Result<Vec<[f64; 2]>> {
    points
        .iter()
        .enumerate()
        .map(|(index, &p)| camera.project_point(p).ok_or(Error::Projection { index, depth: p[2] }))
        .collect()
}
