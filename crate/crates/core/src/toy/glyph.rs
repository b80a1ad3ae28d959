use std::f64::consts::PI;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{Image, LatentGrid, Mask};
use crate::hand::{render_depth, DepthMap, Mesh, PinholeCamera};
use crate::io::{save_image, save_mask};
use crate::rng::{self, sub_seed, Rng};
use crate::training::{write_manifest, ManifestRecord, RecordStyle, TrainSample};

pub const GLYPH_SIZE: usize = 64;
pub const BACKGROUND: f64 = 0.1;
pub const FOREGROUND_THRESHOLD: f64 = 0.35;
/// Mask dilation used for glyph scenes, smaller than the full-size default.
pub const GLYPH_DILATION: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prong {
    pub angle: f64,
    pub length: f64,
    pub half_width: f64,
}

/// A palm disc with radial finger-like prongs, plus surface tilt and stripe
/// texture parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlyphGeometry {
    pub center: [f64; 2],
    pub palm_radius: f64,
    pub prongs: Vec<Prong>,
    pub depth: f64,
    pub tilt: [f64; 2],
    pub texture: [f64; 3],
}

impl GlyphGeometry {
    pub fn random(r: &mut Rng) -> Self {
        let k = r.random_range(3..=6);
        let c = GLYPH_SIZE as f64 / 2.0;
        let center = [c + r.random_range(-5.0..5.0), c + r.random_range(-5.0..5.0)];
        let palm_radius = r.random_range(7.0..10.0);
        let heading: f64 = r.random_range(0.0..2.0 * PI);
        let spread = 0.55;
        let prongs = (0..k)
            .map(|i| Prong {
                angle: heading + (i as f64 - (k - 1) as f64 / 2.0) * spread + r.random_range(-0.1..0.1),
                length: r.random_range(9.0..14.0),
                half_width: r.random_range(1.6..2.6),
            })
            .collect();
        Self {
            center,
            palm_radius,
            prongs,
            depth: r.random_range(2.5..3.5),
            tilt: [r.random_range(-0.01..0.01), r.random_range(-0.01..0.01)],
            texture: [r.random_range(0.0..PI), r.random_range(3.0..5.0), r.random_range(0.0..2.0 * PI)],
        }
    }

    pub fn prong_count(&self) -> usize {
        self.prongs.len()
    }

    /// Same palm with one prong added or removed and the fan re-spread.
    pub fn malformed(&self, r: &mut Rng) -> Self {
        let k = self.prong_count();
        let new_k = if k >= 6 || (k > 3 && r.random_bool(0.5)) { k - 1 } else { k + 1 };
        let heading = self.prongs.iter().map(|p| p.angle).sum::<f64>() / k as f64 + r.random_range(-0.6..0.6);
        let spread = r.random_range(0.4..0.7);
        let template = self.prongs[0];
        let prongs = (0..new_k)
            .map(|i| Prong {
                angle: heading + (i as f64 - (new_k - 1) as f64 / 2.0) * spread,
                length: template.length * r.random_range(0.7..1.2),
                ..template
            })
            .collect();
        Self { prongs, ..self.clone() }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        if dx.hypot(dy) <= self.palm_radius {
            return true;
        }
        self.prongs.iter().any(|p| {
            let (ux, uy) = (p.angle.cos(), p.angle.sin());
            let along = dx * ux + dy * uy;
            let across = (dx * uy - dy * ux).abs();
            (0.0..=self.palm_radius + p.length).contains(&along) && across <= p.half_width
        })
    }

    /// Pixels whose centers lie inside the glyph.
    pub fn coverage(&self) -> Mask {
        Mask::from_fn(GLYPH_SIZE, GLYPH_SIZE, |y, x| self.contains(x as f64 + 0.5, y as f64 + 0.5))
    }

    pub fn caption(&self) -> String {
        format!("a hand glyph with {} fingers", self.prong_count())
    }

    fn surface_depth(&self, u: f64, v: f64) -> f64 {
        self.depth + self.tilt[0] * (u - self.center[0]) + self.tilt[1] * (v - self.center[1])
    }

    /// Tilted surface made of two triangles per covered pixel, with vertices
    /// unprojected from pixel corners so the silhouette equals [`coverage`].
    ///
    /// [`coverage`]: Self::coverage
    pub fn mesh(&self, camera: &PinholeCamera) -> Result<Mesh> {
        let cov = self.coverage();
        let n = GLYPH_SIZE + 1;
        let mut index = vec![usize::MAX; n * n];
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        let mut vid = |x: usize, y: usize, vertices: &mut Vec<[f64; 3]>| {
            let slot = &mut index[y * n + x];
            if *slot == usize::MAX {
                let (u, v) = (x as f64, y as f64);
                *slot = vertices.len();
                vertices.push(camera.unproject(u, v, self.surface_depth(u, v)));
            }
            *slot
        };
        for y in 0..GLYPH_SIZE {
            for x in 0..GLYPH_SIZE {
                if cov.get(y, x) {
                    let a = vid(x, y, &mut vertices);
                    let b = vid(x + 1, y, &mut vertices);
                    let c = vid(x + 1, y + 1, &mut vertices);
                    let d = vid(x, y + 1, &mut vertices);
                    faces.push([a, b, c]);
                    faces.push([a, c, d]);
                }
            }
        }
        Mesh::new(vertices, faces)
    }

    /// Grayscale rendering: flat background and a striped interior.
    pub fn render(&self) -> Image {
        let [angle, period, phase] = self.texture;
        let (ca, sa) = (angle.cos(), angle.sin());
        let cov = self.coverage();
        let mut img = LatentGrid::filled(1, GLYPH_SIZE, GLYPH_SIZE, BACKGROUND);
        let d = img.data_mut();
        for y in 0..GLYPH_SIZE {
            for x in 0..GLYPH_SIZE {
                if cov.get(y, x) {
                    let s = (x as f64 * ca + y as f64 * sa) * 2.0 * PI / period + phase;
                    d[[0, y, x]] = 0.65 + 0.2 * s.sin();
                }
            }
        }
        img
    }
}

pub fn glyph_camera() -> PinholeCamera {
    PinholeCamera::default_for(GLYPH_SIZE, GLYPH_SIZE)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlyphSample {
    pub image: Image,
    pub depth: DepthMap,
    pub mask: Mask,
    pub caption: String,
    pub geometry: GlyphGeometry,
}

impl GlyphSample {
    pub fn from_geometry(geometry: GlyphGeometry) -> Result<Self> {
        let depth = render_depth(&[geometry.mesh(&glyph_camera())?], &glyph_camera())?;
        Ok(Self {
            image: geometry.render(),
            mask: geometry.coverage(),
            caption: geometry.caption(),
            depth,
            geometry,
        })
    }

    pub fn generate(seed: u64) -> Result<Self> {
        Self::from_geometry(GlyphGeometry::random(&mut rng::rng(seed)))
    }

    pub fn prong_count(&self) -> usize {
        self.geometry.prong_count()
    }
}

pub fn generate_glyph_dataset(n: usize, seed: u64) -> Result<Vec<GlyphSample>> {
    (0..n).map(|i| GlyphSample::generate(sub_seed(seed, i as u64))).collect()
}

/// Writes images, 16-bit depth, masks, a JSON-lines manifest and structure
/// labels under `dir`. Output bytes depend only on `(n, seed)`.
pub fn write_glyph_dataset(dir: &Path, n: usize, seed: u64) -> Result<Vec<ManifestRecord>> {
    std::fs::create_dir_all(dir)?;
    let mut records = Vec::with_capacity(n);
    let mut labels = String::new();
    for (i, s) in generate_glyph_dataset(n, seed)?.into_iter().enumerate() {
        let stem = format!("glyph_{i:05}");
        let rec = ManifestRecord {
            rgb: format!("{stem}_rgb.png").into(),
            depth: format!("{stem}_depth.png").into(),
            seg: format!("{stem}_seg.png").into(),
            caption: s.caption.clone(),
            style: RecordStyle::Resize,
        };
        save_image(&s.image, &dir.join(&rec.rgb))?;
        s.depth.save_png16(&dir.join(&rec.depth))?;
        save_mask(&s.mask, &dir.join(&rec.seg))?;
        labels.push_str(&serde_json::to_string(&s.geometry)?);
        labels.push('\n');
        records.push(rec);
    }
    write_manifest(&dir.join("manifest.jsonl"), &records)?;
    crate::io::write_atomic(&dir.join("labels.jsonl"), labels.as_bytes())?;
    Ok(records)
}

/// Foreground pixels of an image (channel mean above the glyph threshold).
pub fn glyph_foreground(image: &Image) -> Mask {
    crate::hand::foreground(image, FOREGROUND_THRESHOLD)
}

/// `1 - IoU` between the image foreground and the target region; `0` when
/// both are empty.
pub fn structure_error(image: &Image, target: &Mask) -> f64 {
    let fg = glyph_foreground(image);
    let inter = fg.intersection_count(target);
    let union = fg.count() + target.count() - inter;
    if union == 0 {
        0.0
    } else {
        1.0 - inter as f64 / union as f64
    }
}

/// Training pair: the correct glyph as target, with a mask covering both it
/// and a malformed variant so the loss sees the same regions as rectification.
pub fn glyph_train_sample(seed: u64) -> Result<TrainSample> {
    let mut r = rng::rng(seed);
    let target = GlyphGeometry::random(&mut r);
    let bad = target.malformed(&mut r);
    let s = GlyphSample::from_geometry(target)?;
    let mask = s.mask.union(&bad.coverage())?.dilate(GLYPH_DILATION);
    Ok(TrainSample {
        rgb: s.image,
        hand_mask: mask,
        depth: s.depth,
        caption: s.caption,
    })
}
