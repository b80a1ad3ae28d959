//! File helpers: atomic writes and PNG conversion for grids and masks.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, Luma, Rgb, RgbImage};
use ndarray::Array3;

use crate::error::{Error, Result};
use crate::grid::{Image, LatentGrid, Mask};

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile_in(dir, path)?;
    tmp.1.write_all(bytes)?;
    tmp.1.sync_all()?;
    drop(tmp.1);
    fs::rename(&tmp.0, path)?;
    Ok(())
}

fn tempfile_in(dir: &Path, target: &Path) -> Result<(std::path::PathBuf, fs::File)> {
    let name = target.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    for attempt in 0..1000u32 {
        let p = dir.join(format!(".{name}.{}.{attempt}.tmp", std::process::id()));
        match fs::OpenOptions::new().write(true).create_new(true).open(&p) {
            Ok(f) => return Ok((p, f)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(Error::Io(std::io::Error::other("could not create temporary file")))
}

/// Loads a PNG as a grid with values in `[0, 1]`: one channel for grayscale
/// inputs, three otherwise.
pub fn load_image(path: &Path) -> Result<Image> {
    let img = image::open(path)?;
    Ok(from_dynamic(&img))
}

pub fn from_dynamic(img: &DynamicImage) -> Image {
    let gray = matches!(
        img.color(),
        image::ColorType::L8 | image::ColorType::L16 | image::ColorType::La8 | image::ColorType::La16
    );
    if gray {
        let g = img.to_luma8();
        let (w, h) = g.dimensions();
        LatentGrid::new(Array3::from_shape_fn((1, h as usize, w as usize), |(_, y, x)| {
            g.get_pixel(x as u32, y as u32).0[0] as f64 / 255.0
        }))
    } else {
        let c = img.to_rgb8();
        let (w, h) = c.dimensions();
        LatentGrid::new(Array3::from_shape_fn((3, h as usize, w as usize), |(k, y, x)| {
            c.get_pixel(x as u32, y as u32).0[k] as f64 / 255.0
        }))
    }
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode_png(image: &Image) -> Result<Vec<u8>> {
    let (c, h, w) = image.shape();
    let d = image.data();
    let dynamic = match c {
        1 => DynamicImage::ImageLuma8(GrayImage::from_fn(w as u32, h as u32, |x, y| {
            Luma([quantize(d[[0, y as usize, x as usize]])])
        })),
        3 => DynamicImage::ImageRgb8(RgbImage::from_fn(w as u32, h as u32, |x, y| {
            let (x, y) = (x as usize, y as usize);
            Rgb([quantize(d[[0, y, x]]), quantize(d[[1, y, x]]), quantize(d[[2, y, x]])])
        })),
        other => return Err(Error::shape("1 or 3 channels", other)),
    };
    let mut bytes = Vec::new();
    dynamic.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)?;
    Ok(bytes)
}

/// Saves with 8-bit quantization `round(255 v)`.
pub fn save_image(image: &Image, path: &Path) -> Result<()> {
    write_atomic(path, &encode_png(image)?)
}

/// Loads a mask PNG; any nonzero pixel marks the hand.
pub fn load_mask(path: &Path) -> Result<Mask> {
    let g = image::open(path)?.to_luma8();
    let (w, h) = g.dimensions();
    Ok(Mask::from_fn(h as usize, w as usize, |y, x| g.get_pixel(x as u32, y as u32).0[0] != 0))
}

pub fn save_mask(mask: &Mask, path: &Path) -> Result<()> {
    let (h, w) = mask.dim();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_fn(w as u32, h as u32, |x, y| Luma([if mask.get(y as usize, x as usize) { 255 } else { 0 }]));
    let mut bytes = Vec::new();
    buf.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)?;
    write_atomic(path, &bytes)
}
