//! Raster files in and out, and atomic file writes.

use std::io::Write;
use std::path::Path;

use image::imageops::{self, FilterType};
use image::{ImageBuffer, ImageFormat, Rgb32FImage, RgbImage};
use vectorforge_core::RasterImage;

use crate::error::{CliError, CliResult};

/// Writes `bytes` to a temp file next to `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Decodes a PNG or JPEG, composites alpha over white and resizes
/// (bilinear) to `size` when given.
pub fn load_raster(path: &Path, size: Option<(usize, usize)>) -> CliResult<RasterImage> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let format = image::guess_format(&bytes).map_err(|e| CliError::format(path, e.to_string()))?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Jpeg) {
        return Err(CliError::format(path, format!("unsupported image format {format:?}; expected PNG or JPEG")));
    }
    let decoded = image::load_from_memory_with_format(&bytes, format)
        .map_err(|e| CliError::format(path, e.to_string()))?
        .into_rgba32f();
    let (w, h) = decoded.dimensions();
    let flat: Rgb32FImage = ImageBuffer::from_fn(w, h, |x, y| {
        let [r, g, b, a] = decoded.get_pixel(x, y).0;
        image::Rgb([r * a + (1.0 - a), g * a + (1.0 - a), b * a + (1.0 - a)])
    });
    let flat = match size {
        Some((tw, th)) if (tw as u32, th as u32) != (w, h) => {
            imageops::resize(&flat, tw as u32, th as u32, FilterType::Triangle)
        }
        _ => flat,
    };
    let (w, h) = flat.dimensions();
    let data = flat.into_raw().into_iter().map(|v| (v as f64).clamp(0.0, 1.0)).collect();
    RasterImage::from_raw(w as usize, h as usize, data).map_err(|e| CliError::format(path, e.to_string()))
}

pub fn to_rgb8(img: &RasterImage) -> RgbImage {
    let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    ImageBuffer::from_fn(img.width() as u32, img.height() as u32, |x, y| {
        let c = img.pixel(x as usize, y as usize);
        image::Rgb([q(c.r), q(c.g), q(c.b)])
    })
}

pub fn save_png(img: &RgbImage, path: &Path) -> CliResult<()> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .map_err(|e| CliError::format(path, e.to_string()))?;
    write_atomic(path, buf.get_ref())
}

/// Frames side by side, left to right.
pub fn strip(frames: &[RasterImage]) -> RgbImage {
    let (w, h) = frames.first().map_or((0, 0), |f| (f.width() as u32, f.height() as u32));
    let mut out = RgbImage::new(w * frames.len() as u32, h);
    for (i, f) in frames.iter().enumerate() {
        imageops::replace(&mut out, &to_rgb8(f), (i as u32 * w) as i64, 0);
    }
    out
}
