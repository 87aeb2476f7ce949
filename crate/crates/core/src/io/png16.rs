//! Linear 16-bit PNG images and 8-bit binary masks.
//!
//! Intensity images map `[0, 1]` to the full `u16` range; a value loaded
//! back is exactly `k / 65535`, so captures quantized to 16 bits round-trip
//! bit-identically.

use std::path::Path;

use image::{GrayImage, ImageBuffer, Luma, Rgb};
use ndarray::{Array2, Array3};

use crate::{CoreError, Result};

const FULL_SCALE: f64 = 65535.0;

/// Write an `(H, W, 3)` linear image as 16-bit RGB PNG.
pub fn write_png16(path: &Path, img: &Array3<f64>) -> Result<()> {
    let (h, w, ch) = img.dim();
    if ch != 3 {
        return Err(CoreError::shape("write_png16", "(H, W, 3)", format!("{:?}", img.dim())));
    }
    let mut buf: ImageBuffer<Rgb<u16>, Vec<u16>> = ImageBuffer::new(w as u32, h as u32);
    for (x, y, px) in buf.enumerate_pixels_mut() {
        let (r, c) = (y as usize, x as usize);
        let mut v = [0u16; 3];
        for k in 0..3 {
            v[k] = (img[[r, c, k]].clamp(0.0, 1.0) * FULL_SCALE).round() as u16;
        }
        *px = Rgb(v);
    }
    buf.save(path)?;
    Ok(())
}

/// Read a 16-bit (or 8-bit) RGB PNG as linear intensities in `[0, 1]`.
pub fn read_png16(path: &Path) -> Result<Array3<f64>> {
    let dyn_img = image::open(path).map_err(|e| match &e {
        image::ImageError::IoError(io) if io.kind() == std::io::ErrorKind::NotFound => {
            CoreError::MissingFile(path.to_path_buf())
        }
        _ => CoreError::Image(e),
    })?;
    let rgb = dyn_img.into_rgb16();
    let (w, h) = rgb.dimensions();
    let mut img = Array3::zeros((h as usize, w as usize, 3));
    for (x, y, px) in rgb.enumerate_pixels() {
        for k in 0..3 {
            img[[y as usize, x as usize, k]] = px.0[k] as f64 / FULL_SCALE;
        }
    }
    Ok(img)
}

/// Write a boolean mask as an 8-bit PNG (0 / 255).
pub fn write_mask_png(path: &Path, mask: &Array2<bool>) -> Result<()> {
    let (h, w) = mask.dim();
    let mut buf = GrayImage::new(w as u32, h as u32);
    for (x, y, px) in buf.enumerate_pixels_mut() {
        *px = Luma([if mask[[y as usize, x as usize]] { 255 } else { 0 }]);
    }
    buf.save(path)?;
    Ok(())
}

/// Read an 8-bit PNG mask; any value ≥ 128 counts as set.
pub fn read_mask_png(path: &Path) -> Result<Array2<bool>> {
    let dyn_img = image::open(path).map_err(|e| match &e {
        image::ImageError::IoError(io) if io.kind() == std::io::ErrorKind::NotFound => {
            CoreError::MissingFile(path.to_path_buf())
        }
        _ => CoreError::Image(e),
    })?;
    let gray = dyn_img.into_luma8();
    let (w, h) = gray.dimensions();
    let mut mask = Array2::from_elem((h as usize, w as usize), false);
    for (x, y, px) in gray.enumerate_pixels() {
        mask[[y as usize, x as usize]] = px.0[0] >= 128;
    }
    Ok(mask)
}

/// Write an `(H, W, 3)` u8 image (e.g. an error map) as 8-bit RGB PNG.
pub fn write_png8_rgb(path: &Path, img: &Array3<u8>) -> Result<()> {
    let (h, w, ch) = img.dim();
    if ch != 3 {
        return Err(CoreError::shape("write_png8_rgb", "(H, W, 3)", format!("{:?}", img.dim())));
    }
    let mut buf: ImageBuffer<Rgb<u8>, Vec<u8>> = ImageBuffer::new(w as u32, h as u32);
    for (x, y, px) in buf.enumerate_pixels_mut() {
        let (r, c) = (y as usize, x as usize);
        *px = Rgb([img[[r, c, 0]], img[[r, c, 1]], img[[r, c, 2]]]);
    }
    buf.save(path)?;
    Ok(())
}
