//! Capture-set directory layout.
//!
//! A capture directory holds `light_00.png … light_{K-1}.png`, `dark.png`,
//! `trichrome.png`, and `scene.json`. PFM variants of the images are
//! accepted on load (and written when [`ImageFormat::Pfm`] is selected).

use std::path::Path;

use ndarray::Array3;

use super::pfm::{read_pfm, write_pfm};
use super::png16::{read_png16, write_png16};
use super::scene_json::{read_scene_json, write_scene_json};
use crate::scene::CaptureSet;
use crate::{CoreError, Result};

/// Image container for saved captures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImageFormat {
    /// 16-bit PNG, linear, full scale = 1.0.
    #[default]
    Png16,
    /// 32-bit float PFM.
    Pfm,
}

impl ImageFormat {
    fn extension(self) -> &'static str {
        match self {
            ImageFormat::Png16 => "png",
            ImageFormat::Pfm => "pfm",
        }
    }
}

fn write_image(path: &Path, img: &Array3<f64>, format: ImageFormat) -> Result<()> {
    match format {
        ImageFormat::Png16 => write_png16(path, img),
        ImageFormat::Pfm => write_pfm(path, img),
    }
}

fn load_image(dir: &Path, stem: &str) -> Result<Array3<f64>> {
    let png = dir.join(format!("{stem}.png"));
    if png.exists() {
        return read_png16(&png);
    }
    let pfm = dir.join(format!("{stem}.pfm"));
    if pfm.exists() {
        // Intensities are clamped into the contract range on load.
        return Ok(read_pfm(&pfm)?.mapv(|v| v.clamp(0.0, 1.0)));
    }
    Err(CoreError::MissingFile(png))
}

/// Persist a capture set as a directory; creates the directory if needed.
pub fn save_capture_dir(capture: &CaptureSet, dir: &Path, format: ImageFormat) -> Result<()> {
    capture.validate()?;
    std::fs::create_dir_all(dir)?;
    let ext = format.extension();
    for (i, img) in capture.single_light_images.iter().enumerate() {
        write_image(&dir.join(format!("light_{i:02}.{ext}")), img, format)?;
    }
    write_image(&dir.join(format!("dark.{ext}")), &capture.dark_image, format)?;
    write_image(
        &dir.join(format!("trichrome.{ext}")),
        &capture.trichrome_image,
        format,
    )?;
    write_scene_json(&dir.join("scene.json"), &capture.camera, &capture.lights)?;
    Ok(())
}

/// Load and validate a capture directory.
pub fn load_capture_dir(dir: &Path) -> Result<CaptureSet> {
    let (camera, lights) = read_scene_json(&dir.join("scene.json"))?;
    let mut single_light_images = Vec::with_capacity(lights.len());
    for i in 0..lights.len() {
        single_light_images.push(load_image(dir, &format!("light_{i:02}"))?);
    }
    let dark_image = load_image(dir, "dark")?;
    let trichrome_image = load_image(dir, "trichrome")?;

    let capture = CaptureSet {
        single_light_images,
        dark_image,
        trichrome_image,
        lights,
        camera,
    };
    capture.validate()?;
    Ok(capture)
}
