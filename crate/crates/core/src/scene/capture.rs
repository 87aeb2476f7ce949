//! Multi-light capture sets.

use ndarray::Array3;

use super::camera::CameraModel;
use super::light::LightSource;
use crate::{CoreError, Result};

/// One calibration capture: K single-light images, a dark frame, and a
/// trichromatic all-lights image, together with the light and camera metadata.
///
/// All images are linear `H×W×3` intensities in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct CaptureSet {
    pub single_light_images: Vec<Array3<f64>>,
    pub dark_image: Array3<f64>,
    pub trichrome_image: Array3<f64>,
    pub lights: Vec<LightSource>,
    pub camera: CameraModel,
}

impl CaptureSet {
    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        let (h, w) = self.camera.shape();
        let expect = (h, w, 3);
        if self.single_light_images.len() != self.lights.len() {
            return Err(CoreError::shape(
                "CaptureSet",
                format!("{} single-light images", self.lights.len()),
                format!("{}", self.single_light_images.len()),
            ));
        }
        let check_img = |name: &str, img: &Array3<f64>| -> Result<()> {
            if img.dim() != expect {
                return Err(CoreError::shape(
                    format!("CaptureSet image '{name}'"),
                    format!("{expect:?}"),
                    format!("{:?}", img.dim()),
                ));
            }
            if img.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(CoreError::InvalidParameter(format!(
                    "image '{name}' has intensities outside [0, 1]"
                )));
            }
            Ok(())
        };
        for (i, img) in self.single_light_images.iter().enumerate() {
            check_img(&format!("light_{i:02}"), img)?;
        }
        check_img("dark", &self.dark_image)?;
        check_img("trichrome", &self.trichrome_image)?;
        for light in &self.lights {
            light.validate()?;
        }
        Ok(())
    }

    /// Number of lights (and single-light images).
    pub fn num_lights(&self) -> usize {
        self.lights.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.camera.shape()
    }
}
