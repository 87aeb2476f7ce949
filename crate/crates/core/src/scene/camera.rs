//! Orthographic-with-metric-pixels camera model.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::maps::DepthMap;
use crate::{CoreError, Result};

/// Camera intrinsics for the orthographic metric-pixel projection.
///
/// The model carries only a metric scale per pixel axis and a principal
/// point; depth enters backprojection unchanged. `nominal_distance` is the
/// expected camera–surface distance used as the solver's log-depth prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub image_width: usize,
    pub image_height: usize,
    /// Millimeters per pixel along image columns (u).
    pub pixel_pitch_u: f64,
    /// Millimeters per pixel along image rows (v).
    pub pixel_pitch_v: f64,
    /// Principal point `(c_u, c_v)` in pixels.
    pub principal_point: (f64, f64),
    /// Nominal camera–surface distance in millimeters.
    pub nominal_distance: f64,
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if self.image_width == 0 || self.image_height == 0 {
            return Err(CoreError::InvalidParameter(
                "image dimensions must be positive".into(),
            ));
        }
        if !(self.pixel_pitch_u > 0.0) || !(self.pixel_pitch_v > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "pixel pitch must be positive, got ({}, {})",
                self.pixel_pitch_u, self.pixel_pitch_v
            )));
        }
        if !(self.nominal_distance > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "nominal distance must be positive, got {}",
                self.nominal_distance
            )));
        }
        let (cu, cv) = self.principal_point;
        if !(0.0..self.image_width as f64).contains(&cu)
            || !(0.0..self.image_height as f64).contains(&cv)
        {
            return Err(CoreError::InvalidParameter(format!(
                "principal point ({cu}, {cv}) outside image {}x{}",
                self.image_width, self.image_height
            )));
        }
        Ok(())
    }

    /// Metric (u, v) coordinates of pixel `(u_p, v_p)`.
    #[inline]
    pub fn pixel_to_metric(&self, u_p: f64, v_p: f64) -> (f64, f64) {
        (
            (u_p - self.principal_point.0) * self.pixel_pitch_u,
            (v_p - self.principal_point.1) * self.pixel_pitch_v,
        )
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.image_height, self.image_width)
    }
}

/// Backproject pixel `p = (u_p, v_p)` at depth `z` (mm) to a 3D point.
pub fn backproject(p: (f64, f64), z: f64, camera: &CameraModel) -> Result<Vector3<f64>> {
    if !(z > 0.0) {
        return Err(CoreError::InvalidDepth(format!(
            "backproject requires z > 0, got {z}"
        )));
    }
    let (u, v) = camera.pixel_to_metric(p.0, p.1);
    Ok(Vector3::new(u, v, z))
}

/// One 3D point per valid pixel, in row-major pixel order.
pub fn export_point_cloud(d: &DepthMap, camera: &CameraModel) -> Result<Vec<Vector3<f64>>> {
    let (h, w) = d.z.dim();
    if d.valid.iter().all(|&m| !m) {
        return Err(CoreError::EmptyMask("point cloud export".into()));
    }
    let mut points = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if d.valid[[r, c]] {
                points.push(backproject((c as f64, r as f64), d.z[[r, c]], camera)?);
            }
        }
    }
    Ok(points)
}
