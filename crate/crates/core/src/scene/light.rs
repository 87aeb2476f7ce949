//! Anisotropic near-field point light sources.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::{CoreError, Result};

/// Color group an LED belongs to during trichromatic capture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColorGroup {
    R,
    G,
    B,
}

impl ColorGroup {
    /// Channel index this group contributes to in an RGB image.
    pub fn channel(self) -> usize {
        match self {
            ColorGroup::R => 0,
            ColorGroup::G => 1,
            ColorGroup::B => 2,
        }
    }
}

/// A single LED: position, emission lobe, and per-channel calibrated intensity.
///
/// Emission follows `(n_s · d̂)^μ` around the principal direction `n_s`,
/// where `d̂` points from the light toward the surface; `μ = 0` is isotropic.
#[derive(Debug, Clone, PartialEq)]
pub struct LightSource {
    /// Position in the camera frame, millimeters.
    pub position: Vector3<f64>,
    /// Unit principal emission direction.
    pub principal_direction: Vector3<f64>,
    /// Anisotropy exponent μ ≥ 0.
    pub anisotropy_mu: f64,
    /// Calibrated intensity Ψ per channel (R, G, B).
    pub intensity_psi: [f64; 3],
    /// Group membership for trichrome capture.
    pub color_group: ColorGroup,
}

impl LightSource {
    pub fn validate(&self) -> Result<()> {
        let norm = self.principal_direction.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(CoreError::InvalidParameter(format!(
                "light principal direction must be unit length, |n_s| = {norm}"
            )));
        }
        if !(self.anisotropy_mu >= 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "anisotropy mu must be >= 0, got {}",
                self.anisotropy_mu
            )));
        }
        if self.intensity_psi.iter().any(|&p| !(p >= 0.0)) {
            return Err(CoreError::InvalidParameter(format!(
                "light intensity psi must be >= 0, got {:?}",
                self.intensity_psi
            )));
        }
        Ok(())
    }
}
