//! Synthetic surfaces with analytic depth, gradients, and contact regions.
//!
//! Surfaces are height fields `z(u, v)` over the camera's metric footprint.
//! Every shape is evaluated twice on purpose: the depth generator rasterizes
//! `z`, and an independent per-pixel closed form provides the analytic
//! gradient, so discretized normals can always be checked against exact ones.

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use super::camera::CameraModel;
use super::maps::{AlbedoMap, DepthMap, NormalMap};
use crate::{CoreError, Result};

/// Undeformed base geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseSurface {
    /// Constant depth `z0` (mm).
    Flat { z0: f64 },
    /// Spherical-cap dome bulging toward the camera: apex (closest point) at
    /// `apex_z`, sphere radius `radius`, both mm. Depth grows away from the
    /// apex as `z = apex_z + radius − sqrt(radius² − r²)`.
    Dome { apex_z: f64, radius: f64 },
    /// Separable sinusoid `z0 + amplitude · sin(2πu/period_u) · sin(2πv/period_v)`.
    Sinusoid {
        z0: f64,
        amplitude: f64,
        period_u: f64,
        period_v: f64,
    },
}

impl BaseSurface {
    fn validate(&self, camera: &CameraModel) -> Result<()> {
        match *self {
            BaseSurface::Flat { z0 } => {
                if !(z0 > 0.0) {
                    return Err(CoreError::InvalidParameter(format!(
                        "flat surface depth must be positive, got {z0}"
                    )));
                }
            }
            BaseSurface::Dome { apex_z, radius } => {
                if !(apex_z > 0.0) || !(radius > 0.0) {
                    return Err(CoreError::InvalidParameter(format!(
                        "dome needs apex_z > 0 and radius > 0, got ({apex_z}, {radius})"
                    )));
                }
                // The full footprint must stay well inside the cap so slopes
                // remain finite.
                let (hw, hh) = (
                    camera.image_width as f64 * camera.pixel_pitch_u / 2.0,
                    camera.image_height as f64 * camera.pixel_pitch_v / 2.0,
                );
                let corner = (hw * hw + hh * hh).sqrt();
                if corner >= 0.95 * radius {
                    return Err(CoreError::InvalidParameter(format!(
                        "dome radius {radius} too small for footprint (corner at {corner:.2} mm)"
                    )));
                }
            }
            BaseSurface::Sinusoid {
                z0,
                amplitude,
                period_u,
                period_v,
            } => {
                if !(z0 > 0.0) || !(amplitude >= 0.0) || !(period_u > 0.0) || !(period_v > 0.0) {
                    return Err(CoreError::InvalidParameter(format!(
                        "bad sinusoid parameters ({z0}, {amplitude}, {period_u}, {period_v})"
                    )));
                }
                if amplitude >= z0 {
                    return Err(CoreError::InvalidParameter(
                        "sinusoid amplitude must stay below the base depth".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Depth and gradient `(z, ∂z/∂u, ∂z/∂v)` at metric `(u, v)`.
    fn eval(&self, u: f64, v: f64) -> (f64, f64, f64) {
        match *self {
            BaseSurface::Flat { z0 } => (z0, 0.0, 0.0),
            BaseSurface::Dome { apex_z, radius } => {
                let s = (radius * radius - u * u - v * v).sqrt();
                (apex_z + radius - s, u / s, v / s)
            }
            BaseSurface::Sinusoid {
                z0,
                amplitude,
                period_u,
                period_v,
            } => {
                let (ku, kv) = (
                    std::f64::consts::TAU / period_u,
                    std::f64::consts::TAU / period_v,
                );
                let (su, cu) = (ku * u).sin_cos();
                let (sv, cv) = (kv * v).sin_cos();
                (
                    z0 + amplitude * su * sv,
                    amplitude * ku * cu * sv,
                    amplitude * kv * su * cv,
                )
            }
        }
    }
}

/// Indenter pressed into the base surface toward the camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Indenter {
    None,
    /// Sphere of radius `radius` pressed to depth `depth` at metric `center`.
    Sphere {
        radius: f64,
        depth: f64,
        center: (f64, f64),
    },
    /// Axis-aligned cube face (a square of half-width `half_width`) pressed
    /// flat to depth `depth` at metric `center`.
    Cube {
        half_width: f64,
        depth: f64,
        center: (f64, f64),
    },
}

impl Indenter {
    fn validate(&self) -> Result<()> {
        match *self {
            Indenter::None => Ok(()),
            Indenter::Sphere { radius, depth, .. } => {
                if !(radius > 0.0) || !(depth > 0.0) || depth >= radius {
                    return Err(CoreError::InvalidParameter(format!(
                        "sphere indenter needs 0 < depth < radius, got depth {depth}, radius {radius}"
                    )));
                }
                Ok(())
            }
            Indenter::Cube {
                half_width, depth, ..
            } => {
                if !(half_width > 0.0) || !(depth > 0.0) {
                    return Err(CoreError::InvalidParameter(format!(
                        "cube indenter needs half_width > 0 and depth > 0, got ({half_width}, {depth})"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Surface reflectance pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlbedoSpec {
    Constant { rgb: [f64; 3] },
    /// Checkerboard between two albedos with square cells of `cell_mm`.
    Checker {
        a: [f64; 3],
        b: [f64; 3],
        cell_mm: f64,
    },
}

impl AlbedoSpec {
    fn validate(&self) -> Result<()> {
        let check = |rgb: &[f64; 3]| {
            if rgb.iter().any(|&x| !(x >= 0.0)) {
                Err(CoreError::InvalidParameter(format!(
                    "albedo must be non-negative, got {rgb:?}"
                )))
            } else {
                Ok(())
            }
        };
        match self {
            AlbedoSpec::Constant { rgb } => check(rgb),
            AlbedoSpec::Checker { a, b, cell_mm } => {
                check(a)?;
                check(b)?;
                if !(*cell_mm > 0.0) {
                    return Err(CoreError::InvalidParameter(
                        "checker cell size must be positive".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    fn eval(&self, u: f64, v: f64) -> [f64; 3] {
        match *self {
            AlbedoSpec::Constant { rgb } => rgb,
            AlbedoSpec::Checker { a, b, cell_mm } => {
                let iu = (u / cell_mm).floor() as i64;
                let iv = (v / cell_mm).floor() as i64;
                if (iu + iv).rem_euclid(2) == 0 {
                    a
                } else {
                    b
                }
            }
        }
    }
}

/// Full description of a synthetic scene surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub base: BaseSurface,
    pub indenter: Indenter,
    pub albedo: AlbedoSpec,
}

impl SurfaceSpec {
    pub fn flat(z0: f64) -> Self {
        SurfaceSpec {
            base: BaseSurface::Flat { z0 },
            indenter: Indenter::None,
            albedo: AlbedoSpec::Constant { rgb: [0.9, 0.9, 0.9] },
        }
    }

    pub fn dome(apex_z: f64, radius: f64) -> Self {
        SurfaceSpec {
            base: BaseSurface::Dome { apex_z, radius },
            indenter: Indenter::None,
            albedo: AlbedoSpec::Constant { rgb: [0.9, 0.9, 0.9] },
        }
    }

    pub fn with_indenter(mut self, indenter: Indenter) -> Self {
        self.indenter = indenter;
        self
    }

    pub fn with_albedo(mut self, albedo: AlbedoSpec) -> Self {
        self.albedo = albedo;
        self
    }
}

/// A rasterized synthetic surface: depth plus exact analytic normals and the
/// contact region carved by the indenter.
#[derive(Debug, Clone)]
pub struct SurfaceState {
    pub depth: DepthMap,
    pub albedo: AlbedoMap,
    /// Normals from the analytic gradient, not from finite differences.
    pub analytic_normals: NormalMap,
    /// Pixels where the indenter replaced the base surface.
    pub contact: Array2<bool>,
}

/// Rasterize a [`SurfaceSpec`] over the camera grid.
pub fn make_synthetic_surface(spec: &SurfaceSpec, camera: &CameraModel) -> Result<SurfaceState> {
    camera.validate()?;
    spec.base.validate(camera)?;
    spec.indenter.validate()?;
    spec.albedo.validate()?;

    let (h, w) = camera.shape();
    let mut z = Array2::zeros((h, w));
    let mut n = Array3::zeros((h, w, 3));
    let mut rho = Array3::zeros((h, w, 3));
    let mut contact = Array2::from_elem((h, w), false);

    for r in 0..h {
        for c in 0..w {
            let (u, v) = camera.pixel_to_metric(c as f64, r as f64);
            let (zb, gu_b, gv_b) = spec.base.eval(u, v);
            let (zp, gu, gv, in_contact) = match spec.indenter {
                Indenter::None => (zb, gu_b, gv_b, false),
                Indenter::Sphere {
                    radius,
                    depth,
                    center,
                } => {
                    let (z0c, _, _) = spec.base.eval(center.0, center.1);
                    let sphere_center_z = z0c - depth + radius;
                    let du = u - center.0;
                    let dv = v - center.1;
                    let rr = du * du + dv * dv;
                    if rr < radius * radius {
                        let s = (radius * radius - rr).sqrt();
                        let zs = sphere_center_z - s;
                        if zs < zb {
                            (zs, du / s, dv / s, true)
                        } else {
                            (zb, gu_b, gv_b, false)
                        }
                    } else {
                        (zb, gu_b, gv_b, false)
                    }
                }
                Indenter::Cube {
                    half_width,
                    depth,
                    center,
                } => {
                    let (z0c, _, _) = spec.base.eval(center.0, center.1);
                    let plane = z0c - depth;
                    let inside =
                        (u - center.0).abs() < half_width && (v - center.1).abs() < half_width;
                    if inside && plane < zb {
                        (plane, 0.0, 0.0, true)
                    } else {
                        (zb, gu_b, gv_b, false)
                    }
                }
            };
            z[[r, c]] = zp;
            contact[[r, c]] = in_contact;
            let norm = (gu * gu + gv * gv + 1.0).sqrt();
            n[[r, c, 0]] = -gu / norm;
            n[[r, c, 1]] = -gv / norm;
            n[[r, c, 2]] = 1.0 / norm;
            let a = spec.albedo.eval(u, v);
            for ch in 0..3 {
                rho[[r, c, ch]] = a[ch];
            }
        }
    }

    let valid = Array2::from_elem((h, w), true);
    Ok(SurfaceState {
        depth: DepthMap::new(z, valid.clone())?,
        albedo: AlbedoMap::new(rho)?,
        analytic_normals: NormalMap::new(n, valid)?,
        contact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam(n: usize, pitch: f64) -> CameraModel {
        CameraModel {
            image_width: n,
            image_height: n,
            pixel_pitch_u: pitch,
            pixel_pitch_v: pitch,
            principal_point: ((n as f64 - 1.0) / 2.0, (n as f64 - 1.0) / 2.0),
            nominal_distance: 20.0,
        }
    }

    #[test]
    fn flat_surface_depth_and_normals() {
        let c = cam(32, 0.1);
        let s = make_synthetic_surface(&SurfaceSpec::flat(25.0), &c).unwrap();
        assert!(s.depth.z.iter().all(|&z| z == 25.0));
        for r in 0..32 {
            for cc in 0..32 {
                assert_eq!(s.analytic_normals.at(r, cc), [0.0, 0.0, 1.0]);
            }
        }
        assert!(s.contact.iter().all(|&m| !m));
    }

    #[test]
    fn zero_amplitude_sinusoid_is_flat() {
        let c = cam(16, 0.1);
        let spec = SurfaceSpec {
            base: BaseSurface::Sinusoid {
                z0: 20.0,
                amplitude: 0.0,
                period_u: 3.0,
                period_v: 3.0,
            },
            indenter: Indenter::None,
            albedo: AlbedoSpec::Constant { rgb: [1.0, 1.0, 1.0] },
        };
        let s = make_synthetic_surface(&spec, &c).unwrap();
        let flat = make_synthetic_surface(&SurfaceSpec::flat(20.0), &c).unwrap();
        assert_eq!(s.depth.z, flat.depth.z);
        assert_eq!(s.analytic_normals.n, flat.analytic_normals.n);
    }

    #[test]
    fn sphere_indent_matches_independent_evaluation() {
        // The generator's depth must agree with a direct per-pixel evaluation
        // of the two closed forms (base plane vs sphere cap).
        let c = cam(64, 0.1);
        let radius = 3.0;
        let depth = 1.0;
        let spec = SurfaceSpec::flat(22.0).with_indenter(Indenter::Sphere {
            radius,
            depth,
            center: (0.4, -0.3),
        });
        let s = make_synthetic_surface(&spec, &c).unwrap();
        let zc = 22.0 - depth + radius;
        let mut contact_count = 0;
        for r in 0..64 {
            for cc in 0..64 {
                let (u, v) = c.pixel_to_metric(cc as f64, r as f64);
                let rr = (u - 0.4).powi(2) + (v + 0.3).powi(2);
                let expected = if rr < radius * radius {
                    let zs = zc - (radius * radius - rr).sqrt();
                    if zs < 22.0 {
                        contact_count += 1;
                        zs
                    } else {
                        22.0
                    }
                } else {
                    22.0
                };
                assert!(
                    (s.depth.z[[r, cc]] - expected).abs() < 1e-12,
                    "depth mismatch at ({r},{cc})"
                );
                assert_eq!(s.contact[[r, cc]], expected < 22.0);
            }
        }
        assert!(contact_count > 100, "contact disc unexpectedly small");
    }

    #[test]
    fn cube_indent_has_flat_frontal_bottom() {
        let c = cam(48, 0.1);
        let spec = SurfaceSpec::flat(20.0).with_indenter(Indenter::Cube {
            half_width: 1.0,
            depth: 0.5,
            center: (0.0, 0.0),
        });
        let s = make_synthetic_surface(&spec, &c).unwrap();
        let mut inside = 0;
        for r in 0..48 {
            for cc in 0..48 {
                if s.contact[[r, cc]] {
                    inside += 1;
                    assert_eq!(s.depth.z[[r, cc]], 19.5);
                    assert_eq!(s.analytic_normals.at(r, cc), [0.0, 0.0, 1.0]);
                }
            }
        }
        // 2 mm square at 0.1 mm pitch is about 20×20 pixels.
        assert!((300..500).contains(&inside), "contact pixels: {inside}");
    }

    #[test]
    fn parameter_validation() {
        let c = cam(16, 0.1);
        // depth >= radius
        let bad = SurfaceSpec::flat(20.0).with_indenter(Indenter::Sphere {
            radius: 1.0,
            depth: 1.5,
            center: (0.0, 0.0),
        });
        assert!(make_synthetic_surface(&bad, &c).is_err());
        // dome too small for footprint
        let bad = SurfaceSpec::dome(18.0, 1.0);
        assert!(make_synthetic_surface(&bad, &c).is_err());
    }

    #[test]
    fn dome_normals_match_discrete_normals_interior() {
        use crate::scene::normals_from_depth;
        let c = cam(64, 0.1);
        let s = make_synthetic_surface(&SurfaceSpec::dome(18.0, 30.0), &c).unwrap();
        let discrete = normals_from_depth(&s.depth, &c).unwrap();
        let mut max_err: f64 = 0.0;
        for r in 1..63 {
            for cc in 1..63 {
                let a = s.analytic_normals.at(r, cc);
                let b = discrete.at(r, cc);
                let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
                max_err = max_err.max(dot.clamp(-1.0, 1.0).acos());
            }
        }
        assert!(max_err < 1e-4, "max angular error {max_err} rad");
    }
}
