//! `scene.json`: camera and light metadata with explicit units.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::scene::{CameraModel, ColorGroup, LightSource};
use crate::{CoreError, Result};

const LENGTH_UNIT: &str = "mm";
const PIXEL_UNIT: &str = "px";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Units {
    length: String,
    pixel: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraDoc {
    image_width_px: usize,
    image_height_px: usize,
    pixel_pitch_u_mm: f64,
    pixel_pitch_v_mm: f64,
    principal_point_px: [f64; 2],
    nominal_distance_mm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LightDoc {
    position_mm: [f64; 3],
    principal_direction: [f64; 3],
    anisotropy_mu: f64,
    intensity_psi: [f64; 3],
    color_group: ColorGroup,
}

/// On-disk scene description: camera, lights, unit declarations.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDocument {
    units: Units,
    camera: CameraDoc,
    lights: Vec<LightDoc>,
}

impl SceneDocument {
    pub fn new(camera: &CameraModel, lights: &[LightSource]) -> Self {
        SceneDocument {
            units: Units {
                length: LENGTH_UNIT.into(),
                pixel: PIXEL_UNIT.into(),
            },
            camera: CameraDoc {
                image_width_px: camera.image_width,
                image_height_px: camera.image_height,
                pixel_pitch_u_mm: camera.pixel_pitch_u,
                pixel_pitch_v_mm: camera.pixel_pitch_v,
                principal_point_px: [camera.principal_point.0, camera.principal_point.1],
                nominal_distance_mm: camera.nominal_distance,
            },
            lights: lights
                .iter()
                .map(|l| LightDoc {
                    position_mm: [l.position.x, l.position.y, l.position.z],
                    principal_direction: [
                        l.principal_direction.x,
                        l.principal_direction.y,
                        l.principal_direction.z,
                    ],
                    anisotropy_mu: l.anisotropy_mu,
                    intensity_psi: l.intensity_psi,
                    color_group: l.color_group,
                })
                .collect(),
        }
    }

    pub fn into_scene(self) -> Result<(CameraModel, Vec<LightSource>)> {
        if self.units.length != LENGTH_UNIT {
            return Err(CoreError::UnitMismatch {
                field: "units.length".into(),
                expected: LENGTH_UNIT.into(),
                found: self.units.length,
            });
        }
        if self.units.pixel != PIXEL_UNIT {
            return Err(CoreError::UnitMismatch {
                field: "units.pixel".into(),
                expected: PIXEL_UNIT.into(),
                found: self.units.pixel,
            });
        }
        let camera = CameraModel {
            image_width: self.camera.image_width_px,
            image_height: self.camera.image_height_px,
            pixel_pitch_u: self.camera.pixel_pitch_u_mm,
            pixel_pitch_v: self.camera.pixel_pitch_v_mm,
            principal_point: (
                self.camera.principal_point_px[0],
                self.camera.principal_point_px[1],
            ),
            nominal_distance: self.camera.nominal_distance_mm,
        };
        camera.validate()?;
        let lights: Vec<LightSource> = self
            .lights
            .into_iter()
            .map(|l| LightSource {
                position: Vector3::new(l.position_mm[0], l.position_mm[1], l.position_mm[2]),
                principal_direction: Vector3::new(
                    l.principal_direction[0],
                    l.principal_direction[1],
                    l.principal_direction[2],
                ),
                anisotropy_mu: l.anisotropy_mu,
                intensity_psi: l.intensity_psi,
                color_group: l.color_group,
            })
            .collect();
        for l in &lights {
            l.validate()?;
        }
        Ok((camera, lights))
    }
}

pub fn write_scene_json(path: &Path, camera: &CameraModel, lights: &[LightSource]) -> Result<()> {
    let doc = SceneDocument::new(camera, lights);
    let text = serde_json::to_string_pretty(&doc).map_err(|e| CoreError::Json {
        path: path.display().to_string(),
        source: e,
    })?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_scene_json(path: &Path) -> Result<(CameraModel, Vec<LightSource>)> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CoreError::MissingFile(path.to_path_buf()),
        _ => CoreError::Io(e),
    })?;
    let doc: SceneDocument = serde_json::from_str(&text).map_err(|e| CoreError::Json {
        path: path.display().to_string(),
        source: e,
    })?;
    doc.into_scene()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::ring_lights;
    use tempfile::tempdir;

    #[test]
    fn scene_round_trip() {
        let dir = tempdir().unwrap();
        let camera = CameraModel {
            image_width: 64,
            image_height: 48,
            pixel_pitch_u: 0.1,
            pixel_pitch_v: 0.12,
            principal_point: (31.5, 23.5),
            nominal_distance: 20.0,
        };
        let lights = ring_lights(6, 12.0, 30.0, 18.0, 1.5, [500.0, 480.0, 460.0]);
        let p = dir.path().join("scene.json");
        write_scene_json(&p, &camera, &lights).unwrap();
        let (cam2, lights2) = read_scene_json(&p).unwrap();
        assert_eq!(camera, cam2);
        assert_eq!(lights, lights2);
    }

    #[test]
    fn unit_mismatch_is_a_distinct_error() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("scene.json");
        let camera = CameraModel {
            image_width: 8,
            image_height: 8,
            pixel_pitch_u: 0.1,
            pixel_pitch_v: 0.1,
            principal_point: (3.5, 3.5),
            nominal_distance: 20.0,
        };
        write_scene_json(&p, &camera, &[]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap().replace("\"mm\"", "\"cm\"");
        std::fs::write(&p, text).unwrap();
        assert!(matches!(
            read_scene_json(&p),
            Err(CoreError::UnitMismatch { .. })
        ));
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("scene.json");
        std::fs::write(&p, "{\"units\":{\"length\":\"mm\",\"pixel\":\"px\"},\"bogus\":1}").unwrap();
        assert!(matches!(read_scene_json(&p), Err(CoreError::Json { .. })));
    }
}
