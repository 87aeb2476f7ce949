//! Shared synthetic fixtures for integration tests.

use nlps_core::render::{render_capture_set, ring_lights, RenderOptions};
use nlps_core::scene::{
    make_synthetic_surface, CameraModel, CaptureSet, Indenter, LightSource, SurfaceSpec,
    SurfaceState,
};

/// Square camera with a fixed 12.8×12.8 mm footprint at any resolution.
pub fn standard_camera(n: usize) -> CameraModel {
    CameraModel {
        image_width: n,
        image_height: n,
        pixel_pitch_u: 12.8 / n as f64,
        pixel_pitch_v: 12.8 / n as f64,
        principal_point: ((n as f64 - 1.0) / 2.0, (n as f64 - 1.0) / 2.0),
        nominal_distance: 19.0,
    }
}

/// The standard 12-LED ring: radius 16 mm at z = 36 mm, aimed at the dome.
pub fn standard_lights(count: usize) -> Vec<LightSource> {
    ring_lights(count, 16.0, 36.0, 18.0, 2.0, [380.0, 360.0, 340.0])
}

/// Dome with a sphere indent pressed slightly off-center.
pub fn sphere_indent_dome() -> SurfaceSpec {
    SurfaceSpec::dome(18.0, 30.0).with_indenter(Indenter::Sphere {
        radius: 4.0,
        depth: 1.0,
        center: (0.8, -0.5),
    })
}

pub fn render_standard(
    n: usize,
    spec: &SurfaceSpec,
    lights: usize,
    opts: &RenderOptions,
) -> (SurfaceState, CaptureSet) {
    let camera = standard_camera(n);
    let surface = make_synthetic_surface(spec, &camera).unwrap();
    let capture = render_capture_set(&surface, &standard_lights(lights), &camera, opts).unwrap();
    (surface, capture)
}
