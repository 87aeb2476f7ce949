//! Cameras, lights, surfaces, and capture sets.
//!
//! Geometry convention: the camera sits at the origin looking along +z, with
//! u along image columns and v along image rows. A pixel `p = (u_p, v_p)`
//! backprojects to the metric point `x(p) = (u, v, z(p))` where
//! `u = (u_p − c_u)·pitch_u` and `v = (v_p − c_v)·pitch_v`. Normals are the
//! camera-facing (`n_z > 0`) unit normals of the height field `z(u, v)`.

mod camera;
mod capture;
mod light;
mod maps;
mod stencil;
mod surface;

pub use camera::{backproject, export_point_cloud, CameraModel};
pub use capture::CaptureSet;
pub use light::{ColorGroup, LightSource};
pub use maps::{AlbedoMap, DepthMap, LogDepthMap, NormalMap};
pub use stencil::{normals_from_depth, normals_from_depth_with, StencilKind};
pub use surface::{
    make_synthetic_surface, AlbedoSpec, BaseSurface, Indenter, SurfaceSpec, SurfaceState,
};

pub(crate) use stencil::axis_taps;
