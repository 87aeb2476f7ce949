//! Near-light photometric stereo calibration for curved visuotactile sensors.
//!
//! The crate covers the full calibration loop for a sensor whose internal
//! LEDs act as near-field point sources:
//!
//! 1. [`scene`] — cameras, lights, depth/normal/albedo grids, and synthetic
//!    surfaces with analytic ground truth.
//! 2. [`render`] — the physical image-formation model (anisotropic point
//!    light, inverse-square falloff, self-shadowing) used both to simulate
//!    capture sets and as the solver's residual engine.
//! 3. [`solver`] — alternating least squares over log-depth and effective
//!    albedo: closed-form albedo updates and Gauss-Newton log-depth steps
//!    solved with Jacobi-preconditioned conjugate gradients.
//! 4. [`pipeline`] — capture-directory loading, dark subtraction, contact
//!    masking, and assembly of paired (pixel, intensity) → normal datasets.
//! 5. [`net`] — a small per-pixel MLP (5→256→256→128→3) trained from scratch
//!    with a cosine loss for single-image normal inference.
//! 6. [`metrics`] — angular-error metrics and error-map rendering.
//! 7. [`io`] — PFM / 16-bit PNG images, scene metadata, dataset and weight
//!    file formats.
//!
//! All image grids are row-major `H×W` (`[row, col]`), with pixel `(u_p, v_p)`
//! meaning column `u_p`, row `v_p`. Metric units are millimeters throughout;
//! intensities are linear in `[0, 1]`.

pub mod error;
pub mod io;
pub mod metrics;
pub mod net;
pub mod pipeline;
pub mod render;
pub mod scene;
pub mod solver;

pub use error::CoreError;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CoreError>;
