//! Finite-difference stencils and depth-to-normal conversion.
//!
//! The solver predicts intensities through the same derivative stencil used
//! here, so the stencil is a shared, configurable primitive: a pixel's
//! derivative along one axis is a weighted sum of depth samples, and both the
//! normal computation and the solver's Jacobian consume the same taps.

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use super::camera::CameraModel;
use super::maps::{DepthMap, NormalMap};
use crate::{CoreError, Result};

/// Derivative stencil choice, shared between normal computation and solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum StencilKind {
    /// Central differences in the interior, one-sided at mask boundaries.
    #[default]
    CentralOneSided,
    /// Forward differences wherever the forward neighbor is valid, backward
    /// otherwise. First-order everywhere; mainly an ablation knob.
    ForwardOneSided,
}

/// Taps of a 1-D derivative: `∂z/∂axis ≈ Σ weight_k · z(index_k)`.
///
/// Indices are linear row-major (`r*W + c`); weights carry the metric pitch
/// (units 1/mm). An empty tap set means the derivative is undefined at this
/// pixel (no valid neighbor along the axis) and is treated as zero slope.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct AxisTaps {
    pub idx: [usize; 2],
    pub w: [f64; 2],
    pub len: u8,
}

impl AxisTaps {
    #[inline]
    fn central(i_plus: usize, i_minus: usize, pitch: f64) -> Self {
        AxisTaps {
            idx: [i_plus, i_minus],
            w: [0.5 / pitch, -0.5 / pitch],
            len: 2,
        }
    }

    #[inline]
    fn one_sided(i_far: usize, i_near: usize, pitch: f64) -> Self {
        AxisTaps {
            idx: [i_far, i_near],
            w: [1.0 / pitch, -1.0 / pitch],
            len: 2,
        }
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Evaluate the derivative on a linear depth slice.
    #[inline]
    pub fn apply(&self, z: &[f64]) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.len as usize {
            acc += self.w[k] * z[self.idx[k]];
        }
        acc
    }
}

/// Derivative taps along u (columns) and v (rows) at pixel `(r, c)`.
pub(crate) fn axis_taps(
    valid: &Array2<bool>,
    r: usize,
    c: usize,
    camera: &CameraModel,
    kind: StencilKind,
) -> (AxisTaps, AxisTaps) {
    let (h, w) = valid.dim();
    let ok = |rr: isize, cc: isize| {
        rr >= 0
            && cc >= 0
            && (rr as usize) < h
            && (cc as usize) < w
            && valid[[rr as usize, cc as usize]]
    };
    let lin = |rr: isize, cc: isize| rr as usize * w + cc as usize;
    let (ri, ci) = (r as isize, c as isize);

    // dr/dc select the axis; taps reference (minus, self, plus) samples.
    let one_axis = |dr: isize, dc: isize, pitch: f64| {
        let minus_ok = ok(ri - dr, ci - dc);
        let plus_ok = ok(ri + dr, ci + dc);
        let i_minus = if minus_ok { lin(ri - dr, ci - dc) } else { 0 };
        let i_plus = if plus_ok { lin(ri + dr, ci + dc) } else { 0 };
        let i_self = lin(ri, ci);
        match kind {
            StencilKind::CentralOneSided => match (minus_ok, plus_ok) {
                (true, true) => AxisTaps::central(i_plus, i_minus, pitch),
                (false, true) => AxisTaps::one_sided(i_plus, i_self, pitch),
                (true, false) => AxisTaps::one_sided(i_self, i_minus, pitch),
                (false, false) => AxisTaps::default(),
            },
            StencilKind::ForwardOneSided => match (plus_ok, minus_ok) {
                (true, _) => AxisTaps::one_sided(i_plus, i_self, pitch),
                (false, true) => AxisTaps::one_sided(i_self, i_minus, pitch),
                (false, false) => AxisTaps::default(),
            },
        }
    };

    (
        one_axis(0, 1, camera.pixel_pitch_u),
        one_axis(1, 0, camera.pixel_pitch_v),
    )
}

/// Camera-facing unit normals of a depth map using the default stencil.
///
/// `n(p) = normalize(−∂z/∂u, −∂z/∂v, 1)` with derivatives in metric units.
/// Pixels with no valid neighbor along either axis are marked invalid.
pub fn normals_from_depth(d: &DepthMap, camera: &CameraModel) -> Result<NormalMap> {
    normals_from_depth_with(d, camera, StencilKind::default())
}

/// As [`normals_from_depth`] with an explicit stencil choice.
pub fn normals_from_depth_with(
    d: &DepthMap,
    camera: &CameraModel,
    kind: StencilKind,
) -> Result<NormalMap> {
    let (h, w) = d.shape();
    if (h, w) != camera.shape() {
        return Err(CoreError::shape(
            "normals_from_depth",
            format!("{:?}", camera.shape()),
            format!("{:?}", (h, w)),
        ));
    }
    if d.valid.iter().all(|&m| !m) {
        return Err(CoreError::EmptyMask("normals_from_depth".into()));
    }
    let z_slice = d
        .z
        .as_slice()
        .expect("depth grid is contiguous row-major");
    for ((r, c), &m) in d.valid.indexed_iter() {
        if m && !d.z[[r, c]].is_finite() {
            return Err(CoreError::Numeric(format!(
                "depth not finite at ({r}, {c})"
            )));
        }
    }

    let mut n = Array3::zeros((h, w, 3));
    let mut out_valid = Array2::from_elem((h, w), false);
    for r in 0..h {
        for c in 0..w {
            if !d.valid[[r, c]] {
                continue;
            }
            let (tu, tv) = axis_taps(&d.valid, r, c, camera, kind);
            if tu.is_empty() && tv.is_empty() {
                // Isolated pixel: no orientation information.
                continue;
            }
            let zu = tu.apply(z_slice);
            let zv = tv.apply(z_slice);
            let norm = (zu * zu + zv * zv + 1.0).sqrt();
            n[[r, c, 0]] = -zu / norm;
            n[[r, c, 1]] = -zv / norm;
            n[[r, c, 2]] = 1.0 / norm;
            out_valid[[r, c]] = true;
        }
    }
    NormalMap::new(n, out_valid)
}
