//! Normal-map evaluation metrics: average angular error, mean absolute
//! component error, and error-map rendering.

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::scene::NormalMap;
use crate::{CoreError, Result};

/// Aggregate metric report; serialized as `report.json` by the eval command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    /// Average angular error in degrees, in `[0, 180]`.
    pub aae_degrees: f64,
    /// Mean absolute normal-component error.
    pub mabse: f64,
    pub pixel_count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_press: Vec<PressMetrics>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PressMetrics {
    pub press_id: u32,
    pub aae_degrees: f64,
    pub mabse: f64,
    pub pixel_count: usize,
}

fn check_shapes(pred: &NormalMap, gt: &NormalMap, mask: &Array2<bool>) -> Result<usize> {
    if pred.shape() != gt.shape() || pred.shape() != mask.dim() {
        return Err(CoreError::shape(
            "metrics",
            format!("{:?}", pred.shape()),
            format!("gt {:?}, mask {:?}", gt.shape(), mask.dim()),
        ));
    }
    let count = mask
        .indexed_iter()
        .filter(|&((r, c), &m)| m && pred.valid[[r, c]] && gt.valid[[r, c]])
        .count();
    if count == 0 {
        return Err(CoreError::EmptyMask("metrics".into()));
    }
    Ok(count)
}

/// Mean angular deviation between unit normal maps, in degrees.
///
/// The dot product is clamped to `[−1, 1]` before `acos` to guard against
/// floating-point overshoot on identical vectors.
pub fn aae(pred: &NormalMap, gt: &NormalMap, mask: &Array2<bool>) -> Result<f64> {
    let count = check_shapes(pred, gt, mask)?;
    let mut acc = 0.0;
    for ((r, c), &m) in mask.indexed_iter() {
        if !m || !pred.valid[[r, c]] || !gt.valid[[r, c]] {
            continue;
        }
        let a = pred.at(r, c);
        let b = gt.at(r, c);
        let dot = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0);
        acc += dot.acos();
    }
    Ok((acc / count as f64).to_degrees())
}

/// Mean absolute component error `(1 / 3|M|) Σ ‖n̂ − n‖₁`.
pub fn mabse(pred: &NormalMap, gt: &NormalMap, mask: &Array2<bool>) -> Result<f64> {
    let count = check_shapes(pred, gt, mask)?;
    let mut acc = 0.0;
    for ((r, c), &m) in mask.indexed_iter() {
        if !m || !pred.valid[[r, c]] || !gt.valid[[r, c]] {
            continue;
        }
        let a = pred.at(r, c);
        let b = gt.at(r, c);
        acc += (a[0] - b[0]).abs() + (a[1] - b[1]).abs() + (a[2] - b[2]).abs();
    }
    Ok(acc / (3.0 * count as f64))
}

/// Fixed 256-entry blue→red colormap.
///
/// Entry `k` is `(k, 0, 255 − k)`: entry 0 is pure blue, entry 255 pure red,
/// and the midpoint entry 128 is `(128, 0, 127)`. An error of `e` degrees
/// selects entry `round(clamp(e / max_degrees, 0, 1) · 255)`.
pub fn colormap_blue_red(k: u8) -> [u8; 3] {
    [k, 0, 255 - k]
}

/// Per-pixel angular error rendered through the blue→red colormap, clamped
/// at `max_degrees`; pixels outside the mask are black.
pub fn error_map(
    pred: &NormalMap,
    gt: &NormalMap,
    mask: &Array2<bool>,
    max_degrees: f64,
) -> Result<Array3<u8>> {
    check_shapes(pred, gt, mask)?;
    if !(max_degrees > 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "max_degrees must be positive, got {max_degrees}"
        )));
    }
    let (h, w) = pred.shape();
    let mut img = Array3::zeros((h, w, 3));
    for ((r, c), &m) in mask.indexed_iter() {
        if !m || !pred.valid[[r, c]] || !gt.valid[[r, c]] {
            continue;
        }
        let a = pred.at(r, c);
        let b = gt.at(r, c);
        let dot = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0);
        let err = dot.acos().to_degrees();
        let k = ((err / max_degrees).clamp(0.0, 1.0) * 255.0).round() as u8;
        let rgb = colormap_blue_red(k);
        for ch in 0..3 {
            img[[r, c, ch]] = rgb[ch];
        }
    }
    Ok(img)
}
