//! Depth, log-depth, normal, and albedo grids.

use ndarray::{Array2, Array3};

use crate::{CoreError, Result};

/// Metric depth grid with a validity mask. Depth is positive on valid pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub z: Array2<f64>,
    pub valid: Array2<bool>,
}

impl DepthMap {
    pub fn new(z: Array2<f64>, valid: Array2<bool>) -> Result<Self> {
        if z.dim() != valid.dim() {
            return Err(CoreError::shape(
                "DepthMap",
                format!("{:?}", z.dim()),
                format!("{:?}", valid.dim()),
            ));
        }
        for ((r, c), &m) in valid.indexed_iter() {
            if m && !(z[[r, c]] > 0.0 && z[[r, c]].is_finite()) {
                return Err(CoreError::InvalidDepth(format!(
                    "z[{r},{c}] = {} on a valid pixel",
                    z[[r, c]]
                )));
            }
        }
        Ok(DepthMap { z, valid })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.z.dim()
    }

    /// Log-depth parameterization `z̃ = log z`.
    pub fn to_log(&self) -> LogDepthMap {
        let ztilde = self.z.mapv(|z| if z > 0.0 { z.ln() } else { f64::NAN });
        LogDepthMap {
            ztilde,
            valid: self.valid.clone(),
        }
    }
}

/// Log-depth grid `z̃ = log z`; unconstrained where depth must stay positive.
#[derive(Debug, Clone, PartialEq)]
pub struct LogDepthMap {
    pub ztilde: Array2<f64>,
    pub valid: Array2<bool>,
}

impl LogDepthMap {
    /// Constant log-depth over a given mask.
    pub fn constant(value: f64, valid: Array2<bool>) -> Self {
        LogDepthMap {
            ztilde: Array2::from_elem(valid.dim(), value),
            valid,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.ztilde.dim()
    }

    /// Exponentiate back to metric depth.
    pub fn to_depth(&self) -> Result<DepthMap> {
        let z = self.ztilde.mapv(f64::exp);
        for ((r, c), &m) in self.valid.indexed_iter() {
            if m && !z[[r, c]].is_finite() {
                return Err(CoreError::Numeric(format!(
                    "exp(z̃[{r},{c}]) not finite: z̃ = {}",
                    self.ztilde[[r, c]]
                )));
            }
        }
        DepthMap::new(z, self.valid.clone())
    }
}

/// Unit normal grid `(H, W, 3)` with a validity mask; `n_z > 0` on valid pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    pub n: Array3<f64>,
    pub valid: Array2<bool>,
}

impl NormalMap {
    pub fn new(n: Array3<f64>, valid: Array2<bool>) -> Result<Self> {
        let (h, w, ch) = n.dim();
        if ch != 3 || (h, w) != valid.dim() {
            return Err(CoreError::shape(
                "NormalMap",
                format!("({}, {}, 3)", valid.dim().0, valid.dim().1),
                format!("{:?}", n.dim()),
            ));
        }
        Ok(NormalMap { n, valid })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.valid.dim()
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> [f64; 3] {
        [self.n[[r, c, 0]], self.n[[r, c, 1]], self.n[[r, c, 2]]]
    }
}

/// Per-channel reflectance grid `(H, W, 3)`, non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct AlbedoMap {
    pub rho: Array3<f64>,
}

impl AlbedoMap {
    pub fn new(rho: Array3<f64>) -> Result<Self> {
        if rho.dim().2 != 3 {
            return Err(CoreError::shape(
                "AlbedoMap",
                "(H, W, 3)",
                format!("{:?}", rho.dim()),
            ));
        }
        if rho.iter().any(|&v| !(v >= 0.0)) {
            return Err(CoreError::InvalidParameter(
                "albedo must be non-negative".into(),
            ));
        }
        Ok(AlbedoMap { rho })
    }

    pub fn constant(value: [f64; 3], shape: (usize, usize)) -> Self {
        let mut rho = Array3::zeros((shape.0, shape.1, 3));
        for ch in 0..3 {
            rho.slice_mut(ndarray::s![.., .., ch]).fill(value[ch]);
        }
        AlbedoMap { rho }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rho.dim().0, self.rho.dim().1)
    }
}
