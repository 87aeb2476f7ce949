//! Internal solve-domain representation and the shared row-evaluation core.
//!
//! Every energy, albedo-update, and Jacobian computation walks residual rows
//! through the same code path, so the three can never drift apart on clamp
//! or saturation conventions.

use nalgebra::Vector3;
use ndarray::Array2;

use super::{ChannelMode, SolverConfig};
use crate::scene::{axis_taps, CaptureSet};
use crate::{CoreError, Result};

/// Per-pixel geometry at the current log-depth: surface point, unnormalized
/// normal `g = (−z_u, −z_v, 1)`, and the derivative of `g` with respect to
/// the log-depth of each stencil column.
pub(crate) struct PixelGeom {
    pub x: Vector3<f64>,
    pub g: Vector3<f64>,
    pub l_norm: f64,
    pub ncols: usize,
    /// Column indices (into the solve domain), `cols[self_slot]` is the pixel itself.
    pub cols: [u32; 5],
    pub dgx: [f64; 5],
    pub dgy: [f64; 5],
    pub self_slot: usize,
}

/// One light's shading at unit effective albedo, with optional derivatives
/// aligned to the pixel's stencil columns.
pub(crate) struct LightShade {
    /// `A · max(v·g, 0) / (‖g‖ · d³)`; multiply by `Ψ_c · ρ̃_c` for intensity.
    pub s_base: f64,
    /// `∂ s_base / ∂ z̃(col_j)`; all zero when the shading clamp is active.
    pub ds_base: [f64; 5],
}

pub(crate) struct Problem<'a> {
    pub capture: &'a CaptureSet,
    pub cfg: &'a SolverConfig,
    /// Solve domain after dropping isolated pixels.
    pub mask: Array2<bool>,
    /// Linear pixel index of each column.
    pub cols: Vec<u32>,
    /// Column index of each pixel, -1 outside the domain.
    pub col_of: Vec<i32>,
    /// Metric coordinates per pixel (full grid).
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Log-depth prior per pixel (full grid).
    pub prior: Array2<f64>,
    /// Channel slots: `[0, 1, 2]` in RGB mode, `[0]` in luminance mode.
    pub channels: Vec<usize>,
}

impl<'a> Problem<'a> {
    /// Build the solve domain. The capture must already be dark-subtracted.
    pub fn new(capture: &'a CaptureSet, mask: &Array2<bool>, cfg: &'a SolverConfig) -> Result<Self> {
        let (h, w) = capture.shape();
        if mask.dim() != (h, w) {
            return Err(CoreError::shape(
                "solver mask",
                format!("{:?}", (h, w)),
                format!("{:?}", mask.dim()),
            ));
        }
        if capture.num_lights() < 3 {
            return Err(CoreError::InsufficientLights {
                required: 3,
                found: capture.num_lights(),
            });
        }

        // Drop pixels with no stencil neighbors along either axis: they carry
        // no orientation information and normals_from_depth invalidates them.
        let mut domain = mask.clone();
        loop {
            let mut dropped = false;
            for r in 0..h {
                for c in 0..w {
                    if !domain[[r, c]] {
                        continue;
                    }
                    let (tu, tv) = axis_taps(&domain, r, c, &capture.camera, cfg.stencil);
                    if tu.is_empty() && tv.is_empty() {
                        domain[[r, c]] = false;
                        dropped = true;
                    }
                }
            }
            if !dropped {
                break;
            }
        }

        let mut cols = Vec::new();
        let mut col_of = vec![-1i32; h * w];
        for r in 0..h {
            for c in 0..w {
                if domain[[r, c]] {
                    col_of[r * w + c] = cols.len() as i32;
                    cols.push((r * w + c) as u32);
                }
            }
        }
        if cols.is_empty() {
            return Err(CoreError::EmptyMask("solve domain".into()));
        }

        let mut u = vec![0.0; h * w];
        let mut v = vec![0.0; h * w];
        for r in 0..h {
            for c in 0..w {
                let (uu, vv) = capture.camera.pixel_to_metric(c as f64, r as f64);
                u[r * w + c] = uu;
                v[r * w + c] = vv;
            }
        }

        let prior_value = cfg.prior.resolve(&capture.camera, (h, w))?;
        let channels = match cfg.channel_mode {
            ChannelMode::Rgb => vec![0, 1, 2],
            ChannelMode::Luminance => vec![0],
        };

        Ok(Problem {
            capture,
            cfg,
            mask: domain,
            cols,
            col_of,
            u,
            v,
            prior: prior_value,
            channels,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.capture.shape()
    }

    /// Dark-subtracted observation for a row.
    #[inline]
    pub fn observation(&self, light: usize, r: usize, c: usize, ch_slot: usize) -> f64 {
        let img = &self.capture.single_light_images[light];
        match self.cfg.channel_mode {
            ChannelMode::Rgb => img[[r, c, ch_slot]],
            ChannelMode::Luminance => {
                (img[[r, c, 0]] + img[[r, c, 1]] + img[[r, c, 2]]) / 3.0
            }
        }
    }

    /// Calibrated source intensity for a row.
    #[inline]
    pub fn psi(&self, light: usize, ch_slot: usize) -> f64 {
        let psi = &self.capture.lights[light].intensity_psi;
        match self.cfg.channel_mode {
            ChannelMode::Rgb => psi[ch_slot],
            ChannelMode::Luminance => (psi[0] + psi[1] + psi[2]) / 3.0,
        }
    }

    /// Effective-albedo factor for a row, given the albedo grid.
    #[inline]
    pub fn rho(&self, albedo: &ndarray::Array3<f64>, r: usize, c: usize, ch_slot: usize) -> f64 {
        match self.cfg.channel_mode {
            ChannelMode::Rgb => albedo[[r, c, ch_slot]],
            ChannelMode::Luminance => albedo[[r, c, 0]],
        }
    }

    /// Saturated observations are excluded from residuals per light and
    /// channel, not per pixel.
    #[inline]
    pub fn included(&self, light: usize, r: usize, c: usize, ch_slot: usize) -> bool {
        self.observation(light, r, c, ch_slot) <= self.cfg.saturation_threshold
    }

    /// Exponentiated log-depth over the full grid (garbage outside the domain).
    pub fn depth_grid(&self, ztilde: &Array2<f64>) -> Vec<f64> {
        let (h, w) = self.shape();
        let mut z = vec![0.0; h * w];
        for r in 0..h {
            for c in 0..w {
                if self.mask[[r, c]] {
                    z[r * w + c] = ztilde[[r, c]].exp();
                }
            }
        }
        z
    }

    /// Geometry of one domain pixel at the current depth grid.
    pub fn pixel_geometry(&self, zgrid: &[f64], r: usize, c: usize) -> PixelGeom {
        let (_, w) = self.shape();
        let lin = r * w + c;
        let (tu, tv) = axis_taps(&self.mask, r, c, &self.capture.camera, self.cfg.stencil);

        let mut cols = [0u32; 5];
        let mut dgx = [0.0; 5];
        let mut dgy = [0.0; 5];
        // Slot 0 is always the pixel itself.
        cols[0] = self.col_of[lin] as u32;
        let mut ncols = 1usize;

        let mut zu = 0.0;
        for k in 0..tu.len as usize {
            let idx = tu.idx[k];
            let wgt = tu.w[k];
            zu += wgt * zgrid[idx];
            let col = self.col_of[idx] as u32;
            let slot = (0..ncols).find(|&s| cols[s] == col).unwrap_or_else(|| {
                cols[ncols] = col;
                ncols += 1;
                ncols - 1
            });
            // g_x = −z_u, and ∂z(idx)/∂z̃(idx) = z(idx).
            dgx[slot] -= wgt * zgrid[idx];
        }
        let mut zv = 0.0;
        for k in 0..tv.len as usize {
            let idx = tv.idx[k];
            let wgt = tv.w[k];
            zv += wgt * zgrid[idx];
            let col = self.col_of[idx] as u32;
            let slot = (0..ncols).find(|&s| cols[s] == col).unwrap_or_else(|| {
                cols[ncols] = col;
                ncols += 1;
                ncols - 1
            });
            dgy[slot] -= wgt * zgrid[idx];
        }

        let g = Vector3::new(-zu, -zv, 1.0);
        PixelGeom {
            x: Vector3::new(self.u[lin], self.v[lin], zgrid[lin]),
            l_norm: g.norm(),
            g,
            ncols,
            cols,
            dgx,
            dgy,
            self_slot: 0,
        }
    }

    /// Shading (and optionally its derivatives) of one light at one pixel.
    pub fn light_shade(&self, geom: &PixelGeom, light: usize, want_derivs: bool) -> LightShade {
        let l = &self.capture.lights[light];
        let vl = l.position - geom.x;
        let d = vl.norm();
        let mu = l.anisotropy_mu;

        let a_base = -l.principal_direction.dot(&vl) / d;
        let (a, lobe_active) = if mu == 0.0 {
            (1.0, false)
        } else if a_base > 0.0 {
            (a_base.powf(mu), true)
        } else {
            (0.0, false)
        };
        let s_num = vl.dot(&geom.g);

        let mut shade = LightShade {
            s_base: 0.0,
            ds_base: [0.0; 5],
        };
        if a == 0.0 || s_num <= 0.0 {
            // Clamped: zero shading, zero derivative (active-set convention).
            return shade;
        }
        let l_norm = geom.l_norm;
        let inv_ld3 = 1.0 / (l_norm * d * d * d);
        shade.s_base = a * s_num * inv_ld3;
        if !want_derivs {
            return shade;
        }

        for j in 0..geom.ncols {
            let dgx = geom.dgx[j];
            let dgy = geom.dgy[j];
            let d_snum = vl.x * dgx + vl.y * dgy;
            let d_l = (geom.g.x * dgx + geom.g.y * dgy) / l_norm;
            let mut acc = (a * d_snum - a * s_num * d_l / l_norm) * inv_ld3;
            if j == geom.self_slot {
                let dz = geom.x.z; // ∂z/∂z̃ = z
                // Surface point moves along +z: v_l loses dz in z.
                acc += a * (-dz * geom.g.z) * inv_ld3;
                let dd = -vl.z * dz / d;
                acc -= 3.0 * a * s_num * dd / d * inv_ld3;
                if lobe_active {
                    let d_abase = l.principal_direction.z * dz / d - a_base * dd / d;
                    let d_a = mu * a_base.powf(mu - 1.0) * d_abase;
                    acc += d_a * s_num * inv_ld3;
                }
            }
            shade.ds_base[j] = acc;
        }
        shade
    }

    /// Walk residual rows in deterministic order (pixels row-major, then
    /// lights, then channel slots), excluding saturated observations.
    ///
    /// The visitor receives `(pixel_linear, light, ch_slot, residual,
    /// geometry, jacobian_row)`; `jacobian_row[..geom.ncols]` holds
    /// `∂residual/∂z̃(col_j)` and is all zeros when `want_derivs` is false or
    /// the row is clamped.
    pub fn visit_rows<F>(
        &self,
        ztilde: &Array2<f64>,
        albedo: &ndarray::Array3<f64>,
        want_derivs: bool,
        mut visitor: F,
    ) where
        F: FnMut(usize, usize, usize, f64, &PixelGeom, &[f64; 5]),
    {
        let (h, w) = self.shape();
        let zgrid = self.depth_grid(ztilde);
        for r in 0..h {
            for c in 0..w {
                if !self.mask[[r, c]] {
                    continue;
                }
                let geom = self.pixel_geometry(&zgrid, r, c);
                for light in 0..self.capture.num_lights() {
                    let shade = self.light_shade(&geom, light, want_derivs);
                    for &ch in &self.channels {
                        if !self.included(light, r, c, ch) {
                            continue;
                        }
                        let scale = self.rho(albedo, r, c, ch) * self.psi(light, ch);
                        let residual = self.observation(light, r, c, ch) - scale * shade.s_base;
                        let mut jac_row = [0.0; 5];
                        if want_derivs {
                            for j in 0..geom.ncols {
                                jac_row[j] = -scale * shade.ds_base[j];
                            }
                        }
                        visitor(r * w + c, light, ch, residual, &geom, &jac_row);
                    }
                }
            }
        }
    }

    /// Data energy plus prior energy at the given state.
    pub fn energy(&self, ztilde: &Array2<f64>, albedo: &ndarray::Array3<f64>) -> f64 {
        let mut data = 0.0;
        self.visit_rows(ztilde, albedo, false, |_, _, _, residual, _, _| {
            data += residual * residual;
        });
        let mut prior = 0.0;
        for ((r, c), &m) in self.mask.indexed_iter() {
            if m {
                let dz = ztilde[[r, c]] - self.prior[[r, c]];
                prior += dz * dz;
            }
        }
        data + self.cfg.zeta * prior
    }

    /// Pixel-wise closed-form albedo update; returns the albedo grid (ρ̃ in
    /// all three channels for luminance mode) and a flag grid marking pixels
    /// where every light was degenerate for some channel.
    pub fn albedo_closed_form(
        &self,
        ztilde: &Array2<f64>,
    ) -> (ndarray::Array3<f64>, Array2<bool>) {
        let (h, w) = self.shape();
        let zgrid = self.depth_grid(ztilde);
        let mut albedo = ndarray::Array3::zeros((h, w, 3));
        let mut degenerate = Array2::from_elem((h, w), false);
        for r in 0..h {
            for c in 0..w {
                if !self.mask[[r, c]] {
                    continue;
                }
                let geom = self.pixel_geometry(&zgrid, r, c);
                let shades: Vec<f64> = (0..self.capture.num_lights())
                    .map(|light| self.light_shade(&geom, light, false).s_base)
                    .collect();
                for &ch in &self.channels {
                    let mut num = 0.0;
                    let mut den = 0.0;
                    for light in 0..self.capture.num_lights() {
                        if !self.included(light, r, c, ch) {
                            continue;
                        }
                        let s = self.psi(light, ch) * shades[light];
                        num += s * self.observation(light, r, c, ch);
                        den += s * s;
                    }
                    let rho = if den > 0.0 {
                        (num / den).max(0.0)
                    } else {
                        degenerate[[r, c]] = true;
                        0.0
                    };
                    match self.cfg.channel_mode {
                        ChannelMode::Rgb => albedo[[r, c, ch]] = rho,
                        ChannelMode::Luminance => {
                            for k in 0..3 {
                                albedo[[r, c, k]] = rho;
                            }
                        }
                    }
                }
            }
        }
        (albedo, degenerate)
    }
}
