//! Alternating least squares for log-depth and effective albedo.
//!
//! The energy
//!
//! ```text
//! E(z̃, ρ̃) = Σ_{p,i,c} (I_obs − I_pre(z̃, ρ̃))² + ζ Σ_p (z̃ − z̃₀)²
//! ```
//!
//! is minimized by alternating two steps until the relative decrease falls
//! below tolerance:
//!
//! 1. **Albedo update** — with z̃ fixed, each pixel/channel is a 1-D linear
//!    least-squares problem with a closed-form solution (clamped at 0).
//! 2. **Depth update** — with ρ̃ fixed, one Gauss-Newton step on z̃: the
//!    normal equations `(JᵀJ + ζI)Δ = −(Jᵀr + ζ(z̃ − z̃₀))` are solved by
//!    Jacobi-preconditioned conjugate gradients, then a backtracking line
//!    search halves the step until the energy strictly decreases (rejecting
//!    the step entirely if it never does).
//!
//! Both steps can only lower the energy, so the recorded history is
//! non-increasing by construction. Normals are never independent unknowns:
//! the result's normal map is recomputed from the recovered depth with the
//! same stencil the solver differentiated through.

mod jacobian;
mod pcg;
mod problem;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use jacobian::ResidualJacobian;
use pcg::NormalMatrix;
use problem::Problem;

use crate::pipeline::preprocess;
use crate::scene::{
    normals_from_depth_with, AlbedoMap, CaptureSet, DepthMap, LogDepthMap, NormalMap, StencilKind,
};
use crate::{CoreError, Result};

/// The effective albedo ρ̃: the per-pixel multiplicative factor estimated in
/// the closed-form step. With the solver's prediction model it coincides
/// with the physical albedo up to global scale.
pub type EffectiveAlbedoMap = AlbedoMap;

/// How the solver consumes white-light captures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    /// One residual per color channel (the model is per-channel anyway).
    #[default]
    Rgb,
    /// Collapse observations and source intensities to their channel mean;
    /// one residual per light. Retained for ablations.
    Luminance,
}

/// Log-depth prior z̃₀.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DepthPrior {
    /// `log(camera.nominal_distance)` everywhere.
    NominalDistance,
    /// `log(distance_mm)` everywhere.
    Scalar { distance_mm: f64 },
    /// Explicit per-pixel log-depth grid.
    LogMap {
        #[serde(skip)]
        ztilde: Array2<f64>,
    },
}

impl Default for DepthPrior {
    fn default() -> Self {
        DepthPrior::NominalDistance
    }
}

impl DepthPrior {
    pub(crate) fn resolve(
        &self,
        camera: &crate::scene::CameraModel,
        shape: (usize, usize),
    ) -> Result<Array2<f64>> {
        match self {
            DepthPrior::NominalDistance => {
                Ok(Array2::from_elem(shape, camera.nominal_distance.ln()))
            }
            DepthPrior::Scalar { distance_mm } => {
                if !(*distance_mm > 0.0) {
                    return Err(CoreError::InvalidParameter(format!(
                        "prior distance must be positive, got {distance_mm}"
                    )));
                }
                Ok(Array2::from_elem(shape, distance_mm.ln()))
            }
            DepthPrior::LogMap { ztilde } => {
                if ztilde.dim() != shape {
                    return Err(CoreError::shape(
                        "depth prior",
                        format!("{shape:?}"),
                        format!("{:?}", ztilde.dim()),
                    ));
                }
                Ok(ztilde.clone())
            }
        }
    }
}

/// Solver configuration; defaults are the tested baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Prior regularization weight ζ ≥ 0.
    pub zeta: f64,
    pub prior: DepthPrior,
    pub max_outer_iters: usize,
    /// Stop when the relative energy decrease over one outer iteration falls
    /// below this.
    pub energy_rel_tol: f64,
    /// PCG stops at `‖r‖ ≤ pcg_tol · ‖b‖`.
    pub pcg_tol: f64,
    pub pcg_max_iters: usize,
    pub backtracking_max_halvings: u32,
    pub channel_mode: ChannelMode,
    /// Observations above this intensity are excluded per light and channel.
    pub saturation_threshold: f64,
    pub stencil: StencilKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            zeta: 1e-4,
            prior: DepthPrior::default(),
            max_outer_iters: 50,
            energy_rel_tol: 1e-6,
            pcg_tol: 1e-8,
            pcg_max_iters: 500,
            backtracking_max_halvings: 25,
            channel_mode: ChannelMode::default(),
            saturation_threshold: 0.98,
            stencil: StencilKind::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta >= 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "zeta must be >= 0, got {}",
                self.zeta
            )));
        }
        for (name, v) in [
            ("energy_rel_tol", self.energy_rel_tol),
            ("pcg_tol", self.pcg_tol),
            ("saturation_threshold", self.saturation_threshold),
        ] {
            if !(v > 0.0) {
                return Err(CoreError::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Closed-form albedo update result.
#[derive(Debug, Clone)]
pub struct AlbedoUpdate {
    pub albedo: EffectiveAlbedoMap,
    /// Pixels where some channel had no usable shading (`Σ s² = 0`).
    pub degenerate: Array2<bool>,
}

/// Outcome of one Gauss-Newton depth step.
#[derive(Debug, Clone)]
pub struct DepthStepInfo {
    pub pcg_iterations: usize,
    pub pcg_converged: bool,
    /// Backtracking halvings performed before acceptance.
    pub halvings: u32,
    /// False when no step length decreased the energy (state unchanged).
    pub accepted: bool,
    pub step_norm: f64,
    pub energy_after: f64,
}

/// Full solve output.
#[derive(Debug, Clone)]
pub struct SolverResult {
    pub log_depth: LogDepthMap,
    pub depth: DepthMap,
    /// `normals_from_depth` of the recovered depth, bit-for-bit.
    pub normals: NormalMap,
    pub effective_albedo: EffectiveAlbedoMap,
    /// Reported as the effective albedo (see module docs).
    pub physical_albedo: AlbedoMap,
    /// Energy after initialization and after each outer iteration.
    pub energy_history: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub pcg_all_converged: bool,
}

fn check_finite(ztilde: &LogDepthMap, albedo: &AlbedoMap) -> Result<()> {
    for ((r, c), &m) in ztilde.valid.indexed_iter() {
        if m && !ztilde.ztilde[[r, c]].is_finite() {
            return Err(CoreError::Numeric(format!(
                "log-depth not finite at ({r}, {c})"
            )));
        }
    }
    if albedo.rho.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::Numeric("albedo not finite".into()));
    }
    Ok(())
}

/// Energy of a state against a capture (dark-subtracted internally).
pub fn energy(
    log_depth: &LogDepthMap,
    albedo: &EffectiveAlbedoMap,
    capture: &CaptureSet,
    cfg: &SolverConfig,
) -> Result<f64> {
    cfg.validate()?;
    check_finite(log_depth, albedo)?;
    let capture = preprocess(capture);
    let problem = Problem::new(&capture, &log_depth.valid, cfg)?;
    Ok(problem.energy(&log_depth.ztilde, &albedo.rho))
}

/// Closed-form per-pixel albedo update with z̃ fixed.
pub fn update_albedo(
    log_depth: &LogDepthMap,
    capture: &CaptureSet,
    cfg: &SolverConfig,
) -> Result<AlbedoUpdate> {
    cfg.validate()?;
    let capture = preprocess(capture);
    let problem = Problem::new(&capture, &log_depth.valid, cfg)?;
    let (rho, degenerate) = problem.albedo_closed_form(&log_depth.ztilde);
    Ok(AlbedoUpdate {
        albedo: AlbedoMap::new(rho)?,
        degenerate,
    })
}

/// Residual vector and sparse Jacobian with respect to log-depth.
pub fn residuals_and_jacobian(
    log_depth: &LogDepthMap,
    albedo: &EffectiveAlbedoMap,
    capture: &CaptureSet,
    cfg: &SolverConfig,
) -> Result<ResidualJacobian> {
    cfg.validate()?;
    check_finite(log_depth, albedo)?;
    let capture = preprocess(capture);
    let problem = Problem::new(&capture, &log_depth.valid, cfg)?;
    Ok(build_jacobian(&problem, &log_depth.ztilde, &albedo.rho))
}

fn build_jacobian(problem: &Problem, ztilde: &Array2<f64>, rho: &ndarray::Array3<f64>) -> ResidualJacobian {
    let mut jac = ResidualJacobian {
        residuals: Vec::new(),
        row_pixel: Vec::new(),
        row_light: Vec::new(),
        row_channel: Vec::new(),
        row_ptr: vec![0],
        col_idx: Vec::new(),
        values: Vec::new(),
        columns: problem.cols.clone(),
    };
    problem.visit_rows(ztilde, rho, true, |pixel, light, ch, residual, geom, jac_row| {
        jac.residuals.push(residual);
        jac.row_pixel.push(pixel as u32);
        jac.row_light.push(light as u16);
        jac.row_channel.push(ch as u8);
        for j in 0..geom.ncols {
            if jac_row[j] != 0.0 {
                jac.col_idx.push(geom.cols[j]);
                jac.values.push(jac_row[j]);
            }
        }
        jac.row_ptr.push(jac.col_idx.len());
    });
    jac
}

/// One Gauss-Newton step on log-depth with ρ̃ fixed, including the
/// backtracking line search.
pub fn update_depth(
    log_depth: &LogDepthMap,
    albedo: &EffectiveAlbedoMap,
    capture: &CaptureSet,
    cfg: &SolverConfig,
) -> Result<(LogDepthMap, DepthStepInfo)> {
    cfg.validate()?;
    check_finite(log_depth, albedo)?;
    let capture = preprocess(capture);
    let problem = Problem::new(&capture, &log_depth.valid, cfg)?;
    let (ztilde, info) = depth_step(&problem, &log_depth.ztilde, &albedo.rho)?;
    Ok((
        LogDepthMap {
            ztilde,
            valid: problem.mask.clone(),
        },
        info,
    ))
}

fn depth_step(
    problem: &Problem,
    ztilde: &Array2<f64>,
    rho: &ndarray::Array3<f64>,
) -> Result<(Array2<f64>, DepthStepInfo)> {
    let (_, w) = problem.shape();
    let n = problem.cols.len();
    let energy_before = problem.energy(ztilde, rho);

    // Assemble JᵀJ and Jᵀr without materializing J.
    let mut normal = NormalMatrix::new(&problem.cols, &problem.col_of, problem.shape());
    let mut jt_r = vec![0.0; n];
    problem.visit_rows(ztilde, rho, true, |_pixel, _light, _ch, residual, geom, jac_row| {
        let pixel_of = |col: u32| {
            let pix = problem.cols[col as usize] as usize;
            ((pix / w) as i32, (pix % w) as i32)
        };
        normal.accumulate_row(&geom.cols, jac_row, geom.ncols, pixel_of);
        for j in 0..geom.ncols {
            jt_r[geom.cols[j] as usize] += jac_row[j] * residual;
        }
    });
    normal.add_diagonal(problem.cfg.zeta);

    // Right-hand side: −(Jᵀr + ζ(z̃ − z̃₀)).
    let mut b = vec![0.0; n];
    for (j, &pix) in problem.cols.iter().enumerate() {
        let (r, c) = (pix as usize / w, pix as usize % w);
        b[j] = -(jt_r[j] + problem.cfg.zeta * (ztilde[[r, c]] - problem.prior[[r, c]]));
    }

    let outcome = pcg::pcg(&normal, &b, problem.cfg.pcg_tol, problem.cfg.pcg_max_iters);
    let step_norm = outcome.solution.iter().map(|v| v * v).sum::<f64>().sqrt();

    // Backtracking: halve α until the energy strictly decreases.
    let mut alpha = 1.0;
    let mut halvings = 0;
    let mut accepted = false;
    let mut best = ztilde.clone();
    let mut energy_after = energy_before;
    loop {
        let mut trial = ztilde.clone();
        for (j, &pix) in problem.cols.iter().enumerate() {
            let (r, c) = (pix as usize / w, pix as usize % w);
            trial[[r, c]] += alpha * outcome.solution[j];
        }
        let e = problem.energy(&trial, rho);
        if e.is_finite() && e < energy_before {
            best = trial;
            energy_after = e;
            accepted = true;
            break;
        }
        if halvings >= problem.cfg.backtracking_max_halvings {
            break;
        }
        alpha *= 0.5;
        halvings += 1;
    }

    Ok((
        best,
        DepthStepInfo {
            pcg_iterations: outcome.iterations,
            pcg_converged: outcome.converged,
            halvings,
            accepted,
            step_norm,
            energy_after,
        },
    ))
}

/// Full alternating solve over the entire frame.
pub fn solve(capture: &CaptureSet, cfg: &SolverConfig) -> Result<SolverResult> {
    let (h, w) = capture.shape();
    solve_masked(capture, &Array2::from_elem((h, w), true), cfg)
}

/// Full alternating solve restricted to a pixel mask.
pub fn solve_masked(
    capture: &CaptureSet,
    mask: &Array2<bool>,
    cfg: &SolverConfig,
) -> Result<SolverResult> {
    cfg.validate()?;
    capture.validate()?;
    let capture = preprocess(capture);
    let problem = Problem::new(&capture, mask, cfg)?;

    // Guard against a fully saturated capture: no usable rows anywhere.
    let mut any_row = false;
    'outer: for ((r, c), &m) in problem.mask.indexed_iter() {
        if !m {
            continue;
        }
        for light in 0..capture.num_lights() {
            for &ch in &problem.channels {
                if problem.included(light, r, c, ch) {
                    any_row = true;
                    break 'outer;
                }
            }
        }
    }
    if !any_row {
        return Err(CoreError::EmptyMask(
            "all observations saturated or masked".into(),
        ));
    }

    let mut ztilde = problem.prior.clone();
    let (mut rho, _) = problem.albedo_closed_form(&ztilde);
    let mut energy_history = vec![problem.energy(&ztilde, &rho)];
    let mut converged = false;
    let mut iterations = 0;
    let mut pcg_all_converged = true;

    for _ in 0..cfg.max_outer_iters {
        let (z_next, info) = depth_step(&problem, &ztilde, &rho)?;
        pcg_all_converged &= info.pcg_converged;
        ztilde = z_next;
        let (rho_next, _) = problem.albedo_closed_form(&ztilde);
        rho = rho_next;
        let e = problem.energy(&ztilde, &rho);
        let e_prev = *energy_history.last().expect("history non-empty");
        energy_history.push(e);
        iterations += 1;
        if e_prev - e <= cfg.energy_rel_tol * e_prev.abs() {
            converged = true;
            break;
        }
    }

    let log_depth = LogDepthMap {
        ztilde,
        valid: problem.mask.clone(),
    };
    let depth = log_depth.to_depth()?;
    let normals = normals_from_depth_with(&depth, &capture.camera, cfg.stencil)?;
    let effective_albedo = AlbedoMap::new(rho)?;

    Ok(SolverResult {
        log_depth,
        depth,
        normals,
        physical_albedo: effective_albedo.clone(),
        effective_albedo,
        energy_history,
        converged,
        iterations,
        pcg_all_converged,
    })
}
