//! `nlps solve`: reconstruct depth, normals, and albedo from a capture.

use std::io::Write;
use std::path::Path;

use clap::Args;
use serde::Serialize;

use nlps_core::io::{
    load_capture_dir, read_mask_png, write_mask_png, write_pfm, write_pfm_gray, write_ply,
};
use nlps_core::pipeline::downsample_capture;
use nlps_core::scene::export_point_cloud;
use nlps_core::solver::{solve_masked, SolverConfig, SolverResult};

use crate::config::{resolve_path, RunConfig, SolveBlock};
use crate::error::{input_error, runtime_error, CliError, CliResult};

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Capture directory to reconstruct.
    #[arg(long)]
    pub capture: std::path::PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: std::path::PathBuf,
    /// Restrict the solve to a mask (8-bit PNG).
    #[arg(long)]
    pub mask: Option<std::path::PathBuf>,
    /// Regularization weight ζ.
    #[arg(long)]
    pub zeta: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub energy_rel_tol: Option<f64>,
    /// Solve at native resolution.
    #[arg(long)]
    pub full_res: bool,
    /// Downsampling target for the larger image side.
    #[arg(long)]
    pub target_resolution: Option<usize>,
    /// Use luminance instead of per-channel residuals.
    #[arg(long)]
    pub luminance: bool,
    /// Export the reconstructed points as points.ply.
    #[arg(long)]
    pub point_cloud: bool,
}

pub fn resolve(block: &SolveBlock, args: &SolveArgs) -> CliResult<SolveBlock> {
    let mut b = block.clone();
    if let Some(v) = args.zeta {
        b.solver.zeta = v;
    }
    if let Some(v) = args.max_iters {
        b.solver.max_outer_iters = v;
    }
    if let Some(v) = args.energy_rel_tol {
        b.solver.energy_rel_tol = v;
    }
    if args.luminance {
        b.solver.channel_mode = nlps_core::solver::ChannelMode::Luminance;
    }
    if args.full_res {
        b.full_res = true;
    }
    if let Some(v) = args.target_resolution {
        b.target_resolution = v;
    }
    if args.point_cloud {
        b.point_cloud = true;
    }
    b.solver.validate().map_err(input_error)?;
    if b.target_resolution == 0 {
        return Err(CliError::config("target_resolution must be positive"));
    }
    Ok(b)
}

#[derive(Serialize)]
struct ResultDoc<'a> {
    converged: bool,
    iterations: usize,
    pcg_all_converged: bool,
    energy_initial: f64,
    energy_final: f64,
    solver: &'a SolverConfig,
}

pub fn write_result_dir(
    out: &Path,
    result: &SolverResult,
    camera: &nlps_core::scene::CameraModel,
    cfg: &SolverConfig,
    point_cloud: bool,
) -> CliResult<()> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", out.display())))?;
    write_pfm_gray(&out.join("depth.pfm"), &result.depth.z).map_err(runtime_error)?;
    write_pfm(&out.join("normals.pfm"), &result.normals.n).map_err(runtime_error)?;
    write_pfm(&out.join("albedo.pfm"), &result.physical_albedo.rho).map_err(runtime_error)?;
    write_mask_png(&out.join("mask.png"), &result.normals.valid).map_err(runtime_error)?;

    let mut energy_csv = String::from("iteration,energy\n");
    for (k, e) in result.energy_history.iter().enumerate() {
        energy_csv.push_str(&format!("{k},{e}\n"));
    }
    std::fs::File::create(out.join("energy.csv"))
        .and_then(|mut f| f.write_all(energy_csv.as_bytes()))
        .map_err(|e| CliError::runtime(format!("cannot write energy.csv: {e}")))?;

    let doc = ResultDoc {
        converged: result.converged,
        iterations: result.iterations,
        pcg_all_converged: result.pcg_all_converged,
        energy_initial: *result.energy_history.first().unwrap_or(&f64::NAN),
        energy_final: *result.energy_history.last().unwrap_or(&f64::NAN),
        solver: cfg,
    };
    let text = serde_json::to_string_pretty(&doc)
        .map_err(|e| CliError::runtime(format!("cannot serialize result.json: {e}")))?;
    std::fs::write(out.join("result.json"), text + "\n")
        .map_err(|e| CliError::runtime(format!("cannot write result.json: {e}")))?;

    if point_cloud {
        let points = export_point_cloud(&result.depth, camera).map_err(runtime_error)?;
        write_ply(&out.join("points.ply"), &points).map_err(runtime_error)?;
    }
    Ok(())
}

pub fn run(
    run_config: &RunConfig,
    block: &SolveBlock,
    workdir: &Path,
    args: &SolveArgs,
) -> CliResult<()> {
    let capture_dir = resolve_path(workdir, &args.capture);
    let out = resolve_path(workdir, &args.out);

    let mut capture = load_capture_dir(&capture_dir).map_err(input_error)?;
    let (h, w) = capture.shape();
    if !block.full_res {
        let max_side = h.max(w);
        if max_side > block.target_resolution {
            let factor = max_side.div_ceil(block.target_resolution);
            capture = downsample_capture(&capture, factor).map_err(input_error)?;
            println!(
                "downsampled {}×{} capture by {}× to {:?}",
                h,
                w,
                factor,
                capture.shape()
            );
        }
    }

    let mask = match &args.mask {
        Some(p) => read_mask_png(&resolve_path(workdir, p)).map_err(input_error)?,
        None => ndarray::Array2::from_elem(capture.shape(), true),
    };
    if mask.dim() != capture.shape() {
        return Err(CliError::config(format!(
            "mask {:?} does not match capture {:?}",
            mask.dim(),
            capture.shape()
        )));
    }

    let result = solve_masked(&capture, &mask, &block.solver).map_err(runtime_error)?;
    write_result_dir(&out, &result, &capture.camera, &block.solver, block.point_cloud)?;

    let mut echo = run_config.clone();
    echo.solve = block.clone();
    echo.write_echo(&out)?;
    println!(
        "solve finished after {} outer iterations (converged: {}), energy {:.3e} → {:.3e}",
        result.iterations,
        result.converged,
        result.energy_history.first().unwrap_or(&f64::NAN),
        result.energy_history.last().unwrap_or(&f64::NAN),
    );
    Ok(())
}
