//! `nlps render`: synthesize a capture directory with ground-truth geometry.

use std::path::Path;

use clap::Args;

use nlps_core::io::{save_capture_dir, write_mask_png, write_pfm, write_pfm_gray, ImageFormat};
use nlps_core::render::{render_capture_set, ring_lights, RenderOptions};
use nlps_core::scene::{make_synthetic_surface, CameraModel, Indenter, SurfaceState};

use crate::config::{resolve_path, RenderBlock, RunConfig, ShapeArg};
use crate::error::{input_error, runtime_error, CliError, CliResult};

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Output capture directory.
    #[arg(long)]
    pub out: std::path::PathBuf,
    /// Square image size in pixels.
    #[arg(long)]
    pub size: Option<usize>,
    /// Number of LEDs on the ring.
    #[arg(long)]
    pub lights: Option<usize>,
    /// Indenter shape pressed into the base surface.
    #[arg(long, value_enum)]
    pub shape: Option<ShapeArg>,
    /// Indenter center u (mm).
    #[arg(long)]
    pub press_u: Option<f64>,
    /// Indenter center v (mm).
    #[arg(long)]
    pub press_v: Option<f64>,
    /// Indentation depth (mm).
    #[arg(long)]
    pub press_depth: Option<f64>,
    /// Sphere indenter radius (mm).
    #[arg(long)]
    pub press_radius: Option<f64>,
    /// Cube indenter half-width (mm).
    #[arg(long)]
    pub press_half_width: Option<f64>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub dark_level: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Image container: png (16-bit) or pfm.
    #[arg(long)]
    pub format: Option<String>,
}

pub fn resolve(block: &RenderBlock, args: &RenderArgs) -> CliResult<RenderBlock> {
    let mut b = block.clone();
    if let Some(v) = args.size {
        b.size = v;
    }
    if let Some(v) = args.lights {
        b.lights = v;
    }
    if let Some(v) = args.noise_sigma {
        b.noise_sigma = v;
    }
    if let Some(v) = args.dark_level {
        b.dark_level = v;
    }
    if let Some(v) = args.seed {
        b.seed = v;
    }
    if let Some(v) = &args.format {
        b.format = v.clone();
    }
    if let Some(shape) = args.shape {
        let center = (args.press_u.unwrap_or(0.0), args.press_v.unwrap_or(0.0));
        let depth = args.press_depth.unwrap_or(1.0);
        let radius = args.press_radius.unwrap_or(4.0);
        let half_width = args.press_half_width.unwrap_or(2.0);
        b.surface.indenter = shape.to_indenter(radius, half_width, depth, center);
    } else {
        // Individual press flags adjust an existing indenter.
        match &mut b.surface.indenter {
            Indenter::Sphere {
                radius,
                depth,
                center,
            } => {
                if let Some(v) = args.press_radius {
                    *radius = v;
                }
                if let Some(v) = args.press_depth {
                    *depth = v;
                }
                if let Some(v) = args.press_u {
                    center.0 = v;
                }
                if let Some(v) = args.press_v {
                    center.1 = v;
                }
            }
            Indenter::Cube {
                half_width,
                depth,
                center,
            } => {
                if let Some(v) = args.press_half_width {
                    *half_width = v;
                }
                if let Some(v) = args.press_depth {
                    *depth = v;
                }
                if let Some(v) = args.press_u {
                    center.0 = v;
                }
                if let Some(v) = args.press_v {
                    center.1 = v;
                }
            }
            Indenter::None => {}
        }
    }
    if b.size == 0 {
        return Err(CliError::config("render size must be positive"));
    }
    if b.format != "png" && b.format != "pfm" {
        return Err(CliError::config(format!(
            "render format must be png or pfm, got '{}'",
            b.format
        )));
    }
    Ok(b)
}

pub fn camera_for(block: &RenderBlock) -> CameraModel {
    let n = block.size;
    CameraModel {
        image_width: n,
        image_height: n,
        pixel_pitch_u: block.footprint_mm / n as f64,
        pixel_pitch_v: block.footprint_mm / n as f64,
        principal_point: ((n as f64 - 1.0) / 2.0, (n as f64 - 1.0) / 2.0),
        nominal_distance: block.nominal_distance_mm,
    }
}

pub fn build_scene(block: &RenderBlock) -> CliResult<(CameraModel, SurfaceState, Vec<nlps_core::scene::LightSource>)> {
    let camera = camera_for(block);
    let surface = make_synthetic_surface(&block.surface, &camera).map_err(input_error)?;
    let lights = ring_lights(
        block.lights,
        block.ring_radius_mm,
        block.ring_z_mm,
        block.light_target_z_mm,
        block.anisotropy_mu,
        block.psi,
    );
    Ok((camera, surface, lights))
}

pub fn run(
    run_config: &RunConfig,
    block: &RenderBlock,
    workdir: &Path,
    args: &RenderArgs,
) -> CliResult<()> {
    let out = resolve_path(workdir, &args.out);
    let (camera, surface, lights) = build_scene(block)?;
    let opts = RenderOptions {
        noise_sigma: block.noise_sigma,
        dark_level: block.dark_level,
        quantization_bits: block.quantization_bits,
        saturation_cap: block.saturation_cap,
        rng_seed: block.seed,
    };
    let capture =
        render_capture_set(&surface, &lights, &camera, &opts).map_err(runtime_error)?;

    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", out.display())))?;
    let format = if block.format == "pfm" {
        ImageFormat::Pfm
    } else {
        ImageFormat::Png16
    };
    save_capture_dir(&capture, &out, format).map_err(runtime_error)?;

    // Ground-truth oracle artifacts for downstream evaluation.
    write_pfm_gray(&out.join("gt_depth.pfm"), &surface.depth.z).map_err(runtime_error)?;
    write_pfm(&out.join("gt_normals.pfm"), &surface.analytic_normals.n).map_err(runtime_error)?;
    write_mask_png(&out.join("gt_contact.png"), &surface.contact).map_err(runtime_error)?;

    let mut echo = run_config.clone();
    echo.render = block.clone();
    echo.write_echo(&out)?;
    println!(
        "rendered {} single-light images plus dark and trichrome into {}",
        capture.num_lights(),
        out.display()
    );
    Ok(())
}
