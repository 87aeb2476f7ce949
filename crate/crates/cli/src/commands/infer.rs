//! `nlps infer`: single-image normal inference with a trained network.

use std::path::{Path, PathBuf};

use clap::Args;

use nlps_core::io::{load_capture_dir, load_model, read_mask_png, write_mask_png, write_pfm};
use nlps_core::net::infer_image;
use nlps_core::pipeline::{contact_mask, preprocess};

use crate::config::{resolve_path, InferBlock, RunConfig};
use crate::error::{input_error, runtime_error, CliError, CliResult};

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Trained weight file.
    #[arg(long)]
    pub model: PathBuf,
    /// Capture directory; inference reads its trichrome image.
    #[arg(long)]
    pub capture: PathBuf,
    /// Output directory for normals.pfm and mask.png.
    #[arg(long)]
    pub out: PathBuf,
    /// Explicit inference mask (8-bit PNG).
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Press-free reference capture for contact masking.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub min_blob: Option<usize>,
}

pub fn resolve(block: &InferBlock, args: &InferArgs) -> CliResult<InferBlock> {
    let mut b = block.clone();
    if let Some(v) = args.tau {
        b.tau = v;
    }
    if let Some(v) = args.min_blob {
        b.min_blob = v;
    }
    if !(b.tau > 0.0) {
        return Err(CliError::config("tau must be positive"));
    }
    Ok(b)
}

pub fn run(
    run_config: &RunConfig,
    block: &InferBlock,
    workdir: &Path,
    args: &InferArgs,
) -> CliResult<()> {
    let model = load_model(&resolve_path(workdir, &args.model)).map_err(input_error)?;
    let capture = load_capture_dir(&resolve_path(workdir, &args.capture)).map_err(input_error)?;
    let capture = preprocess(&capture);
    let out = resolve_path(workdir, &args.out);

    let mask = if let Some(p) = &args.mask {
        read_mask_png(&resolve_path(workdir, p)).map_err(input_error)?
    } else if let Some(refdir) = &args.reference {
        let reference = load_capture_dir(&resolve_path(workdir, refdir)).map_err(input_error)?;
        let reference = preprocess(&reference);
        contact_mask(
            &reference.trichrome_image,
            &capture.trichrome_image,
            block.tau,
            block.min_blob,
        )
        .map_err(runtime_error)?
    } else {
        ndarray::Array2::from_elem(capture.shape(), true)
    };
    if mask.dim() != capture.shape() {
        return Err(CliError::config(format!(
            "mask {:?} does not match capture {:?}",
            mask.dim(),
            capture.shape()
        )));
    }

    let normals = infer_image(&model, &capture.trichrome_image, &mask).map_err(runtime_error)?;

    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", out.display())))?;
    write_pfm(&out.join("normals.pfm"), &normals.n).map_err(runtime_error)?;
    write_mask_png(&out.join("mask.png"), &normals.valid).map_err(runtime_error)?;

    let mut echo = run_config.clone();
    echo.infer = block.clone();
    echo.write_echo(&out)?;
    println!(
        "inferred normals for {} pixels into {}",
        normals.valid.iter().filter(|&&m| m).count(),
        out.display()
    );
    Ok(())
}
