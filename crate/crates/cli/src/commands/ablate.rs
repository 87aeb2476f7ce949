//! `nlps ablate-leds`: solve with LED subsets and tabulate accuracy.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use ndarray::Array2;

use nlps_core::io::{load_capture_dir, read_mask_png, read_pfm};
use nlps_core::metrics::{aae, mabse};
use nlps_core::scene::{CaptureSet, NormalMap};
use nlps_core::solver::solve;

use crate::config::{resolve_path, AblateBlock, RunConfig};
use crate::error::{input_error, runtime_error, CliError, CliResult};

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Capture directory with ground truth (gt_normals.pfm, gt_contact.png).
    #[arg(long)]
    pub capture: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// LED counts to evaluate, e.g. --counts 3 6 12.
    #[arg(long, num_args = 1..)]
    pub counts: Option<Vec<usize>>,
}

pub fn resolve(block: &AblateBlock, args: &AblateArgs) -> CliResult<AblateBlock> {
    let mut b = block.clone();
    if let Some(v) = &args.counts {
        b.counts = v.clone();
    }
    if b.counts.is_empty() {
        return Err(CliError::config("ablation needs at least one LED count"));
    }
    if b.counts.iter().any(|&c| c < 3) {
        return Err(CliError::config("LED counts below 3 cannot be solved"));
    }
    Ok(b)
}

/// First-N-by-index light subset of a capture.
fn subset(capture: &CaptureSet, n: usize) -> CaptureSet {
    CaptureSet {
        single_light_images: capture.single_light_images[..n].to_vec(),
        dark_image: capture.dark_image.clone(),
        trichrome_image: capture.trichrome_image.clone(),
        lights: capture.lights[..n].to_vec(),
        camera: capture.camera.clone(),
    }
}

pub fn run(
    run_config: &RunConfig,
    block: &AblateBlock,
    workdir: &Path,
    args: &AblateArgs,
) -> CliResult<()> {
    let capture_dir = resolve_path(workdir, &args.capture);
    let capture = load_capture_dir(&capture_dir).map_err(input_error)?;

    let gt_n = read_pfm(&capture_dir.join("gt_normals.pfm")).map_err(input_error)?;
    let (h, w, _) = gt_n.dim();
    let gt = NormalMap::new(gt_n, Array2::from_elem((h, w), true)).map_err(input_error)?;
    let region = match read_mask_png(&capture_dir.join("gt_contact.png")) {
        Ok(m) => m,
        Err(nlps_core::CoreError::MissingFile(_)) => Array2::from_elem((h, w), true),
        Err(e) => return Err(input_error(e)),
    };

    let mut rows = Vec::new();
    for &count in &block.counts {
        if count > capture.num_lights() {
            return Err(CliError::config(format!(
                "requested {count} LEDs but the capture has {}",
                capture.num_lights()
            )));
        }
        let sub = subset(&capture, count);
        let result = solve(&sub, &block.solver).map_err(runtime_error)?;
        let aae_deg = aae(&result.normals, &gt, &region).map_err(runtime_error)?;
        let mabse_val = mabse(&result.normals, &gt, &region).map_err(runtime_error)?;
        println!("{count} LEDs: AAE = {aae_deg:.4}°, MabsE = {mabse_val:.5}");
        rows.push((count, aae_deg, mabse_val));
    }

    let out = resolve_path(workdir, &args.out);
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", parent.display())))?;
    }
    let mut csv = String::from("count,aae_degrees,mabse\n");
    for (count, a, m) in &rows {
        csv.push_str(&format!("{count},{a},{m}\n"));
    }
    std::fs::File::create(&out)
        .and_then(|mut f| f.write_all(csv.as_bytes()))
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", out.display())))?;

    if let Some(parent) = out.parent() {
        let mut echo = run_config.clone();
        echo.ablate_leds = block.clone();
        echo.write_echo(parent)?;
    }
    Ok(())
}
