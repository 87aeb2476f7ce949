//! `nlps eval`: compare predicted normals against ground truth.

use std::path::{Path, PathBuf};

use clap::Args;
use ndarray::Array2;

use nlps_core::io::{read_mask_png, read_pfm, write_png8_rgb};
use nlps_core::metrics::{aae, error_map, mabse, MetricReport};
use nlps_core::scene::NormalMap;

use crate::config::{resolve_path, EvalBlock, RunConfig};
use crate::error::{input_error, runtime_error, CliError, CliResult};

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory with predicted normals.pfm (+ mask.png).
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory with ground-truth normals (normals.pfm or gt_normals.pfm).
    #[arg(long)]
    pub gt: PathBuf,
    /// Output directory for report.json and errmap.png.
    #[arg(long)]
    pub out: PathBuf,
    /// Extra evaluation mask (8-bit PNG), intersected with both validity masks.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Colormap saturation in degrees.
    #[arg(long)]
    pub max_degrees: Option<f64>,
}

pub fn resolve(block: &EvalBlock, args: &EvalArgs) -> CliResult<EvalBlock> {
    let mut b = block.clone();
    if let Some(v) = args.max_degrees {
        b.max_degrees = v;
    }
    if !(b.max_degrees > 0.0) {
        return Err(CliError::config("max_degrees must be positive"));
    }
    Ok(b)
}

/// Load a normal map from a result or render directory.
///
/// Accepts `normals.pfm` with `mask.png`, or the renderer's ground-truth
/// layout (`gt_normals.pfm` with `gt_contact.png` as the evaluation region).
pub fn load_normals(dir: &Path) -> CliResult<NormalMap> {
    let (normals_file, mask_file) = if dir.join("normals.pfm").exists() {
        ("normals.pfm", "mask.png")
    } else if dir.join("gt_normals.pfm").exists() {
        ("gt_normals.pfm", "gt_contact.png")
    } else {
        return Err(CliError::config(format!(
            "{} holds neither normals.pfm nor gt_normals.pfm",
            dir.display()
        )));
    };
    let n = read_pfm(&dir.join(normals_file)).map_err(input_error)?;
    let (h, w, _) = n.dim();
    let valid = match read_mask_png(&dir.join(mask_file)) {
        Ok(m) => m,
        Err(nlps_core::CoreError::MissingFile(_)) => Array2::from_elem((h, w), true),
        Err(e) => return Err(input_error(e)),
    };
    NormalMap::new(n, valid).map_err(input_error)
}

pub fn run(
    run_config: &RunConfig,
    block: &EvalBlock,
    workdir: &Path,
    args: &EvalArgs,
) -> CliResult<()> {
    let pred = load_normals(&resolve_path(workdir, &args.pred))?;
    let gt = load_normals(&resolve_path(workdir, &args.gt))?;
    let out = resolve_path(workdir, &args.out);

    if pred.shape() != gt.shape() {
        return Err(CliError::config(format!(
            "prediction {:?} does not match ground truth {:?}",
            pred.shape(),
            gt.shape()
        )));
    }
    let mut mask = Array2::from_elem(pred.shape(), true);
    if let Some(p) = &args.mask {
        let m = read_mask_png(&resolve_path(workdir, p)).map_err(input_error)?;
        if m.dim() != pred.shape() {
            return Err(CliError::config(format!(
                "mask {:?} does not match normals {:?}",
                m.dim(),
                pred.shape()
            )));
        }
        mask = m;
    }

    let aae_deg = aae(&pred, &gt, &mask).map_err(runtime_error)?;
    let mabse_val = mabse(&pred, &gt, &mask).map_err(runtime_error)?;
    let pixel_count = mask
        .indexed_iter()
        .filter(|&((r, c), &m)| m && pred.valid[[r, c]] && gt.valid[[r, c]])
        .count();
    let errmap = error_map(&pred, &gt, &mask, block.max_degrees).map_err(runtime_error)?;

    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", out.display())))?;
    let report = MetricReport {
        aae_degrees: aae_deg,
        mabse: mabse_val,
        pixel_count,
        per_press: Vec::new(),
    };
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::runtime(format!("cannot serialize report: {e}")))?;
    std::fs::write(out.join("report.json"), text + "\n")
        .map_err(|e| CliError::runtime(format!("cannot write report.json: {e}")))?;
    write_png8_rgb(&out.join("errmap.png"), &errmap).map_err(runtime_error)?;

    let mut echo = run_config.clone();
    echo.eval = block.clone();
    echo.write_echo(&out)?;
    println!(
        "AAE = {aae_deg:.4}°, MabsE = {mabse_val:.5} over {pixel_count} pixels"
    );
    Ok(())
}
