//! `nlps build-dataset`: pair trichrome pixels with solver normals.

use std::path::{Path, PathBuf};

use clap::Args;

use nlps_core::io::{
    export_dataset_csv, load_capture_dir, read_mask_png, read_pfm, write_dataset,
};
use nlps_core::pipeline::{
    build_samples, contact_mask, preprocess, CalibDataset, CalibSample, PressSamples,
    ProvenanceGroup,
};
use nlps_core::scene::NormalMap;

use crate::config::{resolve_path, BuildDatasetBlock, RunConfig};
use crate::error::{input_error, runtime_error, CliError, CliResult};

#[derive(Debug, Args)]
pub struct BuildDatasetArgs {
    /// Press-free reference capture directory (for contact masking).
    #[arg(long)]
    pub reference: PathBuf,
    /// Press capture directories, in press-id order.
    #[arg(long, num_args = 1.., required = true)]
    pub captures: Vec<PathBuf>,
    /// Solve result directories, parallel to --captures.
    #[arg(long, num_args = 1.., required = true)]
    pub solves: Vec<PathBuf>,
    /// Output dataset file (binary; a JSON companion is written alongside).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub min_blob: Option<usize>,
    #[arg(long)]
    pub per_press_cap: Option<usize>,
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// Also export a CSV copy for inspection.
    #[arg(long)]
    pub csv: bool,
}

pub fn resolve(block: &BuildDatasetBlock, args: &BuildDatasetArgs) -> CliResult<BuildDatasetBlock> {
    let mut b = block.clone();
    if let Some(v) = args.tau {
        b.tau = v;
    }
    if let Some(v) = args.min_blob {
        b.min_blob = v;
    }
    if let Some(v) = args.per_press_cap {
        b.per_press_cap = Some(v);
    }
    if let Some(v) = args.split_seed {
        b.split_seed = v;
    }
    if args.csv {
        b.export_csv = true;
    }
    if !(b.tau > 0.0) {
        return Err(CliError::config("tau must be positive"));
    }
    Ok(b)
}

fn load_solve_normals(dir: &Path) -> CliResult<NormalMap> {
    let n = read_pfm(&dir.join("normals.pfm")).map_err(input_error)?;
    let valid = read_mask_png(&dir.join("mask.png")).map_err(input_error)?;
    NormalMap::new(n, valid).map_err(input_error)
}

/// Deterministic strided subsampling to at most `cap` samples.
fn cap_samples(samples: Vec<CalibSample>, cap: Option<usize>) -> Vec<CalibSample> {
    match cap {
        Some(cap) if samples.len() > cap && cap > 0 => (0..cap)
            .map(|k| samples[k * samples.len() / cap])
            .collect(),
        _ => samples,
    }
}

pub fn run(
    run_config: &RunConfig,
    block: &BuildDatasetBlock,
    workdir: &Path,
    args: &BuildDatasetArgs,
) -> CliResult<()> {
    if args.captures.len() != args.solves.len() {
        return Err(CliError::config(format!(
            "{} captures but {} solve directories",
            args.captures.len(),
            args.solves.len()
        )));
    }
    let reference = load_capture_dir(&resolve_path(workdir, &args.reference)).map_err(input_error)?;
    let reference = preprocess(&reference);

    let mut presses = Vec::new();
    for (i, (cap_dir, solve_dir)) in args.captures.iter().zip(&args.solves).enumerate() {
        let cap_path = resolve_path(workdir, cap_dir);
        let capture = load_capture_dir(&cap_path).map_err(input_error)?;
        let capture = preprocess(&capture);
        if capture.shape() != reference.shape() {
            return Err(CliError::config(format!(
                "capture {} is {:?} but reference is {:?}",
                cap_path.display(),
                capture.shape(),
                reference.shape()
            )));
        }
        let normals = load_solve_normals(&resolve_path(workdir, solve_dir))?;
        if normals.shape() != capture.shape() {
            return Err(CliError::config(format!(
                "solve normals {:?} do not match capture {:?}",
                normals.shape(),
                capture.shape()
            )));
        }
        let mut mask = contact_mask(
            &reference.trichrome_image,
            &capture.trichrome_image,
            block.tau,
            block.min_blob,
        )
        .map_err(runtime_error)?;
        mask.zip_mut_with(&normals.valid, |m, &v| *m = *m && v);

        let samples = build_samples(&capture, &normals, &mask).map_err(runtime_error)?;
        let n_raw = samples.len();
        let samples = cap_samples(samples, block.per_press_cap);
        if samples.is_empty() {
            eprintln!(
                "warning: press {i} ({}) produced no samples (empty contact mask)",
                cap_path.display()
            );
        }
        println!(
            "press {i}: {} contact samples{}",
            samples.len(),
            if samples.len() != n_raw {
                format!(" (capped from {n_raw})")
            } else {
                String::new()
            }
        );
        let capture_id = cap_path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("press_{i:03}"));
        presses.push(PressSamples {
            capture_id,
            press_id: i as u32,
            samples,
        });
    }

    // One file holding every press, grouped; the train command derives the
    // split from split_seed.
    let mut samples = Vec::new();
    let mut groups = Vec::new();
    for p in &presses {
        groups.push(ProvenanceGroup {
            capture_id: p.capture_id.clone(),
            press_id: p.press_id,
            offset: samples.len(),
            len: p.samples.len(),
        });
        samples.extend(p.samples.iter().copied());
    }
    let dataset = CalibDataset {
        samples,
        groups,
        split_seed: block.split_seed,
    };

    let out = resolve_path(workdir, &args.out);
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", parent.display())))?;
    }
    write_dataset(&out, &dataset).map_err(runtime_error)?;
    if block.export_csv {
        export_dataset_csv(&out.with_extension("csv"), &dataset).map_err(runtime_error)?;
    }

    // Coverage diagnostic: how widely the dataset's normals span directions.
    let hist = dataset.normal_coverage(8, 4);
    let occupied = hist.iter().filter(|&&c| c > 0).count();
    println!(
        "dataset: {} samples from {} presses; normal coverage {} of {} direction bins",
        dataset.len(),
        dataset.groups.len(),
        occupied,
        hist.len()
    );

    if let Some(parent) = out.parent() {
        let mut echo = run_config.clone();
        echo.build_dataset = block.clone();
        echo.write_echo(parent)?;
    }
    Ok(())
}
