//! Structured run configuration with per-command blocks.
//!
//! A single JSON file configures every subcommand; command-line flags
//! override individual fields. Each command writes the fully resolved
//! configuration next to its outputs as `config.echo.json`, and re-running
//! with that echo reproduces the outputs byte-identically.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nlps_core::scene::{Indenter, SurfaceSpec};
use nlps_core::solver::SolverConfig;
use nlps_core::net::TrainConfig;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub render: RenderBlock,
    pub solve: SolveBlock,
    pub build_dataset: BuildDatasetBlock,
    pub train: TrainBlock,
    pub infer: InferBlock,
    pub eval: EvalBlock,
    pub ablate_leds: AblateBlock,
}

/// Synthetic scene and capture parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderBlock {
    /// Square image size in pixels.
    pub size: usize,
    /// Metric footprint (mm) covered by the image at any resolution.
    pub footprint_mm: f64,
    pub nominal_distance_mm: f64,
    pub lights: usize,
    pub ring_radius_mm: f64,
    pub ring_z_mm: f64,
    pub light_target_z_mm: f64,
    pub anisotropy_mu: f64,
    pub psi: [f64; 3],
    pub surface: SurfaceSpec,
    pub noise_sigma: f64,
    pub dark_level: f64,
    pub quantization_bits: Option<u8>,
    pub saturation_cap: f64,
    pub seed: u64,
    /// "png" (16-bit) or "pfm".
    pub format: String,
}

impl Default for RenderBlock {
    fn default() -> Self {
        RenderBlock {
            size: 128,
            footprint_mm: 12.8,
            nominal_distance_mm: 19.0,
            lights: 12,
            ring_radius_mm: 16.0,
            ring_z_mm: 36.0,
            light_target_z_mm: 18.0,
            anisotropy_mu: 2.0,
            psi: [380.0, 360.0, 340.0],
            surface: SurfaceSpec::dome(18.0, 30.0),
            noise_sigma: 0.0,
            dark_level: 0.0,
            quantization_bits: Some(16),
            saturation_cap: 1.0,
            seed: 0,
            format: "png".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveBlock {
    pub solver: SolverConfig,
    /// Downsample captures whose larger side exceeds this (box filter).
    pub target_resolution: usize,
    /// Solve at native resolution regardless of size.
    pub full_res: bool,
    /// Also export the reconstructed surface as `points.ply`.
    pub point_cloud: bool,
}

impl Default for SolveBlock {
    fn default() -> Self {
        SolveBlock {
            solver: SolverConfig::default(),
            target_resolution: 512,
            full_res: false,
            point_cloud: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildDatasetBlock {
    /// Contact-mask intensity threshold.
    pub tau: f64,
    /// Minimum connected-component size in pixels.
    pub min_blob: usize,
    /// Optional cap on samples per press (strided subsampling).
    pub per_press_cap: Option<usize>,
    pub split_seed: u64,
    pub export_csv: bool,
}

impl Default for BuildDatasetBlock {
    fn default() -> Self {
        BuildDatasetBlock {
            tau: 0.03,
            min_blob: 16,
            per_press_cap: None,
            split_seed: 0,
            export_csv: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainBlock {
    pub train: TrainConfig,
    /// Fraction of presses held out for validation.
    pub val_fraction: f64,
}

impl Default for TrainBlock {
    fn default() -> Self {
        TrainBlock {
            train: TrainConfig::default(),
            val_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferBlock {
    /// Contact-mask parameters when a reference capture is given.
    pub tau: f64,
    pub min_blob: usize,
}

impl Default for InferBlock {
    fn default() -> Self {
        InferBlock {
            tau: 0.03,
            min_blob: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalBlock {
    /// Error-map colormap saturation point in degrees.
    pub max_degrees: f64,
}

impl Default for EvalBlock {
    fn default() -> Self {
        EvalBlock { max_degrees: 25.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateBlock {
    pub counts: Vec<usize>,
    pub solver: SolverConfig,
}

impl Default for AblateBlock {
    fn default() -> Self {
        AblateBlock {
            counts: vec![3, 6, 12],
            solver: SolverConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<RunConfig> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::config(format!("cannot read config {}: {e}", p.display()))
                })?;
                serde_json::from_str(&text).map_err(|e| {
                    CliError::config(format!("cannot parse config {}: {e}", p.display()))
                })
            }
        }
    }

    /// Write the fully resolved configuration next to a command's outputs.
    pub fn write_echo(&self, out_dir: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::runtime(format!("cannot serialize config echo: {e}")))?;
        std::fs::write(out_dir.join("config.echo.json"), text + "\n")
            .map_err(|e| CliError::runtime(format!("cannot write config echo: {e}")))?;
        Ok(())
    }
}

/// Resolve a possibly relative path against the working directory.
pub fn resolve_path(workdir: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        workdir.join(path)
    }
}

/// Shape override used by the render command's flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ShapeArg {
    None,
    Sphere,
    Cube,
}

impl ShapeArg {
    pub fn to_indenter(self, radius: f64, half_width: f64, depth: f64, center: (f64, f64)) -> Indenter {
        match self {
            ShapeArg::None => Indenter::None,
            ShapeArg::Sphere => Indenter::Sphere {
                radius,
                depth,
                center,
            },
            ShapeArg::Cube => Indenter::Cube {
                half_width,
                depth,
                center,
            },
        }
    }
}
