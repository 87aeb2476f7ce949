//! File formats: PFM and 16-bit PNG images, scene metadata, capture
//! directories, calibration datasets, and network weights.

mod capture_dir;
mod dataset;
mod model;
mod pfm;
mod ply;
mod png16;
mod scene_json;

pub use capture_dir::{load_capture_dir, save_capture_dir, ImageFormat};
pub use dataset::{export_dataset_csv, read_dataset, write_dataset};
pub use model::{load_model, save_model};
pub use pfm::{read_pfm, read_pfm_gray, write_pfm, write_pfm_gray};
pub use ply::write_ply;
pub use png16::{read_mask_png, read_png16, write_mask_png, write_png16, write_png8_rgb};
pub use scene_json::{read_scene_json, write_scene_json, SceneDocument};
