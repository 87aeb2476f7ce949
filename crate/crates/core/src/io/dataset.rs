//! Calibration dataset file format.
//!
//! Binary layout (all little-endian):
//!
//! ```text
//! magic   4 bytes  "NLPS"
//! version u16      1
//! count   u64      number of records
//! records count × 8 f32: u, v, r, g, b, nx, ny, nz
//! ```
//!
//! A JSON companion at the same stem (`<name>.json`) carries provenance
//! groups and the split seed. A CSV export with a header row is available
//! for inspection.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::pipeline::{CalibDataset, CalibSample, ProvenanceGroup};
use crate::{CoreError, Result};

const MAGIC: &[u8; 4] = b"NLPS";
const VERSION: u16 = 1;
const RECORD_BYTES: usize = 8 * 4;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetMeta {
    groups: Vec<ProvenanceGroup>,
    split_seed: u64,
}

fn json_companion(path: &Path) -> std::path::PathBuf {
    path.with_extension("json")
}

/// Write `<path>` (binary records) and `<stem>.json` (provenance).
pub fn write_dataset(path: &Path, dataset: &CalibDataset) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(MAGIC)?;
    file.write_all(&VERSION.to_le_bytes())?;
    file.write_all(&(dataset.samples.len() as u64).to_le_bytes())?;
    for s in &dataset.samples {
        for v in [s.u, s.v, s.r, s.g, s.b, s.nx, s.ny, s.nz] {
            file.write_all(&v.to_le_bytes())?;
        }
    }
    file.flush()?;

    let meta = DatasetMeta {
        groups: dataset.groups.clone(),
        split_seed: dataset.split_seed,
    };
    let json_path = json_companion(path);
    let text = serde_json::to_string_pretty(&meta).map_err(|e| CoreError::Json {
        path: json_path.display().to_string(),
        source: e,
    })?;
    std::fs::write(&json_path, text + "\n")?;
    Ok(())
}

/// Read a dataset written by [`write_dataset`].
pub fn read_dataset(path: &Path) -> Result<CalibDataset> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path).map_err(|e| {
        match e.kind() {
            std::io::ErrorKind::NotFound => CoreError::MissingFile(path.to_path_buf()),
            _ => CoreError::Io(e),
        }
    })?);
    let display = path.display().to_string();

    let mut magic = [0u8; 4];
    file.read_exact(&mut magic)
        .map_err(|_| CoreError::format(&display, "file too short for magic"))?;
    if &magic != MAGIC {
        return Err(CoreError::format(
            &display,
            format!("bad magic {magic:?}, expected {MAGIC:?}"),
        ));
    }
    let mut buf2 = [0u8; 2];
    file.read_exact(&mut buf2)
        .map_err(|_| CoreError::format(&display, "file too short for version"))?;
    let version = u16::from_le_bytes(buf2);
    if version != VERSION {
        return Err(CoreError::Version {
            path: display,
            expected: VERSION,
            found: version,
        });
    }
    let mut buf8 = [0u8; 8];
    file.read_exact(&mut buf8)
        .map_err(|_| CoreError::format(&display, "file too short for record count"))?;
    let count = u64::from_le_bytes(buf8) as usize;

    let mut payload = Vec::new();
    file.read_to_end(&mut payload)?;
    if payload.len() != count * RECORD_BYTES {
        return Err(CoreError::format(
            &display,
            format!(
                "payload is {} bytes, expected {} for {count} records",
                payload.len(),
                count * RECORD_BYTES
            ),
        ));
    }
    let mut samples = Vec::with_capacity(count);
    for rec in payload.chunks_exact(RECORD_BYTES) {
        let f = |i: usize| f32::from_le_bytes([rec[i * 4], rec[i * 4 + 1], rec[i * 4 + 2], rec[i * 4 + 3]]);
        samples.push(CalibSample {
            u: f(0),
            v: f(1),
            r: f(2),
            g: f(3),
            b: f(4),
            nx: f(5),
            ny: f(6),
            nz: f(7),
        });
    }

    let json_path = json_companion(path);
    let text = std::fs::read_to_string(&json_path)
        .map_err(|_| CoreError::MissingFile(json_path.clone()))?;
    let meta: DatasetMeta = serde_json::from_str(&text).map_err(|e| CoreError::Json {
        path: json_path.display().to_string(),
        source: e,
    })?;
    let covered: usize = meta.groups.iter().map(|g| g.len).sum();
    if covered != samples.len() {
        return Err(CoreError::format(
            json_path.display().to_string(),
            format!(
                "provenance covers {covered} samples but file has {}",
                samples.len()
            ),
        ));
    }
    Ok(CalibDataset {
        samples,
        groups: meta.groups,
        split_seed: meta.split_seed,
    })
}

/// Human-readable CSV export with a header row.
pub fn export_dataset_csv(path: &Path, dataset: &CalibDataset) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "u,v,r,g,b,nx,ny,nz")?;
    for s in &dataset.samples {
        writeln!(
            file,
            "{},{},{},{},{},{},{},{}",
            s.u, s.v, s.r, s.g, s.b, s.nx, s.ny, s.nz
        )?;
    }
    file.flush()?;
    Ok(())
}
