//! Minimal ASCII PLY point-cloud writer.

use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;

use crate::Result;

pub fn write_ply(path: &Path, points: &[Vector3<f64>]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "ply")?;
    writeln!(file, "format ascii 1.0")?;
    writeln!(file, "element vertex {}", points.len())?;
    writeln!(file, "property float x")?;
    writeln!(file, "property float y")?;
    writeln!(file, "property float z")?;
    writeln!(file, "end_header")?;
    for p in points {
        writeln!(file, "{} {} {}", p.x as f32, p.y as f32, p.z as f32)?;
    }
    file.flush()?;
    Ok(())
}
