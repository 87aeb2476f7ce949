//! Portable FloatMap (PFM) reader/writer.
//!
//! Standard PFM: ASCII header (`PF` color / `Pf` grayscale, width, height,
//! scale), then raw 32-bit floats with rows stored bottom-to-top. A negative
//! scale marks little-endian data; we always write `-1.0`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, Array3};

use crate::{CoreError, Result};

fn read_token<R: Read>(reader: &mut R, path: &Path) -> Result<String> {
    let mut tok = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if reader.read(&mut byte)? == 0 {
            return Err(CoreError::format(
                path.display().to_string(),
                "unexpected end of PFM header",
            ));
        }
        if byte[0].is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(byte[0]);
    }
    String::from_utf8(tok)
        .map_err(|_| CoreError::format(path.display().to_string(), "non-UTF8 PFM header"))
}

fn read_header<R: Read>(reader: &mut R, path: &Path) -> Result<(bool, usize, usize, bool)> {
    let magic = read_token(reader, path)?;
    let color = match magic.as_str() {
        "PF" => true,
        "Pf" => false,
        other => {
            return Err(CoreError::format(
                path.display().to_string(),
                format!("bad PFM magic '{other}'"),
            ))
        }
    };
    let w: usize = read_token(reader, path)?
        .parse()
        .map_err(|_| CoreError::format(path.display().to_string(), "bad PFM width"))?;
    let h: usize = read_token(reader, path)?
        .parse()
        .map_err(|_| CoreError::format(path.display().to_string(), "bad PFM height"))?;
    let scale: f64 = read_token(reader, path)?
        .parse()
        .map_err(|_| CoreError::format(path.display().to_string(), "bad PFM scale"))?;
    Ok((color, w, h, scale < 0.0))
}

fn read_samples<R: Read>(
    reader: &mut R,
    count: usize,
    little_endian: bool,
    path: &Path,
) -> Result<Vec<f32>> {
    let mut raw = vec![0u8; count * 4];
    reader.read_exact(&mut raw).map_err(|_| {
        CoreError::format(path.display().to_string(), "truncated PFM payload")
    })?;
    Ok(raw
        .chunks_exact(4)
        .map(|b| {
            let arr = [b[0], b[1], b[2], b[3]];
            if little_endian {
                f32::from_le_bytes(arr)
            } else {
                f32::from_be_bytes(arr)
            }
        })
        .collect())
}

/// Read a 3-channel PFM into an `(H, W, 3)` array.
pub fn read_pfm(path: &Path) -> Result<Array3<f64>> {
    let mut reader = BufReader::new(File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CoreError::MissingFile(path.to_path_buf()),
        _ => CoreError::Io(e),
    })?);
    let (color, w, h, le) = read_header(&mut reader, path)?;
    if !color {
        return Err(CoreError::format(
            path.display().to_string(),
            "expected color PFM (PF), found grayscale (Pf)",
        ));
    }
    let samples = read_samples(&mut reader, w * h * 3, le, path)?;
    let mut img = Array3::zeros((h, w, 3));
    for (row_from_bottom, row) in samples.chunks_exact(w * 3).enumerate() {
        let r = h - 1 - row_from_bottom;
        for c in 0..w {
            for ch in 0..3 {
                img[[r, c, ch]] = row[c * 3 + ch] as f64;
            }
        }
    }
    Ok(img)
}

/// Read a grayscale PFM into an `(H, W)` array.
pub fn read_pfm_gray(path: &Path) -> Result<Array2<f64>> {
    let mut reader = BufReader::new(File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CoreError::MissingFile(path.to_path_buf()),
        _ => CoreError::Io(e),
    })?);
    let (color, w, h, le) = read_header(&mut reader, path)?;
    if color {
        return Err(CoreError::format(
            path.display().to_string(),
            "expected grayscale PFM (Pf), found color (PF)",
        ));
    }
    let samples = read_samples(&mut reader, w * h, le, path)?;
    let mut img = Array2::zeros((h, w));
    for (row_from_bottom, row) in samples.chunks_exact(w).enumerate() {
        let r = h - 1 - row_from_bottom;
        for c in 0..w {
            img[[r, c]] = row[c] as f64;
        }
    }
    Ok(img)
}

/// Write an `(H, W, 3)` array as a little-endian color PFM.
pub fn write_pfm(path: &Path, img: &Array3<f64>) -> Result<()> {
    let (h, w, ch) = img.dim();
    if ch != 3 {
        return Err(CoreError::shape("write_pfm", "(H, W, 3)", format!("{:?}", img.dim())));
    }
    let mut writer = BufWriter::new(File::create(path)?);
    write!(writer, "PF\n{w} {h}\n-1.0\n")?;
    for r in (0..h).rev() {
        for c in 0..w {
            for k in 0..3 {
                writer.write_all(&(img[[r, c, k]] as f32).to_le_bytes())?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}

/// Write an `(H, W)` array as a little-endian grayscale PFM.
pub fn write_pfm_gray(path: &Path, img: &Array2<f64>) -> Result<()> {
    let (h, w) = img.dim();
    let mut writer = BufWriter::new(File::create(path)?);
    write!(writer, "Pf\n{w} {h}\n-1.0\n")?;
    for r in (0..h).rev() {
        for c in 0..w {
            writer.write_all(&(img[[r, c]] as f32).to_le_bytes())?;
        }
    }
    writer.flush()?;
    Ok(())
}
