//! Network weight file format.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! magic        4 bytes  "NLNW"
//! version      u16      1
//! mode         u8       0 = eval, 1 = train
//! dropout_rate f32      0.2
//! n_dims       u32      number of layer widths (input..output)
//! dims         u32 × n_dims
//! per layer l (n_dims − 1 layers):
//!   W   f32 × in·out   row-major (input-major)
//!   b   f32 × out
//!   if l is hidden: gamma, beta, running_mean, running_var  (f32 × out each)
//! ```
//!
//! Parameters are kept f32-representable in memory, so save → load → save
//! reproduces files bit-for-bit and loaded models infer identically.

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::net::{MlpModel, Mode, DROPOUT_RATE};
use crate::{CoreError, Result};

const MAGIC: &[u8; 4] = b"NLNW";
const VERSION: u16 = 1;

pub fn save_model(path: &Path, model: &MlpModel) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(MAGIC)?;
    file.write_all(&VERSION.to_le_bytes())?;
    file.write_all(&[match model.mode() {
        Mode::Eval => 0u8,
        Mode::Train => 1u8,
    }])?;
    file.write_all(&(DROPOUT_RATE as f32).to_le_bytes())?;
    let dims = model.dims();
    file.write_all(&(dims.len() as u32).to_le_bytes())?;
    for &d in dims {
        file.write_all(&(d as u32).to_le_bytes())?;
    }
    for (l, layer) in model.layers.iter().enumerate() {
        for &v in layer.w.iter() {
            file.write_all(&(v as f32).to_le_bytes())?;
        }
        for &v in layer.b.iter() {
            file.write_all(&(v as f32).to_le_bytes())?;
        }
        if l + 1 < model.layers.len() {
            let bn = layer.bn.as_ref().ok_or_else(|| {
                CoreError::format(
                    path.display().to_string(),
                    format!("hidden layer {l} lacks batch norm"),
                )
            })?;
            for arr in [&bn.gamma, &bn.beta, &bn.running_mean, &bn.running_var] {
                for &v in arr.iter() {
                    file.write_all(&(v as f32).to_le_bytes())?;
                }
            }
        }
    }
    file.flush()?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: String,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(CoreError::format(
                &self.path,
                format!(
                    "truncated: needed {} bytes at offset {}, file has {}",
                    n,
                    self.pos,
                    self.bytes.len()
                ),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn f32(&mut self) -> Result<f64> {
        let b = self.take(4)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32_array1(&mut self, n: usize) -> Result<Array1<f64>> {
        let mut a = Array1::zeros(n);
        for i in 0..n {
            a[i] = self.f32()?;
        }
        Ok(a)
    }
}

pub fn load_model(path: &Path) -> Result<MlpModel> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CoreError::MissingFile(path.to_path_buf()),
        _ => CoreError::Io(e),
    })?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
        path: path.display().to_string(),
    };

    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(CoreError::format(
            &r.path,
            format!("bad magic {magic:?}, expected {MAGIC:?}"),
        ));
    }
    let vb = r.take(2)?;
    let version = u16::from_le_bytes([vb[0], vb[1]]);
    if version != VERSION {
        return Err(CoreError::Version {
            path: r.path,
            expected: VERSION,
            found: version,
        });
    }
    let mode = match r.take(1)?[0] {
        0 => Mode::Eval,
        1 => Mode::Train,
        other => {
            return Err(CoreError::format(
                &r.path,
                format!("bad mode byte {other}"),
            ))
        }
    };
    let dropout = r.f32()?;
    if dropout as f32 != DROPOUT_RATE as f32 {
        return Err(CoreError::format(
            &r.path,
            format!("dropout rate {dropout} does not match the supported {DROPOUT_RATE}"),
        ));
    }
    let n_dims = r.u32()? as usize;
    if !(2..=16).contains(&n_dims) {
        return Err(CoreError::format(
            &r.path,
            format!("implausible layer count {n_dims}"),
        ));
    }
    let mut dims = Vec::with_capacity(n_dims);
    for _ in 0..n_dims {
        let d = r.u32()? as usize;
        if d == 0 || d > 1 << 20 {
            return Err(CoreError::format(&r.path, format!("bad layer width {d}")));
        }
        dims.push(d);
    }

    let n_layers = n_dims - 1;
    let mut layers = Vec::with_capacity(n_layers);
    for l in 0..n_layers {
        let (fan_in, fan_out) = (dims[l], dims[l + 1]);
        let mut w = Array2::zeros((fan_in, fan_out));
        for i in 0..fan_in {
            for j in 0..fan_out {
                w[[i, j]] = r.f32()?;
            }
        }
        let b = r.f32_array1(fan_out)?;
        let bn = if l + 1 < n_layers {
            let gamma = r.f32_array1(fan_out)?;
            let beta = r.f32_array1(fan_out)?;
            let running_mean = r.f32_array1(fan_out)?;
            let running_var = r.f32_array1(fan_out)?;
            if running_var.iter().any(|&v| !(v > 0.0)) {
                return Err(CoreError::format(
                    &r.path,
                    format!("non-positive running variance in layer {l}"),
                ));
            }
            Some(crate::net::BatchNorm {
                gamma,
                beta,
                running_mean,
                running_var,
            })
        } else {
            None
        };
        layers.push(crate::net::Layer { w, b, bn });
    }
    if r.pos != bytes.len() {
        return Err(CoreError::format(
            &r.path,
            format!("{} trailing bytes after parameters", bytes.len() - r.pos),
        ));
    }
    Ok(MlpModel::from_parts(dims, layers, mode))
}
