//! Sparse residual Jacobian in compressed-row form.

/// Residual vector and its Jacobian with respect to log-depth.
///
/// Rows are ordered pixel-major (row-major pixels, then lights, then
/// channels); columns index the solve domain's valid pixels in row-major
/// order (`columns[j]` is the linear pixel index of column `j`). Each row
/// touches at most the pixel itself plus its stencil neighbors (≤ 5 entries).
/// Rows whose shading is clamped to zero keep their residual but carry no
/// entries (active-set convention).
#[derive(Debug, Clone)]
pub struct ResidualJacobian {
    pub residuals: Vec<f64>,
    /// Linear pixel index of each row's pixel.
    pub row_pixel: Vec<u32>,
    /// Light index of each row.
    pub row_light: Vec<u16>,
    /// Channel slot of each row (0..3 in RGB mode, 0 in luminance mode).
    pub row_channel: Vec<u8>,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub values: Vec<f64>,
    /// Linear pixel index of each column.
    pub columns: Vec<u32>,
}

impl ResidualJacobian {
    pub fn num_rows(&self) -> usize {
        self.residuals.len()
    }

    pub fn num_cols(&self) -> usize {
        self.columns.len()
    }

    /// `y = J x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.num_cols());
        let mut y = vec![0.0; self.num_rows()];
        for row in 0..self.num_rows() {
            let mut acc = 0.0;
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                acc += self.values[k] * x[self.col_idx[k] as usize];
            }
            y[row] = acc;
        }
        y
    }

    /// `x = Jᵀ y`.
    pub fn rmatvec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.num_rows());
        let mut x = vec![0.0; self.num_cols()];
        for row in 0..self.num_rows() {
            let yr = y[row];
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                x[self.col_idx[k] as usize] += self.values[k] * yr;
            }
        }
        x
    }

    /// Dense copy of one column (test helper).
    pub fn column_dense(&self, col: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.num_rows()];
        for row in 0..self.num_rows() {
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                if self.col_idx[k] as usize == col {
                    out[row] = self.values[k];
                }
            }
        }
        out
    }
}
