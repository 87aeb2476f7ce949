//! Gauss-Newton normal equations on the stencil's banded sparsity pattern,
//! solved with Jacobi-preconditioned conjugate gradients.

/// Relative pixel offsets reachable by products of two stencil taps.
/// Slot 0 is the diagonal.
const OFFSETS: [(i32, i32); 13] = [
    (0, 0),
    (0, 1),
    (0, -1),
    (0, 2),
    (0, -2),
    (1, 0),
    (-1, 0),
    (2, 0),
    (-2, 0),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

fn slot_of(dr: i32, dc: i32) -> Option<usize> {
    OFFSETS.iter().position(|&(r, c)| r == dr && c == dc)
}

/// Symmetric positive semi-definite matrix `JᵀJ (+ ζI)` stored as 13 bands
/// over the solve domain's columns.
pub(crate) struct NormalMatrix {
    n: usize,
    /// `bands[slot][col]` = entry (col, neighbor(col, slot)).
    bands: Vec<Vec<f64>>,
    /// Neighbor column per (col, slot); -1 when outside the domain.
    neighbor: Vec<[i32; 13]>,
}

impl NormalMatrix {
    /// Set up the pattern for a solve domain (columns = valid pixels).
    pub fn new(cols: &[u32], col_of: &[i32], grid: (usize, usize)) -> Self {
        let (h, w) = grid;
        let n = cols.len();
        let mut neighbor = vec![[-1i32; 13]; n];
        for (j, &pix) in cols.iter().enumerate() {
            let r = (pix as usize / w) as i32;
            let c = (pix as usize % w) as i32;
            for (slot, &(dr, dc)) in OFFSETS.iter().enumerate() {
                let (nr, nc) = (r + dr, c + dc);
                if nr >= 0 && nc >= 0 && (nr as usize) < h && (nc as usize) < w {
                    neighbor[j][slot] = col_of[nr as usize * w + nc as usize];
                }
            }
        }
        NormalMatrix {
            n,
            bands: vec![vec![0.0; n]; 13],
            neighbor,
        }
    }

    /// Accumulate the outer product of one Jacobian row.
    ///
    /// `cols` are column indices, `pixels[j]` the linear pixel index of each,
    /// `vals` the row values; all pairs land on the 13-offset pattern.
    pub fn accumulate_row(
        &mut self,
        cols: &[u32],
        vals: &[f64],
        ncols: usize,
        pixel_of_col: impl Fn(u32) -> (i32, i32),
    ) {
        for a in 0..ncols {
            let (ra, ca) = pixel_of_col(cols[a]);
            for b in 0..ncols {
                let (rb, cb) = pixel_of_col(cols[b]);
                let slot = slot_of(rb - ra, cb - ca)
                    .expect("stencil pair outside the 13-offset pattern");
                self.bands[slot][cols[a] as usize] += vals[a] * vals[b];
            }
        }
    }

    pub fn add_diagonal(&mut self, value: f64) {
        for d in self.bands[0].iter_mut() {
            *d += value;
        }
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.bands[0]
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for j in 0..self.n {
            let mut acc = 0.0;
            for slot in 0..13 {
                let nb = self.neighbor[j][slot];
                if nb >= 0 {
                    acc += self.bands[slot][j] * x[nb as usize];
                }
            }
            y[j] = acc;
        }
    }
}

pub(crate) struct PcgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Jacobi-preconditioned conjugate gradients for `A x = b`.
///
/// Stops when `‖r‖ ≤ tol · ‖b‖` or the iteration cap is reached; in the
/// latter case the best iterate so far is returned with `converged = false`.
pub(crate) fn pcg(a: &NormalMatrix, b: &[f64], tol: f64, max_iters: usize) -> PcgOutcome {
    let n = b.len();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        return PcgOutcome {
            solution: vec![0.0; n],
            iterations: 0,
            converged: true,
        };
    }

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];

    for iter in 0..max_iters {
        let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r_norm <= tol * b_norm {
            return PcgOutcome {
                solution: x,
                iterations: iter,
                converged: true,
            };
        }
        a.matvec(&p, &mut ap);
        let p_ap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if p_ap <= 0.0 {
            // Semi-definite breakdown; return what we have.
            return PcgOutcome {
                solution: x,
                iterations: iter,
                converged: false,
            };
        }
        let alpha = rz / p_ap;
        for j in 0..n {
            x[j] += alpha * p[j];
            r[j] -= alpha * ap[j];
        }
        for j in 0..n {
            z[j] = r[j] * inv_diag[j];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        for j in 0..n {
            p[j] = z[j] + beta * p[j];
        }
        rz = rz_new;
    }

    let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    PcgOutcome {
        converged: r_norm <= tol * b_norm,
        solution: x,
        iterations: max_iters,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Random SPD system on a small grid, PCG vs a dense direct solve.
    #[test]
    fn pcg_matches_dense_solve() {
        let (h, w) = (24, 24);
        let n = h * w;
        let cols: Vec<u32> = (0..n as u32).collect();
        let col_of: Vec<i32> = (0..n as i32).collect();
        let mut a = NormalMatrix::new(&cols, &col_of, (h, w));

        // Synthetic rows mimicking stencil structure: for each pixel, a row
        // touching itself and its right/down neighbors with pseudo-random
        // values.
        let mut state = 3u64;
        let mut next = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / (1u64 << 53) as f64 - 0.5
        };
        let pixel_of = |col: u32| ((col as usize / w) as i32, (col as usize % w) as i32);
        for r in 0..h {
            for c in 0..w {
                let mut cols_row = [0u32; 5];
                let mut vals = [0.0; 5];
                let mut k = 0;
                cols_row[k] = (r * w + c) as u32;
                vals[k] = 1.0 + next().abs();
                k += 1;
                if c + 1 < w {
                    cols_row[k] = (r * w + c + 1) as u32;
                    vals[k] = next();
                    k += 1;
                }
                if r + 1 < h {
                    cols_row[k] = ((r + 1) * w + c) as u32;
                    vals[k] = next();
                    k += 1;
                }
                a.accumulate_row(&cols_row, &vals, k, pixel_of);
            }
        }
        a.add_diagonal(0.1);

        let b: Vec<f64> = (0..n).map(|_| next()).collect();
        let outcome = pcg(&a, &b, 1e-12, 4 * n);
        assert!(outcome.converged);

        // Dense reference.
        let mut dense = nalgebra::DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            for slot in 0..13 {
                let nb = a.neighbor[j][slot];
                if nb >= 0 {
                    dense[(j, nb as usize)] = a.bands[slot][j];
                }
            }
        }
        let rhs = nalgebra::DVector::from_column_slice(&b);
        let x_dense = dense
            .clone()
            .cholesky()
            .expect("assembled matrix is SPD")
            .solve(&rhs);
        let mut max_err: f64 = 0.0;
        for j in 0..n {
            max_err = max_err.max((outcome.solution[j] - x_dense[j]).abs());
        }
        assert!(max_err < 1e-8, "max deviation from dense solve: {max_err}");
    }

    #[test]
    fn zero_rhs_is_exact() {
        let cols: Vec<u32> = (0..16).collect();
        let col_of: Vec<i32> = (0..16).collect();
        let mut a = NormalMatrix::new(&cols, &col_of, (4, 4));
        a.add_diagonal(1.0);
        let outcome = pcg(&a, &vec![0.0; 16], 1e-10, 100);
        assert!(outcome.converged);
        assert!(outcome.solution.iter().all(|&x| x == 0.0));
    }
}
