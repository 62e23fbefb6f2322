//! Skyline (envelope) Cholesky factorization A = UᵀU.
//!
//! For tensor-product meshes numbered lexicographically, the upper
//! profile of each column is a short contiguous run, and the classical
//! result that Cholesky fill stays inside the envelope makes a dense
//! per-column layout both simple and fast: column j stores rows
//! `first_row[j] ..= j` contiguously.

use crate::error::Error;
use crate::femcore::SparseSym;
use crate::Result;

/// Upper-triangular envelope factor of a symmetric positive definite
/// sparse matrix.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    n: usize,
    /// First stored row of each column (≤ j).
    first_row: Vec<usize>,
    /// Column j occupies `data[col_start[j]..col_start[j+1]]`.
    col_start: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineCholesky {
    /// Factor a symmetric positive definite matrix. Fails with the
    /// offending pivot index if a diagonal pivot is not strictly
    /// positive.
    pub fn factor(a: &SparseSym) -> Result<Self> {
        let n = a.n();
        let row_start = a.row_start();
        let cols = a.cols();
        let vals = a.values();

        // Column profile from the CSR-upper pattern: an entry (r, c)
        // means column c reaches up to row r.
        let mut first_row: Vec<usize> = (0..n).collect();
        for r in 0..n {
            for k in row_start[r]..row_start[r + 1] {
                let c = cols[k];
                if r < first_row[c] {
                    first_row[c] = r;
                }
            }
        }
        let mut col_start = Vec::with_capacity(n + 1);
        col_start.push(0usize);
        for j in 0..n {
            col_start.push(col_start[j] + (j - first_row[j] + 1));
        }
        let mut data = vec![0.0f64; col_start[n]];

        // Column-wise copy of A's upper triangle into the envelope.
        for r in 0..n {
            for k in row_start[r]..row_start[r + 1] {
                let c = cols[k];
                data[col_start[c] + (r - first_row[c])] = vals[k];
            }
        }

        // Left-looking factorization, one column at a time. `w` holds
        // the current column's partially updated values by global row.
        let mut w = vec![0.0f64; n];
        for j in 0..n {
            let lo = first_row[j];
            let cj = col_start[j];
            w[lo..=j].copy_from_slice(&data[cj..cj + (j - lo + 1)]);
            for k in lo..j {
                let kf = first_row[k];
                let start = kf.max(lo);
                let ck = col_start[k] + (start - kf);
                let seg = &data[ck..ck + (k - start)];
                let mut s = 0.0;
                for (i, &ukj) in seg.iter().enumerate() {
                    s += ukj * w[start + i];
                }
                let diag = data[col_start[k] + (k - kf)];
                w[k] = (w[k] - s) / diag;
            }
            let mut d = w[j];
            for &v in &w[lo..j] {
                d -= v * v;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::FactorizationFailed { pivot: j });
            }
            w[j] = d.sqrt();
            data[cj..cj + (j - lo + 1)].copy_from_slice(&w[lo..=j]);
        }

        Ok(Self {
            n,
            first_row,
            col_start,
            data,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored envelope entries (a capacity/locality diagnostic).
    pub fn envelope_nnz(&self) -> usize {
        self.data.len()
    }

    /// Solve A x = b via Uᵀz = b then Ux = z.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut z = b.to_vec();
        // Forward: row j of Uᵀ is column j of U.
        for j in 0..self.n {
            let lo = self.first_row[j];
            let cj = self.col_start[j];
            let seg = &self.data[cj..cj + (j - lo)];
            let mut s = 0.0;
            for (i, &u) in seg.iter().enumerate() {
                s += u * z[lo + i];
            }
            z[j] = (z[j] - s) / self.data[cj + (j - lo)];
        }
        // Backward: column-oriented update of earlier rows.
        for j in (0..self.n).rev() {
            let lo = self.first_row[j];
            let cj = self.col_start[j];
            z[j] /= self.data[cj + (j - lo)];
            let xj = z[j];
            for (i, &u) in self.data[cj..cj + (j - lo)].iter().enumerate() {
                z[lo + i] -= u * xj;
            }
        }
        z
    }
}
