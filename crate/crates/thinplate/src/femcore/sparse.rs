//! Symmetric sparse matrices in upper-triangular CSR form.
//!
//! Only entries with column ≥ row are stored; the symmetric matvec and
//! quadratic form mirror the strict upper triangle on the fly. The
//! sparsity pattern is fixed at construction (from per-row column lists),
//! so assembly scatters into preallocated slots via binary search and is
//! deterministic for a deterministic visit order.

use crate::error::Error;
use crate::Result;

/// One Neumaier-compensated addition: `sum += t` with the rounding
/// error captured in `comp` (add `comp` to `sum` once at the end).
#[inline]
pub(crate) fn neumaier_add(sum: &mut f64, comp: &mut f64, t: f64) {
    let s = *sum + t;
    if sum.abs() >= t.abs() {
        *comp += (*sum - s) + t;
    } else {
        *comp += (t - s) + *sum;
    }
    *sum = s;
}

/// Sparse symmetric matrix, upper triangle in CSR.
///
/// Each entry is stored as a working value plus a compensation tail
/// (`val[k] + comp[k]` is the entry to extended precision). Assembly
/// accumulates into both, so cancellation structure of the continuous
/// form — e.g. stiffness annihilating constants — survives storage.
/// `quadratic`, `get`, and `to_dense` consume both; `matvec` and the
/// factorization read the working values only, where the tail is far
/// below their own accumulation floor.
#[derive(Debug, Clone)]
pub struct SparseSym {
    n: usize,
    row_start: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
    comp: Vec<f64>,
}

impl SparseSym {
    /// Build the pattern from per-row column lists. Each inner list must
    /// contain only columns ≥ its row index; duplicates are merged. Every
    /// row must include its own diagonal.
    pub fn from_rows(rows: Vec<Vec<usize>>) -> Result<Self> {
        let n = rows.len();
        let mut row_start = Vec::with_capacity(n + 1);
        row_start.push(0);
        let mut col = Vec::new();
        for (r, mut cols) in rows.into_iter().enumerate() {
            cols.sort_unstable();
            cols.dedup();
            if cols.first() != Some(&r) {
                return Err(Error::IncompatibleMesh(format!(
                    "sparse pattern row {r} is missing its diagonal or has sub-diagonal columns"
                )));
            }
            if let Some(&c) = cols.last() {
                if c >= n {
                    return Err(Error::DimensionMismatch { left: c + 1, right: n });
                }
            }
            col.extend_from_slice(&cols);
            row_start.push(col.len());
        }
        let val = vec![0.0; col.len()];
        let comp = vec![0.0; col.len()];
        Ok(Self {
            n,
            row_start,
            col,
            val,
            comp,
        })
    }

    /// Identity pattern (diagonal only), all values zero.
    pub fn diagonal_pattern(n: usize) -> Self {
        Self {
            n,
            row_start: (0..=n).collect(),
            col: (0..n).collect(),
            val: vec![0.0; n],
            comp: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored (upper-triangle) entry count.
    pub fn nnz_upper(&self) -> usize {
        self.col.len()
    }

    pub(crate) fn row_start(&self) -> &[usize] {
        &self.row_start
    }

    pub(crate) fn cols(&self) -> &[usize] {
        &self.col
    }

    pub(crate) fn values(&self) -> &[f64] {
        &self.val
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        let lo = self.row_start[r];
        let hi = self.row_start[r + 1];
        self.col[lo..hi].binary_search(&c).ok().map(|k| lo + k)
    }

    /// Add `v` to entry (i, j). The slot must exist in the pattern.
    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i},{j}) is outside the sparsity pattern"));
        neumaier_add(&mut self.val[k], &mut self.comp[k], v);
    }

    /// Add a head/tail pair to entry (i, j), keeping the tail in the
    /// entry's compensation slot.
    #[inline]
    pub(crate) fn add_at_dd(&mut self, i: usize, j: usize, hi: f64, lo: f64) {
        let k = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i},{j}) is outside the sparsity pattern"));
        neumaier_add(&mut self.val[k], &mut self.comp[k], hi);
        self.comp[k] += lo;
    }

    /// Read entry (i, j); zero if outside the pattern.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.val[k] + self.comp[k])
    }

    /// Stored upper-triangle entries as `(row, col, value)`, rows
    /// ascending, columns ascending within a row. Values compose the
    /// working part with its compensation tail, matching [`Self::get`].
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |r| {
            (self.row_start[r]..self.row_start[r + 1])
                .map(move |k| (r, self.col[k], self.val[k] + self.comp[k]))
        })
    }

    /// y = A·x using the symmetric structure. Sequential by construction:
    /// the accumulation order is fixed, so results are bitwise stable.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.fill(0.0);
        for r in 0..self.n {
            let lo = self.row_start[r];
            let hi = self.row_start[r + 1];
            // Diagonal first (col[lo] == r by construction).
            let mut acc = self.val[lo] * x[r];
            for k in lo + 1..hi {
                let c = self.col[k];
                let v = self.val[k];
                acc += v * x[c];
                y[c] += v * x[r];
            }
            y[r] += acc;
        }
    }

    /// xᵀ·A·y via one matvec-like sweep.
    ///
    /// Accumulated with Neumaier compensation: the plain running sum loses
    /// ~εm·Σ|terms| to cancellation, which for stiffness quadratics of
    /// near-null vectors (e.g. the constant mode) swamps the true value.
    pub fn quadratic(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        let mut total = 0.0f64;
        let mut comp = 0.0f64;
        for r in 0..self.n {
            let lo = self.row_start[r];
            let hi = self.row_start[r + 1];
            neumaier_add(&mut total, &mut comp, x[r] * self.val[lo] * y[r]);
            comp += self.comp[lo] * (x[r] * y[r]);
            for k in lo + 1..hi {
                let c = self.col[k];
                let z = x[r] * y[c] + x[c] * y[r];
                neumaier_add(&mut total, &mut comp, self.val[k] * z);
                comp += self.comp[k] * z;
            }
        }
        total + comp
    }

    /// Largest absolute stored entry (0 for an all-zero matrix).
    pub fn max_abs(&self) -> f64 {
        self.val.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Dense symmetric copy (for the small-problem reference solver).
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut a = nalgebra::DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for k in self.row_start[r]..self.row_start[r + 1] {
                let c = self.col[k];
                a[(r, c)] = self.val[k] + self.comp[k];
                a[(c, r)] = self.val[k] + self.comp[k];
            }
        }
        a
    }

    /// Restrict to the index subset `keep` (ascending), returning the
    /// principal submatrix with the induced pattern.
    pub fn principal_submatrix(&self, keep: &[usize]) -> Result<Self> {
        if keep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::UnsortedInput);
        }
        if let Some(&last) = keep.last() {
            if last >= self.n {
                return Err(Error::DimensionMismatch {
                    left: last + 1,
                    right: self.n,
                });
            }
        }
        let mut new_index = vec![usize::MAX; self.n];
        for (ni, &oi) in keep.iter().enumerate() {
            new_index[oi] = ni;
        }
        let m = keep.len();
        let mut row_start = Vec::with_capacity(m + 1);
        row_start.push(0usize);
        let mut col = Vec::new();
        let mut val = Vec::new();
        let mut comp = Vec::new();
        for &r in keep {
            for k in self.row_start[r]..self.row_start[r + 1] {
                let c = self.col[k];
                if new_index[c] != usize::MAX {
                    col.push(new_index[c]);
                    val.push(self.val[k]);
                    comp.push(self.comp[k]);
                }
            }
            row_start.push(col.len());
        }
        Ok(Self {
            n: m,
            row_start,
            col,
            val,
            comp,
        })
    }
}
