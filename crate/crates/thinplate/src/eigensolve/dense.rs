//! Dense reference solver: the independent oracle for small problems.
//!
//! K x = λ M x is reduced to the standard symmetric problem
//! C y = λ y with C = L⁻¹ K L⁻ᵀ, M = LLᵀ, x = L⁻ᵀ y, and handed to a
//! dense symmetric eigendecomposition. Cubic cost and quadratic memory
//! cap its use at [`DENSE_LIMIT`] unknowns — it exists to cross-check
//! the sparse Lanczos path, not to replace it, and deliberately shares
//! no code with it.

use super::{fix_signs, residual_report, EigenPairs};
use crate::error::Error;
use crate::femcore::SparseSym;
use crate::Result;

/// Largest system the dense route accepts.
pub const DENSE_LIMIT: usize = 2000;

/// Compute the `n_pairs` smallest eigenpairs densely. Same contract as
/// the sparse solver: ascending eigenvalues, M-orthonormal vectors with
/// largest-magnitude entry positive, relative residuals attached.
pub fn dense_reference_solve(
    kmat: &SparseSym,
    mmat: &SparseSym,
    n_pairs: usize,
) -> Result<EigenPairs> {
    let n = kmat.n();
    if mmat.n() != n {
        return Err(Error::DimensionMismatch {
            left: n,
            right: mmat.n(),
        });
    }
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: DENSE_LIMIT,
        });
    }
    if n_pairs == 0 || n_pairs > n {
        return Err(Error::InsufficientEigenpairs {
            have: n,
            need: n_pairs,
        });
    }

    let m_dense = mmat.to_dense();
    let chol = m_dense
        .clone()
        .cholesky()
        .ok_or(Error::FactorizationFailed { pivot: 0 })?;
    let l = chol.l();

    // C = L⁻¹ K L⁻ᵀ, symmetrized against roundoff.
    let x1 = l
        .solve_lower_triangular(&kmat.to_dense())
        .ok_or(Error::FactorizationFailed { pivot: 0 })?;
    let c_raw = l
        .solve_lower_triangular(&x1.transpose())
        .ok_or(Error::FactorizationFailed { pivot: 0 })?
        .transpose();
    let c = (&c_raw + c_raw.transpose()) * 0.5;

    let eig = nalgebra::SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let lt = l.transpose();
    let mut values = Vec::with_capacity(n_pairs);
    let mut vectors = Vec::with_capacity(n_pairs);
    for &i in order.iter().take(n_pairs) {
        values.push(eig.eigenvalues[i]);
        let y = eig.eigenvectors.column(i).into_owned();
        let x = lt
            .solve_upper_triangular(&y)
            .ok_or(Error::FactorizationFailed { pivot: 0 })?;
        let mut x: Vec<f64> = x.iter().copied().collect();
        let norm = mmat.quadratic(&x, &x).max(f64::MIN_POSITIVE).sqrt();
        for xi in x.iter_mut() {
            *xi /= norm;
        }
        vectors.push(x);
    }
    fix_signs(&mut vectors);
    let residuals = residual_report(kmat, mmat, &values, &vectors);
    Ok(EigenPairs {
        values,
        vectors,
        residuals,
    })
}
