//! Sparse symmetric generalized eigensolvers for K x = λ M x.
//!
//! The production path is shift-invert Lanczos at shift 0: the operator
//! B = K⁻¹M is self-adjoint and positive in the M-inner product, its
//! largest eigenvalues are the reciprocals of the smallest λ, and each
//! application costs one sparse backsolve with a skyline Cholesky factor
//! of K ([`skyline`]). The basis is kept M-orthonormal by full
//! reorthogonalization, so clustered and repeated eigenvalues come out
//! clean ([`lanczos`]).
//!
//! An independent dense route ([`dense_reference_solve`]) — Cholesky of
//! M plus a dense symmetric eigendecomposition of L⁻¹KL⁻ᵀ — serves as an
//! oracle on problems small enough to afford it. The two routes share no
//! factorization or iteration code and are cross-checked in the test
//! suite; do not make one call the other.
//!
//! Everything here is deterministic: fixed RNG seeds, sequential
//! reductions in fixed order, no thread-dependent accumulation.

mod dense;
mod lanczos;
mod skyline;

pub use dense::{dense_reference_solve, DENSE_LIMIT};
pub use lanczos::{solve_smallest, LanczosOptions};
pub use skyline::SkylineCholesky;

use crate::femcore::SparseSym;
use crate::geometry::MaterialParams;
use serde::{Deserialize, Serialize};

/// A batch of generalized eigenpairs, ascending by eigenvalue.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    /// Eigenvalues, ascending.
    pub values: Vec<f64>,
    /// M-orthonormal eigenvectors over the free DOFs, matching `values`.
    pub vectors: Vec<Vec<f64>>,
    /// Relative residuals ‖K x − λ M x‖₂ / ‖K x‖₂ per pair.
    pub residuals: Vec<f64>,
}

/// What domain a computed spectrum belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    /// The full dumbbell Ω_ε.
    Dumbbell,
    /// A single rectangular plate (left or right box, or their union).
    OmegaBox,
    /// The thin channel, solved on the reference strip via the pull-back.
    Channel,
    /// The 1D weighted limit problem.
    Limit1D,
    /// Hand-built matrices in tests.
    Synthetic,
}

/// Provenance of a spectrum: enough to label outputs and reproduce runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumMeta {
    pub domain: DomainKind,
    /// Channel half-width parameter, where applicable.
    pub epsilon: Option<f64>,
    pub params: MaterialParams,
    /// Free DOFs of the solved system.
    pub n_free: usize,
    /// Human-readable discretization label, e.g. "h=0.05" or "n=256".
    pub resolution: String,
}

/// Eigenpairs bundled with their provenance.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub pairs: EigenPairs,
    pub meta: SpectrumMeta,
}

impl Spectrum {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.pairs.values
    }
}

/// Relative residuals ‖K x − λ M x‖₂ / ‖K x‖₂ for given pairs.
pub fn residual_report(
    kmat: &SparseSym,
    mmat: &SparseSym,
    values: &[f64],
    vectors: &[Vec<f64>],
) -> Vec<f64> {
    let n = kmat.n();
    let mut kx = vec![0.0; n];
    let mut mx = vec![0.0; n];
    values
        .iter()
        .zip(vectors)
        .map(|(&lambda, x)| {
            kmat.matvec(x, &mut kx);
            mmat.matvec(x, &mut mx);
            let mut num = 0.0f64;
            let mut den = 0.0f64;
            for i in 0..n {
                let r = kx[i] - lambda * mx[i];
                num += r * r;
                den += kx[i] * kx[i];
            }
            (num / den.max(f64::MIN_POSITIVE)).sqrt()
        })
        .collect()
}

/// Flip each vector's sign so its largest-magnitude entry is positive —
/// a deterministic normalization that makes eigenvectors comparable
/// across solvers and runs.
pub(crate) fn fix_signs(vectors: &mut [Vec<f64>]) {
    for x in vectors {
        let mut best = 0usize;
        let mut mag = -1.0f64;
        for (i, &v) in x.iter().enumerate() {
            if v.abs() > mag {
                mag = v.abs();
                best = i;
            }
        }
        if x[best] < 0.0 {
            for v in x.iter_mut() {
                *v = -*v;
            }
        }
    }
}
