//! C1 finite elements and assembly of every bilinear form in the suite.
//!
//! ## Elements
//!
//! 2D: Bogner–Fox–Schmit bicubic Hermite rectangles — the tensor product
//! of cubic Hermite interpolation in x and y, with the four DOFs
//! (u, u_x, u_y, u_xy) at each corner. On axis-aligned meshes BFS is
//! C1-conforming, so the discrete spaces are genuine subspaces of H² and
//! discrete eigenvalues are variational upper bounds. 1D: the classical
//! cubic Hermite (beam) element with (u, u′) per node.
//!
//! ## Forms
//!
//! [`FormKind`] enumerates the assembled bilinear forms:
//!
//! - `PlateForm(σ,τ)` — the tension plate form
//!   `∫ (1−σ)D²u:D²φ + σΔuΔφ + τ∇u·∇φ + uφ` in physical coordinates.
//! - `ChannelEpsForm(σ,τ,ε,g)` — the channel form pulled back to the unit
//!   square. Composing the thinning map (x,y) ↦ (x, y/ε) with the profile
//!   flattening (x,y) ↦ (x, y/g(x)) turns the plate form on the physical
//!   channel {0<y<ε·g(x)} into a fixed-domain form whose y-derivatives
//!   carry powers of 1/ε:
//!
//!   ```text
//!   ∫ (1−σ)[w_xx² + (2/ε²)w_xy² + (1/ε⁴)w_yy²]
//!     + σ[w_xx + (1/ε²)w_yy]² + τ[w_x² + (1/ε²)w_y²] + w²,
//!   ```
//!
//!   where (w, w_x, …) are the derivatives on the *intermediate* domain
//!   {0<y<g(x)} expressed through the unit-square field u(x,η) by the
//!   chain rule (with r = η g′/g):
//!
//!   ```text
//!   w_x  = u_x − r·u_η                w_y  = u_η / g
//!   w_xx = u_xx − 2r·u_xη + r²·u_ηη + η(2g′² − g g″)/g² · u_η
//!   w_xy = (u_xη − r·u_ηη − (g′/g)·u_η) / g
//!   w_yy = u_ηη / g²
//!   ```
//!
//!   and the measure is g(x)·dx·dη. Everything profile-dependent sits in
//!   per-element quadrature weights; the basis itself is never mapped, so
//!   C1 continuity is untouched. One global factor ε (from dy = ε·g·dη)
//!   is dropped from both the form and its mass — it cancels in every
//!   Rayleigh quotient — which makes the matching mass matrix exactly
//!   `WeightedMass(g)`, the discrete L²(R_ε, ε⁻¹dx dy) inner product.
//! - `Mass` / `WeightedMass(g)` — ∫uφ and ∫uφ·g.
//! - `Limit1DForm(σ,τ,g)` — the weighted beam form
//!   `(1−σ²)∫h″ψ″g + τ∫h′ψ′g + ∫hψg` of the 1D limit problem.
//!
//! All stiffness kinds include the `+∫uφ` term, so assembled stiffness
//! matrices are positive definite outright and free-plate spectra start
//! at λ = 1.
//!
//! ## Quadrature
//!
//! Constant-coefficient bicubic integrands have degree ≤ 6 per direction:
//! 4×4 Gauss is exact. Profile-weighted forms use 6×6 (1D: 6-point),
//! exact for polynomial g up to the rule's degree and a controlled
//! approximation otherwise.
//!
//! ## Determinism
//!
//! Element matrices are pure functions of their inputs and may be
//! computed in parallel; the global scatter runs sequentially in element
//! order, so repeated assemblies are bitwise identical whatever the
//! thread count.

mod assembly;
mod elements;
mod sparse;
mod transfer;

pub use assembly::{apply_clamped_constraints, assemble, assemble_interval, assemble_with, ClampWhere, Strategy};
pub use elements::{bfs_element_matrices, hermite1d_element, hermite_shape, CoeffSamples, ElemMat16, ElemMat4};
pub use sparse::SparseSym;
pub use transfer::{average_m, extend_e, DiscreteField};

use crate::geometry::{MaterialParams, ProfileSpec};

/// Which bilinear form to assemble.
#[derive(Debug, Clone, PartialEq)]
pub enum FormKind {
    /// Plate form in physical coordinates (2D meshes).
    PlateForm(MaterialParams),
    /// ε-weighted pulled-back channel form on the unit square.
    ChannelEpsForm(MaterialParams, f64, ProfileSpec),
    /// Plain L² mass, ∫uφ (1D or 2D).
    Mass,
    /// Profile-weighted mass, ∫uφ·g(x) (1D or 2D reference square).
    WeightedMass(ProfileSpec),
    /// Weighted beam form of the 1D limit problem (1D meshes).
    Limit1DForm(MaterialParams, ProfileSpec),
}

impl FormKind {
    /// Does this form's integrand depend on x through the profile?
    pub(crate) fn profile(&self) -> Option<&ProfileSpec> {
        match self {
            FormKind::ChannelEpsForm(_, _, p)
            | FormKind::WeightedMass(p)
            | FormKind::Limit1DForm(_, p) => Some(p),
            FormKind::PlateForm(_) | FormKind::Mass => None,
        }
    }

    pub(crate) fn validate(&self) -> crate::Result<()> {
        match self {
            FormKind::PlateForm(p) => p.validate(),
            FormKind::ChannelEpsForm(p, eps, profile) => {
                p.validate()?;
                profile.validate_shape()?;
                if !(*eps > 0.0 && eps.is_finite()) {
                    return Err(crate::Error::InvalidEpsilon { epsilon: *eps });
                }
                Ok(())
            }
            FormKind::Mass => Ok(()),
            FormKind::WeightedMass(profile) => profile.validate_shape(),
            FormKind::Limit1DForm(p, profile) => {
                p.validate()?;
                profile.validate_shape()
            }
        }
    }
}
