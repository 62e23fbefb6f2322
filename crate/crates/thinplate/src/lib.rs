//! # thinplate
//!
//! A C1 finite-element spectral suite for fourth-order plate eigenvalue
//! problems on planar *dumbbell* domains: two fixed rectangular plates
//! joined by a thin channel of width `ε·g(x)`.
//!
//! The operator throughout is the tension plate operator
//!
//! ```text
//!     Δ²u − τ·Δu + u  =  λ·u
//! ```
//!
//! with the quadratic form
//!
//! ```text
//!     B(u,u) = ∫ (1−σ)|D²u|² + σ(Δu)² + τ|∇u|² + u²
//! ```
//!
//! where `σ ∈ (−1,1)` is a Poisson-type coefficient and `τ ≥ 0` a lateral
//! tension. The `+u²` term makes the form coercive on H² with natural
//! (free-edge) boundary conditions, so the smallest eigenvalue of a free
//! plate is exactly 1 with constant eigenfunction.
//!
//! The suite computes and cross-checks three spectra:
//!
//! 1. **Full dumbbell**: eigenvalues `λ_n(Ω_ε)` of the free plate on the
//!    dumbbell `Ω_ε = Ω_L ∪ R_ε ∪ Ω_R`, assembled with Bogner–Fox–Schmit
//!    bicubic Hermite quadrilaterals ([`femcore`]).
//! 2. **Channel**: eigenvalues `θ_l^ε` of the same operator on the channel
//!    `R_ε = {0<x<1, 0<y<ε·g(x)}` with clamped ends and free sides, solved
//!    on a fixed reference square via an ε-weighted pull-back form.
//! 3. **1D limit**: eigenvalues `θ_l` of the clamped weighted beam problem
//!    `(1−σ²)(g h″)″/g − τ(g h′)′/g + h = θ h` on (0,1) ([`limit1d`]),
//!    whose bending stiffness carries the characteristic `1−σ²` reduction
//!    of a narrow strip relative to a wide plate.
//!
//! As `ε → 0` the dumbbell spectrum splits into the spectrum of the two
//! decoupled plates plus the channel spectrum, and `θ_l^ε → θ_l`; the
//! [`spectra`] module implements the bookkeeping (merged sequences,
//! spectral dividers, localization fractions, projection deficiencies,
//! ε-sweep drivers) that verifies this numerically.
//!
//! ## Module map
//!
//! - [`geometry`] — material parameters, channel profiles `g`, dumbbell
//!   specifications, profile validation.
//! - [`meshgen`] — structured conforming quadrilateral meshes with
//!   boundary/region tags and C1 degree-of-freedom maps.
//! - [`femcore`] — BFS/Hermite element kernels, assembly of all bilinear
//!   forms, clamped constraints, channel averaging and extension operators.
//! - [`eigensolve`] — sparse shift-invert Lanczos with skyline Cholesky,
//!   plus a dense reference solver used as an independent oracle.
//! - [`limit1d`] — the 1D weighted limit problem and the clamped-beam
//!   transcendental frequency oracle.
//! - [`spectra`] — merged spectra, decomposition reports, sweeps.
//!
//! ## Parallelism
//!
//! With the default `parallel` feature, element matrices are computed with
//! rayon and ε-sweep points run concurrently; global accumulation stays
//! sequential in a fixed order, so assembled matrices and all reported
//! eigenvalues are bitwise reproducible regardless of thread count.

pub mod error;
pub mod geometry;
pub mod meshgen;
pub mod quadrature;
pub mod femcore;
pub mod eigensolve;
pub mod limit1d;
pub mod spectra;

pub use error::Error;
pub use geometry::{DumbbellSpec, MaterialParams, MpReport, ProfileKind, ProfileSpec};
pub use meshgen::{BoundaryTag, DofMap, IntervalMesh, QuadMesh, RegionTag};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Library version, for run manifests and provenance records.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
