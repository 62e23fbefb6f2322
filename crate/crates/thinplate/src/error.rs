//! Error type shared by all modules.

use thiserror::Error;

/// Everything that can go wrong between a domain description and a spectrum.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Material or geometry parameters violate a type invariant.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// The channel profile g dips to zero or below somewhere on [0,1].
    #[error("profile is not strictly positive: g({x}) = {g}")]
    NonPositiveProfile { x: f64, g: f64 },

    /// Evaluation point outside the profile's domain [0,1].
    #[error("x = {x} is outside the channel domain [0,1]")]
    OutOfDomain { x: f64 },

    /// Channel thickness parameter must be strictly positive.
    #[error("invalid channel thickness epsilon = {epsilon} (must be > 0)")]
    InvalidEpsilon { epsilon: f64 },

    /// An operation requires a profile kind it does not support.
    #[error("unsupported profile: {0}")]
    UnsupportedProfile(String),

    /// The requested target element size cannot resolve the channel.
    #[error(
        "channel of height {channel_height} cannot be meshed at target size \
         {h_target}: fewer than two element rows fit (refine h_target)"
    )]
    EmptyChannelResolution { channel_height: f64, h_target: f64 },

    /// Mesh and bilinear form (or mesh and operation) do not belong together.
    #[error("incompatible mesh: {0}")]
    IncompatibleMesh(String),

    /// Nonpositive quadrature Jacobian, e.g. a profile sampled ≤ 0.
    #[error("singular element: geometry weight {g} at x = {x}")]
    SingularElement { x: f64, g: f64 },

    /// A constraint pass found no nodes carrying the requested tag.
    #[error("no nodes carry the requested boundary tag")]
    NoTaggedNodes,

    /// A 1D weighted form was asked to integrate a nonpositive weight.
    #[error("nonpositive weight {g} at quadrature point x = {x}")]
    NonPositiveWeight { x: f64, g: f64 },

    /// Sparse Cholesky hit a nonpositive pivot: the matrix is not SPD.
    #[error("Cholesky factorization failed at pivot {pivot} (matrix not positive definite)")]
    FactorizationFailed { pivot: usize },

    /// The iterative eigensolver ran out of its iteration budget.
    #[error("eigensolver did not converge within {iters} iterations")]
    NoConvergence { iters: usize },

    /// Two operands that must share a dimension do not.
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    /// The dense reference solver is deliberately capped.
    #[error("system of dimension {n} exceeds the dense-solver cap {limit}")]
    TooLarge { n: usize, limit: usize },

    /// A merge operand was not sorted ascending.
    #[error("input sequence is not ascending")]
    UnsortedInput,

    /// A comparison asked for more eigenpairs than a spectrum holds.
    #[error("need {need} eigenpairs but only {have} are available")]
    InsufficientEigenpairs { have: usize, need: usize },

    /// The mesh carries no region tags where they are required.
    #[error("mesh has no region tags")]
    MissingTags,

    /// A projection basis failed its orthonormality precondition.
    #[error("basis is not M-orthonormal (Gram defect {defect:.3e} > 1e-8)")]
    NonOrthonormalBasis { defect: f64 },

    /// 1D data does not line up with the mesh's x-stations.
    #[error("station mismatch: expected {expected} x-stations, got {got}")]
    StationMismatch { expected: usize, got: usize },
}
