//! The 1D weighted limit problem of the thin channel.
//!
//! As the channel width ε·g(x) collapses, the channel eigenvalues θ_l^ε
//! converge to those of a clamped weighted beam-type problem on (0,1):
//! find h ∈ H²₀(0,1) with
//!
//! ```text
//!   (1−σ²)·∫ h″ψ″ g + τ·∫ h′ψ′ g + ∫ h ψ g  =  θ·∫ h ψ g
//! ```
//!
//! for all ψ ∈ H²₀(0,1), i.e. a generalized eigenproblem in the
//! g-weighted L² inner product. The bending stiffness carries the factor
//! 1−σ² — a thin strip is softer than a wide plate in exactly that
//! ratio, which is the "distortion" this module quantifies.
//!
//! For g ≡ 1 and τ = 0 the eigenvalues have a classical closed form:
//! θ_j = 1 + (1−σ²)·k_j⁴ where k_j are the positive roots of
//! cos k · cosh k = 1 — the clamped–clamped beam frequencies. The root
//! finder here ([`beam_roots`]) is an independent oracle: plain
//! bisection on a transcendental function, sharing nothing with the FE
//! stack it validates.

use crate::eigensolve::{solve_smallest, EigenPairs, LanczosOptions};
use crate::femcore::{assemble_interval, FormKind};
use crate::geometry::{MaterialParams, ProfileSpec};
use crate::meshgen::{build_interval_mesh, DofMap, IntervalMesh};
use crate::Result;
use std::f64::consts::PI;

/// The first `count` positive roots of cos k · cosh k = 1.
///
/// Root j lies within 0.5 of (j + 1/2)π (the agreement is exponential in
/// j), and on that bracket the equivalent bounded function
/// f(k) = cos k − 1/cosh k changes sign, so bisection is safe and
/// converges to machine precision.
pub fn beam_roots(count: usize) -> Vec<f64> {
    let f = |k: f64| k.cos() - 1.0 / k.cosh();
    (1..=count)
        .map(|j| {
            let center = (j as f64 + 0.5) * PI;
            let mut a = center - 0.5;
            let mut b = center + 0.5;
            let mut fa = f(a);
            debug_assert!(fa * f(b) < 0.0);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m == a || m == b {
                    break;
                }
                let fm = f(m);
                if (fm > 0.0) == (fa > 0.0) {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

/// Closed-form limit eigenvalue θ_j = 1 + (1−σ²)·k_j⁴ for the constant
/// profile g ≡ 1 with τ = 0. `j` is 1-based.
pub fn clamped_beam_eigenvalue(j: usize, sigma: f64) -> f64 {
    assert!(j >= 1);
    let k = beam_roots(j)[j - 1];
    1.0 + (1.0 - sigma * sigma) * k.powi(4)
}

/// A residual tolerance that is actually reachable for the 1D problem
/// at a given resolution. The solver's residual metric
/// ‖Kx − λMx‖₂/‖Kx‖₂ cannot be evaluated below roundoff in K·x, and the
/// bending entries of K grow like 1/h³, so the measurement floor rises
/// with the cube of the element count. Eigenvalue accuracy is far better
/// than this (Ritz value error is quadratic in the residual); the bound
/// only reflects what the metric itself can resolve.
pub fn limit_solver_tol(n_elems: usize) -> f64 {
    let n = n_elems as f64;
    (1e-9 * (n / 16.0).powi(3)).clamp(1e-9, 1e-4)
}

/// A solved 1D limit problem: mesh, constraint map and eigenpairs.
#[derive(Debug, Clone)]
pub struct LimitSolution {
    pub mesh: IntervalMesh,
    pub dofs: DofMap,
    pub pairs: EigenPairs,
}

impl LimitSolution {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.pairs.values
    }

    /// Hermite station data `(h, h′)` per mesh node for one mode —
    /// the exchange format with the 2D extension operator.
    pub fn station_data(&self, mode: usize) -> Vec<[f64; 2]> {
        let full = self.dofs.expand(&self.pairs.vectors[mode]);
        (0..self.mesh.nodes.len())
            .map(|i| [full[2 * i], full[2 * i + 1]])
            .collect()
    }
}

/// Solve the clamped 1D limit problem on a uniform n-element mesh.
/// `opts.k` is the number of eigenpairs.
pub fn solve_limit(
    params: &MaterialParams,
    profile: &ProfileSpec,
    n_elems: usize,
    opts: &LanczosOptions,
) -> Result<LimitSolution> {
    params.validate()?;
    let mesh = build_interval_mesh(n_elems)?;
    let mut dofs = DofMap::for_interval(&mesh);
    dofs.constrain_node(mesh.clamped[0]);
    dofs.constrain_node(mesh.clamped[1]);
    dofs.rebuild();

    let k = assemble_interval(
        &mesh,
        &dofs,
        &FormKind::Limit1DForm(*params, profile.clone()),
    )?;
    let m = assemble_interval(&mesh, &dofs, &FormKind::WeightedMass(profile.clone()))?;
    let pairs = solve_smallest(&k, &m, opts)?;
    Ok(LimitSolution { mesh, dofs, pairs })
}

/// The distortion ratios (θ_j(σ) − 1)/(θ_j(0) − 1) for j = 1..=j_max,
/// computed on one grid. For τ = 0 these equal 1−σ² exactly — even at
/// the discrete level, since the σ-dependence is a scalar factor on the
/// bending block — so deviations measure solver error, not
/// discretization error.
pub fn sigma_distortion_ratio(
    sigma: f64,
    tau: f64,
    profile: &ProfileSpec,
    n_elems: usize,
    j_max: usize,
) -> Result<Vec<f64>> {
    let opts = LanczosOptions {
        k: j_max,
        tol: limit_solver_tol(n_elems),
        ..Default::default()
    };
    let with_sigma = solve_limit(&MaterialParams::new(sigma, tau)?, profile, n_elems, &opts)?;
    let with_zero = solve_limit(&MaterialParams::new(0.0, tau)?, profile, n_elems, &opts)?;
    Ok(with_sigma
        .eigenvalues()
        .iter()
        .zip(with_zero.eigenvalues())
        .map(|(&a, &b)| (a - 1.0) / (b - 1.0))
        .collect())
}
