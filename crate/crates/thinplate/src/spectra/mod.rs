//! Spectral bookkeeping: merged sequences, decomposition matching,
//! dividers, localization, projection deficiencies, and ε-sweep drivers.
//!
//! The central claim this module checks numerically: as ε → 0 the
//! dumbbell spectrum λ_n(Ω_ε) approaches the *merged* sequence λ_n^ε —
//! the ascending union (with multiplicity) of the fixed-domain
//! eigenvalues ω_k of Ω = Ω_L ∪ Ω_R and the channel eigenvalues θ_l^ε —
//! while the eigenfunctions localize either on Ω or on the channel.
//!
//! Note that Ω is *disconnected*: its spectrum is the merge of the two
//! boxes' spectra, so λ = 1 appears there with multiplicity 2 (each box
//! has its own constant mode). This surprises people reading the merged
//! list for the first time; it is intentional and correct.

mod pipeline;
mod sweep;

pub use pipeline::{
    decompose, decomposition_run, dirichlet_contrast, region_block_deficiency,
    DecompositionReport, DecompositionRow, DecompositionRun, DirichletRun, RegionBasis,
    DEFAULT_GAP_REL,
};
pub use sweep::{epsilon_sweep, ConvergenceTable, SweepConfig, SweepMode, SweepRow};

use crate::error::Error;
use crate::femcore::{bfs_element_matrices, CoeffSamples, DiscreteField, FormKind, SparseSym};
use crate::meshgen::{QuadMesh, RegionTag};
use crate::quadrature::GAUSS4;
use crate::Result;
use serde::{Deserialize, Serialize};

/// Origin of one entry of a merged spectrum: position in the Ω list or
/// the channel list (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeTag {
    OmegaMode(usize),
    ChannelMode(usize),
}

impl std::fmt::Display for ModeTag {
    /// Human-readable, 1-based: `omega(3)` is the third Ω eigenvalue.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModeTag::OmegaMode(k) => write!(f, "omega({})", k + 1),
            ModeTag::ChannelMode(l) => write!(f, "channel({})", l + 1),
        }
    }
}

/// The ascending union of two spectra, each entry tagged with its origin.
#[derive(Debug, Clone, Serialize)]
pub struct MergedSpectrum {
    pub values: Vec<f64>,
    pub tags: Vec<ModeTag>,
}

impl MergedSpectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_ascending(v: &[f64]) -> Result<()> {
    if v.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::UnsortedInput);
    }
    Ok(())
}

/// Merge two ascending spectra into the combined ascending sequence.
/// At exact ties the Ω entry is listed first — the convention that makes
/// per-index matching against the merged list well-defined.
pub fn merge(omega: &[f64], theta: &[f64]) -> Result<MergedSpectrum> {
    check_ascending(omega)?;
    check_ascending(theta)?;
    let mut values = Vec::with_capacity(omega.len() + theta.len());
    let mut tags = Vec::with_capacity(values.capacity());
    let (mut i, mut j) = (0usize, 0usize);
    while i < omega.len() || j < theta.len() {
        let take_omega = i < omega.len() && (j >= theta.len() || omega[i] <= theta[j]);
        if take_omega {
            values.push(omega[i]);
            tags.push(ModeTag::OmegaMode(i));
            i += 1;
        } else {
            values.push(theta[j]);
            tags.push(ModeTag::ChannelMode(j));
            j += 1;
        }
    }
    Ok(MergedSpectrum { values, tags })
}

/// Spectrum dividers: midpoints of relative gaps of at least `gap_rel`,
/// paired with the count N(x) of eigenvalues at or below each divider.
/// The relative gap between consecutive values a ≤ b is (b − a)/a
/// (spectra here are ≥ 1, so the denominator is safe).
pub fn find_divider(merged: &MergedSpectrum, gap_rel: f64) -> Vec<(f64, usize)> {
    let v = &merged.values;
    let mut out = Vec::new();
    for i in 0..v.len().saturating_sub(1) {
        let (a, b) = (v[i], v[i + 1]);
        if a > 0.0 && (b - a) / a >= gap_rel {
            out.push((0.5 * (a + b), i + 1));
        }
    }
    out
}

/// L² mass fractions of a field over the Ω boxes vs the channel,
/// normalized to sum to exactly 1. Element mass integrals partition the
/// domain, so the split is exact at the discrete level.
pub fn localize(field: &DiscreteField, mesh: &QuadMesh) -> Result<(f64, f64)> {
    if mesh.region_tags.len() != mesh.n_elems() {
        return Err(Error::MissingTags);
    }
    if field.dofs_per_node != 4 || field.n_nodes() != mesh.n_nodes() {
        return Err(Error::DimensionMismatch {
            left: field.data.len(),
            right: mesh.n_nodes() * 4,
        });
    }
    let mut mass_omega = 0.0f64;
    let mut mass_channel = 0.0f64;
    for e in 0..mesh.n_elems() {
        let [hx, hy] = mesh.elem_size[e];
        let [x0, y0] = mesh.nodes[mesh.elems[e][0]];
        let me = bfs_element_matrices(
            hx,
            hy,
            &FormKind::Mass,
            &CoeffSamples::unit(&GAUSS4, x0, y0, hx),
        )?;
        let mut local = [0.0f64; 16];
        for (c, &node) in mesh.elems[e].iter().enumerate() {
            for comp in 0..4 {
                local[4 * c + comp] = field.comp(node, comp);
            }
        }
        let mut energy = 0.0;
        for i in 0..16 {
            for j in 0..16 {
                energy += local[i] * me[i][j] * local[j];
            }
        }
        match mesh.region_tags[e] {
            RegionTag::Channel => mass_channel += energy,
            RegionTag::OmegaLeft | RegionTag::OmegaRight => mass_omega += energy,
        }
    }
    let total = mass_omega + mass_channel;
    if !(total > 0.0) {
        return Err(Error::InvalidParams(
            "localization of an identically zero field".into(),
        ));
    }
    Ok((mass_omega / total, mass_channel / total))
}

/// Distance from `target` to the span of an M-orthonormal `basis` in the
/// M-norm: ‖t − Σᵢ (t, bᵢ)_M bᵢ‖_M, computed from the explicit residual.
/// The basis is verified first; a Gram deviation beyond 1e-8 is an
/// error, because the formula silently under- or over-projects
/// otherwise.
pub fn projection_deficiency(
    target: &[f64],
    basis: &[Vec<f64>],
    m: &SparseSym,
) -> Result<f64> {
    let n = m.n();
    if target.len() != n || basis.iter().any(|b| b.len() != n) {
        return Err(Error::DimensionMismatch {
            left: target.len(),
            right: n,
        });
    }
    let mut defect = 0.0f64;
    for i in 0..basis.len() {
        for j in i..basis.len() {
            let g = m.quadratic(&basis[i], &basis[j]);
            let want = if i == j { 1.0 } else { 0.0 };
            defect = defect.max((g - want).abs());
        }
    }
    if defect > 1e-8 {
        return Err(Error::NonOrthonormalBasis { defect });
    }
    let mut r = target.to_vec();
    for b in basis {
        let c = m.quadratic(target, b);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri -= c * bi;
        }
    }
    Ok(m.quadratic(&r, &r).max(0.0).sqrt())
}
