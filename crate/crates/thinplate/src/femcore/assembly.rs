//! Global assembly: element loops, scatter, and clamped-node constraints.
//!
//! Assembly runs in two phases. Phase A computes all element matrices —
//! in parallel when the `parallel` feature is active and the caller asks
//! for it — collected back in element order. Phase B scatters them into
//! the global matrix sequentially in element order. Floating-point
//! addition is not associative, so phase B is what makes assembled
//! matrices bitwise identical across thread counts and strategies.

use super::elements::{
    bfs_element_matrices_dd, hermite1d_element_dd, rule_for, CoeffSamples, ElemMat16, ElemMat4,
};
use super::sparse::SparseSym;
use super::FormKind;
use crate::error::Error;
use crate::meshgen::{BoundaryTag, DofMap, IntervalMesh, QuadMesh};
use crate::quadrature::GAUSS6;
use crate::Result;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How phase A (element-matrix computation) is scheduled. `Parallel`
/// falls back to sequential execution when the crate is built without
/// the `parallel` feature; results are bitwise identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Sequential,
    Parallel,
}

impl Default for Strategy {
    fn default() -> Self {
        Strategy::Parallel
    }
}

/// Which tagged nodes [`apply_clamped_constraints`] eliminates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClampWhere {
    /// Nodes tagged `ClampedSegment` (the x ∈ {0,1} ends of the channel
    /// reference strip, or interval endpoints in 1D).
    ChannelEnds,
    /// Every non-interior node.
    AllBoundary,
}

/// Zero out all DOFs of the selected tagged nodes, eliminating them from
/// the free system. Returns the number of nodes clamped; it is an error
/// for the selection to be empty (a silently unconstrained clamped
/// problem would be wrong everywhere downstream).
pub fn apply_clamped_constraints(
    mesh: &QuadMesh,
    dofs: &mut DofMap,
    which: ClampWhere,
) -> Result<usize> {
    if dofs.n_nodes != mesh.n_nodes() {
        return Err(Error::DimensionMismatch {
            left: dofs.n_nodes,
            right: mesh.n_nodes(),
        });
    }
    let mut count = 0usize;
    for (node, &tag) in mesh.boundary_tags.iter().enumerate() {
        let hit = match which {
            ClampWhere::ChannelEnds => tag == BoundaryTag::ClampedSegment,
            ClampWhere::AllBoundary => tag != BoundaryTag::Interior,
        };
        if hit {
            dofs.constrain_node(node);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::NoTaggedNodes);
    }
    dofs.rebuild();
    Ok(count)
}

/// Free global DOF indices of one element, or `None` where constrained.
/// Local order: 4·corner + component.
fn elem_free_dofs(mesh: &QuadMesh, dofs: &DofMap, e: usize) -> [Option<usize>; 16] {
    let mut out = [None; 16];
    for (c, &node) in mesh.elems[e].iter().enumerate() {
        for comp in 0..4 {
            out[4 * c + comp] = dofs.free_of(node, comp);
        }
    }
    out
}

/// Build the upper-triangular sparsity pattern from the mesh connectivity.
fn pattern_2d(mesh: &QuadMesh, dofs: &DofMap) -> Result<SparseSym> {
    let mut rows: Vec<Vec<usize>> = (0..dofs.n_free).map(|i| vec![i]).collect();
    for e in 0..mesh.n_elems() {
        let gd = elem_free_dofs(mesh, dofs, e);
        for &gi in gd.iter().flatten() {
            for &gj in gd.iter().flatten() {
                if gj > gi {
                    rows[gi].push(gj);
                }
            }
        }
    }
    SparseSym::from_rows(rows)
}

fn validate_for_form(mesh: &QuadMesh, kind: &FormKind) -> Result<()> {
    kind.validate()?;
    if let FormKind::ChannelEpsForm(..) = kind {
        // The pulled-back form lives on the unit square in (x, η).
        for p in &mesh.nodes {
            if !(0.0..=1.0).contains(&p[0]) || !(0.0..=1.0).contains(&p[1]) {
                return Err(Error::IncompatibleMesh(
                    "the pulled-back channel form requires a mesh inside the unit square".into(),
                ));
            }
        }
        if !mesh.is_tensor() {
            return Err(Error::IncompatibleMesh(
                "the pulled-back channel form requires a tensor-product grid".into(),
            ));
        }
    }
    if let FormKind::Limit1DForm(..) = kind {
        return Err(Error::IncompatibleMesh(
            "the 1D limit form cannot be assembled on a 2D mesh".into(),
        ));
    }
    Ok(())
}

fn elem_matrix_2d(mesh: &QuadMesh, kind: &FormKind, e: usize) -> Result<(ElemMat16, ElemMat16)> {
    let [hx, hy] = mesh.elem_size[e];
    let [x0, y0] = mesh.nodes[mesh.elems[e][0]];
    let rule = rule_for(kind);
    let coeff = match kind.profile() {
        Some(profile) => CoeffSamples::sample(profile, x0, y0, hx, rule),
        None => CoeffSamples::unit(rule, x0, y0, hx),
    };
    bfs_element_matrices_dd(hx, hy, kind, &coeff)
}

/// Assemble the global matrix of `kind` over the free DOFs with the
/// default strategy.
pub fn assemble(mesh: &QuadMesh, dofs: &DofMap, kind: &FormKind) -> Result<SparseSym> {
    assemble_with(mesh, dofs, kind, Strategy::default())
}

/// Assemble with an explicit phase-A strategy.
pub fn assemble_with(
    mesh: &QuadMesh,
    dofs: &DofMap,
    kind: &FormKind,
    strategy: Strategy,
) -> Result<SparseSym> {
    validate_for_form(mesh, kind)?;
    if dofs.n_nodes != mesh.n_nodes() || dofs.dofs_per_node != 4 {
        return Err(Error::DimensionMismatch {
            left: dofs.n_nodes * dofs.dofs_per_node,
            right: mesh.n_nodes() * 4,
        });
    }
    let mut a = pattern_2d(mesh, dofs)?;

    // Phase A: element matrices, in element order.
    let n_elems = mesh.n_elems();
    let mats: Vec<Result<(ElemMat16, ElemMat16)>> = match strategy {
        #[cfg(feature = "parallel")]
        Strategy::Parallel => (0..n_elems)
            .into_par_iter()
            .map(|e| elem_matrix_2d(mesh, kind, e))
            .collect(),
        #[cfg(not(feature = "parallel"))]
        Strategy::Parallel => (0..n_elems).map(|e| elem_matrix_2d(mesh, kind, e)).collect(),
        Strategy::Sequential => (0..n_elems).map(|e| elem_matrix_2d(mesh, kind, e)).collect(),
    };

    // Phase B: sequential scatter in element order, upper triangle only.
    for (e, mat) in mats.into_iter().enumerate() {
        let (ke, kc) = mat?;
        let gd = elem_free_dofs(mesh, dofs, e);
        for (li, &gi) in gd.iter().enumerate() {
            let Some(gi) = gi else { continue };
            for (lj, &gj) in gd.iter().enumerate() {
                let Some(gj) = gj else { continue };
                if gj >= gi {
                    a.add_at_dd(gi, gj, ke[li][lj], kc[li][lj]);
                }
            }
        }
    }
    Ok(a)
}

/// Assemble a 1D form over an interval mesh's free DOFs (sequential:
/// 1D systems are tiny).
pub fn assemble_interval(mesh: &IntervalMesh, dofs: &DofMap, kind: &FormKind) -> Result<SparseSym> {
    kind.validate()?;
    match kind {
        FormKind::Mass | FormKind::WeightedMass(_) | FormKind::Limit1DForm(..) => {}
        _ => {
            return Err(Error::IncompatibleMesh(
                "2D form kinds cannot be assembled on an interval mesh".into(),
            ));
        }
    }
    if dofs.n_nodes != mesh.nodes.len() || dofs.dofs_per_node != 2 {
        return Err(Error::DimensionMismatch {
            left: dofs.n_nodes * dofs.dofs_per_node,
            right: mesh.nodes.len() * 2,
        });
    }

    let free_local = |e: usize| -> [Option<usize>; 4] {
        [
            dofs.free_of(e, 0),
            dofs.free_of(e, 1),
            dofs.free_of(e + 1, 0),
            dofs.free_of(e + 1, 1),
        ]
    };

    let mut rows: Vec<Vec<usize>> = (0..dofs.n_free).map(|i| vec![i]).collect();
    for e in 0..mesh.n_elems() {
        let gd = free_local(e);
        for &gi in gd.iter().flatten() {
            for &gj in gd.iter().flatten() {
                if gj > gi {
                    rows[gi].push(gj);
                }
            }
        }
    }
    let mut a = SparseSym::from_rows(rows)?;

    for e in 0..mesh.n_elems() {
        let h = mesh.elem_h(e);
        let x0 = mesh.nodes[e];
        let coeff = match kind.profile() {
            Some(profile) => CoeffSamples::sample(profile, x0, 0.0, h, &GAUSS6),
            None => CoeffSamples::unit(&GAUSS6, x0, 0.0, h),
        };
        let (ke, kc): (ElemMat4, ElemMat4) = hermite1d_element_dd(h, kind, &coeff)?;
        let gd = free_local(e);
        for (li, &gi) in gd.iter().enumerate() {
            let Some(gi) = gi else { continue };
            for (lj, &gj) in gd.iter().enumerate() {
                let Some(gj) = gj else { continue };
                if gj >= gi {
                    a.add_at_dd(gi, gj, ke[li][lj], kc[li][lj]);
                }
            }
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DumbbellSpec, MaterialParams, ProfileSpec};
    use crate::meshgen::{
        build_channel_reference_mesh, build_dumbbell_mesh, build_interval_mesh,
    };

    fn params(sigma: f64, tau: f64) -> MaterialParams {
        MaterialParams::new(sigma, tau).unwrap()
    }

    fn unit_square_mesh(nx: usize, ny: usize) -> QuadMesh {
        build_channel_reference_mesh(nx, ny, &ProfileSpec::constant(1.0)).unwrap()
    }

    /// The all-ones coefficient vector represents u ≡ 1 (value DOFs 1,
    /// derivative DOFs 0). Its plate energy is ∫ u² = area, and K𝟙 = M𝟙
    /// entrywise because the derivative terms annihilate constants.
    #[test]
    fn constant_vector_energy_equals_area() {
        let mesh = unit_square_mesh(4, 3);
        let dofs = DofMap::for_mesh(&mesh);
        let kind = FormKind::PlateForm(params(0.3, 1.5));
        let k = assemble(&mesh, &dofs, &kind).unwrap();
        let m = assemble(&mesh, &dofs, &FormKind::Mass).unwrap();

        let mut ones = vec![0.0; dofs.n_free];
        for node in 0..mesh.n_nodes() {
            if let Some(fi) = dofs.free_of(node, 0) {
                ones[fi] = 1.0;
            }
        }
        let e = k.quadratic(&ones, &ones);
        assert!((e - mesh.area()).abs() < 1e-12 * mesh.area().max(1.0));
        assert!((m.quadratic(&ones, &ones) - mesh.area()).abs() < 1e-12);

        let mut ku = vec![0.0; dofs.n_free];
        let mut mu = vec![0.0; dofs.n_free];
        k.matvec(&ones, &mut ku);
        m.matvec(&ones, &mut mu);
        let maxdiff = ku
            .iter()
            .zip(&mu)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        assert!(
            maxdiff <= 1e-12 * k.max_abs(),
            "‖K·1 − M·1‖∞ = {maxdiff}, scale {}",
            k.max_abs()
        );
    }

    /// 𝟙ᵀM𝟙 = |Ω| on the dumbbell mesh, at full precision.
    #[test]
    fn mass_total_is_domain_area() {
        let spec = DumbbellSpec::new(1.0, 0.5, ProfileSpec::constant(1.0), 0.5).unwrap();
        let mesh = build_dumbbell_mesh(&spec, 0.25).unwrap();
        let dofs = DofMap::for_mesh(&mesh);
        let m = assemble(&mesh, &dofs, &FormKind::Mass).unwrap();
        let mut ones = vec![0.0; dofs.n_free];
        for node in 0..mesh.n_nodes() {
            ones[dofs.free_of(node, 0).unwrap()] = 1.0;
        }
        let total = m.quadratic(&ones, &ones);
        assert!((total - spec.area()).abs() < 1e-12 * spec.area());
    }

    /// Parallel and sequential assembly agree bitwise.
    #[test]
    fn assembly_is_strategy_invariant() {
        let spec = DumbbellSpec::new(1.0, 1.0, ProfileSpec::constant(0.8), 0.5).unwrap();
        let mesh = build_dumbbell_mesh(&spec, 0.25).unwrap();
        let dofs = DofMap::for_mesh(&mesh);
        let kind = FormKind::PlateForm(params(0.3, 2.0));
        let seq = assemble_with(&mesh, &dofs, &kind, Strategy::Sequential).unwrap();
        let par = assemble_with(&mesh, &dofs, &kind, Strategy::Parallel).unwrap();
        assert_eq!(seq.values().len(), par.values().len());
        for (a, b) in seq.values().iter().zip(par.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    /// Clamping both ends of a 4×4-element channel strip removes
    /// 2·5 nodes × 4 DOFs = 40 of the 100 DOFs.
    #[test]
    fn clamp_channel_ends_count() {
        let mesh = unit_square_mesh(4, 4);
        let mut dofs = DofMap::for_mesh(&mesh);
        let clamped = apply_clamped_constraints(&mesh, &mut dofs, ClampWhere::ChannelEnds).unwrap();
        assert_eq!(clamped, 10);
        assert_eq!(dofs.n_constrained(), 40);
        assert_eq!(dofs.n_free, 60);
    }

    /// Clamping the whole boundary of a 2×2-element square leaves only
    /// the center node: 4 free DOFs.
    #[test]
    fn clamp_all_boundary_leaves_center() {
        let mesh = unit_square_mesh(2, 2);
        let mut dofs = DofMap::for_mesh(&mesh);
        let clamped = apply_clamped_constraints(&mesh, &mut dofs, ClampWhere::AllBoundary).unwrap();
        assert_eq!(clamped, 8);
        assert_eq!(dofs.n_free, 4);
    }

    /// A mesh with no clamped tags cannot satisfy ChannelEnds.
    #[test]
    fn clamp_without_tags_is_an_error() {
        let spec = DumbbellSpec::new(1.0, 1.0, ProfileSpec::constant(1.0), 0.5).unwrap();
        let mesh = build_dumbbell_mesh(&spec, 0.5).unwrap();
        let mut dofs = DofMap::for_mesh(&mesh);
        assert!(matches!(
            apply_clamped_constraints(&mesh, &mut dofs, ClampWhere::ChannelEnds),
            Err(Error::NoTaggedNodes)
        ));
    }

    /// Constrained DOFs must not appear in the assembled system.
    #[test]
    fn constrained_dofs_are_eliminated() {
        let mesh = unit_square_mesh(3, 3);
        let mut dofs = DofMap::for_mesh(&mesh);
        apply_clamped_constraints(&mesh, &mut dofs, ClampWhere::ChannelEnds).unwrap();
        let k = assemble(&mesh, &dofs, &FormKind::PlateForm(params(0.0, 0.0))).unwrap();
        assert_eq!(k.n(), dofs.n_free);
    }

    /// Pulled-back channel assembly at ε=1, g≡1 equals plate assembly on
    /// the same grid, entry for entry.
    #[test]
    fn channel_assembly_identity_case() {
        let mesh = unit_square_mesh(3, 4);
        let dofs = DofMap::for_mesh(&mesh);
        let p = params(0.3, 0.7);
        let plate = assemble(&mesh, &dofs, &FormKind::PlateForm(p)).unwrap();
        let chan = assemble(
            &mesh,
            &dofs,
            &FormKind::ChannelEpsForm(p, 1.0, ProfileSpec::constant(1.0)),
        )
        .unwrap();
        let scale = plate.max_abs();
        for (a, b) in plate.values().iter().zip(chan.values()) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    /// Weighted 2D mass with weight g against u ≡ 1 integrates ∫∫ g dx dη.
    #[test]
    fn weighted_mass_quadratic_form() {
        let profile = ProfileSpec::new(
            crate::geometry::ProfileKind::Polynomial {
                coeffs: vec![1.0, 0.0, 1.0],
            },
            0.25,
        )
        .unwrap();
        let mesh = build_channel_reference_mesh(5, 3, &profile).unwrap();
        let dofs = DofMap::for_mesh(&mesh);
        let m = assemble(&mesh, &dofs, &FormKind::WeightedMass(profile)).unwrap();
        let mut ones = vec![0.0; dofs.n_free];
        for node in 0..mesh.n_nodes() {
            ones[dofs.free_of(node, 0).unwrap()] = 1.0;
        }
        // ∫₀¹ (1+x²) dx · ∫₀¹ dη = 4/3.
        let want = 4.0 / 3.0;
        assert!((m.quadratic(&ones, &ones) - want).abs() < 1e-13);
    }

    /// 1D assembly: clamped-interval stiffness of the limit form has the
    /// right size and the constant-field mass identity holds before
    /// clamping.
    #[test]
    fn interval_assembly_basics() {
        let mesh = build_interval_mesh(8).unwrap();
        let profile = ProfileSpec::constant(2.0);

        let free = DofMap::for_interval(&mesh);
        let m = assemble_interval(&mesh, &free, &FormKind::WeightedMass(profile.clone())).unwrap();
        let mut ones = vec![0.0; free.n_free];
        for node in 0..mesh.nodes.len() {
            ones[free.free_of(node, 0).unwrap()] = 1.0;
        }
        assert!((m.quadratic(&ones, &ones) - 2.0).abs() < 1e-14);

        let mut dofs = DofMap::for_interval(&mesh);
        dofs.constrain_node(mesh.clamped[0]);
        dofs.constrain_node(mesh.clamped[1]);
        dofs.rebuild();
        let k = assemble_interval(
            &mesh,
            &dofs,
            &FormKind::Limit1DForm(params(0.3, 1.0), profile),
        )
        .unwrap();
        assert_eq!(k.n(), 2 * (8 + 1) - 4);
    }

    /// The pulled-back form rejects meshes outside the unit square.
    #[test]
    fn channel_form_rejects_dumbbell_mesh() {
        let spec = DumbbellSpec::new(1.0, 1.0, ProfileSpec::constant(1.0), 0.5).unwrap();
        let mesh = build_dumbbell_mesh(&spec, 0.5).unwrap();
        let dofs = DofMap::for_mesh(&mesh);
        let kind = FormKind::ChannelEpsForm(params(0.0, 0.0), 0.5, ProfileSpec::constant(1.0));
        assert!(assemble(&mesh, &dofs, &kind).is_err());
    }
}
