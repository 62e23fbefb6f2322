//! Structured, conforming, axis-aligned quadrilateral meshes for
//! rectangle-decomposable dumbbells, the channel reference square, and
//! 1D intervals — plus the C1 degree-of-freedom bookkeeping.
//!
//! ## Conformity strategy
//!
//! Every mesh here is a union of tensor-product blocks. Coordinates that
//! two blocks must share (the channel levels y = 0 … ε·g₀ on the
//! attachment lines x = 0 and x = 1) are computed **once** and reused, so
//! shared nodes are bitwise-identical pairs and deduplication by exact
//! coordinate match is safe — no tolerance-based welding anywhere.
//!
//! The channel rows tile (0, ε·g₀) exactly, which places the four
//! reentrant junction corners (0,0), (0,ε·g₀), (1,0), (1,ε·g₀) on mesh
//! nodes. The corner singularities of the fourth-order problem receive no
//! special treatment beyond that (the weak form needs none); anisotropic
//! channel elements are allowed up to an aspect-ratio cap.
//!
//! Node indices are canonicalized to lexicographic (x, y) order. That
//! ordering keeps the envelope of the assembled matrices narrow (the
//! skyline factorization cost is ~ n·b², with b tracking the number of
//! DOFs per vertical mesh line), and it gives region extraction a stable,
//! reproducible node correspondence.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::Error;
use crate::geometry::{DumbbellSpec, ProfileSpec};
use crate::Result;

/// Default cap on per-element aspect ratio max(hx/hy, hy/hx).
pub const DEFAULT_ASPECT_CAP: f64 = 50.0;

/// Per-node boundary classification. Every node carries exactly one tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundaryTag {
    Interior,
    /// On the boundary, natural (free-edge) conditions.
    FreeBoundary,
    /// On a clamped segment: the channel ends {0,1}×(0, ε·g₀) of the
    /// reference mesh, or any node selected by the all-boundary variant.
    ClampedSegment,
}

/// Per-element region classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegionTag {
    OmegaLeft,
    OmegaRight,
    Channel,
}

/// A structured axis-aligned quadrilateral mesh.
///
/// Elements list their corner nodes counterclockwise from the lower-left:
/// `[ll, lr, ur, ul]`. All elements are rectangles, so per-element size
/// data is just `(hx, hy)`.
#[derive(Debug, Clone, Serialize)]
pub struct QuadMesh {
    pub nodes: Vec<[f64; 2]>,
    pub elems: Vec<[usize; 4]>,
    pub elem_size: Vec<[f64; 2]>,
    pub boundary_tags: Vec<BoundaryTag>,
    pub region_tags: Vec<RegionTag>,
}

impl QuadMesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elems(&self) -> usize {
        self.elems.len()
    }

    /// Sum of element areas.
    pub fn area(&self) -> f64 {
        self.elem_size.iter().map(|s| s[0] * s[1]).sum()
    }

    /// Sorted distinct x-coordinates (exact comparison; valid because all
    /// constructors reuse shared coordinate arrays).
    pub fn x_stations(&self) -> Vec<f64> {
        let mut xs: Vec<f64> = self.nodes.iter().map(|p| p[0]).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs
    }

    /// Sorted distinct y-coordinates.
    pub fn y_stations(&self) -> Vec<f64> {
        let mut ys: Vec<f64> = self.nodes.iter().map(|p| p[1]).collect();
        ys.sort_by(f64::total_cmp);
        ys.dedup();
        ys
    }

    /// Is this a full tensor grid (every (x,y) station pair is a node)?
    pub fn is_tensor(&self) -> bool {
        self.x_stations().len() * self.y_stations().len() == self.nodes.len()
    }

    /// Structural self-check: tag array lengths, positive element sizes,
    /// and element corners actually matching the stored sizes.
    fn validate(&self) -> Result<()> {
        if self.boundary_tags.len() != self.nodes.len()
            || self.region_tags.len() != self.elems.len()
            || self.elem_size.len() != self.elems.len()
        {
            return Err(Error::IncompatibleMesh(
                "tag/size arrays out of step with nodes/elements".into(),
            ));
        }
        for (e, &[ll, lr, ur, ul]) in self.elems.iter().enumerate() {
            let [hx, hy] = self.elem_size[e];
            if !(hx > 0.0 && hy > 0.0) {
                return Err(Error::IncompatibleMesh(format!(
                    "element {e} has nonpositive size ({hx}, {hy})"
                )));
            }
            let p = |i: usize| self.nodes[i];
            let ok = p(lr)[0] - p(ll)[0] == hx
                && p(ul)[1] - p(ll)[1] == hy
                && p(ur)[0] == p(lr)[0]
                && p(ur)[1] == p(ul)[1]
                && p(ll)[1] == p(lr)[1]
                && p(ll)[0] == p(ul)[0];
            if !ok {
                return Err(Error::IncompatibleMesh(format!(
                    "element {e} corners are not an axis-aligned rectangle of its stored size"
                )));
            }
        }
        Ok(())
    }
}

/// Uniform 1D mesh on [0,1] with cubic Hermite DOFs (u, u′) per node.
#[derive(Debug, Clone, Serialize)]
pub struct IntervalMesh {
    /// n+1 node coordinates, ascending, endpoints exactly 0 and 1.
    pub nodes: Vec<f64>,
    /// Indices of the clamped endpoint nodes (always first and last).
    pub clamped: [usize; 2],
}

impl IntervalMesh {
    pub fn n_elems(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn elem_h(&self, e: usize) -> f64 {
        self.nodes[e + 1] - self.nodes[e]
    }
}

/// C1 DOF map: 4 DOFs per node (u, u_x, u_y, u_xy) in 2D, 2 per node
/// (u, u′) in 1D. Constrained DOFs are eliminated: assembled systems and
/// eigenvectors live on the free DOFs only.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub n_nodes: usize,
    pub dofs_per_node: usize,
    /// Global-DOF mask, node-major: index = node·dofs_per_node + comp.
    pub constrained: Vec<bool>,
    free_index: Vec<usize>,
    pub n_free: usize,
}

const NO_DOF: usize = usize::MAX;

impl DofMap {
    /// Unconstrained 2D map over a mesh.
    pub fn for_mesh(mesh: &QuadMesh) -> Self {
        Self::unconstrained(mesh.n_nodes(), 4)
    }

    /// Unconstrained 1D map over an interval mesh.
    pub fn for_interval(mesh: &IntervalMesh) -> Self {
        Self::unconstrained(mesh.nodes.len(), 2)
    }

    pub fn unconstrained(n_nodes: usize, dofs_per_node: usize) -> Self {
        let total = n_nodes * dofs_per_node;
        let mut map = Self {
            n_nodes,
            dofs_per_node,
            constrained: vec![false; total],
            free_index: Vec::new(),
            n_free: 0,
        };
        map.rebuild();
        map
    }

    /// Zero out every DOF at a node (the clamped-node convention: on an
    /// axis-aligned clamped edge, u = 0 along the edge kills the value and
    /// tangential-derivative DOFs, and ∂u/∂n = 0 kills the normal and
    /// mixed ones — so all four go).
    pub fn constrain_node(&mut self, node: usize) {
        let base = node * self.dofs_per_node;
        for c in 0..self.dofs_per_node {
            self.constrained[base + c] = true;
        }
    }

    /// Recompute the free-DOF numbering after constraint edits.
    pub fn rebuild(&mut self) {
        self.free_index = vec![NO_DOF; self.constrained.len()];
        let mut next = 0;
        for (g, &c) in self.constrained.iter().enumerate() {
            if !c {
                self.free_index[g] = next;
                next += 1;
            }
        }
        self.n_free = next;
    }

    /// Free index of (node, component), or None if constrained.
    #[inline]
    pub fn free_of(&self, node: usize, comp: usize) -> Option<usize> {
        let idx = self.free_index[node * self.dofs_per_node + comp];
        (idx != NO_DOF).then_some(idx)
    }

    pub fn n_constrained(&self) -> usize {
        self.n_nodes * self.dofs_per_node - self.n_free
    }

    /// Scatter a free-DOF vector into a full per-node-DOF vector
    /// (constrained entries zero).
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        assert_eq!(free.len(), self.n_free, "free vector length mismatch");
        let mut full = vec![0.0; self.constrained.len()];
        for (g, &fi) in self.free_index.iter().enumerate() {
            if fi != NO_DOF {
                full[g] = free[fi];
            }
        }
        full
    }

    /// Gather the free entries of a full vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        assert_eq!(full.len(), self.constrained.len(), "full vector length mismatch");
        let mut free = vec![0.0; self.n_free];
        for (g, &fi) in self.free_index.iter().enumerate() {
            if fi != NO_DOF {
                free[fi] = full[g];
            }
        }
        free
    }
}

/// Evenly spaced grid with *exact* endpoints: index 0 maps to `a`,
/// index n to `b` with no rounding detour through `a + n·h`.
pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 1);
    (0..=n)
        .map(|i| {
            if i == 0 {
                a
            } else if i == n {
                b
            } else {
                a + (b - a) * (i as f64 / n as f64)
            }
        })
        .collect()
}

/// One tensor-product block of the mesh under construction.
struct Block {
    xs: Vec<f64>,
    ys: Vec<f64>,
    region: RegionTag,
}

/// Merge tensor blocks into a conforming mesh. Nodes are deduplicated by
/// exact coordinate identity, then renumbered lexicographically by (x, y).
fn merge_blocks(blocks: &[Block]) -> QuadMesh {
    let mut key_to_node: HashMap<(u64, u64), usize> = HashMap::new();
    let mut nodes: Vec<[f64; 2]> = Vec::new();
    let mut elems: Vec<[usize; 4]> = Vec::new();
    let mut elem_size: Vec<[f64; 2]> = Vec::new();
    let mut region_tags: Vec<RegionTag> = Vec::new();

    for block in blocks {
        let nx = block.xs.len();
        let ny = block.ys.len();
        // Node index within this block, deduplicated globally.
        let mut local = vec![0usize; nx * ny];
        for (i, &x) in block.xs.iter().enumerate() {
            for (j, &y) in block.ys.iter().enumerate() {
                let key = (x.to_bits(), y.to_bits());
                let id = *key_to_node.entry(key).or_insert_with(|| {
                    nodes.push([x, y]);
                    nodes.len() - 1
                });
                local[i * ny + j] = id;
            }
        }
        for i in 0..nx - 1 {
            for j in 0..ny - 1 {
                let ll = local[i * ny + j];
                let lr = local[(i + 1) * ny + j];
                let ur = local[(i + 1) * ny + j + 1];
                let ul = local[i * ny + j + 1];
                elems.push([ll, lr, ur, ul]);
                elem_size.push([block.xs[i + 1] - block.xs[i], block.ys[j + 1] - block.ys[j]]);
                region_tags.push(block.region);
            }
        }
    }

    // Canonical node order: lexicographic (x, y).
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&a, &b| {
        nodes[a][0]
            .total_cmp(&nodes[b][0])
            .then(nodes[a][1].total_cmp(&nodes[b][1]))
    });
    let mut perm = vec![0usize; nodes.len()];
    for (new, &old) in order.iter().enumerate() {
        perm[old] = new;
    }
    let nodes: Vec<[f64; 2]> = order.iter().map(|&old| nodes[old]).collect();
    for e in &mut elems {
        for v in e.iter_mut() {
            *v = perm[*v];
        }
    }

    let boundary_tags = detect_boundary(&nodes, &elems)
        .into_iter()
        .map(|b| if b { BoundaryTag::FreeBoundary } else { BoundaryTag::Interior })
        .collect();

    QuadMesh {
        nodes,
        elems,
        elem_size,
        boundary_tags,
        region_tags,
    }
}

/// Boundary nodes by edge counting: an element edge shared by exactly one
/// element lies on the boundary, and so do its endpoints.
fn detect_boundary(nodes: &[[f64; 2]], elems: &[[usize; 4]]) -> Vec<bool> {
    let mut edge_count: HashMap<(usize, usize), u32> = HashMap::new();
    for &[ll, lr, ur, ul] in elems {
        for (a, b) in [(ll, lr), (lr, ur), (ur, ul), (ul, ll)] {
            let key = (a.min(b), a.max(b));
            *edge_count.entry(key).or_insert(0) += 1;
        }
    }
    let mut boundary = vec![false; nodes.len()];
    for (&(a, b), &count) in &edge_count {
        debug_assert!(count <= 2, "edge shared by more than two elements");
        if count == 1 {
            boundary[a] = true;
            boundary[b] = true;
        }
    }
    boundary
}

/// Mesh a constant-profile dumbbell at target element size `h_target`,
/// with the default aspect-ratio cap.
///
/// The channel is `ny` uniform rows with `ny = max(2, round(ε·g₀ / h_target))`;
/// a channel thinner than `h_target` is refused ([`Error::EmptyChannelResolution`])
/// because fewer than two rows of the requested size fit — callers doing
/// ε-sweeps clamp `h_target` to the channel height instead (see
/// [`crate::spectra`]). Only constant profiles are accepted: a curved
/// channel top cannot be meshed conformingly with axis-aligned rectangles,
/// and general profiles are served by the pulled-back channel solver.
pub fn build_dumbbell_mesh(spec: &DumbbellSpec, h_target: f64) -> Result<QuadMesh> {
    build_dumbbell_mesh_with_cap(spec, h_target, DEFAULT_ASPECT_CAP)
}

/// [`build_dumbbell_mesh`] with an explicit aspect-ratio cap.
pub fn build_dumbbell_mesh_with_cap(
    spec: &DumbbellSpec,
    h_target: f64,
    aspect_cap: f64,
) -> Result<QuadMesh> {
    spec.validate()?;
    if !(h_target > 0.0 && h_target.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "h_target = {h_target} must be finite and > 0"
        )));
    }
    if !(aspect_cap >= 1.0) {
        return Err(Error::InvalidParams(format!(
            "aspect_cap = {aspect_cap} must be >= 1"
        )));
    }
    let g0 = spec.profile.as_constant().ok_or_else(|| {
        Error::UnsupportedProfile(
            "full-dumbbell meshes require a constant profile; use the channel \
             reference solver for general g"
                .into(),
        )
    })?;
    let e_h = spec.epsilon * g0;
    if e_h < h_target * (1.0 - 1e-12) {
        return Err(Error::EmptyChannelResolution {
            channel_height: e_h,
            h_target,
        });
    }

    let cells = |len: f64| -> usize { ((len / h_target).round() as usize).max(1) };

    let ny_c = cells(e_h).max(2);
    let mut nx_c = cells(1.0).max(2);
    // Respect the aspect cap by refining x if the channel rows are thin.
    let hy_c = e_h / ny_c as f64;
    if 1.0 / nx_c as f64 > aspect_cap * hy_c {
        nx_c = (1.0 / (aspect_cap * hy_c)).ceil() as usize;
    }

    // Shared coordinate arrays: the channel levels are used verbatim in
    // the plate y-grids, so attachment nodes dedup exactly.
    let ys_channel = linspace(0.0, e_h, ny_c);
    let xs_channel = linspace(0.0, 1.0, nx_c);

    let mut ys_box = linspace(-1.0, 0.0, cells(1.0));
    ys_box.pop(); // 0.0 re-enters with the channel levels
    ys_box.extend_from_slice(&ys_channel);
    let mut upper = linspace(e_h, 1.0, cells(1.0 - e_h));
    upper.remove(0); // e_h already present
    ys_box.extend_from_slice(&upper);

    let xs_left = linspace(-spec.left_len, 0.0, cells(spec.left_len));
    let xs_right = linspace(1.0, 1.0 + spec.right_len, cells(spec.right_len));

    let mesh = merge_blocks(&[
        Block {
            xs: xs_left,
            ys: ys_box.clone(),
            region: RegionTag::OmegaLeft,
        },
        Block {
            xs: xs_channel,
            ys: ys_channel,
            region: RegionTag::Channel,
        },
        Block {
            xs: xs_right,
            ys: ys_box,
            region: RegionTag::OmegaRight,
        },
    ]);
    mesh.validate()?;

    // Area exactness guard: the blocks tile the analytic domain.
    let analytic = spec.area();
    if ((mesh.area() - analytic) / analytic).abs() > 1e-12 {
        return Err(Error::IncompatibleMesh(format!(
            "mesh area {} differs from analytic area {analytic}",
            mesh.area()
        )));
    }
    Ok(mesh)
}

/// Tensor mesh of the unit square (0,1)², the fixed reference domain of
/// the pulled-back channel problem. Nodes on x = 0 and x = 1 (the images
/// of the clamped channel ends) are tagged [`BoundaryTag::ClampedSegment`];
/// the rest of the boundary is free. The profile enters assembly, not the
/// mesh — it is validated here (positivity) and otherwise unused.
pub fn build_channel_reference_mesh(nx: usize, ny: usize, profile: &ProfileSpec) -> Result<QuadMesh> {
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidParams(format!(
            "channel reference mesh needs nx, ny >= 2 (got {nx}, {ny})"
        )));
    }
    profile.validate_shape()?;
    let (x_min, g_min) = profile.min_g_sampled();
    if g_min <= 0.0 {
        return Err(Error::NonPositiveProfile { x: x_min, g: g_min });
    }

    let mut mesh = merge_blocks(&[Block {
        xs: linspace(0.0, 1.0, nx),
        ys: linspace(0.0, 1.0, ny),
        region: RegionTag::Channel,
    }]);
    for (n, tag) in mesh.boundary_tags.iter_mut().enumerate() {
        if *tag != BoundaryTag::Interior {
            let x = mesh.nodes[n][0];
            *tag = if x == 0.0 || x == 1.0 {
                BoundaryTag::ClampedSegment
            } else {
                BoundaryTag::FreeBoundary
            };
        }
    }
    mesh.validate()?;
    Ok(mesh)
}

/// Uniform interval mesh on [0,1] with both endpoint nodes clamped
/// (the H²₀ boundary conditions h = h′ = 0 of the limit problem).
pub fn build_interval_mesh(n: usize) -> Result<IntervalMesh> {
    if n < 2 {
        return Err(Error::InvalidParams(format!(
            "interval mesh needs n >= 2 elements (got {n})"
        )));
    }
    let nodes = linspace(0.0, 1.0, n);
    let last = nodes.len() - 1;
    Ok(IntervalMesh {
        nodes,
        clamped: [0, last],
    })
}

/// Extract the submesh of all elements tagged `region`, renumbering nodes
/// lexicographically. Returns the submesh and the node correspondence
/// `sub_to_parent[sub_node] = parent_node`.
///
/// The submesh's boundary is re-detected from its own connectivity and
/// tagged free everywhere; callers impose whatever constraints the
/// standalone problem needs.
pub fn extract_region(mesh: &QuadMesh, region: RegionTag) -> Result<(QuadMesh, Vec<usize>)> {
    let picked: Vec<usize> = (0..mesh.n_elems())
        .filter(|&e| mesh.region_tags[e] == region)
        .collect();
    if picked.is_empty() {
        return Err(Error::MissingTags);
    }

    let mut parent_nodes: Vec<usize> = picked
        .iter()
        .flat_map(|&e| mesh.elems[e].iter().copied())
        .collect();
    parent_nodes.sort_unstable();
    parent_nodes.dedup();
    // Parent order is already lexicographic by (x,y), and a sorted subset
    // of a lexicographically ordered set stays lexicographic.
    let mut parent_to_sub: HashMap<usize, usize> = HashMap::new();
    for (sub, &parent) in parent_nodes.iter().enumerate() {
        parent_to_sub.insert(parent, sub);
    }

    let nodes: Vec<[f64; 2]> = parent_nodes.iter().map(|&p| mesh.nodes[p]).collect();
    let elems: Vec<[usize; 4]> = picked
        .iter()
        .map(|&e| {
            let mut quad = mesh.elems[e];
            for v in quad.iter_mut() {
                *v = parent_to_sub[v];
            }
            quad
        })
        .collect();
    let elem_size: Vec<[f64; 2]> = picked.iter().map(|&e| mesh.elem_size[e]).collect();
    let region_tags = vec![region; elems.len()];
    let boundary_tags = detect_boundary(&nodes, &elems)
        .into_iter()
        .map(|b| if b { BoundaryTag::FreeBoundary } else { BoundaryTag::Interior })
        .collect();

    let sub = QuadMesh {
        nodes,
        elems,
        elem_size,
        boundary_tags,
        region_tags,
    };
    sub.validate()?;
    Ok((sub, parent_nodes))
}
