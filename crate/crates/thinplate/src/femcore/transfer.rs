//! Transfer operators between 2D strip fields and 1D profile fields.
//!
//! `average_m` takes the cross-section average of a 2D field along each
//! vertical grid line; `extend_e` extends 1D station data to a
//! y-independent 2D field. Both are exact on the discrete spaces: the
//! per-interval Hermite column integral is
//!
//! ```text
//! ∫ u dy = h/2·(u_bot + u_top) + h²/12·(u′_bot − u′_top)
//! ```
//!
//! (the four cubic Hermite basis integrals are h/2, h²/12, h/2, −h²/12),
//! and a field whose u_y and u_xy DOFs vanish is exactly y-independent
//! because the two value shape functions sum to one. Consequently
//! `average_m ∘ extend_e` is the identity on station data.

use crate::error::Error;
use crate::meshgen::{DofMap, QuadMesh};
use crate::Result;

/// A field as a full (unconstrained) DOF vector over a mesh, node-major:
/// entry `dofs_per_node·node + comp`.
#[derive(Debug, Clone)]
pub struct DiscreteField {
    pub dofs_per_node: usize,
    pub data: Vec<f64>,
}

impl DiscreteField {
    /// Expand a free-DOF vector (as produced by the eigensolver) to the
    /// full DOF vector, zeros at constrained slots.
    pub fn from_free(dofs: &DofMap, free: &[f64]) -> Result<Self> {
        if free.len() != dofs.n_free {
            return Err(Error::DimensionMismatch {
                left: free.len(),
                right: dofs.n_free,
            });
        }
        Ok(Self {
            dofs_per_node: dofs.dofs_per_node,
            data: dofs.expand(free),
        })
    }

    #[inline]
    pub fn comp(&self, node: usize, comp: usize) -> f64 {
        self.data[self.dofs_per_node * node + comp]
    }

    pub fn n_nodes(&self) -> usize {
        self.data.len() / self.dofs_per_node
    }
}

/// Check the mesh is a tensor grid and return its station arrays. Node
/// index (ix, iy) ↔ ix·n_ys + iy holds because mesh constructors keep
/// nodes in lexicographic (x, y) order.
fn tensor_stations(mesh: &QuadMesh) -> Result<(Vec<f64>, Vec<f64>)> {
    if !mesh.is_tensor() {
        return Err(Error::IncompatibleMesh(
            "transfer operators require a tensor-product grid".into(),
        ));
    }
    Ok((mesh.x_stations(), mesh.y_stations()))
}

/// Cross-section average of a 2D field: for each x-station, the exact
/// integral of the field over the vertical line divided by its span.
/// Returns per-station `[average of u, average of u_x]` — 1D Hermite
/// station data for the averaged profile.
pub fn average_m(mesh: &QuadMesh, field: &DiscreteField) -> Result<Vec<[f64; 2]>> {
    if field.dofs_per_node != 4 || field.n_nodes() != mesh.n_nodes() {
        return Err(Error::DimensionMismatch {
            left: field.data.len(),
            right: mesh.n_nodes() * 4,
        });
    }
    let (xs, ys) = tensor_stations(mesh)?;
    let span = ys[ys.len() - 1] - ys[0];
    if span <= 0.0 {
        return Err(Error::IncompatibleMesh("degenerate vertical span".into()));
    }
    let n_ys = ys.len();
    let mut out = Vec::with_capacity(xs.len());
    for ix in 0..xs.len() {
        let node = |iy: usize| ix * n_ys + iy;
        // comp pairs (value, y-derivative): u uses (0, 2), u_x uses (1, 3).
        let mut acc = [0.0f64; 2];
        for iy in 0..n_ys - 1 {
            let h = ys[iy + 1] - ys[iy];
            let (b, t) = (node(iy), node(iy + 1));
            for (k, &(vc, dc)) in [(0usize, 2usize), (1, 3)].iter().enumerate() {
                acc[k] += 0.5 * h * (field.comp(b, vc) + field.comp(t, vc))
                    + h * h / 12.0 * (field.comp(b, dc) - field.comp(t, dc));
            }
        }
        out.push([acc[0] / span, acc[1] / span]);
    }
    Ok(out)
}

/// Extend 1D station data `(v, v′)` per x-station to the y-independent
/// 2D field with u = v, u_x = v′, u_y = u_xy = 0.
pub fn extend_e(mesh: &QuadMesh, stations: &[[f64; 2]]) -> Result<DiscreteField> {
    let (xs, ys) = tensor_stations(mesh)?;
    if stations.len() != xs.len() {
        return Err(Error::StationMismatch {
            expected: xs.len(),
            got: stations.len(),
        });
    }
    let n_ys = ys.len();
    let mut data = vec![0.0; mesh.n_nodes() * 4];
    for (ix, s) in stations.iter().enumerate() {
        for iy in 0..n_ys {
            let node = ix * n_ys + iy;
            data[4 * node] = s[0];
            data[4 * node + 1] = s[1];
        }
    }
    Ok(DiscreteField {
        dofs_per_node: 4,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::femcore::{assemble, assemble_interval, FormKind};
    use crate::geometry::{ProfileKind, ProfileSpec};
    use crate::meshgen::{build_channel_reference_mesh, build_interval_mesh, DofMap};

    fn strip(nx: usize, ny: usize) -> QuadMesh {
        build_channel_reference_mesh(nx, ny, &ProfileSpec::constant(1.0)).unwrap()
    }

    /// average ∘ extend = identity on station data.
    #[test]
    fn average_of_extension_is_identity() {
        let mesh = strip(6, 4);
        let stations: Vec<[f64; 2]> = mesh
            .x_stations()
            .iter()
            .map(|&x| [x * x + 0.3, 2.0 * x])
            .collect();
        let field = extend_e(&mesh, &stations).unwrap();
        let back = average_m(&mesh, &field).unwrap();
        for (a, b) in stations.iter().zip(&back) {
            assert!((a[0] - b[0]).abs() < 1e-14);
            assert!((a[1] - b[1]).abs() < 1e-14);
        }
    }

    /// The column integral is exact for a field cubic in y:
    /// u(x,y) = y³ has average ∫₀¹ y³ dy = 1/4 at every station.
    #[test]
    fn average_is_exact_for_cubics() {
        let mesh = strip(3, 5);
        let ys = mesh.y_stations();
        let n_ys = ys.len();
        let mut data = vec![0.0; mesh.n_nodes() * 4];
        for ix in 0..mesh.x_stations().len() {
            for (iy, &y) in ys.iter().enumerate() {
                let node = ix * n_ys + iy;
                data[4 * node] = y * y * y;
                data[4 * node + 2] = 3.0 * y * y;
            }
        }
        let field = DiscreteField {
            dofs_per_node: 4,
            data,
        };
        for s in average_m(&mesh, &field).unwrap() {
            assert!((s[0] - 0.25).abs() < 1e-15);
            assert!(s[1].abs() < 1e-15);
        }
    }

    /// Extending a 1D field preserves its weighted norm: the 2D weighted
    /// mass of the extension equals the 1D weighted mass of the original
    /// (the η integral contributes a factor 1 on the unit strip).
    #[test]
    fn extension_preserves_weighted_norm() {
        let profile = ProfileSpec::new(
            ProfileKind::Polynomial {
                coeffs: vec![1.0, -1.0, 1.0],
            },
            0.25,
        )
        .unwrap();
        let n = 7;
        let mesh1d = build_interval_mesh(n).unwrap();
        let dofs1d = DofMap::for_interval(&mesh1d);
        let m1 = assemble_interval(&mesh1d, &dofs1d, &FormKind::WeightedMass(profile.clone()))
            .unwrap();

        // 1D field v(x) = sin-ish polynomial sampled as Hermite data.
        let v: Vec<f64> = mesh1d
            .nodes
            .iter()
            .flat_map(|&x| [x * (1.0 - x), 1.0 - 2.0 * x])
            .collect();
        let norm1 = m1.quadratic(&v, &v);

        let mesh2d = build_channel_reference_mesh(n, 3, &profile).unwrap();
        let dofs2d = DofMap::for_mesh(&mesh2d);
        let m2 = assemble(&mesh2d, &dofs2d, &FormKind::WeightedMass(profile)).unwrap();
        let stations: Vec<[f64; 2]> = mesh1d
            .nodes
            .iter()
            .map(|&x| [x * (1.0 - x), 1.0 - 2.0 * x])
            .collect();
        let ext = extend_e(&mesh2d, &stations).unwrap();
        let norm2 = m2.quadratic(&ext.data, &ext.data);
        assert!(
            (norm1 - norm2).abs() < 1e-13 * norm1.max(1.0),
            "{norm1} vs {norm2}"
        );
    }

    #[test]
    fn station_count_mismatch_is_an_error() {
        let mesh = strip(4, 3);
        let stations = vec![[0.0, 0.0]; 3];
        assert!(matches!(
            extend_e(&mesh, &stations),
            Err(Error::StationMismatch { expected: 5, got: 3 })
        ));
    }

    #[test]
    fn from_free_round_trip() {
        let mesh = strip(2, 2);
        let mut dofs = DofMap::for_mesh(&mesh);
        dofs.constrain_node(0);
        dofs.rebuild();
        let free = vec![1.5; dofs.n_free];
        let field = DiscreteField::from_free(&dofs, &free).unwrap();
        assert_eq!(field.comp(0, 0), 0.0);
        assert_eq!(field.data.len(), mesh.n_nodes() * 4);
    }
}
