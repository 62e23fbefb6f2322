//! Element-level kernels: cubic Hermite shape functions and the 16×16 /
//! 4×4 element matrices for every [`FormKind`].

use super::sparse::neumaier_add;
use super::FormKind;
use crate::error::Error;
use crate::geometry::ProfileSpec;
use crate::quadrature::{QPoint, GAUSS4, GAUSS6};
use crate::Result;

/// 16×16 BFS element matrix. Local DOF index = 4·corner + component with
/// corners counterclockwise from lower-left and components (u, u_x, u_y,
/// u_xy).
pub type ElemMat16 = [[f64; 16]; 16];

/// 4×4 cubic Hermite element matrix, DOFs (u₀, u₀′, u₁, u₁′).
pub type ElemMat4 = [[f64; 4]; 4];

/// Values, first and second derivatives of the four cubic Hermite shape
/// functions on [0, h], evaluated at the parametric point t ∈ [0,1]
/// (physical x = t·h). Row order: value@0, slope@0, value@1, slope@1;
/// column order: (N, N′, N″) with physical derivatives.
#[inline]
pub fn hermite_shape(h: f64, t: f64) -> [[f64; 3]; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        [
            1.0 - 3.0 * t2 + 2.0 * t3,
            (-6.0 * t + 6.0 * t2) / h,
            (-6.0 + 12.0 * t) / (h * h),
        ],
        [
            h * (t - 2.0 * t2 + t3),
            1.0 - 4.0 * t + 3.0 * t2,
            (-4.0 + 6.0 * t) / h,
        ],
        [
            3.0 * t2 - 2.0 * t3,
            (6.0 * t - 6.0 * t2) / h,
            (6.0 - 12.0 * t) / (h * h),
        ],
        [h * (-t2 + t3), -2.0 * t + 3.0 * t2, (-2.0 + 6.0 * t) / h],
    ]
}

/// Per-element quadrature coefficient data: the physical x-positions of
/// the x-direction quadrature nodes, the profile values g, g′, g″ there,
/// and the element's y-origin (the pulled-back Hessian transform depends
/// on the global η coordinate, not just the local one).
#[derive(Debug, Clone)]
pub struct CoeffSamples {
    pub x: Vec<f64>,
    pub g: Vec<f64>,
    pub dg: Vec<f64>,
    pub ddg: Vec<f64>,
    pub y0: f64,
}

impl CoeffSamples {
    /// Sample a profile at the x-quadrature nodes of an element with
    /// origin (x0, y0) and width hx.
    pub fn sample(profile: &ProfileSpec, x0: f64, y0: f64, hx: f64, rule: &[QPoint]) -> Self {
        let mut s = Self {
            x: Vec::with_capacity(rule.len()),
            g: Vec::with_capacity(rule.len()),
            dg: Vec::with_capacity(rule.len()),
            ddg: Vec::with_capacity(rule.len()),
            y0,
        };
        for &(t, _) in rule {
            let x = x0 + hx * t;
            s.x.push(x);
            s.g.push(profile.g(x));
            s.dg.push(profile.dg(x));
            s.ddg.push(profile.ddg(x));
        }
        s
    }

    /// Placeholder for profile-independent forms (g ≡ 1 everywhere).
    pub fn unit(rule: &[QPoint], x0: f64, y0: f64, hx: f64) -> Self {
        let n = rule.len();
        Self {
            x: rule.iter().map(|&(t, _)| x0 + hx * t).collect(),
            g: vec![1.0; n],
            dg: vec![0.0; n],
            ddg: vec![0.0; n],
            y0,
        }
    }
}

/// Which quadrature rule a form kind uses (per direction).
pub(crate) fn rule_for(kind: &FormKind) -> &'static [QPoint] {
    match kind {
        FormKind::PlateForm(_) | FormKind::Mass => &GAUSS4,
        FormKind::ChannelEpsForm(..) | FormKind::WeightedMass(_) | FormKind::Limit1DForm(..) => {
            &GAUSS6
        }
    }
}

/// Shape data of one local DOF at one quadrature point.
#[derive(Clone, Copy)]
struct Shape {
    n: f64,
    nx: f64,
    ny: f64,
    nxx: f64,
    nxy: f64,
    nyy: f64,
}

/// The 16 BFS shape functions at a quadrature point, from per-direction
/// Hermite data. Corner order (0,0), (1,0), (1,1), (0,1); per corner
/// (u, u_x, u_y, u_xy).
#[inline]
fn bfs_shapes(px: &[[f64; 3]; 4], py: &[[f64; 3]; 4]) -> [Shape; 16] {
    const CORNERS: [(usize, usize); 4] = [(0, 0), (1, 0), (1, 1), (0, 1)];
    let mut out = [Shape {
        n: 0.0,
        nx: 0.0,
        ny: 0.0,
        nxx: 0.0,
        nxy: 0.0,
        nyy: 0.0,
    }; 16];
    for (c, &(cx, cy)) in CORNERS.iter().enumerate() {
        for comp in 0..4 {
            // Component picks value/slope factors: u → (val,val),
            // u_x → (slope,val), u_y → (val,slope), u_xy → (slope,slope).
            let xi = 2 * cx + (comp & 1);
            let yi = 2 * cy + ((comp >> 1) & 1);
            let fx = px[xi];
            let fy = py[yi];
            out[4 * c + comp] = Shape {
                n: fx[0] * fy[0],
                nx: fx[1] * fy[0],
                ny: fx[0] * fy[1],
                nxx: fx[2] * fy[0],
                nxy: fx[1] * fy[1],
                nyy: fx[0] * fy[2],
            };
        }
    }
    out
}

/// a·b as an exact head/tail pair (FMA splits the rounding error off).
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Add coef·a·b into the (hi, lo) accumulator with the product kept
/// exact: the Hermite shape derivatives cancel in exact pairs across an
/// element's corners, and only exact products preserve that cancellation
/// entrywise (it is what makes the assembled stiffness annihilate the
/// discrete constant to near-machine level).
#[inline]
fn dd_cprod(hi: &mut f64, lo: &mut f64, coef: f64, a: f64, b: f64) {
    let (p, e) = two_prod(a, b);
    let (cp, ce) = two_prod(coef, p);
    neumaier_add(hi, lo, cp);
    *lo += ce + coef * e;
}

/// Accumulate w·(form pairing) over all 16×16 DOF pairs, exploiting
/// symmetry: the strict lower triangle is mirrored at the end of the
/// element computation. Quadrature sums are Neumaier-compensated so the
/// assembled operator annihilates discrete constants to product-level
/// roundoff rather than accumulation-level.
#[inline]
fn accumulate_pairs(
    ke: &mut ElemMat16,
    kc: &mut ElemMat16,
    shapes: &[Shape; 16],
    w: f64,
    pair: impl Fn(&Shape, &Shape) -> f64,
) {
    for i in 0..16 {
        for j in i..16 {
            neumaier_add(&mut ke[i][j], &mut kc[i][j], w * pair(&shapes[i], &shapes[j]));
        }
    }
}

/// BFS element matrix on a hx×hy rectangle for the given form.
///
/// `coeff` carries the profile samples at this element's x-quadrature
/// nodes (ignored by profile-independent forms) and the element's
/// y-origin. Constant-coefficient plate/mass entries are exact (the 4×4
/// Gauss rule exceeds the integrand degree).
pub fn bfs_element_matrices(
    hx: f64,
    hy: f64,
    kind: &FormKind,
    coeff: &CoeffSamples,
) -> Result<ElemMat16> {
    let (mut ke, kc) = bfs_element_matrices_dd(hx, hy, kind, coeff)?;
    for i in 0..16 {
        for j in 0..16 {
            ke[i][j] += kc[i][j];
        }
    }
    Ok(ke)
}

/// Head/tail form of [`bfs_element_matrices`]: the element matrix as a
/// working part plus compensation tail, both mirrored to full symmetry,
/// so assembly can keep extended precision through the global scatter.
pub(crate) fn bfs_element_matrices_dd(
    hx: f64,
    hy: f64,
    kind: &FormKind,
    coeff: &CoeffSamples,
) -> Result<(ElemMat16, ElemMat16)> {
    debug_assert!(hx > 0.0 && hy > 0.0);
    let rule = rule_for(kind);
    debug_assert_eq!(coeff.x.len(), rule.len());

    let mut ke: ElemMat16 = [[0.0; 16]; 16];
    let mut kc: ElemMat16 = [[0.0; 16]; 16];
    // Per-direction Hermite data, precomputed per quadrature line.
    let px: Vec<[[f64; 3]; 4]> = rule.iter().map(|&(t, _)| hermite_shape(hx, t)).collect();
    let py: Vec<[[f64; 3]; 4]> = rule.iter().map(|&(t, _)| hermite_shape(hy, t)).collect();

    for (q, &(_, wq)) in rule.iter().enumerate() {
        for (r, &(tr, wr)) in rule.iter().enumerate() {
            let shapes = bfs_shapes(&px[q], &py[r]);
            let w = wq * wr * hx * hy;
            match kind {
                FormKind::Mass => {
                    accumulate_pairs(&mut ke, &mut kc, &shapes, w, |a, b| a.n * b.n);
                }
                FormKind::WeightedMass(_) => {
                    let g = coeff.g[q];
                    if g <= 0.0 {
                        return Err(Error::SingularElement { x: coeff.x[q], g });
                    }
                    accumulate_pairs(&mut ke, &mut kc, &shapes, w * g, |a, b| a.n * b.n);
                }
                FormKind::PlateForm(p) => {
                    let (sigma, tau) = (p.sigma, p.tau);
                    // Expanded pairing — identical to
                    //   (1−σ)(xx·xx′ + 2xy·xy′ + yy·yy′) + σ(xx+yy)(xx′+yy′)
                    // but with the unit coefficients on xx·xx′ and yy·yy′
                    // made explicit so every term is a single exact product.
                    let cxy = 2.0 * (1.0 - sigma);
                    for i in 0..16 {
                        for j in i..16 {
                            let (a, b) = (&shapes[i], &shapes[j]);
                            let mut th = 0.0f64;
                            let mut tl = 0.0f64;
                            dd_cprod(&mut th, &mut tl, 1.0, a.nxx, b.nxx);
                            dd_cprod(&mut th, &mut tl, 1.0, a.nyy, b.nyy);
                            dd_cprod(&mut th, &mut tl, sigma, a.nxx, b.nyy);
                            dd_cprod(&mut th, &mut tl, sigma, a.nyy, b.nxx);
                            dd_cprod(&mut th, &mut tl, cxy, a.nxy, b.nxy);
                            if tau != 0.0 {
                                dd_cprod(&mut th, &mut tl, tau, a.nx, b.nx);
                                dd_cprod(&mut th, &mut tl, tau, a.ny, b.ny);
                            }
                            dd_cprod(&mut th, &mut tl, 1.0, a.n, b.n);
                            let (wh, we) = two_prod(w, th);
                            neumaier_add(&mut ke[i][j], &mut kc[i][j], wh);
                            kc[i][j] += we + w * tl;
                        }
                    }
                }
                FormKind::ChannelEpsForm(p, eps, _) => {
                    let g = coeff.g[q];
                    if g <= 0.0 {
                        return Err(Error::SingularElement { x: coeff.x[q], g });
                    }
                    let (sigma, tau) = (p.sigma, p.tau);
                    let e2 = 1.0 / (eps * eps);
                    let e4 = e2 * e2;
                    let dg = coeff.dg[q];
                    let ddg = coeff.ddg[q];
                    let eta = coeff.y0 + hy * tr;
                    let rr = eta * dg / g;
                    let ss = eta * (2.0 * dg * dg - g * ddg) / (g * g);
                    let dl = dg / g;
                    // Chain-rule transform to the intermediate domain
                    // {0 < y < g(x)} (see module docs), then the ε-weighted
                    // pairing with measure g·dx·dη.
                    let tf = |s: &Shape| -> Shape {
                        Shape {
                            n: s.n,
                            nx: s.nx - rr * s.ny,
                            ny: s.ny / g,
                            nxx: s.nxx - 2.0 * rr * s.nxy + rr * rr * s.nyy + ss * s.ny,
                            nxy: (s.nxy - rr * s.nyy - dl * s.ny) / g,
                            nyy: s.nyy / (g * g),
                        }
                    };
                    let transformed: Vec<Shape> = shapes.iter().map(|s| tf(s)).collect();
                    let tshapes: &[Shape] = &transformed;
                    for i in 0..16 {
                        for j in i..16 {
                            let a = &tshapes[i];
                            let b = &tshapes[j];
                            let v = (1.0 - sigma)
                                * (a.nxx * b.nxx
                                    + 2.0 * e2 * a.nxy * b.nxy
                                    + e4 * a.nyy * b.nyy)
                                + sigma * (a.nxx + e2 * a.nyy) * (b.nxx + e2 * b.nyy)
                                + tau * (a.nx * b.nx + e2 * a.ny * b.ny)
                                + a.n * b.n;
                            neumaier_add(&mut ke[i][j], &mut kc[i][j], w * g * v);
                        }
                    }
                }
                FormKind::Limit1DForm(..) => {
                    return Err(Error::IncompatibleMesh(
                        "the 1D limit form cannot be assembled on a 2D mesh".into(),
                    ));
                }
            }
        }
    }

    for i in 0..16 {
        for j in 0..i {
            ke[i][j] = ke[j][i];
            kc[i][j] = kc[j][i];
        }
    }
    Ok((ke, kc))
}

/// Cubic Hermite element matrix on [x0, x0+h] for the 1D kinds.
///
/// `Limit1DForm` integrates `(1−σ²)N″M″g + τN′M′g + NMg`; `WeightedMass`
/// integrates `NMg`; `Mass` integrates `NM`. Exact for polynomial g up to
/// the 6-point rule's degree.
pub fn hermite1d_element(h: f64, kind: &FormKind, coeff: &CoeffSamples) -> Result<ElemMat4> {
    let (mut ke, kc) = hermite1d_element_dd(h, kind, coeff)?;
    for i in 0..4 {
        for j in 0..4 {
            ke[i][j] += kc[i][j];
        }
    }
    Ok(ke)
}

/// Head/tail form of [`hermite1d_element`].
pub(crate) fn hermite1d_element_dd(
    h: f64,
    kind: &FormKind,
    coeff: &CoeffSamples,
) -> Result<(ElemMat4, ElemMat4)> {
    debug_assert!(h > 0.0);
    let mut ke: ElemMat4 = [[0.0; 4]; 4];
    let mut kc: ElemMat4 = [[0.0; 4]; 4];
    for (q, &(t, wq)) in GAUSS6.iter().enumerate() {
        let p = hermite_shape(h, t);
        let w = wq * h;
        match kind {
            FormKind::Mass => {
                for i in 0..4 {
                    for j in i..4 {
                        neumaier_add(&mut ke[i][j], &mut kc[i][j], w * p[i][0] * p[j][0]);
                    }
                }
            }
            FormKind::WeightedMass(_) => {
                let g = coeff.g[q];
                if g <= 0.0 {
                    return Err(Error::NonPositiveWeight { x: coeff.x[q], g });
                }
                for i in 0..4 {
                    for j in i..4 {
                        neumaier_add(&mut ke[i][j], &mut kc[i][j], w * g * p[i][0] * p[j][0]);
                    }
                }
            }
            FormKind::Limit1DForm(mp, _) => {
                let g = coeff.g[q];
                if g <= 0.0 {
                    return Err(Error::NonPositiveWeight { x: coeff.x[q], g });
                }
                let bend = 1.0 - mp.sigma * mp.sigma;
                for i in 0..4 {
                    for j in i..4 {
                        neumaier_add(
                            &mut ke[i][j],
                            &mut kc[i][j],
                            w * g
                                * (bend * p[i][2] * p[j][2]
                                    + mp.tau * p[i][1] * p[j][1]
                                    + p[i][0] * p[j][0]),
                        );
                    }
                }
            }
            _ => {
                return Err(Error::IncompatibleMesh(
                    "2D form kinds cannot be assembled on an interval mesh".into(),
                ));
            }
        }
    }
    for i in 0..4 {
        for j in 0..i {
            ke[i][j] = ke[j][i];
            kc[i][j] = kc[j][i];
        }
    }
    Ok((ke, kc))
}
