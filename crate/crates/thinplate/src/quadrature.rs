//! Gauss–Legendre quadrature rules on the unit interval [0,1].
//!
//! An n-point rule integrates polynomials of degree ≤ 2n−1 exactly. The
//! element kernels use the 4-point rule for constant-coefficient bicubic
//! forms (integrands of degree ≤ 6 per direction, so the rule is exact)
//! and the 6-point rule whenever a profile weight `g(x)` enters the
//! integrand.

/// One quadrature node: (position in [0,1], weight).
pub type QPoint = (f64, f64);

/// 2-point rule, exact through degree 3.
pub const GAUSS2: [QPoint; 2] = [
    (0.211324865405187118, 0.5),
    (0.788675134594812882, 0.5),
];

/// 4-point rule, exact through degree 7.
pub const GAUSS4: [QPoint; 4] = [
    (0.069431844202973712, 0.173927422568726929),
    (0.330009478207571868, 0.326072577431273071),
    (0.669990521792428132, 0.326072577431273071),
    (0.930568155797026288, 0.173927422568726929),
];

/// 6-point rule, exact through degree 11.
pub const GAUSS6: [QPoint; 6] = [
    (0.033765242898423986, 0.085662246189585173),
    (0.169395306766867743, 0.180380786524069304),
    (0.380690406958401546, 0.233956967286345524),
    (0.619309593041598454, 0.233956967286345524),
    (0.830604693233132257, 0.180380786524069304),
    (0.966234757101576014, 0.085662246189585173),
];
