//! Reference-element shape functions for the quadratic velocity / linear
//! pressure pair, and the affine geometry that maps their gradients to a
//! physical triangle.
//!
//! Local node order on a triangle (v0, v1, v2): corners 0..2, then midpoints
//! 3 = mid(v0,v1), 4 = mid(v1,v2), 5 = mid(v2,v0).

/// Quadratic basis values at a barycentric point.
pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    let [l0, l1, l2] = l;
    [
        l0 * (2.0 * l0 - 1.0),
        l1 * (2.0 * l1 - 1.0),
        l2 * (2.0 * l2 - 1.0),
        4.0 * l0 * l1,
        4.0 * l1 * l2,
        4.0 * l2 * l0,
    ]
}

/// Linear basis values (the barycentric coordinates themselves).
pub fn p1_values(l: [f64; 3]) -> [f64; 3] {
    l
}

/// Gradients of the barycentric coordinates on the reference triangle
/// (xi, eta) with vertices (0,0), (1,0), (0,1).
const DL: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

/// Quadratic basis gradients in reference coordinates at a barycentric point.
pub fn p2_grads_ref(l: [f64; 3]) -> [[f64; 2]; 6] {
    let [l0, l1, l2] = l;
    let corner = |li: f64, dli: [f64; 2]| [(4.0 * li - 1.0) * dli[0], (4.0 * li - 1.0) * dli[1]];
    let edge = |la: f64, dla: [f64; 2], lb: f64, dlb: [f64; 2]| {
        [4.0 * (la * dlb[0] + lb * dla[0]), 4.0 * (la * dlb[1] + lb * dla[1])]
    };
    [
        corner(l0, DL[0]),
        corner(l1, DL[1]),
        corner(l2, DL[2]),
        edge(l0, DL[0], l1, DL[1]),
        edge(l1, DL[1], l2, DL[2]),
        edge(l2, DL[2], l0, DL[0]),
    ]
}

/// Linear basis gradients in reference coordinates (constant).
pub fn p1_grads_ref() -> [[f64; 2]; 3] {
    DL
}

/// Affine map data for one triangle: area and the inverse-transpose Jacobian
/// that pushes reference gradients to physical ones.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub area: f64,
    inv_jt: [[f64; 2]; 2],
}

impl ElementGeometry {
    pub fn new(p0: [f64; 2], p1: [f64; 2], p2: [f64; 2]) -> Self {
        let a = p1[0] - p0[0];
        let b = p2[0] - p0[0];
        let c = p1[1] - p0[1];
        let d = p2[1] - p0[1];
        let det = a * d - b * c;
        debug_assert!(det > 0.0, "triangles must be counterclockwise");
        let inv_jt = [[d / det, -c / det], [-b / det, a / det]];
        Self {
            area: 0.5 * det,
            inv_jt,
        }
    }

    /// Physical gradient from a reference gradient.
    pub fn push_grad(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv_jt[0][0] * g[0] + self.inv_jt[0][1] * g[1],
            self.inv_jt[1][0] * g[0] + self.inv_jt[1][1] * g[1],
        ]
    }
}
