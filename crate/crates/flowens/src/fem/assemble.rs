//! Element assembly of the velocity mass, diffusion, divergence, and
//! convection operators, plus load vectors and pointwise evaluation of
//! discrete fields.
//!
//! All velocity matrices push every element pair, including zero values, so
//! matrices assembled over one space share an identical sparsity pattern and
//! can be combined value-wise.

use crate::field::Field2;
use crate::quadrature::TriQuadRule;
use crate::sparse::{SparseMatrix, Triplet};

use super::shape::{p2_grads_ref, p2_values, ElementGeometry};
use super::TaylorHoodSpace;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("coefficient vector has length {found}, space needs {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no boundary data for tag {tag}")]
    MissingBoundaryTag { tag: u32 },
}

/// Precomputed reference-element data at each quadrature point.
struct QuadPoint {
    bary: [f64; 3],
    weight: f64,
    vals: [f64; 6],
    ref_grads: [[f64; 2]; 6],
}

fn quad_points(rule: &TriQuadRule) -> Vec<QuadPoint> {
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(&bary, &weight)| QuadPoint {
            bary,
            weight,
            vals: p2_values(bary),
            ref_grads: p2_grads_ref(bary),
        })
        .collect()
}

struct Element {
    nodes: [usize; 6],
    verts: [[f64; 2]; 3],
    geo: ElementGeometry,
}

fn element(space: &TaylorHoodSpace, tri: usize) -> Element {
    let mut nodes = [0usize; 6];
    for (local, node) in nodes.iter_mut().enumerate() {
        *node = space.p2_node(tri, local);
    }
    let mesh = space.mesh();
    let [a, b, c] = mesh.triangles[tri];
    let verts = [mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]];
    Element {
        nodes,
        verts,
        geo: ElementGeometry::new(verts[0], verts[1], verts[2]),
    }
}

fn physical_point(verts: &[[f64; 2]; 3], bary: [f64; 3]) -> [f64; 2] {
    [
        bary[0] * verts[0][0] + bary[1] * verts[1][0] + bary[2] * verts[2][0],
        bary[0] * verts[0][1] + bary[1] * verts[1][1] + bary[2] * verts[2][1],
    ]
}

/// Assembles a component-diagonal velocity matrix from a per-element local
/// 6 x 6 kernel; the same scalar block lands on both components.
fn assemble_velocity_matrix<F>(space: &TaylorHoodSpace, mut local: F) -> SparseMatrix
where
    F: FnMut(usize, &Element, &mut [[f64; 6]; 6]),
{
    let n = space.n_velocity();
    let mut triplets = Vec::with_capacity(space.mesh().triangles.len() * 72);
    let mut block = [[0.0; 6]; 6];
    for tri in 0..space.mesh().triangles.len() {
        let el = element(space, tri);
        for row in block.iter_mut() {
            row.fill(0.0);
        }
        local(tri, &el, &mut block);
        for i in 0..6 {
            for j in 0..6 {
                let v = block[i][j];
                for c in 0..2 {
                    triplets.push(Triplet::new(
                        space.velocity_dof(el.nodes[i], c),
                        space.velocity_dof(el.nodes[j], c),
                        v,
                    ));
                }
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &triplets).expect("assembly indices are in range")
}

/// Velocity mass matrix; (M u, u) is the squared L2 norm of the discrete field.
pub fn assemble_mass(space: &TaylorHoodSpace) -> SparseMatrix {
    let qps = quad_points(&TriQuadRule::degree5());
    assemble_velocity_matrix(space, |_tri, el, block| {
        for qp in &qps {
            let w = qp.weight * el.geo.area;
            for i in 0..6 {
                for j in 0..6 {
                    block[i][j] += w * qp.vals[i] * qp.vals[j];
                }
            }
        }
    })
}

/// Velocity diffusion matrix; (K u, u) is the squared H1 seminorm.
pub fn assemble_stiffness(space: &TaylorHoodSpace) -> SparseMatrix {
    let qps = quad_points(&TriQuadRule::degree5());
    assemble_velocity_matrix(space, |_tri, el, block| {
        let mut grads = [[0.0; 2]; 6];
        for qp in &qps {
            for (g, rg) in grads.iter_mut().zip(&qp.ref_grads) {
                *g = el.geo.push_grad(*rg);
            }
            let w = qp.weight * el.geo.area;
            for i in 0..6 {
                for j in 0..6 {
                    block[i][j] += w * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                }
            }
        }
    })
}

/// Skew-symmetrized convection matrix for transport velocity `w`:
/// entry (i, j) carries `0.5 (w . grad phi_j, phi_i) - 0.5 (w . grad phi_i, phi_j)`
/// on each component, so (N(w) v, v) vanishes for every v.
pub fn assemble_convection(
    space: &TaylorHoodSpace,
    w: &[f64],
) -> Result<SparseMatrix, FemError> {
    check_velocity_len(space, w)?;
    let qps = quad_points(&TriQuadRule::degree5());
    Ok(assemble_velocity_matrix(space, |_tri, el, block| {
        let mut grads = [[0.0; 2]; 6];
        for qp in &qps {
            for (g, rg) in grads.iter_mut().zip(&qp.ref_grads) {
                *g = el.geo.push_grad(*rg);
            }
            let mut wvec = [0.0; 2];
            for (local, &node) in el.nodes.iter().enumerate() {
                wvec[0] += w[2 * node] * qp.vals[local];
                wvec[1] += w[2 * node + 1] * qp.vals[local];
            }
            let scale = qp.weight * el.geo.area;
            let mut conv = [0.0; 6];
            for (d, g) in conv.iter_mut().zip(&grads) {
                *d = wvec[0] * g[0] + wvec[1] * g[1];
            }
            for i in 0..6 {
                for j in 0..6 {
                    block[i][j] += scale * 0.5 * (conv[j] * qp.vals[i] - conv[i] * qp.vals[j]);
                }
            }
        }
    }))
}

/// Divergence coupling; row q holds (div u, psi_q) for pressure basis psi_q.
pub fn assemble_divergence(space: &TaylorHoodSpace) -> SparseMatrix {
    let qps = quad_points(&TriQuadRule::degree5());
    let mut triplets = Vec::with_capacity(space.mesh().triangles.len() * 36);
    for tri in 0..space.mesh().triangles.len() {
        let el = element(space, tri);
        let mut block = [[[0.0; 2]; 6]; 3];
        let mut grads = [[0.0; 2]; 6];
        for qp in &qps {
            for (g, rg) in grads.iter_mut().zip(&qp.ref_grads) {
                *g = el.geo.push_grad(*rg);
            }
            let w = qp.weight * el.geo.area;
            for q in 0..3 {
                let psi = qp.bary[q];
                for i in 0..6 {
                    for c in 0..2 {
                        block[q][i][c] += w * psi * grads[i][c];
                    }
                }
            }
        }
        let verts = space.mesh().triangles[tri];
        for q in 0..3 {
            for i in 0..6 {
                for c in 0..2 {
                    triplets.push(Triplet::new(
                        verts[q],
                        space.velocity_dof(el.nodes[i], c),
                        block[q][i][c],
                    ));
                }
            }
        }
    }
    SparseMatrix::from_triplets(space.n_pressure(), space.n_velocity(), &triplets)
        .expect("assembly indices are in range")
}

/// The skew-symmetrized convection trilinear form
/// `0.5 (u . grad v, w) - 0.5 (u . grad w, v)` for discrete fields.
pub fn skew_convection_form(
    space: &TaylorHoodSpace,
    u: &[f64],
    v: &[f64],
    w: &[f64],
) -> Result<f64, FemError> {
    check_velocity_len(space, u)?;
    check_velocity_len(space, v)?;
    check_velocity_len(space, w)?;
    let qps = quad_points(&TriQuadRule::degree5());
    let mut acc = 0.0;
    for tri in 0..space.mesh().triangles.len() {
        let el = element(space, tri);
        let mut grads = [[0.0; 2]; 6];
        for qp in &qps {
            for (g, rg) in grads.iter_mut().zip(&qp.ref_grads) {
                *g = el.geo.push_grad(*rg);
            }
            let uq = eval_vec(u, &el.nodes, &qp.vals);
            let vq = eval_vec(v, &el.nodes, &qp.vals);
            let wq = eval_vec(w, &el.nodes, &qp.vals);
            let vg = eval_grad(v, &el.nodes, &grads);
            let wg = eval_grad(w, &el.nodes, &grads);
            let scale = qp.weight * el.geo.area;
            for c in 0..2 {
                let adv_v = uq[0] * vg[c][0] + uq[1] * vg[c][1];
                let adv_w = uq[0] * wg[c][0] + uq[1] * wg[c][1];
                acc += scale * 0.5 * (adv_v * wq[c] - adv_w * vq[c]);
            }
        }
    }
    Ok(acc)
}

/// Convection applied to coefficients without materializing the matrix:
/// returns the vector with entries `0.5 (w . grad u, phi_i) - 0.5 (w . grad phi_i, u)`.
pub fn apply_convection(
    space: &TaylorHoodSpace,
    w: &[f64],
    u: &[f64],
) -> Result<Vec<f64>, FemError> {
    check_velocity_len(space, w)?;
    check_velocity_len(space, u)?;
    let qps = quad_points(&TriQuadRule::degree5());
    let mut out = vec![0.0; space.n_velocity()];
    for tri in 0..space.mesh().triangles.len() {
        let el = element(space, tri);
        let mut grads = [[0.0; 2]; 6];
        for qp in &qps {
            for (g, rg) in grads.iter_mut().zip(&qp.ref_grads) {
                *g = el.geo.push_grad(*rg);
            }
            let wq = eval_vec(w, &el.nodes, &qp.vals);
            let uq = eval_vec(u, &el.nodes, &qp.vals);
            let ug = eval_grad(u, &el.nodes, &grads);
            let scale = qp.weight * el.geo.area;
            for c in 0..2 {
                let adv_u = wq[0] * ug[c][0] + wq[1] * ug[c][1];
                for (local, &node) in el.nodes.iter().enumerate() {
                    let adv_phi = wq[0] * grads[local][0] + wq[1] * grads[local][1];
                    out[2 * node + c] +=
                        scale * 0.5 * (adv_u * qp.vals[local] - adv_phi * uq[c]);
                }
            }
        }
    }
    Ok(out)
}

/// Load vector (f, phi_i) with `f` evaluated pointwise at quadrature points.
pub fn assemble_load(space: &TaylorHoodSpace, f: &dyn Field2, t: f64) -> Vec<f64> {
    let qps = quad_points(&TriQuadRule::degree5());
    let mut out = vec![0.0; space.n_velocity()];
    for tri in 0..space.mesh().triangles.len() {
        let el = element(space, tri);
        for qp in &qps {
            let x = physical_point(&el.verts, qp.bary);
            let fv = f.at(x[0], x[1], t);
            let scale = qp.weight * el.geo.area;
            for (local, &node) in el.nodes.iter().enumerate() {
                out[2 * node] += scale * fv[0] * qp.vals[local];
                out[2 * node + 1] += scale * fv[1] * qp.vals[local];
            }
        }
    }
    out
}

/// Integrals of the pressure basis functions; dotting with pressure
/// coefficients gives the integral of the discrete pressure.
pub fn pressure_integral_weights(space: &TaylorHoodSpace) -> Vec<f64> {
    // Each linear basis function integrates to area/3 on its triangles.
    let mut w = vec![0.0; space.n_pressure()];
    for (tri, verts) in space.mesh().triangles.iter().enumerate() {
        let third = space.mesh().triangle_area(tri) / 3.0;
        for &v in verts {
            w[v] += third;
        }
    }
    w
}

/// Coupled saddle matrix from velocity block `a`, divergence `b`, and its
/// transpose `bt`, with a structural diagonal entry at the pinned pressure
/// DOF so the gauge row can later be turned into an identity row.
pub fn assemble_saddle(
    a: &SparseMatrix,
    b: &SparseMatrix,
    bt: &SparseMatrix,
    pinned_pressure: usize,
) -> SparseMatrix {
    let n_vel = a.nrows();
    let n_pr = b.nrows();
    assert_eq!(a.ncols(), n_vel);
    assert_eq!(b.ncols(), n_vel);
    assert_eq!(bt.nrows(), n_vel);
    assert_eq!(bt.ncols(), n_pr);
    assert!(pinned_pressure < n_pr);
    let n = n_vel + n_pr;

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(a.nnz() + 2 * b.nnz() + 1);
    let mut values = Vec::with_capacity(col_idx.capacity());
    row_ptr.push(0);
    for r in 0..n_vel {
        let (cols, vals) = a.row(r);
        col_idx.extend_from_slice(cols);
        values.extend_from_slice(vals);
        let (cols, vals) = bt.row(r);
        // Pressure-gradient block enters negated.
        for (&c, &v) in cols.iter().zip(vals) {
            col_idx.push(n_vel + c);
            values.push(-v);
        }
        row_ptr.push(col_idx.len());
    }
    for r in 0..n_pr {
        let (cols, vals) = b.row(r);
        col_idx.extend_from_slice(cols);
        values.extend_from_slice(vals);
        if r == pinned_pressure {
            col_idx.push(n_vel + r);
            values.push(0.0);
        }
        row_ptr.push(col_idx.len());
    }
    SparseMatrix::from_raw_csr(n, n, row_ptr, col_idx, values)
}

/// Discrete velocity value at a barycentric point of a triangle.
pub fn velocity_at(
    space: &TaylorHoodSpace,
    coef: &[f64],
    tri: usize,
    bary: [f64; 3],
) -> [f64; 2] {
    let el = element(space, tri);
    eval_vec(coef, &el.nodes, &p2_values(bary))
}

/// Discrete velocity Jacobian at a barycentric point of a triangle,
/// rows `[[du/dx, du/dy], [dv/dx, dv/dy]]`.
pub fn velocity_grad_at(
    space: &TaylorHoodSpace,
    coef: &[f64],
    tri: usize,
    bary: [f64; 3],
) -> [[f64; 2]; 2] {
    let el = element(space, tri);
    let mut grads = [[0.0; 2]; 6];
    for (g, rg) in grads.iter_mut().zip(&p2_grads_ref(bary)) {
        *g = el.geo.push_grad(*rg);
    }
    eval_grad(coef, &el.nodes, &grads)
}

fn eval_vec(coef: &[f64], nodes: &[usize; 6], vals: &[f64; 6]) -> [f64; 2] {
    let mut out = [0.0; 2];
    for (local, &node) in nodes.iter().enumerate() {
        out[0] += coef[2 * node] * vals[local];
        out[1] += coef[2 * node + 1] * vals[local];
    }
    out
}

fn eval_grad(coef: &[f64], nodes: &[usize; 6], grads: &[[f64; 2]; 6]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for (local, &node) in nodes.iter().enumerate() {
        for c in 0..2 {
            out[c][0] += coef[2 * node + c] * grads[local][0];
            out[c][1] += coef[2 * node + c] * grads[local][1];
        }
    }
    out
}

fn check_velocity_len(space: &TaylorHoodSpace, v: &[f64]) -> Result<(), FemError> {
    if v.len() != space.n_velocity() {
        return Err(FemError::DimensionMismatch {
            expected: space.n_velocity(),
            found: v.len(),
        });
    }
    Ok(())
}
