//! Shared oracle layer for the integration suites.
//!
//! Everything here recomputes library quantities along a different route: a
//! tensor Gauss rule pushed through the Duffy map instead of the symmetric
//! triangle rule, basis gradients from per-triangle barycentric coefficients
//! instead of the reference-element Jacobian, dense matrices instead of CSR,
//! and a dense LU instead of the sparse factorization. Agreement between the
//! two routes is evidence about the library, not bookkeeping.

#![allow(dead_code)]

use flowens::fem::{pinned_pressure_dof, TaylorHoodSpace};
use flowens::field::Field2;
use nalgebra::{DMatrix, DVector};

/// Gauss-Legendre nodes and weights on [-1, 1], eight points (degree 15).
const GAUSS8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
];

/// 64-point rule on the reference triangle: the tensor Gauss grid mapped by
/// the Duffy transform u = s, v = t(1-s). Weights sum to 1, so an integral
/// over a physical triangle is `area * sum w_q f(point_q)`; exact well past
/// every Taylor-Hood integrand degree.
pub fn duffy_rule() -> Vec<([f64; 3], f64)> {
    let unit: Vec<(f64, f64)> = GAUSS8
        .iter()
        .map(|&(x, w)| (0.5 * (1.0 + x), 0.5 * w))
        .collect();
    let mut rule = Vec::with_capacity(64);
    for &(s, ws) in &unit {
        for &(t, wt) in &unit {
            let u = s;
            let v = t * (1.0 - s);
            rule.push(([1.0 - u - v, u, v], 2.0 * ws * wt * (1.0 - s)));
        }
    }
    rule
}

/// Barycentric coordinate frame of one triangle: gradients from the direct
/// edge-vector formulas, vertices for mapping quadrature points out.
pub struct TriBasis {
    verts: [[f64; 2]; 3],
    grads: [[f64; 2]; 3],
    pub area: f64,
}

impl TriBasis {
    pub fn new(space: &TaylorHoodSpace, tri: usize) -> Self {
        let mesh = space.mesh();
        let t = mesh.triangles[tri];
        let verts = [mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]];
        let [a, b, c] = verts;
        let double_area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        let grads = [
            [(b[1] - c[1]) / double_area, (c[0] - b[0]) / double_area],
            [(c[1] - a[1]) / double_area, (a[0] - c[0]) / double_area],
            [(a[1] - b[1]) / double_area, (b[0] - a[0]) / double_area],
        ];
        Self {
            verts,
            grads,
            area: 0.5 * double_area,
        }
    }

    pub fn physical(&self, bary: [f64; 3]) -> [f64; 2] {
        let mut x = [0.0; 2];
        for k in 0..3 {
            x[0] += bary[k] * self.verts[k][0];
            x[1] += bary[k] * self.verts[k][1];
        }
        x
    }

    /// Quadratic basis values in the library's local order: vertices 0..2,
    /// then midpoints of (0,1), (1,2), (2,0).
    pub fn p2_values(&self, l: [f64; 3]) -> [f64; 6] {
        [
            l[0] * (2.0 * l[0] - 1.0),
            l[1] * (2.0 * l[1] - 1.0),
            l[2] * (2.0 * l[2] - 1.0),
            4.0 * l[0] * l[1],
            4.0 * l[1] * l[2],
            4.0 * l[2] * l[0],
        ]
    }

    pub fn p2_grads(&self, l: [f64; 3]) -> [[f64; 2]; 6] {
        let g = &self.grads;
        let mut out = [[0.0; 2]; 6];
        for v in 0..3 {
            for d in 0..2 {
                out[v][d] = (4.0 * l[v] - 1.0) * g[v][d];
            }
        }
        for (slot, (i, j)) in [(3, (0, 1)), (4, (1, 2)), (5, (2, 0))] {
            for d in 0..2 {
                out[slot][d] = 4.0 * (l[i] * g[j][d] + l[j] * g[i][d]);
            }
        }
        out
    }
}

fn velocity_dofs(space: &TaylorHoodSpace, tri: usize) -> [[usize; 2]; 6] {
    let mut dofs = [[0; 2]; 6];
    for (local, slot) in dofs.iter_mut().enumerate() {
        let node = space.p2_node(tri, local);
        *slot = [space.velocity_dof(node, 0), space.velocity_dof(node, 1)];
    }
    dofs
}

/// Velocity mass matrix, dense: block-diagonal over the two components.
pub fn dense_mass(space: &TaylorHoodSpace) -> DMatrix<f64> {
    let rule = duffy_rule();
    let n = space.n_velocity();
    let mut m = DMatrix::zeros(n, n);
    for tri in 0..space.mesh().triangles.len() {
        let basis = TriBasis::new(space, tri);
        let dofs = velocity_dofs(space, tri);
        for &(bary, w) in &rule {
            let vals = basis.p2_values(bary);
            let scale = w * basis.area;
            for i in 0..6 {
                for j in 0..6 {
                    let v = scale * vals[i] * vals[j];
                    for c in 0..2 {
                        m[(dofs[i][c], dofs[j][c])] += v;
                    }
                }
            }
        }
    }
    m
}

/// Velocity gradient-gradient matrix, dense.
pub fn dense_stiffness(space: &TaylorHoodSpace) -> DMatrix<f64> {
    let rule = duffy_rule();
    let n = space.n_velocity();
    let mut k = DMatrix::zeros(n, n);
    for tri in 0..space.mesh().triangles.len() {
        let basis = TriBasis::new(space, tri);
        let dofs = velocity_dofs(space, tri);
        for &(bary, w) in &rule {
            let grads = basis.p2_grads(bary);
            let scale = w * basis.area;
            for i in 0..6 {
                for j in 0..6 {
                    let v = scale * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                    for c in 0..2 {
                        k[(dofs[i][c], dofs[j][c])] += v;
                    }
                }
            }
        }
    }
    k
}

/// Skew-symmetrized convection matrix at transport field `w`, dense:
/// entry (i, j) integrates ((w . grad phi_j) phi_i - (w . grad phi_i) phi_j) / 2.
pub fn dense_convection(space: &TaylorHoodSpace, w_coeffs: &[f64]) -> DMatrix<f64> {
    assert_eq!(w_coeffs.len(), space.n_velocity());
    let rule = duffy_rule();
    let n = space.n_velocity();
    let mut nmat = DMatrix::zeros(n, n);
    for tri in 0..space.mesh().triangles.len() {
        let basis = TriBasis::new(space, tri);
        let dofs = velocity_dofs(space, tri);
        for &(bary, wq) in &rule {
            let vals = basis.p2_values(bary);
            let grads = basis.p2_grads(bary);
            let mut wx = [0.0; 2];
            for i in 0..6 {
                for c in 0..2 {
                    wx[c] += vals[i] * w_coeffs[dofs[i][c]];
                }
            }
            let conv: Vec<f64> = (0..6)
                .map(|i| wx[0] * grads[i][0] + wx[1] * grads[i][1])
                .collect();
            let scale = wq * basis.area;
            for i in 0..6 {
                for j in 0..6 {
                    let v = scale * 0.5 * (conv[j] * vals[i] - conv[i] * vals[j]);
                    for c in 0..2 {
                        nmat[(dofs[i][c], dofs[j][c])] += v;
                    }
                }
            }
        }
    }
    nmat
}

/// Pressure-row divergence matrix, dense: entry (q, dof(i, c)) integrates
/// psi_q d_c phi_i.
pub fn dense_divergence(space: &TaylorHoodSpace) -> DMatrix<f64> {
    let rule = duffy_rule();
    let mut b = DMatrix::zeros(space.n_pressure(), space.n_velocity());
    for tri in 0..space.mesh().triangles.len() {
        let basis = TriBasis::new(space, tri);
        let dofs = velocity_dofs(space, tri);
        let verts = space.mesh().triangles[tri];
        for &(bary, w) in &rule {
            let grads = basis.p2_grads(bary);
            let scale = w * basis.area;
            for q in 0..3 {
                for i in 0..6 {
                    for c in 0..2 {
                        b[(verts[q], dofs[i][c])] += scale * bary[q] * grads[i][c];
                    }
                }
            }
        }
    }
    b
}

/// Velocity load vector of a pointwise force, dense quadrature.
pub fn dense_load(space: &TaylorHoodSpace, f: &dyn Field2, t: f64) -> DVector<f64> {
    let rule = duffy_rule();
    let mut load = DVector::zeros(space.n_velocity());
    for tri in 0..space.mesh().triangles.len() {
        let basis = TriBasis::new(space, tri);
        let dofs = velocity_dofs(space, tri);
        for &(bary, w) in &rule {
            let vals = basis.p2_values(bary);
            let x = basis.physical(bary);
            let fx = f.at(x[0], x[1], t);
            let scale = w * basis.area;
            for i in 0..6 {
                for c in 0..2 {
                    load[dofs[i][c]] += scale * vals[i] * fx[c];
                }
            }
        }
    }
    load
}

/// Integral of each pressure basis function, dense quadrature.
pub fn dense_pressure_weights(space: &TaylorHoodSpace) -> Vec<f64> {
    let rule = duffy_rule();
    let mut weights = vec![0.0; space.n_pressure()];
    for tri in 0..space.mesh().triangles.len() {
        let basis = TriBasis::new(space, tri);
        let verts = space.mesh().triangles[tri];
        for &(bary, w) in &rule {
            for q in 0..3 {
                weights[verts[q]] += w * basis.area * bary[q];
            }
        }
    }
    weights
}

/// Coupled saddle matrix from dense blocks: velocity block, negated
/// pressure gradient, divergence rows, zero pressure-pressure block.
pub fn dense_saddle(av: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n_vel = av.nrows();
    let n_pr = b.nrows();
    let n = n_vel + n_pr;
    let mut s = DMatrix::zeros(n, n);
    s.view_mut((0, 0), (n_vel, n_vel)).copy_from(av);
    s.view_mut((0, n_vel), (n_vel, n_pr)).copy_from(&(-b.transpose()));
    s.view_mut((n_vel, 0), (n_pr, n_vel)).copy_from(b);
    s
}

/// Replaces constrained rows with identity rows carrying the boundary trace
/// at time `t`, and pins the gauge pressure row to zero. Plain row
/// replacement solves the same system as the library's symmetric
/// elimination.
pub fn impose_dirichlet_rows(
    system: &mut DMatrix<f64>,
    rhs: &mut DVector<f64>,
    space: &TaylorHoodSpace,
    bc: &dyn Field2,
    t: f64,
) {
    for node in 0..space.n_p2() {
        if space.boundary_tag(node).is_some() {
            let [x, y] = space.p2_coord(node);
            let g = bc.at(x, y, t);
            for c in 0..2 {
                let dof = space.velocity_dof(node, c);
                system.row_mut(dof).fill(0.0);
                system[(dof, dof)] = 1.0;
                rhs[dof] = g[c];
            }
        }
    }
    // Coupled-system index of the gauge row.
    let pinned = pinned_pressure_dof(space);
    system.row_mut(pinned).fill(0.0);
    system[(pinned, pinned)] = 1.0;
    rhs[pinned] = 0.0;
}

/// A linearly implicit single-flow stepper built entirely from the dense
/// oracle pieces: the scheme a one-member ensemble must degenerate to.
/// Convection is linearized at the previous velocity; forcing is zero.
pub struct SingleFlowOracle<'s> {
    space: &'s TaylorHoodSpace,
    nu: f64,
    dt: f64,
    mass: DMatrix<f64>,
    stiffness: DMatrix<f64>,
    divergence: DMatrix<f64>,
    weights: Vec<f64>,
    domain_area: f64,
}

impl<'s> SingleFlowOracle<'s> {
    pub fn new(space: &'s TaylorHoodSpace, nu: f64, dt: f64) -> Self {
        let weights = dense_pressure_weights(space);
        let domain_area = weights.iter().sum();
        Self {
            space,
            nu,
            dt,
            mass: dense_mass(space),
            stiffness: dense_stiffness(space),
            divergence: dense_divergence(space),
            weights,
            domain_area,
        }
    }

    /// Advances one step from velocity coefficients `u` to time `t_next`
    /// with trace data `bc`; returns the new velocity and gauge-fixed
    /// pressure.
    pub fn step(&self, u: &[f64], t_next: f64, bc: &dyn Field2) -> (Vec<f64>, Vec<f64>) {
        let n_vel = self.space.n_velocity();
        let u_vec = DVector::from_column_slice(u);
        let av = &self.mass / self.dt + dense_convection(self.space, u) + &self.stiffness * self.nu;
        let mut system = dense_saddle(&av, &self.divergence);
        let mut rhs = DVector::zeros(system.nrows());
        rhs.rows_mut(0, n_vel)
            .copy_from(&(&self.mass * &u_vec / self.dt));
        impose_dirichlet_rows(&mut system, &mut rhs, self.space, bc, t_next);
        let solution = system
            .lu()
            .solve(&rhs)
            .expect("oracle saddle system is invertible");
        let velocity: Vec<f64> = solution.rows(0, n_vel).iter().copied().collect();
        let mut pressure: Vec<f64> = solution.rows(n_vel, self.space.n_pressure()).iter().copied().collect();
        let mean: f64 = self
            .weights
            .iter()
            .zip(&pressure)
            .map(|(w, p)| w * p)
            .sum::<f64>()
            / self.domain_area;
        for p in pressure.iter_mut() {
            *p -= mean;
        }
        (velocity, pressure)
    }
}

/// Max |a - b| over a dense matrix and the library's sparse one.
pub fn max_abs_diff(dense: &DMatrix<f64>, sparse: &flowens::sparse::SparseMatrix) -> f64 {
    assert_eq!(dense.nrows(), sparse.nrows());
    assert_eq!(dense.ncols(), sparse.ncols());
    let mut worst = 0.0f64;
    for r in 0..dense.nrows() {
        for c in 0..dense.ncols() {
            worst = worst.max((dense[(r, c)] - sparse.get(r, c)).abs());
        }
    }
    worst
}

/// Largest absolute entry of a dense matrix, for scaling tolerances.
pub fn max_abs(dense: &DMatrix<f64>) -> f64 {
    dense.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

pub fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn l2_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Field backed by a closure, for integrating hand-picked polynomials.
pub struct FnField<F: Fn(f64, f64) -> [f64; 2] + Send + Sync>(pub F);

impl<F: Fn(f64, f64) -> [f64; 2] + Send + Sync> Field2 for FnField<F> {
    fn at(&self, x: f64, y: f64, _t: f64) -> [f64; 2] {
        (self.0)(x, y)
    }
}

pub fn max_sparse_abs(m: &flowens::sparse::SparseMatrix) -> f64 {
    m.values().iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Largest |A_ij + A_ji|; zero for an exactly skew matrix.
pub fn max_skew_defect(m: &flowens::sparse::SparseMatrix) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..m.nrows() {
        let (cols, vals) = m.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            worst = worst.max((v + m.get(c, r)).abs());
        }
    }
    worst
}
