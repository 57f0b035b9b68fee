//! Taylor-Hood discretization: quadratic velocity on vertices plus edge
//! midpoints, linear pressure on vertices.
//!
//! Velocity scalar DOFs are interleaved (node k owns 2k and 2k+1); pressure
//! DOFs follow after all velocity DOFs in coupled systems, one per vertex.

pub mod assemble;
pub mod dirichlet;
pub mod shape;

pub use assemble::*;
pub use dirichlet::*;

use std::collections::HashMap;

use crate::field::Field2;
use crate::mesh::Mesh;

/// Mixed velocity/pressure space over a triangle mesh.
#[derive(Debug, Clone)]
pub struct TaylorHoodSpace {
    mesh: Mesh,
    /// Edge id -> endpoint vertices, ids assigned in first-encounter order
    /// over triangles so numbering is independent of hash iteration.
    edges: Vec<(usize, usize)>,
    /// Per triangle: edge ids of (v0,v1), (v1,v2), (v2,v0).
    tri_edges: Vec<[usize; 3]>,
    /// Coordinates of all quadratic nodes: vertices first, then midpoints.
    p2_coords: Vec<[f64; 2]>,
    /// Boundary tag for quadratic nodes lying on the boundary.
    dirichlet_tags: Vec<Option<u32>>,
}

impl TaylorHoodSpace {
    pub fn new(mesh: Mesh) -> Self {
        let n_vertices = mesh.nodes.len();
        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<(usize, usize)> = Vec::new();
        let mut tri_edges = Vec::with_capacity(mesh.triangles.len());
        for tri in &mesh.triangles {
            let local = [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])];
            let mut ids = [0usize; 3];
            for (k, &(a, b)) in local.iter().enumerate() {
                let key = (a.min(b), a.max(b));
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edges.len() - 1
                });
                ids[k] = id;
            }
            tri_edges.push(ids);
        }

        let mut p2_coords = mesh.nodes.clone();
        p2_coords.extend(edges.iter().map(|&(a, b)| {
            [
                0.5 * (mesh.nodes[a][0] + mesh.nodes[b][0]),
                0.5 * (mesh.nodes[a][1] + mesh.nodes[b][1]),
            ]
        }));

        let mut dirichlet_tags: Vec<Option<u32>> = vec![None; p2_coords.len()];
        for &(a, b, tag) in &mesh.boundary_edges {
            let key = (a.min(b), a.max(b));
            let mid = n_vertices + edge_ids[&key];
            for node in [a, b, mid] {
                // A corner shared by differently tagged walls keeps the smaller tag.
                dirichlet_tags[node] = Some(match dirichlet_tags[node] {
                    Some(prev) => prev.min(tag),
                    None => tag,
                });
            }
        }

        Self {
            mesh,
            edges,
            tri_edges,
            p2_coords,
            dirichlet_tags,
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// Number of quadratic nodes (vertices + edge midpoints).
    pub fn n_p2(&self) -> usize {
        self.p2_coords.len()
    }

    /// Number of velocity scalar DOFs.
    pub fn n_velocity(&self) -> usize {
        2 * self.n_p2()
    }

    /// Number of pressure DOFs.
    pub fn n_pressure(&self) -> usize {
        self.mesh.nodes.len()
    }

    /// Size of the coupled velocity-pressure system.
    pub fn n_coupled(&self) -> usize {
        self.n_velocity() + self.n_pressure()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Global quadratic node for a triangle's local node 0..6.
    pub fn p2_node(&self, tri: usize, local: usize) -> usize {
        if local < 3 {
            self.mesh.triangles[tri][local]
        } else {
            self.mesh.nodes.len() + self.tri_edges[tri][local - 3]
        }
    }

    /// Velocity scalar DOF of a quadratic node and component.
    pub fn velocity_dof(&self, node: usize, comp: usize) -> usize {
        2 * node + comp
    }

    pub fn p2_coord(&self, node: usize) -> [f64; 2] {
        self.p2_coords[node]
    }

    /// Boundary tag of a quadratic node, if it lies on the boundary.
    pub fn boundary_tag(&self, node: usize) -> Option<u32> {
        self.dirichlet_tags[node]
    }

    /// Nodal interpolation of a field into velocity coefficients.
    pub fn interpolate(&self, f: &dyn Field2, t: f64) -> Vec<f64> {
        let mut coef = vec![0.0; self.n_velocity()];
        for (k, p) in self.p2_coords.iter().enumerate() {
            let v = f.at(p[0], p[1], t);
            coef[2 * k] = v[0];
            coef[2 * k + 1] = v[1];
        }
        coef
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square;

    #[test]
    fn dof_counts_on_structured_squares() {
        // V = (m+1)^2, E = V + 2m^2 - 1 by Euler's formula on a disk-like domain.
        for m in [1usize, 4, 20] {
            let space = TaylorHoodSpace::new(unit_square(m));
            let v = (m + 1) * (m + 1);
            let e = v + 2 * m * m - 1;
            assert_eq!(space.n_pressure(), v);
            assert_eq!(space.n_edges(), e);
            assert_eq!(space.n_p2(), v + e);
            assert_eq!(space.n_velocity(), 2 * (v + e));
        }
    }

    #[test]
    fn midpoint_coordinates_bisect_edges() {
        let space = TaylorHoodSpace::new(unit_square(3));
        for tri in 0..space.mesh().triangles.len() {
            for (local_mid, (a, b)) in [(3, (0, 1)), (4, (1, 2)), (5, (2, 0))] {
                let mid = space.p2_node(tri, local_mid);
                let pa = space.p2_coord(space.p2_node(tri, a));
                let pb = space.p2_coord(space.p2_node(tri, b));
                let pm = space.p2_coord(mid);
                assert!((pm[0] - 0.5 * (pa[0] + pb[0])).abs() < 1e-15);
                assert!((pm[1] - 0.5 * (pa[1] + pb[1])).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn boundary_nodes_count_on_unit_square() {
        // Per side: m+1 vertices and m midpoints; corners shared by two sides.
        let m = 5;
        let space = TaylorHoodSpace::new(unit_square(m));
        let tagged = (0..space.n_p2())
            .filter(|&k| space.boundary_tag(k).is_some())
            .count();
        assert_eq!(tagged, 8 * m);
        for k in 0..space.n_p2() {
            let [x, y] = space.p2_coord(k);
            let on_edge = x == 0.0 || y == 0.0 || (x - 1.0).abs() < 1e-15 || (y - 1.0).abs() < 1e-15;
            assert_eq!(space.boundary_tag(k).is_some(), on_edge, "node {k} at ({x},{y})");
        }
    }

    #[test]
    fn interpolation_is_nodal() {
        let space = TaylorHoodSpace::new(unit_square(2));
        let f = |x: f64, y: f64, t: f64| [x + 2.0 * y + t, x * y];
        let coef = space.interpolate(&f, 0.5);
        for k in 0..space.n_p2() {
            let [x, y] = space.p2_coord(k);
            assert_eq!(coef[2 * k], x + 2.0 * y + 0.5);
            assert_eq!(coef[2 * k + 1], x * y);
        }
    }
}
