//! Conforming triangle meshes: the structured unit-square generator, a plain
//! text interchange format, and the validation shared by both.
//!
//! Triangles are stored counterclockwise; `new` reorients clockwise input and
//! rejects degenerate triangles. Boundary edges carry an integer tag so
//! different walls can receive different boundary data.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("triangle {index} has zero area")]
    DegenerateTriangle { index: usize },
    #[error("triangle {index} repeats a vertex")]
    RepeatedVertex { index: usize },
    #[error("triangle {index} references node {node} but the mesh has {count} nodes")]
    NodeOutOfRange {
        index: usize,
        node: usize,
        count: usize,
    },
    #[error("node {index} is not referenced by any triangle")]
    DanglingNode { index: usize },
    #[error("edge ({a}, {b}) is shared by {count} triangles")]
    NonManifoldEdge { a: usize, b: usize, count: usize },
    #[error("boundary edge ({a}, {b}) does not lie on exactly one triangle")]
    BadBoundaryEdge { a: usize, b: usize },
    #[error("edge ({a}, {b}) lies on one triangle but is not listed as boundary")]
    UnmarkedBoundaryEdge { a: usize, b: usize },
    #[error("boundary edge ({a}, {b}) is listed more than once")]
    DuplicateBoundaryEdge { a: usize, b: usize },
    #[error("node {index} has non-finite coordinates")]
    BadCoordinate { index: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Triangulation of a planar domain with tagged boundary edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// (node, node, tag) with the pair listed in either order.
    pub boundary_edges: Vec<(usize, usize, u32)>,
    /// Longest edge length over all triangles.
    pub h_max: f64,
}

impl Mesh {
    /// Validates connectivity and orientation, reorienting clockwise triangles.
    pub fn new(
        nodes: Vec<[f64; 2]>,
        mut triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<(usize, usize, u32)>,
    ) -> Result<Self, MeshError> {
        for (i, p) in nodes.iter().enumerate() {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(MeshError::BadCoordinate { index: i });
            }
        }
        let mut referenced = vec![false; nodes.len()];
        for (i, tri) in triangles.iter_mut().enumerate() {
            for &v in tri.iter() {
                if v >= nodes.len() {
                    return Err(MeshError::NodeOutOfRange {
                        index: i,
                        node: v,
                        count: nodes.len(),
                    });
                }
                referenced[v] = true;
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::RepeatedVertex { index: i });
            }
            let area2 = signed_area2(&nodes, tri);
            if area2 == 0.0 {
                return Err(MeshError::DegenerateTriangle { index: i });
            }
            if area2 < 0.0 {
                tri.swap(1, 2);
            }
        }
        if let Some(index) = referenced.iter().position(|&r| !r) {
            return Err(MeshError::DanglingNode { index });
        }

        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &triangles {
            for (a, b) in tri_edges(tri) {
                *edge_count.entry(key(a, b)).or_insert(0) += 1;
            }
        }
        for (&(a, b), &count) in &edge_count {
            if count > 2 {
                return Err(MeshError::NonManifoldEdge { a, b, count });
            }
        }
        let mut marked: HashMap<(usize, usize), usize> = HashMap::new();
        for &(a, b, _) in &boundary_edges {
            if edge_count.get(&key(a, b)) != Some(&1) {
                return Err(MeshError::BadBoundaryEdge { a, b });
            }
            if *marked.entry(key(a, b)).or_insert(0) >= 1 {
                return Err(MeshError::DuplicateBoundaryEdge { a, b });
            }
            *marked.get_mut(&key(a, b)).unwrap() += 1;
        }
        for (&(a, b), &count) in &edge_count {
            if count == 1 && !marked.contains_key(&(a, b)) {
                return Err(MeshError::UnmarkedBoundaryEdge { a, b });
            }
        }

        let mut h_max = 0.0f64;
        for tri in &triangles {
            for (a, b) in tri_edges(tri) {
                let dx = nodes[a][0] - nodes[b][0];
                let dy = nodes[a][1] - nodes[b][1];
                h_max = h_max.max((dx * dx + dy * dy).sqrt());
            }
        }

        Ok(Self {
            nodes,
            triangles,
            boundary_edges,
            h_max,
        })
    }

    pub fn triangle_area(&self, index: usize) -> f64 {
        0.5 * signed_area2(&self.nodes, &self.triangles[index])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|i| self.triangle_area(i)).sum()
    }

    pub fn parse(text: &str) -> Result<Self, MeshError> {
        Parser::new(text).run()
    }

    pub fn load(path: &Path) -> Result<Self, MeshError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Writes the interchange format; coordinates round-trip bit for bit.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "nodes {}", self.nodes.len());
        for p in &self.nodes {
            let _ = writeln!(out, "{} {}", p[0], p[1]);
        }
        let _ = writeln!(out, "triangles {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(out, "boundary_edges {}", self.boundary_edges.len());
        for &(a, b, tag) in &self.boundary_edges {
            let _ = writeln!(out, "{} {} {}", a, b, tag);
        }
        out
    }
}

/// Uniform triangulation of the unit square with `m` cells per side, every
/// square split along the same diagonal. Longest edge is sqrt(2)/m and all
/// boundary edges carry tag 1.
pub fn unit_square(m: usize) -> Mesh {
    assert!(m >= 1, "unit_square needs at least one cell per side");
    let n = m + 1;
    let id = |i: usize, j: usize| j * n + i;
    let mut nodes = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            nodes.push([i as f64 / m as f64, j as f64 / m as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * m * m);
    for j in 0..m {
        for i in 0..m {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let mut boundary_edges = Vec::with_capacity(4 * m);
    for i in 0..m {
        boundary_edges.push((id(i, 0), id(i + 1, 0), 1));
        boundary_edges.push((id(i, m), id(i + 1, m), 1));
        boundary_edges.push((id(0, i), id(0, i + 1), 1));
        boundary_edges.push((id(m, i), id(m, i + 1), 1));
    }
    Mesh::new(nodes, triangles, boundary_edges).expect("structured mesh is valid")
}

fn signed_area2(nodes: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = *tri;
    (nodes[b][0] - nodes[a][0]) * (nodes[c][1] - nodes[a][1])
        - (nodes[b][1] - nodes[a][1]) * (nodes[c][0] - nodes[a][0])
}

fn tri_edges(tri: &[usize; 3]) -> [(usize, usize); 3] {
    [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])]
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

struct Parser<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate(),
        }
    }

    /// Next non-blank, non-comment line with its 1-based number.
    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        for (i, raw) in self.lines.by_ref() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return Some((i + 1, line));
        }
        None
    }

    fn expect_section(&mut self, name: &str) -> Result<(usize, usize), MeshError> {
        let (line, text) = self.next_line().ok_or_else(|| MeshError::Parse {
            line: 0,
            message: format!("missing '{name}' section"),
        })?;
        let mut parts = text.split_whitespace();
        let head = parts.next().unwrap_or("");
        if head != name {
            return Err(MeshError::Parse {
                line,
                message: format!("expected '{name} <count>', found '{text}'"),
            });
        }
        let count = parts
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| MeshError::Parse {
                line,
                message: format!("expected '{name} <count>', found '{text}'"),
            })?;
        if parts.next().is_some() {
            return Err(MeshError::Parse {
                line,
                message: format!("trailing tokens after '{name} <count>'"),
            });
        }
        Ok((line, count))
    }

    fn fields<const N: usize>(&mut self, what: &str) -> Result<(usize, [&'a str; N]), MeshError> {
        let (line, text) = self.next_line().ok_or_else(|| MeshError::Parse {
            line: 0,
            message: format!("unexpected end of file while reading {what}"),
        })?;
        let parts: Vec<&str> = text.split_whitespace().collect();
        if parts.len() != N {
            return Err(MeshError::Parse {
                line,
                message: format!("expected {N} fields for {what}, found {}", parts.len()),
            });
        }
        let mut out = [""; N];
        out.copy_from_slice(&parts);
        Ok((line, out))
    }

    fn run(mut self) -> Result<Mesh, MeshError> {
        let (_, n_nodes) = self.expect_section("nodes")?;
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let (line, [x, y]) = self.fields::<2>("a node coordinate pair")?;
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| MeshError::Parse {
                    line,
                    message: format!("invalid coordinate '{s}'"),
                })
            };
            nodes.push([parse(x)?, parse(y)?]);
        }
        let (_, n_tris) = self.expect_section("triangles")?;
        let mut triangles = Vec::with_capacity(n_tris);
        for _ in 0..n_tris {
            let (line, [a, b, c]) = self.fields::<3>("a triangle index triple")?;
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|_| MeshError::Parse {
                    line,
                    message: format!("invalid node index '{s}'"),
                })
            };
            triangles.push([parse(a)?, parse(b)?, parse(c)?]);
        }
        let (_, n_edges) = self.expect_section("boundary_edges")?;
        let mut boundary_edges = Vec::with_capacity(n_edges);
        for _ in 0..n_edges {
            let (line, [a, b, tag]) = self.fields::<3>("a boundary edge")?;
            let idx = |s: &str| {
                s.parse::<usize>().map_err(|_| MeshError::Parse {
                    line,
                    message: format!("invalid node index '{s}'"),
                })
            };
            let tag = tag.parse::<u32>().map_err(|_| MeshError::Parse {
                line,
                message: format!("invalid boundary tag '{tag}'"),
            })?;
            boundary_edges.push((idx(a)?, idx(b)?, tag));
        }
        if let Some((line, text)) = self.next_line() {
            return Err(MeshError::Parse {
                line,
                message: format!("unexpected trailing content '{text}'"),
            });
        }
        Mesh::new(nodes, triangles, boundary_edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn brute_force_edges(mesh: &Mesh) -> HashSet<(usize, usize)> {
        let mut edges = HashSet::new();
        for tri in &mesh.triangles {
            for (a, b) in tri_edges(tri) {
                edges.insert(key(a, b));
            }
        }
        edges
    }

    #[test]
    fn smallest_squares_have_expected_counts() {
        let m1 = unit_square(1);
        assert_eq!((m1.nodes.len(), m1.triangles.len(), m1.boundary_edges.len()), (4, 2, 4));
        let m2 = unit_square(2);
        assert_eq!((m2.nodes.len(), m2.triangles.len(), m2.boundary_edges.len()), (9, 8, 8));
    }

    #[test]
    fn unit_square_m20_satisfies_euler_formula() {
        let mesh = unit_square(20);
        assert_eq!(mesh.nodes.len(), 441);
        assert_eq!(mesh.triangles.len(), 800);
        let edges = brute_force_edges(&mesh);
        let euler = mesh.nodes.len() as i64 - edges.len() as i64 + mesh.triangles.len() as i64;
        assert_eq!(euler, 1);
    }

    #[test]
    fn unit_square_geometry() {
        for m in [1, 3, 20] {
            let mesh = unit_square(m);
            assert!((mesh.h_max - 2.0_f64.sqrt() / m as f64).abs() < 1e-15);
            assert!((mesh.total_area() - 1.0).abs() < 1e-12);
            for i in 0..mesh.triangles.len() {
                assert!(mesh.triangle_area(i) > 0.0);
            }
        }
    }

    /// Polar grid on an annulus: one interior hole, so V - E + F = 0.
    fn annulus(nr: usize, nt: usize) -> Mesh {
        let r0 = 0.4;
        let r1 = 1.0;
        let mut nodes = Vec::new();
        for i in 0..=nr {
            let r = r0 + (r1 - r0) * i as f64 / nr as f64;
            for j in 0..nt {
                let th = 2.0 * std::f64::consts::PI * j as f64 / nt as f64;
                nodes.push([r * th.cos(), r * th.sin()]);
            }
        }
        let id = |i: usize, j: usize| i * nt + (j % nt);
        let mut triangles = Vec::new();
        for i in 0..nr {
            for j in 0..nt {
                triangles.push([id(i, j), id(i, j + 1), id(i + 1, j + 1)]);
                triangles.push([id(i, j), id(i + 1, j + 1), id(i + 1, j)]);
            }
        }
        let mut boundary_edges = Vec::new();
        for j in 0..nt {
            boundary_edges.push((id(0, j), id(0, j + 1), 2));
            boundary_edges.push((id(nr, j), id(nr, j + 1), 1));
        }
        Mesh::new(nodes, triangles, boundary_edges).unwrap()
    }

    #[test]
    fn annulus_satisfies_euler_formula_with_hole() {
        let mesh = annulus(4, 24);
        let edges = brute_force_edges(&mesh);
        let euler = mesh.nodes.len() as i64 - edges.len() as i64 + mesh.triangles.len() as i64;
        assert_eq!(euler, 0);
        let shoelace: f64 = (0..mesh.triangles.len()).map(|i| mesh.triangle_area(i)).sum();
        assert!(shoelace > 0.0);
    }

    #[test]
    fn clockwise_triangles_are_reoriented() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let mesh = Mesh::new(
            nodes,
            vec![[0, 2, 1]],
            vec![(0, 1, 1), (1, 2, 1), (2, 0, 1)],
        )
        .unwrap();
        assert!(mesh.triangle_area(0) > 0.0);
    }

    #[test]
    fn degenerate_triangle_is_rejected() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        let err = Mesh::new(nodes, vec![[0, 1, 2]], vec![]);
        assert!(matches!(err, Err(MeshError::DegenerateTriangle { index: 0 })));
    }

    #[test]
    fn dangling_node_is_rejected() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]];
        let err = Mesh::new(
            nodes,
            vec![[0, 1, 2]],
            vec![(0, 1, 1), (1, 2, 1), (2, 0, 1)],
        );
        assert!(matches!(err, Err(MeshError::DanglingNode { index: 3 })));
    }

    #[test]
    fn unmarked_boundary_edge_is_rejected() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let err = Mesh::new(nodes, vec![[0, 1, 2]], vec![(0, 1, 1), (1, 2, 1)]);
        assert!(matches!(err, Err(MeshError::UnmarkedBoundaryEdge { .. })));
    }

    #[test]
    fn interior_edge_listed_as_boundary_is_rejected() {
        // The cell diagonal (0, 3) is shared by both triangles.
        let mesh = unit_square(1);
        let mut edges = mesh.boundary_edges.clone();
        edges.push((0, 3, 1));
        let err = Mesh::new(mesh.nodes.clone(), mesh.triangles.clone(), edges);
        assert!(matches!(err, Err(MeshError::BadBoundaryEdge { .. })));
    }

    #[test]
    fn parse_reports_line_numbers() {
        let text = "nodes 2\n0 0\n1 zebra\n";
        match Mesh::parse(text) {
            Err(MeshError::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("zebra"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_accepts_comments_and_blank_lines() {
        let text = "# a triangle\n\nnodes 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2\nboundary_edges 3\n0 1 1\n1 2 1\n2 0 1\n";
        let mesh = Mesh::parse(text).unwrap();
        assert_eq!(mesh.nodes.len(), 3);
        assert_eq!(mesh.h_max, 2.0_f64.sqrt());
    }

    #[test]
    fn serialize_parse_roundtrip_is_identical() {
        for mesh in [unit_square(3), annulus(2, 8)] {
            let text = mesh.serialize();
            let back = Mesh::parse(&text).unwrap();
            assert_eq!(mesh, back);
            assert_eq!(text, back.serialize());
        }
    }

    #[test]
    fn roundtrip_preserves_awkward_coordinates() {
        let nodes = vec![
            [0.1 + 0.2, -1.0e-17],
            [1.0, 0.0],
            [f64::MIN_POSITIVE, 1.0],
        ];
        let mesh = Mesh::new(
            nodes,
            vec![[0, 1, 2]],
            vec![(0, 1, 1), (1, 2, 1), (2, 0, 1)],
        )
        .unwrap();
        let back = Mesh::parse(&mesh.serialize()).unwrap();
        assert_eq!(mesh.nodes, back.nodes);
    }
}
