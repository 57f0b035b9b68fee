//! Triangle quadrature in barycentric coordinates. Weights are normalized to
//! sum to 1, so an integral over a physical triangle is `area * sum(w_q f(x_q))`.

/// Quadrature rule on the triangle, points stored as barycentric triples.
#[derive(Debug, Clone)]
pub struct TriQuadRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriQuadRule {
    /// Seven-point rule exact for polynomials of total degree 5.
    ///
    /// Centroid weight 9/40; the two orbits of three points sit at barycentric
    /// (1-2a, a, a) with a = (6 -+ sqrt(15))/21 and weights (155 -+ sqrt(15))/1200.
    pub fn degree5() -> TriQuadRule {
        let s = 15.0_f64.sqrt();
        let a1 = (6.0 - s) / 21.0;
        let a2 = (6.0 + s) / 21.0;
        let w1 = (155.0 - s) / 1200.0;
        let w2 = (155.0 + s) / 1200.0;
        let third = 1.0 / 3.0;
        let mut points = vec![[third, third, third]];
        let mut weights = vec![9.0 / 40.0];
        for &(a, w) in &[(a1, w1), (a2, w2)] {
            let b = 1.0 - 2.0 * a;
            points.push([b, a, a]);
            points.push([a, b, a]);
            points.push([a, a, b]);
            weights.extend_from_slice(&[w, w, w]);
        }
        TriQuadRule { points, weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}
