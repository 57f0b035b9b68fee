//! Pointwise vector fields of space and time, the currency between analytic
//! solutions, boundary data, forcing terms, and the finite element layer.

use std::sync::Arc;

/// A velocity-valued field (x, y, t) -> (u, v).
///
/// `grad_at` defaults to central differences; fields with closed-form
/// gradients override it so error norms lose nothing to differencing.
pub trait Field2: Send + Sync {
    fn at(&self, x: f64, y: f64, t: f64) -> [f64; 2];

    /// Jacobian rows are gradients of the components:
    /// `[[du/dx, du/dy], [dv/dx, dv/dy]]`.
    fn grad_at(&self, x: f64, y: f64, t: f64) -> [[f64; 2]; 2] {
        let h = 1e-6;
        let px = self.at(x + h, y, t);
        let mx = self.at(x - h, y, t);
        let py = self.at(x, y + h, t);
        let my = self.at(x, y - h, t);
        [
            [(px[0] - mx[0]) / (2.0 * h), (py[0] - my[0]) / (2.0 * h)],
            [(px[1] - mx[1]) / (2.0 * h), (py[1] - my[1]) / (2.0 * h)],
        ]
    }
}

impl<F> Field2 for F
where
    F: Fn(f64, f64, f64) -> [f64; 2] + Send + Sync,
{
    fn at(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        self(x, y, t)
    }
}

/// Shared handle used wherever a configuration owns fields.
pub type FieldRef = Arc<dyn Field2>;

pub fn zero_field() -> FieldRef {
    Arc::new(|_: f64, _: f64, _: f64| [0.0, 0.0])
}

pub fn constant_field(u: f64, v: f64) -> FieldRef {
    Arc::new(move |_: f64, _: f64, _: f64| [u, v])
}

/// A stored coefficient field scaled by a constant, handy for perturbed
/// initial conditions built from one base field.
pub fn scaled_field(base: FieldRef, factor: f64) -> FieldRef {
    Arc::new(move |x: f64, y: f64, t: f64| {
        let v = base.at(x, y, t);
        [factor * v[0], factor * v[1]]
    })
}
