//! Closed-form fields used as initial data, boundary data, forcing terms,
//! and error references.

use crate::fem::{
    apply_dirichlet, assemble_divergence, assemble_load, assemble_saddle, assemble_stiffness,
    BoundaryData, TaylorHoodSpace, PINNED_PRESSURE_NODE,
};
use crate::field::{zero_field, Field2};
use crate::solver::{factorize, SolverError};
use crate::sparse::SparseMatrix;

use std::f64::consts::PI;

/// Decaying array of counter-rotating vortices on the unit square.
///
/// With frequency `omega` and decay time `tau`:
/// `u = (-cos(omega pi x) sin(omega pi y), sin(omega pi x) cos(omega pi y)) E(t)`
/// with `E(t) = exp(-2 omega^2 pi^2 t / tau)`, and pressure
/// `p = -(cos(2 omega pi x) + cos(2 omega pi y)) E(t)^2 / 4`.
///
/// The pair solves the incompressible momentum equation with viscosity
/// `1/tau` and no forcing; for other viscosities see [`GreenTaylor::forcing`].
#[derive(Debug, Clone, Copy)]
pub struct GreenTaylor {
    pub omega: f64,
    pub tau: f64,
}

impl GreenTaylor {
    pub fn new(omega: f64, tau: f64) -> Self {
        assert!(tau > 0.0, "decay time must be positive");
        Self { omega, tau }
    }

    /// Amplitude factor exp(-2 omega^2 pi^2 t / tau) shared by both components.
    pub fn decay(&self, t: f64) -> f64 {
        (-2.0 * self.omega * self.omega * PI * PI * t / self.tau).exp()
    }

    pub fn pressure(&self, x: f64, y: f64, t: f64) -> f64 {
        let k = self.omega * PI;
        let e = self.decay(t);
        -0.25 * ((2.0 * k * x).cos() + (2.0 * k * y).cos()) * e * e
    }

    /// Forcing that makes this field solve the momentum equation at
    /// viscosity `nu`: `f = 2 omega^2 pi^2 (nu - 1/tau) u`. Identically zero
    /// when `nu = 1/tau`.
    pub fn forcing(&self, nu: f64) -> GreenTaylorForcing {
        GreenTaylorForcing { base: *self, nu }
    }
}

impl Field2 for GreenTaylor {
    fn at(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let k = self.omega * PI;
        let e = self.decay(t);
        [
            -(k * x).cos() * (k * y).sin() * e,
            (k * x).sin() * (k * y).cos() * e,
        ]
    }

    fn grad_at(&self, x: f64, y: f64, t: f64) -> [[f64; 2]; 2] {
        let k = self.omega * PI;
        let e = self.decay(t);
        let (sx, cx) = (k * x).sin_cos();
        let (sy, cy) = (k * y).sin_cos();
        [
            [k * sx * sy * e, -k * cx * cy * e],
            [k * cx * cy * e, -k * sx * sy * e],
        ]
    }
}

/// Residual forcing for a [`GreenTaylor`] field at an off-design viscosity.
#[derive(Debug, Clone, Copy)]
pub struct GreenTaylorForcing {
    base: GreenTaylor,
    nu: f64,
}

impl Field2 for GreenTaylorForcing {
    fn at(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let k2 = 2.0 * self.base.omega * self.base.omega * PI * PI;
        let coef = k2 * (self.nu - 1.0 / self.base.tau);
        let u = self.base.at(x, y, t);
        [coef * u[0], coef * u[1]]
    }

    fn grad_at(&self, x: f64, y: f64, t: f64) -> [[f64; 2]; 2] {
        let k2 = 2.0 * self.base.omega * self.base.omega * PI * PI;
        let coef = k2 * (self.nu - 1.0 / self.base.tau);
        let g = self.base.grad_at(x, y, t);
        [
            [coef * g[0][0], coef * g[0][1]],
            [coef * g[1][0], coef * g[1][1]],
        ]
    }
}

/// Steady counterclockwise body force `6 (1 - x^2 - y^2) (-y, x)`, zero on
/// the unit circle and at the origin, used to stir flow between cylinders.
#[derive(Debug, Clone, Copy)]
pub struct RotationalForcing;

impl Field2 for RotationalForcing {
    fn at(&self, x: f64, y: f64, _t: f64) -> [f64; 2] {
        let s = 6.0 * (1.0 - x * x - y * y);
        [-s * y, s * x]
    }

    fn grad_at(&self, x: f64, y: f64, _t: f64) -> [[f64; 2]; 2] {
        [
            [12.0 * x * y, -6.0 * (1.0 - x * x - 3.0 * y * y)],
            [6.0 * (1.0 - 3.0 * x * x - y * y), -12.0 * x * y],
        ]
    }
}

/// Solves the steady Stokes problem at viscosity `nu` with forcing `f` and
/// homogeneous no-slip walls, returning velocity coefficients for use as an
/// initial condition.
pub fn stokes_initial_condition(
    space: &TaylorHoodSpace,
    f: &dyn Field2,
    nu: f64,
) -> Result<Vec<f64>, SolverError> {
    assert!(nu > 0.0, "viscosity must be positive");
    let k = assemble_stiffness(space);
    let a = SparseMatrix::linear_combination(&[(nu, &k)]).expect("single-term combination");
    let b = assemble_divergence(space);
    let mut saddle = assemble_saddle(&a, &b, &b.transpose(), PINNED_PRESSURE_NODE);
    let mut rhs = vec![0.0; space.n_coupled()];
    rhs[..space.n_velocity()].copy_from_slice(&assemble_load(space, f, 0.0));
    let mut rhss = vec![rhs];
    let bc = BoundaryData::uniform(zero_field());
    apply_dirichlet(&mut saddle, &mut rhss, space, &bc, 0.0)
        .expect("uniform boundary data covers every tag");
    let system = factorize(&saddle)?;
    let solution = system.solve(&rhss[0])?;
    Ok(solution[..space.n_velocity()].to_vec())
}

/// The nonlinear residual `u_t + (u . grad) u - nu lap(u) + grad p - f` of an
/// analytic velocity/pressure pair, evaluated by central differences. Test
/// oracle quality, not performance.
pub fn momentum_residual_fd(
    u: &dyn Field2,
    pressure: &dyn Fn(f64, f64, f64) -> f64,
    f: &dyn Field2,
    nu: f64,
    x: f64,
    y: f64,
    t: f64,
) -> [f64; 2] {
    let h = 1e-4;
    let val = u.at(x, y, t);
    let up = u.at(x, y, t + h);
    let um = u.at(x, y, t - h);
    let xp = u.at(x + h, y, t);
    let xm = u.at(x - h, y, t);
    let yp = u.at(x, y + h, t);
    let ym = u.at(x, y - h, t);
    let fv = f.at(x, y, t);
    let mut out = [0.0; 2];
    for c in 0..2 {
        let ut = (up[c] - um[c]) / (2.0 * h);
        let ux = (xp[c] - xm[c]) / (2.0 * h);
        let uy = (yp[c] - ym[c]) / (2.0 * h);
        let lap = (xp[c] - 2.0 * val[c] + xm[c]) / (h * h)
            + (yp[c] - 2.0 * val[c] + ym[c]) / (h * h);
        let grad_p = if c == 0 {
            (pressure(x + h, y, t) - pressure(x - h, y, t)) / (2.0 * h)
        } else {
            (pressure(x, y + h, t) - pressure(x, y - h, t)) / (2.0 * h)
        };
        out[c] = ut + val[0] * ux + val[1] * uy - nu * lap + grad_p - fv[c];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square;
    use crate::sparse::norm2;

    fn sample_points() -> Vec<(f64, f64)> {
        // Deterministic scatter of interior points away from FD stencil edges.
        let mut pts = Vec::new();
        for i in 1..11 {
            for j in 1..11 {
                let x = 0.05 + 0.09 * i as f64 + 0.003 * j as f64;
                let y = 0.04 + 0.088 * j as f64 + 0.002 * i as f64;
                pts.push((x % 0.98, y % 0.98));
            }
        }
        pts
    }

    #[test]
    fn velocity_and_pressure_values_at_reference_points() {
        let gt = GreenTaylor::new(1.0, 4.0);
        let u = gt.at(0.5, 0.5, 0.0);
        assert!(u[0].abs() < 1e-15 && u[1].abs() < 1e-15);
        assert!((gt.pressure(0.0, 0.0, 0.0) + 0.5).abs() < 1e-15);
        // Quarter-cell point: u = (-cos(pi/4) sin(pi/4), ...) = (-1/2, 1/2).
        let q = gt.at(0.25, 0.25, 0.0);
        assert!((q[0] + 0.5).abs() < 1e-15);
        assert!((q[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn field_is_divergence_free() {
        let gt = GreenTaylor::new(2.0, 1.7);
        for &(x, y) in &sample_points() {
            let g = gt.grad_at(x, y, 0.3);
            assert!((g[0][0] + g[1][1]).abs() < 1e-12);
            // Closed-form gradient against finite differences.
            let h = 1e-6;
            let fd = ((gt.at(x + h, y, 0.3)[0] - gt.at(x - h, y, 0.3)[0]) / (2.0 * h),
                      (gt.at(x, y + h, 0.3)[1] - gt.at(x, y - h, 0.3)[1]) / (2.0 * h));
            assert!((g[0][0] - fd.0).abs() < 1e-5);
            assert!((g[1][1] - fd.1).abs() < 1e-5);
        }
    }

    #[test]
    fn decay_is_self_similar() {
        let gt = GreenTaylor::new(1.0, 4.0);
        let t = 0.7;
        let e = (-2.0 * PI * PI * t / 4.0).exp();
        for &(x, y) in &sample_points()[..20] {
            let u0 = gt.at(x, y, 0.0);
            let ut = gt.at(x, y, t);
            assert!((ut[0] - e * u0[0]).abs() < 1e-14);
            assert!((ut[1] - e * u0[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn design_viscosity_needs_no_forcing() {
        let gt = GreenTaylor::new(1.0, 4.0);
        let f = gt.forcing(0.25);
        for &(x, y) in &sample_points()[..20] {
            let v = f.at(x, y, 0.5);
            assert!(v[0].abs() < 1e-14 && v[1].abs() < 1e-14);
        }
    }

    #[test]
    fn momentum_residual_vanishes_with_matching_forcing() {
        // Both at the design viscosity and away from it with the residual forcing.
        for (tau, nu) in [(4.0, 0.25), (4.0, 0.01), (2.5, 0.49)] {
            let gt = GreenTaylor::new(1.0, tau);
            let f = gt.forcing(nu);
            let p = |x: f64, y: f64, t: f64| gt.pressure(x, y, t);
            for &(x, y) in &sample_points()[..30] {
                let r = momentum_residual_fd(&gt, &p, &f, nu, x, y, 0.2);
                assert!(
                    r[0].abs() < 2e-5 && r[1].abs() < 2e-5,
                    "residual {r:?} at ({x}, {y}), tau {tau}, nu {nu}"
                );
            }
        }
    }

    #[test]
    fn rotational_forcing_reference_values() {
        let f = RotationalForcing;
        assert_eq!(f.at(0.0, 0.0, 0.0), [0.0, 0.0]);
        // Zero on the unit circle.
        let on_circle = f.at(0.6, 0.8, 1.0);
        assert!(on_circle[0].abs() < 1e-14 && on_circle[1].abs() < 1e-14);
        // 6x(1 - x^2 - y^2) at (0.5, 0) is 3 * 0.75.
        let v = f.at(0.5, 0.0, 0.0);
        assert!((v[0] - 0.0).abs() < 1e-15);
        assert!((v[1] - 2.25).abs() < 1e-15);
    }

    #[test]
    fn stokes_initial_condition_zero_forcing_is_zero() {
        let space = crate::fem::TaylorHoodSpace::new(unit_square(4));
        let u = stokes_initial_condition(&space, &*zero_field(), 0.02).unwrap();
        assert!(norm2(&u) < 1e-12);
    }

    #[test]
    fn stokes_initial_condition_is_discretely_divergence_free() {
        let space = crate::fem::TaylorHoodSpace::new(unit_square(6));
        let u = stokes_initial_condition(&space, &RotationalForcing, 0.1).unwrap();
        assert!(norm2(&u) > 1e-3);
        let b = assemble_divergence(&space);
        let div = b.matvec(&u);
        assert!(norm2(&div) < 1e-10 * norm2(&u).max(1.0));
        // No-slip boundary.
        for node in 0..space.n_p2() {
            if space.boundary_tag(node).is_some() {
                assert_eq!(u[2 * node], 0.0);
                assert_eq!(u[2 * node + 1], 0.0);
            }
        }
    }

    #[test]
    fn rotational_forcing_gradient_matches_differences() {
        let f = RotationalForcing;
        let pts = [(0.3, -0.2), (0.7, 0.1), (-0.4, -0.5)];
        let h = 1e-6;
        for &(x, y) in &pts {
            let g = f.grad_at(x, y, 0.0);
            for c in 0..2 {
                let dx = (f.at(x + h, y, 0.0)[c] - f.at(x - h, y, 0.0)[c]) / (2.0 * h);
                let dy = (f.at(x, y + h, 0.0)[c] - f.at(x, y - h, 0.0)[c]) / (2.0 * h);
                assert!((g[c][0] - dx).abs() < 1e-8, "d{c}/dx at ({x},{y})");
                assert!((g[c][1] - dy).abs() < 1e-8, "d{c}/dy at ({x},{y})");
            }
        }
    }

}
