//! Run diagnostics: kinetic energy, discrete error norms against a known
//! field, and convergence-rate tables.

use std::fmt;

use thiserror::Error;

use crate::fem::{velocity_at, velocity_grad_at, TaylorHoodSpace};
use crate::field::{Field2, FieldRef};
use crate::quadrature::TriQuadRule;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("need {expected} values but got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("mesh sizes must be positive and strictly decreasing")]
    NonMonotoneMesh,
    #[error("error value {0} must be positive and finite to take a rate")]
    BadErrorValue(f64),
}

fn physical_point(space: &TaylorHoodSpace, tri: usize, bary: [f64; 3]) -> [f64; 2] {
    let mesh = space.mesh();
    let t = mesh.triangles[tri];
    let mut x = [0.0; 2];
    for (k, &node) in t.iter().enumerate() {
        let v = mesh.nodes[node];
        x[0] += bary[k] * v[0];
        x[1] += bary[k] * v[1];
    }
    x
}

/// Kinetic energy `0.5 * integral |u_h|^2` of a discrete velocity.
///
/// Panics if the coefficient vector does not match the space.
pub fn kinetic_energy(space: &TaylorHoodSpace, velocity: &[f64]) -> f64 {
    assert_eq!(velocity.len(), space.n_velocity(), "velocity length");
    let rule = TriQuadRule::degree5();
    let mut acc = 0.0;
    for tri in 0..space.mesh().triangles.len() {
        let area = space.mesh().triangle_area(tri);
        for (q, &w) in rule.weights.iter().enumerate() {
            let u = velocity_at(space, velocity, tri, rule.points[q]);
            acc += w * area * (u[0] * u[0] + u[1] * u[1]);
        }
    }
    0.5 * acc
}

/// `integral |f(x, t)|^2` of a pointwise field over the mesh.
pub fn field_l2_norm_sq(space: &TaylorHoodSpace, field: &dyn Field2, time: f64) -> f64 {
    let rule = TriQuadRule::degree5();
    let mut acc = 0.0;
    for tri in 0..space.mesh().triangles.len() {
        let area = space.mesh().triangle_area(tri);
        for (q, &w) in rule.weights.iter().enumerate() {
            let x = physical_point(space, tri, rule.points[q]);
            let f = field.at(x[0], x[1], time);
            acc += w * area * (f[0] * f[0] + f[1] * f[1]);
        }
    }
    acc
}

/// Discrete error norms of one velocity trajectory against a reference
/// field: `max_n |e^n|` in L2 and `(sum_n dt |grad e^n|^2)^(1/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub linf_l2: f64,
    pub l2_h1: f64,
}

/// Accumulates the two error norms one time level at a time, so a run never
/// has to store its trajectory.
pub struct ErrorAccumulator<'s> {
    space: &'s TaylorHoodSpace,
    reference: FieldRef,
    rule: TriQuadRule,
    max_l2_sq: f64,
    grad_accum: f64,
}

impl<'s> ErrorAccumulator<'s> {
    pub fn new(space: &'s TaylorHoodSpace, reference: FieldRef) -> Self {
        Self {
            space,
            reference,
            rule: TriQuadRule::degree5(),
            max_l2_sq: 0.0,
            grad_accum: 0.0,
        }
    }

    /// Folds in the velocity at one time level; `dt` weights its gradient
    /// error in the time integral. Include every level, the initial one too.
    pub fn add_sample(&mut self, velocity: &[f64], time: f64, dt: f64) {
        assert_eq!(velocity.len(), self.space.n_velocity(), "velocity length");
        let mut l2_sq = 0.0;
        let mut h1_sq = 0.0;
        for tri in 0..self.space.mesh().triangles.len() {
            let area = self.space.mesh().triangle_area(tri);
            for (q, &w) in self.rule.weights.iter().enumerate() {
                let bary = self.rule.points[q];
                let x = physical_point(self.space, tri, bary);
                let uh = velocity_at(self.space, velocity, tri, bary);
                let gh = velocity_grad_at(self.space, velocity, tri, bary);
                let ue = self.reference.at(x[0], x[1], time);
                let ge = self.reference.grad_at(x[0], x[1], time);
                let e = [uh[0] - ue[0], uh[1] - ue[1]];
                l2_sq += w * area * (e[0] * e[0] + e[1] * e[1]);
                for r in 0..2 {
                    for c in 0..2 {
                        let d = gh[r][c] - ge[r][c];
                        h1_sq += w * area * d * d;
                    }
                }
            }
        }
        self.max_l2_sq = self.max_l2_sq.max(l2_sq);
        self.grad_accum += dt * h1_sq;
    }

    pub fn norms(&self) -> ErrorNorms {
        ErrorNorms {
            linf_l2: self.max_l2_sq.sqrt(),
            l2_h1: self.grad_accum.sqrt(),
        }
    }
}

/// Per-pair rates `ln(e_coarse / e_fine) / ln(h_coarse / h_fine)` for a
/// refinement sequence ordered coarse to fine.
pub fn convergence_rates(h_values: &[f64], errors: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    if h_values.len() != errors.len() {
        return Err(AnalysisError::LengthMismatch {
            expected: h_values.len(),
            found: errors.len(),
        });
    }
    for pair in h_values.windows(2) {
        if !(pair[0] > pair[1] && pair[1] > 0.0) {
            return Err(AnalysisError::NonMonotoneMesh);
        }
    }
    if let Some(&h) = h_values.first() {
        if !(h > 0.0) {
            return Err(AnalysisError::NonMonotoneMesh);
        }
    }
    for &e in errors {
        if !(e > 0.0) || !e.is_finite() {
            return Err(AnalysisError::BadErrorValue(e));
        }
    }
    Ok(h_values
        .windows(2)
        .zip(errors.windows(2))
        .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect())
}

/// Error norms of every member over a refinement sequence, with rate
/// extraction and an aligned text rendering.
pub struct ConvergenceStudy {
    /// Nominal mesh sizes, coarse to fine.
    pub h_values: Vec<f64>,
    /// `levels[level][member]`, filled one refinement level at a time.
    pub levels: Vec<Vec<ErrorNorms>>,
}

impl ConvergenceStudy {
    pub fn new() -> Self {
        Self {
            h_values: Vec::new(),
            levels: Vec::new(),
        }
    }

    /// Appends one refinement level with its per-member norms.
    pub fn push_level(&mut self, h: f64, norms: Vec<ErrorNorms>) {
        if let Some(previous) = self.levels.first() {
            assert_eq!(norms.len(), previous.len(), "member count per level");
        }
        self.h_values.push(h);
        self.levels.push(norms);
    }

    pub fn member_count(&self) -> usize {
        self.levels.first().map_or(0, Vec::len)
    }

    pub fn linf_series(&self, member: usize) -> Vec<f64> {
        self.levels.iter().map(|l| l[member].linf_l2).collect()
    }

    pub fn h1_series(&self, member: usize) -> Vec<f64> {
        self.levels.iter().map(|l| l[member].l2_h1).collect()
    }

    pub fn linf_rates(&self, member: usize) -> Result<Vec<f64>, AnalysisError> {
        convergence_rates(&self.h_values, &self.linf_series(member))
    }

    pub fn h1_rates(&self, member: usize) -> Result<Vec<f64>, AnalysisError> {
        convergence_rates(&self.h_values, &self.h1_series(member))
    }
}

impl Default for ConvergenceStudy {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Display for ConvergenceStudy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>6}  {:>6}  {:>12}  {:>6}  {:>12}  {:>6}",
            "1/h", "member", "max_l2", "rate", "l2_h1", "rate"
        )?;
        for member in 0..self.member_count() {
            let linf_rates = self.linf_rates(member).unwrap_or_default();
            let h1_rates = self.h1_rates(member).unwrap_or_default();
            for (level, row) in self.levels.iter().enumerate() {
                let rate = |rates: &[f64]| {
                    if level == 0 || rates.len() < level {
                        "-".to_string()
                    } else {
                        format!("{:.2}", rates[level - 1])
                    }
                };
                writeln!(
                    f,
                    "{:>6.0}  {:>6}  {:>12.4e}  {:>6}  {:>12.4e}  {:>6}",
                    1.0 / self.h_values[level],
                    member + 1,
                    row[member].linf_l2,
                    rate(&linf_rates),
                    row[member].l2_h1,
                    rate(&h1_rates),
                )?;
            }
        }
        Ok(())
    }
}
