//! Ensemble simulation of 2D incompressible flows.
//!
//! A group of related flow problems (different viscosities, initial
//! conditions, forcings) is advanced with a semi-implicit scheme whose
//! implicit operator is shared by every member: each time step factors one
//! coupled velocity-pressure matrix and back-substitutes one right-hand side
//! per member. Member-specific physics (viscosity deviation from the mean and
//! convection by the deviation from the mean velocity) is treated explicitly.

pub mod analysis;
pub mod analytic;
pub mod config;
pub mod ensemble;
pub mod fem;
pub mod field;
pub mod mesh;
pub mod quadrature;
pub mod runner;
pub mod solver;
pub mod sparse;
