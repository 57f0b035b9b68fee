//! Cross-checks of the assembled operators and the time step against the
//! dense quadrature oracle in `common`.
//!
//! Matrix comparisons run on coefficient data, so every integrand is
//! piecewise polynomial of degree at most five and both quadrature routes
//! are exact: disagreement beyond roundoff means an assembly defect, not a
//! quadrature artifact.

mod common;

use std::sync::Arc;

use approx::assert_relative_eq;
use common::*;
use flowens::analytic::GreenTaylor;
use flowens::ensemble::{EnsembleConfig, EnsembleStepper, InitialCondition, StepOutcome};
use flowens::fem::{
    assemble_convection, assemble_divergence, assemble_load, assemble_mass, assemble_saddle,
    assemble_stiffness, pressure_integral_weights, skew_convection_form, BoundaryData,
    TaylorHoodSpace,
};
use flowens::field::{scaled_field, zero_field, FieldRef};
use flowens::mesh::unit_square;
use flowens::solver::factorize;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn square_space(m: usize) -> TaylorHoodSpace {
    TaylorHoodSpace::new(unit_square(m))
}

#[test]
fn mass_and_stiffness_match_dense_quadrature() {
    let space = square_space(3);
    let mass = assemble_mass(&space);
    let stiffness = assemble_stiffness(&space);
    let dense_m = dense_mass(&space);
    let dense_k = dense_stiffness(&space);
    assert!(max_abs_diff(&dense_m, &mass) <= 1e-14 * max_abs(&dense_m));
    assert!(max_abs_diff(&dense_k, &stiffness) <= 1e-13 * max_abs(&dense_k));
}

#[test]
fn convection_matches_dense_quadrature() {
    let space = square_space(3);
    let wave = GreenTaylor::new(1.0, 5.0);
    let w = space.interpolate(&wave, 0.3);
    let n = assemble_convection(&space, &w).expect("coefficient length matches");
    let dense_n = dense_convection(&space, &w);
    assert!(max_abs_diff(&dense_n, &n) <= 1e-13 * max_abs(&dense_n));
}

#[test]
fn divergence_and_pressure_weights_match_dense_quadrature() {
    let space = square_space(3);
    let b = assemble_divergence(&space);
    let dense_b = dense_divergence(&space);
    assert!(max_abs_diff(&dense_b, &b) <= 1e-13 * max_abs(&dense_b));

    let weights = pressure_integral_weights(&space);
    let oracle = dense_pressure_weights(&space);
    for (a, b) in weights.iter().zip(&oracle) {
        assert_relative_eq!(a, b, max_relative = 1e-13, epsilon = 1e-16);
    }
    // Unit square: the basis integrals sum to the domain area.
    assert_relative_eq!(weights.iter().sum::<f64>(), 1.0, max_relative = 1e-13);
}

#[test]
fn load_vector_matches_dense_quadrature() {
    // Cubic force paired with quadratic test functions stays within the
    // exactness degree of the assembly rule.
    let space = square_space(3);
    let forcing = flowens::analytic::RotationalForcing;
    let load = assemble_load(&space, &forcing, 0.0);
    let oracle = dense_load(&space, &forcing, 0.0);
    let scale = oracle.amax();
    for (a, b) in load.iter().zip(oracle.iter()) {
        assert!((a - b).abs() <= 1e-13 * scale);
    }
}

#[test]
fn saddle_assembly_matches_dense_blocks() {
    let space = square_space(2);
    let nu = 0.37;
    let w = space.interpolate(&GreenTaylor::new(1.0, 2.0), 0.1);
    let mass = assemble_mass(&space);
    let stiffness = assemble_stiffness(&space);
    let conv = assemble_convection(&space, &w).expect("coefficient length matches");
    let a = flowens::sparse::SparseMatrix::linear_combination(&[
        (10.0, &mass),
        (nu, &stiffness),
        (1.0, &conv),
    ])
    .expect("blocks share the velocity pattern");
    let b = assemble_divergence(&space);
    let bt = b.transpose();
    let saddle = assemble_saddle(&a, &b, &bt, 0);

    let dense_a = &dense_mass(&space) * 10.0 + dense_stiffness(&space) * nu + dense_convection(&space, &w);
    let dense_s = dense_saddle(&dense_a, &dense_divergence(&space));
    assert!(max_abs_diff(&dense_s, &saddle) <= 1e-12 * max_abs(&dense_s));
}

/// After one step of a two-member ensemble, each member's velocity and
/// pressure satisfy the discrete momentum identity at every unconstrained
/// velocity row: transient, shared linearized convection, and shared
/// viscosity on the left; load, previous mass, deviation transport, and the
/// viscosity-deviation correction on the right. All operators here come
/// from the dense oracle route.
#[test]
fn momentum_identity_holds_after_one_step() {
    let m = 6;
    let space = square_space(m);
    let dt = 0.05;
    let viscosities = [0.2, 0.3];
    let exact: FieldRef = Arc::new(GreenTaylor::new(1.0, 4.0));
    // Cubic forcing keeps the load integrand inside both rules' exactness
    // degree, so the identity is free of quadrature differences.
    let config = EnsembleConfig::new(
        viscosities.to_vec(),
        vec![
            InitialCondition::Field(scaled_field(exact.clone(), 1.001)),
            InitialCondition::Field(scaled_field(exact.clone(), 0.999)),
        ],
        vec![
            Arc::new(flowens::analytic::RotationalForcing) as FieldRef,
            Arc::new(flowens::analytic::RotationalForcing) as FieldRef,
        ],
        BoundaryData::uniform(exact),
        dt,
        1.0,
    )
    .expect("valid configuration");
    let mut stepper = EnsembleStepper::new(&space, config.clone()).expect("stepper builds");
    let state0 = stepper.initial_state().expect("initial state");
    let state1 = match stepper.step(&state0).expect("step succeeds") {
        StepOutcome::Advanced { state, .. } => state,
        StepOutcome::Halted { .. } => panic!("healthy state must advance"),
    };

    let mass = dense_mass(&space);
    let stiffness = dense_stiffness(&space);
    let divergence = dense_divergence(&space);
    let convection = dense_convection(&space, &state0.mean_velocity);
    let mean_nu = 0.5 * (viscosities[0] + viscosities[1]);

    let interior: Vec<usize> = (0..space.n_p2())
        .filter(|&node| space.boundary_tag(node).is_none())
        .flat_map(|node| [space.velocity_dof(node, 0), space.velocity_dof(node, 1)])
        .collect();
    assert!(!interior.is_empty());

    for member in 0..2 {
        let u0 = DVector::from_column_slice(&state0.velocities[member]);
        let u1 = DVector::from_column_slice(&state1.velocities[member]);
        let p1 = DVector::from_column_slice(&state1.pressures[member]);
        let deviation: Vec<f64> = state0.velocities[member]
            .iter()
            .zip(&state0.mean_velocity)
            .map(|(u, mean)| u - mean)
            .collect();
        let transport = dense_convection(&space, &deviation) * &u0;
        let load = dense_load(&space, config.forcings[member].as_ref(), dt);
        let nu_diff = viscosities[member] - mean_nu;

        let lhs = &mass * &u1 / dt + &convection * &u1 + &stiffness * &u1 * mean_nu
            - divergence.transpose() * &p1;
        let rhs = load + &mass * &u0 / dt - transport - &stiffness * &u0 * nu_diff;
        let scale = lhs.amax().max(rhs.amax());
        let worst = interior
            .iter()
            .map(|&row| (lhs[row] - rhs[row]).abs())
            .fold(0.0f64, f64::max);
        assert!(
            worst <= 1e-11 * scale,
            "member {member}: momentum residual {worst:.3e} at scale {scale:.3e}"
        );

        // Divergence rows of the same solve: the new velocity is discretely
        // divergence-free away from the pinned gauge row.
        let div = &divergence * &u1;
        let worst_div = (0..space.n_pressure())
            .filter(|&q| q != 0)
            .map(|q| div[q].abs())
            .fold(0.0f64, f64::max);
        assert!(
            worst_div <= 1e-10 * (1.0 + u1.amax()),
            "member {member}: divergence residual {worst_div:.3e}"
        );
    }
}

/// A one-member ensemble must reproduce the plain semi-implicit scheme:
/// deviation transport and viscosity correction vanish, leaving the dense
/// oracle stepper as an independent reference for several steps.
#[test]
fn single_member_run_matches_dense_oracle() {
    let space = square_space(4);
    let dt = 0.05;
    let exact: FieldRef = Arc::new(GreenTaylor::new(1.0, 4.0));
    let config = EnsembleConfig::new(
        vec![0.25],
        vec![InitialCondition::Field(exact.clone())],
        vec![zero_field()],
        BoundaryData::uniform(exact.clone()),
        dt,
        1.0,
    )
    .expect("valid configuration");
    let mut stepper = EnsembleStepper::new(&space, config).expect("stepper builds");
    let mut state = stepper.initial_state().expect("initial state");
    let oracle = SingleFlowOracle::new(&space, 0.25, dt);

    for step in 1..=3 {
        let t_next = dt * step as f64;
        let (ref_u, ref_p) = oracle.step(&state.velocities[0], t_next, exact.as_ref());
        state = match stepper.step(&state).expect("step succeeds") {
            StepOutcome::Advanced { state, .. } => state,
            StepOutcome::Halted { .. } => panic!("healthy state must advance"),
        };
        let u_err = l2_diff(&state.velocities[0], &ref_u) / l2(&ref_u);
        let p_err = l2_diff(&state.pressures[0], &ref_p) / (1.0 + l2(&ref_p));
        assert!(u_err <= 1e-10, "step {step}: velocity deviates by {u_err:.3e}");
        assert!(p_err <= 1e-10, "step {step}: pressure deviates by {p_err:.3e}");
    }
}

#[test]
fn factored_solve_reproduces_random_vectors() {
    let space = square_space(3);
    let a = assemble_mass(&space);
    let system = factorize(&a).expect("mass matrix factorizes");
    let mut rng = StdRng::seed_from_u64(0x5eed);
    for _ in 0..5 {
        let x: Vec<f64> = (0..a.nrows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = a.matvec(&x);
        let recovered = system.solve(&b).expect("solve succeeds");
        let rel = l2_diff(&recovered, &x) / l2(&x);
        assert!(rel <= 1e-10, "round trip error {rel:.3e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// The assembled transport operator is skew for any coefficient field,
    /// so its quadratic form vanishes and cannot feed the energy balance.
    #[test]
    fn convection_stays_skew(seed in any::<u64>()) {
        let space = square_space(2);
        let mut rng = StdRng::seed_from_u64(seed);
        let w: Vec<f64> = (0..space.n_velocity()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let u: Vec<f64> = (0..space.n_velocity()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let n = assemble_convection(&space, &w).expect("coefficient length matches");
        prop_assert!(max_skew_defect(&n) <= 1e-12 * (1.0 + max_sparse_abs(&n)));
        let quad = n.bilinear(&u, &u).abs();
        let form = skew_convection_form(&space, &w, &u, &u).expect("lengths match").abs();
        let scale = l2(&w) * l2(&u) * l2(&u);
        prop_assert!(quad <= 1e-12 * (1.0 + scale));
        prop_assert!(form <= 1e-12 * (1.0 + scale));
    }

    /// Solving against fixed factors is linear in the right-hand side, and
    /// the batched interface is bitwise identical to repeated single solves.
    #[test]
    fn factored_solve_is_linear(seed in any::<u64>(), alpha in -3.0..3.0f64) {
        let space = square_space(2);
        let a = assemble_mass(&space);
        let system = factorize(&a).expect("mass matrix factorizes");
        let mut rng = StdRng::seed_from_u64(seed);
        let b1: Vec<f64> = (0..a.nrows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b2: Vec<f64> = (0..a.nrows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let combined: Vec<f64> = b1.iter().zip(&b2).map(|(x, y)| alpha * x + y).collect();

        let x1 = system.solve(&b1).expect("solve succeeds");
        let x2 = system.solve(&b2).expect("solve succeeds");
        let xc = system.solve(&combined).expect("solve succeeds");
        let direct: Vec<f64> = x1.iter().zip(&x2).map(|(x, y)| alpha * x + y).collect();
        let rel = l2_diff(&xc, &direct) / (1.0 + l2(&direct));
        prop_assert!(rel <= 1e-10);

        let batch = system
            .solve_multi(&[b1.clone(), b2.clone()])
            .expect("batch solve succeeds");
        prop_assert!(batch[0] == x1 && batch[1] == x2);
    }
}
