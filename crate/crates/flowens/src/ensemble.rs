//! Semi-implicit time stepping for an ensemble of related flow problems.
//!
//! All members share one implicit operator built from the ensemble mean:
//! `(1/dt) M + N(mean u) + mean_nu K` coupled with the divergence constraint.
//! Member-specific physics (convection by the deviation from the mean
//! velocity, viscosity deviation times diffusion, individual forcing) enters
//! the right-hand sides explicitly. Each step therefore costs one numeric
//! factorization plus one back-substitution per member.

use std::time::Instant;

use thiserror::Error;

use crate::analysis::field_l2_norm_sq;
use crate::fem::{
    apply_convection, apply_dirichlet_multi, assemble_convection, assemble_divergence,
    assemble_load, assemble_mass, assemble_saddle, assemble_stiffness,
    pressure_integral_weights, BoundaryData, FemError, TaylorHoodSpace, PINNED_PRESSURE_NODE,
};
use crate::field::FieldRef;
use crate::solver::{factorize, FactorizedSystem, SolverError};
use crate::sparse::SparseMatrix;

/// Relative residual above which a member's solve no longer certifies the
/// step and the member is flagged as diverged.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// A member whose kinetic energy exceeds this multiple of its initial energy
/// is flagged as diverged.
pub const BLOWUP_FACTOR: f64 = 1e10;
/// Largest admissible sqrt(mu); keeps the stability threshold finite.
const SQRT_MU_CAP: f64 = 1.0 - 1e-6;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("ensemble needs at least one member")]
    Empty,
    #[error("{what} has {found} entries for {expected} members")]
    MismatchedLengths {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("viscosity {value} of member {index} must be positive")]
    BadViscosity { index: usize, value: f64 },
    #[error("time step {0} must be positive and finite")]
    BadTimeStep(f64),
    #[error("end time {t_end} must admit at least one step of {dt}")]
    BadTimeRange { t_end: f64, dt: f64 },
    #[error("stability parameter mu = {0} must lie in [0, 1)")]
    BadMu(f64),
    #[error("stability parameter epsilon = {epsilon} must lie in (0, {max}]")]
    BadEpsilon { epsilon: f64, max: f64 },
    #[error("initial condition of member {index} has {found} coefficients, space needs {expected}")]
    BadInitialCoefficients {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Initial data for one member: a pointwise field to interpolate or
/// ready-made velocity coefficients (from a Stokes solve, for example).
#[derive(Clone)]
pub enum InitialCondition {
    Field(FieldRef),
    Coefficients(Vec<f64>),
}

/// Everything fixed over a run: member physics, boundary data, time grid,
/// and the monitor parameters.
#[derive(Clone)]
pub struct EnsembleConfig {
    pub viscosities: Vec<f64>,
    pub initial_conditions: Vec<InitialCondition>,
    pub forcings: Vec<FieldRef>,
    /// One boundary data set per member; members may share one set or carry
    /// their own trace data.
    pub boundaries: Vec<BoundaryData>,
    /// Configured time step, also the ceiling when adaptivity shrinks it.
    pub dt: f64,
    pub t_end: f64,
    pub adapt_dt: bool,
    mu: f64,
    sqrt_mu: f64,
    epsilon: f64,
}

impl EnsembleConfig {
    /// Builds a configuration with default monitor parameters: sqrt(mu) is
    /// the largest viscosity deviation ratio (capped below 1) and
    /// epsilon = min(0.1, 1 - sqrt(mu)).
    pub fn new(
        viscosities: Vec<f64>,
        initial_conditions: Vec<InitialCondition>,
        forcings: Vec<FieldRef>,
        boundary: BoundaryData,
        dt: f64,
        t_end: f64,
    ) -> Result<Self, EnsembleError> {
        if viscosities.is_empty() {
            return Err(EnsembleError::Empty);
        }
        let j = viscosities.len();
        if initial_conditions.len() != j {
            return Err(EnsembleError::MismatchedLengths {
                what: "initial conditions",
                expected: j,
                found: initial_conditions.len(),
            });
        }
        if forcings.len() != j {
            return Err(EnsembleError::MismatchedLengths {
                what: "forcings",
                expected: j,
                found: forcings.len(),
            });
        }
        for (index, &value) in viscosities.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(EnsembleError::BadViscosity { index, value });
            }
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(EnsembleError::BadTimeStep(dt));
        }
        if t_end < dt {
            return Err(EnsembleError::BadTimeRange { t_end, dt });
        }
        let mut config = Self {
            viscosities,
            initial_conditions,
            forcings,
            boundaries: vec![boundary; j],
            dt,
            t_end,
            adapt_dt: false,
            mu: 0.0,
            sqrt_mu: 0.0,
            epsilon: 0.1,
        };
        let sqrt_mu = config
            .deviation_ratios()
            .into_iter()
            .fold(0.0f64, f64::max)
            .min(SQRT_MU_CAP);
        config.sqrt_mu = sqrt_mu;
        config.mu = sqrt_mu * sqrt_mu;
        // Midpoint of the admissible interval (0, 2 - 2 sqrt(mu)), capped;
        // the endpoint itself would zero out the advisory threshold.
        config.epsilon = (1.0 - sqrt_mu).min(0.1);
        Ok(config)
    }

    /// Gives each member its own boundary trace data.
    pub fn with_member_boundaries(
        mut self,
        boundaries: Vec<BoundaryData>,
    ) -> Result<Self, EnsembleError> {
        if boundaries.len() != self.member_count() {
            return Err(EnsembleError::MismatchedLengths {
                what: "boundary data sets",
                expected: self.member_count(),
                found: boundaries.len(),
            });
        }
        self.boundaries = boundaries;
        Ok(self)
    }

    /// Overrides the monitor parameters; mu must lie in [0, 1) and epsilon in
    /// (0, 2 - 2 sqrt(mu)].
    pub fn with_stability(mut self, mu: f64, epsilon: f64) -> Result<Self, EnsembleError> {
        if !(0.0..1.0).contains(&mu) {
            return Err(EnsembleError::BadMu(mu));
        }
        let sqrt_mu = mu.sqrt();
        let max_eps = 2.0 - 2.0 * sqrt_mu;
        if !(epsilon > 0.0) || epsilon > max_eps {
            return Err(EnsembleError::BadEpsilon {
                epsilon,
                max: max_eps,
            });
        }
        self.mu = mu;
        self.sqrt_mu = sqrt_mu;
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn member_count(&self) -> usize {
        self.viscosities.len()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sqrt_mu(&self) -> f64 {
        self.sqrt_mu
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Ensemble mean viscosity, summed left to right.
    pub fn mean_viscosity(&self) -> f64 {
        self.viscosities.iter().sum::<f64>() / self.viscosities.len() as f64
    }

    /// Per-member |nu_j - mean| / mean.
    pub fn deviation_ratios(&self) -> Vec<f64> {
        let mean = self.mean_viscosity();
        self.viscosities
            .iter()
            .map(|nu| (nu - mean).abs() / mean)
            .collect()
    }

    /// Advisory bound on the explicit-convection quantity:
    /// `(2 - 2 sqrt(mu) - eps) sqrt(mu) / (2 (sqrt(mu) + eps))`.
    pub fn cfl_threshold(&self) -> f64 {
        (2.0 - 2.0 * self.sqrt_mu - self.epsilon) * self.sqrt_mu
            / (2.0 * (self.sqrt_mu + self.epsilon))
    }

    /// Gradient-term weight in the discrete energy bound of member `j`;
    /// the bound is only meaningful while this is nonnegative.
    pub fn energy_weight(&self, j: usize) -> f64 {
        let ratio = {
            let mean = self.mean_viscosity();
            (self.viscosities[j] - mean).abs() / mean
        };
        0.5 * (self.sqrt_mu * (2.0 + self.epsilon) / (self.sqrt_mu + self.epsilon) - ratio)
    }
}

/// Ensemble trajectory point: per-member fields plus their mean.
#[derive(Debug, Clone)]
pub struct EnsembleState {
    pub step: usize,
    pub time: f64,
    pub velocities: Vec<Vec<f64>>,
    pub pressures: Vec<Vec<f64>>,
    pub mean_velocity: Vec<f64>,
    /// Sticky per-member blow-up flags; flagged members keep evolving and
    /// keep contributing to the mean.
    pub diverged: Vec<bool>,
}

impl EnsembleState {
    fn mean(velocities: &[Vec<f64>]) -> Vec<f64> {
        let j = velocities.len() as f64;
        let n = velocities[0].len();
        let mut mean = vec![0.0; n];
        for v in velocities {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x;
            }
        }
        for m in mean.iter_mut() {
            *m /= j;
        }
        mean
    }
}

/// Stability monitor values for one member at one step.
#[derive(Debug, Clone)]
pub struct MemberMonitor {
    pub deviation_ratio: f64,
    /// Whether the deviation ratio is within sqrt(mu).
    pub deviation_ok: bool,
    /// `(dt / (mean_nu h_max)) * |grad (u_j - mean u)|^2`.
    pub cfl_quantity: f64,
    /// Whether `cfl_quantity` exceeds the advisory threshold.
    pub cfl_flagged: bool,
    pub energy: f64,
    pub diverged: bool,
}

/// Monitor row covering every member at one step.
#[derive(Debug, Clone)]
pub struct StabilityRow {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub cfl_threshold: f64,
    pub members: Vec<MemberMonitor>,
}

/// Discrete energy-bound bookkeeping for one member.
#[derive(Debug, Clone, Copy)]
pub struct EnergyBalance {
    pub lhs: f64,
    pub rhs: f64,
    /// The bound only applies while the member's gradient weight is
    /// nonnegative and its viscosity deviation is admissible.
    pub applicable: bool,
    pub holds: bool,
}

/// Counters and timers for one run.
#[derive(Debug, Clone, Default)]
pub struct RunStats {
    pub steps: u64,
    pub factorizations: u64,
    pub solves: u64,
    pub assembly_seconds: f64,
    pub factorization_seconds: f64,
    pub solve_seconds: f64,
}

/// Result of advancing one step.
pub enum StepOutcome {
    Advanced {
        state: EnsembleState,
        report: StabilityRow,
    },
    /// The mean velocity stopped being finite; no operator can be assembled.
    Halted { report: StabilityRow },
}

/// Owns the per-mesh matrices and the factorization reused across steps.
pub struct EnsembleStepper<'s> {
    space: &'s TaylorHoodSpace,
    config: EnsembleConfig,
    dt: f64,
    mass: SparseMatrix,
    stiffness: SparseMatrix,
    divergence: SparseMatrix,
    divergence_t: SparseMatrix,
    pressure_weights: Vec<f64>,
    domain_area: f64,
    system: Option<FactorizedSystem>,
    initial_l2_sq: Vec<f64>,
    initial_h1_sq: Vec<f64>,
    forcing_accum: Vec<f64>,
    stats: RunStats,
    parallel: bool,
}

/// Member right-hand side at `t_next`, pressure block zero:
/// `load(f_j) + (1/dt) M u_j - N(u_j - mean u) u_j - (nu_j - mean_nu) K u_j`.
fn member_rhs(
    space: &TaylorHoodSpace,
    config: &EnsembleConfig,
    mass: &SparseMatrix,
    stiffness: &SparseMatrix,
    dt: f64,
    state: &EnsembleState,
    member: usize,
    t_next: f64,
) -> Result<Vec<f64>, EnsembleError> {
    let n_vel = space.n_velocity();
    let u = &state.velocities[member];
    let mut rhs = vec![0.0; space.n_coupled()];
    let load = assemble_load(space, config.forcings[member].as_ref(), t_next);
    let mu = mass.matvec(u);
    let ku = stiffness.matvec(u);
    let deviation: Vec<f64> = u
        .iter()
        .zip(&state.mean_velocity)
        .map(|(a, b)| a - b)
        .collect();
    let transport = apply_convection(space, &deviation, u)?;
    let nu_diff = config.viscosities[member] - config.mean_viscosity();
    let inv_dt = 1.0 / dt;
    for i in 0..n_vel {
        rhs[i] = load[i] + inv_dt * mu[i] - transport[i] - nu_diff * ku[i];
    }
    Ok(rhs)
}

impl<'s> EnsembleStepper<'s> {
    pub fn new(space: &'s TaylorHoodSpace, config: EnsembleConfig) -> Result<Self, EnsembleError> {
        for boundary in &config.boundaries {
            boundary.validate(space)?;
        }
        let j = config.member_count();
        let dt = config.dt;
        let divergence = assemble_divergence(space);
        let divergence_t = divergence.transpose();
        let pressure_weights = pressure_integral_weights(space);
        let domain_area = pressure_weights.iter().sum();
        Ok(Self {
            space,
            config,
            dt,
            mass: assemble_mass(space),
            stiffness: assemble_stiffness(space),
            divergence,
            divergence_t,
            pressure_weights,
            domain_area,
            system: None,
            initial_l2_sq: vec![0.0; j],
            initial_h1_sq: vec![0.0; j],
            forcing_accum: vec![0.0; j],
            stats: RunStats::default(),
            parallel: false,
        })
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    /// Current time step; equals the configured one unless adaptivity
    /// shrank it.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    /// Builds the step-0 state from the configured initial conditions and
    /// resets the energy-bound accumulators.
    pub fn initial_state(&mut self) -> Result<EnsembleState, EnsembleError> {
        let j = self.config.member_count();
        let n_vel = self.space.n_velocity();
        let mut velocities = Vec::with_capacity(j);
        for (index, ic) in self.config.initial_conditions.iter().enumerate() {
            let u = match ic {
                InitialCondition::Field(f) => self.space.interpolate(f.as_ref(), 0.0),
                InitialCondition::Coefficients(c) => {
                    if c.len() != n_vel {
                        return Err(EnsembleError::BadInitialCoefficients {
                            index,
                            expected: n_vel,
                            found: c.len(),
                        });
                    }
                    c.clone()
                }
            };
            velocities.push(u);
        }
        for (jj, u) in velocities.iter().enumerate() {
            self.initial_l2_sq[jj] = self.mass.bilinear(u, u);
            self.initial_h1_sq[jj] = self.stiffness.bilinear(u, u);
            self.forcing_accum[jj] = 0.0;
        }
        let mean_velocity = EnsembleState::mean(&velocities);
        Ok(EnsembleState {
            step: 0,
            time: 0.0,
            pressures: vec![vec![0.0; self.space.n_pressure()]; j],
            diverged: vec![false; j],
            velocities,
            mean_velocity,
        })
    }

    /// The coupled matrix shared by every member this step, before boundary
    /// and gauge processing: `(1/dt) M + N(mean u) + mean_nu K` against the
    /// divergence constraint.
    pub fn build_shared_operator(&self, state: &EnsembleState) -> Result<SparseMatrix, EnsembleError> {
        let a = self.velocity_block(state)?;
        Ok(assemble_saddle(
            &a,
            &self.divergence,
            &self.divergence_t,
            PINNED_PRESSURE_NODE,
        ))
    }

    /// Velocity block of the shared operator.
    pub fn velocity_block(&self, state: &EnsembleState) -> Result<SparseMatrix, EnsembleError> {
        let convection = assemble_convection(self.space, &state.mean_velocity)?;
        let a = SparseMatrix::linear_combination(&[
            (1.0 / self.dt, &self.mass),
            (1.0, &convection),
            (self.config.mean_viscosity(), &self.stiffness),
        ])
        .expect("matrices assembled over one space share the pattern");
        Ok(a)
    }

    /// Member right-hand side at the next time level; see [`member_rhs`].
    pub fn build_member_rhs(
        &self,
        state: &EnsembleState,
        member: usize,
        t_next: f64,
    ) -> Result<Vec<f64>, EnsembleError> {
        member_rhs(
            self.space,
            &self.config,
            &self.mass,
            &self.stiffness,
            self.dt,
            state,
            member,
            t_next,
        )
    }

    /// Builds member right-hand sides on the worker pool when enabled; the
    /// members are independent and assembled in index order either way, so
    /// results are identical bit for bit.
    pub fn set_parallel(&mut self, parallel: bool) {
        self.parallel = parallel;
    }

    /// Monitor of the given state under the current time step.
    pub fn check_stability(&self, state: &EnsembleState) -> StabilityRow {
        let mean_nu = self.config.mean_viscosity();
        let ratios = self.config.deviation_ratios();
        let threshold = self.config.cfl_threshold();
        let h = self.space.mesh().h_max;
        let members = (0..self.config.member_count())
            .map(|j| {
                let u = &state.velocities[j];
                let deviation: Vec<f64> = u
                    .iter()
                    .zip(&state.mean_velocity)
                    .map(|(a, b)| a - b)
                    .collect();
                let grad_sq = self.stiffness.bilinear(&deviation, &deviation);
                let cfl_quantity = self.dt / (mean_nu * h) * grad_sq;
                MemberMonitor {
                    deviation_ratio: ratios[j],
                    deviation_ok: ratios[j] <= self.config.sqrt_mu,
                    cfl_quantity,
                    cfl_flagged: cfl_quantity > threshold,
                    energy: 0.5 * self.mass.bilinear(u, u),
                    diverged: state.diverged[j],
                }
            })
            .collect();
        StabilityRow {
            step: state.step,
            time: state.time,
            dt: self.dt,
            cfl_threshold: threshold,
            members,
        }
    }

    /// Shrinks the time step so the worst flagged quantity lands at 90% of
    /// the threshold; never exceeds the configured step. Returns the step
    /// that will be used next.
    pub fn adapt_dt(&mut self, report: &StabilityRow) -> f64 {
        if !self.config.adapt_dt {
            return self.dt;
        }
        let threshold = report.cfl_threshold;
        if threshold <= 0.0 {
            return self.dt;
        }
        let worst = report
            .members
            .iter()
            .filter(|m| !m.diverged && m.cfl_quantity.is_finite())
            .map(|m| m.cfl_quantity)
            .fold(0.0f64, f64::max);
        if worst > threshold {
            let shrunk = 0.9 * self.dt * threshold / worst;
            if shrunk > 0.0 && shrunk.is_finite() {
                self.dt = shrunk.min(self.config.dt);
            }
        }
        self.dt
    }

    /// Advances one step: factor the shared operator once, back-substitute
    /// every member, update divergence flags and the ensemble mean.
    pub fn step(&mut self, state: &EnsembleState) -> Result<StepOutcome, EnsembleError> {
        let report = self.check_stability(state);
        if !state.mean_velocity.iter().all(|v| v.is_finite()) {
            return Ok(StepOutcome::Halted { report });
        }
        let t_next = state.time + self.dt;
        let j = self.config.member_count();
        let n_vel = self.space.n_velocity();

        let assembly_start = Instant::now();
        let mut saddle = self.build_shared_operator(state)?;
        let build = |member: usize| {
            member_rhs(
                self.space,
                &self.config,
                &self.mass,
                &self.stiffness,
                self.dt,
                state,
                member,
                t_next,
            )
        };
        let mut rhss: Vec<Vec<f64>> = if self.parallel {
            use rayon::prelude::*;
            (0..j)
                .into_par_iter()
                .map(build)
                .collect::<Result<_, _>>()?
        } else {
            (0..j).map(build).collect::<Result<_, _>>()?
        };
        let boundaries: Vec<&BoundaryData> = self.config.boundaries.iter().collect();
        apply_dirichlet_multi(&mut saddle, &mut rhss, self.space, &boundaries, t_next)?;
        self.stats.assembly_seconds += assembly_start.elapsed().as_secs_f64();

        let factor_start = Instant::now();
        match self.system.as_mut() {
            None => self.system = Some(factorize(&saddle)?),
            Some(system) => system.refactorize(&saddle)?,
        }
        self.stats.factorizations += 1;
        self.stats.factorization_seconds += factor_start.elapsed().as_secs_f64();
        let system = self.system.as_ref().expect("factorized above");

        let solve_start = Instant::now();
        let solutions = system.solve_multi(&rhss)?;
        self.stats.solves += j as u64;
        self.stats.solve_seconds += solve_start.elapsed().as_secs_f64();

        let mut velocities = Vec::with_capacity(j);
        let mut pressures = Vec::with_capacity(j);
        let mut diverged = state.diverged.clone();
        for (member, solution) in solutions.into_iter().enumerate() {
            let finite = solution.iter().all(|v| v.is_finite());
            if finite {
                let residual = system.residual(&solution, &rhss[member]);
                if !(residual <= RESIDUAL_TOL) {
                    // Loss of certified solve accuracy counts as divergence
                    // for the member; the trace itself keeps running.
                    diverged[member] = true;
                }
            } else {
                diverged[member] = true;
            }
            let velocity = solution[..n_vel].to_vec();
            let mut pressure = solution[n_vel..].to_vec();
            if finite {
                // Gauge: shift the pressure to zero mean over the domain.
                let mean = crate::sparse::dot(&self.pressure_weights, &pressure) / self.domain_area;
                for p in pressure.iter_mut() {
                    *p -= mean;
                }
                let energy = 0.5 * self.mass.bilinear(&velocity, &velocity);
                let initial = self.initial_l2_sq[member] * 0.5;
                let blown = if initial > 0.0 {
                    energy > BLOWUP_FACTOR * initial
                } else {
                    energy > BLOWUP_FACTOR
                };
                if !energy.is_finite() || blown {
                    diverged[member] = true;
                }
            }
            velocities.push(velocity);
            pressures.push(pressure);

            let f_norm_sq = field_l2_norm_sq(
                self.space,
                self.config.forcings[member].as_ref(),
                t_next,
            );
            self.forcing_accum[member] += self.dt / self.config.mean_viscosity() * f_norm_sq;
        }
        let mean_velocity = EnsembleState::mean(&velocities);
        self.stats.steps += 1;
        Ok(StepOutcome::Advanced {
            state: EnsembleState {
                step: state.step + 1,
                time: t_next,
                velocities,
                pressures,
                mean_velocity,
                diverged,
            },
            report,
        })
    }

    /// Discrete energy-bound status per member at the given state:
    /// `0.5 |u|^2 + w_j mean_nu dt |grad u|^2` against the accumulated
    /// forcing plus initial terms.
    pub fn energy_balance(&self, state: &EnsembleState) -> Vec<EnergyBalance> {
        let mean_nu = self.config.mean_viscosity();
        let ratios = self.config.deviation_ratios();
        (0..self.config.member_count())
            .map(|j| {
                let u = &state.velocities[j];
                let w = self.config.energy_weight(j);
                let lhs = 0.5 * self.mass.bilinear(u, u)
                    + w * mean_nu * self.dt * self.stiffness.bilinear(u, u);
                let rhs = self.forcing_accum[j]
                    + 0.5 * self.initial_l2_sq[j]
                    + w * mean_nu * self.dt * self.initial_h1_sq[j];
                let applicable = w >= 0.0 && ratios[j] <= self.config.sqrt_mu;
                EnergyBalance {
                    lhs,
                    rhs,
                    applicable,
                    holds: lhs <= rhs * (1.0 + 1e-10) + 1e-12,
                }
            })
            .collect()
    }
}
