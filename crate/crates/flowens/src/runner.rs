//! Experiment orchestration: manifests to runs, runs to files.
//!
//! A single run advances one ensemble on one mesh and streams monitor rows;
//! a study repeats a run over a refinement sequence and tabulates error
//! norms. Independent mode executes each member as its own one-member
//! ensemble so the two accounting models can be compared side by side.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::analysis::{AnalysisError, ConvergenceStudy, ErrorAccumulator, ErrorNorms};
use crate::analytic::{stokes_initial_condition, GreenTaylor, RotationalForcing};
use crate::config::{
    serialize_config, Experiment, ForcingKind, IcKind, MeshSource, RunManifest, RunMode,
};
use crate::ensemble::{
    EnergyBalance, EnsembleConfig, EnsembleError, EnsembleState, EnsembleStepper, InitialCondition,
    RunStats, StabilityRow, StepOutcome,
};
use crate::fem::{BoundaryData, TaylorHoodSpace};
use crate::field::{scaled_field, zero_field, FieldRef};
use crate::mesh::{unit_square, Mesh, MeshError};
use crate::solver::SolverError;
use std::sync::Arc;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("manifest: {0}")]
    BadManifest(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> RunnerError + '_ {
    move |source| RunnerError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Output of one ensemble (or one-member) run.
pub struct SingleRunOutput {
    /// Zero-based manifest indices of the members this run advanced.
    pub member_indices: Vec<usize>,
    /// Monitor rows for steps 0..=N; the last row reports the final state.
    pub rows: Vec<StabilityRow>,
    pub stats: RunStats,
    pub wall_seconds: f64,
    /// True when the run stopped early because the mean velocity lost
    /// finiteness.
    pub halted: bool,
    pub final_state: EnsembleState,
    /// Per covered member, when the run has a reference field.
    pub error_norms: Option<Vec<ErrorNorms>>,
    pub energy_balance: Vec<EnergyBalance>,
}

/// One run in the manifest's mode: a shared-operator ensemble, or every
/// member as its own independent run.
pub enum RunOutput {
    Ensemble(SingleRunOutput),
    Independent(Vec<SingleRunOutput>),
}

impl RunOutput {
    pub fn runs(&self) -> &[SingleRunOutput] {
        match self {
            Self::Ensemble(run) => std::slice::from_ref(run),
            Self::Independent(runs) => runs,
        }
    }

    pub fn total_factorizations(&self) -> u64 {
        self.runs().iter().map(|r| r.stats.factorizations).sum()
    }

    pub fn total_wall_seconds(&self) -> f64 {
        self.runs().iter().map(|r| r.wall_seconds).sum()
    }

    /// Largest step count over the covered runs.
    pub fn steps(&self) -> u64 {
        self.runs().iter().map(|r| r.stats.steps).max().unwrap_or(0)
    }

    /// Error norms keyed by manifest member index, when available for all.
    pub fn member_norms(&self) -> Option<Vec<ErrorNorms>> {
        let mut keyed = Vec::new();
        for run in self.runs() {
            let norms = run.error_norms.as_ref()?;
            for (local, &member) in run.member_indices.iter().enumerate() {
                keyed.push((member, norms[local]));
            }
        }
        keyed.sort_by_key(|(member, _)| *member);
        Some(keyed.into_iter().map(|(_, n)| n).collect())
    }
}

/// Refinement study: one run output per mesh level plus the rate table.
pub struct StudyOutput {
    pub mesh_sizes: Vec<usize>,
    pub time_steps: Vec<f64>,
    pub levels: Vec<RunOutput>,
    pub study: ConvergenceStudy,
}

/// Per-member physics derived from the manifest.
struct MemberSetup {
    initial: InitialCondition,
    forcing: FieldRef,
    boundary: BoundaryData,
    /// Field the member's error norms are measured against.
    reference: Option<FieldRef>,
}

fn member_setups(
    manifest: &RunManifest,
    space: &TaylorHoodSpace,
) -> Result<Vec<MemberSetup>, RunnerError> {
    let mut setups = Vec::with_capacity(manifest.members);
    match manifest.ic.kind {
        IcKind::Vortex => {
            let shared: FieldRef = Arc::new(GreenTaylor::new(manifest.ic.omega, manifest.ic.tau));
            for (j, &nu) in manifest.viscosities.iter().enumerate() {
                // Reference per member: the shared field when the residual
                // forcing closes each momentum equation, the member's own
                // force-free field otherwise.
                let reference: FieldRef = match manifest.forcing {
                    ForcingKind::VortexResidual => shared.clone(),
                    _ => Arc::new(GreenTaylor::new(manifest.ic.omega, 1.0 / nu)),
                };
                let forcing: FieldRef = match manifest.forcing {
                    ForcingKind::VortexResidual => {
                        Arc::new(GreenTaylor::new(manifest.ic.omega, manifest.ic.tau).forcing(nu))
                    }
                    ForcingKind::Rotational => Arc::new(RotationalForcing),
                    ForcingKind::None => zero_field(),
                };
                // Initial amplitudes alternate 1+eps, 1-eps member by member.
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                let amplitude = 1.0 + sign * manifest.ic.eps;
                setups.push(MemberSetup {
                    initial: InitialCondition::Field(scaled_field(reference.clone(), amplitude)),
                    forcing,
                    boundary: BoundaryData::uniform(reference.clone()),
                    reference: match manifest.forcing {
                        ForcingKind::Rotational => None,
                        _ => Some(reference),
                    },
                });
            }
        }
        IcKind::Stokes => {
            let forcing: FieldRef = match manifest.forcing {
                ForcingKind::Rotational => Arc::new(RotationalForcing),
                ForcingKind::None => zero_field(),
                ForcingKind::VortexResidual => {
                    return Err(RunnerError::BadManifest(
                        "stokes initial data needs a member-independent forcing".to_string(),
                    ))
                }
            };
            let coefficients =
                stokes_initial_condition(space, forcing.as_ref(), manifest.mean_viscosity())?;
            for _ in 0..manifest.members {
                setups.push(MemberSetup {
                    initial: InitialCondition::Coefficients(coefficients.clone()),
                    forcing: forcing.clone(),
                    boundary: BoundaryData::uniform(zero_field()),
                    reference: None,
                });
            }
        }
        IcKind::Zero => {
            let forcing: FieldRef = match manifest.forcing {
                ForcingKind::Rotational => Arc::new(RotationalForcing),
                _ => zero_field(),
            };
            for _ in 0..manifest.members {
                setups.push(MemberSetup {
                    initial: InitialCondition::Field(zero_field()),
                    forcing: forcing.clone(),
                    boundary: BoundaryData::uniform(zero_field()),
                    reference: None,
                });
            }
        }
    }
    Ok(setups)
}

/// Time step for a mesh level: explicit `dt` wins, otherwise `dt_over_h`
/// scaled by the nominal size 1/m for generated meshes or the longest edge
/// for ingested ones.
pub fn resolve_dt(manifest: &RunManifest, m: Option<usize>, mesh: &Mesh) -> f64 {
    if let Some(dt) = manifest.dt {
        return dt;
    }
    let ratio = manifest
        .dt_over_h
        .expect("parse_config requires dt or dt_over_h");
    let h = m.map_or(mesh.h_max, |m| 1.0 / m as f64);
    ratio * h
}

fn load_mesh(manifest: &RunManifest) -> Result<(Mesh, Option<usize>), RunnerError> {
    match &manifest.mesh {
        Some(MeshSource::Generated(m)) => Ok((unit_square(*m), Some(*m))),
        Some(MeshSource::File(path)) => Ok((Mesh::load(path)?, None)),
        None => Err(RunnerError::BadManifest(
            "a single run needs mesh.m or mesh.file".to_string(),
        )),
    }
}

fn build_ensemble_config(
    manifest: &RunManifest,
    setups: &[MemberSetup],
    member_idx: &[usize],
    dt: f64,
) -> Result<EnsembleConfig, RunnerError> {
    let viscosities: Vec<f64> = member_idx.iter().map(|&j| manifest.viscosities[j]).collect();
    let initial = member_idx
        .iter()
        .map(|&j| setups[j].initial.clone())
        .collect();
    let forcings = member_idx.iter().map(|&j| setups[j].forcing.clone()).collect();
    let boundaries: Vec<BoundaryData> = member_idx
        .iter()
        .map(|&j| setups[j].boundary.clone())
        .collect();
    let mut config = EnsembleConfig::new(
        viscosities,
        initial,
        forcings,
        BoundaryData::uniform(zero_field()),
        dt,
        manifest.t_end,
    )?
    .with_member_boundaries(boundaries)?;
    if let Some(mu) = manifest.mu {
        let epsilon = manifest
            .epsilon
            .unwrap_or_else(|| (1.0 - mu.sqrt()).min(0.1));
        config = config.with_stability(mu, epsilon)?;
    } else if let Some(epsilon) = manifest.epsilon {
        let mu = config.mu();
        config = config.with_stability(mu, epsilon)?;
    }
    config.adapt_dt = manifest.adapt_dt;
    Ok(config)
}

/// File outputs produced while a run advances.
struct SnapshotSpec {
    dir: PathBuf,
    vtk_every: usize,
    store_fields: bool,
}

fn run_members(
    manifest: &RunManifest,
    space: &TaylorHoodSpace,
    setups: &[MemberSetup],
    member_idx: &[usize],
    dt: f64,
    parallel: bool,
    snapshots: Option<&SnapshotSpec>,
) -> Result<SingleRunOutput, RunnerError> {
    let config = build_ensemble_config(manifest, setups, member_idx, dt)?;
    let mut stepper = EnsembleStepper::new(space, config)?;
    stepper.set_parallel(parallel);

    let references: Option<Vec<FieldRef>> = member_idx
        .iter()
        .map(|&j| setups[j].reference.clone())
        .collect();
    let mut accumulators: Option<Vec<ErrorAccumulator>> = references.map(|refs| {
        refs.into_iter()
            .map(|r| ErrorAccumulator::new(space, r))
            .collect()
    });

    let start = Instant::now();
    let mut state = stepper.initial_state()?;
    if let Some(accs) = accumulators.as_mut() {
        for (acc, u) in accs.iter_mut().zip(&state.velocities) {
            acc.add_sample(u, state.time, stepper.dt());
        }
    }
    write_snapshots(snapshots, space, &state, member_idx)?;

    let mut rows: Vec<StabilityRow> = Vec::new();
    let mut halted = false;
    while state.time + 0.5 * stepper.dt() < manifest.t_end {
        if manifest.adapt_dt {
            let report = stepper.check_stability(&state);
            stepper.adapt_dt(&report);
        }
        match stepper.step(&state)? {
            StepOutcome::Advanced { state: next, report } => {
                rows.push(report);
                state = next;
                if let Some(accs) = accumulators.as_mut() {
                    for (acc, u) in accs.iter_mut().zip(&state.velocities) {
                        acc.add_sample(u, state.time, stepper.dt());
                    }
                }
                write_snapshots(snapshots, space, &state, member_idx)?;
            }
            StepOutcome::Halted { report } => {
                rows.push(report);
                halted = true;
                break;
            }
        }
    }
    if !halted {
        rows.push(stepper.check_stability(&state));
    }

    if let Some(spec) = snapshots {
        if spec.store_fields {
            write_field_dumps(&spec.dir, space, &state, member_idx)?;
        }
    }

    Ok(SingleRunOutput {
        member_indices: member_idx.to_vec(),
        rows,
        stats: stepper.stats().clone(),
        wall_seconds: start.elapsed().as_secs_f64(),
        halted,
        energy_balance: stepper.energy_balance(&state),
        error_norms: accumulators.map(|accs| accs.iter().map(|a| a.norms()).collect()),
        final_state: state,
    })
}

/// Runs the manifest once on its configured mesh.
pub fn run_single(manifest: &RunManifest, parallel: bool) -> Result<RunOutput, RunnerError> {
    let (mesh, m) = load_mesh(manifest)?;
    let dt = resolve_dt(manifest, m, &mesh);
    let space = TaylorHoodSpace::new(mesh);
    run_on_space(manifest, &space, dt, parallel, None)
}

fn run_on_space(
    manifest: &RunManifest,
    space: &TaylorHoodSpace,
    dt: f64,
    parallel: bool,
    snapshots: Option<&SnapshotSpec>,
) -> Result<RunOutput, RunnerError> {
    let setups = member_setups(manifest, space)?;
    let all: Vec<usize> = (0..manifest.members).collect();
    match manifest.mode {
        RunMode::Ensemble => Ok(RunOutput::Ensemble(run_members(
            manifest, space, &setups, &all, dt, parallel, snapshots,
        )?)),
        RunMode::Independent => {
            let mut runs = Vec::with_capacity(manifest.members);
            for j in all {
                runs.push(run_members(
                    manifest,
                    space,
                    &setups,
                    &[j],
                    dt,
                    parallel,
                    snapshots,
                )?);
            }
            Ok(RunOutput::Independent(runs))
        }
    }
}

/// Runs the refinement sequence and assembles the convergence table.
pub fn run_green_taylor_study(
    manifest: &RunManifest,
    parallel: bool,
) -> Result<StudyOutput, RunnerError> {
    if manifest.ic.kind != IcKind::Vortex || manifest.forcing == ForcingKind::Rotational {
        return Err(RunnerError::BadManifest(
            "a convergence study needs the vortex reference field".to_string(),
        ));
    }
    if manifest.study_mesh_m.is_empty() {
        return Err(RunnerError::BadManifest(
            "study.mesh_m must list at least one mesh".to_string(),
        ));
    }
    let mut output = StudyOutput {
        mesh_sizes: Vec::new(),
        time_steps: Vec::new(),
        levels: Vec::new(),
        study: ConvergenceStudy::new(),
    };
    for &m in &manifest.study_mesh_m {
        let mesh = unit_square(m);
        let dt = resolve_dt(manifest, Some(m), &mesh);
        let space = TaylorHoodSpace::new(mesh);
        let level = run_on_space(manifest, &space, dt, parallel, None)?;
        let norms = level.member_norms().ok_or_else(|| {
            RunnerError::BadManifest("study members lack a reference field".to_string())
        })?;
        output.study.push_level(1.0 / m as f64, norms);
        output.mesh_sizes.push(m);
        output.time_steps.push(dt);
        output.levels.push(level);
    }
    Ok(output)
}

/// Runs the offset-cylinder stability experiment from its ingested mesh.
pub fn run_offset_cylinders(
    manifest: &RunManifest,
    parallel: bool,
) -> Result<RunOutput, RunnerError> {
    if manifest.experiment != Experiment::OffsetCylindersStability {
        return Err(RunnerError::BadManifest(
            "expected the offset-cylinder stability experiment".to_string(),
        ));
    }
    run_single(manifest, parallel)
}

/// Renders monitor rows as the energy/stability CSV.
pub fn stability_csv(output: &RunOutput) -> String {
    let mut records: Vec<(usize, usize, String)> = Vec::new();
    for run in output.runs() {
        for row in &run.rows {
            for (local, member) in run.member_indices.iter().enumerate() {
                let m = &row.members[local];
                let mut flags = String::new();
                if !m.deviation_ok {
                    flags.push('d');
                }
                if m.cfl_flagged {
                    flags.push('c');
                }
                if m.diverged {
                    flags.push('x');
                }
                if flags.is_empty() {
                    flags.push('-');
                }
                records.push((
                    row.step,
                    *member,
                    format!(
                        "{},{},{},{},{},{},{},{}",
                        row.step,
                        row.time,
                        member + 1,
                        m.energy,
                        m.deviation_ratio,
                        m.cfl_quantity,
                        row.cfl_threshold,
                        flags
                    ),
                ));
            }
        }
    }
    records.sort_by_key(|(step, member, _)| (*step, *member));
    let mut out =
        String::from("step,t,member,energy,deviation_ratio,cfl_quantity,cfl_threshold,flags\n");
    for (_, _, line) in records {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Renders a study as the convergence CSV.
pub fn convergence_csv(study_output: &StudyOutput) -> String {
    let study = &study_output.study;
    let mut out = String::from("h_inv,member,linf_l2,rate_linf_l2,l2_h1,rate_l2_h1\n");
    for (level, m) in study_output.mesh_sizes.iter().enumerate() {
        for member in 0..study.member_count() {
            let linf_rates = study.linf_rates(member).unwrap_or_default();
            let h1_rates = study.h1_rates(member).unwrap_or_default();
            let rate = |rates: &[f64]| {
                if level == 0 || rates.len() < level {
                    String::new()
                } else {
                    rates[level - 1].to_string()
                }
            };
            let norms = &study.levels[level][member];
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                m,
                member + 1,
                norms.linf_l2,
                rate(&linf_rates),
                norms.l2_h1,
                rate(&h1_rates),
            );
        }
    }
    out
}

fn run_summary(manifest: &RunManifest, output: &RunOutput) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "mode: {}", manifest.mode.name());
    let _ = writeln!(
        s,
        "steps: {}, factorizations: {}, solves: {}",
        output.steps(),
        output.total_factorizations(),
        output.runs().iter().map(|r| r.stats.solves).sum::<u64>(),
    );
    let total_wall = output.total_wall_seconds();
    let steps = output.steps().max(1);
    let _ = writeln!(
        s,
        "wall seconds: {total_wall:.3} total, {:.6} per step",
        total_wall / steps as f64
    );
    for run in output.runs() {
        for (local, member) in run.member_indices.iter().enumerate() {
            let last = run.rows.last().expect("runs record at least one row");
            let monitor = &last.members[local];
            let balance = &run.energy_balance[local];
            let _ = writeln!(
                s,
                "member {}: final energy {}, diverged {}, energy bound {} (lhs {:.6e}, rhs {:.6e}{})",
                member + 1,
                monitor.energy,
                monitor.diverged,
                if !balance.applicable {
                    "not applicable"
                } else if balance.holds {
                    "holds"
                } else {
                    "violated"
                },
                balance.lhs,
                balance.rhs,
                if run.halted { ", run halted early" } else { "" },
            );
        }
    }
    s
}

fn write_snapshots(
    snapshots: Option<&SnapshotSpec>,
    space: &TaylorHoodSpace,
    state: &EnsembleState,
    member_idx: &[usize],
) -> Result<(), RunnerError> {
    let Some(spec) = snapshots else {
        return Ok(());
    };
    if spec.vtk_every == 0 || state.step % spec.vtk_every != 0 {
        return Ok(());
    }
    for (local, member) in member_idx.iter().enumerate() {
        let path = spec.dir.join(format!(
            "fields_step{:06}_member{}.vtk",
            state.step,
            member + 1
        ));
        let content = vtk_snapshot(
            space,
            &state.velocities[local],
            &state.pressures[local],
            state.time,
        );
        fs::write(&path, content).map_err(io_at(&path))?;
    }
    Ok(())
}

fn write_field_dumps(
    dir: &Path,
    space: &TaylorHoodSpace,
    state: &EnsembleState,
    member_idx: &[usize],
) -> Result<(), RunnerError> {
    for (local, member) in member_idx.iter().enumerate() {
        let path = dir.join(format!("fields_member{}.csv", member + 1));
        let mut out = String::from("x,y,u,v,p\n");
        let mesh = space.mesh();
        for (vertex, node) in mesh.nodes.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                node[0],
                node[1],
                state.velocities[local][space.velocity_dof(vertex, 0)],
                state.velocities[local][space.velocity_dof(vertex, 1)],
                state.pressures[local][vertex],
            );
        }
        fs::write(&path, out).map_err(io_at(&path))?;
    }
    Ok(())
}

/// Legacy ASCII VTK snapshot: vertex velocities and pressure on triangles.
pub fn vtk_snapshot(
    space: &TaylorHoodSpace,
    velocity: &[f64],
    pressure: &[f64],
    time: f64,
) -> String {
    let mesh = space.mesh();
    let nv = mesh.nodes.len();
    let nt = mesh.triangles.len();
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(out, "velocity and pressure at t = {time}");
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {nv} double");
    for node in &mesh.nodes {
        let _ = writeln!(out, "{} {} 0", node[0], node[1]);
    }
    let _ = writeln!(out, "CELLS {nt} {}", 4 * nt);
    for tri in &mesh.triangles {
        let _ = writeln!(out, "3 {} {} {}", tri[0], tri[1], tri[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {nt}");
    for _ in 0..nt {
        out.push_str("5\n");
    }
    let _ = writeln!(out, "POINT_DATA {nv}");
    out.push_str("VECTORS velocity double\n");
    for vertex in 0..nv {
        let _ = writeln!(
            out,
            "{} {} 0",
            velocity[space.velocity_dof(vertex, 0)],
            velocity[space.velocity_dof(vertex, 1)]
        );
    }
    out.push_str("SCALARS pressure double 1\nLOOKUP_TABLE default\n");
    for vertex in 0..nv {
        let _ = writeln!(out, "{}", pressure[vertex]);
    }
    out
}

/// Everything `execute` wrote, plus the human summary it printed.
pub struct ExecutionReport {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// Executes a manifest end to end and writes its outputs. `as_study` runs
/// the refinement sequence; otherwise the manifest's single mesh is run.
pub fn execute(
    manifest: &RunManifest,
    as_study: bool,
    parallel_members: usize,
) -> Result<ExecutionReport, RunnerError> {
    let dir = manifest.output.dir.clone();
    fs::create_dir_all(&dir).map_err(io_at(&dir))?;
    let mut files = Vec::new();

    let resolved = dir.join("config.resolved");
    fs::write(&resolved, serialize_config(manifest)).map_err(io_at(&resolved))?;
    files.push(resolved);

    let parallel = parallel_members > 1;
    let pool = if parallel {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(parallel_members)
                .build()
                .map_err(|e| RunnerError::BadManifest(format!("worker pool: {e}")))?,
        )
    } else {
        None
    };
    fn in_pool<R: Send>(
        pool: &Option<rayon::ThreadPool>,
        f: impl FnOnce() -> R + Send,
    ) -> R {
        match pool {
            Some(pool) => pool.install(f),
            None => f(),
        }
    }

    let mut summary;
    if as_study {
        let mut report = in_pool(&pool, || {
            let study = run_green_taylor_study(manifest, parallel)?;
            let mut files = Vec::new();
            let conv = dir.join("convergence.csv");
            fs::write(&conv, convergence_csv(&study)).map_err(io_at(&conv))?;
            files.push(conv);
            let mut text = String::new();
            let _ = writeln!(text, "{}", study.study);
            for (i, level) in study.levels.iter().enumerate() {
                let m = study.mesh_sizes[i];
                let path = dir.join(format!("stability_m{m}.csv"));
                fs::write(&path, stability_csv(level)).map_err(io_at(&path))?;
                files.push(path);
                let _ = writeln!(
                    text,
                    "level m={m}, dt={}:\n{}",
                    study.time_steps[i],
                    run_summary(manifest, level)
                );
            }
            Ok::<_, RunnerError>(ExecutionReport {
                files,
                summary: text,
            })
        })?;
        summary = report.summary;
        files.append(&mut report.files);
    } else {
        let snapshots = SnapshotSpec {
            dir: dir.clone(),
            vtk_every: manifest.output.vtk_every,
            store_fields: manifest.output.store_fields,
        };
        let output = in_pool(&pool, || {
            let (mesh, m) = load_mesh(manifest)?;
            let dt = resolve_dt(manifest, m, &mesh);
            let space = TaylorHoodSpace::new(mesh);
            let output = run_on_space(manifest, &space, dt, parallel, Some(&snapshots))?;
            let path = dir.join("stability.csv");
            fs::write(&path, stability_csv(&output)).map_err(io_at(&path))?;
            Ok::<_, RunnerError>(ExecutionReport {
                files: vec![path],
                summary: run_summary(manifest, &output),
            })
        })?;
        summary = output.summary;
        files.extend(output.files);
    }

    let summary_path = dir.join("summary.txt");
    fs::write(&summary_path, &summary).map_err(io_at(&summary_path))?;
    files.push(summary_path);
    if manifest.output.vtk_every > 0 || manifest.output.store_fields {
        summary.push_str("field snapshots written alongside the CSVs\n");
    }
    Ok(ExecutionReport { files, summary })
}
