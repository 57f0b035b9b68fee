//! Run manifests and their flat `key = value` text format.
//!
//! The format is line oriented: one `key = value` pair per line, `#` starts
//! a comment, dotted keys group related settings, lists are bracketed and
//! comma separated. Parsing resolves every default so the echoed manifest
//! reproduces the run exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` already set")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: key `{key}` expects {expected}, got `{value}`")]
    BadValue {
        line: usize,
        key: &'static str,
        expected: &'static str,
        value: String,
    },
    #[error("missing required keys: {}", .0.join(", "))]
    MissingKeys(Vec<&'static str>),
    #[error("key `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    GreenTaylorConvergence,
    OffsetCylindersStability,
    Custom,
}

impl Experiment {
    fn name(self) -> &'static str {
        match self {
            Self::GreenTaylorConvergence => "green_taylor_convergence",
            Self::OffsetCylindersStability => "offset_cylinders_stability",
            Self::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Ensemble,
    Independent,
}

impl RunMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ensemble => "ensemble",
            Self::Independent => "independent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MeshSource {
    Generated(usize),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcKind {
    /// Decaying-vortex field, per-member amplitude `1 +/- eps`.
    Vortex,
    /// Steady Stokes solve with the run's forcing and mean viscosity.
    Stokes,
    Zero,
}

impl IcKind {
    fn name(self) -> &'static str {
        match self {
            Self::Vortex => "vortex",
            Self::Stokes => "stokes",
            Self::Zero => "zero",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForcingKind {
    /// Closed-form residual so the shared vortex field solves each member's
    /// momentum equation.
    VortexResidual,
    /// Counterclockwise rotational body force vanishing on the unit circle.
    Rotational,
    None,
}

impl ForcingKind {
    fn name(self) -> &'static str {
        match self {
            Self::VortexResidual => "vortex_residual",
            Self::Rotational => "rotational",
            Self::None => "none",
        }
    }
}

/// Vortex reference-field parameters; `tau` defaults to the inverse mean
/// viscosity so the forcing vanishes for the mean member.
#[derive(Debug, Clone, PartialEq)]
pub struct IcSpec {
    pub kind: IcKind,
    pub eps: f64,
    pub omega: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub store_fields: bool,
    /// Write a VTK snapshot every this many steps; 0 disables snapshots.
    pub vtk_every: usize,
}

/// A fully resolved run description; everything a run needs except the
/// command-line output overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub experiment: Experiment,
    pub members: usize,
    pub viscosities: Vec<f64>,
    pub mu: Option<f64>,
    pub epsilon: Option<f64>,
    pub dt: Option<f64>,
    pub dt_over_h: Option<f64>,
    pub t_end: f64,
    pub mesh: Option<MeshSource>,
    /// Refinement sequence for studies, strictly increasing.
    pub study_mesh_m: Vec<usize>,
    pub ic: IcSpec,
    pub forcing: ForcingKind,
    pub adapt_dt: bool,
    pub mode: RunMode,
    pub output: OutputSpec,
}

impl RunManifest {
    pub fn mean_viscosity(&self) -> f64 {
        self.viscosities.iter().sum::<f64>() / self.viscosities.len() as f64
    }
}

const KNOWN_KEYS: &[&str] = &[
    "experiment",
    "mode",
    "J",
    "nu",
    "mu",
    "epsilon",
    "dt",
    "dt_over_h",
    "T",
    "adapt_dt",
    "mesh.m",
    "mesh.file",
    "study.mesh_m",
    "ic.kind",
    "ic.eps",
    "ic.omega",
    "ic.tau",
    "forcing.kind",
    "output.dir",
    "output.store_fields",
    "output.vtk_every",
];

struct RawConfig {
    entries: BTreeMap<&'static str, (usize, String)>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: content.to_string(),
                });
            };
            let key = key.trim();
            let value = value.trim();
            let Some(&known) = KNOWN_KEYS.iter().find(|&&k| k == key) else {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            };
            if entries.contains_key(known) {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
            entries.insert(known, (line, value.to_string()));
        }
        Ok(Self { entries })
    }

    fn take(&mut self, key: &'static str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn f64(&mut self, key: &'static str) -> Result<Option<f64>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, value)) => value.parse().map(Some).map_err(|_| ConfigError::BadValue {
                line,
                key,
                expected: "a number",
                value,
            }),
        }
    }

    fn usize(&mut self, key: &'static str) -> Result<Option<usize>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, value)) => value.parse().map(Some).map_err(|_| ConfigError::BadValue {
                line,
                key,
                expected: "a nonnegative integer",
                value,
            }),
        }
    }

    fn bool(&mut self, key: &'static str) -> Result<Option<bool>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, value)) => match value.as_str() {
                "true" => Ok(Some(true)),
                "false" => Ok(Some(false)),
                _ => Err(ConfigError::BadValue {
                    line,
                    key,
                    expected: "true or false",
                    value,
                }),
            },
        }
    }

    fn list_usize(&mut self, key: &'static str) -> Result<Option<Vec<usize>>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, value)) => {
                let parsed: Option<Vec<usize>> = parse_list(&value)
                    .and_then(|items| items.iter().map(|s| s.parse().ok()).collect());
                parsed.map(Some).ok_or(ConfigError::BadValue {
                    line,
                    key,
                    expected: "a bracketed list of integers",
                    value,
                })
            }
        }
    }
}

fn parse_list(value: &str) -> Option<Vec<String>> {
    let inner = value.strip_prefix('[')?.strip_suffix(']')?.trim();
    if inner.is_empty() {
        return Some(Vec::new());
    }
    Some(inner.split(',').map(|s| s.trim().to_string()).collect())
}

/// Parses and fully resolves a manifest from config text.
pub fn parse_config(text: &str) -> Result<RunManifest, ConfigError> {
    let mut raw = RawConfig::parse(text)?;

    let mut missing = Vec::new();
    let experiment = match raw.take("experiment") {
        None => {
            missing.push("experiment");
            None
        }
        Some((line, value)) => Some(match value.as_str() {
            "green_taylor_convergence" => Experiment::GreenTaylorConvergence,
            "offset_cylinders_stability" => Experiment::OffsetCylindersStability,
            "custom" => Experiment::Custom,
            _ => {
                return Err(ConfigError::BadValue {
                    line,
                    key: "experiment",
                    expected:
                        "green_taylor_convergence, offset_cylinders_stability, or custom",
                    value,
                })
            }
        }),
    };
    let members = raw.usize("J")?;
    if members.is_none() {
        missing.push("J");
    }
    let viscosities = {
        let parsed: Option<Vec<f64>> = match raw.take("nu") {
            None => None,
            Some((line, value)) => Some(
                parse_list(&value)
                    .and_then(|items| items.iter().map(|s| s.parse().ok()).collect())
                    .ok_or(ConfigError::BadValue {
                        line,
                        key: "nu",
                        expected: "a bracketed list of numbers",
                        value,
                    })?,
            ),
        };
        if parsed.is_none() {
            missing.push("nu");
        }
        parsed
    };
    let t_end = raw.f64("T")?;
    if t_end.is_none() {
        missing.push("T");
    }
    let dt = raw.f64("dt")?;
    let dt_over_h = raw.f64("dt_over_h")?;
    if dt.is_none() && dt_over_h.is_none() {
        missing.push("dt or dt_over_h");
    }
    if !missing.is_empty() {
        return Err(ConfigError::MissingKeys(missing));
    }
    let experiment = experiment.unwrap();
    let members = members.unwrap();
    let viscosities = viscosities.unwrap();
    let t_end = t_end.unwrap();

    if dt.is_some() && dt_over_h.is_some() {
        return Err(ConfigError::Invalid {
            key: "dt",
            message: "give either dt or dt_over_h, not both".to_string(),
        });
    }
    if members == 0 {
        return Err(ConfigError::Invalid {
            key: "J",
            message: "need at least one member".to_string(),
        });
    }
    if viscosities.len() != members {
        return Err(ConfigError::Invalid {
            key: "nu",
            message: format!("{} viscosities for J = {members}", viscosities.len()),
        });
    }
    if viscosities.iter().any(|&nu| !(nu > 0.0) || !nu.is_finite()) {
        return Err(ConfigError::Invalid {
            key: "nu",
            message: "viscosities must be positive".to_string(),
        });
    }
    if !(t_end > 0.0) {
        return Err(ConfigError::Invalid {
            key: "T",
            message: "end time must be positive".to_string(),
        });
    }
    for (key, value) in [("dt", dt), ("dt_over_h", dt_over_h)] {
        if let Some(v) = value {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ConfigError::Invalid {
                    key,
                    message: "must be positive".to_string(),
                });
            }
        }
    }
    let mu = raw.f64("mu")?;
    if let Some(mu) = mu {
        if !(0.0..1.0).contains(&mu) {
            return Err(ConfigError::Invalid {
                key: "mu",
                message: "must lie in [0, 1)".to_string(),
            });
        }
    }
    let epsilon = raw.f64("epsilon")?;
    if let Some(epsilon) = epsilon {
        if !(epsilon > 0.0) {
            return Err(ConfigError::Invalid {
                key: "epsilon",
                message: "must be positive".to_string(),
            });
        }
    }

    let mesh_m = raw.usize("mesh.m")?;
    let mesh_file = raw.take("mesh.file").map(|(_, v)| PathBuf::from(v));
    let mesh = match (mesh_m, mesh_file) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::Invalid {
                key: "mesh.m",
                message: "give either mesh.m or mesh.file, not both".to_string(),
            })
        }
        (Some(m), None) => {
            if m == 0 {
                return Err(ConfigError::Invalid {
                    key: "mesh.m",
                    message: "must be at least 1".to_string(),
                });
            }
            Some(MeshSource::Generated(m))
        }
        (None, Some(path)) => Some(MeshSource::File(path)),
        (None, None) => None,
    };

    let study_mesh_m = raw.list_usize("study.mesh_m")?.unwrap_or_else(|| {
        if experiment == Experiment::GreenTaylorConvergence {
            vec![20, 40, 80]
        } else {
            Vec::new()
        }
    });
    if !study_mesh_m.windows(2).all(|w| w[0] < w[1]) || study_mesh_m.contains(&0) {
        return Err(ConfigError::Invalid {
            key: "study.mesh_m",
            message: "mesh sequence must be positive and strictly refining".to_string(),
        });
    }

    let ic_kind = match raw.take("ic.kind") {
        None => match experiment {
            Experiment::GreenTaylorConvergence => IcKind::Vortex,
            Experiment::OffsetCylindersStability => IcKind::Stokes,
            Experiment::Custom => IcKind::Zero,
        },
        Some((line, value)) => match value.as_str() {
            "vortex" => IcKind::Vortex,
            "stokes" => IcKind::Stokes,
            "zero" => IcKind::Zero,
            _ => {
                return Err(ConfigError::BadValue {
                    line,
                    key: "ic.kind",
                    expected: "vortex, stokes, or zero",
                    value,
                })
            }
        },
    };
    let eps = raw.f64("ic.eps")?.unwrap_or(1e-3);
    if !(eps >= 0.0) {
        return Err(ConfigError::Invalid {
            key: "ic.eps",
            message: "must be nonnegative".to_string(),
        });
    }
    let omega = raw.f64("ic.omega")?.unwrap_or(1.0);
    if !(omega >= 1.0) {
        return Err(ConfigError::Invalid {
            key: "ic.omega",
            message: "must be at least 1".to_string(),
        });
    }
    let mean_nu = viscosities.iter().sum::<f64>() / members as f64;
    let tau = raw.f64("ic.tau")?.unwrap_or(1.0 / mean_nu);
    if !(tau > 0.0) {
        return Err(ConfigError::Invalid {
            key: "ic.tau",
            message: "must be positive".to_string(),
        });
    }

    let forcing = match raw.take("forcing.kind") {
        None => match experiment {
            Experiment::GreenTaylorConvergence => ForcingKind::VortexResidual,
            Experiment::OffsetCylindersStability => ForcingKind::Rotational,
            Experiment::Custom => ForcingKind::None,
        },
        Some((line, value)) => match value.as_str() {
            "vortex_residual" => ForcingKind::VortexResidual,
            "rotational" => ForcingKind::Rotational,
            "none" => ForcingKind::None,
            _ => {
                return Err(ConfigError::BadValue {
                    line,
                    key: "forcing.kind",
                    expected: "vortex_residual, rotational, or none",
                    value,
                })
            }
        },
    };

    let adapt_dt = raw.bool("adapt_dt")?.unwrap_or(false);
    let mode = match raw.take("mode") {
        None => RunMode::Ensemble,
        Some((line, value)) => match value.as_str() {
            "ensemble" => RunMode::Ensemble,
            "independent" => RunMode::Independent,
            _ => {
                return Err(ConfigError::BadValue {
                    line,
                    key: "mode",
                    expected: "ensemble or independent",
                    value,
                })
            }
        },
    };

    let output = OutputSpec {
        dir: raw
            .take("output.dir")
            .map(|(_, v)| PathBuf::from(v))
            .unwrap_or_else(|| PathBuf::from("out")),
        store_fields: raw.bool("output.store_fields")?.unwrap_or(false),
        vtk_every: raw.usize("output.vtk_every")?.unwrap_or(0),
    };

    debug_assert!(raw.entries.is_empty(), "all known keys consumed");

    Ok(RunManifest {
        experiment,
        members,
        viscosities,
        mu,
        epsilon,
        dt,
        dt_over_h,
        t_end,
        mesh,
        study_mesh_m,
        ic: IcSpec {
            kind: ic_kind,
            eps,
            omega,
            tau,
        },
        forcing,
        adapt_dt,
        mode,
        output,
    })
}

/// Renders a manifest back to config text; parsing the result reproduces the
/// manifest exactly.
pub fn serialize_config(manifest: &RunManifest) -> String {
    let mut out = String::new();
    let mut line = |key: &str, value: String| {
        let _ = writeln!(out, "{key} = {value}");
    };
    line("experiment", manifest.experiment.name().to_string());
    line("mode", manifest.mode.name().to_string());
    line("J", manifest.members.to_string());
    line("nu", format_f64_list(&manifest.viscosities));
    if let Some(mu) = manifest.mu {
        line("mu", mu.to_string());
    }
    if let Some(epsilon) = manifest.epsilon {
        line("epsilon", epsilon.to_string());
    }
    if let Some(dt) = manifest.dt {
        line("dt", dt.to_string());
    }
    if let Some(r) = manifest.dt_over_h {
        line("dt_over_h", r.to_string());
    }
    line("T", manifest.t_end.to_string());
    line("adapt_dt", manifest.adapt_dt.to_string());
    match &manifest.mesh {
        Some(MeshSource::Generated(m)) => line("mesh.m", m.to_string()),
        Some(MeshSource::File(path)) => line("mesh.file", path.display().to_string()),
        None => {}
    }
    if !manifest.study_mesh_m.is_empty() {
        let items: Vec<String> = manifest.study_mesh_m.iter().map(|m| m.to_string()).collect();
        line("study.mesh_m", format!("[{}]", items.join(", ")));
    }
    line("ic.kind", manifest.ic.kind.name().to_string());
    line("ic.eps", manifest.ic.eps.to_string());
    line("ic.omega", manifest.ic.omega.to_string());
    line("ic.tau", manifest.ic.tau.to_string());
    line("forcing.kind", manifest.forcing.name().to_string());
    line("output.dir", manifest.output.dir.display().to_string());
    line("output.store_fields", manifest.output.store_fields.to_string());
    line("output.vtk_every", manifest.output.vtk_every.to_string());
    out
}

fn format_f64_list(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    format!("[{}]", items.join(", "))
}
