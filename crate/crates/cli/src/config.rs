//! Run configuration: TOML files, named presets and `--set` overrides.
//!
//! Resolution order is preset, then config file, then overrides, each
//! merged key by key into the previous one. Every key has a default and
//! unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use surfrd_core::geometry::ManifoldConfig;
use surfrd_core::network::NetworkConfig;
use surfrd_core::physics::{GrayScottParams, InitialConditionConfig};
use surfrd_core::sfem::SfemConfig;
use surfrd_core::trainer::TrainConfig;
use toml::{Table, Value};

use crate::error::CliError;

pub const PRESET_PAPER_FULL: &str = include_str!("../presets/paper-full.toml");
pub const PRESET_CI_SMALL: &str = include_str!("../presets/ci-small.toml");

pub fn preset(name: &str) -> Option<&'static str> {
    match name {
        "paper-full" => Some(PRESET_PAPER_FULL),
        "ci-small" => Some(PRESET_CI_SMALL),
        _ => None,
    }
}

/// Kinetics, time horizon and initial condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    pub d_u: f64,
    pub d_v: f64,
    pub f0: f64,
    pub k: f64,
    pub epsilon: f64,
    /// Time horizon `T`.
    pub horizon: f64,
    pub ic: InitialConditionConfig,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        let p = GrayScottParams::default();
        Self {
            d_u: p.d_u,
            d_v: p.d_v,
            f0: p.f0,
            k: p.k,
            epsilon: p.epsilon,
            horizon: 2000.0,
            ic: InitialConditionConfig::default(),
        }
    }
}

impl PhysicsConfig {
    pub fn params(&self) -> GrayScottParams {
        GrayScottParams {
            d_u: self.d_u,
            d_v: self.d_v,
            f0: self.f0,
            k: self.k,
            epsilon: self.epsilon,
        }
    }
}

/// Artifact options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Parent of all run directories.
    pub directory: String,
    /// Record epoch wall time in the loss history; off makes the file
    /// reproducible byte for byte.
    pub wall_time: bool,
    pub vtk: bool,
    pub ppm: bool,
    /// Nodes per side of sampled grids (statistics, field maps).
    pub grid: usize,
    /// Comparison rows with `t` below this enter the early-time error.
    pub early_window: f64,
    /// Time at which `export` samples the fields.
    pub export_time: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: "runs".into(),
            wall_time: true,
            vtk: true,
            ppm: true,
            grid: 201,
            early_window: 500.0,
            export_time: 2000.0,
        }
    }
}

/// Everything a command needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
    pub manifold: ManifoldConfig,
    pub physics: PhysicsConfig,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub sfem: SfemConfig,
    pub output: OutputConfig,
}

fn validation(field: &str, reason: impl ToString) -> CliError {
    CliError::Validation {
        field: field.to_string(),
        reason: reason.to_string(),
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.manifold
            .validate()
            .map_err(|e| validation(&format!("manifold.{}", e.field), e.reason))?;
        self.physics.params().validate().map_err(|e| match e {
            surfrd_core::physics::PhysicsError::Config { field, reason } => {
                validation(&format!("physics.{field}"), reason)
            }
            other => validation("physics", other),
        })?;
        if !(self.physics.horizon.is_finite() && self.physics.horizon > 0.0) {
            return Err(validation("physics.horizon", "must be positive"));
        }
        let ic = &self.physics.ic;
        if !(ic.sigma_init.is_finite() && ic.sigma_init >= 0.0) {
            return Err(validation("physics.ic.sigma_init", "must be non-negative"));
        }
        if !(ic.cutoff.is_finite() && ic.cutoff > 0.0) {
            return Err(validation("physics.ic.cutoff", "must be positive"));
        }
        self.network
            .validate()
            .map_err(|e| validation("network", e))?;
        self.train.validate().map_err(|e| match e {
            surfrd_core::trainer::TrainError::Config { field, reason } => {
                validation(&format!("train.{field}"), reason)
            }
            other => validation("train", other),
        })?;
        self.sfem.validate().map_err(|e| match e {
            surfrd_core::sfem::SfemError::Config { field, reason } => {
                validation(&format!("sfem.{field}"), reason)
            }
            other => validation("sfem", other),
        })?;
        if self.output.grid < 2 {
            return Err(validation("output.grid", "must be at least 2"));
        }
        Ok(())
    }

    /// The fully resolved configuration as TOML.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

fn parse_table(text: &str, origin: &str) -> Result<Table, CliError> {
    text.parse::<Table>().map_err(|e| CliError::Parse {
        origin: origin.to_string(),
        message: e.to_string(),
    })
}

/// Recursively overlay `top` onto `base`.
fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parse the right-hand side of `--set`; bare words become strings.
fn parse_value(text: &str) -> Value {
    format!("v = {text}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(text.to_string()))
}

/// Apply one `dotted.key=value` override.
pub fn apply_override(table: &mut Table, spec: &str) -> Result<(), CliError> {
    let (key, value) = spec.split_once('=').ok_or_else(|| CliError::Parse {
        origin: "--set".into(),
        message: format!("expected key=value, got `{spec}`"),
    })?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Parse {
            origin: "--set".into(),
            message: format!("malformed key `{key}`"),
        });
    }
    let mut node = table;
    for part in &path[..path.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        node = entry.as_table_mut().ok_or_else(|| CliError::Parse {
            origin: "--set".into(),
            message: format!("`{part}` in `{key}` is not a section"),
        })?;
    }
    node.insert(path[path.len() - 1].to_string(), parse_value(value.trim()));
    Ok(())
}

/// Resolve a configuration from its sources and validate it.
pub fn resolve(
    preset_name: Option<&str>,
    config_text: Option<(&str, &str)>,
    overrides: &[String],
) -> Result<RunConfig, CliError> {
    let mut table = Table::new();
    if let Some(name) = preset_name {
        let text = preset(name).ok_or_else(|| CliError::UnknownPreset(name.to_string()))?;
        merge(&mut table, parse_table(text, &format!("preset {name}"))?);
    }
    if let Some((origin, text)) = config_text {
        merge(&mut table, parse_table(text, origin)?);
    }
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| CliError::Parse {
        origin: config_text.map_or("configuration", |c| c.0).to_string(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Read and resolve a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    resolve(None, Some((&path.display().to_string(), &text)), &[])
}
