//! Command-line front end: configuration handling, run directories and
//! the `gen-manifold`, `train`, `solve-sfem`, `compare` and `export`
//! commands.

pub mod commands;
pub mod config;
pub mod error;
pub mod rundir;

use std::path::{Path, PathBuf};

pub use config::{resolve, RunConfig};
pub use error::CliError;
pub use rundir::RunDir;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    GenManifold,
    Train,
    SolveSfem,
    Compare,
    Export,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GenManifold => "gen-manifold",
            Command::Train => "train",
            Command::SolveSfem => "solve-sfem",
            Command::Compare => "compare",
            Command::Export => "export",
        }
    }
}

/// One fully specified invocation.
#[derive(Debug, Clone, Default)]
pub struct Invocation {
    pub config: Option<PathBuf>,
    pub preset: Option<String>,
    pub overrides: Vec<String>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    /// Checkpoint used by `compare` and `export` instead of training.
    pub model: Option<PathBuf>,
}

impl Invocation {
    /// Resolve the configuration; command-line flags beat file values.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let text = match &self.config {
            Some(p) => Some(std::fs::read_to_string(p).map_err(error::io_err(p))?),
            None => None,
        };
        let origin = self.config.as_ref().map(|p| p.display().to_string());
        let mut overrides = self.overrides.clone();
        if let Some(out) = &self.out {
            overrides.push(format!("output.directory={:?}", out.display().to_string()));
        }
        if let Some(t) = self.threads {
            overrides.push(format!("threads={t}"));
        }
        resolve(
            self.preset.as_deref(),
            origin.as_deref().zip(text.as_deref()),
            &overrides,
        )
    }
}

/// Execute `command` and return the run directory it wrote.
pub fn run(command: Command, inv: &Invocation) -> Result<PathBuf, CliError> {
    let cfg = inv.resolve()?;
    let mut dir = RunDir::create(Path::new(&cfg.output.directory), command.name(), &cfg.echo())?;
    let result = execute(command, &cfg, &mut dir, inv.model.as_deref());
    match &result {
        Ok(()) => dir.log(format!("{} finished", command.name())),
        Err(e) => dir.log(format!("{} failed ({}): {e}", command.name(), e.category())),
    }
    result.map(|_| dir.path().to_path_buf())
}

fn execute(command: Command, cfg: &RunConfig, dir: &mut RunDir, model: Option<&Path>) -> Result<(), CliError> {
    match command {
        Command::GenManifold => commands::gen_manifold(cfg, dir),
        Command::Train => commands::train_model(cfg, dir).map(|_| ()),
        Command::SolveSfem => commands::solve_reference(cfg, dir).map(|_| ()),
        Command::Compare => commands::compare(cfg, dir, model).map(|_| ()),
        Command::Export => commands::export(cfg, dir, model),
    }
}
