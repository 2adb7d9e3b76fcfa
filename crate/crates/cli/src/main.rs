use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use surfrd_cli::{run, Command, Invocation};

#[derive(Parser)]
#[command(name = "surfrd", version, about = "Reaction-diffusion on stochastic surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample the surface and export its geometry.
    GenManifold(Common),
    /// Train the neural field.
    Train(Common),
    /// Run the surface finite element reference solver.
    SolveSfem(Common),
    /// Compare a network against the reference solver.
    Compare(WithModel),
    /// Export field tables and heat maps of a network.
    Export(WithModel),
}

#[derive(Args)]
struct Common {
    /// Configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset applied before the configuration file.
    #[arg(long)]
    preset: Option<String>,
    /// Override one key, e.g. `--set train.n_epochs=500`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Parent directory of the run directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct WithModel {
    #[command(flatten)]
    common: Common,
    /// Trained checkpoint; without it a network is trained first.
    #[arg(long)]
    model: Option<PathBuf>,
}

fn invocation(c: Common, model: Option<PathBuf>) -> Invocation {
    Invocation {
        config: c.config,
        preset: c.preset,
        overrides: c.overrides,
        out: c.out,
        threads: c.threads,
        model,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, inv) = match cli.command {
        Cmd::GenManifold(c) => (Command::GenManifold, invocation(c, None)),
        Cmd::Train(c) => (Command::Train, invocation(c, None)),
        Cmd::SolveSfem(c) => (Command::SolveSfem, invocation(c, None)),
        Cmd::Compare(m) => (Command::Compare, invocation(m.common, m.model)),
        Cmd::Export(m) => (Command::Export, invocation(m.common, m.model)),
    };
    let threads = match inv.resolve() {
        Ok(cfg) => cfg.threads,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.category());
            return ExitCode::from(e.exit_code());
        }
    };
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match run(command, &inv) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error [{}]: {e}", e.category());
            ExitCode::from(e.exit_code())
        }
    }
}
