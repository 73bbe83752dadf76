use clap::{Parser, Subcommand};
use neckflow::cli;
use neckflow::config::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "neckflow",
    about = "Stokes flow between two nearly touching rigid inclusions: singular fields, mixed FEM, blow-up rate sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form field checks.
    Fields {
        #[command(subcommand)]
        sub: FieldsCommand,
    },
    /// Manufactured-solution convergence of the Stokes solver.
    ValidateSolver {
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// One full decomposition solve at a fixed gap width.
    Solve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Optional probe file with one "x y" pair per line.
        #[arg(long)]
        probes: Option<PathBuf>,
    },
    /// Gap-width sweep with rate fits and verdicts.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Truncate to 3 gap widths on coarser meshes.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the verdicts of a finished sweep directory.
    Report { dir: PathBuf },
}

#[derive(Subcommand)]
enum FieldsCommand {
    /// Run the identity suite (divergence, traces, residual envelopes).
    Check {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn load_config(path: &Option<PathBuf>) -> neckflow::Result<RunConfig> {
    match path {
        Some(p) => RunConfig::from_path(p),
        None => Ok(RunConfig::default()),
    }
}

fn dispatch() -> neckflow::Result<i32> {
    if let Ok(width) = std::env::var("NECKFLOW_PARALLELISM") {
        if let Ok(n) = width.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
    let args = Cli::parse();
    match args.command {
        Command::Fields { sub: FieldsCommand::Check { config, out } } => {
            let cfg = load_config(&config)?;
            cli::cmd_fields_check(&cfg, &out)
        }
        Command::ValidateSolver { levels, out } => cli::cmd_validate_solver(levels, &out),
        Command::Solve { config, epsilon, out, probes } => {
            let cfg = load_config(&config)?;
            cli::cmd_solve(&cfg, epsilon, &out, probes.as_deref())
        }
        Command::Sweep { config, quick, out } => {
            let cfg = load_config(&config)?;
            cli::cmd_sweep(&cfg, quick, &out)
        }
        Command::Report { dir } => cli::cmd_report(&dir),
    }
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code_for(&e) as u8)
        }
    }
}
