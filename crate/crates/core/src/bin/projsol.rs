use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use projsol::cli::{self, CliError, RunSpec, StartSpec};
use projsol::instances::list_instances;

#[derive(Parser)]
#[command(name = "projsol", version, about = "Projected solutions of quasi equilibrium problems")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the projected-solution procedure.
    Solve {
        /// Configuration file; optional when --instance is given.
        config: Option<PathBuf>,
        /// Named instance, e.g. `moving_square` or `l2_truncated:8`.
        #[arg(long, conflicts_with = "config")]
        instance: Option<String>,
        /// Start point as a comma list, e.g. `0.5,0`.
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        #[arg(long)]
        stop_tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        cert: Option<PathBuf>,
        /// Run multistart starts on separate threads.
        #[arg(long)]
        parallel: bool,
    },
    /// Grid search for points with `|P_C(S(x)) - x| <= eps + resolution`.
    Oracle {
        config: Option<PathBuf>,
        #[arg(long, conflicts_with = "config")]
        instance: Option<String>,
        #[arg(long)]
        resolution: f64,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the named instances.
    ListInstances,
}

fn base_spec(config: Option<PathBuf>, instance: Option<String>, dim_hint: Option<&[f64]>) -> Result<RunSpec, CliError> {
    match (config, instance) {
        (Some(path), _) => cli::load_config(&path),
        (None, Some(name)) => {
            let x0 = match dim_hint {
                Some(x0) => x0.to_vec(),
                None => {
                    let problem = cli::resolve_problem(&cli::ProblemSpec::Named(name.clone()))?;
                    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
                    projsol::geometry::sample_point(problem.qep.domain(), &mut rng)
                        .map_err(|e| CliError::Validation { field: "x0".into(), message: e.to_string() })?
                        .iter()
                        .copied()
                        .collect()
                }
            };
            Ok(cli::instance_spec(&name, x0))
        }
        (None, None) => Err(CliError::Validation { field: "config".into(), message: "give a config path or --instance".into() }),
    }
}

fn run(args: Args) -> Result<i32, CliError> {
    let mut stdout = std::io::stdout();
    match args.command {
        Command::Solve { config, instance, x0, stop_tol, max_iter, trace, cert, parallel } => {
            let x0 = x0.as_deref().map(cli::parse_vector).transpose()?;
            let mut spec = base_spec(config, instance, x0.as_deref())?;
            if let Some(x0) = x0 {
                spec.start = StartSpec::Point(x0);
            }
            if let Some(v) = stop_tol {
                spec.outer.stop_tol = v;
            }
            if let Some(v) = max_iter {
                spec.outer.max_iterations = v;
                spec.outer.cycle_window = spec.outer.cycle_window.min(v.max(2));
            }
            spec.output.trace = trace.or(spec.output.trace);
            spec.output.certificate = cert.or(spec.output.certificate);
            spec.output.parallel |= parallel;
            cli::validate(&spec)?;
            cli::run_command(&spec, &mut stdout)
        }
        Command::Oracle { config, instance, resolution, eps, out } => {
            let mut spec = base_spec(config, instance, None)?;
            spec.output.oracle = out.or(spec.output.oracle);
            cli::oracle_command(&spec, resolution, eps, &mut stdout)
        }
        Command::ListInstances => {
            for info in list_instances() {
                println!("{:<26} {}", info.pattern, info.description);
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
