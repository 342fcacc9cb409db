use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pfc_core::config::{Initializer, RunConfig, SolverSpec, METHOD_LABELS, PRESETS};
use pfc_core::run::{bench, check_gradients, run, with_threads, write_bench_table, RunOptions};
use pfc_core::{PfcError, Result};

#[derive(Parser)]
#[command(name = "pfc", version, about = "Stationary states of phase-field-crystal models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a configuration and write trace, snapshot and summary.
    Run {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Continue from a snapshot written by an earlier run.
    Resume {
        #[arg(long)]
        snapshot: PathBuf,
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run several methods from the same initial field and compare.
    Bench {
        #[command(flatten)]
        source: Source,
        /// Comma-separated method names.
        #[arg(long, value_delimiter = ',', default_value = "aabpg2,n-aabpg2,sis,n-sis")]
        methods: Vec<String>,
        /// Common gradient tolerance.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Also write the table to this file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare analytic derivatives with finite differences on a small lattice.
    CheckGradients {
        #[command(flatten)]
        source: Source,
        /// Largest mode count per axis.
        #[arg(long, default_value_t = 8)]
        max_modes: usize,
        #[arg(long, default_value_t = 10)]
        directions: usize,
        /// Largest accepted relative error.
        #[arg(long, default_value_t = 1e-6)]
        limit: f64,
    },
}

#[derive(Args)]
struct Source {
    /// TOML run configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Bundled configuration.
    #[arg(long)]
    preset: Option<String>,
    /// Random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Mode counts per axis, one value for all axes or one per axis.
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<usize>>,
}

#[derive(Args)]
struct RunArgs {
    /// Output directory (default: runs/<name>).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Replace the configured solver by a named method.
    #[arg(long)]
    method: Option<String>,
    /// Final gradient tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Write the physical samples of the final field.
    #[arg(long)]
    render: bool,
}

impl Source {
    fn load(&self) -> Result<RunConfig> {
        let mut config = match (&self.config, &self.preset) {
            (Some(path), None) => RunConfig::load(path)?,
            (None, Some(name)) => RunConfig::preset(name)?,
            _ => {
                return Err(PfcError::Config(format!(
                    "give --config FILE or --preset NAME (one of {})",
                    PRESETS.join(", ")
                )))
            }
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(modes) = &self.modes {
            let n = config.lattice.modes.len();
            config.lattice.modes = match modes.len() {
                1 => vec![modes[0]; n],
                m if m == n => modes.clone(),
                m => return Err(PfcError::Config(format!("--modes has {m} values, lattice has {n} axes"))),
            };
        }
        Ok(config)
    }
}

impl RunArgs {
    fn apply(&self, config: &mut RunConfig) -> Result<()> {
        if let Some(label) = &self.method {
            config.solver = SolverSpec::from_label(label, &config.model, config.switch_rule())?;
        }
        if let Some(tol) = self.tol {
            config.solver.set_tol(tol);
        }
        Ok(())
    }
}

fn execute(mut config: RunConfig, source: &Source, args: &RunArgs) -> Result<ExitCode> {
    args.apply(&mut config)?;
    let out = args
        .output
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(&config.name));
    let options = RunOptions {
        threads: source.threads,
        render: args.render,
    };
    let outcome = run(&config, &out, &options)?;
    let s = &outcome.summary;
    println!(
        "{} {}: E = {:.14} |g| = {:.3e} after {} iterations in {:.2} s ({})",
        s.name, s.method, s.energy.total, s.grad_norm, s.iterations, s.seconds, s.termination
    );
    if let (Some(r), Some(e)) = (s.reference_energy, s.relative_error) {
        println!("reference {r:.14}, relative error {e:.3e}");
    }
    println!("wrote {}", outcome.dir.display());
    Ok(if outcome.report.converged() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { source, run } => execute(source.load()?, &source, &run),
        Command::Resume { snapshot, source, run } => {
            let mut config = source.load()?;
            config.init = Initializer::Snapshot { path: snapshot };
            execute(config, &source, &run)
        }
        Command::Bench {
            source,
            methods,
            tol,
            output,
        } => {
            let config = source.load()?;
            let solvers = methods
                .iter()
                .map(|m| SolverSpec::from_label(m.trim(), &config.model, config.switch_rule()))
                .collect::<Result<Vec<_>>>()?;
            let rows = with_threads(source.threads, || bench(&config, &solvers, tol))??;
            write_bench_table(&rows, std::io::stdout().lock())?;
            if let Some(path) = output {
                write_bench_table(&rows, std::fs::File::create(path)?)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::CheckGradients {
            source,
            max_modes,
            directions,
            limit,
        } => {
            let config = source.load()?;
            let seed = config.seed;
            let check = with_threads(source.threads, || {
                check_gradients(&config.model, &config.lattice, max_modes, directions, seed)
            })??;
            println!("gradient relative error {:.3e}", check.gradient);
            println!("hessian  relative error {:.3e}", check.hessian);
            let ok = check.gradient < limit && check.hessian < limit;
            println!("{}", if ok { "ok" } else { "FAILED" });
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, PfcError::Config(_)) {
                eprintln!("known methods: {}", METHOD_LABELS.join(", "));
            }
            ExitCode::FAILURE
        }
    }
}
