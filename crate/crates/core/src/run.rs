//! Run orchestration: initial fields, artifacts on disk, benchmarks.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{builtin_seeds, Initializer, RunConfig, SolverSpec};
use crate::error::{PfcError, Result};
use crate::hybrid::acceleration_ratio;
use crate::lattice::{build_lattice, project_mass_zero, FourierField, IndexGrid, LatticeSpec};
use crate::model::{EnergyBreakdown, ModelSpec, Problem};
use crate::random::{random_hermitian, smooth_random_hermitian};
use crate::report::{SolverReport, Termination};
use crate::seeds::SeedList;
use crate::snapshot::Snapshot;

pub const TRACE_FILE: &str = "trace.tsv";
pub const SNAPSHOT_FILE: &str = "final.pfcf";
pub const SUMMARY_FILE: &str = "summary.json";
pub const RENDER_FILE: &str = "field.f64";

/// Initial field for `config` on `grid`, mass-zero and Hermitian.
pub fn build_initial(config: &RunConfig, grid: &Arc<IndexGrid>) -> Result<FourierField> {
    let field = match &config.init {
        Initializer::Seeds { builtin, path, scale } => {
            let text = match (builtin, path) {
                (Some(name), _) => builtin_seeds(name)
                    .ok_or_else(|| PfcError::Config(format!("no bundled seed list named '{name}'")))?
                    .to_string(),
                (None, Some(p)) => fs::read_to_string(p)
                    .map_err(|e| PfcError::Config(format!("cannot read seed file {}: {e}", p.display())))?,
                (None, None) => return Err(PfcError::Config("seed initializer without a source".into())),
            };
            let mut field = SeedList::parse(&text)?.build(grid)?;
            field.scale(*scale);
            field
        }
        Initializer::Random { scale } => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            random_hermitian(grid, &mut rng, *scale)
        }
        Initializer::Snapshot { path } => Snapshot::load(path)?.into_field(grid)?,
    };
    Ok(project_mass_zero(field))
}

/// Everything a solver needs, built and checked before anything is written.
pub struct Prepared {
    pub grid: Arc<IndexGrid>,
    pub problem: Problem,
    pub initial: FourierField,
}

pub fn prepare(config: &RunConfig) -> Result<Prepared> {
    config.validate()?;
    let grid = build_lattice(config.lattice.clone())?;
    let problem = Problem::new(&grid, config.model)?;
    let initial = build_initial(config, &grid)?;
    Ok(Prepared { grid, problem, initial })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub method: String,
    pub termination: Termination,
    pub energy: EnergyBreakdown,
    pub grad_norm: f64,
    pub iterations: usize,
    /// Solver wall time, I/O excluded.
    pub seconds: f64,
    pub switch_iter: Option<usize>,
    pub reference_energy: Option<f64>,
    pub relative_error: Option<f64>,
    pub modes: Vec<usize>,
    pub seed: u64,
}

impl RunSummary {
    pub fn new(config: &RunConfig, report: &SolverReport) -> Self {
        let relative_error = config
            .reference_energy
            .map(|r| (report.energy.total - r).abs() / r.abs().max(f64::MIN_POSITIVE));
        Self {
            name: config.name.clone(),
            method: report.method.clone(),
            termination: report.termination,
            energy: report.energy,
            grad_norm: report.grad_norm,
            iterations: report.iterations,
            seconds: report.seconds,
            switch_iter: report.switch_iter,
            reference_energy: config.reference_energy,
            relative_error,
            modes: config.lattice.modes.clone(),
            seed: config.seed,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads for the transforms; `None` keeps the global pool.
    pub threads: Option<usize>,
    /// Also write the physical samples of the final field.
    pub render: bool,
}

pub struct RunOutcome {
    pub summary: RunSummary,
    pub report: SolverReport,
    pub dir: PathBuf,
}

/// Runs `f` on a pool with `threads` workers, or directly.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(PfcError::Config("thread count must be positive".into())),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| PfcError::Config(format!("cannot start thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Solves `config` and writes the trace, final snapshot and summary into
/// `out_dir`. Nothing is written if the config or initial field is invalid.
pub fn run(config: &RunConfig, out_dir: &Path, options: &RunOptions) -> Result<RunOutcome> {
    with_threads(options.threads, || {
        let prepared = prepare(config)?;
        if options.render && !is_identity(&prepared.grid) {
            return Err(PfcError::Config(
                "rendering needs a periodic lattice; projected lattices keep spectral data only".into(),
            ));
        }
        let report = config.solver.run(&prepared.problem, prepared.initial)?;
        fs::create_dir_all(out_dir)?;
        report.write_trace(BufWriter::new(File::create(out_dir.join(TRACE_FILE))?))?;
        Snapshot::of(&report.field).save(&out_dir.join(SNAPSHOT_FILE))?;
        if options.render {
            let samples = prepared.problem.transform().to_physical(&report.field)?;
            let mut out = BufWriter::new(File::create(out_dir.join(RENDER_FILE))?);
            for v in samples {
                out.write_all(&v.to_le_bytes())?;
            }
            out.flush()?;
        }
        let summary = RunSummary::new(config, &report);
        let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
        fs::write(out_dir.join(SUMMARY_FILE), json + "\n")?;
        Ok(RunOutcome {
            summary,
            report,
            dir: out_dir.to_path_buf(),
        })
    })?
}

fn is_identity(grid: &IndexGrid) -> bool {
    let spec = grid.spec();
    let n = spec.embedding_dim();
    spec.projection.len() == n * n
        && (0..n * n).all(|i| spec.projection[i] == if i % (n + 1) == 0 { 1.0 } else { 0.0 })
}

/// One line of a benchmark table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: String,
    pub iterations: usize,
    pub seconds: f64,
    pub energy: f64,
    pub termination: Termination,
    /// Wall-time ratio against the plain first-order method, for hybrids.
    pub ratio: Option<f64>,
}

/// Runs each solver from the same initial field to the common tolerance
/// `tol`. Hybrids are compared against their first stage when it is also
/// in the list.
pub fn bench(config: &RunConfig, solvers: &[SolverSpec], tol: f64) -> Result<Vec<BenchRow>> {
    let prepared = prepare(config)?;
    let mut reports = Vec::with_capacity(solvers.len());
    for spec in solvers {
        let mut spec = spec.clone();
        spec.set_tol(tol);
        spec.validate()?;
        log::info!("bench: running {}", spec.name());
        reports.push(spec.run(&prepared.problem, prepared.initial.clone())?);
    }
    let rows = reports
        .iter()
        .map(|r| {
            let ratio = r.method.strip_prefix("N-").and_then(|plain| {
                let base = reports.iter().find(|p| p.method == plain)?;
                acceleration_ratio(base, r)
                    .map_err(|e| log::warn!("no ratio for {}: {e}", r.method))
                    .ok()
            });
            BenchRow {
                method: r.method.clone(),
                iterations: r.iterations,
                seconds: r.seconds,
                energy: r.energy.total,
                termination: r.termination,
                ratio,
            }
        })
        .collect();
    Ok(rows)
}

pub fn write_bench_table<W: Write>(rows: &[BenchRow], mut out: W) -> Result<()> {
    writeln!(out, "method\titerations\tseconds\tenergy\ttermination\tratio")?;
    for r in rows {
        let ratio = r.ratio.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
        writeln!(
            out,
            "{}\t{}\t{:.3}\t{:.14}\t{}\t{ratio}",
            r.method, r.iterations, r.seconds, r.energy, r.termination
        )?;
    }
    Ok(())
}

/// Worst relative errors of the analytic derivatives against central
/// differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub gradient: f64,
    pub hessian: f64,
}

/// Compares gradient and Hessian-vector products with central differences
/// along `directions` random directions, on a copy of `lattice` with at most
/// `max_modes` modes per axis.
pub fn check_gradients(
    model: &ModelSpec,
    lattice: &LatticeSpec,
    max_modes: usize,
    directions: usize,
    seed: u64,
) -> Result<GradientCheck> {
    let mut spec = lattice.clone();
    let cap = (max_modes / 2 * 2).max(2);
    spec.modes.iter_mut().for_each(|m| *m = (*m).min(cap));
    let grid = build_lattice(spec)?;
    let problem = Problem::new(&grid, *model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = project_mass_zero(smooth_random_hermitian(&grid, &mut rng, 0.3, 0.2));
    let xs = problem.sample(x.clone())?;
    let g = problem.full_gradient_of(&xs)?;
    let hessian = problem.hessian_at(&xs);
    let eps = 1e-4;
    let mut worst = GradientCheck {
        gradient: 0.0,
        hessian: 0.0,
    };
    for _ in 0..directions {
        let mut v = project_mass_zero(random_hermitian(&grid, &mut rng, 1.0));
        v.scale(1.0 / v.norm());
        let plus = x.lincomb(1.0, &v, eps);
        let minus = x.lincomb(1.0, &v, -eps);
        let fd = (problem.energy(&plus)?.total - problem.energy(&minus)?.total) / (2.0 * eps);
        let err = (fd - g.dot(&v)).abs() / g.norm().max(1e-300);
        worst.gradient = worst.gradient.max(err);

        let gp = problem.full_gradient(&plus)?;
        let gm = problem.full_gradient(&minus)?;
        let mut fd_h = gp.sub(&gm);
        fd_h.scale(1.0 / (2.0 * eps));
        let hv = hessian.apply(&v)?;
        let err = fd_h.sub(&hv).norm() / hv.norm().max(1e-300);
        worst.hessian = worst.hessian.max(err);
    }
    Ok(worst)
}
