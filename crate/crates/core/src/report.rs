//! Solver traces and summaries.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lattice::FourierField;
use crate::model::EnergyBreakdown;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Projected gradient norm fell below the tolerance.
    Converged,
    MaxIterations,
    /// No admissible step could be found.
    Stalled,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Termination::Converged => "converged",
            Termination::MaxIterations => "max_iterations",
            Termination::Stalled => "stalled",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    FirstOrder,
    Newton,
}

/// One outer iteration. Fields that do not apply to a method are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub phase: Phase,
    pub energy: f64,
    pub grad_norm: f64,
    /// Accepted step size (alpha for first-order methods, t for Newton).
    pub step: f64,
    pub weight: Option<f64>,
    pub restart: bool,
    pub backtracks: usize,
    pub mu: Option<f64>,
    pub pcg_iters: Option<usize>,
    /// `||g_k - g_{k-1}||` between consecutive accepted iterates.
    pub grad_change: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub method: String,
    pub rows: Vec<TraceRow>,
    pub field: FourierField,
    pub energy: EnergyBreakdown,
    pub grad_norm: f64,
    pub termination: Termination,
    /// Number of outer iterations performed, restarts included.
    pub iterations: usize,
    pub seconds: f64,
    /// Row index of the first Newton iteration of a hybrid run.
    pub switch_iter: Option<usize>,
}

impl SolverReport {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    /// Accepted step sizes of first-order rows.
    pub fn accepted_steps(&self) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.phase == Phase::FirstOrder && !r.restart && r.iter > 0)
            .map(|r| r.step)
            .collect()
    }

    pub fn write_trace<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "iter\tphase\tenergy\tgrad_norm\tstep\tweight\trestart\tbacktracks\tmu\tpcg_iters\tgrad_change\tseconds"
        )?;
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.6e}"));
        for r in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{:.17e}\t{:.6e}\t{:.6e}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.3}",
                r.iter,
                match r.phase {
                    Phase::FirstOrder => "first",
                    Phase::Newton => "newton",
                },
                r.energy,
                r.grad_norm,
                r.step,
                opt(r.weight),
                u8::from(r.restart),
                r.backtracks,
                opt(r.mu),
                r.pcg_iters.map_or_else(|| "-".to_string(), |v| v.to_string()),
                opt(r.grad_change),
                r.seconds,
            )?;
        }
        Ok(())
    }
}
