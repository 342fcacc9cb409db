//! Outer loop shared by the first-order methods.

use std::time::Instant;

use crate::error::Result;
use crate::lattice::FourierField;
use crate::model::Sampled;
use crate::report::{Phase, SolverReport, Termination, TraceRow};

/// What one call to [`Stepper::step`] did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub step: f64,
    pub weight: Option<f64>,
    /// False when the candidate was rejected and the iterate kept.
    pub accepted: bool,
    pub backtracks: usize,
    /// The method cannot make further progress from this state.
    pub stalled: bool,
}

/// A first-order method advanced one iteration at a time.
pub trait Stepper {
    fn label(&self) -> String;
    fn current(&self) -> &Sampled;
    /// `D x + grad F(x)` at the current iterate.
    fn gradient(&self) -> &FourierField;
    fn step(&mut self) -> Result<StepInfo>;
}

/// Switch test of the hybrid method: `|E_k - E_{k-1}| < energy_tol` or
/// `||g_k - g_{k-1}|| < grad_tol`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SwitchRule {
    pub energy_tol: f64,
    pub grad_tol: f64,
}

impl SwitchRule {
    pub fn should_switch(&self, energy_change: f64, grad_change: f64) -> bool {
        energy_change.abs() < self.energy_tol || grad_change < self.grad_tol
    }
}

pub(crate) enum LoopEnd {
    Finished(Termination),
    Switch,
}

pub(crate) struct LoopResult {
    pub rows: Vec<TraceRow>,
    pub end: LoopEnd,
    pub iterations: usize,
}

/// Iterates `stepper` until convergence, the iteration cap, a stall or the
/// switch rule fires. Row 0 records the starting point.
pub(crate) fn drive<S: Stepper>(
    stepper: &mut S,
    tol: f64,
    max_iter: usize,
    switch: Option<&SwitchRule>,
    clock: Instant,
) -> Result<LoopResult> {
    let mut rows = Vec::new();
    let mut grad_norm = stepper.gradient().projected_norm();
    rows.push(TraceRow {
        iter: 0,
        phase: Phase::FirstOrder,
        energy: stepper.current().total(),
        grad_norm,
        step: 0.0,
        weight: None,
        restart: false,
        backtracks: 0,
        mu: None,
        pcg_iters: None,
        grad_change: None,
        seconds: clock.elapsed().as_secs_f64(),
    });
    let mut prev_grad = stepper.gradient().clone();
    let mut prev_energy = stepper.current().total();
    let mut accepted = 0usize;
    let mut iter = 0usize;
    let end = loop {
        if grad_norm < tol {
            break LoopEnd::Finished(Termination::Converged);
        }
        if iter >= max_iter {
            break LoopEnd::Finished(Termination::MaxIterations);
        }
        let info = stepper.step()?;
        iter += 1;
        let mut grad_change = None;
        if info.accepted {
            accepted += 1;
            let g = stepper.gradient();
            grad_norm = g.projected_norm();
            grad_change = Some(g.sub(&prev_grad).projected_norm());
            prev_grad = g.clone();
        }
        let energy = stepper.current().total();
        rows.push(TraceRow {
            iter,
            phase: Phase::FirstOrder,
            energy,
            grad_norm,
            step: info.step,
            weight: info.weight,
            restart: !info.accepted,
            backtracks: info.backtracks,
            mu: None,
            pcg_iters: None,
            grad_change,
            seconds: clock.elapsed().as_secs_f64(),
        });
        if info.stalled {
            break LoopEnd::Finished(Termination::Stalled);
        }
        if let (Some(rule), Some(dg)) = (switch, grad_change) {
            if accepted >= 2 && rule.should_switch(energy - prev_energy, dg) {
                break LoopEnd::Switch;
            }
        }
        if info.accepted {
            prev_energy = energy;
        }
    };
    Ok(LoopResult {
        rows,
        end,
        iterations: iter,
    })
}

/// Runs a stepper to completion and packages the report.
pub(crate) fn run_to_report<S: Stepper>(
    stepper: &mut S,
    tol: f64,
    max_iter: usize,
) -> Result<SolverReport> {
    let clock = Instant::now();
    let res = drive(stepper, tol, max_iter, None, clock)?;
    let termination = match res.end {
        LoopEnd::Finished(t) => t,
        LoopEnd::Switch => unreachable!("no switch rule given"),
    };
    let seconds = clock.elapsed().as_secs_f64();
    Ok(SolverReport {
        method: stepper.label(),
        rows: res.rows,
        field: stepper.current().field.clone(),
        energy: stepper.current().energy,
        grad_norm: stepper.gradient().projected_norm(),
        termination,
        iterations: res.iterations,
        seconds,
        switch_iter: None,
    })
}
