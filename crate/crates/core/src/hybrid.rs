//! First-order method until the switch rule fires, then Newton-PCG.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::aabpg::{AabpgConfig, AabpgStepper};
use crate::baseline::{BaselineConfig, BaselineStepper};
use crate::driver::{drive, LoopEnd, Stepper, SwitchRule};
use crate::error::{config_err, PfcError, Result};
use crate::lattice::{project_mass_zero, FourierField};
use crate::model::{Problem, Sampled};
use crate::newton::{newton_from, NewtonConfig};
use crate::report::{SolverReport, Termination};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum FirstStage {
    Aabpg(AabpgConfig),
    Baseline(BaselineConfig),
}

impl FirstStage {
    fn max_iter(&self) -> usize {
        match self {
            FirstStage::Aabpg(c) => c.max_iter,
            FirstStage::Baseline(c) => c.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridConfig {
    pub first: FirstStage,
    pub switch: SwitchRule,
    #[serde(default)]
    pub newton: NewtonConfig,
}

impl HybridConfig {
    pub fn validate(&self) -> Result<()> {
        let SwitchRule { energy_tol, grad_tol } = self.switch;
        if !(energy_tol >= 0.0 && grad_tol >= 0.0) {
            return config_err("switch thresholds must be nonnegative");
        }
        match &self.first {
            FirstStage::Aabpg(c) => c.validate()?,
            FirstStage::Baseline(c) => c.validate()?,
        }
        self.newton.validate()
    }
}

/// Runs the hybrid method. The final tolerance is the Newton tolerance.
pub fn hybrid_run(problem: &Problem, x0: FourierField, config: &HybridConfig) -> Result<SolverReport> {
    config.validate()?;
    let x0 = problem.sample(project_mass_zero(x0))?;
    match &config.first {
        FirstStage::Aabpg(c) => {
            let s = AabpgStepper::from_sampled(problem, x0, c.clone())?;
            finish(problem, s, config, AabpgStepper::into_current)
        }
        FirstStage::Baseline(c) => {
            let s = BaselineStepper::from_sampled(problem, x0, c.clone())?;
            finish(problem, s, config, BaselineStepper::into_current)
        }
    }
}

fn finish<S: Stepper>(
    problem: &Problem,
    mut stepper: S,
    config: &HybridConfig,
    into_current: impl FnOnce(S) -> Sampled,
) -> Result<SolverReport> {
    let clock = Instant::now();
    let label = format!("N-{}", stepper.label());
    // an infinite threshold switches before the first step
    let immediate = config.switch.energy_tol == f64::INFINITY || config.switch.grad_tol == f64::INFINITY;
    let cap = if immediate { 0 } else { config.first.max_iter() };
    let first = drive(&mut stepper, config.newton.tol, cap, Some(&config.switch), clock)?;
    let mut rows = first.rows;
    let switching = match first.end {
        LoopEnd::Switch => true,
        LoopEnd::Finished(t) => immediate && t == Termination::MaxIterations,
    };
    if let (false, LoopEnd::Finished(termination)) = (switching, first.end) {
        let grad_norm = stepper.gradient().projected_norm();
        let point = into_current(stepper);
        return Ok(SolverReport {
            method: label,
            rows,
            field: point.field,
            energy: point.energy,
            grad_norm,
            termination,
            iterations: first.iterations,
            seconds: clock.elapsed().as_secs_f64(),
            switch_iter: None,
        });
    }
    let point = into_current(stepper);
    let switch_iter = first.iterations + 1;
    let out = newton_from(problem, point, &config.newton, clock, switch_iter)?;
    rows.extend(out.rows);
    Ok(SolverReport {
        method: label,
        rows,
        field: out.point.field,
        energy: out.point.energy,
        grad_norm: out.grad.norm(),
        termination: out.termination,
        iterations: first.iterations + out.iterations,
        seconds: clock.elapsed().as_secs_f64(),
        switch_iter: Some(switch_iter),
    })
}

/// Wall-time ratio `plain / hybrid` of two converged runs with matching energies.
pub fn acceleration_ratio(plain: &SolverReport, hybrid: &SolverReport) -> Result<f64> {
    if !(plain.converged() && hybrid.converged()) {
        return Err(PfcError::MismatchedReports(format!(
            "both runs must converge ({}: {}, {}: {})",
            plain.method, plain.termination, hybrid.method, hybrid.termination
        )));
    }
    let (a, b) = (plain.energy.total, hybrid.energy.total);
    if (a - b).abs() > 1e-6 * a.abs().max(b.abs()) {
        return Err(PfcError::MismatchedReports(format!("final energies differ: {a} vs {b}")));
    }
    if !(hybrid.seconds > 0.0) {
        return Err(PfcError::MismatchedReports("hybrid run has no recorded time".into()));
    }
    Ok(plain.seconds / hybrid.seconds)
}
