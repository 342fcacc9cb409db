//! Fixed-step semi-implicit schemes for the gradient flow `x_t = -grad E(x)`.
//!
//! The linear part is treated implicitly and the bulk force explicitly.
//! SSIS1 adds the stabilizer `S (x+ - x)`, SSIS2 is the BDF2 variant with the
//! stabilizer `S (x+ - 2x + x-)`.

use serde::{Deserialize, Serialize};

use crate::bregman::prox_p2;
use crate::driver::{run_to_report, StepInfo, Stepper};
use crate::error::{config_err, Result};
use crate::lattice::{project_mass_zero, FourierField};
use crate::model::{InteractionDiagonal, Problem, Sampled};
use crate::report::SolverReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Sis,
    Ssis1,
    Ssis2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub scheme: Scheme,
    pub alpha: f64,
    pub stabilizer: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Sis,
            alpha: 0.1,
            stabilizer: 8.0,
            tol: 1e-9,
            max_iter: 100_000,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return config_err(format!("step size must be positive, got {}", self.alpha));
        }
        if !(self.stabilizer >= 0.0 && self.stabilizer.is_finite()) {
            return config_err(format!("stabilizer must be nonnegative, got {}", self.stabilizer));
        }
        if !(self.tol >= 0.0) {
            return config_err("tolerance must be nonnegative");
        }
        Ok(())
    }
}

/// `(I + alpha D)^{-1} (x - alpha P1 grad F(x))`
pub fn sis_step(x: &FourierField, bulk: &FourierField, alpha: f64, diag: &InteractionDiagonal) -> Result<FourierField> {
    prox_p2(x, bulk, alpha, diag)
}

/// `(I + alpha D + alpha S) x+ = (I + alpha S) x - alpha P1 grad F(x)`
pub fn ssis1_step(
    x: &FourierField,
    bulk: &FourierField,
    alpha: f64,
    s: f64,
    diag: &InteractionDiagonal,
) -> Result<FourierField> {
    if !(alpha > 0.0) {
        return config_err(format!("step size must be positive, got {alpha}"));
    }
    x.check_lattice(bulk)?;
    let mut out = FourierField::zeros(x.grid());
    let (xa, g, d) = (x.amplitudes(), bulk.amplitudes(), diag.entries());
    let keep = 1.0 + alpha * s;
    for (i, o) in out.amplitudes_mut().iter_mut().enumerate().skip(1) {
        *o = (xa[i] * keep - g[i] * alpha) / (1.0 + alpha * d[i] + alpha * s);
    }
    Ok(out)
}

/// `(3 + 2 alpha D + 2 alpha S) x+ = 4x - x- - 2 alpha P1 (2 grad F(x) - grad F(x-)) + 2 alpha S (2x - x-)`
#[allow(clippy::too_many_arguments)]
pub fn ssis2_step(
    x: &FourierField,
    bulk: &FourierField,
    x_prev: &FourierField,
    bulk_prev: &FourierField,
    alpha: f64,
    s: f64,
    diag: &InteractionDiagonal,
) -> Result<FourierField> {
    if !(alpha > 0.0) {
        return config_err(format!("step size must be positive, got {alpha}"));
    }
    x.check_lattice(bulk)?;
    x.check_lattice(x_prev)?;
    x.check_lattice(bulk_prev)?;
    let mut out = FourierField::zeros(x.grid());
    let (xa, g, xp, gp, d) = (
        x.amplitudes(),
        bulk.amplitudes(),
        x_prev.amplitudes(),
        bulk_prev.amplitudes(),
        diag.entries(),
    );
    let two_a = 2.0 * alpha;
    for (i, o) in out.amplitudes_mut().iter_mut().enumerate().skip(1) {
        let lin = xa[i] * 2.0 - xp[i];
        let rhs = xa[i] * 4.0 - xp[i] - (g[i] * 2.0 - gp[i]) * two_a + lin * (two_a * s);
        *o = rhs / (3.0 + two_a * d[i] + two_a * s);
    }
    Ok(out)
}

pub struct BaselineStepper<'p> {
    problem: &'p Problem,
    config: BaselineConfig,
    x: Sampled,
    x_bulk: FourierField,
    x_grad: FourierField,
    prev: Option<(FourierField, FourierField)>,
}

impl<'p> BaselineStepper<'p> {
    pub fn new(problem: &'p Problem, x0: FourierField, config: BaselineConfig) -> Result<Self> {
        config.validate()?;
        let x = problem.sample(project_mass_zero(x0))?;
        Self::from_sampled(problem, x, config)
    }

    pub fn from_sampled(problem: &'p Problem, x: Sampled, config: BaselineConfig) -> Result<Self> {
        config.validate()?;
        let x_bulk = problem.bulk_gradient_of(&x)?;
        let mut x_grad = problem.diagonal().apply(&x.field);
        x_grad.axpy(1.0, &x_bulk);
        Ok(Self {
            problem,
            config,
            x,
            x_bulk,
            x_grad,
            prev: None,
        })
    }

    pub fn into_current(self) -> Sampled {
        self.x
    }
}

impl Stepper for BaselineStepper<'_> {
    fn label(&self) -> String {
        match self.config.scheme {
            Scheme::Sis => "SIS".into(),
            Scheme::Ssis1 => "SSIS1".into(),
            Scheme::Ssis2 => "SSIS2".into(),
        }
    }

    fn current(&self) -> &Sampled {
        &self.x
    }

    fn gradient(&self) -> &FourierField {
        &self.x_grad
    }

    fn step(&mut self) -> Result<StepInfo> {
        let (alpha, s, diag) = (self.config.alpha, self.config.stabilizer, self.problem.diagonal());
        let next = match (self.config.scheme, &self.prev) {
            (Scheme::Sis, _) => sis_step(&self.x.field, &self.x_bulk, alpha, diag)?,
            (Scheme::Ssis1, _) | (Scheme::Ssis2, None) => ssis1_step(&self.x.field, &self.x_bulk, alpha, s, diag)?,
            (Scheme::Ssis2, Some((xp, gp))) => ssis2_step(&self.x.field, &self.x_bulk, xp, gp, alpha, s, diag)?,
        };
        let next = self.problem.sample_near(&self.x, next)?;
        let bulk = self.problem.bulk_gradient_of(&next)?;
        let mut grad = diag.apply(&next.field);
        grad.axpy(1.0, &bulk);
        let old = std::mem::replace(&mut self.x, next);
        let old_bulk = std::mem::replace(&mut self.x_bulk, bulk);
        self.x_grad = grad;
        if self.config.scheme == Scheme::Ssis2 {
            self.prev = Some((old.field, old_bulk));
        }
        Ok(StepInfo {
            step: alpha,
            weight: None,
            accepted: true,
            backtracks: 0,
            stalled: false,
        })
    }
}

pub fn baseline_run(problem: &Problem, x0: FourierField, config: &BaselineConfig) -> Result<SolverReport> {
    let mut stepper = BaselineStepper::new(problem, x0, config.clone())?;
    run_to_report(&mut stepper, config.tol, config.max_iter)
}

/// True if the energy ever rises by more than `rel` relative between rows.
pub fn energy_oscillates(report: &SolverReport, rel: f64) -> bool {
    report
        .rows
        .windows(2)
        .any(|w| w[1].energy > w[0].energy + rel * w[0].energy.abs().max(1e-300))
}
