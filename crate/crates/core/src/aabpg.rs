//! Adaptive accelerated Bregman proximal gradient method.
//!
//! Each iteration extrapolates `y = x_k + w (x_k - x_{k-1})`, picks a step by
//! BB-initialized backtracking at `y`, and accepts the prox point `z` only if
//! it decreases the energy sufficiently relative to `x_k`; otherwise the
//! momentum is reset and `x_k` is kept.

use serde::{Deserialize, Serialize};

use crate::bregman::{prox, BregmanKernel};
use crate::driver::{run_to_report, StepInfo, Stepper};
use crate::error::{config_err, Result};
use crate::lattice::{project_mass_zero, FourierField};
use crate::model::{ModelSpec, Problem, Sampled};
use crate::report::SolverReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BbVariant {
    /// `<s,s> / <s,v>`
    Long,
    /// `<s,v> / <v,v>`
    Short,
    /// Long on even iterations, short on odd ones.
    Alternating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AabpgConfig {
    pub kernel: BregmanKernel,
    /// Restart constant; defaults to `1e-9` times the mode count.
    pub restart_c: Option<f64>,
    /// Line-search constant; defaults to `1e-9` times the mode count.
    pub line_search_eta: Option<f64>,
    pub shrink: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Step tried on the first iteration, where no BB pair exists yet.
    pub alpha0: f64,
    pub max_weight: f64,
    pub bb: BbVariant,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for AabpgConfig {
    fn default() -> Self {
        Self {
            kernel: BregmanKernel::P2,
            restart_c: None,
            line_search_eta: None,
            shrink: 0.5,
            alpha_min: 1e-6,
            alpha_max: 10.0,
            alpha0: 0.1,
            max_weight: 1.0,
            bb: BbVariant::Long,
            tol: 1e-9,
            max_iter: 10_000,
        }
    }
}

impl AabpgConfig {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        let pos = |v: Option<f64>| v.map_or(true, |x| x > 0.0 && x.is_finite());
        if !(pos(self.restart_c) && pos(self.line_search_eta)) {
            return config_err("restart and line-search constants must be positive");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return config_err(format!("shrink factor must lie in (0, 1), got {}", self.shrink));
        }
        if !(self.alpha_min > 0.0 && self.alpha_min <= self.alpha_max && self.alpha_max.is_finite()) {
            return config_err("need 0 < alpha_min <= alpha_max < inf");
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return config_err("alpha0 must be positive");
        }
        if !(self.max_weight >= 0.0 && self.max_weight.is_finite()) {
            return config_err("max_weight must be nonnegative");
        }
        if !(self.tol >= 0.0) {
            return config_err("tolerance must be nonnegative");
        }
        Ok(())
    }

    /// `(c, eta)` for a lattice with `modes` stored amplitudes.
    pub fn constants(&self, modes: usize) -> (f64, f64) {
        let scaled = 1e-9 * modes as f64;
        (
            self.restart_c.unwrap_or(scaled),
            self.line_search_eta.unwrap_or(scaled),
        )
    }
}

/// Quartic kernel matched to the model's quartic coefficient.
pub fn default_p4_kernel(model: &ModelSpec) -> BregmanKernel {
    BregmanKernel::P4 {
        a: model.bulk().c4 / 4.0,
        b: 1.0,
    }
}

/// BB step from the iterate difference `s` and gradient difference `v`,
/// clipped to `[alpha_min, alpha_max]`.
pub fn bb_step(s: &FourierField, v: &FourierField, variant: BbVariant, iter: usize, alpha_min: f64, alpha_max: f64) -> f64 {
    let ss = s.norm_sq();
    let sv = s.dot(v);
    if ss == 0.0 || !(sv > 0.0) {
        return alpha_max;
    }
    let long = matches!(variant, BbVariant::Long)
        || (matches!(variant, BbVariant::Alternating) && iter % 2 == 0);
    let raw = if long { ss / sv } else { sv / v.norm_sq() };
    if raw.is_finite() {
        raw.clamp(alpha_min, alpha_max)
    } else {
        alpha_max
    }
}

/// Nesterov weights `w = (t_old - 1) / t_new`, capped, with reset to `t = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Momentum {
    t: f64,
    weight: f64,
    cap: f64,
}

impl Momentum {
    pub fn new(cap: f64) -> Self {
        Self {
            t: 1.0,
            weight: 0.0,
            cap,
        }
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Advances after an accepted step and returns the new weight.
    pub fn advance(&mut self) -> f64 {
        let next = 0.5 * (1.0 + (1.0 + 4.0 * self.t * self.t).sqrt());
        self.weight = ((self.t - 1.0) / next).min(self.cap);
        self.t = next;
        self.weight
    }

    pub fn reset(&mut self) {
        self.t = 1.0;
        self.weight = 0.0;
    }
}

/// Result of the backtracking search at an extrapolated point.
#[derive(Debug, Clone)]
pub struct StepEstimate {
    pub alpha: f64,
    pub candidate: Sampled,
    pub backtracks: usize,
}

/// Largest `alpha = alpha_init * shrink^j` with `E(y) - E(z) >= eta ||y - z||^2`,
/// accepted unconditionally once it reaches `alpha_min`. Candidates are
/// sampled relative to `base`.
pub fn estimate_step(
    problem: &Problem,
    base: &Sampled,
    y: &Sampled,
    bulk_y: &FourierField,
    alpha_init: f64,
    config: &AabpgConfig,
    eta: f64,
) -> Result<StepEstimate> {
    let mut alpha = alpha_init.clamp(config.alpha_min, config.alpha_max);
    let mut backtracks = 0;
    loop {
        let z = prox(&config.kernel, &y.field, bulk_y, alpha, problem.diagonal())?;
        let dist = y.field.sub(&z).norm_sq();
        let candidate = problem.sample_near(base, z)?;
        let drop = problem.energy_drop(y, &candidate);
        if drop >= eta * dist || alpha <= config.alpha_min {
            return Ok(StepEstimate {
                alpha,
                candidate,
                backtracks,
            });
        }
        alpha = (alpha * config.shrink).max(config.alpha_min);
        backtracks += 1;
    }
}

/// AA-BPG state advanced one iteration at a time.
pub struct AabpgStepper<'p> {
    problem: &'p Problem,
    config: AabpgConfig,
    c: f64,
    eta: f64,
    x: Sampled,
    x_bulk: FourierField,
    x_grad: FourierField,
    prev: Sampled,
    /// Last distinct iterate and its projected bulk gradient, for BB.
    bb_prev: Option<(FourierField, FourierField)>,
    momentum: Momentum,
    iter: usize,
}

impl<'p> AabpgStepper<'p> {
    pub fn new(problem: &'p Problem, x0: FourierField, config: AabpgConfig) -> Result<Self> {
        config.validate()?;
        let x = problem.sample(project_mass_zero(x0))?;
        Self::from_sampled(problem, x, config)
    }

    pub fn from_sampled(problem: &'p Problem, x: Sampled, config: AabpgConfig) -> Result<Self> {
        config.validate()?;
        let (c, eta) = config.constants(problem.grid().len());
        let x_bulk = problem.bulk_gradient_of(&x)?;
        let x_grad = full_from_bulk(problem, &x.field, &x_bulk);
        let momentum = Momentum::new(config.max_weight);
        Ok(Self {
            problem,
            config,
            c,
            eta,
            prev: x.clone(),
            x,
            x_bulk,
            x_grad,
            bb_prev: None,
            momentum,
            iter: 0,
        })
    }

    pub fn into_current(self) -> Sampled {
        self.x
    }

    fn initial_step(&self) -> f64 {
        match &self.bb_prev {
            None => self.config.alpha0,
            Some((xp, gp)) => {
                let s = self.x.field.sub(xp);
                let v = project_mass_zero(self.x_bulk.sub(gp));
                bb_step(&s, &v, self.config.bb, self.iter, self.config.alpha_min, self.config.alpha_max)
            }
        }
    }

    /// Extrapolated point with samples formed linearly from the two iterates.
    fn extrapolate(&self, w: f64) -> Result<Sampled> {
        let field = self.x.field.lincomb(1.0 + w, &self.prev.field, -w);
        let samples = self
            .x
            .samples
            .iter()
            .zip(&self.prev.samples)
            .map(|(a, b)| (1.0 + w) * a - w * b)
            .collect();
        self.problem.assemble(field, samples)
    }
}

fn full_from_bulk(problem: &Problem, x: &FourierField, bulk: &FourierField) -> FourierField {
    let mut g = problem.diagonal().apply(x);
    g.axpy(1.0, bulk);
    g
}

impl Stepper for AabpgStepper<'_> {
    fn label(&self) -> String {
        match self.config.kernel {
            BregmanKernel::P2 => "AA-BPG-2".into(),
            BregmanKernel::P4 { .. } => "AA-BPG-4".into(),
        }
    }

    fn current(&self) -> &Sampled {
        &self.x
    }

    fn gradient(&self) -> &FourierField {
        &self.x_grad
    }

    fn step(&mut self) -> Result<StepInfo> {
        let w = self.momentum.weight();
        let alpha_init = self.initial_step();
        self.iter += 1;
        let est = if w == 0.0 {
            estimate_step(self.problem, &self.x, &self.x, &self.x_bulk, alpha_init, &self.config, self.eta)?
        } else {
            let y = self.extrapolate(w)?;
            let bulk_y = self.problem.bulk_gradient_of(&y)?;
            estimate_step(self.problem, &self.x, &y, &bulk_y, alpha_init, &self.config, self.eta)?
        };
        let dist = self.x.field.sub(&est.candidate.field).norm_sq();
        let drop = self.problem.energy_drop(&self.x, &est.candidate);
        if drop >= self.c * dist && dist > 0.0 {
            let z = est.candidate;
            let bulk_z = self.problem.bulk_gradient_of(&z)?;
            let grad_z = full_from_bulk(self.problem, &z.field, &bulk_z);
            let old = std::mem::replace(&mut self.x, z);
            let old_bulk = std::mem::replace(&mut self.x_bulk, bulk_z);
            self.x_grad = grad_z;
            self.bb_prev = Some((old.field.clone(), old_bulk));
            self.prev = old;
            self.momentum.advance();
            Ok(StepInfo {
                step: est.alpha,
                weight: Some(w),
                accepted: true,
                backtracks: est.backtracks,
                stalled: false,
            })
        } else {
            self.momentum.reset();
            self.prev = self.x.clone();
            Ok(StepInfo {
                step: est.alpha,
                weight: Some(w),
                accepted: false,
                backtracks: est.backtracks,
                // with w = 0 the next attempt would repeat this one exactly
                stalled: w == 0.0,
            })
        }
    }
}

/// Runs AA-BPG from `x0` (projected to mass zero).
pub fn aabpg_run(problem: &Problem, x0: FourierField, config: &AabpgConfig) -> Result<SolverReport> {
    let mut stepper = AabpgStepper::new(problem, x0, config.clone())?;
    run_to_report(&mut stepper, config.tol, config.max_iter)
}
