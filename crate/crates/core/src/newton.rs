//! Regularized Newton method in the mass-zero subspace.
//!
//! Each outer step solves `(J + mu I) d = -g` on the amplitudes with `h != 0`
//! by preconditioned CG, then backtracks along `d` until the Armijo condition
//! holds.

use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, PfcError, Result};
use crate::lattice::{project_mass_zero, FourierField, IndexGrid};
use crate::model::{Hessian, Problem, Sampled};
use crate::random::random_hermitian;
use crate::report::{Phase, SolverReport, Termination, TraceRow};

/// Vector space operations needed by the Krylov solvers.
pub trait KrylovVector: Clone {
    fn dot(&self, other: &Self) -> f64;
    /// `self += a * x`
    fn axpy(&mut self, a: f64, x: &Self);
    fn scale(&mut self, a: f64);
    fn zeros_like(&self) -> Self;
    fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

impl KrylovVector for Vec<f64> {
    fn dot(&self, other: &Self) -> f64 {
        self.iter().zip(other).map(|(a, b)| a * b).sum()
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x) {
            *s += a * v;
        }
    }
    fn scale(&mut self, a: f64) {
        for s in self.iter_mut() {
            *s *= a;
        }
    }
    fn zeros_like(&self) -> Self {
        vec![0.0; self.len()]
    }
}

/// Amplitudes of every lattice index except `h = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedVector(pub Vec<Complex64>);

impl KrylovVector for ReducedVector {
    fn dot(&self, other: &Self) -> f64 {
        crate::lattice::dot(&self.0, &other.0)
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.0.iter_mut().zip(&x.0) {
            *s += v * a;
        }
    }
    fn scale(&mut self, a: f64) {
        for s in self.0.iter_mut() {
            *s *= a;
        }
    }
    fn zeros_like(&self) -> Self {
        ReducedVector(vec![Complex64::new(0.0, 0.0); self.0.len()])
    }
}

pub fn reduce(field: &FourierField) -> ReducedVector {
    ReducedVector(field.amplitudes()[1..].to_vec())
}

pub fn lift(grid: &std::sync::Arc<IndexGrid>, u: &ReducedVector) -> Result<FourierField> {
    let mut amps = Vec::with_capacity(u.0.len() + 1);
    amps.push(Complex64::new(0.0, 0.0));
    amps.extend_from_slice(&u.0);
    FourierField::from_amplitudes(grid, amps)
}

/// `Z^T J Z u + mu u`
pub fn reduced_hessian_vec(hessian: &Hessian<'_>, grid: &std::sync::Arc<IndexGrid>, u: &ReducedVector, mu: f64) -> Result<ReducedVector> {
    let v = hessian.apply(&lift(grid, u)?)?;
    let mut out = reduce(&v);
    out.axpy(mu, u);
    Ok(out)
}

/// Smallest eigenvalue of the symmetric tridiagonal matrix with diagonal `a`
/// and off-diagonal `b`, by Sturm-sequence bisection.
pub fn tridiagonal_min_eigenvalue(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    assert!(n > 0 && b.len() + 1 >= n);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let r = if i > 0 { b[i - 1].abs() } else { 0.0 } + if i + 1 < n { b[i].abs() } else { 0.0 };
        lo = lo.min(a[i] - r);
        hi = hi.max(a[i] + r);
    }
    // number of eigenvalues below x
    let below = |x: f64| -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..n {
            let off = if i > 0 { b[i - 1] * b[i - 1] } else { 0.0 };
            d = a[i] - x - off / d;
            if d == 0.0 {
                d = -f64::EPSILON * (x.abs() + 1.0);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest Ritz value after `steps` Lanczos iterations from `start`.
pub fn lanczos_min_eigenvalue<V, A>(mut apply: A, start: &V, steps: usize) -> Result<f64>
where
    V: KrylovVector,
    A: FnMut(&V) -> Result<V>,
{
    let norm = start.norm();
    if norm == 0.0 {
        return Err(PfcError::Solver("Lanczos start vector is zero".into()));
    }
    let mut q = start.clone();
    q.scale(1.0 / norm);
    let mut q_prev = q.zeros_like();
    let (mut alphas, mut betas) = (Vec::new(), Vec::new());
    let mut beta = 0.0;
    for _ in 0..steps.max(1) {
        let mut w = apply(&q)?;
        let alpha = q.dot(&w);
        w.axpy(-alpha, &q);
        w.axpy(-beta, &q_prev);
        alphas.push(alpha);
        beta = w.norm();
        if !(beta > 1e-12 * alpha.abs().max(1.0)) {
            break;
        }
        betas.push(beta);
        w.scale(1.0 / beta);
        q_prev = std::mem::replace(&mut q, w);
    }
    Ok(tridiagonal_min_eigenvalue(&alphas, &betas))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcgStatus {
    Converged,
    IterationCap,
    NegativeCurvature,
}

#[derive(Debug, Clone)]
pub struct PcgResult<V> {
    pub solution: V,
    pub residual_norm: f64,
    pub iterations: usize,
    pub status: PcgStatus,
}

/// Preconditioned CG for `A x = b` from `x = 0`, tracking `r = A x - b`.
/// `observe(i, x_i, r_i)` is called for every iterate including `x_0`.
pub fn pcg<V, A, M, O>(mut apply: A, b: &V, precond: M, eta: f64, cap: usize, mut observe: O) -> Result<PcgResult<V>>
where
    V: KrylovVector,
    A: FnMut(&V) -> Result<V>,
    M: Fn(&V) -> V,
    O: FnMut(usize, &V, &V),
{
    let mut x = b.zeros_like();
    let mut r = b.clone();
    r.scale(-1.0);
    let mut z = precond(&r);
    let mut p = z.clone();
    p.scale(-1.0);
    let mut rz = r.dot(&z);
    let mut rnorm = r.norm();
    let mut i = 0;
    observe(0, &x, &r);
    let status = loop {
        if rnorm <= eta {
            break PcgStatus::Converged;
        }
        if i >= cap {
            break PcgStatus::IterationCap;
        }
        let ap = apply(&p)?;
        let curv = p.dot(&ap);
        if !(curv > 0.0) {
            break PcgStatus::NegativeCurvature;
        }
        let step = rz / curv;
        x.axpy(step, &p);
        r.axpy(step, &ap);
        z = precond(&r);
        let rz_next = r.dot(&z);
        let beta = rz_next / rz;
        rz = rz_next;
        p.scale(beta);
        p.axpy(-1.0, &z);
        rnorm = r.norm();
        i += 1;
        observe(i, &x, &r);
    };
    Ok(PcgResult {
        solution: x,
        residual_norm: rnorm,
        iterations: i,
        status,
    })
}

/// Diagonal preconditioner `r -> r / (D_h + delta + mu)` on the reduced space,
/// or the identity when some entry is not positive.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    inverse: Option<Vec<f64>>,
}

impl Preconditioner {
    pub fn new(diag: &[f64], delta: f64, mu: f64) -> Self {
        let inv: Vec<f64> = diag[1..].iter().map(|d| d + delta + mu).collect();
        if inv.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Self {
                inverse: Some(inv.into_iter().map(|v| 1.0 / v).collect()),
            }
        } else {
            log::warn!("preconditioner has a nonpositive entry (delta {delta:e}, mu {mu:e}); using identity");
            Self { inverse: None }
        }
    }

    pub fn is_identity(&self) -> bool {
        self.inverse.is_none()
    }

    pub fn apply(&self, r: &ReducedVector) -> ReducedVector {
        match &self.inverse {
            None => r.clone(),
            Some(inv) => ReducedVector(r.0.iter().zip(inv).map(|(v, s)| v * *s).collect()),
        }
    }
}

pub fn precondition_apply(diag: &[f64], delta: f64, mu: f64, r: &ReducedVector) -> ReducedVector {
    Preconditioner::new(diag, delta, mu).apply(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    pub c1: f64,
    pub c2: f64,
    pub mu_max: f64,
    /// PCG tolerance factor.
    pub tau: f64,
    pub rho: f64,
    pub nu: f64,
    /// Preconditioner shift is `delta_factor * max f''(phi)`.
    pub delta_factor: f64,
    pub lanczos_steps: usize,
    pub pcg_max_iter: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            c1: 1.0,
            c2: 0.1,
            mu_max: 1e3,
            tau: 0.01,
            rho: 0.5,
            nu: 1e-4,
            delta_factor: 0.7,
            lanczos_steps: 20,
            pcg_max_iter: 500,
            max_iter: 200,
            tol: 1e-9,
            seed: 0,
        }
    }
}

pub const ARMIJO_MAX_BACKTRACKS: usize = 60;
const NEGATIVE_CURVATURE_RETRIES: usize = 5;

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 >= 1.0 && self.c2 > 0.0 && self.mu_max > 0.0) {
            return config_err("Newton needs c1 >= 1, c2 > 0, mu_max > 0");
        }
        for (name, v) in [("tau", self.tau), ("rho", self.rho), ("nu", self.nu)] {
            if !(v > 0.0 && v < 1.0) {
                return config_err(format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        if self.lanczos_steps == 0 || self.pcg_max_iter == 0 {
            return config_err("Lanczos steps and PCG cap must be positive");
        }
        if !(self.tol >= 0.0) {
            return config_err("tolerance must be nonnegative");
        }
        Ok(())
    }
}

/// `min(mu_max, c1 max(0, -lambda) + c2 g)` where `lambda` estimates the
/// smallest Hessian eigenvalue.
pub fn choose_mu(lambda_min: f64, grad_norm: f64, config: &NewtonConfig) -> f64 {
    (config.c1 * (-lambda_min).max(0.0) + config.c2 * grad_norm).min(config.mu_max)
}

/// Inflates a negative Ritz value by 10% so it can serve as a lower bound.
pub fn lower_eigen_bound(ritz: f64) -> f64 {
    if ritz < 0.0 {
        1.1 * ritz
    } else {
        ritz
    }
}

/// Result of the Armijo search.
#[derive(Debug, Clone)]
pub struct ArmijoStep {
    pub t: f64,
    pub point: Sampled,
    pub backtracks: usize,
}

/// `t = rho^n` for the smallest `n` with `E(x + t d) <= E(x) + nu t <g, d>`.
/// Trial samples are formed linearly from those of `x` and `d`.
pub fn armijo_backtrack(problem: &Problem, x: &Sampled, d: &FourierField, slope: f64, config: &NewtonConfig) -> Result<ArmijoStep> {
    let d_samples = problem.transform().to_physical(d)?;
    let mut t = 1.0;
    for n in 0..=ARMIJO_MAX_BACKTRACKS {
        let field = x.field.lincomb(1.0, d, t);
        let samples = x.samples.iter().zip(&d_samples).map(|(a, b)| a + t * b).collect();
        match problem.assemble(field, samples) {
            Ok(point) => {
                if problem.energy_drop(x, &point) >= -config.nu * t * slope {
                    return Ok(ArmijoStep { t, point, backtracks: n });
                }
            }
            Err(PfcError::NonFinite(_)) => {}
            Err(e) => return Err(e),
        }
        t *= config.rho;
    }
    Err(PfcError::LineSearch {
        backtracks: ARMIJO_MAX_BACKTRACKS,
        step: t,
        grad_norm: slope.abs().sqrt(),
    })
}

pub(crate) struct NewtonOutcome {
    pub rows: Vec<TraceRow>,
    pub point: Sampled,
    pub grad: FourierField,
    pub termination: Termination,
    pub iterations: usize,
}

/// Newton iterations from an already sampled point. Rows are numbered from
/// `first_iter`; the starting point itself gets no row.
pub(crate) fn newton_from(
    problem: &Problem,
    mut x: Sampled,
    config: &NewtonConfig,
    clock: Instant,
    first_iter: usize,
) -> Result<NewtonOutcome> {
    config.validate()?;
    let grid = problem.grid().clone();
    let diag = problem.diagonal().entries();
    let mut grad = project_mass_zero(problem.full_gradient_of(&x)?);
    let mut gnorm = grad.norm();
    let mut rows = Vec::new();
    let mut k = 0;
    let termination = loop {
        if gnorm < config.tol {
            break Termination::Converged;
        }
        if k >= config.max_iter {
            break Termination::MaxIterations;
        }
        let hessian = problem.hessian_at(&x);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(k as u64));
        let start = reduce(&random_hermitian(&grid, &mut rng, 1.0));
        let ritz = lanczos_min_eigenvalue(|u: &ReducedVector| reduced_hessian_vec(&hessian, &grid, u, 0.0), &start, config.lanczos_steps)?;
        let mut mu = choose_mu(lower_eigen_bound(ritz), gnorm, config);
        let delta = config.delta_factor * hessian.max_curvature();
        let b = reduce(&grad);
        let eta = config.tau * gnorm.min(1.0);

        let mut pcg_iters = 0;
        let mut direction = None;
        for _ in 0..=NEGATIVE_CURVATURE_RETRIES {
            let m = Preconditioner::new(diag, delta, mu);
            let mut rhs = b.clone();
            rhs.scale(-1.0);
            let res = pcg(
                |u: &ReducedVector| reduced_hessian_vec(&hessian, &grid, u, mu),
                &rhs,
                |r: &ReducedVector| m.apply(r),
                eta,
                config.pcg_max_iter,
                |_, _, _| {},
            )?;
            pcg_iters += res.iterations;
            if res.status != PcgStatus::NegativeCurvature && res.solution.dot(&b) < 0.0 {
                direction = Some(res.solution);
                break;
            }
            log::debug!("negative curvature in PCG at mu = {mu:e}; doubling");
            mu = (2.0 * mu).max(f64::MIN_POSITIVE);
        }
        let d = match direction {
            Some(d) => d,
            None => {
                log::warn!("PCG kept meeting negative curvature; using a preconditioned gradient step");
                let mut d = Preconditioner::new(diag, delta, mu).apply(&b);
                d.scale(-1.0);
                d
            }
        };
        let slope = d.dot(&b);
        if log::log_enabled!(log::Level::Debug) {
            let mut tr = reduced_hessian_vec(&hessian, &grid, &d, mu)?;
            tr.axpy(1.0, &b);
            let mut t0 = reduced_hessian_vec(&hessian, &grid, &d, 0.0)?;
            t0.axpy(1.0, &b);
            log::debug!(
                "newton g={gnorm:e} eta={eta:e} mu={mu:e} ritz={ritz:e} |d|={:e} residual={:e} (mu=0: {:e})",
                d.norm(),
                tr.norm(),
                t0.norm()
            );
        }
        let d = lift(&grid, &d)?;
        let step = armijo_backtrack(problem, &x, &d, slope, config)?;
        x = step.point;
        let next = project_mass_zero(problem.full_gradient_of(&x)?);
        let grad_change = next.sub(&grad).norm();
        grad = next;
        gnorm = grad.norm();
        k += 1;
        rows.push(TraceRow {
            iter: first_iter + k - 1,
            phase: Phase::Newton,
            energy: x.total(),
            grad_norm: gnorm,
            step: step.t,
            weight: None,
            restart: false,
            backtracks: step.backtracks,
            mu: Some(mu),
            pcg_iters: Some(pcg_iters),
            grad_change: Some(grad_change),
            seconds: clock.elapsed().as_secs_f64(),
        });
    };
    Ok(NewtonOutcome {
        rows,
        point: x,
        grad,
        termination,
        iterations: k,
    })
}

/// Runs Newton-PCG from `x0` (projected to mass zero).
pub fn newton_pcg_run(problem: &Problem, x0: FourierField, config: &NewtonConfig) -> Result<SolverReport> {
    config.validate()?;
    let clock = Instant::now();
    let x = problem.sample(project_mass_zero(x0))?;
    let grad = project_mass_zero(problem.full_gradient_of(&x)?);
    let first = TraceRow {
        iter: 0,
        phase: Phase::Newton,
        energy: x.total(),
        grad_norm: grad.norm(),
        step: 0.0,
        weight: None,
        restart: false,
        backtracks: 0,
        mu: None,
        pcg_iters: None,
        grad_change: None,
        seconds: 0.0,
    };
    let out = newton_from(problem, x, config, clock, 1)?;
    let mut rows = vec![first];
    rows.extend(out.rows);
    Ok(SolverReport {
        method: "Newton-PCG".into(),
        rows,
        field: out.point.field,
        energy: out.point.energy,
        grad_norm: out.grad.norm(),
        termination: out.termination,
        iterations: out.iterations,
        seconds: clock.elapsed().as_secs_f64(),
        switch_iter: None,
    })
}
