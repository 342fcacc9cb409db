//! Bregman kernels and the mass-constrained proximal subproblems.
//!
//! Both subproblems minimize
//! `G(z) + <grad F(psi), z - psi> + D_h(z, psi) / alpha` subject to `z_0 = 0`.
//! With `D` diagonal in Fourier space the quadratic kernel has a closed form,
//! and the quartic kernel reduces to a scalar equation for `p = ||z||^2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, PfcError, Result};
use crate::lattice::FourierField;
use crate::model::InteractionDiagonal;
use crate::numerics::pairwise_sum;

/// Iteration cap of the radius solver.
pub const RADIUS_MAX_ITER: usize = 200;

/// Strongly convex kernel `h` of the Bregman distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum BregmanKernel {
    /// `h(x) = ||x||^2 / 2`
    P2,
    /// `h(x) = a/4 ||x||^4 + b/2 ||x||^2 + 1`
    P4 { a: f64, b: f64 },
}

impl BregmanKernel {
    pub fn validate(&self) -> Result<()> {
        if let BregmanKernel::P4 { a, b } = *self {
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return config_err(format!("P4 kernel needs a, b > 0 (got a = {a}, b = {b})"));
            }
        }
        Ok(())
    }

    /// Strong convexity modulus.
    pub fn modulus(&self) -> f64 {
        match *self {
            BregmanKernel::P2 => 1.0,
            BregmanKernel::P4 { b, .. } => b,
        }
    }

    /// `h` as a function of `||x||^2`.
    pub fn value(&self, norm_sq: f64) -> f64 {
        match *self {
            BregmanKernel::P2 => 0.5 * norm_sq,
            BregmanKernel::P4 { a, b } => 0.25 * a * norm_sq * norm_sq + 0.5 * b * norm_sq + 1.0,
        }
    }

    /// `grad h(x) = scale(||x||^2) x`
    pub fn gradient_scale(&self, norm_sq: f64) -> f64 {
        match *self {
            BregmanKernel::P2 => 1.0,
            BregmanKernel::P4 { a, b } => a * norm_sq + b,
        }
    }
}

/// `h(x) - h(y) - <grad h(y), x - y>`
pub fn bregman_divergence(kernel: &BregmanKernel, x: &FourierField, y: &FourierField) -> f64 {
    match *kernel {
        BregmanKernel::P2 => 0.5 * x.sub(y).norm_sq(),
        BregmanKernel::P4 { .. } => {
            let (nx, ny) = (x.norm_sq(), y.norm_sq());
            let dir = y.dot(x) - ny;
            let d = kernel.value(nx) - kernel.value(ny) - kernel.gradient_scale(ny) * dir;
            d.max(0.0)
        }
    }
}

fn check_step(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return config_err(format!("step size must be positive, got {alpha}"));
    }
    Ok(())
}

/// Closed-form prox for the quadratic kernel:
/// `z = (I + alpha D)^{-1} (psi - alpha P1 grad F(psi))`, with `z_0 = 0`.
pub fn prox_p2(
    psi: &FourierField,
    bulk_grad: &FourierField,
    alpha: f64,
    diag: &InteractionDiagonal,
) -> Result<FourierField> {
    check_step(alpha)?;
    psi.check_lattice(bulk_grad)?;
    let mut z = FourierField::zeros(psi.grid());
    let (p, g, d) = (psi.amplitudes(), bulk_grad.amplitudes(), diag.entries());
    for (i, out) in z.amplitudes_mut().iter_mut().enumerate().skip(1) {
        *out = (p[i] - g[i] * alpha) / (1.0 + alpha * d[i]);
    }
    Ok(z)
}

/// Unique root of `R(p) = ||[alpha D + (a p + b) I]^{-1} beta||^2 - p` on `p >= 0`.
///
/// `R` is convex and strictly decreasing with `R(0) >= 0`, so Newton's method
/// started at 0 increases monotonically to the root; a bisection bracket guards
/// against roundoff.
pub fn solve_radius_fixed_point(
    beta: &[Complex64],
    diag: &[f64],
    alpha: f64,
    a: f64,
    b: f64,
) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return config_err("radius equation needs a, b > 0");
    }
    check_step(alpha)?;
    let weights: Vec<f64> = beta.iter().map(|v| v.norm_sqr()).collect();
    let eval = |p: f64| -> (f64, f64) {
        let shift = a * p + b;
        let r = pairwise_sum(weights.len(), |i| {
            let q = alpha * diag[i] + shift;
            weights[i] / (q * q)
        });
        let dr = pairwise_sum(weights.len(), |i| {
            let q = alpha * diag[i] + shift;
            weights[i] / (q * q * q)
        });
        (r - p, -2.0 * a * dr - 1.0)
    };

    let (r0, _) = eval(0.0);
    if r0 == 0.0 {
        return Ok(0.0);
    }
    if !r0.is_finite() {
        return Err(PfcError::NonFinite("radius equation at p = 0".into()));
    }
    let (mut lo, mut hi) = (0.0, r0);
    let mut p = 0.0;
    for _ in 0..RADIUS_MAX_ITER {
        let (val, der) = eval(p);
        if val.abs() <= 4.0 * f64::EPSILON * p {
            return Ok(p);
        }
        if val > 0.0 {
            lo = p;
        } else {
            hi = p;
        }
        let newton = p - val / der;
        if val > 0.0 && newton <= p {
            // Newton no longer moves: R is at roundoff level
            return Ok(p);
        }
        p = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(p);
        }
    }
    Err(PfcError::Solver(format!(
        "radius fixed point did not converge in {RADIUS_MAX_ITER} iterations (bracket [{lo:e}, {hi:e}])"
    )))
}

/// Quartic-kernel prox: `z = [alpha D + (a p* + b) I]^{-1} beta` with
/// `beta = grad h(psi) - alpha P1 grad F(psi)` and `||z||^2 = p*`.
pub fn prox_p4(
    psi: &FourierField,
    bulk_grad: &FourierField,
    alpha: f64,
    diag: &InteractionDiagonal,
    a: f64,
    b: f64,
) -> Result<(FourierField, f64)> {
    check_step(alpha)?;
    psi.check_lattice(bulk_grad)?;
    let scale = a * psi.norm_sq() + b;
    let mut beta = psi.lincomb(scale, bulk_grad, -alpha);
    beta.amplitudes_mut()[0] = Complex64::new(0.0, 0.0);
    let p_star = solve_radius_fixed_point(beta.amplitudes(), diag.entries(), alpha, a, b)?;
    let shift = a * p_star + b;
    for (v, d) in beta.amplitudes_mut().iter_mut().zip(diag.entries()) {
        *v /= alpha * d + shift;
    }
    Ok((beta, p_star))
}

/// Prox for either kernel.
pub fn prox(
    kernel: &BregmanKernel,
    psi: &FourierField,
    bulk_grad: &FourierField,
    alpha: f64,
    diag: &InteractionDiagonal,
) -> Result<FourierField> {
    let z = match *kernel {
        BregmanKernel::P2 => prox_p2(psi, bulk_grad, alpha, diag)?,
        BregmanKernel::P4 { a, b } => prox_p4(psi, bulk_grad, alpha, diag, a, b)?.0,
    };
    if cfg!(debug_assertions) {
        let res = kkt_residual(kernel, &z, psi, bulk_grad, alpha, diag);
        log::debug!("prox alpha={alpha:e} kkt residual {res:e}");
    }
    Ok(z)
}

/// Norm of the mass-zero part of
/// `alpha (D z + grad F(psi)) + grad h(z) - grad h(psi)`.
/// The zero mode is absorbed by the constraint multiplier.
pub fn kkt_residual(
    kernel: &BregmanKernel,
    z: &FourierField,
    psi: &FourierField,
    bulk_grad: &FourierField,
    alpha: f64,
    diag: &InteractionDiagonal,
) -> f64 {
    let sz = kernel.gradient_scale(z.norm_sq());
    let sp = kernel.gradient_scale(psi.norm_sq());
    let (za, pa, ga, d) = (
        z.amplitudes(),
        psi.amplitudes(),
        bulk_grad.amplitudes(),
        diag.entries(),
    );
    pairwise_sum(za.len() - 1, |j| {
        let i = j + 1;
        let r = (za[i] * d[i] + ga[i]) * alpha + za[i] * sz - pa[i] * sp;
        r.norm_sqr()
    })
    .sqrt()
}
