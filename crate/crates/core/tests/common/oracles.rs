//! Independent reference computations shared by the oracle tests and the
//! acceptance suite.

use std::sync::Arc;

use num_complex::Complex64;
use pfc_core::newton::{pcg, PcgStatus};
use pfc_core::random::random_hermitian;
use pfc_core::{build_lattice, FourierField, IndexGrid, InteractionDiagonal, LatticeSpec};
use rand::Rng;

pub fn line8() -> Arc<IndexGrid> {
    build_lattice(LatticeSpec::periodic(vec![8], vec![1.0])).unwrap()
}

/// Kernel `h(z) = a/4 |z|^4 + b/2 |z|^2`; `a = 0` gives the quadratic one.
#[derive(Clone, Copy)]
pub struct Kernel {
    pub a: f64,
    pub b: f64,
}

impl Kernel {
    pub fn value(&self, z: &FourierField) -> f64 {
        let n = z.norm_sq();
        0.25 * self.a * n * n + 0.5 * self.b * n
    }
    pub fn grad(&self, z: &FourierField) -> FourierField {
        let mut g = z.clone();
        g.scale(self.a * z.norm_sq() + self.b);
        g
    }
}

/// Objective of the prox subproblem at `z`.
pub fn objective(z: &FourierField, psi: &FourierField, g: &FourierField, alpha: f64, d: &InteractionDiagonal, k: Kernel) -> f64 {
    let dz = d.apply(z);
    let breg = k.value(z) - k.value(psi) - k.grad(psi).dot(&z.sub(psi));
    0.5 * z.dot(&dz) + g.dot(z) + breg / alpha
}

pub fn objective_grad(z: &FourierField, psi: &FourierField, g: &FourierField, alpha: f64, d: &InteractionDiagonal, k: Kernel) -> FourierField {
    let mut out = d.apply(z);
    out.axpy(1.0, g);
    let mut h = k.grad(z);
    h.axpy(-1.0, &k.grad(psi));
    out.axpy(1.0 / alpha, &h);
    out.amplitudes_mut()[0] = Complex64::new(0.0, 0.0);
    out
}

/// Projected gradient descent with Armijo backtracking.
pub fn descend(psi: &FourierField, g: &FourierField, alpha: f64, d: &InteractionDiagonal, k: Kernel) -> FourierField {
    let mut z = psi.clone();
    z.amplitudes_mut()[0] = Complex64::new(0.0, 0.0);
    let mut t = 1.0;
    for _ in 0..200_000 {
        let gr = objective_grad(&z, psi, g, alpha, d, k);
        let gn = gr.norm_sq();
        if gn.sqrt() < 1e-10 {
            break;
        }
        let f0 = objective(&z, psi, g, alpha, d, k);
        t *= 2.0;
        loop {
            let trial = z.lincomb(1.0, &gr, -t);
            if objective(&trial, psi, g, alpha, d, k) <= f0 - 0.5 * t * gn || t < 1e-20 {
                z = trial;
                break;
            }
            t *= 0.5;
        }
    }
    // finish with fixed steps 1/L, which need no objective comparisons
    let dmax = d.entries().iter().fold(0.0f64, |m, &v| m.max(v));
    for _ in 0..100_000 {
        let l = dmax + (3.0 * k.a * z.norm_sq() + k.b) / alpha;
        let gr = objective_grad(&z, psi, g, alpha, d, k);
        if gr.norm() < 1e-15 * (1.0 + z.norm()) {
            break;
        }
        z.axpy(-1.0 / (2.0 * l), &gr);
    }
    z
}

pub struct Instance {
    pub psi: FourierField,
    pub g: FourierField,
    pub d: InteractionDiagonal,
    pub alpha: f64,
}

pub fn instance(seed: u64) -> Instance {
    let grid = line8();
    let mut rng = super::rng(seed);
    let psi = random_hermitian(&grid, &mut rng, 1.0);
    let g = random_hermitian(&grid, &mut rng, 1.0);
    let mut d: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(0.0..4.0)).collect();
    for p in 0..grid.len() {
        let m = grid.mirror()[p];
        d[m] = d[p];
    }
    Instance {
        psi,
        g,
        d: InteractionDiagonal::from_entries(d).unwrap(),
        alpha: rng.gen_range(0.05..2.0),
    }
}

pub fn residual(beta: &[f64], d: &[f64], alpha: f64, a: f64, b: f64, p: f64) -> f64 {
    beta.iter()
        .zip(d)
        .map(|(w, di)| {
            let q = alpha * di + a * p + b;
            w / (q * q)
        })
        .sum::<f64>()
        - p
}

pub fn bisect(beta: &[f64], d: &[f64], alpha: f64, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, residual(beta, d, alpha, a, b, 0.0));
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if residual(beta, d, alpha, a, b, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Worst deviations seen by [`pcg_property_suite`].
#[derive(Debug, Clone, Copy, Default)]
pub struct PcgSuiteReport {
    pub residual_defect: f64,
    /// Largest relative drop of `<x, b>` between iterates.
    pub raw_decrease: f64,
    /// Largest relative drop of `<x, b> - <x, r>`, which is
    /// `|e_0|_A^2 - |e_i|_A^2` whatever the loss of conjugacy.
    pub energy_decrease: f64,
}

/// Per-iterate checks on random SPD systems. `<x, b>` may only drop by the
/// conjugacy defect `<x, r>`, which vanishes in exact arithmetic.
pub fn pcg_property_suite(instances: usize, n: usize) -> Result<PcgSuiteReport, String> {
    let mut rng = super::rng(5150);
    let mut rep = PcgSuiteReport::default();
    for case in 0..instances {
        let lo = rng.gen_range(0.05..1.0);
        let hi = lo * rng.gen_range(2.0..200.0);
        let mut eigs: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
        eigs[0] = lo;
        eigs[1] = hi;
        let a = super::with_spectrum(&eigs, &mut rng);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bb: f64 = b.iter().map(|v| v * v).sum();
        let mut checks: Vec<(usize, f64, f64, f64)> = Vec::new();
        let res = pcg(
            |v: &Vec<f64>| Ok(super::matvec(&a, v)),
            &b,
            |v: &Vec<f64>| v.clone(),
            1e-10,
            4 * n,
            |i, x, r| {
                let ax = super::matvec(&a, x);
                let defect = ax.iter().zip(&b).zip(r).map(|((p, q), s)| (p - q - s).powi(2)).sum::<f64>().sqrt();
                let xb: f64 = x.iter().zip(&b).map(|(p, q)| p * q).sum();
                let xr: f64 = x.iter().zip(r).map(|(p, q)| p * q).sum();
                checks.push((i, xb, xr, defect));
            },
        )
        .map_err(|e| e.to_string())?;
        if res.status != PcgStatus::Converged {
            return Err(format!("case {case}: {:?}", res.status));
        }
        let (mut prev_xb, mut prev_xr) = (0.0f64, 0.0f64);
        for &(i, xb, xr, defect) in &checks {
            rep.residual_defect = rep.residual_defect.max(defect);
            if defect > 1e-10 {
                return Err(format!("case {case}, iterate {i}: residual defect {defect:e}"));
            }
            if i >= 1 {
                let ratio = xb / bb;
                let slack = 1e-12 * ratio.abs();
                if ratio < 1.0 / hi - slack || ratio > 1.0 / lo + slack {
                    return Err(format!("case {case}, iterate {i}: ratio {ratio} outside [{}, {}]", 1.0 / hi, 1.0 / lo));
                }
                let scale = xb.abs();
                rep.raw_decrease = rep.raw_decrease.max((prev_xb - xb) / scale);
                rep.energy_decrease = rep.energy_decrease.max((prev_xb - prev_xr - (xb - xr)) / scale);
                let allowed = xr.abs() + prev_xr.abs() + 1e-12 * scale;
                if xb < prev_xb - allowed {
                    return Err(format!("case {case}, iterate {i}: <x, b> fell from {prev_xb:e} to {xb:e}"));
                }
                if xb - xr < prev_xb - prev_xr - 1e-12 * scale {
                    return Err(format!("case {case}, iterate {i}: A-norm error grew"));
                }
            }
            prev_xb = xb;
            prev_xr = xr;
        }
    }
    Ok(rep)
}

