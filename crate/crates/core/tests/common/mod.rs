#![allow(dead_code)]

pub mod oracles;

use std::sync::Arc;

use num_complex::Complex64;
use pfc_core::random::smooth_random_hermitian;
use pfc_core::{build_lattice, FourierField, IndexGrid, LatticeSpec, ModelSpec, Problem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn lb_model() -> ModelSpec {
    ModelSpec::LandauBrazovskii {
        xi: 1.0,
        tau: -0.3,
        gamma: 1.5,
    }
}

pub fn lp_model() -> ModelSpec {
    ModelSpec::LifshitzPetrich {
        c: 24.0,
        q1: 1.0,
        q2: 2.0 * (std::f64::consts::PI / 12.0).cos(),
        epsilon: -6.0,
        kappa: 6.0,
    }
}

pub fn cube(n: usize, scale: f64) -> Arc<IndexGrid> {
    let mut b = vec![0.0; 9];
    for i in 0..3 {
        b[i * 4] = scale;
    }
    build_lattice(LatticeSpec::periodic(vec![n; 3], b)).unwrap()
}

pub fn dodecagonal(n: usize) -> Arc<IndexGrid> {
    let (s6, c6) = (std::f64::consts::FRAC_PI_6.sin(), std::f64::consts::FRAC_PI_6.cos());
    let (s3, c3) = (std::f64::consts::FRAC_PI_3.sin(), std::f64::consts::FRAC_PI_3.cos());
    let mut b = vec![0.0; 16];
    for i in 0..4 {
        b[i * 5] = 1.0;
    }
    let mut spec = LatticeSpec::periodic(vec![n; 4], b);
    spec.projection = vec![1.0, c6, c3, 0.0, 0.0, s6, s3, 1.0];
    build_lattice(spec).unwrap()
}

pub fn lb_problem(n: usize) -> Problem {
    Problem::new(&cube(n, 1.0), lb_model()).unwrap()
}

pub fn lp_problem(n: usize) -> Problem {
    Problem::new(&dodecagonal(n), lp_model()).unwrap()
}

/// Smooth random mass-zero field.
pub fn field(grid: &Arc<IndexGrid>, seed: u64, scale: f64) -> FourierField {
    let mut f = smooth_random_hermitian(grid, &mut rng(seed), scale, 0.15);
    f.amplitudes_mut()[0] = Complex64::new(0.0, 0.0);
    f
}

pub fn rel_err(a: &FourierField, b: &FourierField) -> f64 {
    a.sub(b).norm() / b.norm().max(1e-300)
}

/// Central-difference directional derivative of the energy.
pub fn fd_directional(p: &Problem, x: &FourierField, v: &FourierField, eps: f64) -> f64 {
    let plus = p.sample(x.lincomb(1.0, v, eps)).unwrap();
    let minus = p.sample(x.lincomb(1.0, v, -eps)).unwrap();
    p.energy_drop(&plus, &minus) / (2.0 * eps)
}

/// Gradient assembled from central differences along a Hermitian basis.
pub fn fd_gradient(p: &Problem, x: &FourierField, eps: f64) -> FourierField {
    let grid = p.grid();
    let mut g = FourierField::zeros(grid);
    let mirror = grid.mirror();
    for pos in 0..grid.len() {
        let m = mirror[pos];
        if m < pos {
            continue;
        }
        let mut re = FourierField::zeros(grid);
        re.amplitudes_mut()[pos] += Complex64::new(1.0, 0.0);
        re.amplitudes_mut()[m] += Complex64::new(1.0, 0.0);
        let dre = fd_directional(p, x, &re, eps);
        if m == pos {
            // self-conjugate mode: real direction counted twice
            g.amplitudes_mut()[pos] = Complex64::new(dre / 2.0, 0.0);
            continue;
        }
        let mut im = FourierField::zeros(grid);
        im.amplitudes_mut()[pos] = Complex64::new(0.0, 1.0);
        im.amplitudes_mut()[m] = Complex64::new(0.0, -1.0);
        let dim = fd_directional(p, x, &im, eps);
        g.amplitudes_mut()[pos] = Complex64::new(dre / 2.0, dim / 2.0);
        g.amplitudes_mut()[m] = Complex64::new(dre / 2.0, -dim / 2.0);
    }
    g
}

/// Hessian-vector product from central differences of the gradient.
pub fn fd_hessian_vec(p: &Problem, x: &FourierField, v: &FourierField, eps: f64) -> FourierField {
    let gp = p.full_gradient(&x.lincomb(1.0, v, eps)).unwrap();
    let gm = p.full_gradient(&x.lincomb(1.0, v, -eps)).unwrap();
    let mut d = gp.sub(&gm);
    d.scale(0.5 / eps);
    d
}

/// Random orthogonal `n x n` matrix (row-major) by Gram-Schmidt.
pub fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    use rand::Rng;
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
    while q.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..2 {
            for u in &q {
                let d: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(x, y)| *x -= d * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            q.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    q.concat()
}

/// Symmetric matrix `Q diag(eigs) Q^T`.
pub fn with_spectrum(eigs: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = eigs.len();
    let q = random_orthogonal(n, rng);
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = (0..n).map(|k| q[k * n + i] * eigs[k] * q[k * n + j]).sum();
        }
    }
    a
}

pub fn matvec(a: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n).map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum()).collect()
}
