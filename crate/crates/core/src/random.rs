//! Seeded random fields.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use crate::lattice::{FourierField, IndexGrid};

/// Hermitian field with amplitudes drawn uniformly from `[-scale, scale]`
/// (real and imaginary parts independently) before symmetrization.
pub fn random_hermitian<R: Rng + ?Sized>(
    grid: &Arc<IndexGrid>,
    rng: &mut R,
    scale: f64,
) -> FourierField {
    let amps = (0..grid.len())
        .map(|_| {
            Complex64::new(
                rng.gen_range(-scale..=scale),
                rng.gen_range(-scale..=scale),
            )
        })
        .collect();
    let mut field = FourierField::from_amplitudes(grid, amps).expect("length matches grid");
    field.symmetrize();
    field
}

/// Hermitian field whose amplitudes decay like `exp(-decay * |h|^2)`.
pub fn smooth_random_hermitian<R: Rng + ?Sized>(
    grid: &Arc<IndexGrid>,
    rng: &mut R,
    scale: f64,
    decay: f64,
) -> FourierField {
    let mut field = random_hermitian(grid, rng, scale);
    for p in 0..grid.len() {
        let h2: f64 = grid.index(p).iter().map(|&v| (v * v) as f64).sum();
        field.amplitudes_mut()[p] *= (-decay * h2).exp();
    }
    field
}
