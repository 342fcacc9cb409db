//! Forward/backward transforms between lattice amplitudes and physical samples.
//!
//! Samples live on a padded uniform grid of `M_j >= padding * N_j + 1` points per
//! axis (rounded up to a 2-3-5 smooth size), which makes products of up to four
//! fields exact after truncation. The inverse transform is unnormalized
//! (`phi(r_j) = sum_h a_h exp(i k_h . r_j)`), the forward one divides by the number
//! of samples, so the `h = 0` coefficient is the domain average.
//!
//! Only lines that carry nonzero data are transformed: the box occupies roughly
//! half of every padded axis, so the multi-dimensional transforms are pruned
//! axis by axis.

use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::error::{PfcError, Result};
use crate::lattice::{FourierField, IndexGrid};

const CHUNK: usize = 16;

/// Smallest integer `>= n` with no prime factor above 5.
pub fn smooth_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Padded sample count for an axis with `modes` modes.
pub fn padded_size(modes: usize, padding: f64) -> usize {
    let target = (padding * modes as f64).ceil() as usize + 1;
    smooth_size(target.max(modes + 1))
}

struct AxisPass {
    fft: Arc<dyn Fft<f64>>,
    stride: usize,
    len: usize,
    outer: Vec<usize>,
    inner: Vec<usize>,
}

/// Plans and buffers for one lattice.
pub struct SpectralTransform {
    grid: Arc<IndexGrid>,
    sizes: Vec<usize>,
    half: usize,
    work_len: usize,
    sample_len: usize,
    /// (storage position, work offset) for every index with `h_last >= 0`.
    placement: Vec<(usize, usize)>,
    /// Storage positions with `h_last < 0`.
    mirrored: Vec<usize>,
    /// Pairs `(p, -p)` in the `h_last = 0` plane with `p < -p`.
    plane_pairs: Vec<(usize, usize)>,
    inverse_passes: Vec<AxisPass>,
    forward_passes: Vec<AxisPass>,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    pool: Mutex<Vec<Vec<Complex64>>>,
}

impl std::fmt::Debug for SpectralTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralTransform")
            .field("sizes", &self.sizes)
            .finish()
    }
}

fn offsets(allowed: &[Vec<usize>], strides: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    for (coords, &stride) in allowed.iter().zip(strides) {
        let mut next = Vec::with_capacity(out.len() * coords.len());
        for &o in &out {
            for &c in coords {
                next.push(o + c * stride);
            }
        }
        out = next;
    }
    out
}

impl SpectralTransform {
    pub fn new(grid: &Arc<IndexGrid>) -> Self {
        let spec = grid.spec();
        let n = grid.dim();
        let sizes: Vec<usize> = spec
            .modes
            .iter()
            .map(|&m| padded_size(m, spec.padding))
            .collect();
        let last = n - 1;
        let half = sizes[last] / 2 + 1;

        let mut shape: Vec<usize> = sizes.clone();
        shape[last] = half;
        let mut strides = vec![1usize; n];
        for j in (0..last).rev() {
            strides[j] = strides[j + 1] * shape[j + 1];
        }
        let work_len: usize = shape.iter().product();
        let sample_len: usize = sizes.iter().product();

        // coordinates on the padded axis occupied by the truncation box
        let occupied: Vec<Vec<usize>> = (0..n)
            .map(|j| {
                let half_modes = (spec.modes[j] / 2) as i64;
                (-half_modes..=half_modes)
                    .map(|h| h.rem_euclid(sizes[j] as i64) as usize)
                    .collect()
            })
            .collect();
        let last_occupied: Vec<usize> = (0..=spec.modes[last] / 2).collect();
        let full: Vec<Vec<usize>> = shape.iter().map(|&s| (0..s).collect()).collect();

        let mut planner = FftPlanner::<f64>::new();
        let mut inverse_passes = Vec::new();
        let mut forward_passes = Vec::new();
        for a in 0..last {
            // inverse: earlier axes already full, later axes still sparse
            let outer_axes: Vec<Vec<usize>> = (0..a).map(|b| full[b].clone()).collect();
            let inner_axes: Vec<Vec<usize>> = (a + 1..n)
                .map(|b| {
                    if b == last {
                        last_occupied.clone()
                    } else {
                        occupied[b].clone()
                    }
                })
                .collect();
            inverse_passes.push(AxisPass {
                fft: planner.plan_fft_inverse(sizes[a]),
                stride: strides[a],
                len: sizes[a],
                outer: offsets(&outer_axes, &strides[..a]),
                inner: offsets(&inner_axes, &strides[a + 1..]),
            });
            // forward: earlier axes already reduced to the box, later axes full
            let outer_axes: Vec<Vec<usize>> = (0..a).map(|b| occupied[b].clone()).collect();
            let inner_axes: Vec<Vec<usize>> = (a + 1..n)
                .map(|b| {
                    if b == last {
                        last_occupied.clone()
                    } else {
                        full[b].clone()
                    }
                })
                .collect();
            forward_passes.push(AxisPass {
                fft: planner.plan_fft_forward(sizes[a]),
                stride: strides[a],
                len: sizes[a],
                outer: offsets(&outer_axes, &strides[..a]),
                inner: offsets(&inner_axes, &strides[a + 1..]),
            });
        }

        let mut real_planner = RealFftPlanner::<f64>::new();
        let r2c = real_planner.plan_fft_forward(sizes[last]);
        let c2r = real_planner.plan_fft_inverse(sizes[last]);

        let mut placement = Vec::new();
        let mut mirrored = Vec::new();
        let mut plane_pairs = Vec::new();
        for p in 0..grid.len() {
            let h = grid.index(p);
            if h[last] < 0 {
                mirrored.push(p);
                continue;
            }
            let off: usize = h
                .iter()
                .enumerate()
                .map(|(j, &hj)| hj.rem_euclid(sizes[j] as i64) as usize * strides[j])
                .sum();
            placement.push((p, off));
            if h[last] == 0 {
                let q = grid.mirror()[p];
                if p < q {
                    plane_pairs.push((p, q));
                }
            }
        }

        Self {
            grid: grid.clone(),
            sizes,
            half,
            work_len,
            sample_len,
            placement,
            mirrored,
            plane_pairs,
            inverse_passes,
            forward_passes,
            r2c,
            c2r,
            pool: Mutex::new(Vec::new()),
        }
    }

    pub fn grid(&self) -> &Arc<IndexGrid> {
        &self.grid
    }

    /// Padded sample counts per axis.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Total number of physical samples.
    pub fn sample_len(&self) -> usize {
        self.sample_len
    }

    fn take_work(&self) -> Vec<Complex64> {
        let mut pool = self.pool.lock().unwrap();
        pool.pop()
            .unwrap_or_else(|| vec![Complex64::new(0.0, 0.0); self.work_len])
    }

    fn give_work(&self, buf: Vec<Complex64>) {
        let mut pool = self.pool.lock().unwrap();
        if pool.len() < 2 {
            pool.push(buf);
        }
    }

    /// Physical samples of a (Hermitian) field on the padded grid.
    pub fn to_physical(&self, field: &FourierField) -> Result<Vec<f64>> {
        if field.len() != self.grid.len() {
            return Err(PfcError::Dimension(format!(
                "field with {} modes, transform expects {}",
                field.len(),
                self.grid.len()
            )));
        }
        let mut work = self.take_work();
        work.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        let amps = field.amplitudes();
        for &(p, off) in &self.placement {
            work[off] = amps[p];
        }
        for pass in &self.inverse_passes {
            run_pass(&mut work, pass);
        }
        let m = *self.sizes.last().unwrap();
        let mut samples = vec![0.0; self.sample_len];
        let mut scratch = self.c2r.make_scratch_vec();
        for (line, out) in work.chunks_exact_mut(self.half).zip(samples.chunks_exact_mut(m)) {
            // Imaginary parts at zero/Nyquist frequency are roundoff for
            // Hermitian input; the transform drops them.
            let _ = self.c2r.process_with_scratch(line, out, &mut scratch);
        }
        self.give_work(work);
        Ok(samples)
    }

    /// Truncated, normalized spectrum of real samples on the padded grid.
    pub fn to_spectral(&self, samples: &[f64]) -> Result<FourierField> {
        if samples.len() != self.sample_len {
            return Err(PfcError::Dimension(format!(
                "{} samples, transform expects {}",
                samples.len(),
                self.sample_len
            )));
        }
        let m = *self.sizes.last().unwrap();
        let mut work = self.take_work();
        let mut line = vec![0.0; m];
        let mut scratch = self.r2c.make_scratch_vec();
        for (input, out) in samples.chunks_exact(m).zip(work.chunks_exact_mut(self.half)) {
            line.copy_from_slice(input);
            self.r2c
                .process_with_scratch(&mut line, out, &mut scratch)
                .map_err(|e| PfcError::Solver(format!("real FFT failed: {e}")))?;
        }
        for pass in &self.forward_passes {
            run_pass(&mut work, pass);
        }
        let scale = 1.0 / self.sample_len as f64;
        let mut field = FourierField::zeros(&self.grid);
        let mirror = self.grid.mirror();
        let amps = field.amplitudes_mut();
        for &(p, off) in &self.placement {
            amps[p] = work[off] * scale;
        }
        for &p in &self.mirrored {
            amps[p] = amps[mirror[p]].conj();
        }
        for &(p, q) in &self.plane_pairs {
            let avg = (amps[p] + amps[q].conj()) * 0.5;
            amps[p] = avg;
            amps[q] = avg.conj();
        }
        amps[0].im = 0.0;
        self.give_work(work);
        Ok(field)
    }
}

fn run_pass(work: &mut [Complex64], pass: &AxisPass) {
    let len = pass.len;
    let mut buf = vec![Complex64::new(0.0, 0.0); CHUNK * len];
    let mut scratch = vec![Complex64::new(0.0, 0.0); pass.fft.get_inplace_scratch_len()];
    for &outer in &pass.outer {
        for group in pass.inner.chunks(CHUNK) {
            let used = group.len() * len;
            for t in 0..len {
                let base = outer + t * pass.stride;
                for (c, &inner) in group.iter().enumerate() {
                    buf[c * len + t] = work[base + inner];
                }
            }
            pass.fft.process_with_scratch(&mut buf[..used], &mut scratch);
            for t in 0..len {
                let base = outer + t * pass.stride;
                for (c, &inner) in group.iter().enumerate() {
                    work[base + inner] = buf[c * len + t];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, LatticeSpec};
    use crate::random::random_hermitian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size(257), 270);
        assert_eq!(smooth_size(17), 18);
        assert_eq!(smooth_size(77), 80);
        assert_eq!(padded_size(128, 2.0), 270);
        assert_eq!(padded_size(8, 2.0), 18);
        assert_eq!(padded_size(4, 1.0), 5);
    }

    #[test]
    fn dc_mode_is_constant_one() {
        let g = build_lattice(LatticeSpec::periodic(vec![4, 6], vec![1.0, 0.0, 0.0, 1.0])).unwrap();
        let t = SpectralTransform::new(&g);
        let mut f = FourierField::zeros(&g);
        f.set(&[0, 0], Complex64::new(1.0, 0.0)).unwrap();
        let s = t.to_physical(&f).unwrap();
        assert!(s.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn single_cosine() {
        let g = build_lattice(LatticeSpec::periodic(vec![4], vec![1.0])).unwrap();
        let t = SpectralTransform::new(&g);
        let mut f = FourierField::zeros(&g);
        f.set(&[1], Complex64::new(0.5, 0.0)).unwrap();
        f.set(&[-1], Complex64::new(0.5, 0.0)).unwrap();
        let s = t.to_physical(&f).unwrap();
        let m = t.sizes()[0];
        for (j, v) in s.iter().enumerate() {
            let r = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
            assert!((v - r.cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for modes in [vec![8], vec![6, 4], vec![4, 4, 6], vec![2, 4, 2, 4]] {
            let n = modes.len();
            let mut b = vec![0.0; n * n];
            for i in 0..n {
                b[i * n + i] = 1.0;
            }
            let g = build_lattice(LatticeSpec::periodic(modes, b)).unwrap();
            let t = SpectralTransform::new(&g);
            let f = random_hermitian(&g, &mut rng, 1.0);
            let s = t.to_physical(&f).unwrap();
            let back = t.to_spectral(&s).unwrap();
            let err = back.sub(&f).norm() / f.norm();
            assert!(err < 1e-12, "round trip error {err}");
            let mean_sq = s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64;
            assert!((mean_sq - f.norm_sq()).abs() < 1e-12 * f.norm_sq());
        }
    }
}
