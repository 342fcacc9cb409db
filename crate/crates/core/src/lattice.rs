//! Truncated reciprocal lattices and the Fourier fields that live on them.
//!
//! A field is stored as the full box of complex amplitudes `{h : |h_j| <= N_j/2}`.
//! Along each axis the storage order follows the FFT convention (non-negative
//! indices first, then the negative ones), so the zero mode always sits at flat
//! position 0 and the mass constraint reads `amps[0] == 0`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, PfcError, Result};
use crate::numerics::pairwise_sum;

/// Smallest admissible |det B|.
pub const DET_TOLERANCE: f64 = 1e-12;

fn default_padding() -> f64 {
    2.0
}

/// Geometry of the truncated higher-dimensional lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    /// Per-axis mode counts `N_j` (positive, even).
    pub modes: Vec<usize>,
    /// Reciprocal basis `B`, `n x n`, row-major.
    pub reciprocal: Vec<f64>,
    /// Projection `P`, `d x n`, row-major. Empty means `P = I`.
    #[serde(default)]
    pub projection: Vec<f64>,
    /// Dealiasing factor for the physical sampling grid.
    #[serde(default = "default_padding")]
    pub padding: f64,
}

impl LatticeSpec {
    /// Periodic lattice with `P = I` and the given reciprocal basis.
    pub fn periodic(modes: Vec<usize>, reciprocal: Vec<f64>) -> Self {
        let n = modes.len();
        let mut projection = vec![0.0; n * n];
        for i in 0..n {
            projection[i * n + i] = 1.0;
        }
        Self {
            modes,
            reciprocal,
            projection,
            padding: default_padding(),
        }
    }

    /// Periodic box `prod [0, L_j)`: `B = diag(2 pi / L_j)`.
    pub fn periodic_box(modes: Vec<usize>, lengths: &[f64]) -> Self {
        let n = modes.len();
        let mut b = vec![0.0; n * n];
        for (i, l) in lengths.iter().enumerate() {
            b[i * n + i] = 2.0 * std::f64::consts::PI / l;
        }
        Self::periodic(modes, b)
    }

    pub fn embedding_dim(&self) -> usize {
        self.modes.len()
    }

    pub fn physical_dim(&self) -> usize {
        let n = self.modes.len();
        if n == 0 {
            0
        } else {
            self.projection.len() / n
        }
    }

    /// Number of amplitudes in the truncation box, `prod (N_j + 1)`.
    pub fn mode_count(&self) -> usize {
        self.modes.iter().map(|m| m + 1).product()
    }

    fn validate(&self) -> Result<()> {
        let n = self.modes.len();
        if n == 0 {
            return config_err("lattice needs at least one axis");
        }
        for (j, &m) in self.modes.iter().enumerate() {
            if m == 0 || m % 2 != 0 {
                return config_err(format!(
                    "mode count N_{j} = {m} must be a positive even integer"
                ));
            }
        }
        if self.reciprocal.len() != n * n {
            return config_err(format!(
                "reciprocal basis has {} entries, expected {}",
                self.reciprocal.len(),
                n * n
            ));
        }
        if self.projection.is_empty() || self.projection.len() % n != 0 {
            return config_err(format!(
                "projection has {} entries, not a multiple of n = {n}",
                self.projection.len()
            ));
        }
        if self.physical_dim() > n {
            return config_err("projection has more rows than columns");
        }
        if self
            .reciprocal
            .iter()
            .chain(self.projection.iter())
            .any(|v| !v.is_finite())
        {
            return config_err("lattice matrices must be finite");
        }
        let det = determinant(&self.reciprocal, n);
        if det.abs() < DET_TOLERANCE {
            return config_err(format!("reciprocal basis is singular (det = {det:e})"));
        }
        if !(self.padding.is_finite() && self.padding >= 1.0) {
            return config_err(format!("padding {} must be >= 1", self.padding));
        }
        Ok(())
    }
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(a: &[f64], n: usize) -> f64 {
    let mut m = a.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
            .unwrap();
        if m[pivot * n + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
            }
            det = -det;
        }
        let p = m[col * n + col];
        det *= p;
        for row in col + 1..n {
            let f = m[row * n + col] / p;
            for k in col..n {
                m[row * n + k] -= f * m[col * n + k];
            }
        }
    }
    det
}

/// Ordered lattice indices of the truncation box with their wave vectors.
#[derive(Debug, Clone)]
pub struct IndexGrid {
    spec: LatticeSpec,
    extents: Vec<usize>,
    strides: Vec<usize>,
    wave_sq: Vec<f64>,
    mirror: Vec<usize>,
}

/// Builds the index box and the projected wave vectors `k_h = P B h`.
pub fn build_lattice(mut spec: LatticeSpec) -> Result<Arc<IndexGrid>> {
    if spec.projection.is_empty() {
        spec.projection = LatticeSpec::periodic(spec.modes.clone(), Vec::new()).projection;
    }
    spec.validate()?;
    let n = spec.embedding_dim();
    let extents: Vec<usize> = spec.modes.iter().map(|m| m + 1).collect();
    let mut strides = vec![1; n];
    for j in (0..n.saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * extents[j + 1];
    }
    let len: usize = extents.iter().product();

    // P*B, d x n
    let d = spec.physical_dim();
    let mut pb = vec![0.0; d * n];
    for r in 0..d {
        for c in 0..n {
            pb[r * n + c] = (0..n)
                .map(|k| spec.projection[r * n + k] * spec.reciprocal[k * n + c])
                .sum();
        }
    }

    let mut grid = IndexGrid {
        spec,
        extents,
        strides,
        wave_sq: Vec::with_capacity(len),
        mirror: Vec::with_capacity(len),
    };
    let mut h = vec![0i64; n];
    for pos in 0..len {
        grid.write_index(pos, &mut h);
        let mut k2 = 0.0;
        for r in 0..d {
            let kr: f64 = (0..n).map(|c| pb[r * n + c] * h[c] as f64).sum();
            k2 += kr * kr;
        }
        grid.wave_sq.push(k2);
        let neg: Vec<i64> = h.iter().map(|v| -v).collect();
        grid.mirror.push(grid.position(&neg).unwrap());
    }
    Ok(Arc::new(grid))
}

impl IndexGrid {
    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    /// Number of stored amplitudes.
    pub fn len(&self) -> usize {
        self.wave_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wave_sq.is_empty()
    }

    /// Per-axis extents `N_j + 1`.
    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn half_modes(&self, axis: usize) -> i64 {
        (self.spec.modes[axis] / 2) as i64
    }

    /// Storage position of index `h`, `None` outside the truncation box.
    pub fn position(&self, h: &[i64]) -> Option<usize> {
        if h.len() != self.dim() {
            return None;
        }
        let mut pos = 0;
        for (j, &hj) in h.iter().enumerate() {
            let half = self.half_modes(j);
            if hj.abs() > half {
                return None;
            }
            let slot = if hj >= 0 {
                hj as usize
            } else {
                (self.extents[j] as i64 + hj) as usize
            };
            pos += slot * self.strides[j];
        }
        Some(pos)
    }

    /// Lattice index stored at `pos`.
    pub fn index(&self, pos: usize) -> Vec<i64> {
        let mut h = vec![0; self.dim()];
        self.write_index(pos, &mut h);
        h
    }

    fn write_index(&self, mut pos: usize, h: &mut [i64]) {
        for j in 0..self.extents.len() {
            let slot = pos / self.strides[j];
            pos %= self.strides[j];
            let half = (self.spec.modes[j] / 2) as i64;
            h[j] = if slot as i64 <= half {
                slot as i64
            } else {
                slot as i64 - self.extents[j] as i64
            };
        }
    }

    /// Projected wave vector `P B h` at storage position `pos`.
    pub fn wave_vector(&self, pos: usize) -> Vec<f64> {
        let n = self.dim();
        let d = self.spec.physical_dim();
        let h = self.index(pos);
        (0..d)
            .map(|r| {
                (0..n)
                    .map(|c| {
                        let pb: f64 = (0..n)
                            .map(|k| self.spec.projection[r * n + k] * self.spec.reciprocal[k * n + c])
                            .sum();
                        pb * h[c] as f64
                    })
                    .sum()
            })
            .collect()
    }

    /// `|k_h|^2` for every stored index.
    pub fn wave_sq(&self) -> &[f64] {
        &self.wave_sq
    }

    /// Storage position of `-h` for every stored `h`.
    pub fn mirror(&self) -> &[usize] {
        &self.mirror
    }
}

/// Complex Fourier amplitudes on a truncated lattice.
#[derive(Debug, Clone)]
pub struct FourierField {
    grid: Arc<IndexGrid>,
    amps: Vec<Complex64>,
}

impl PartialEq for FourierField {
    fn eq(&self, other: &Self) -> bool {
        self.same_lattice(other) && self.amps == other.amps
    }
}

impl FourierField {
    pub fn zeros(grid: &Arc<IndexGrid>) -> Self {
        Self {
            grid: grid.clone(),
            amps: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_amplitudes(grid: &Arc<IndexGrid>, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != grid.len() {
            return Err(PfcError::Dimension(format!(
                "{} amplitudes for a lattice with {} modes",
                amps.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            amps,
        })
    }

    pub fn grid(&self) -> &Arc<IndexGrid> {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn get(&self, h: &[i64]) -> Option<Complex64> {
        self.grid.position(h).map(|p| self.amps[p])
    }

    pub fn set(&mut self, h: &[i64], value: Complex64) -> Result<()> {
        let pos = self.grid.position(h).ok_or_else(|| {
            PfcError::Config(format!("index {h:?} lies outside the truncation box"))
        })?;
        self.amps[pos] = value;
        Ok(())
    }

    /// Amplitude of the zero mode, `e1^T x`.
    pub fn mass(&self) -> Complex64 {
        self.amps[0]
    }

    pub fn is_mass_zero(&self) -> bool {
        self.amps[0] == Complex64::new(0.0, 0.0)
    }

    pub fn same_lattice(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid)
            || (self.grid.spec == other.grid.spec && self.len() == other.len())
    }

    pub fn check_lattice(&self, other: &Self) -> Result<()> {
        if self.same_lattice(other) {
            Ok(())
        } else {
            Err(PfcError::Dimension(
                "fields live on different lattices".to_string(),
            ))
        }
    }

    /// Real inner product `Re sum conj(x_h) y_h`.
    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        dot(&self.amps, &other.amps)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.amps, &self.amps)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Norm of the mass-zero projection.
    pub fn projected_norm(&self) -> f64 {
        dot(&self.amps[1..], &self.amps[1..]).sqrt()
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.amps.iter_mut().zip(&x.amps) {
            *s += v * a;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for s in &mut self.amps {
            *s *= a;
        }
    }

    /// `a * self + b * other` as a new field.
    pub fn lincomb(&self, a: f64, other: &Self, b: f64) -> Self {
        let amps = self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(x, y)| x * a + y * b)
            .collect();
        Self {
            grid: self.grid.clone(),
            amps,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let amps = self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(x, y)| x - y)
            .collect();
        Self {
            grid: self.grid.clone(),
            amps,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.amps.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Largest `|x_h - conj(x_{-h})|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mirror = self.grid.mirror();
        self.amps
            .iter()
            .enumerate()
            .map(|(p, v)| (v - self.amps[mirror[p]].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Replaces `x_h` by `(x_h + conj(x_{-h})) / 2`.
    pub fn symmetrize(&mut self) {
        let mirror = self.grid.mirror().to_vec();
        for p in 0..self.amps.len() {
            let q = mirror[p];
            if q < p {
                continue;
            }
            if q == p {
                self.amps[p].im = 0.0;
                continue;
            }
            let avg = (self.amps[p] + self.amps[q].conj()) * 0.5;
            self.amps[p] = avg;
            self.amps[q] = avg.conj();
        }
    }
}

/// Zeroes the `h = 0` amplitude, `P1 = I - e1 e1^T`.
pub fn project_mass_zero(mut field: FourierField) -> FourierField {
    field.amps[0] = Complex64::new(0.0, 0.0);
    field
}

pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    pairwise_sum(a.len(), |i| a[i].re * b[i].re + a[i].im * b[i].im)
}
