//! Discretized LB / LP energies, gradients and Hessian-vector products.
//!
//! The energy is `E = G + F` with `G = 1/2 sum_h D_h |a_h|^2` and `F` the domain
//! average of a quartic bulk density, evaluated on the padded sample grid.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, PfcError, Result};
use crate::lattice::{FourierField, IndexGrid};
use crate::numerics::{mean, pairwise_sum};
use crate::transform::SpectralTransform;

/// Model kind and physical parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ModelSpec {
    /// Landau-Brazovskii: one resonance shell at `|k| = 1`.
    #[serde(rename = "LB")]
    LandauBrazovskii { xi: f64, tau: f64, gamma: f64 },
    /// Lifshitz-Petrich: two resonance shells `q1`, `q2`.
    #[serde(rename = "LP")]
    LifshitzPetrich {
        c: f64,
        q1: f64,
        q2: f64,
        epsilon: f64,
        kappa: f64,
    },
}

/// Bulk density `c2 phi^2 + c3 phi^3 + c4 phi^4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BulkPolynomial {
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl BulkPolynomial {
    #[inline]
    pub fn density(&self, x: f64) -> f64 {
        x * x * (self.c2 + x * (self.c3 + x * self.c4))
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        x * (2.0 * self.c2 + x * (3.0 * self.c3 + x * 4.0 * self.c4))
    }

    #[inline]
    pub fn second_derivative(&self, x: f64) -> f64 {
        2.0 * self.c2 + x * (6.0 * self.c3 + x * 12.0 * self.c4)
    }

    /// `density(x) - density(y)` in factored form.
    #[inline]
    pub fn difference(&self, x: f64, y: f64) -> f64 {
        let s = x + y;
        let q = self.c2 * s + self.c3 * (x * x + x * y + y * y) + self.c4 * s * (x * x + y * y);
        (x - y) * q
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = |vals: &[f64]| vals.iter().all(|v| v.is_finite());
        match *self {
            ModelSpec::LandauBrazovskii { xi, tau, gamma } => {
                if !finite(&[xi, tau, gamma]) {
                    return config_err("LB parameters must be finite");
                }
                if xi * xi <= 0.0 {
                    return config_err("LB model needs xi^2 > 0");
                }
            }
            ModelSpec::LifshitzPetrich {
                c,
                q1,
                q2,
                epsilon,
                kappa,
            } => {
                if !finite(&[c, q1, q2, epsilon, kappa]) {
                    return config_err("LP parameters must be finite");
                }
                if c <= 0.0 {
                    return config_err("LP model needs c > 0");
                }
                if q1 == q2 {
                    return config_err("LP model needs q1 != q2");
                }
            }
        }
        Ok(())
    }

    pub fn bulk(&self) -> BulkPolynomial {
        match *self {
            ModelSpec::LandauBrazovskii { tau, gamma, .. } => BulkPolynomial {
                c2: tau / 2.0,
                c3: -gamma / 6.0,
                c4: 1.0 / 24.0,
            },
            ModelSpec::LifshitzPetrich { epsilon, kappa, .. } => BulkPolynomial {
                c2: epsilon / 2.0,
                c3: -kappa / 3.0,
                c4: 0.25,
            },
        }
    }

    /// Interaction symbol at `|k|^2`.
    pub fn interaction(&self, k2: f64) -> f64 {
        match *self {
            ModelSpec::LandauBrazovskii { xi, .. } => {
                let s = 1.0 - k2;
                xi * xi * s * s
            }
            ModelSpec::LifshitzPetrich { c, q1, q2, .. } => {
                let a = q1 * q1 - k2;
                let b = q2 * q2 - k2;
                c * a * a * b * b
            }
        }
    }

    /// Coefficient of the quadratic bulk term's second derivative (`tau` or `epsilon`).
    pub fn quadratic_curvature(&self) -> f64 {
        2.0 * self.bulk().c2
    }
}

/// Diagonal of the interaction Hessian, one nonnegative entry per lattice index.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionDiagonal {
    entries: Vec<f64>,
}

impl InteractionDiagonal {
    pub fn from_entries(entries: Vec<f64>) -> Result<Self> {
        if entries.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return config_err("interaction entries must be finite and nonnegative");
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `D x`
    pub fn apply(&self, x: &FourierField) -> FourierField {
        let mut out = x.clone();
        for (v, d) in out.amplitudes_mut().iter_mut().zip(&self.entries) {
            *v *= *d;
        }
        out
    }

    /// `1/2 sum D_h |x_h|^2`
    pub fn quadratic_form(&self, x: &FourierField) -> f64 {
        let a = x.amplitudes();
        0.5 * pairwise_sum(a.len(), |i| self.entries[i] * a[i].norm_sqr())
    }
}

/// Builds `D` from the lattice wave vectors.
pub fn interaction_diagonal(grid: &IndexGrid, model: &ModelSpec) -> InteractionDiagonal {
    InteractionDiagonal {
        entries: grid.wave_sq().iter().map(|&k2| model.interaction(k2)).collect(),
    }
}

/// Interaction, bulk and total energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub interaction: f64,
    pub bulk: f64,
    pub total: f64,
}

/// A field together with its physical samples and energy.
#[derive(Debug, Clone)]
pub struct Sampled {
    pub field: FourierField,
    pub samples: Vec<f64>,
    pub energy: EnergyBreakdown,
}

impl Sampled {
    pub fn total(&self) -> f64 {
        self.energy.total
    }
}

/// The discrete minimization problem on one lattice.
#[derive(Debug)]
pub struct Problem {
    grid: Arc<IndexGrid>,
    model: ModelSpec,
    bulk: BulkPolynomial,
    diag: InteractionDiagonal,
    transform: SpectralTransform,
}

impl Problem {
    pub fn new(grid: &Arc<IndexGrid>, model: ModelSpec) -> Result<Self> {
        model.validate()?;
        let diag = interaction_diagonal(grid, &model);
        Self::with_diagonal(grid, model, diag)
    }

    /// Uses a caller-supplied interaction diagonal instead of the model symbol.
    pub fn with_diagonal(
        grid: &Arc<IndexGrid>,
        model: ModelSpec,
        diag: InteractionDiagonal,
    ) -> Result<Self> {
        if diag.len() != grid.len() {
            return Err(PfcError::Dimension(format!(
                "diagonal has {} entries, lattice has {} modes",
                diag.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            model,
            bulk: model.bulk(),
            diag,
            transform: SpectralTransform::new(grid),
        })
    }

    pub fn grid(&self) -> &Arc<IndexGrid> {
        &self.grid
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn bulk(&self) -> &BulkPolynomial {
        &self.bulk
    }

    pub fn diagonal(&self) -> &InteractionDiagonal {
        &self.diag
    }

    pub fn transform(&self) -> &SpectralTransform {
        &self.transform
    }

    fn check(&self, field: &FourierField) -> Result<()> {
        if field.len() != self.grid.len() {
            return Err(PfcError::Dimension(format!(
                "field with {} modes on a problem with {}",
                field.len(),
                self.grid.len()
            )));
        }
        Ok(())
    }

    /// Samples `field` and evaluates its energy.
    pub fn sample(&self, field: FourierField) -> Result<Sampled> {
        self.check(&field)?;
        if !field.is_finite() {
            return Err(PfcError::NonFinite("non-finite amplitudes".into()));
        }
        let samples = self.transform.to_physical(&field)?;
        self.assemble(field, samples)
    }

    /// Samples `field` as `base` plus the transformed difference, so that
    /// sample differences to `base` carry errors relative to the difference.
    pub fn sample_near(&self, base: &Sampled, field: FourierField) -> Result<Sampled> {
        self.check(&field)?;
        if !field.is_finite() {
            return Err(PfcError::NonFinite("non-finite amplitudes".into()));
        }
        let delta = self.transform.to_physical(&field.sub(&base.field))?;
        let samples = base.samples.iter().zip(&delta).map(|(a, b)| a + b).collect();
        self.assemble(field, samples)
    }

    /// Evaluates the energy of a field whose samples are already known.
    pub fn assemble(&self, field: FourierField, samples: Vec<f64>) -> Result<Sampled> {
        self.check(&field)?;
        if samples.len() != self.transform.sample_len() {
            return Err(PfcError::Dimension(format!(
                "{} samples for a grid of {}",
                samples.len(),
                self.transform.sample_len()
            )));
        }
        let interaction = self.diag.quadratic_form(&field);
        let bulk = mean(samples.len(), |i| self.bulk.density(samples[i]));
        let energy = EnergyBreakdown {
            interaction,
            bulk,
            total: interaction + bulk,
        };
        if !energy.total.is_finite() {
            return Err(PfcError::NonFinite(format!(
                "energy is {} (interaction {interaction}, bulk {bulk})",
                energy.total
            )));
        }
        Ok(Sampled {
            field,
            samples,
            energy,
        })
    }

    pub fn energy(&self, field: &FourierField) -> Result<EnergyBreakdown> {
        Ok(self.sample(field.clone())?.energy)
    }

    /// `E(a) - E(b)` computed from pointwise differences.
    pub fn energy_drop(&self, a: &Sampled, b: &Sampled) -> f64 {
        let (x, y) = (a.field.amplitudes(), b.field.amplitudes());
        let d = self.diag.entries();
        let interaction = 0.5
            * pairwise_sum(x.len(), |i| {
                let diff = x[i] - y[i];
                let sum = x[i] + y[i];
                d[i] * (diff.re * sum.re + diff.im * sum.im)
            });
        let (sa, sb) = (&a.samples, &b.samples);
        let bulk = mean(sa.len(), |i| self.bulk.difference(sa[i], sb[i]));
        interaction + bulk
    }

    /// Spectrum of `f'(phi)` from cached samples.
    pub fn bulk_gradient_of(&self, point: &Sampled) -> Result<FourierField> {
        let values: Vec<f64> = point
            .samples
            .iter()
            .map(|&x| self.bulk.derivative(x))
            .collect();
        let g = self.transform.to_spectral(&values)?;
        if !g.is_finite() {
            return Err(PfcError::NonFinite("non-finite bulk gradient".into()));
        }
        Ok(g)
    }

    pub fn bulk_gradient(&self, field: &FourierField) -> Result<FourierField> {
        let point = self.sample(field.clone())?;
        self.bulk_gradient_of(&point)
    }

    /// `D x + grad F(x)` from cached samples.
    pub fn full_gradient_of(&self, point: &Sampled) -> Result<FourierField> {
        let mut g = self.bulk_gradient_of(point)?;
        let d = self.diag.entries();
        for ((gv, xv), dv) in g
            .amplitudes_mut()
            .iter_mut()
            .zip(point.field.amplitudes())
            .zip(d)
        {
            *gv += xv * *dv;
        }
        Ok(g)
    }

    pub fn full_gradient(&self, field: &FourierField) -> Result<FourierField> {
        let point = self.sample(field.clone())?;
        self.full_gradient_of(&point)
    }

    /// Hessian of `E` at a sampled point.
    pub fn hessian_at(&self, point: &Sampled) -> Hessian<'_> {
        let curvature = point
            .samples
            .iter()
            .map(|&x| self.bulk.second_derivative(x))
            .collect();
        Hessian {
            problem: self,
            curvature,
        }
    }

    /// `(D + grad^2 F(x)) v`
    pub fn hessian_vec(&self, field: &FourierField, v: &FourierField) -> Result<FourierField> {
        field.check_lattice(v)?;
        let point = self.sample(field.clone())?;
        self.hessian_at(&point).apply(v)
    }

    /// Largest bulk curvature `f''(phi)` over the sample grid.
    pub fn max_second_derivative_of(&self, point: &Sampled) -> f64 {
        point
            .samples
            .iter()
            .map(|&x| self.bulk.second_derivative(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_second_derivative(&self, field: &FourierField) -> Result<f64> {
        let point = self.sample(field.clone())?;
        Ok(self.max_second_derivative_of(&point))
    }
}

/// Hessian-vector products at a fixed point.
pub struct Hessian<'a> {
    problem: &'a Problem,
    curvature: Vec<f64>,
}

impl Hessian<'_> {
    /// Pointwise `f''(phi)` on the sample grid.
    pub fn curvature(&self) -> &[f64] {
        &self.curvature
    }

    pub fn max_curvature(&self) -> f64 {
        self.curvature.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn apply(&self, v: &FourierField) -> Result<FourierField> {
        self.problem.check(v)?;
        let t = &self.problem.transform;
        let mut s = t.to_physical(v)?;
        for (x, c) in s.iter_mut().zip(&self.curvature) {
            *x *= c;
        }
        let mut out = t.to_spectral(&s)?;
        let d = self.problem.diag.entries();
        for ((o, x), dv) in out.amplitudes_mut().iter_mut().zip(v.amplitudes()).zip(d) {
            *o += x * *dv;
        }
        if !out.is_finite() {
            return Err(PfcError::NonFinite("non-finite Hessian product".into()));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, LatticeSpec};
    use num_complex::Complex64;

    fn lp() -> ModelSpec {
        ModelSpec::LifshitzPetrich {
            c: 24.0,
            q1: 1.0,
            q2: 2.0 * (std::f64::consts::PI / 12.0).cos(),
            epsilon: -6.0,
            kappa: 6.0,
        }
    }

    fn lb() -> ModelSpec {
        ModelSpec::LandauBrazovskii {
            xi: 0.1,
            tau: -2.0,
            gamma: 2.0,
        }
    }

    fn cube(n: usize) -> Arc<IndexGrid> {
        build_lattice(LatticeSpec::periodic(
            vec![n; 3],
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        ))
        .unwrap()
    }

    #[test]
    fn interaction_entries() {
        assert_eq!(lb().interaction(1.0), 0.0);
        assert!((lb().interaction(0.0) - 0.01).abs() < 1e-16);
        let q2 = 2.0 * (std::f64::consts::PI / 12.0).cos();
        // q2^2 = 2 + sqrt(3)
        let expected = 24.0 * (2.0 + 3f64.sqrt()).powi(2);
        assert!((lp().interaction(0.0) - expected).abs() < 1e-12);
        assert!((expected - 334.277).abs() < 1e-3);
        assert!(lp().interaction(q2 * q2).abs() < 1e-12);
        assert_eq!(lp().interaction(1.0), 0.0);
    }

    #[test]
    fn zero_field_is_zero_everywhere() {
        let g = cube(4);
        for m in [lb(), lp()] {
            let p = Problem::new(&g, m).unwrap();
            let z = FourierField::zeros(&g);
            let e = p.energy(&z).unwrap();
            assert_eq!((e.interaction, e.bulk, e.total), (0.0, 0.0, 0.0));
            assert_eq!(p.bulk_gradient(&z).unwrap().norm(), 0.0);
            assert_eq!(p.full_gradient(&z).unwrap().norm(), 0.0);
        }
    }

    #[test]
    fn constant_field_closed_form() {
        let g = cube(4);
        let (xi, tau, gamma) = (0.3, -0.7, 1.3);
        let p = Problem::new(&g, ModelSpec::LandauBrazovskii { xi, tau, gamma }).unwrap();
        let a = 0.8;
        let mut f = FourierField::zeros(&g);
        f.set(&[0, 0, 0], Complex64::new(a, 0.0)).unwrap();
        let e = p.energy(&f).unwrap();
        assert!((e.interaction - 0.5 * xi * xi * a * a).abs() < 1e-15);
        let bulk = tau * a * a / 2.0 - gamma * a.powi(3) / 6.0 + a.powi(4) / 24.0;
        assert!((e.bulk - bulk).abs() < 1e-14);
        assert_eq!(e.total, e.interaction + e.bulk);
    }

    #[test]
    fn lp_single_mode_gradient() {
        let g = cube(4);
        let (epsilon, kappa) = (-0.4, 1.1);
        let model = ModelSpec::LifshitzPetrich {
            c: 1.0,
            q1: 1.0,
            q2: 2.0,
            epsilon,
            kappa,
        };
        let p = Problem::new(&g, model).unwrap();
        let a = 0.6;
        let mut f = FourierField::zeros(&g);
        f.set(&[0, 0, 0], Complex64::new(a, 0.0)).unwrap();
        let grad = p.bulk_gradient(&f).unwrap();
        let expected = epsilon * a - kappa * a * a + a * a * a;
        assert!((grad.mass().re - expected).abs() < 1e-14);
        assert!(grad.projected_norm() < 1e-14);
    }

    #[test]
    fn zero_lp_field_hessian_is_shifted_diagonal() {
        let g = cube(4);
        let p = Problem::new(&g, lp()).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let v = crate::random::random_hermitian(&g, &mut rng, 1.0);
        let hv = p.hessian_vec(&FourierField::zeros(&g), &v).unwrap();
        let mut expected = p.diagonal().apply(&v);
        expected.axpy(-6.0, &v);
        assert!(hv.sub(&expected).norm() < 1e-12 * expected.norm());
        assert_eq!(p.hessian_vec(&v, &FourierField::zeros(&g)).unwrap().norm(), 0.0);
    }

    #[test]
    fn max_second_derivative_of_zero_field() {
        let g = cube(4);
        let z = FourierField::zeros(&g);
        assert_eq!(Problem::new(&g, lp()).unwrap().max_second_derivative(&z).unwrap(), -6.0);
        assert_eq!(Problem::new(&g, lb()).unwrap().max_second_derivative(&z).unwrap(), -2.0);
    }

    #[test]
    fn factored_difference_matches_direct() {
        let b = lb().bulk();
        for (x, y) in [(0.3, -1.2), (2.0, 2.0), (5.5, 5.5000001)] {
            let direct = b.density(x) - b.density(y);
            assert!((b.difference(x, y) - direct).abs() < 1e-12 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn rejects_invalid_models() {
        let bad = ModelSpec::LifshitzPetrich {
            c: 1.0,
            q1: 1.0,
            q2: 1.0,
            epsilon: 0.0,
            kappa: 0.0,
        };
        assert!(bad.validate().is_err());
        let bad = ModelSpec::LandauBrazovskii {
            xi: 0.0,
            tau: 0.0,
            gamma: 0.0,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn non_finite_field_is_reported() {
        let g = cube(2);
        let p = Problem::new(&g, lb()).unwrap();
        let mut f = FourierField::zeros(&g);
        f.set(&[1, 0, 0], Complex64::new(f64::NAN, 0.0)).unwrap();
        assert!(matches!(p.energy(&f), Err(PfcError::NonFinite(_))));
    }
}
