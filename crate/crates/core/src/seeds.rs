//! Initial amplitudes given as a list of lattice indices.
//!
//! Text format: one entry per line, the `n` integer components of `h`
//! followed by the real and imaginary part of the amplitude. Blank lines and
//! lines starting with `#` are ignored.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{config_err, PfcError, Result};
use crate::lattice::{FourierField, IndexGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct SeedEntry {
    pub h: Vec<i64>,
    pub amplitude: Complex64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeedList {
    pub entries: Vec<SeedEntry>,
}

impl SeedList {
    pub fn new(entries: Vec<SeedEntry>) -> Self {
        Self { entries }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut dim = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() < 3 {
                return config_err(format!("seed line {}: expected indices and two amplitude parts", lineno + 1));
            }
            let n = parts.len() - 2;
            if *dim.get_or_insert(n) != n {
                return config_err(format!("seed line {}: index has {n} components, expected {}", lineno + 1, dim.unwrap()));
            }
            let bad = |what: &str| PfcError::Config(format!("seed line {}: bad {what}", lineno + 1));
            let h = parts[..n]
                .iter()
                .map(|s| s.parse::<i64>().map_err(|_| bad("index")))
                .collect::<Result<Vec<_>>>()?;
            let re = parts[n].parse::<f64>().map_err(|_| bad("real part"))?;
            let im = parts[n + 1].parse::<f64>().map_err(|_| bad("imaginary part"))?;
            entries.push(SeedEntry {
                h,
                amplitude: Complex64::new(re, im),
            });
        }
        Ok(Self { entries })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            for v in &e.h {
                let _ = write!(out, "{v} ");
            }
            let _ = writeln!(out, "{:.17e} {:.17e}", e.amplitude.re, e.amplitude.im);
        }
        out
    }

    /// Places the amplitudes on `grid`, completes `-h` with conjugates and
    /// zeroes the mass. An index listed together with its mirror keeps the
    /// Hermitian average of the two.
    pub fn build(&self, grid: &std::sync::Arc<IndexGrid>) -> Result<FourierField> {
        let mut field = FourierField::zeros(grid);
        let mut listed = vec![false; grid.len()];
        for e in &self.entries {
            if e.h.len() != grid.dim() {
                return Err(PfcError::Dimension(format!(
                    "seed index {:?} has {} components, lattice has {}",
                    e.h,
                    e.h.len(),
                    grid.dim()
                )));
            }
            let pos = grid
                .position(&e.h)
                .ok_or_else(|| PfcError::Config(format!("seed index {:?} lies outside the truncation box", e.h)))?;
            if !e.amplitude.is_finite() {
                return Err(PfcError::NonFinite(format!("seed amplitude at {:?}", e.h)));
            }
            field.amplitudes_mut()[pos] = e.amplitude;
            listed[pos] = true;
        }
        let mirror = grid.mirror();
        let amps = field.amplitudes_mut();
        for pos in 0..listed.len() {
            let m = mirror[pos];
            if !listed[pos] || m < pos && listed[m] {
                continue;
            }
            if listed[m] {
                let avg = (amps[pos] + amps[m].conj()) * 0.5;
                amps[pos] = avg;
                amps[m] = avg.conj();
            } else {
                amps[m] = amps[pos].conj();
            }
        }
        amps[0] = Complex64::new(0.0, 0.0);
        Ok(field)
    }

    /// Nonzero amplitudes of `field` with `|a_h| > threshold`.
    pub fn from_field(field: &FourierField, threshold: f64) -> Self {
        let grid = field.grid();
        let entries = field
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > threshold)
            .map(|(p, a)| SeedEntry {
                h: grid.index(p),
                amplitude: *a,
            })
            .collect();
        Self { entries }
    }
}
