//! Binary field snapshots.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! "PFCF"            4 bytes
//! version           u32
//! n, d              u32, u32
//! N_1 .. N_n        u32 each
//! B                 n*n f64, row-major
//! P                 d*n f64, row-major
//! amplitudes        (re, im) f64 pairs in lattice storage order
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{PfcError, Result};
use crate::lattice::{FourierField, IndexGrid, LatticeSpec};

pub const MAGIC: &[u8; 4] = b"PFCF";
pub const VERSION: u32 = 1;

/// Upper bound on header dimensions, guards against absurd allocations.
const MAX_DIM: usize = 16;

/// Contents of a snapshot file.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub modes: Vec<usize>,
    pub reciprocal: Vec<f64>,
    pub projection: Vec<f64>,
    pub amplitudes: Vec<Complex64>,
}

impl Snapshot {
    pub fn of(field: &FourierField) -> Self {
        let spec = field.grid().spec();
        Self {
            modes: spec.modes.clone(),
            reciprocal: spec.reciprocal.clone(),
            projection: spec.projection.clone(),
            amplitudes: field.amplitudes().to_vec(),
        }
    }

    /// Lattice described by the header, with the default padding.
    pub fn lattice_spec(&self) -> LatticeSpec {
        let mut spec = LatticeSpec::periodic(self.modes.clone(), self.reciprocal.clone());
        spec.projection = self.projection.clone();
        spec
    }

    /// Places the amplitudes on `grid`; the mode counts and both matrices
    /// must agree exactly.
    pub fn into_field(self, grid: &Arc<IndexGrid>) -> Result<FourierField> {
        let spec = grid.spec();
        if spec.modes != self.modes {
            return Err(PfcError::ShapeMismatch(format!(
                "snapshot has modes {:?}, lattice has {:?}",
                self.modes, spec.modes
            )));
        }
        if spec.reciprocal != self.reciprocal || spec.projection != self.projection {
            return Err(PfcError::ShapeMismatch(
                "snapshot basis or projection differs from the lattice".into(),
            ));
        }
        FourierField::from_amplitudes(grid, self.amplitudes)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.modes.len();
        let d = self.projection.len() / n.max(1);
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(n as u32).to_le_bytes())?;
        out.write_all(&(d as u32).to_le_bytes())?;
        for &m in &self.modes {
            out.write_all(&(m as u32).to_le_bytes())?;
        }
        for v in self.reciprocal.iter().chain(&self.projection) {
            out.write_all(&v.to_le_bytes())?;
        }
        for a in &self.amplitudes {
            out.write_all(&a.re.to_le_bytes())?;
            out.write_all(&a.im.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut input, &mut magic, "magic")?;
        if &magic != MAGIC {
            return Err(PfcError::CorruptSnapshot("bad magic bytes".into()));
        }
        let version = read_u32(&mut input, "version")?;
        if version != VERSION {
            return Err(PfcError::CorruptSnapshot(format!("unsupported version {version}")));
        }
        let n = read_u32(&mut input, "n")? as usize;
        let d = read_u32(&mut input, "d")? as usize;
        if n == 0 || n > MAX_DIM || d == 0 || d > n {
            return Err(PfcError::CorruptSnapshot(format!("invalid dimensions n = {n}, d = {d}")));
        }
        let modes = (0..n)
            .map(|_| read_u32(&mut input, "mode counts").map(|m| m as usize))
            .collect::<Result<Vec<_>>>()?;
        let count = modes
            .iter()
            .try_fold(1usize, |acc, &m| acc.checked_mul(m + 1))
            .filter(|&c| c <= 1 << 40)
            .ok_or_else(|| PfcError::CorruptSnapshot("mode counts overflow".into()))?;
        let reciprocal = read_f64s(&mut input, n * n, "basis")?;
        let projection = read_f64s(&mut input, d * n, "projection")?;
        let mut amplitudes = Vec::with_capacity(count);
        let mut buf = [0u8; 16];
        for _ in 0..count {
            read_exact(&mut input, &mut buf, "amplitudes")?;
            let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
            let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
            amplitudes.push(Complex64::new(re, im));
        }
        let mut extra = [0u8; 1];
        if input.read(&mut extra)? != 0 {
            return Err(PfcError::CorruptSnapshot("trailing bytes after amplitudes".into()));
        }
        Ok(Self {
            modes,
            reciprocal,
            projection,
            amplitudes,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }
}

fn read_exact<R: Read>(input: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => PfcError::CorruptSnapshot(format!("file ends inside {what}")),
        _ => PfcError::Io(e),
    })
}

fn read_u32<R: Read>(input: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(input, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s<R: Read>(input: &mut R, count: usize, what: &str) -> Result<Vec<f64>> {
    let mut b = [0u8; 8];
    (0..count)
        .map(|_| {
            read_exact(input, &mut b, what)?;
            Ok(f64::from_le_bytes(b))
        })
        .collect()
}
