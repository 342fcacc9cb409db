//! Run configuration, solver selection and the bundled presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aabpg::{aabpg_run, default_p4_kernel, AabpgConfig};
use crate::baseline::{baseline_run, BaselineConfig, Scheme};
use crate::bregman::BregmanKernel;
use crate::driver::SwitchRule;
use crate::error::{config_err, PfcError, Result};
use crate::hybrid::{hybrid_run, FirstStage, HybridConfig};
use crate::lattice::{FourierField, LatticeSpec};
use crate::model::{ModelSpec, Problem};
use crate::newton::{newton_pcg_run, NewtonConfig};
use crate::report::SolverReport;

/// Names accepted by [`RunConfig::preset`].
pub const PRESETS: &[&str] = &["smoke", "dg", "qc", "sigma", "sigma-neg"];

const PRESET_FILES: &[(&str, &str)] = &[
    ("smoke", include_str!("../presets/smoke.toml")),
    ("dg", include_str!("../presets/dg.toml")),
    ("qc", include_str!("../presets/qc.toml")),
    ("sigma", include_str!("../presets/sigma.toml")),
    ("sigma-neg", include_str!("../presets/sigma-neg.toml")),
];

const SEED_FILES: &[(&str, &str)] = &[
    ("dg", include_str!("../presets/dg.seeds")),
    ("qc", include_str!("../presets/qc.seeds")),
    ("sigma", include_str!("../presets/sigma.seeds")),
];

/// Text of a bundled seed list.
pub fn builtin_seeds(name: &str) -> Option<&'static str> {
    SEED_FILES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

fn default_random_scale() -> f64 {
    0.1
}

fn default_seed_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Initializer {
    /// Amplitudes from a seed list, either bundled or read from `path`.
    Seeds {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        builtin: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<PathBuf>,
        /// Multiplies every amplitude.
        #[serde(default = "default_seed_scale")]
        scale: f64,
    },
    /// Uniform noise in `[-scale, scale]` on every mode.
    Random {
        #[serde(default = "default_random_scale")]
        scale: f64,
    },
    Snapshot { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SolverSpec {
    Aabpg(AabpgConfig),
    Newton(NewtonConfig),
    Baseline(BaselineConfig),
    Hybrid(HybridConfig),
}

/// Short method names understood by [`SolverSpec::from_label`].
pub const METHOD_LABELS: &[&str] = &[
    "aabpg2", "aabpg4", "newton", "sis", "ssis1", "ssis2", "n-aabpg2", "n-aabpg4", "n-sis", "n-ssis1", "n-ssis2",
];

impl SolverSpec {
    /// Builds a solver from a short name with default settings. Hybrid
    /// methods (`n-` prefix) use `switch`.
    pub fn from_label(label: &str, model: &ModelSpec, switch: SwitchRule) -> Result<Self> {
        let first = |name: &str| -> Result<FirstStage> {
            let baseline = |scheme| FirstStage::Baseline(BaselineConfig { scheme, ..Default::default() });
            Ok(match name {
                "aabpg2" => FirstStage::Aabpg(AabpgConfig::default()),
                "aabpg4" => FirstStage::Aabpg(AabpgConfig {
                    kernel: default_p4_kernel(model),
                    ..Default::default()
                }),
                "sis" => baseline(Scheme::Sis),
                "ssis1" => baseline(Scheme::Ssis1),
                "ssis2" => baseline(Scheme::Ssis2),
                _ => {
                    return config_err(format!(
                        "unknown method '{label}', expected one of {}",
                        METHOD_LABELS.join(", ")
                    ))
                }
            })
        };
        if label == "newton" {
            return Ok(SolverSpec::Newton(NewtonConfig::default()));
        }
        if let Some(rest) = label.strip_prefix("n-") {
            return Ok(SolverSpec::Hybrid(HybridConfig {
                first: first(rest)?,
                switch,
                newton: NewtonConfig::default(),
            }));
        }
        Ok(match first(label)? {
            FirstStage::Aabpg(c) => SolverSpec::Aabpg(c),
            FirstStage::Baseline(c) => SolverSpec::Baseline(c),
        })
    }

    /// Human-readable method name, e.g. `N-AA-BPG-2`.
    pub fn name(&self) -> String {
        let first = |f: &FirstStage| match f {
            FirstStage::Aabpg(c) => match c.kernel {
                BregmanKernel::P2 => "AA-BPG-2".to_string(),
                BregmanKernel::P4 { .. } => "AA-BPG-4".to_string(),
            },
            FirstStage::Baseline(c) => match c.scheme {
                Scheme::Sis => "SIS".to_string(),
                Scheme::Ssis1 => "SSIS1".to_string(),
                Scheme::Ssis2 => "SSIS2".to_string(),
            },
        };
        match self {
            SolverSpec::Aabpg(c) => first(&FirstStage::Aabpg(c.clone())),
            SolverSpec::Baseline(c) => first(&FirstStage::Baseline(c.clone())),
            SolverSpec::Newton(_) => "Newton-PCG".into(),
            SolverSpec::Hybrid(c) => format!("N-{}", first(&c.first)),
        }
    }

    /// Sets the final gradient tolerance. For hybrids this is the Newton
    /// tolerance; the first stage gets the same value as a fallback.
    pub fn set_tol(&mut self, tol: f64) {
        match self {
            SolverSpec::Aabpg(c) => c.tol = tol,
            SolverSpec::Newton(c) => c.tol = tol,
            SolverSpec::Baseline(c) => c.tol = tol,
            SolverSpec::Hybrid(c) => {
                c.newton.tol = tol;
                match &mut c.first {
                    FirstStage::Aabpg(f) => f.tol = tol,
                    FirstStage::Baseline(f) => f.tol = tol,
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SolverSpec::Aabpg(c) => c.validate(),
            SolverSpec::Newton(c) => c.validate(),
            SolverSpec::Baseline(c) => c.validate(),
            SolverSpec::Hybrid(c) => c.validate(),
        }
    }

    pub fn run(&self, problem: &Problem, x0: FourierField) -> Result<SolverReport> {
        match self {
            SolverSpec::Aabpg(c) => aabpg_run(problem, x0, c),
            SolverSpec::Newton(c) => newton_pcg_run(problem, x0, c),
            SolverSpec::Baseline(c) => baseline_run(problem, x0, c),
            SolverSpec::Hybrid(c) => hybrid_run(problem, x0, c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub model: ModelSpec,
    pub lattice: LatticeSpec,
    pub init: Initializer,
    pub solver: SolverSpec,
    /// Switch rule for hybrids selected by name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch: Option<SwitchRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Known stationary energy, reported next to the result.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_energy: Option<f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| PfcError::Config(e.to_string()))
    }

    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PfcError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            config.resolve_paths(dir);
        }
        Ok(config)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let text = PRESET_FILES
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| *t)
            .ok_or_else(|| PfcError::Config(format!("unknown preset '{name}', expected one of {}", PRESETS.join(", "))))?;
        Self::from_toml(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        match &mut self.init {
            Initializer::Seeds { path: Some(p), .. } | Initializer::Snapshot { path: p } => fix(p),
            _ => {}
        }
        if let Some(out) = &mut self.output {
            fix(out);
        }
    }

    /// Switch rule for hybrids chosen by name: the configured one, else a
    /// gradient-change threshold of 1e-3.
    pub fn switch_rule(&self) -> SwitchRule {
        if let Some(rule) = self.switch {
            return rule;
        }
        match &self.solver {
            SolverSpec::Hybrid(c) => c.switch,
            _ => SwitchRule {
                energy_tol: 0.0,
                grad_tol: 1e-3,
            },
        }
    }

    /// Checks everything that can be checked without building the lattice.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return config_err("run name must not be empty");
        }
        self.model.validate()?;
        self.solver.validate()?;
        if let Some(r) = self.reference_energy {
            if !r.is_finite() {
                return config_err("reference energy must be finite");
            }
        }
        match &self.init {
            Initializer::Seeds { builtin, path, scale } => {
                match (builtin, path) {
                    (Some(_), Some(_)) | (None, None) => {
                        return config_err("seed initializer needs exactly one of 'builtin' and 'path'")
                    }
                    (Some(b), None) if builtin_seeds(b).is_none() => {
                        return config_err(format!("no bundled seed list named '{b}'"))
                    }
                    (None, Some(p)) if !p.is_file() => {
                        return config_err(format!("seed file {} does not exist", p.display()))
                    }
                    _ => {}
                }
                if !scale.is_finite() {
                    return config_err("seed scale must be finite");
                }
            }
            Initializer::Random { scale } => {
                if !(scale.is_finite() && *scale >= 0.0) {
                    return config_err(format!("random scale must be nonnegative, got {scale}"));
                }
            }
            Initializer::Snapshot { path } => {
                if !path.is_file() {
                    return config_err(format!("snapshot {} does not exist", path.display()));
                }
            }
        }
        Ok(())
    }
}
