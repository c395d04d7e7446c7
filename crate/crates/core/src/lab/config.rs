use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::environment::{MarkLaw, ProcessKind, ProcessSpec};
use crate::error::{Error, Result};
use crate::network::{ConductanceKernel, KernelSpec, TruncationPolicy};
use crate::rng::derive_seed;
use crate::solver::DEFAULT_TOL;

/// Full description of an experiment. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub geometry: GeometryConfig,
    pub run: RunConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dimension: usize,
    pub process: ProcessKind,
    pub marks: MarkLaw,
    pub kernel: KernelSpec,
    /// Inverse temperatures to sweep; empty means the kernel's own `beta`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub betas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// Box sides, strictly increasing. Alternatively give `epsilons`, read
    /// as `l = 1/eps`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ells: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub truncation: TruncationPolicy,
    /// Torus side for the corrector and walk columns; omitted skips them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torus_side: Option<f64>,
    /// Filament cutoff on the torus; defaults to the kernel's 1e-14 radius,
    /// capped at half the side.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torus_cutoff: Option<f64>,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_walkers() -> usize {
    400
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n_realizations: usize,
    pub master_seed: u64,
    #[serde(default = "default_tol")]
    pub solver_tol: f64,
    pub output_dir: PathBuf,
    /// Walkers per torus realization; zero skips the walk column.
    #[serde(default = "default_walkers")]
    pub walkers: usize,
    /// Walk horizon; by default long enough for about 1000 jumps per walker.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

/// Jumps per walker aimed at when no horizon is configured.
pub const DEFAULT_JUMPS: f64 = 1000.0;

/// Default cutoff tolerance for torus filaments.
const TORUS_TOL: f64 = 1e-14;

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let d = self.model.dimension;
        if d == 0 {
            return bad("dimension must be >= 1".into());
        }
        self.process_spec().validate().map_err(|e| Error::Config(e.to_string()))?;
        self.kernel().validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.model.betas.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
            return bad("betas must be finite and >= 0".into());
        }
        match (self.geometry.ells.is_empty(), self.geometry.epsilons.is_empty()) {
            (false, false) => return bad("give either ells or epsilons, not both".into()),
            (true, true) => return bad("geometry needs ells or epsilons".into()),
            _ => {}
        }
        if self.geometry.epsilons.iter().any(|e| !(*e > 0.0)) {
            return bad("epsilons must be positive".into());
        }
        let ells = self.ells();
        if ells.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return bad("box sides must be positive".into());
        }
        if ells.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("box sides {ells:?} must be strictly increasing"));
        }
        if let Some(side) = self.geometry.torus_side {
            if !(side > 0.0 && side.is_finite()) {
                return bad(format!("torus side {side} must be positive"));
            }
            let r = self.torus_cutoff(&self.kernel());
            if !(r > 0.0 && r <= 0.5 * side) {
                return bad(format!("torus cutoff {r} must lie in (0, L/2]"));
            }
        }
        if self.run.n_realizations == 0 {
            return bad("n_realizations must be >= 1".into());
        }
        if !(self.run.solver_tol > 0.0 && self.run.solver_tol < 1.0) {
            return bad("solver_tol must lie in (0, 1)".into());
        }
        if let Some(t) = self.run.horizon {
            if !(t > 0.0 && t.is_finite()) {
                return bad("horizon must be positive".into());
            }
        }
        Ok(())
    }

    pub fn process_spec(&self) -> ProcessSpec {
        ProcessSpec {
            dimension: self.model.dimension,
            process: self.model.process.clone(),
            marks: self.model.marks.clone(),
        }
    }

    pub fn kernel(&self) -> ConductanceKernel {
        ConductanceKernel::from(&self.model.kernel)
    }

    pub fn kernel_at(&self, beta: f64) -> ConductanceKernel {
        self.kernel().with_beta(beta)
    }

    /// The beta grid, falling back to the kernel's single value (zero for
    /// kernels without temperature).
    pub fn betas(&self) -> Vec<f64> {
        if self.model.betas.is_empty() {
            vec![self.kernel().beta().unwrap_or(0.0)]
        } else {
            self.model.betas.clone()
        }
    }

    pub fn ells(&self) -> Vec<f64> {
        if self.geometry.ells.is_empty() {
            let mut ells: Vec<f64> = self.geometry.epsilons.iter().map(|e| 1.0 / e).collect();
            ells.sort_by(f64::total_cmp);
            ells
        } else {
            self.geometry.ells.clone()
        }
    }

    pub fn torus_cutoff(&self, kernel: &ConductanceKernel) -> f64 {
        match (self.geometry.torus_cutoff, self.geometry.torus_side) {
            (Some(r), _) => r,
            (None, Some(side)) => kernel.cutoff_radius(TORUS_TOL).min(0.5 * side),
            (None, None) => kernel.cutoff_radius(TORUS_TOL),
        }
    }

    /// Seed of realization `r`.
    pub fn realization_seed(&self, r: usize) -> u64 {
        derive_seed(self.run.master_seed, r as u64)
    }

    pub fn realization_seeds(&self) -> Vec<u64> {
        (0..self.run.n_realizations).map(|r| self.realization_seed(r)).collect()
    }

    /// Hex SHA-256 of the canonical JSON, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.run.output_dir = PathBuf::new();
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn with_overrides(mut self, seed: Option<u64>, out: Option<PathBuf>) -> Self {
        if let Some(s) = seed {
            self.run.master_seed = s;
        }
        if let Some(o) = out {
            self.run.output_dir = o;
        }
        self
    }
}
