//! Run configuration: one TOML file with flat dotted keys.
//!
//! ```toml
//! k = 8
//! seed = 0
//! dt = 1e-3
//! modes = [5, 6, 7, 8]
//! density.kind = "gp"
//! density.coupling = 0.05
//! kernel.delta = 0.1
//! grid.ns = 200
//! strip.t_max = 20.0
//! tol.residual = 1e-8
//! ```
//!
//! Unknown keys are rejected. Every key has a default, so an empty file is a
//! valid configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::floer::{ContinuationOptions, SolverOptions};
use crate::fixedpoint::NewtonOptions;
use crate::flow::FlowSpec;
use crate::hamiltonian::{DensityModel, DensityTable, HamiltonianSystem, HoferOptions};
use crate::spectral::{make_admissible_kernel, DecayProfile, Kernel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Mode cut-off of the run.
    pub k: usize,
    pub seed: u64,
    pub dt: f64,
    pub output_dir: PathBuf,
    /// Modes followed by `strip`, `fixedpoints` and `verify`.
    pub modes: Vec<i64>,
    pub density: DensityConfig,
    pub kernel: KernelConfig,
    pub grid: GridConfig,
    pub strip: StripConfig,
    pub tol: TolConfig,
    pub hofer: HoferConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityKind {
    Zero,
    Gp,
    Linear,
    CustomTable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensityConfig {
    pub kind: DensityKind,
    /// Quartic coupling `c` of the Gross–Pitaevskii density.
    pub coupling: f64,
    /// Amplitude `a` of `V(t, x) = a cos(x) (1 + cos 2πt)`.
    pub potential: f64,
    /// Slope of the linear density.
    pub lambda: f64,
    /// JSON lattice for `custom-table`, relative to the config file.
    pub table: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Geometric,
    Flat,
    Table,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    pub delta: f64,
    pub profile: ProfileKind,
    pub amplitude: f64,
    /// Geometric ratio `ρ` in `a·ρ^{|m|}`.
    pub decay: f64,
    /// Per-|m| amplitudes for `profile = "table"`.
    pub values: Vec<f64>,
    /// Support radius `k_ψ`; defaults to `k`.
    pub max_mode: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub ns: usize,
    pub nt: usize,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StripConfig {
    pub t_max: f64,
    pub steps: usize,
    pub min_step: f64,
    pub action_orientation: f64,
    pub max_iter: usize,
    pub cg_max_iter: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TolConfig {
    /// Strip residual.
    pub residual: f64,
    /// Fixed-point residual accepted by Newton refinement.
    pub newton: f64,
    /// Projective distance of boundary columns to the asymptote.
    pub asymptote: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HoferConfig {
    pub nodes: usize,
    pub starts: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: 8,
            seed: 0,
            dt: 1e-3,
            output_dir: PathBuf::from("out"),
            modes: vec![5, 6, 7, 8],
            density: DensityConfig::default(),
            kernel: KernelConfig::default(),
            grid: GridConfig::default(),
            strip: StripConfig::default(),
            tol: TolConfig::default(),
            hofer: HoferConfig::default(),
        }
    }
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig {
            kind: DensityKind::Gp,
            coupling: 0.05,
            potential: 0.05,
            lambda: 1.0,
            table: None,
        }
    }
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            delta: 0.1,
            profile: ProfileKind::Geometric,
            amplitude: 0.3,
            decay: 0.8,
            values: Vec::new(),
            max_mode: None,
        }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            ns: 200,
            nt: 32,
            margin: 5.0,
        }
    }
}

impl Default for StripConfig {
    fn default() -> Self {
        let s = SolverOptions::default();
        StripConfig {
            t_max: 20.0,
            steps: 20,
            min_step: 1e-3,
            action_orientation: -1.0,
            max_iter: s.max_iter,
            cg_max_iter: s.cg_max_iter,
        }
    }
}

impl Default for TolConfig {
    fn default() -> Self {
        TolConfig {
            residual: 1e-8,
            newton: 1e-9,
            asymptote: 1e-12,
        }
    }
}

impl Default for HoferConfig {
    fn default() -> Self {
        let h = HoferOptions::default();
        HoferConfig {
            nodes: h.nodes,
            starts: h.starts,
            tol: h.tol,
            max_iter: h.max_iter,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    /// Parse TOML text. Syntax errors and unknown keys carry the offending
    /// line and key.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load a config file; a relative `density.table` is resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if let (Some(table), Some(dir)) = (&cfg.density.table, path.parent()) {
            if table.is_relative() {
                cfg.density.table = Some(dir.join(table));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        positive("dt", self.dt)?;
        positive("kernel.delta", self.kernel.delta)?;
        if self.kernel.delta >= 2.0 {
            return Err(Error::Config(format!(
                "kernel.delta must lie in (0, 2), got {}",
                self.kernel.delta
            )));
        }
        positive("tol.residual", self.tol.residual)?;
        positive("tol.newton", self.tol.newton)?;
        positive("tol.asymptote", self.tol.asymptote)?;
        positive("hofer.tol", self.hofer.tol)?;
        positive("strip.min_step", self.strip.min_step)?;
        positive("grid.margin", self.grid.margin)?;
        if !(self.strip.t_max >= 0.0 && self.strip.t_max.is_finite()) {
            return Err(Error::Config("strip.t_max must be nonnegative".into()));
        }
        if self.strip.action_orientation.abs() != 1.0 {
            return Err(Error::Config("strip.action_orientation must be +1 or -1".into()));
        }
        if self.strip.steps == 0 || self.hofer.nodes == 0 || self.hofer.starts == 0 {
            return Err(Error::Config(
                "strip.steps, hofer.nodes and hofer.starts must be at least 1".into(),
            ));
        }
        if self.grid.ns < 6 || self.grid.nt < 3 || self.grid.ns % 2 == 1 {
            return Err(Error::Config(format!(
                "grid {}x{} invalid: need an even ns ≥ 6 and nt ≥ 3",
                self.grid.ns, self.grid.nt
            )));
        }
        if let Some(&n) = self.modes.iter().find(|n| n.unsigned_abs() as usize > self.k) {
            return Err(Error::Config(format!("mode {n} exceeds k = {}", self.k)));
        }
        if self.density.kind == DensityKind::CustomTable && self.density.table.is_none() {
            return Err(Error::Config("density.kind = \"custom-table\" needs density.table".into()));
        }
        if self.kernel.profile == ProfileKind::Table && self.kernel.values.is_empty() {
            return Err(Error::Config("kernel.profile = \"table\" needs kernel.values".into()));
        }
        Ok(())
    }

    pub fn profile(&self) -> DecayProfile {
        let kc = &self.kernel;
        match kc.profile {
            ProfileKind::Geometric => DecayProfile::Geometric {
                amplitude: kc.amplitude,
                ratio: kc.decay,
            },
            ProfileKind::Flat => DecayProfile::Flat {
                amplitude: kc.amplitude,
            },
            ProfileKind::Table => DecayProfile::Table {
                values: kc.values.clone(),
            },
        }
    }

    pub fn kernel(&self) -> Result<Kernel> {
        make_admissible_kernel(
            self.kernel.delta,
            self.kernel.max_mode.unwrap_or(self.k),
            &self.profile(),
        )
    }

    pub fn density(&self) -> Result<DensityModel> {
        let d = &self.density;
        Ok(match d.kind {
            DensityKind::Zero => DensityModel::Zero,
            DensityKind::Gp => DensityModel::GrossPitaevskii {
                coupling: d.coupling,
                potential: d.potential,
            },
            DensityKind::Linear => DensityModel::Linear { lambda: d.lambda },
            DensityKind::CustomTable => {
                let path = d.table.as_ref().expect("validated");
                let table = DensityTable::load(path).map_err(|e| {
                    Error::Config(format!("density.table {}: {e}", path.display()))
                })?;
                DensityModel::Table(std::sync::Arc::new(table))
            }
        })
    }

    pub fn system(&self) -> Result<HamiltonianSystem> {
        Ok(HamiltonianSystem::new(&self.kernel()?, self.density()?, self.k))
    }

    pub fn flow_spec(&self) -> Result<FlowSpec> {
        FlowSpec::new(self.system()?, self.dt)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol.residual,
            max_iter: self.strip.max_iter,
            cg_max_iter: self.strip.cg_max_iter,
        }
    }

    pub fn continuation_options(&self) -> ContinuationOptions {
        ContinuationOptions {
            t_max: self.strip.t_max,
            steps: self.strip.steps,
            min_step: self.strip.min_step,
            ns: self.grid.ns,
            nt: self.grid.nt,
            margin: self.grid.margin,
            solver: self.solver_options(),
            action_orientation: self.strip.action_orientation,
            hofer_estimate: None,
            snapshot_dir: None,
        }
    }

    pub fn newton_options(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.tol.newton,
            ..NewtonOptions::default()
        }
    }

    pub fn hofer_options(&self) -> HoferOptions {
        HoferOptions {
            nodes: self.hofer.nodes,
            starts: self.hofer.starts,
            tol: self.hofer.tol,
            max_iter: self.hofer.max_iter,
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn dotted_keys() {
        let cfg = RunConfig::from_toml_str(
            "k = 4\nmodes = [1]\ndensity.kind = \"linear\"\ndensity.lambda = 2.0\ngrid.ns = 40\n",
        )
        .unwrap();
        assert_eq!(cfg.k, 4);
        assert_eq!(cfg.grid.ns, 40);
        assert!(matches!(cfg.density().unwrap(), DensityModel::Linear { lambda } if lambda == 2.0));
    }

    #[test]
    fn unknown_key_names_line_and_key() {
        let err = RunConfig::from_toml_str("k = 4\ngrid.nx = 3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("nx"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn rejects_nonpositive_tolerance() {
        assert!(RunConfig::from_toml_str("tol.residual = 0.0").is_err());
        assert!(RunConfig::from_toml_str("grid.ns = 21").is_err());
        assert!(RunConfig::from_toml_str("modes = [9]").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
