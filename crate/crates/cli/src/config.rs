//! Strict run-configuration schema.
//!
//! One JSON file drives every subcommand. Sections beyond `geometry` are
//! optional at parse time with documented defaults; each subcommand
//! demands the sections it needs and every domain invariant is re-checked
//! on load, so a config that parses is not yet a config that runs.
//! Unknown keys are rejected at every level, with the offending key named
//! in the error message.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thinplate::eigensolve::LanczosOptions;
use thinplate::spectra::SweepMode;
use thinplate::{DumbbellSpec, MaterialParams};

use crate::Failure;

/// Top-level run configuration.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Dumbbell geometry: plate lengths, channel profile, ε.
    pub geometry: Option<DumbbellSpec>,
    /// Material parameters: Poisson ratio σ and lateral tension τ.
    pub params: Option<MaterialParams>,
    #[serde(default)]
    pub discretization: Discretization,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Grid and mode for the `sweep` subcommand.
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub output: OutputSection,
    /// Precomputed eigenvalue lists for the list-only `decompose` path.
    pub spectra: Option<SpectraSection>,
}

/// Mesh resolutions. `h_target` sizes dumbbell meshes (clamped to the
/// channel height per ε), `nx`/`ny` the pulled-back channel strip, and
/// `n_elems_1d` the limit-problem interval.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Discretization {
    pub h_target: f64,
    pub nx: usize,
    pub ny: usize,
    pub n_elems_1d: usize,
}

impl Default for Discretization {
    fn default() -> Self {
        Self {
            h_target: 0.05,
            nx: 40,
            ny: 8,
            n_elems_1d: 256,
        }
    }
}

impl Discretization {
    fn validate(&self) -> Result<(), Failure> {
        if !(self.h_target > 0.0 && self.h_target.is_finite()) {
            return Err(Failure::config(format!(
                "\"discretization.h_target\" must be finite and > 0 (got {})",
                self.h_target
            )));
        }
        for (key, value) in [("nx", self.nx), ("ny", self.ny)] {
            if value < 2 {
                return Err(Failure::config(format!(
                    "\"discretization.{key}\" must be at least 2 (got {value})"
                )));
            }
        }
        if self.n_elems_1d < 2 {
            return Err(Failure::config(format!(
                "\"discretization.n_elems_1d\" must be at least 2 (got {})",
                self.n_elems_1d
            )));
        }
        Ok(())
    }
}

/// Eigensolver controls. The tolerance default favors 2D plate meshes,
/// whose residual metric has a roundoff floor well above the 1D one;
/// tighten it for high-accuracy 1D runs.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Number of smallest eigenpairs.
    pub k: usize,
    /// Relative residual target ‖Kx − λMx‖/‖Kx‖.
    pub tol: f64,
    /// Cap on the Krylov basis size.
    pub max_iters: usize,
    /// Start-vector RNG seed; fixed seed ⇒ byte-identical outputs.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            k: 6,
            tol: 1e-6,
            max_iters: 400,
            seed: 42,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), Failure> {
        if self.k == 0 {
            return Err(Failure::config("\"solver.k\" must be at least 1".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Failure::config(format!(
                "\"solver.tol\" must be finite and > 0 (got {})",
                self.tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Failure::config(
                "\"solver.max_iters\" must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn to_options(&self) -> LanczosOptions {
        LanczosOptions {
            k: self.k,
            tol: self.tol,
            max_iters: self.max_iters,
            seed: self.seed,
        }
    }
}

/// ε-grid and comparison mode for `sweep`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// `channel_limit`, `decomposition`, or `dirichlet`.
    pub mode: SweepMode,
    /// Channel thicknesses, conventionally descending.
    pub epsilon_grid: Vec<f64>,
    /// Eigenvalue indices per grid point; per-mode default when absent.
    pub n_modes: Option<usize>,
}

impl SweepSection {
    fn validate(&self) -> Result<(), Failure> {
        if self.epsilon_grid.is_empty() {
            return Err(Failure::config(
                "\"sweep.epsilon_grid\" must not be empty".into(),
            ));
        }
        for &eps in &self.epsilon_grid {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Failure::config(format!(
                    "\"sweep.epsilon_grid\" entries must be finite and > 0 (got {eps})"
                )));
            }
        }
        if self.n_modes == Some(0) {
            return Err(Failure::config(
                "\"sweep.n_modes\" must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Pass/fail gates applied by `decompose`. Absent gates never fire.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Largest admissible per-index relative deviation from the merged
    /// reference sequence.
    pub max_deviation: Option<f64>,
    /// Smallest admissible mass fraction on a mode's own region (applied
    /// to every row whose fractions are computed).
    pub min_mass_fraction: Option<f64>,
}

impl Thresholds {
    fn validate(&self) -> Result<(), Failure> {
        if let Some(d) = self.max_deviation {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Failure::config(format!(
                    "\"thresholds.max_deviation\" must be finite and >= 0 (got {d})"
                )));
            }
        }
        if let Some(f) = self.min_mass_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(Failure::config(format!(
                    "\"thresholds.min_mass_fraction\" must lie in [0, 1] (got {f})"
                )));
            }
        }
        Ok(())
    }
}

/// Where outputs land when `--out` is not given.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

/// Explicit eigenvalue lists: a dumbbell spectrum plus the two reference
/// branches, already ascending. With this section present, `decompose`
/// skips all meshing and compares the lists directly.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectraSection {
    pub dumbbell: Vec<f64>,
    pub omega: Vec<f64>,
    pub theta: Vec<f64>,
    /// Indices to compare; defaults to the full dumbbell list.
    pub n_modes: Option<usize>,
}

impl SpectraSection {
    fn validate(&self) -> Result<(), Failure> {
        for (key, list) in [
            ("dumbbell", &self.dumbbell),
            ("omega", &self.omega),
            ("theta", &self.theta),
        ] {
            if list.is_empty() {
                return Err(Failure::config(format!(
                    "\"spectra.{key}\" must not be empty"
                )));
            }
            if list.iter().any(|v| !v.is_finite()) {
                return Err(Failure::config(format!(
                    "\"spectra.{key}\" entries must be finite"
                )));
            }
            if list.windows(2).any(|w| w[0] > w[1]) {
                return Err(Failure::config(format!(
                    "\"spectra.{key}\" must be ascending"
                )));
            }
        }
        if self.n_modes == Some(0) {
            return Err(Failure::config(
                "\"spectra.n_modes\" must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

impl RunConfig {
    /// Read and parse a config file, returning the parsed structure and
    /// the raw bytes (hashed into the run manifest).
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), Failure> {
        let raw = fs::read(path).map_err(|e| {
            Failure::config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: RunConfig = serde_json::from_slice(&raw)
            .map_err(|e| Failure::config(format!("{} in {}", e, path.display())))?;
        // Sections with defaults are always present, so their invariants
        // are checked unconditionally; purely optional sections are
        // checked when present and again demanded by the subcommands that
        // need them.
        cfg.discretization.validate()?;
        cfg.solver.validate()?;
        cfg.thresholds.validate()?;
        if let Some(sweep) = &cfg.sweep {
            sweep.validate()?;
        }
        if let Some(spectra) = &cfg.spectra {
            spectra.validate()?;
        }
        Ok((cfg, raw))
    }

    /// The geometry section, fully re-validated (lengths, ε·g < 1,
    /// profile positivity and shape).
    pub fn geometry(&self) -> Result<&DumbbellSpec, Failure> {
        let spec = self.geometry_raw()?;
        spec.validate()
            .map_err(|e| Failure::config(format!("\"geometry\": {e}")))?;
        Ok(spec)
    }

    /// The geometry section as parsed. `validate-profile` uses this: the
    /// profile must be inspectable even when ε or the lengths are not.
    pub fn geometry_raw(&self) -> Result<&DumbbellSpec, Failure> {
        self.geometry
            .as_ref()
            .ok_or_else(|| Failure::config("missing section \"geometry\"".into()))
    }

    pub fn params(&self) -> Result<&MaterialParams, Failure> {
        let params = self
            .params
            .as_ref()
            .ok_or_else(|| Failure::config("missing section \"params\"".into()))?;
        params
            .validate()
            .map_err(|e| Failure::config(format!("\"params\": {e}")))?;
        Ok(params)
    }

    pub fn sweep_section(&self) -> Result<&SweepSection, Failure> {
        self.sweep
            .as_ref()
            .ok_or_else(|| Failure::config("missing section \"sweep\"".into()))
    }
}

/// Lowercase hex SHA-256 of the raw config bytes.
pub fn config_digest(raw: &[u8]) -> String {
    let digest = Sha256::digest(raw);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
