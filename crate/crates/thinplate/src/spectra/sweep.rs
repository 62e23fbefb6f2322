//! ε-sweep drivers: run one comparison pipeline over a grid of channel
//! thicknesses and tabulate relative errors against the appropriate
//! reference. Sweep points are independent tasks (parallel when the
//! `parallel` feature is on); the table is keyed by (ε, index), so
//! aggregation does not depend on execution order.

use super::pipeline::{decomposition_run, dirichlet_contrast};
use crate::eigensolve::{solve_smallest, LanczosOptions};
use crate::error::Error;
use crate::femcore::{apply_clamped_constraints, assemble, ClampWhere, FormKind};
use crate::geometry::{DumbbellSpec, MaterialParams, ProfileSpec};
use crate::limit1d::{limit_solver_tol, solve_limit};
use crate::meshgen::{build_channel_reference_mesh, DofMap};
use crate::Result;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// The ε grid used throughout when none is given: coarse enough to show
/// the trend, fine enough to reach the asymptotic regime.
pub const DEFAULT_EPSILON_GRID: [f64; 5] = [0.4, 0.2, 0.1, 0.05, 0.025];

/// Which comparison a sweep runs at every ε.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Pulled-back channel eigenvalues θ_l^ε against the 1D limit θ_l.
    ChannelLimit,
    /// Dumbbell eigenvalues λ_n(Ω_ε) against the merged box ∪ channel
    /// sequence λ_n^ε.
    Decomposition,
    /// Fully clamped dumbbell against the clamped disconnected Ω — the
    /// contrast case where no channel family survives.
    Dirichlet,
}

/// Everything one sweep needs. Build with [`SweepConfig::new`] and adjust
/// fields; `new` picks sensible per-mode mode counts and tolerances.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub mode: SweepMode,
    /// Channel thicknesses, conventionally descending.
    pub epsilon_grid: Vec<f64>,
    pub params: MaterialParams,
    pub profile: ProfileSpec,
    /// Left and right plate widths (dumbbell modes only).
    pub left_len: f64,
    pub right_len: f64,
    /// Target element size for dumbbell meshes; clamped per point to the
    /// channel height so thin channels stay resolvable.
    pub h_target: f64,
    /// How many eigenvalue indices each table row block covers.
    pub n_modes: usize,
    /// Reference-strip resolution for `ChannelLimit` (elements in x, y).
    pub channel_nx: usize,
    pub channel_ny: usize,
    /// 1D resolution of the limit-problem reference.
    pub n_elems_1d: usize,
    /// Base solver options; each pipeline sets its own pair count `k`,
    /// and 1D solves tighten the tolerance to their resolution's floor.
    pub solver: LanczosOptions,
}

impl SweepConfig {
    pub fn new(mode: SweepMode) -> Self {
        let n_modes = match mode {
            SweepMode::ChannelLimit => 2,
            SweepMode::Decomposition => 10,
            SweepMode::Dirichlet => 5,
        };
        Self {
            mode,
            epsilon_grid: DEFAULT_EPSILON_GRID.to_vec(),
            params: MaterialParams { sigma: 0.3, tau: 0.0 },
            profile: ProfileSpec::constant(1.0),
            left_len: 1.0,
            right_len: 1.0,
            h_target: 0.05,
            n_modes,
            channel_nx: 40,
            channel_ny: 8,
            n_elems_1d: 256,
            solver: LanczosOptions {
                // Fine 2D meshes put the residual metric's roundoff floor
                // above the solver default; 1e-8 is reliably reachable.
                tol: 1e-6,
                ..Default::default()
            },
        }
    }

    fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.profile.validate_shape()?;
        if self.epsilon_grid.is_empty() {
            return Err(Error::InvalidParams("epsilon grid is empty".into()));
        }
        for &eps in &self.epsilon_grid {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::InvalidEpsilon { epsilon: eps });
            }
        }
        if self.n_modes == 0 {
            return Err(Error::InvalidParams("n_modes must be at least 1".into()));
        }
        if !(self.h_target > 0.0 && self.h_target.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "h_target = {} must be finite and > 0",
                self.h_target
            )));
        }
        if self.channel_nx < 2 || self.channel_ny < 2 {
            return Err(Error::InvalidParams(format!(
                "channel resolution needs nx, ny >= 2 (got {}, {})",
                self.channel_nx, self.channel_ny
            )));
        }
        if self.n_elems_1d < 2 {
            return Err(Error::InvalidParams(format!(
                "n_elems_1d = {} must be at least 2",
                self.n_elems_1d
            )));
        }
        Ok(())
    }

    fn dumbbell_spec(&self, epsilon: f64) -> Result<DumbbellSpec> {
        DumbbellSpec::new(self.left_len, self.right_len, self.profile.clone(), epsilon)
    }
}

/// One (ε, index) entry of a sweep table.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    /// 1-based eigenvalue index within its sequence.
    pub index: usize,
    /// The ε-dependent eigenvalue (θ_l^ε, λ_n(Ω_ε), or λ_n^D(Ω_ε)).
    pub value: f64,
    /// What it is converging to (θ_l, λ_n^ε, or λ_n^D(Ω)).
    pub reference: f64,
    /// |value − reference| / reference.
    pub rel_error: f64,
    /// Provenance label: `channel(l)`, `omega(k)`, or `dirichlet`.
    pub tag: String,
}

/// Sweep result: rows for every grid point and index, in grid order.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub mode: SweepMode,
    pub rows: Vec<SweepRow>,
}

impl ConvergenceTable {
    /// CSV rendering with full-precision floats and `\n` line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,index,value,reference,rel_error,tag\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:.16e},{},{:.16e},{:.16e},{:.16e},{}\n",
                r.epsilon, r.index, r.value, r.reference, r.rel_error, r.tag
            ));
        }
        out
    }

    /// Relative errors of one index across the grid, sorted by
    /// descending ε (the conventional reading order of the tables).
    pub fn rel_errors_for_index(&self, index: usize) -> Vec<(f64, f64)> {
        let mut v: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.index == index)
            .map(|r| (r.epsilon, r.rel_error))
            .collect();
        v.sort_by(|a, b| b.0.total_cmp(&a.0));
        v
    }
}

fn rel(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs().max(f64::MIN_POSITIVE)
}

fn channel_limit_point(
    config: &SweepConfig,
    epsilon: f64,
    reference: &[f64],
) -> Result<Vec<SweepRow>> {
    let mesh = build_channel_reference_mesh(config.channel_nx, config.channel_ny, &config.profile)?;
    let mut dofs = DofMap::for_mesh(&mesh);
    apply_clamped_constraints(&mesh, &mut dofs, ClampWhere::ChannelEnds)?;
    let kmat = assemble(
        &mesh,
        &dofs,
        &FormKind::ChannelEpsForm(config.params, epsilon, config.profile.clone()),
    )?;
    let mmat = assemble(&mesh, &dofs, &FormKind::WeightedMass(config.profile.clone()))?;
    let theta = solve_smallest(
        &kmat,
        &mmat,
        &LanczosOptions {
            k: config.n_modes,
            ..config.solver
        },
    )?
    .values;
    Ok(theta
        .iter()
        .zip(reference)
        .enumerate()
        .map(|(l, (&value, &reference))| SweepRow {
            epsilon,
            index: l + 1,
            value,
            reference,
            rel_error: rel(value, reference),
            tag: format!("channel({})", l + 1),
        })
        .collect())
}

fn decomposition_point(config: &SweepConfig, epsilon: f64) -> Result<Vec<SweepRow>> {
    let spec = config.dumbbell_spec(epsilon)?;
    let run = decomposition_run(
        &spec,
        &config.params,
        config.h_target,
        config.n_modes,
        &config.solver,
    )?;
    Ok(run
        .report
        .rows
        .iter()
        .map(|row| SweepRow {
            epsilon,
            index: row.index,
            value: row.lambda,
            reference: row.reference,
            rel_error: row.deviation,
            tag: row.tag.to_string(),
        })
        .collect())
}

fn dirichlet_point(config: &SweepConfig, epsilon: f64) -> Result<Vec<SweepRow>> {
    let spec = config.dumbbell_spec(epsilon)?;
    let run = dirichlet_contrast(
        &spec,
        &config.params,
        config.h_target,
        config.n_modes,
        &config.solver,
    )?;
    Ok(run
        .values
        .iter()
        .zip(&run.reference)
        .enumerate()
        .map(|(i, (&value, &reference))| SweepRow {
            epsilon,
            index: i + 1,
            value,
            reference,
            rel_error: rel(value, reference),
            tag: "dirichlet".into(),
        })
        .collect())
}

/// Run the configured comparison at every grid point and tabulate.
///
/// Points are mutually independent; with the `parallel` feature they run
/// on the rayon pool. Rows always come back in grid order regardless of
/// scheduling, and every row is keyed by (ε, index) anyway.
pub fn epsilon_sweep(config: &SweepConfig) -> Result<ConvergenceTable> {
    config.validate()?;

    // The ε-independent reference of the channel–limit comparison is
    // computed once, outside the per-point tasks.
    let limit_reference: Option<Vec<f64>> = match config.mode {
        SweepMode::ChannelLimit => Some(
            solve_limit(
                &config.params,
                &config.profile,
                config.n_elems_1d,
                &LanczosOptions {
                    k: config.n_modes,
                    tol: config.solver.tol.min(limit_solver_tol(config.n_elems_1d)),
                    ..config.solver
                },
            )?
            .pairs
            .values,
        ),
        _ => None,
    };

    let point = |&epsilon: &f64| -> Result<Vec<SweepRow>> {
        match config.mode {
            SweepMode::ChannelLimit => {
                channel_limit_point(config, epsilon, limit_reference.as_deref().unwrap())
            }
            SweepMode::Decomposition => decomposition_point(config, epsilon),
            SweepMode::Dirichlet => dirichlet_point(config, epsilon),
        }
    };

    #[cfg(feature = "parallel")]
    let per_point: Vec<Result<Vec<SweepRow>>> =
        config.epsilon_grid.par_iter().map(point).collect();
    #[cfg(not(feature = "parallel"))]
    let per_point: Vec<Result<Vec<SweepRow>>> = config.epsilon_grid.iter().map(point).collect();

    let mut rows = Vec::new();
    for r in per_point {
        rows.extend(r?);
    }
    Ok(ConvergenceTable {
        mode: config.mode,
        rows,
    })
}
