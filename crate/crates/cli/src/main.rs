//! `thinplate` — command-line front end for the plate-spectrum toolkit.
//!
//! Every subcommand reads one strict JSON config (`--config`), writes its
//! outputs into a directory (`--out`, else the config's `output.dir`,
//! else the working directory), and drops a `manifest.json` with the
//! config digest, versions, and timings beside them. Exit codes: 0 on
//! success, 1 when a solve fails or a configured gate/premise does not
//! hold, 2 for configuration errors.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thinplate::eigensolve::{solve_smallest, DomainKind, EigenPairs, SpectrumMeta};
use thinplate::femcore::{
    apply_clamped_constraints, assemble, assemble_interval, ClampWhere, DiscreteField, FormKind,
    SparseSym,
};
use thinplate::geometry::validate_profile;
use thinplate::limit1d::{limit_solver_tol, solve_limit};
use thinplate::meshgen::{build_channel_reference_mesh, build_dumbbell_mesh, DofMap, QuadMesh};
use thinplate::spectra::{
    decompose, decomposition_run, epsilon_sweep, localize, DecompositionReport, ModeTag,
    SweepConfig,
};

use config::{config_digest, RunConfig};
use output::{decomposition_csv, matrix_csv, spectrum_csv, Manifest, OutDir, Timer};

/// A failed run, split by who must fix it.
#[derive(Debug)]
pub enum Failure {
    /// The config (or command line) is wrong; the message names the
    /// offending key. Exit code 2.
    Config(String),
    /// A solve or an output write failed. Exit code 1.
    Run(anyhow::Error),
}

impl Failure {
    pub fn config(msg: String) -> Self {
        Failure::Config(msg)
    }

    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Run(_) => 1,
        }
    }

    fn render(&self) -> String {
        match self {
            Failure::Config(msg) => format!("config error: {msg}"),
            Failure::Run(e) => format!("error: {e:#}"),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

impl From<thinplate::Error> for Failure {
    fn from(e: thinplate::Error) -> Self {
        Failure::Run(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Run(e.into())
    }
}

#[derive(Parser)]
#[command(
    name = "thinplate",
    version,
    about = "Spectra of plate operators on dumbbell domains: solves, decompositions, and ε-sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration file (strict JSON; unknown keys are rejected).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (default: the config's `output.dir`, else `.`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Thread-pool size for parallel solves (default: logical cores).
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Args)]
struct DumpArgs {
    /// Also write the assembled stiffness and mass matrices
    /// (`k_matrix.csv`, `m_matrix.csv`, upper triangle as row,col,value).
    #[arg(long)]
    dump_matrices: bool,
    /// Also write the mesh as `mesh.json`.
    #[arg(long)]
    dump_mesh: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check the channel profile: positivity and the monotone premise.
    ValidateProfile {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Solve the weighted 1D limit problem on [0, 1].
    SolveLimit {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        dump: DumpArgs,
    },
    /// Solve the ε-weighted channel problem on the reference strip.
    SolveChannel {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        dump: DumpArgs,
    },
    /// Solve the plate problem on the full dumbbell domain.
    SolveDumbbell {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        dump: DumpArgs,
        /// Clamp the entire boundary instead of leaving it free.
        #[arg(long)]
        dirichlet: bool,
    },
    /// Compare a dumbbell spectrum against the merged two-plates ∪
    /// channel reference sequence.
    Decompose {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Tabulate spectra across an ε-grid into a convergence table.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
    },
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::ValidateProfile { common }
            | Command::SolveLimit { common, .. }
            | Command::SolveChannel { common, .. }
            | Command::SolveDumbbell { common, .. }
            | Command::Decompose { common }
            | Command::Sweep { common } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::ValidateProfile { .. } => "validate-profile",
            Command::SolveLimit { .. } => "solve-limit",
            Command::SolveChannel { .. } => "solve-channel",
            Command::SolveDumbbell { .. } => "solve-dumbbell",
            Command::Decompose { .. } => "decompose",
            Command::Sweep { .. } => "sweep",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("{}", failure.render());
            ExitCode::from(failure.exit_code())
        }
    }
}

/// Per-run state shared by every subcommand: the parsed config, the
/// output directory, and the manifest under construction.
struct Run {
    cfg: RunConfig,
    out: OutDir,
    manifest: Manifest,
    timer: Timer,
}

impl Run {
    /// Write the manifest (closing the timing record with `final_phase`)
    /// and print the summary of files written.
    fn finish(mut self, final_phase: &str) -> Result<(), Failure> {
        self.timer.mark(final_phase);
        self.manifest.finish(&mut self.out, self.timer)?;
        println!(
            "wrote {} → {}",
            self.out.written().join(", "),
            self.out.path().display()
        );
        Ok(())
    }
}

fn setup(command: &Command) -> Result<Run, Failure> {
    let common = command.common();
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            return Err(Failure::config("\"--jobs\" must be at least 1".into()));
        }
        // First pool-size request in the process; failure would mean the
        // global pool already exists, which only costs the resize.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let mut timer = Timer::start();
    let (cfg, raw) = RunConfig::load(&common.config)?;
    let dir = common
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let out = OutDir::create(dir)?;
    let manifest = Manifest::new(command.name(), config_digest(&raw));
    timer.mark("load_config");
    Ok(Run {
        cfg,
        out,
        manifest,
        timer,
    })
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let run = setup(&cli.command)?;
    match cli.command {
        Command::ValidateProfile { .. } => cmd_validate_profile(run),
        Command::SolveLimit { ref dump, .. } => cmd_solve_limit(run, dump),
        Command::SolveChannel { ref dump, .. } => cmd_solve_channel(run, dump),
        Command::SolveDumbbell {
            ref dump,
            dirichlet,
            ..
        } => cmd_solve_dumbbell(run, dump, dirichlet),
        Command::Decompose { .. } => cmd_decompose(run),
        Command::Sweep { .. } => cmd_sweep(run),
    }
}

/// Spectrum context serialized into `report.json` next to the CSV.
#[derive(Serialize)]
struct SpectrumReport {
    meta: SpectrumMeta,
    eigenvalues: Vec<f64>,
    residuals: Vec<f64>,
    mass_omega: Vec<f64>,
    mass_channel: Vec<f64>,
}

/// Decomposition context serialized into `report.json`. The geometry
/// fields are absent when the comparison ran on explicit lists.
#[derive(Serialize)]
struct DecomposeReport<'a> {
    epsilon: Option<f64>,
    h_eff: Option<f64>,
    n_free: Option<usize>,
    omega_reference: &'a [f64],
    theta_reference: &'a [f64],
    comparison: &'a DecompositionReport,
}

fn cmd_validate_profile(mut run: Run) -> Result<u8, Failure> {
    let spec = run.cfg.geometry_raw()?;
    let report = validate_profile(&spec.profile)?;
    run.timer.mark("check");

    println!(
        "monotone-profile check (delta = {}): holds = {}, {} violation(s)",
        report.delta_used,
        report.holds,
        report.violations.len()
    );
    for &(x, dg) in &report.violations {
        println!("  x = {x:.6}, g' = {dg:.6}");
    }

    let code = if report.holds { 0 } else { 1 };
    run.out.write_json("report.json", &report)?;
    run.finish("write_outputs")?;
    Ok(code)
}

fn cmd_solve_limit(mut run: Run, dump: &DumpArgs) -> Result<u8, Failure> {
    let profile = run.cfg.geometry()?.profile.clone();
    let params = *run.cfg.params()?;
    let n = run.cfg.discretization.n_elems_1d;
    let mut opts = run.cfg.solver.to_options();
    // Coarse 1D meshes support residuals far below the 2D-leaning
    // default, so tighten toward the resolution's floor when that floor
    // is the smaller of the two. An explicit tighter request stays as
    // given — if it undershoots what the mesh can deliver, the solver
    // reports non-convergence rather than silently loosening.
    opts.tol = opts.tol.min(limit_solver_tol(n));

    let sol = solve_limit(&params, &profile, n, &opts)?;
    run.timer.mark("solve");

    // Limit modes live on the channel by definition.
    let masses = vec![(0.0, 1.0); sol.pairs.values.len()];
    let meta = SpectrumMeta {
        domain: DomainKind::Limit1D,
        epsilon: None,
        params,
        n_free: sol.dofs.n_free,
        resolution: format!("n={n}"),
    };
    print_spectrum("limit spectrum", "θ", &meta, &sol.pairs, &masses);

    write_spectrum(&mut run, meta, &sol.pairs, &masses)?;
    run.manifest.flag("dump_matrices", dump.dump_matrices);
    run.manifest.flag("dump_mesh", dump.dump_mesh);
    if dump.dump_mesh {
        run.out.write_json("mesh.json", &sol.mesh)?;
    }
    if dump.dump_matrices {
        let kmat = assemble_interval(
            &sol.mesh,
            &sol.dofs,
            &FormKind::Limit1DForm(params, profile.clone()),
        )?;
        let mmat = assemble_interval(&sol.mesh, &sol.dofs, &FormKind::WeightedMass(profile))?;
        dump_matrices(&mut run, &kmat, &mmat)?;
    }
    run.finish("write_outputs")?;
    Ok(0)
}

fn cmd_solve_channel(mut run: Run, dump: &DumpArgs) -> Result<u8, Failure> {
    let spec = run.cfg.geometry()?.clone();
    let params = *run.cfg.params()?;
    let (nx, ny) = (run.cfg.discretization.nx, run.cfg.discretization.ny);

    let mesh = build_channel_reference_mesh(nx, ny, &spec.profile)?;
    let mut dofs = DofMap::for_mesh(&mesh);
    apply_clamped_constraints(&mesh, &mut dofs, ClampWhere::ChannelEnds)?;
    check_k(&run.cfg, dofs.n_free)?;

    let kmat = assemble(
        &mesh,
        &dofs,
        &FormKind::ChannelEpsForm(params, spec.epsilon, spec.profile.clone()),
    )?;
    let mmat = assemble(&mesh, &dofs, &FormKind::WeightedMass(spec.profile.clone()))?;
    let pairs = solve_smallest(&kmat, &mmat, &run.cfg.solver.to_options())?;
    run.timer.mark("solve");

    // The whole reference strip is channel.
    let masses = vec![(0.0, 1.0); pairs.values.len()];
    let meta = SpectrumMeta {
        domain: DomainKind::Channel,
        epsilon: Some(spec.epsilon),
        params,
        n_free: dofs.n_free,
        resolution: format!("nx={nx},ny={ny}"),
    };
    print_spectrum("channel spectrum", "θ", &meta, &pairs, &masses);

    write_spectrum(&mut run, meta, &pairs, &masses)?;
    dump_2d(&mut run, dump, &mesh, &kmat, &mmat)?;
    run.finish("write_outputs")?;
    Ok(0)
}

fn cmd_solve_dumbbell(mut run: Run, dump: &DumpArgs, dirichlet: bool) -> Result<u8, Failure> {
    let spec = run.cfg.geometry()?.clone();
    let params = *run.cfg.params()?;
    let h_target = run.cfg.discretization.h_target;
    // Keep at least one element across the channel; non-constant
    // profiles are rejected by the mesh builder with its own message.
    let h_eff = match spec.profile.as_constant() {
        Some(g0) => h_target.min(spec.epsilon * g0),
        None => h_target,
    };

    let mesh = build_dumbbell_mesh(&spec, h_eff)?;
    let mut dofs = DofMap::for_mesh(&mesh);
    if dirichlet {
        apply_clamped_constraints(&mesh, &mut dofs, ClampWhere::AllBoundary)?;
    }
    check_k(&run.cfg, dofs.n_free)?;

    let kmat = assemble(&mesh, &dofs, &FormKind::PlateForm(params))?;
    let mmat = assemble(&mesh, &dofs, &FormKind::Mass)?;
    let pairs = solve_smallest(&kmat, &mmat, &run.cfg.solver.to_options())?;
    run.timer.mark("solve");

    let masses = region_masses(&pairs, &dofs, &mesh)?;
    let meta = SpectrumMeta {
        domain: DomainKind::Dumbbell,
        epsilon: Some(spec.epsilon),
        params,
        n_free: dofs.n_free,
        resolution: if dirichlet {
            format!("h={h_eff}, clamped")
        } else {
            format!("h={h_eff}")
        },
    };
    print_spectrum("dumbbell spectrum", "λ", &meta, &pairs, &masses);

    run.manifest.flag("dirichlet", dirichlet);
    write_spectrum(&mut run, meta, &pairs, &masses)?;
    dump_2d(&mut run, dump, &mesh, &kmat, &mmat)?;
    run.finish("write_outputs")?;
    Ok(0)
}

fn cmd_decompose(mut run: Run) -> Result<u8, Failure> {
    // Explicit lists short-circuit all meshing: compare and report.
    if let Some(spectra) = run.cfg.spectra.clone() {
        let n = spectra.n_modes.unwrap_or(spectra.dumbbell.len());
        let report = decompose(&spectra.dumbbell, &spectra.omega, &spectra.theta, n)?;
        run.timer.mark("compare");

        print_decomposition(None, &report);
        let code = apply_gates(&run, &report);
        run.out.write_json(
            "report.json",
            &DecomposeReport {
                epsilon: None,
                h_eff: None,
                n_free: None,
                omega_reference: &spectra.omega,
                theta_reference: &spectra.theta,
                comparison: &report,
            },
        )?;
        run.out
            .write_text("decomposition.csv", &decomposition_csv(&report.rows))?;
        run.finish("write_outputs")?;
        return Ok(code);
    }

    let spec = run.cfg.geometry()?.clone();
    let params = *run.cfg.params()?;
    let h_target = run.cfg.discretization.h_target;
    let n_modes = run.cfg.solver.k;
    let opts = run.cfg.solver.to_options();

    let result = decomposition_run(&spec, &params, h_target, n_modes, &opts)?;
    run.timer.mark("solve");

    print_decomposition(Some(result.epsilon), &result.report);
    let code = apply_gates(&run, &result.report);

    run.out.write_json(
        "report.json",
        &DecomposeReport {
            epsilon: Some(result.epsilon),
            h_eff: Some(result.h_eff),
            n_free: Some(result.dofs.n_free),
            omega_reference: &result.omega,
            theta_reference: &result.theta,
            comparison: &result.report,
        },
    )?;
    run.out.write_text(
        "decomposition.csv",
        &decomposition_csv(&result.report.rows),
    )?;
    let masses = region_masses(&result.dumbbell.pairs, &result.dofs, &result.mesh)?;
    run.out.write_text(
        "spectrum.csv",
        &spectrum_csv(
            &result.dumbbell.pairs.values,
            &result.dumbbell.pairs.residuals,
            &masses,
        ),
    )?;
    run.out
        .write_json("spectrum_meta.json", &result.dumbbell.meta)?;
    run.finish("write_outputs")?;
    Ok(code)
}

fn cmd_sweep(mut run: Run) -> Result<u8, Failure> {
    let spec = run.cfg.geometry()?.clone();
    let params = *run.cfg.params()?;
    let section = run.cfg.sweep_section()?.clone();

    let mut sweep = SweepConfig::new(section.mode);
    sweep.epsilon_grid = section.epsilon_grid.clone();
    sweep.params = params;
    sweep.profile = spec.profile.clone();
    sweep.left_len = spec.left_len;
    sweep.right_len = spec.right_len;
    sweep.h_target = run.cfg.discretization.h_target;
    if let Some(n_modes) = section.n_modes {
        sweep.n_modes = n_modes;
    }
    sweep.channel_nx = run.cfg.discretization.nx;
    sweep.channel_ny = run.cfg.discretization.ny;
    sweep.n_elems_1d = run.cfg.discretization.n_elems_1d;
    sweep.solver = run.cfg.solver.to_options();

    let table = epsilon_sweep(&sweep)?;
    run.timer.mark("solve");

    println!(
        "sweep ({:?}, {} ε-point(s), {} index(es) each):",
        section.mode,
        section.epsilon_grid.len(),
        sweep.n_modes
    );
    for &eps in &section.epsilon_grid {
        let worst = table
            .rows
            .iter()
            .filter(|r| r.epsilon == eps)
            .map(|r| r.rel_error)
            .fold(0.0f64, f64::max);
        println!("  ε = {eps}: worst rel. error {worst:.4e}");
    }

    run.out.write_text("sweep.csv", &table.to_csv())?;
    run.out.write_json("report.json", &table)?;
    run.finish("write_outputs")?;
    Ok(0)
}

/// Reject an eigenpair request larger than the solved system.
fn check_k(cfg: &RunConfig, n_free: usize) -> Result<(), Failure> {
    if cfg.solver.k > n_free {
        return Err(Failure::config(format!(
            "\"solver.k\" = {} exceeds the {} free DOFs of the discretized problem",
            cfg.solver.k, n_free
        )));
    }
    Ok(())
}

/// Mass fractions (Ω boxes, channel) of each eigenvector.
fn region_masses(
    pairs: &EigenPairs,
    dofs: &DofMap,
    mesh: &QuadMesh,
) -> Result<Vec<(f64, f64)>, Failure> {
    pairs
        .vectors
        .iter()
        .map(|v| {
            let field = DiscreteField::from_free(dofs, v)?;
            Ok(localize(&field, mesh)?)
        })
        .collect()
}

fn print_spectrum(
    label: &str,
    symbol: &str,
    meta: &SpectrumMeta,
    pairs: &EigenPairs,
    masses: &[(f64, f64)],
) {
    let eps = meta
        .epsilon
        .map(|e| format!("ε = {e}, "))
        .unwrap_or_default();
    println!(
        "{label} ({eps}{}, σ = {}, τ = {}, {} free DOFs):",
        meta.resolution, meta.params.sigma, meta.params.tau, meta.n_free
    );
    for (i, ((&v, &r), &(mo, mc))) in pairs
        .values
        .iter()
        .zip(&pairs.residuals)
        .zip(masses)
        .enumerate()
    {
        println!(
            "  {symbol}_{} = {v:.12e}   residual {r:.2e}   mass Ω {mo:.4} / channel {mc:.4}",
            i + 1
        );
    }
}

fn print_decomposition(epsilon: Option<f64>, report: &DecompositionReport) {
    let eps = epsilon.map(|e| format!("ε = {e}, ")).unwrap_or_default();
    println!(
        "decomposition against the merged reference ({eps}{} index(es)):",
        report.n_requested
    );
    for row in &report.rows {
        println!(
            "  n = {}: λ = {:.8e} vs {:.8e} [{}], deviation {:.4e}",
            row.index, row.lambda, row.reference, row.tag, row.deviation
        );
    }
    println!(
        "  max deviation {:.6e}, assignment distance {:.6e}",
        report.max_deviation, report.assignment_distance
    );
    if let Some((x, count)) = report.divider {
        println!("  spectrum divider at λ = {x:.6e} with N = {count} below");
    }
}

/// Apply the configured pass/fail gates to a finished comparison.
/// Returns the process exit code: 0 when every active gate holds.
fn apply_gates(run: &Run, report: &DecompositionReport) -> u8 {
    let mut failed = false;
    if let Some(gate) = run.cfg.thresholds.max_deviation {
        if report.max_deviation > gate {
            println!(
                "gate failed: max deviation {:.6e} > {gate}",
                report.max_deviation
            );
            failed = true;
        } else {
            println!(
                "gate held: max deviation {:.6e} <= {gate}",
                report.max_deviation
            );
        }
    }
    if let Some(gate) = run.cfg.thresholds.min_mass_fraction {
        let mut mass_failed = false;
        for row in &report.rows {
            let own = match row.tag {
                ModeTag::OmegaMode(_) => row.mass_omega,
                ModeTag::ChannelMode(_) => row.mass_channel,
            };
            if let Some(own) = own {
                if own < gate {
                    println!(
                        "gate failed: n = {} [{}] keeps mass {own:.4} < {gate} on its region",
                        row.index, row.tag
                    );
                    mass_failed = true;
                }
            }
        }
        if !mass_failed {
            println!("gate held: every computed mode keeps mass >= {gate} on its region");
        }
        failed |= mass_failed;
    }
    u8::from(failed)
}

fn write_spectrum(
    run: &mut Run,
    meta: SpectrumMeta,
    pairs: &EigenPairs,
    masses: &[(f64, f64)],
) -> Result<(), Failure> {
    run.out.write_text(
        "spectrum.csv",
        &spectrum_csv(&pairs.values, &pairs.residuals, masses),
    )?;
    let (mass_omega, mass_channel) = masses.iter().copied().unzip();
    run.out.write_json(
        "report.json",
        &SpectrumReport {
            meta,
            eigenvalues: pairs.values.clone(),
            residuals: pairs.residuals.clone(),
            mass_omega,
            mass_channel,
        },
    )
}

fn dump_2d(
    run: &mut Run,
    dump: &DumpArgs,
    mesh: &QuadMesh,
    kmat: &SparseSym,
    mmat: &SparseSym,
) -> Result<(), Failure> {
    run.manifest.flag("dump_matrices", dump.dump_matrices);
    run.manifest.flag("dump_mesh", dump.dump_mesh);
    if dump.dump_mesh {
        run.out.write_json("mesh.json", mesh)?;
    }
    if dump.dump_matrices {
        dump_matrices(run, kmat, mmat)?;
    }
    Ok(())
}

fn dump_matrices(run: &mut Run, kmat: &SparseSym, mmat: &SparseSym) -> Result<(), Failure> {
    run.out.write_text("k_matrix.csv", &matrix_csv(kmat))?;
    run.out.write_text("m_matrix.csv", &matrix_csv(mmat))?;
    Ok(())
}
