//! Case execution: mesh/operator preparation, the training (reference) run,
//! basis production, and one runner per coupling.
//!
//! Timing follows the offline/online split: for full-order sides, assembly
//! and mass factorization are part of the reported online time; for reduced
//! sides, basis computation and operator projection (plus the assembly they
//! require) are offline. Online time for reduced runs includes the per-step
//! lift back to nodal coordinates.

use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use ivr_core::assembly::{assemble_operators, build_beta, nodal_values, nodal_values_free, OperatorSet, SubdomainIndexing};
use ivr_core::coupling::{build_schur, fem_solve_single, ivr_advance, CoupledFemState};
use ivr_core::fields::{ScalarField, VelocityField};
use ivr_core::hybrid::{build_hybrid_schur, hybrid_advance, rom_solve_single, HybridSide};
use ivr_core::integrate::{step_schedule, IntegratorKind, TimeIntegrator};
use ivr_core::mesh::{
    build_coupled_mesh, build_global_mesh, classify_boundary, restriction_map, CoupledMesh,
    SubdomainMesh,
};
use ivr_core::rom::{
    compute_pod_basis, load_basis, project_operators, save_basis, snapshot_count, ReducedBasis,
    SnapshotCollector, SnapshotMatrix, SubdomainId, TruncationPolicy,
};
use nalgebra::DVector;

use crate::config::{CaseConfig, Coupling, Variant};
use crate::ic::initial_field;
use crate::metrics::{compute_errors, globalize};

/// Everything derivable from a config before any numerical work: meshes
/// classified for the variant, the effective step, and the step schedule.
pub struct Prepared {
    pub config: CaseConfig,
    pub kappa: f64,
    pub velocity: VelocityField,
    /// Step actually used: ds_t split into an integer number of substeps, the
    /// largest such step not exceeding the requested dt (up to rounding).
    /// Keeps snapshot instants exactly on step boundaries.
    pub dt_eff: f64,
    /// Uniform steps to reach t_final, plus a possible final short step.
    pub n_full: usize,
    pub remainder: Option<f64>,
    pub n_snapshots: usize,
    pub global_mesh: SubdomainMesh,
    pub coupled: CoupledMesh,
}

pub fn prepare(config: CaseConfig) -> Result<Prepared> {
    let velocity = config.velocity();
    let bc = config.variant.bc_mode();
    let global_mesh = classify_boundary(&build_global_mesh(config.nx, config.ny)?, bc, &velocity)?;
    let cm = build_coupled_mesh(config.nx / 2, config.ny, 0.5)?;
    let coupled = CoupledMesh {
        left: classify_boundary(&cm.left, bc, &velocity)?,
        right: classify_boundary(&cm.right, bc, &velocity)?,
        split_x: cm.split_x,
    };
    let substeps = ((config.ds_t / config.dt) - 1e-9).ceil().max(1.0);
    let dt_eff = config.ds_t / substeps;
    let (n_full, remainder) = step_schedule(config.t_final, dt_eff)?;
    let n_snapshots = snapshot_count(config.t_final, config.ds_t)?;
    let kappa = config.variant.kappa();
    Ok(Prepared {
        config,
        kappa,
        velocity,
        dt_eff,
        n_full,
        remainder,
        n_snapshots,
        global_mesh,
        coupled,
    })
}

impl Prepared {
    fn assemble(&self, mesh: &SubdomainMesh) -> Result<OperatorSet> {
        let zero = ScalarField::zero();
        Ok(assemble_operators(
            mesh,
            self.kappa,
            &self.velocity,
            &zero,
            &zero,
        )?)
    }

    fn integrator(&self) -> Result<TimeIntegrator> {
        Ok(TimeIntegrator::new(IntegratorKind::Rk4, self.dt_eff)?)
    }

    /// Full nodal initial state on the global grid (Dirichlet rows carry the
    /// boundary data, which coincides with the initial condition there).
    pub fn initial_global(&self) -> DVector<f64> {
        nodal_values(&self.global_mesh, &initial_field())
    }
}

/// The global full-order reference trajectory: final state for the error
/// metric plus per-subdomain and global snapshot matrices for training.
pub struct TrainingRun {
    pub initial_global: DVector<f64>,
    pub final_global: DVector<f64>,
    pub online_seconds: f64,
    pub x_left: SnapshotMatrix,
    pub x_right: SnapshotMatrix,
    pub x_global: SnapshotMatrix,
}

/// Run the global FEM once, collecting snapshots at the configured spacing
/// on the global grid and restricted to both subdomains.
pub fn train(prep: &Prepared) -> Result<TrainingRun> {
    let cfg = &prep.config;
    let map_l = restriction_map(&prep.global_mesh, &prep.coupled.left)?;
    let map_r = restriction_map(&prep.global_mesh, &prep.coupled.right)?;
    let mut c_g = SnapshotCollector::new(SubdomainId::Global, cfg.ds_t, prep.dt_eff, cfg.t_final)?;
    let mut c_l = SnapshotCollector::new(SubdomainId::Left, cfg.ds_t, prep.dt_eff, cfg.t_final)?;
    let mut c_r = SnapshotCollector::new(SubdomainId::Right, cfg.ds_t, prep.dt_eff, cfg.t_final)?;
    let stride = (cfg.ds_t / prep.dt_eff).round() as usize;

    let t0 = Instant::now();
    let ops = prep.assemble(&prep.global_mesh)?;
    let phi0 = nodal_values_free(&prep.global_mesh, &ops.indexing, &initial_field());
    let integ = prep.integrator()?;
    let mut phi = fem_solve_single(&ops, &phi0, &integ, prep.n_full, |k, _, state| {
        if k % stride == 0 {
            let full = ops.indexing.lift_full(state, &ops.beta);
            c_g.observe(k, &full);
            c_l.observe(k, &DVector::from_fn(map_l.len(), |i, _| full[map_l[i]]));
            c_r.observe(k, &DVector::from_fn(map_r.len(), |i, _| full[map_r[i]]));
        }
    })?;
    if let Some(rem) = prep.remainder {
        phi = fem_solve_single(&ops, &phi, &integ.with_dt(rem)?, 1, |_, _, _| {})?;
    }
    let online_seconds = t0.elapsed().as_secs_f64();

    Ok(TrainingRun {
        initial_global: prep.initial_global(),
        final_global: ops.indexing.lift_full(&phi, &ops.beta),
        online_seconds,
        x_left: c_l.finish()?,
        x_right: c_r.finish()?,
        x_global: c_g.finish()?,
    })
}

/// Reduced bases for whichever sides the coupling needs, plus the seconds
/// spent computing (or loading) them.
pub struct SideBases {
    pub left: Option<ReducedBasis>,
    pub right: Option<ReducedBasis>,
    pub global: Option<ReducedBasis>,
    pub svd_seconds: f64,
}

impl SideBases {
    pub fn none() -> Self {
        SideBases {
            left: None,
            right: None,
            global: None,
            svd_seconds: 0.0,
        }
    }
}

fn pod(
    x: &SnapshotMatrix,
    mesh: &SubdomainMesh,
    policy: TruncationPolicy,
) -> Result<ReducedBasis> {
    let indexing = SubdomainIndexing::new(mesh);
    let beta = build_beta(mesh, &ScalarField::zero());
    Ok(compute_pod_basis(x, &indexing, &beta, policy)?)
}

/// Compute the bases the configured coupling requires from training data,
/// under explicit truncation policies (the single-domain basis is steered by
/// the left-hand slot).
pub fn compute_bases_with(
    prep: &Prepared,
    training: &TrainingRun,
    left_policy: TruncationPolicy,
    right_policy: TruncationPolicy,
) -> Result<SideBases> {
    let mut bases = SideBases::none();
    let t0 = Instant::now();
    match prep.config.coupling {
        Coupling::GlobalFem | Coupling::FemFem => {}
        Coupling::GlobalRom => {
            bases.global = Some(pod(&training.x_global, &prep.global_mesh, left_policy)?);
        }
        Coupling::RomFem => {
            bases.left = Some(pod(&training.x_left, &prep.coupled.left, left_policy)?);
        }
        Coupling::RomRom => {
            bases.left = Some(pod(&training.x_left, &prep.coupled.left, left_policy)?);
            bases.right = Some(pod(&training.x_right, &prep.coupled.right, right_policy)?);
        }
    }
    bases.svd_seconds = t0.elapsed().as_secs_f64();
    Ok(bases)
}

/// Compute the bases the configured coupling requires from training data,
/// under the configured truncation policies.
pub fn compute_bases(prep: &Prepared, training: &TrainingRun) -> Result<SideBases> {
    compute_bases_with(
        prep,
        training,
        prep.config.truncation_left,
        prep.config.truncation_right,
    )
}

/// Compute all three bases (left, right, global) regardless of the
/// configured coupling — the offline phase of the `snapshots` subcommand.
/// The global basis follows the left-hand policy slot.
pub fn compute_all_bases(prep: &Prepared, training: &TrainingRun) -> Result<SideBases> {
    let cfg = &prep.config;
    let t0 = Instant::now();
    let left = pod(&training.x_left, &prep.coupled.left, cfg.truncation_left)?;
    let right = pod(&training.x_right, &prep.coupled.right, cfg.truncation_right)?;
    let global = pod(&training.x_global, &prep.global_mesh, cfg.truncation_left)?;
    Ok(SideBases {
        left: Some(left),
        right: Some(right),
        global: Some(global),
        svd_seconds: t0.elapsed().as_secs_f64(),
    })
}

/// File names used by basis persistence.
pub fn basis_file_name(sub: SubdomainId) -> &'static str {
    match sub {
        SubdomainId::Left => "basis_left.txt",
        SubdomainId::Right => "basis_right.txt",
        SubdomainId::Global => "basis_global.txt",
    }
}

/// Persist every basis present.
pub fn save_bases(bases: &SideBases, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create basis directory {}", dir.display()))?;
    for basis in [&bases.left, &bases.right, &bases.global].into_iter().flatten() {
        save_basis(basis, &dir.join(basis_file_name(basis.subdomain)))?;
    }
    Ok(())
}

fn load_one(dir: &Path, sub: SubdomainId) -> Result<ReducedBasis> {
    let path = dir.join(basis_file_name(sub));
    load_basis(&path).map_err(|e| {
        anyhow!(
            "missing or unreadable basis file {}: {e}; run the `snapshots` subcommand \
             first to generate bases, or drop --basis-dir to build them on the fly",
            path.display()
        )
    })
}

/// Load the bases the configured coupling requires from a directory written
/// by the `snapshots` subcommand.
pub fn load_bases(prep: &Prepared, dir: &Path) -> Result<SideBases> {
    let mut bases = SideBases::none();
    let t0 = Instant::now();
    match prep.config.coupling {
        Coupling::GlobalFem | Coupling::FemFem => {}
        Coupling::GlobalRom => bases.global = Some(load_one(dir, SubdomainId::Global)?),
        Coupling::RomFem => bases.left = Some(load_one(dir, SubdomainId::Left)?),
        Coupling::RomRom => {
            bases.left = Some(load_one(dir, SubdomainId::Left)?);
            bases.right = Some(load_one(dir, SubdomainId::Right)?);
        }
    }
    bases.svd_seconds = t0.elapsed().as_secs_f64();
    Ok(bases)
}

/// Raw outcome of one candidate run, before error metrics.
pub struct RunSolution {
    pub final_global: DVector<f64>,
    pub online_seconds: f64,
    pub offline_seconds: f64,
    pub n_r_left: Option<usize>,
    pub n_r_right: Option<usize>,
}

fn run_global_fem(prep: &Prepared) -> Result<RunSolution> {
    let t0 = Instant::now();
    let ops = prep.assemble(&prep.global_mesh)?;
    let phi0 = nodal_values_free(&prep.global_mesh, &ops.indexing, &initial_field());
    let integ = prep.integrator()?;
    let mut phi = fem_solve_single(&ops, &phi0, &integ, prep.n_full, |_, _, _| {})?;
    if let Some(rem) = prep.remainder {
        phi = fem_solve_single(&ops, &phi, &integ.with_dt(rem)?, 1, |_, _, _| {})?;
    }
    Ok(RunSolution {
        final_global: ops.indexing.lift_full(&phi, &ops.beta),
        online_seconds: t0.elapsed().as_secs_f64(),
        offline_seconds: 0.0,
        n_r_left: None,
        n_r_right: None,
    })
}

fn run_fem_fem(prep: &Prepared) -> Result<RunSolution> {
    let t0 = Instant::now();
    let o1 = prep.assemble(&prep.coupled.left)?;
    let o2 = prep.assemble(&prep.coupled.right)?;
    let schur = build_schur(&o1, &o2)?;
    let phi1 = nodal_values_free(&prep.coupled.left, &o1.indexing, &initial_field());
    let phi2 = nodal_values_free(&prep.coupled.right, &o2.indexing, &initial_field());
    let integ = prep.integrator()?;
    let state = CoupledFemState::new(phi1, phi2, 0.0);
    let mut state = ivr_advance(&schur, &state, &integ, prep.n_full, |_, _| {})?;
    if let Some(rem) = prep.remainder {
        state = ivr_advance(&schur, &state, &integ.with_dt(rem)?, 1, |_, _| {})?;
    }
    let l = o1.indexing.lift_full(&state.phi1, &o1.beta);
    let r = o2.indexing.lift_full(&state.phi2, &o2.beta);
    let final_global = globalize(&prep.global_mesh, &prep.coupled.left, &prep.coupled.right, &l, &r)?;
    Ok(RunSolution {
        final_global,
        online_seconds: t0.elapsed().as_secs_f64(),
        offline_seconds: 0.0,
        n_r_left: None,
        n_r_right: None,
    })
}

fn run_global_rom(prep: &Prepared, bases: &SideBases) -> Result<RunSolution> {
    let basis = bases
        .global
        .as_ref()
        .context("global_rom needs a global basis")?;
    let t_off = Instant::now();
    let ops = prep.assemble(&prep.global_mesh)?;
    let red = project_operators(&ops, basis)?;
    let offline_seconds = bases.svd_seconds + t_off.elapsed().as_secs_f64();

    let t_on = Instant::now();
    let phi0 = nodal_values_free(&prep.global_mesh, &ops.indexing, &initial_field());
    let mut phi_r = basis.reduce(&ops.indexing, &phi0);
    let integ = prep.integrator()?;
    let mut lifted = basis.lift(&phi_r);
    phi_r = rom_solve_single(&red, &phi_r, &integ, prep.n_full, |_, _, state| {
        lifted = basis.lift(state);
    })?;
    if let Some(rem) = prep.remainder {
        phi_r = rom_solve_single(&red, &phi_r, &integ.with_dt(rem)?, 1, |_, _, _| {})?;
        lifted = basis.lift(&phi_r);
    }
    Ok(RunSolution {
        final_global: lifted,
        online_seconds: t_on.elapsed().as_secs_f64(),
        offline_seconds,
        n_r_left: Some(basis.n_r()),
        n_r_right: None,
    })
}

/// Shared driver for the three coupled candidates (fem/rom per side).
fn run_coupled_hybrid(
    prep: &Prepared,
    basis_left: Option<&ReducedBasis>,
    basis_right: Option<&ReducedBasis>,
    svd_seconds: f64,
) -> Result<RunSolution> {
    // Offline: assemble and project the reduced sides.
    let t_off = Instant::now();
    let red_left = basis_left
        .map(|b| -> Result<_> {
            let ops = prep.assemble(&prep.coupled.left)?;
            Ok((project_operators(&ops, b)?, ops))
        })
        .transpose()?;
    let red_right = basis_right
        .map(|b| -> Result<_> {
            let ops = prep.assemble(&prep.coupled.right)?;
            Ok((project_operators(&ops, b)?, ops))
        })
        .transpose()?;
    let offline_seconds = svd_seconds + t_off.elapsed().as_secs_f64();

    // Online: everything else, full-order assembly included.
    let t_on = Instant::now();
    let mut left = match (&red_left, basis_left) {
        (Some((red, ops)), Some(b)) => {
            let phi0 = nodal_values_free(&prep.coupled.left, &ops.indexing, &initial_field());
            HybridSide::rom(red, b, b.reduce(&ops.indexing, &phi0))?
        }
        _ => {
            let ops = prep.assemble(&prep.coupled.left)?;
            let phi0 = nodal_values_free(&prep.coupled.left, &ops.indexing, &initial_field());
            HybridSide::fem(&ops, phi0)?
        }
    };
    let mut right = match (&red_right, basis_right) {
        (Some((red, ops)), Some(b)) => {
            let phi0 = nodal_values_free(&prep.coupled.right, &ops.indexing, &initial_field());
            HybridSide::rom(red, b, b.reduce(&ops.indexing, &phi0))?
        }
        _ => {
            let ops = prep.assemble(&prep.coupled.right)?;
            let phi0 = nodal_values_free(&prep.coupled.right, &ops.indexing, &initial_field());
            HybridSide::fem(&ops, phi0)?
        }
    };
    let schur = build_hybrid_schur(&left, &right)?;
    let integ = prep.integrator()?;
    let tf = hybrid_advance(
        &mut left,
        &mut right,
        &schur,
        &integ,
        prep.n_full,
        0.0,
        |_, _, _, _| {},
    )?;
    if let Some(rem) = prep.remainder {
        hybrid_advance(&mut left, &mut right, &schur, &integ.with_dt(rem)?, 1, tf, |_, _, _, _| {})?;
    }
    let final_global = globalize(
        &prep.global_mesh,
        &prep.coupled.left,
        &prep.coupled.right,
        &left.lift(),
        &right.lift(),
    )?;
    Ok(RunSolution {
        final_global,
        online_seconds: t_on.elapsed().as_secs_f64(),
        offline_seconds,
        n_r_left: basis_left.map(|b| b.n_r()),
        n_r_right: basis_right.map(|b| b.n_r()),
    })
}

/// Run the configured coupling with the given bases (bases may be empty for
/// full-order couplings).
pub fn run_candidate(prep: &Prepared, bases: &SideBases) -> Result<RunSolution> {
    match prep.config.coupling {
        Coupling::GlobalFem => run_global_fem(prep),
        Coupling::FemFem => run_fem_fem(prep),
        Coupling::GlobalRom => run_global_rom(prep, bases),
        Coupling::RomFem => run_coupled_hybrid(
            prep,
            Some(bases.left.as_ref().context("rom_fem needs a left basis")?),
            None,
            bases.svd_seconds,
        ),
        Coupling::RomRom => run_coupled_hybrid(
            prep,
            Some(bases.left.as_ref().context("rom_rom needs a left basis")?),
            Some(bases.right.as_ref().context("rom_rom needs a right basis")?),
            bases.svd_seconds,
        ),
    }
}

/// Final per-case report.
#[derive(Clone, Debug)]
pub struct ErrorReport {
    pub variant: Variant,
    pub coupling: Coupling,
    pub nx: usize,
    pub ny: usize,
    pub eps: f64,
    /// Initial-vs-final drift; reported for the pure-advection regime, where
    /// the exact solution returns to the initial condition.
    pub eps0: Option<f64>,
    pub n_r_left: Option<usize>,
    pub n_r_right: Option<usize>,
    pub online_cpu_seconds: f64,
    pub offline_cpu_seconds: f64,
}

/// A complete case outcome: the report plus the states needed for dumps.
pub struct CaseResult {
    pub report: ErrorReport,
    pub initial_global: DVector<f64>,
    pub final_global: DVector<f64>,
    pub reference_final: DVector<f64>,
}

/// Execute a case end to end: reference/training run as needed, bases built
/// on the fly or loaded from `basis_dir`, candidate run, error metrics.
pub fn run_case(prep: &Prepared) -> Result<CaseResult> {
    let cfg = &prep.config;
    let (reference_final, bases) = if cfg.coupling == Coupling::GlobalFem {
        (None, SideBases::none())
    } else {
        let bases = match (&cfg.basis_dir, cfg.coupling.needs_bases()) {
            (_, false) | (None, true) => None,
            (Some(dir), true) => Some(load_bases(prep, dir)?),
        };
        // The reference run doubles as training; skip collecting when the
        // bases came from disk or are not needed.
        let training = train(prep)?;
        let bases = match bases {
            Some(b) => b,
            None => compute_bases(prep, &training)?,
        };
        (Some(training.final_global), bases)
    };
    let solution = run_candidate(prep, &bases)?;
    let initial_global = prep.initial_global();
    let reference_final = reference_final.unwrap_or_else(|| solution.final_global.clone());
    let (eps, eps0) = compute_errors(&solution.final_global, &reference_final, &initial_global);
    Ok(CaseResult {
        report: ErrorReport {
            variant: cfg.variant,
            coupling: cfg.coupling,
            nx: cfg.nx,
            ny: cfg.ny,
            eps,
            eps0: match cfg.variant {
                Variant::PureAdvection => Some(eps0),
                Variant::HighPeclet => None,
            },
            n_r_left: solution.n_r_left,
            n_r_right: solution.n_r_right,
            online_cpu_seconds: solution.online_seconds,
            offline_cpu_seconds: solution.offline_seconds,
        },
        initial_global,
        final_global: solution.final_global,
        reference_final,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Overrides;

    /// Small fast case: snapshots every step, so a full-energy basis spans
    /// the training trajectory pointwise.
    fn small(cfg_mut: impl FnOnce(&mut Overrides)) -> Prepared {
        let mut cli = Overrides {
            nx: Some(8),
            ny: Some(8),
            dt: Some(2e-2),
            t_final: Some(0.4),
            ds_t: Some(2e-2),
            ..Overrides::default()
        };
        cfg_mut(&mut cli);
        prepare(CaseConfig::resolve(None, &cli).unwrap()).unwrap()
    }

    #[test]
    fn effective_step_divides_the_snapshot_spacing() {
        let prep = small(|cli| cli.ds_t = Some(4e-2));
        let ratio = prep.config.ds_t / prep.dt_eff;
        assert!((ratio - ratio.round()).abs() < 1e-9);
        assert!(prep.dt_eff <= prep.config.dt * (1.0 + 1e-9));
        // 0.4 / 0.02 = 20 steps exactly, no remainder.
        assert_eq!(prep.n_full, 20);
        assert!(prep.remainder.is_none());
        assert_eq!(prep.n_snapshots, 10);
    }

    #[test]
    fn training_collects_the_expected_snapshot_counts() {
        let prep = small(|_| {});
        let tr = train(&prep).unwrap();
        assert_eq!(tr.x_global.n_snapshots(), 20);
        assert_eq!(tr.x_left.n_snapshots(), 20);
        assert_eq!(tr.x_right.n_snapshots(), 20);
        assert_eq!(tr.x_left.data.nrows(), prep.coupled.left.coords.len());
        // The trajectory moved.
        assert!((&tr.final_global - &tr.initial_global).norm() > 1e-3);
    }

    #[test]
    fn global_fem_case_has_zero_error_against_itself() {
        let prep = small(|_| {});
        let result = run_case(&prep).unwrap();
        assert_eq!(result.report.eps, 0.0);
        let eps0 = result.report.eps0.unwrap();
        assert!(eps0.is_finite() && eps0 > 0.0);
        assert_eq!(result.report.offline_cpu_seconds, 0.0);
    }

    #[test]
    fn fem_fem_case_matches_the_global_reference_closely() {
        // Matched conforming grids: the transmission solution coincides with
        // the global one up to roundoff accumulation.
        let prep = small(|cli| cli.coupling = Some("fem_fem".into()));
        let result = run_case(&prep).unwrap();
        assert!(result.report.eps < 1e-10, "eps = {}", result.report.eps);
    }

    #[test]
    fn reduced_cases_report_mode_counts_and_small_errors() {
        let prep = small(|cli| {
            cli.coupling = Some("rom_rom".into());
            cli.truncation_left = Some("energy:1.0".into());
            cli.truncation_right = Some("energy:1.0".into());
        });
        let result = run_case(&prep).unwrap();
        assert!(result.report.n_r_left.unwrap() > 0);
        assert!(result.report.n_r_right.unwrap() > 0);
        assert!(result.report.offline_cpu_seconds > 0.0);
        assert!(result.report.eps < 1e-5, "eps = {}", result.report.eps);
    }

    #[test]
    fn global_rom_with_full_energy_tracks_the_global_fem() {
        let prep = small(|cli| {
            cli.coupling = Some("global_rom".into());
            cli.truncation_left = Some("energy:1.0".into());
        });
        let result = run_case(&prep).unwrap();
        assert!(result.report.n_r_left.unwrap() > 0);
        assert!(result.report.n_r_right.is_none());
        assert!(result.report.eps < 1e-6, "eps = {}", result.report.eps);
    }

    #[test]
    fn bases_round_trip_through_a_directory() {
        let prep = small(|cli| cli.coupling = Some("rom_rom".into()));
        let training = train(&prep).unwrap();
        let bases = compute_bases(&prep, &training).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_bases(&bases, dir.path()).unwrap();
        let loaded = load_bases(&prep, dir.path()).unwrap();
        let (a, b) = (bases.left.unwrap(), loaded.left.unwrap());
        assert_eq!(a.n_r(), b.n_r());
        for (x, y) in a.u.iter().zip(b.u.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        // Missing file: actionable message.
        let empty = tempfile::tempdir().unwrap();
        let err = match load_bases(&prep, empty.path()) {
            Ok(_) => panic!("expected missing basis files to be an error"),
            Err(e) => e.to_string(),
        };
        assert!(err.contains("snapshots"), "unhelpful error: {err}");
    }

    #[test]
    fn missing_basis_requirements_are_reported() {
        let prep = small(|cli| cli.coupling = Some("rom_fem".into()));
        assert!(run_candidate(&prep, &SideBases::none()).is_err());
    }
}
