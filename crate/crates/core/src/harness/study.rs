//! Single solves and spatial/temporal convergence studies.

use std::time::Instant;

use rayon::prelude::*;

use crate::analysis::{
    error_vs_exact, error_vs_reference, nodal_error_report, ConvergenceRow, ConvergenceTable, ErrorMetric, Geometry,
    StudyAxis,
};
use crate::assembly::{assemble, interpolate, AssembledOperators, ProblemSpec, ScalarField};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryCurve, Point};
use crate::harness::scenario::Scenario;
use crate::linalg::{SolverMode, SparseMatrix};
use crate::mesh::{seed_disc_mesh, Mesh2D, RefinementHierarchy};
use crate::timestepping::{gauss_tableau, integrate, ButcherTableau, EnergyRecord, FirstOrderSystem, State, StepperConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub stages: usize,
    pub solver: SolverMode,
    pub record_energy: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            stages: 1,
            solver: SolverMode::DirectFactorization,
            record_energy: true,
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub ops: AssembledOperators,
    pub final_state: State,
    pub steps: usize,
    pub energy: Vec<EnergyRecord>,
    /// Relative energy drift; NaN when energy was not recorded.
    pub energy_drift: f64,
    pub wall_seconds: f64,
}

/// Nodal initial displacement and velocity of `spec` in the layout of `ops`.
/// Missing fields are zero.
pub fn initial_vectors(mesh: &Mesh2D, spec: &ProblemSpec, ops: &AssembledOperators) -> (Vec<f64>, Vec<f64>) {
    let field = |bulk: &Option<ScalarField>, surf: &Option<ScalarField>| {
        let b = |x: Point| bulk.as_ref().map_or(0.0, |f| f(x));
        let s = |x: Point| surf.as_ref().map_or(0.0, |f| f(x));
        interpolate(mesh, &ops.dofmap, &b, Some(&s))
    };
    let init = &spec.initial;
    (field(&init.u0, &init.delta0), field(&init.u1, &init.delta1))
}

/// Assembles `spec` on `mesh` and integrates to `final_time` with step `tau`.
pub fn solve_problem(mesh: &Mesh2D, spec: &ProblemSpec, final_time: f64, tau: f64, opts: &SolveOptions) -> Result<RunOutcome> {
    let start = Instant::now();
    let tableau = gauss_tableau(opts.stages)?;
    let ops = assemble(mesh, spec)?;
    let (u0, u1) = initial_vectors(mesh, spec, &ops);
    let config = StepperConfig::new(tau, final_time)
        .with_solver(opts.solver)
        .with_energy(opts.record_energy);
    let (final_state, steps, energy, drift) = {
        let system = FirstOrderSystem::from_operators(&ops)?;
        let y0 = system.initial_state(0.0, &u0, &u1)?;
        let traj = integrate(&system, &tableau, y0, &config)?;
        let drift = traj.energy_drift().unwrap_or(f64::NAN);
        (traj.final_state, traj.steps, traj.energy, drift)
    };
    Ok(RunOutcome {
        ops,
        final_state,
        steps,
        energy,
        energy_drift: drift,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Comparison {
    Exact,
    /// Same-code solution `gap` levels finer than the finest study level.
    Reference { gap: usize },
}

#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub scenario: Scenario,
    pub first_level: usize,
    pub last_level: usize,
    pub tau0: f64,
    /// Number of step halvings of a temporal study.
    pub halvings: usize,
    pub final_time: f64,
    pub comparison: Comparison,
    pub stages: usize,
    pub solver: SolverMode,
    pub record_energy: bool,
    pub record_timing: bool,
    /// Temporal reference step is the smallest study step divided by this.
    pub temporal_reference_factor: usize,
}

impl StudyConfig {
    fn base(scenario: Scenario, first_level: usize, last_level: usize) -> Self {
        let comparison = if scenario.exact.is_some() {
            Comparison::Exact
        } else {
            Comparison::Reference { gap: 2 }
        };
        Self {
            tau0: scenario.tau0,
            final_time: scenario.final_time,
            scenario,
            first_level,
            last_level,
            halvings: 0,
            comparison,
            stages: 1,
            solver: SolverMode::DirectFactorization,
            record_energy: true,
            record_timing: true,
            temporal_reference_factor: 16,
        }
    }

    pub fn spatial(scenario: Scenario, first_level: usize, last_level: usize) -> Self {
        Self::base(scenario, first_level, last_level)
    }

    pub fn temporal(scenario: Scenario, level: usize, halvings: usize) -> Self {
        Self {
            halvings,
            ..Self::base(scenario, level, level)
        }
    }

    fn options(&self) -> SolveOptions {
        SolveOptions {
            stages: self.stages,
            solver: self.solver,
            record_energy: self.record_energy,
        }
    }

    /// Step size paired with mesh level `level` in a spatial study.
    pub fn spatial_tau(&self, level: usize) -> f64 {
        self.tau0 / 2f64.powi(level as i32)
    }

    fn validate(&self) -> Result<()> {
        if self.first_level > self.last_level {
            return Err(Error::Config(format!(
                "empty level range {}..{}",
                self.first_level, self.last_level
            )));
        }
        if !(self.tau0 > 0.0 && self.final_time > 0.0) {
            return Err(Error::Config("tau0 and final time must be positive".into()));
        }
        if !(1..=3).contains(&self.stages) {
            return Err(Error::Unsupported(format!("Gauss tableau with {} stages", self.stages)));
        }
        if self.comparison == Comparison::Exact && self.scenario.exact.is_none() {
            return Err(Error::Config(format!(
                "scenario {} has no exact solution",
                self.scenario.name
            )));
        }
        Ok(())
    }
}

fn hierarchy(scenario: &Scenario, finest: usize) -> Result<RefinementHierarchy> {
    RefinementHierarchy::build(seed_disc_mesh(scenario.seed_vertices)?, &BoundaryCurve::unit_circle(), finest)
}

/// Paired `(h_j, τ_j = τ₀ / 2ʲ)` refinement over the configured levels.
pub fn run_spatial_study(cfg: &StudyConfig) -> Result<ConvergenceTable> {
    cfg.validate()?;
    let levels: Vec<usize> = (cfg.first_level..=cfg.last_level).collect();
    for &l in &levels {
        StepperConfig::new(cfg.spatial_tau(l), cfg.final_time).n_steps()?;
    }
    let finest = match cfg.comparison {
        Comparison::Exact => cfg.last_level,
        Comparison::Reference { gap } => cfg.last_level + gap.max(1),
    };
    let hier = hierarchy(&cfg.scenario, finest)?;
    let opts = cfg.options();
    let spec = &cfg.scenario.spec;
    let t_end = cfg.final_time;

    let solve_level = |l: usize| solve_problem(hier.level(l).expect("built"), spec, t_end, cfg.spatial_tau(l), &opts);
    let (runs, reference) = rayon::join(
        || levels.par_iter().map(|&l| solve_level(l)).collect::<Vec<_>>(),
        || match cfg.comparison {
            Comparison::Exact => None,
            Comparison::Reference { .. } => {
                let ref_opts = SolveOptions {
                    record_energy: false,
                    ..opts
                };
                Some(solve_problem(
                    hier.level(finest).expect("built"),
                    spec,
                    t_end,
                    cfg.spatial_tau(cfg.last_level),
                    &ref_opts,
                ))
            }
        },
    );
    let reference = reference.transpose()?;

    let mut table = ConvergenceTable::new(StudyAxis::Space);
    for (&l, run) in levels.iter().zip(runs) {
        let run = run?;
        let mesh = hier.level(l).expect("built");
        let u = &run.final_state.u;
        let report = match (&reference, &cfg.scenario.exact) {
            (Some(r), _) => error_vs_reference(&hier, l, &run.ops, u, finest, &r.final_state.u, t_end)?,
            (None, Some(exact)) => error_vs_exact(
                mesh,
                Geometry::Polygonal,
                &run.ops,
                u,
                exact,
                t_end,
                ErrorMetric::NodalDiscrete,
                l,
            )?,
            (None, None) => unreachable!("validated"),
        };
        log::info!(
            "{} level {l}: h = {:.4}, N = {}, L2 error {:.4e}",
            cfg.scenario.name,
            mesh.h(),
            run.ops.n_dofs(),
            report.combined_l2()
        );
        table.push(ConvergenceRow {
            scenario: cfg.scenario.name.clone(),
            level: l,
            h: mesh.h(),
            tau: cfg.spatial_tau(l),
            n_dofs: run.ops.n_dofs(),
            report,
            energy_drift: run.energy_drift,
            wall_seconds: if cfg.record_timing { run.wall_seconds } else { 0.0 },
        })?;
    }
    Ok(table)
}

/// Step sizes `τ₀ / 2ⁱ`, `i = 0..=halvings`.
pub fn temporal_taus(tau0: f64, halvings: usize) -> Vec<f64> {
    (0..=halvings).map(|i| tau0 / 2f64.powi(i as i32)).collect()
}

/// Step halving at a fixed mesh level against a same-mesh reference with a
/// much smaller step, so that only the time error is measured.
pub fn run_temporal_study(cfg: &StudyConfig) -> Result<ConvergenceTable> {
    cfg.validate()?;
    if cfg.first_level != cfg.last_level {
        return Err(Error::Config("a temporal study runs on a single mesh level".into()));
    }
    if cfg.temporal_reference_factor < 2 {
        return Err(Error::Config("temporal reference factor must be at least 2".into()));
    }
    let level = cfg.first_level;
    let taus = temporal_taus(cfg.tau0, cfg.halvings);
    let tau_ref = taus[taus.len() - 1] / cfg.temporal_reference_factor as f64;
    for &tau in taus.iter().chain([&tau_ref]) {
        StepperConfig::new(tau, cfg.final_time).n_steps()?;
    }
    let hier = hierarchy(&cfg.scenario, level)?;
    let mesh = hier.level(level).expect("built");
    let spec = &cfg.scenario.spec;
    let opts = cfg.options();
    let (runs, reference) = rayon::join(
        || {
            taus.par_iter()
                .map(|&tau| solve_problem(mesh, spec, cfg.final_time, tau, &opts))
                .collect::<Vec<_>>()
        },
        || {
            solve_problem(
                mesh,
                spec,
                cfg.final_time,
                tau_ref,
                &SolveOptions {
                    record_energy: false,
                    ..opts
                },
            )
        },
    );
    let reference = reference?;
    let mut table = ConvergenceTable::new(StudyAxis::Time);
    for (&tau, run) in taus.iter().zip(runs) {
        let run = run?;
        let e: Vec<f64> = reference
            .final_state
            .u
            .iter()
            .zip(&run.final_state.u)
            .map(|(a, b)| a - b)
            .collect();
        let report = nodal_error_report(&run.ops, &e, level, cfg.final_time)?;
        table.push(ConvergenceRow {
            scenario: cfg.scenario.name.clone(),
            level,
            h: mesh.h(),
            tau,
            n_dofs: run.ops.n_dofs(),
            report,
            energy_drift: run.energy_drift,
            wall_seconds: if cfg.record_timing { run.wall_seconds } else { 0.0 },
        })?;
    }
    Ok(table)
}

/// Errors `‖u_τ(T) - u_ref‖_N` of a given system for each step size, with
/// `N` a symmetric positive semidefinite norm matrix.
#[allow(clippy::too_many_arguments)]
pub fn temporal_errors(
    system: &FirstOrderSystem<'_>,
    tableau: &ButcherTableau,
    initial: &State,
    final_time: f64,
    taus: &[f64],
    reference: &[f64],
    norm: &SparseMatrix,
    solver: SolverMode,
) -> Result<Vec<f64>> {
    if taus.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Config("time steps must strictly decrease".into()));
    }
    taus.iter()
        .map(|&tau| {
            let cfg = StepperConfig::new(tau, final_time).with_solver(solver);
            let traj = integrate(system, tableau, initial.clone(), &cfg)?;
            let e: Vec<f64> = traj.final_state.u.iter().zip(reference).map(|(a, b)| a - b).collect();
            Ok(norm.quad_form(&e)?.max(0.0).sqrt())
        })
        .collect()
}
