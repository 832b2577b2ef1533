use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bsfem::analysis::{error_vs_exact, ErrorMetric, Geometry};
use bsfem::harness::config::{load_config, parse_level_range};
use bsfem::harness::output::emit_outputs;
use bsfem::harness::scenario::scenario;
use bsfem::harness::study::{run_spatial_study, run_temporal_study, solve_problem, Comparison, SolveOptions, StudyConfig};
use bsfem::mesh::seed_disc_mesh;
use bsfem::timestepping::write_energy_csv_file;
use bsfem::{BoundaryCurve, Error, RefinementHierarchy, Result, SolverMode};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "bsfem", version, about = "Bulk-surface FEM for wave equations with dynamic boundary conditions")]
struct Cli {
    /// Stages of the Gauss Runge-Kutta method.
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(1..=3))]
    rk_stages: Option<u8>,
    /// Linear solver for the stage systems.
    #[arg(long, global = true, value_enum)]
    solver: Option<SolverArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SolverArg {
    Direct,
    Iterative,
}

impl SolverArg {
    fn mode(self) -> SolverMode {
        match self {
            SolverArg::Direct => SolverMode::DirectFactorization,
            SolverArg::Iterative => SolverMode::iterative_general(),
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a refined disc mesh and write its finest level.
    Mesh {
        #[arg(long)]
        levels: usize,
        #[arg(long)]
        out: PathBuf,
        /// Boundary vertices of the seed mesh.
        #[arg(long, default_value_t = 6)]
        seed: usize,
    },
    /// Run a single simulation described by a configuration file.
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Mesh refinement study with paired step halving.
    StudySpatial {
        #[arg(long)]
        scenario: String,
        /// Inclusive level range, e.g. `2..5`.
        #[arg(long, default_value = "2..5")]
        levels: String,
        #[arg(long)]
        out: PathBuf,
        /// Levels between the finest study level and the reference solution.
        #[arg(long)]
        reference_gap: Option<usize>,
        /// Write zero instead of the measured wall time.
        #[arg(long)]
        no_timing: bool,
    },
    /// Step halving study on a fixed mesh.
    StudyTemporal {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        level: usize,
        #[arg(long)]
        halvings: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        no_timing: bool,
    },
}

fn run(cli: Cli) -> Result<()> {
    let stages = cli.rk_stages.map(usize::from);
    let solver = cli.solver.map(SolverArg::mode);
    match cli.command {
        Command::Mesh { levels, out, seed } => {
            let hier = RefinementHierarchy::build(seed_disc_mesh(seed)?, &BoundaryCurve::unit_circle(), levels)?;
            let mesh = hier.level(levels).expect("built");
            mesh.write(&out)?;
            println!(
                "level {levels}: {} vertices, {} triangles, h = {:.6}",
                mesh.n_vertices(),
                mesh.n_triangles(),
                mesh.h()
            );
        }
        Command::Solve { config } => solve(&config, stages, solver)?,
        Command::StudySpatial {
            scenario: name,
            levels,
            out,
            reference_gap,
            no_timing,
        } => {
            let (a, b) = parse_level_range(&levels)?;
            let mut cfg = StudyConfig::spatial(scenario(&name)?, a, b);
            if let Some(gap) = reference_gap {
                cfg.comparison = Comparison::Reference { gap };
            }
            apply_overrides(&mut cfg, stages, solver, no_timing);
            let table = run_spatial_study(&cfg)?;
            report(&table, &out)?;
        }
        Command::StudyTemporal {
            scenario: name,
            level,
            halvings,
            out,
            no_timing,
        } => {
            let mut cfg = StudyConfig::temporal(scenario(&name)?, level, halvings);
            apply_overrides(&mut cfg, stages, solver, no_timing);
            let table = run_temporal_study(&cfg)?;
            report(&table, &out)?;
        }
    }
    Ok(())
}

fn apply_overrides(cfg: &mut StudyConfig, stages: Option<usize>, solver: Option<SolverMode>, no_timing: bool) {
    if let Some(s) = stages {
        cfg.stages = s;
    }
    if let Some(s) = solver {
        cfg.solver = s;
    }
    cfg.record_timing = !no_timing;
}

fn report(table: &bsfem::analysis::ConvergenceTable, out: &Path) -> Result<()> {
    let (csv, svg) = emit_outputs(table, out)?;
    let rates = table.eoc_l2();
    for (i, row) in table.rows().iter().enumerate() {
        let rate = if i == 0 { String::from("-") } else { format!("{:.3}", rates[i - 1]) };
        println!(
            "{} level {} h {:.5} tau {:.3e} N {} L2 {:.4e} EOC {rate}",
            row.scenario,
            row.level,
            row.h,
            row.tau,
            row.n_dofs,
            row.report.combined_l2()
        );
    }
    println!("wrote {} and {}", csv.display(), svg.display());
    Ok(())
}

fn solve(path: &Path, stages: Option<usize>, solver: Option<SolverMode>) -> Result<()> {
    let cfg = load_config(path)?;
    let opts = SolveOptions {
        stages: stages.unwrap_or(cfg.stages),
        solver: solver.unwrap_or(cfg.solver),
        record_energy: cfg.record_energy,
    };
    let sc = &cfg.scenario;
    let hier = RefinementHierarchy::build(seed_disc_mesh(sc.seed_vertices)?, &BoundaryCurve::unit_circle(), cfg.level)?;
    let mesh = hier.level(cfg.level).expect("built");
    let run = solve_problem(mesh, &sc.spec, cfg.final_time, cfg.tau, &opts)?;

    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let sol_path = cfg.output_dir.join("solution.csv");
    let mut w = csv_writer(&sol_path)?;
    writeln!(w, "dof,x,y,u").map_err(|e| Error::io(&sol_path, e))?;
    let dm = &run.ops.dofmap;
    for (i, u) in run.final_state.u.iter().enumerate() {
        let x = mesh.vertices()[if i < dm.n_vertices() { i } else { dm.boundary_vertex_order()[i - dm.n_vertices()] }];
        writeln!(w, "{i},{},{},{u}", x[0], x[1]).map_err(|e| Error::io(&sol_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&sol_path, e))?;
    if cfg.record_energy {
        write_energy_csv_file(&cfg.output_dir.join("energy.csv"), &run.energy)?;
    }

    println!(
        "{} level {} N {} h {:.5} tau {:.3e} steps {} wall {:.3}s",
        sc.name,
        cfg.level,
        run.ops.n_dofs(),
        mesh.h(),
        cfg.tau,
        run.steps,
        if cfg.record_timing { run.wall_seconds } else { 0.0 }
    );
    if cfg.record_energy {
        println!("relative energy drift {:.3e}", run.energy_drift);
    }
    if let Some(exact) = &sc.exact {
        let e = error_vs_exact(
            mesh,
            Geometry::Polygonal,
            &run.ops,
            &run.final_state.u,
            exact,
            run.final_state.t,
            ErrorMetric::NodalDiscrete,
            cfg.level,
        )?;
        println!("L2 error at t = {}: {:.4e}", run.final_state.t, e.combined_l2());
    }
    Ok(())
}

fn csv_writer(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(std::io::BufWriter::new(f))
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config_error() || matches!(e, Error::Io { .. }) {
        2
    } else {
        3
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    log::debug!("{cli:?}");
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
