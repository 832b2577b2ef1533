use std::sync::Arc;

use bsfem::analysis::{
    error_vs_exact, error_vs_reference, nodal_error_report, ritz_project, ErrorMetric, Geometry, RitzTarget,
};
use bsfem::harness::config::load_config;
use bsfem::harness::output::{csv_rows, emit_outputs, read_csv, write_csv};
use bsfem::harness::scenario::scenario;
use bsfem::harness::study::{run_spatial_study, solve_problem, Comparison, SolveOptions, StudyConfig};
use bsfem::{assemble, BoundaryCurve, ProblemSpec, RefinementHierarchy, SolverHandle};

fn linear_target() -> RitzTarget {
    RitzTarget {
        u: Arc::new(|x| 2.0 + 3.0 * x[0] - x[1]),
        gradient: Some(Arc::new(|_| [3.0, -1.0])),
        surface_gradient: None,
    }
}

#[test]
fn ritz_reproduces_discrete_functions_on_the_polygon() {
    let hier = RefinementHierarchy::disc(6, 2).unwrap();
    let mesh = hier.level(2).unwrap();
    let spec = ProblemSpec::pure_second_order(1.0, 0.7, 1.3);
    let r = ritz_project(mesh, Geometry::Polygonal, &spec, &linear_target(), &SolverHandle::direct()).unwrap();
    for (x, v) in mesh.vertices().iter().zip(&r) {
        assert!((v - (2.0 + 3.0 * x[0] - x[1])).abs() <= 1e-10);
    }
    let constant = RitzTarget {
        u: Arc::new(|_| 4.5),
        gradient: Some(Arc::new(|_| [0.0, 0.0])),
        surface_gradient: None,
    };
    let r = ritz_project(mesh, Geometry::Polygonal, &spec, &constant, &SolverHandle::direct()).unwrap();
    assert!(r.iter().all(|v| (v - 4.5).abs() <= 1e-10));
}

#[test]
fn ritz_requires_a_definite_form_and_a_gradient() {
    let hier = RefinementHierarchy::disc(6, 1).unwrap();
    let mesh = hier.level(1).unwrap();
    let solver = SolverHandle::direct();
    let pure = ProblemSpec::pure_second_order(1.0, 1.0, 0.0);
    assert!(ritz_project(mesh, Geometry::Polygonal, &pure, &linear_target(), &solver).is_err());
    let mut no_grad = linear_target();
    no_grad.gradient = None;
    let spec = ProblemSpec::pure_second_order(1.0, 1.0, 1.0);
    assert!(matches!(
        ritz_project(mesh, Geometry::Polygonal, &spec, &no_grad, &solver),
        Err(bsfem::Error::MissingGradient(_))
    ));
}

#[test]
fn reference_comparison_of_injected_and_shifted_solutions() {
    let hier = RefinementHierarchy::disc(6, 3).unwrap();
    let spec = ProblemSpec::pure_second_order(1.0, 1.0, 0.0);
    let ops = assemble(hier.level(1).unwrap(), &spec).unwrap();
    let n = ops.n_dofs();
    let coarse: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
    let n_fine = hier.level(3).unwrap().n_vertices();
    let mut fine = vec![0.0; n_fine];
    fine[..n].copy_from_slice(&coarse);
    let r = error_vs_reference(&hier, 1, &ops, &coarse, 3, &fine, 0.0).unwrap();
    assert_eq!(r.combined_l2(), 0.0);

    let c = 0.25;
    let shifted: Vec<f64> = fine.iter().map(|v| v + c).collect();
    let r = error_vs_reference(&hier, 1, &ops, &coarse, 3, &shifted, 0.0).unwrap();
    let ones = vec![1.0; n];
    let expect = c * ops.mass.quad_form(&ones).unwrap().sqrt();
    assert!((r.combined_l2() - expect).abs() <= 1e-13);
    assert!(error_vs_reference(&hier, 3, &ops, &coarse, 1, &fine, 0.0).is_err());
}

#[test]
fn nodal_metric_matches_mass_quadratic_form() {
    let hier = RefinementHierarchy::disc(6, 2).unwrap();
    let mesh = hier.level(2).unwrap();
    let ops = assemble(mesh, &ProblemSpec::pure_second_order(0.6, 1.0, 0.0)).unwrap();
    let e: Vec<f64> = (0..ops.n_dofs()).map(|i| ((i * 7 % 13) as f64 - 6.0) * 1e-2).collect();
    let r = nodal_error_report(&ops, &e, 2, 0.0).unwrap();
    let direct = ops.mass.quad_form(&e).unwrap().sqrt();
    assert!((r.combined_l2() - direct).abs() <= 1e-13 * direct.max(1.0));
}

#[test]
fn reference_gap_does_not_change_errors_much() {
    let mk = |gap| {
        let mut cfg = StudyConfig::spatial(scenario("pure").unwrap(), 2, 3);
        cfg.comparison = Comparison::Reference { gap };
        cfg.record_timing = false;
        run_spatial_study(&cfg).unwrap()
    };
    let (a, b) = (mk(2), mk(3));
    for (x, y) in a.rows().iter().zip(b.rows()) {
        let (ex, ey) = (x.report.combined_l2(), y.report.combined_l2());
        assert!((ex - ey).abs() <= 0.1 * ey, "{ex} vs {ey}");
    }
}

#[test]
fn nodal_and_lifted_acoustic_errors_agree_in_size() {
    let s = scenario("acoustic").unwrap();
    let hier = RefinementHierarchy::disc(6, 3).unwrap();
    let mesh = hier.level(3).unwrap();
    let run = solve_problem(mesh, &s.spec, s.final_time, 0.025 / 8.0, &SolveOptions::default()).unwrap();
    let exact = s.exact.as_ref().unwrap();
    let curve = BoundaryCurve::unit_circle();
    let u = &run.final_state.u;
    let nodal = error_vs_exact(mesh, Geometry::Polygonal, &run.ops, u, exact, 0.2, ErrorMetric::NodalDiscrete, 3).unwrap();
    let lifted =
        error_vs_exact(mesh, Geometry::Curved(&curve), &run.ops, u, exact, 0.2, ErrorMetric::LiftedQuadrature, 3).unwrap();
    let ratio = lifted.combined_l2() / nodal.combined_l2();
    assert!(ratio > 0.2 && ratio < 5.0, "{ratio}");
    assert!(nodal.combined_l2() < 5e-3);
}

#[test]
fn study_output_is_deterministic_and_round_trips() {
    let run = || {
        let mut cfg = StudyConfig::spatial(scenario("adv-bulk").unwrap(), 1, 3);
        cfg.record_timing = false;
        let table = run_spatial_study(&cfg).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &csv_rows(&table)).unwrap();
        (table, buf)
    };
    let (table, a) = run();
    let (_, b) = run();
    assert_eq!(a, b);
    let dir = tempfile::tempdir().unwrap();
    let (csv, svg) = emit_outputs(&table, dir.path()).unwrap();
    assert_eq!(std::fs::read(&csv).unwrap(), a);
    let back = read_csv(std::fs::File::open(&csv).unwrap()).unwrap();
    assert_eq!(back.len(), 3);
    assert_eq!(back[2].n, table.rows()[2].n_dofs);
    let svg = std::fs::read_to_string(svg).unwrap();
    assert_eq!(svg.matches("class=\"norm\"").count(), 4);
}

#[test]
fn config_file_drives_a_solve() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.ini");
    std::fs::write(
        &path,
        "[problem]\nscenario = adv-surface\nalpha_surf = 0.5\n\n[mesh]\nlevel = 1\n\n[time]\ntau = 0.25\nstages = 3\n",
    )
    .unwrap();
    let cfg = load_config(&path).unwrap();
    assert_eq!(cfg.scenario.spec.alpha_surf, 0.5);
    let opts = SolveOptions {
        stages: cfg.stages,
        ..SolveOptions::default()
    };
    let hier = RefinementHierarchy::disc(cfg.scenario.seed_vertices, cfg.level).unwrap();
    let run = solve_problem(hier.level(1).unwrap(), &cfg.scenario.spec, cfg.final_time, cfg.tau, &opts).unwrap();
    assert_eq!(run.steps, 4);
    assert!(run.final_state.u.iter().all(|v| v.is_finite()));
    assert!(load_config(&dir.path().join("missing.ini")).is_err());
}
