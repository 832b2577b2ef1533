//! Gauss collocation Runge-Kutta methods for `M ü + B u̇ + A u = b̄(t)`,
//! written as a first-order system in `y = (v, u)` with `v = M u̇ + B u`.
//! The inverse mass matrix is never formed: the stages are eliminated into one
//! sparse system in the stacked stage velocities.

use std::fmt;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::assembly::AssembledOperators;
use crate::error::{Error, Result};
use crate::linalg::{dot, solve_nonsingular, SolverHandle, SolverMode, SparseMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct ButcherTableau {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl ButcherTableau {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let s = b.len();
        if s == 0 || c.len() != s || a.len() != s || a.iter().any(|r| r.len() != s) {
            return Err(Error::InvalidArgument("inconsistent Butcher tableau dimensions".into()));
        }
        Ok(Self { a, b, c })
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn a_squared(&self) -> Vec<Vec<f64>> {
        let s = self.stages();
        (0..s)
            .map(|i| (0..s).map(|j| (0..s).map(|k| self.a[i][k] * self.a[k][j]).sum()).collect())
            .collect()
    }

    /// Largest violation of `Σ bᵢ cᵢ^{k-1} = 1/k` for `k ≤ quadrature_order`
    /// and `Σⱼ aᵢⱼ cⱼ^{k-1} = cᵢ^k / k` for `k ≤ stage_order`.
    pub fn order_defect(&self, quadrature_order: usize, stage_order: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 1..=quadrature_order {
            let sum: f64 = self.b.iter().zip(&self.c).map(|(b, c)| b * c.powi(k as i32 - 1)).sum();
            worst = worst.max((sum - 1.0 / k as f64).abs());
        }
        for (row, ci) in self.a.iter().zip(&self.c) {
            for k in 1..=stage_order {
                let sum: f64 = row.iter().zip(&self.c).map(|(a, c)| a * c.powi(k as i32 - 1)).sum();
                worst = worst.max((sum - ci.powi(k as i32) / k as f64).abs());
            }
        }
        worst
    }

    /// `bᵢ aᵢⱼ + bⱼ aⱼᵢ - bᵢ bⱼ`.
    pub fn algebraic_stability_matrix(&self) -> Vec<Vec<f64>> {
        let s = self.stages();
        (0..s)
            .map(|i| {
                (0..s)
                    .map(|j| self.b[i] * self.a[i][j] + self.b[j] * self.a[j][i] - self.b[i] * self.b[j])
                    .collect()
            })
            .collect()
    }

    pub fn algebraic_stability_min_eigenvalue(&self) -> f64 {
        let s = self.stages();
        let m = self.algebraic_stability_matrix();
        let eig = SymmetricEigen::new(DMatrix::from_fn(s, s, |i, j| m[i][j]));
        eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn solve_vandermonde(c: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let s = c.len();
    let v = DMatrix::from_fn(s, s, |k, j| c[j].powi(k as i32));
    v.lu()
        .solve(&DVector::from_column_slice(rhs))
        .map(|x| x.iter().copied().collect())
        .ok_or(Error::SingularMatrix)
}

/// Gauss-Legendre collocation tableau with `s ∈ {1, 2, 3}` stages.
pub fn gauss_tableau(s: usize) -> Result<ButcherTableau> {
    if !(1..=3).contains(&s) {
        return Err(Error::Unsupported(format!("Gauss tableau with {s} stages")));
    }
    let mut c: Vec<f64> = (1..=s)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (s as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(s, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() <= 1e-17 {
                    break;
                }
            }
            0.5 * (1.0 + x)
        })
        .collect();
    c.sort_by(f64::total_cmp);
    let b = solve_vandermonde(&c, &(1..=s).map(|k| 1.0 / k as f64).collect::<Vec<_>>())?;
    let a = c
        .iter()
        .map(|&ci| solve_vandermonde(&c, &(1..=s).map(|k| ci.powi(k as i32) / k as f64).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    ButcherTableau::new(a, b, c)
}

pub type LoadFn<'a> = Box<dyn Fn(f64) -> Vec<f64> + Send + Sync + 'a>;

/// The matrices `M`, `A`, `B` and load `b̄(t)` of `M ü + B u̇ + A u = b̄`.
pub struct FirstOrderSystem<'a> {
    mass: &'a SparseMatrix,
    stiffness: &'a SparseMatrix,
    velocity: &'a SparseMatrix,
    load: Option<LoadFn<'a>>,
}

impl fmt::Debug for FirstOrderSystem<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FirstOrderSystem")
            .field("dim", &self.dim())
            .field("has_load", &self.load.is_some())
            .finish()
    }
}

impl<'a> FirstOrderSystem<'a> {
    pub fn new(mass: &'a SparseMatrix, stiffness: &'a SparseMatrix, velocity: &'a SparseMatrix) -> Result<Self> {
        let n = mass.nrows();
        for m in [mass, stiffness, velocity] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: if m.nrows() != n { m.nrows() } else { m.ncols() },
                });
            }
        }
        Ok(Self {
            mass,
            stiffness,
            velocity,
            load: None,
        })
    }

    pub fn with_load(mut self, load: LoadFn<'a>) -> Self {
        self.load = Some(load);
        self
    }

    pub fn from_operators(ops: &'a AssembledOperators) -> Result<Self> {
        let sys = Self::new(&ops.mass, &ops.stiffness, &ops.velocity)?;
        Ok(if ops.load.is_zero() {
            sys
        } else {
            sys.with_load(Box::new(move |t| ops.load.eval(t)))
        })
    }

    pub fn dim(&self) -> usize {
        self.mass.nrows()
    }

    pub fn mass(&self) -> &SparseMatrix {
        self.mass
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        self.stiffness
    }

    pub fn velocity(&self) -> &SparseMatrix {
        self.velocity
    }

    pub fn has_load(&self) -> bool {
        self.load.is_some()
    }

    pub fn load(&self, t: f64) -> Vec<f64> {
        match &self.load {
            Some(f) => f(t),
            None => vec![0.0; self.dim()],
        }
    }

    /// `y(t₀) = (M u̇⁰ + B u⁰, u⁰)`.
    pub fn initial_state(&self, t0: f64, u0: &[f64], udot0: &[f64]) -> Result<State> {
        let mut v = self.mass.matvec(udot0)?;
        let bu = self.velocity.matvec(u0)?;
        v.iter_mut().zip(&bu).for_each(|(a, b)| *a += b);
        Ok(State {
            t: t0,
            v,
            u: u0.to_vec(),
        })
    }

    /// `u̇` from `M u̇ = v - B u`.
    pub fn velocity_of(&self, y: &State, solver: &SolverHandle) -> Result<Vec<f64>> {
        let bu = self.velocity.matvec(&y.u)?;
        let rhs: Vec<f64> = y.v.iter().zip(&bu).map(|(v, b)| v - b).collect();
        solver.solve(self.mass, &rhs)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub t: f64,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
}

/// One Gauss-Runge-Kutta stepper at fixed `τ`; the stage matrix
/// `I⊗M + τ A_RK⊗B + τ² A_RK²⊗A` is assembled once and its factorization is
/// cached in the solver handle.
pub struct Stepper<'s, 'a> {
    system: &'s FirstOrderSystem<'a>,
    tableau: ButcherTableau,
    tau: f64,
    stage_matrix: SparseMatrix,
    solver: SolverHandle,
}

impl fmt::Debug for Stepper<'_, '_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Stepper")
            .field("stages", &self.tableau.stages())
            .field("tau", &self.tau)
            .field("solver", &self.solver)
            .finish()
    }
}

impl<'s, 'a> Stepper<'s, 'a> {
    pub fn new(system: &'s FirstOrderSystem<'a>, tableau: ButcherTableau, tau: f64, mode: SolverMode) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {tau}")));
        }
        let n = system.dim();
        let s = tableau.stages();
        let a2 = tableau.a_squared();
        let mut t = Vec::new();
        for i in 0..s {
            for j in 0..s {
                let blocks = [
                    (if i == j { 1.0 } else { 0.0 }, system.mass),
                    (tau * tableau.a[i][j], system.velocity),
                    (tau * tau * a2[i][j], system.stiffness),
                ];
                for (w, m) in blocks {
                    if w == 0.0 {
                        continue;
                    }
                    t.extend(m.triplets().map(|(r, c, v)| (i * n + r, j * n + c, w * v)));
                }
            }
        }
        let stage_matrix = SparseMatrix::from_triplets(s * n, s * n, &t)?;
        Ok(Self {
            system,
            tableau,
            tau,
            stage_matrix,
            solver: SolverHandle::new(mode),
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn tableau(&self) -> &ButcherTableau {
        &self.tableau
    }

    pub fn stage_matrix(&self) -> &SparseMatrix {
        &self.stage_matrix
    }

    /// Replaces the cached solver, forcing a fresh factorization.
    pub fn reset_solver(&mut self) {
        self.solver = SolverHandle::new(self.solver.mode());
    }

    pub fn step(&self, y: &State) -> Result<State> {
        let sys = self.system;
        let (n, s, tau) = (sys.dim(), self.tableau.stages(), self.tau);
        let (a, b, c) = (&self.tableau.a, &self.tableau.b, &self.tableau.c);
        let au = sys.stiffness.matvec(&y.u)?;
        let bu = sys.velocity.matvec(&y.u)?;
        let loads: Option<Vec<Vec<f64>>> = sys
            .load
            .as_ref()
            .map(|f| c.iter().map(|cj| f(y.t + cj * tau)).collect());

        let mut rhs = vec![0.0; s * n];
        for i in 0..s {
            let r = &mut rhs[i * n..(i + 1) * n];
            for k in 0..n {
                r[k] = y.v[k] - bu[k] - tau * c[i] * au[k];
            }
            if let Some(loads) = &loads {
                for j in 0..s {
                    let w = tau * a[i][j];
                    r.iter_mut().zip(&loads[j]).for_each(|(r, l)| *r += w * l);
                }
            }
        }
        let udot = self.solver.solve(&self.stage_matrix, &rhs).map_err(|e| match e {
            Error::SingularMatrix => Error::SingularStageMatrix,
            other => other,
        })?;

        let mut u_next = y.u.clone();
        let mut v_next = y.v.clone();
        for i in 0..s {
            let mut ui = y.u.clone();
            for j in 0..s {
                let w = tau * a[i][j];
                ui.iter_mut().zip(&udot[j * n..(j + 1) * n]).for_each(|(u, d)| *u += w * d);
            }
            let aui = sys.stiffness.matvec(&ui)?;
            let wb = tau * b[i];
            for k in 0..n {
                let mut vdot = -aui[k];
                if let Some(loads) = &loads {
                    vdot += loads[i][k];
                }
                v_next[k] += wb * vdot;
                u_next[k] += wb * udot[i * n + k];
            }
        }
        Ok(State {
            t: y.t + tau,
            v: v_next,
            u: u_next,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepperConfig {
    pub tau: f64,
    pub final_time: f64,
    pub solver: SolverMode,
    pub record_energy: bool,
}

impl StepperConfig {
    pub fn new(tau: f64, final_time: f64) -> Self {
        Self {
            tau,
            final_time,
            solver: SolverMode::DirectFactorization,
            record_energy: false,
        }
    }

    pub fn with_solver(mut self, solver: SolverMode) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_energy(mut self, on: bool) -> Self {
        self.record_energy = on;
        self
    }

    /// `T / τ`, which must be an integer.
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.tau > 0.0 && self.final_time > 0.0) {
            return Err(Error::InvalidArgument("tau and final time must be positive".into()));
        }
        let n = (self.final_time / self.tau).round();
        if (n * self.tau - self.final_time).abs() > 1e-12 || n < 1.0 {
            return Err(Error::InvalidArgument(format!(
                "final time {} is not an integer multiple of tau {}",
                self.final_time, self.tau
            )));
        }
        Ok(n as usize)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyRecord {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub final_state: State,
    pub steps: usize,
    pub energy: Vec<EnergyRecord>,
}

impl Trajectory {
    /// `max |E_n - E_0| / E_0` over the recorded energies (absolute when
    /// `E_0 = 0`); `None` without an energy record.
    pub fn energy_drift(&self) -> Option<f64> {
        let e0 = self.energy.first()?.energy;
        let worst = self.energy.iter().map(|r| (r.energy - e0).abs()).fold(0.0, f64::max);
        Some(if e0 > 0.0 { worst / e0 } else { worst })
    }

    /// Largest step-to-step energy increase.
    pub fn max_energy_increase(&self) -> Option<f64> {
        self.energy
            .windows(2)
            .map(|w| w[1].energy - w[0].energy)
            .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))))
    }
}

pub fn integrate(system: &FirstOrderSystem<'_>, tableau: &ButcherTableau, initial: State, config: &StepperConfig) -> Result<Trajectory> {
    integrate_with_observer(system, tableau, initial, config, &mut |_, _| Ok(()))
}

/// Runs `T / τ` steps; `observer` sees the initial state (step 0) and every
/// subsequent state.
pub fn integrate_with_observer(
    system: &FirstOrderSystem<'_>,
    tableau: &ButcherTableau,
    initial: State,
    config: &StepperConfig,
    observer: &mut dyn FnMut(usize, &State) -> Result<()>,
) -> Result<Trajectory> {
    let steps = config.n_steps()?;
    if initial.u.len() != system.dim() || initial.v.len() != system.dim() {
        return Err(Error::DimensionMismatch {
            expected: system.dim(),
            found: initial.u.len(),
        });
    }
    let stepper = Stepper::new(system, tableau.clone(), config.tau, config.solver)?;
    let mass_solver = SolverHandle::new(config.solver);
    let t0 = initial.t;
    let mut energy = Vec::new();
    let mut record = |step: usize, y: &State, energy: &mut Vec<EnergyRecord>| -> Result<()> {
        if config.record_energy {
            energy.push(EnergyRecord {
                step,
                t: y.t,
                energy: discrete_energy(system, y, &mass_solver)?,
            });
        }
        observer(step, y)
    };
    record(0, &initial, &mut energy)?;
    let mut y = initial;
    for k in 1..=steps {
        y = stepper.step(&y)?;
        // Keep the clock on the exact grid.
        y.t = t0 + k as f64 * config.tau;
        record(k, &y, &mut energy)?;
    }
    log::debug!("integrated {steps} steps of size {}", config.tau);
    Ok(Trajectory {
        final_state: y,
        steps,
        energy,
    })
}

/// `½ u̇ᵀ M u̇ + ½ uᵀ A u` with `M u̇ = v - B u`.
pub fn discrete_energy(system: &FirstOrderSystem<'_>, y: &State, solver: &SolverHandle) -> Result<f64> {
    let udot = system.velocity_of(y, solver)?;
    Ok(0.5 * system.mass.quad_form(&udot)? + 0.5 * system.stiffness.quad_form(&y.u)?)
}

/// `(vᵀ A⁻¹ v + uᵀ M u)^{1/2}`.
pub fn s_norm(system: &FirstOrderSystem<'_>, y: &State, solver: &SolverHandle) -> Result<f64> {
    let w = solve_nonsingular(system.stiffness, &y.v, solver)?;
    Ok((dot(&y.v, &w) + system.mass.quad_form(&y.u)?).max(0.0).sqrt())
}

pub fn write_energy_csv<W: Write>(w: W, records: &[EnergyRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["step", "t", "energy"])?;
    for r in records {
        out.write_record([r.step.to_string(), r.t.to_string(), r.energy.to_string()])?;
    }
    out.flush().map_err(|e| Error::io("energy csv", e))?;
    Ok(())
}

pub fn write_energy_csv_file(path: &Path, records: &[EnergyRecord]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_energy_csv(std::io::BufWriter::new(f), records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> SparseMatrix {
        SparseMatrix::from_diagonal(&[v])
    }

    #[test]
    fn midpoint_tableau() {
        let t = gauss_tableau(1).unwrap();
        assert_eq!(t.a(), &[vec![0.5]]);
        assert_eq!(t.b(), &[1.0]);
        assert_eq!(t.c(), &[0.5]);
    }

    #[test]
    fn two_stage_nodes() {
        let t = gauss_tableau(2).unwrap();
        let d = 3f64.sqrt() / 6.0;
        assert!((t.c()[0] - (0.5 - d)).abs() <= 1e-15);
        assert!((t.c()[1] - (0.5 + d)).abs() <= 1e-15);
        assert!(t.order_defect(4, 2) <= 1e-14);
    }

    #[test]
    fn unsupported_stage_count() {
        assert!(matches!(gauss_tableau(4), Err(Error::Unsupported(_))));
        assert!(matches!(gauss_tableau(0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn algebraic_stability() {
        for s in 1..=3 {
            let t = gauss_tableau(s).unwrap();
            assert!(t.algebraic_stability_min_eigenvalue() >= -1e-12);
            assert!(t.b().iter().all(|&b| b > 0.0));
            for i in 0..s {
                assert!((t.c()[i] + t.c()[s - 1 - i] - 1.0).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn midpoint_amplification() {
        let (m, a, b) = (scalar(1.0), scalar(0.0), scalar(0.7));
        let sys = FirstOrderSystem::new(&m, &a, &b).unwrap();
        let tau = 0.1;
        // M u̇ + B u = v with A = 0 keeps v constant, so take v = 0: u̇ = -0.7 u.
        let y0 = State {
            t: 0.0,
            v: vec![0.0],
            u: vec![1.0],
        };
        let stepper = Stepper::new(&sys, gauss_tableau(1).unwrap(), tau, SolverMode::DirectFactorization).unwrap();
        let y1 = stepper.step(&y0).unwrap();
        let lambda = -0.7;
        let expect = (1.0 + tau * lambda / 2.0) / (1.0 - tau * lambda / 2.0);
        assert!((y1.u[0] - expect).abs() <= 1e-15);
    }

    #[test]
    fn oscillator_energy_is_conserved() {
        let omega = 3.0;
        let (m, a, b) = (scalar(1.0), scalar(omega * omega), scalar(0.0));
        let sys = FirstOrderSystem::new(&m, &a, &b).unwrap();
        let y0 = sys.initial_state(0.0, &[0.4], &[-1.1]).unwrap();
        let solver = SolverHandle::direct();
        let e0 = discrete_energy(&sys, &y0, &solver).unwrap();
        assert!((e0 - (0.5 * 1.21 + 0.5 * 9.0 * 0.16)).abs() <= 1e-15);
        for s in 1..=3 {
            let stepper = Stepper::new(&sys, gauss_tableau(s).unwrap(), 0.2, SolverMode::DirectFactorization).unwrap();
            let y1 = stepper.step(&y0).unwrap();
            assert!((discrete_energy(&sys, &y1, &solver).unwrap() - e0).abs() <= 1e-13);
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let m = SparseMatrix::identity(3);
        let a = SparseMatrix::from_diagonal(&[1.0, 2.0, 3.0]);
        let b = SparseMatrix::zeros(3, 3);
        let sys = FirstOrderSystem::new(&m, &a, &b).unwrap();
        let y0 = sys.initial_state(0.0, &[0.0; 3], &[0.0; 3]).unwrap();
        let traj = integrate(&sys, &gauss_tableau(2).unwrap(), y0, &StepperConfig::new(0.125, 1.0)).unwrap();
        assert_eq!(traj.steps, 8);
        assert!(traj.final_state.u.iter().chain(&traj.final_state.v).all(|&x| x == 0.0));
    }

    #[test]
    fn step_count_validation() {
        assert_eq!(StepperConfig::new(1.0 / 32.0, 1.0).n_steps().unwrap(), 32);
        assert!(StepperConfig::new(0.3, 1.0).n_steps().is_err());
        assert!(StepperConfig::new(-0.1, 1.0).n_steps().is_err());
    }

    #[test]
    fn forced_scalar_matches_exact_solution() {
        // ü + u = cos 2t from rest: u(t) = (cos t - cos 2t) / 3.
        let (m, a, b) = (scalar(1.0), scalar(1.0), scalar(0.0));
        let sys = FirstOrderSystem::new(&m, &a, &b)
            .unwrap()
            .with_load(Box::new(|t| vec![(2.0 * t).cos()]));
        let y0 = sys.initial_state(0.0, &[0.0], &[0.0]).unwrap();
        let exact = ((1.0f64).cos() - (2.0f64).cos()) / 3.0;
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let cfg = StepperConfig::new(1.0 / n as f64, 1.0);
            let y = integrate(&sys, &gauss_tableau(2).unwrap(), y0.clone(), &cfg).unwrap();
            errs.push((y.final_state.u[0] - exact).abs());
        }
        for w in errs.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!((rate - 4.0).abs() < 0.3, "{errs:?}");
        }
    }

    #[test]
    fn s_norm_identity_and_kernel() {
        let id = SparseMatrix::identity(2);
        let zero = SparseMatrix::zeros(2, 2);
        let sys = FirstOrderSystem::new(&id, &id, &zero).unwrap();
        let y = State {
            t: 0.0,
            v: vec![3.0, 0.0],
            u: vec![0.0, 4.0],
        };
        assert!((s_norm(&sys, &y, &SolverHandle::direct()).unwrap() - 5.0).abs() <= 1e-15);

        let lap = SparseMatrix::from_dense(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let sys = FirstOrderSystem::new(&id, &lap, &zero).unwrap();
        assert!(matches!(
            s_norm(&sys, &y, &SolverHandle::direct()),
            Err(Error::SingularMatrix)
        ));
    }

    #[test]
    fn energy_csv_format() {
        let mut buf = Vec::new();
        write_energy_csv(
            &mut buf,
            &[EnergyRecord {
                step: 0,
                t: 0.0,
                energy: 0.5,
            }],
        )
        .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "step,t,energy\n0,0,0.5\n");
    }
}
