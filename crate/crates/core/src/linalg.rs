//! Compressed-row sparse matrices and the linear solvers used by the time
//! stepper and the norm evaluations. Direct solves are backed by faer's
//! sparse LU with partial pivoting; the Krylov solvers are Jacobi
//! preconditioned CG (SPD) and BiCGSTAB (general).

use std::io::Write;
use std::sync::{Arc, Mutex};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 20_000;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    /// Explicit zeros are kept as structural entries.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        for &(i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::InvalidArgument(format!(
                    "entry ({i}, {j}) outside {nrows}x{ncols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite entry at ({i}, {j})")));
            }
        }
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let (i, j, v) = triplets[k];
            if last == Some((i, j)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    /// Dense row-major input; zeros are dropped.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        let mut t = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::DimensionMismatch {
                    expected: ncols,
                    found: row.len(),
                });
            }
            t.extend(row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, &v)| (i, j, v)));
        }
        Self::from_triplets(rows.len(), ncols, &t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.ncols,
                found: x.len(),
            });
        }
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x`; dimensions must already agree.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let ay = self.matvec(y)?;
        if x.len() != ay.len() {
            return Err(Error::DimensionMismatch {
                expected: ay.len(),
                found: x.len(),
            });
        }
        Ok(dot(x, &ay))
    }

    pub fn quad_form(&self, x: &[f64]) -> Result<f64> {
        self.bilinear(x, x)
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t).expect("transpose of a valid matrix")
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `Σ cₖ Aₖ` over matrices of equal shape.
    pub fn linear_combination(terms: &[(f64, &SparseMatrix)]) -> Result<Self> {
        let (nrows, ncols) = terms
            .first()
            .map(|(_, m)| (m.nrows, m.ncols))
            .ok_or_else(|| Error::InvalidArgument("empty linear combination".into()))?;
        let mut t = Vec::new();
        for (c, m) in terms {
            if (m.nrows, m.ncols) != (nrows, ncols) {
                return Err(Error::DimensionMismatch {
                    expected: nrows,
                    found: m.nrows,
                });
            }
            t.extend(m.triplets().map(|(i, j, v)| (i, j, c * v)));
        }
        Self::from_triplets(nrows, ncols, &t)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            d[i][j] += v;
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |aᵢⱼ - aⱼᵢ| / max |aᵢⱼ|`; zero for the zero matrix.
    pub fn symmetry_defect(&self) -> f64 {
        self.relative_defect(1.0)
    }

    /// `max |aᵢⱼ + aⱼᵢ| / max |aᵢⱼ|`.
    pub fn skew_defect(&self) -> f64 {
        self.relative_defect(-1.0)
    }

    fn relative_defect(&self, sign: f64) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let t = self.transpose();
        let diff = Self::linear_combination(&[(1.0, self), (-sign, &t)]).expect("same shape");
        diff.max_abs() / scale
    }

    /// Coordinate text format, one `row col value` line per stored entry.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (i, j, v) in self.triplets() {
            writeln!(w, "{i} {j} {v:.17e}")?;
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Sparse LU factorization with partial pivoting.
pub struct LuFactorization {
    n: usize,
    lu: Lu<usize, f64>,
}

impl std::fmt::Debug for LuFactorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuFactorization").field("n", &self.n).finish_non_exhaustive()
    }
}

impl LuFactorization {
    pub fn new(m: &SparseMatrix) -> Result<Self> {
        if m.nrows != m.ncols {
            return Err(Error::DimensionMismatch {
                expected: m.nrows,
                found: m.ncols,
            });
        }
        let n = m.nrows;
        let triplets: Vec<Triplet<usize, usize, f64>> =
            m.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        let csc = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| Error::InvalidArgument(format!("{e:?}")))?;
        let lu = csc.sp_lu().map_err(|_| Error::SingularMatrix)?;
        Ok(Self { n, lu })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: b.len(),
            });
        }
        if b.iter().all(|&v| v == 0.0) {
            return Ok(vec![0.0; self.n]);
        }
        let mut rhs = faer::Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(rhs.as_mut());
        let x: Vec<f64> = (0..self.n).map(|i| rhs[(i, 0)]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix);
        }
        Ok(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SolverMode {
    DirectFactorization,
    IterativeSpd { tol: f64, max_iter: usize },
    IterativeGeneral { tol: f64, max_iter: usize },
}

impl SolverMode {
    pub fn iterative_spd() -> Self {
        SolverMode::IterativeSpd {
            tol: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
        }
    }

    pub fn iterative_general() -> Self {
        SolverMode::IterativeGeneral {
            tol: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

struct CachedFactorization {
    matrix: SparseMatrix,
    lu: Arc<LuFactorization>,
}

/// Solver configuration plus a cache holding the factorization of the last
/// matrix solved in direct mode. The cache is only hit for a matrix equal to
/// the one it was computed from.
pub struct SolverHandle {
    mode: SolverMode,
    cache: Mutex<Option<CachedFactorization>>,
}

impl std::fmt::Debug for SolverHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolverHandle").field("mode", &self.mode).finish_non_exhaustive()
    }
}

impl Clone for SolverHandle {
    fn clone(&self) -> Self {
        Self::new(self.mode)
    }
}

impl SolverHandle {
    pub fn new(mode: SolverMode) -> Self {
        Self {
            mode,
            cache: Mutex::new(None),
        }
    }

    pub fn direct() -> Self {
        Self::new(SolverMode::DirectFactorization)
    }

    pub fn mode(&self) -> SolverMode {
        self.mode
    }

    /// Factorization of `m`, reused when `m` equals the cached matrix.
    pub fn factorization(&self, m: &SparseMatrix) -> Result<Arc<LuFactorization>> {
        let mut cache = self.cache.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(c) = cache.as_ref() {
            if &c.matrix == m {
                return Ok(Arc::clone(&c.lu));
            }
        }
        let lu = Arc::new(LuFactorization::new(m)?);
        *cache = Some(CachedFactorization {
            matrix: m.clone(),
            lu: Arc::clone(&lu),
        });
        Ok(lu)
    }

    pub fn solve(&self, m: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
        solve(m, b, self)
    }
}

/// Solves `M x = b` with the strategy selected by `handle`.
pub fn solve(m: &SparseMatrix, b: &[f64], handle: &SolverHandle) -> Result<Vec<f64>> {
    if m.nrows != m.ncols {
        return Err(Error::DimensionMismatch {
            expected: m.nrows,
            found: m.ncols,
        });
    }
    if b.len() != m.nrows {
        return Err(Error::DimensionMismatch {
            expected: m.nrows,
            found: b.len(),
        });
    }
    match handle.mode {
        SolverMode::DirectFactorization => handle.factorization(m)?.solve(b),
        SolverMode::IterativeSpd { tol, max_iter } => conjugate_gradient(m, b, tol, max_iter),
        SolverMode::IterativeGeneral { tol, max_iter } => bicgstab(m, b, tol, max_iter),
    }
}

/// Like [`solve`], but reports [`Error::SingularMatrix`] when `m` annihilates
/// constants or the computed solution does not satisfy the system.
pub fn solve_nonsingular(m: &SparseMatrix, b: &[f64], handle: &SolverHandle) -> Result<Vec<f64>> {
    let scale = m.max_abs();
    let ones = vec![1.0; m.ncols];
    let kernel = m.matvec(&ones)?.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 || kernel <= 1e-12 * scale {
        return Err(Error::SingularMatrix);
    }
    let x = solve(m, b, handle)?;
    let r = m.matvec(&x)?;
    let res = norm2(&r.iter().zip(b).map(|(a, b)| a - b).collect::<Vec<_>>());
    if !(res <= 1e-8 * norm2(b).max(f64::MIN_POSITIVE)) {
        return Err(Error::SingularMatrix);
    }
    Ok(x)
}

fn jacobi(m: &SparseMatrix) -> Result<Vec<f64>> {
    m.diagonal()
        .into_iter()
        .map(|d| if d != 0.0 { Ok(1.0 / d) } else { Err(Error::SingularMatrix) })
        .collect()
}

/// Jacobi-preconditioned conjugate gradients; stops at `‖r‖ ≤ tol ‖b‖`.
pub fn conjugate_gradient(m: &SparseMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let inv_diag = jacobi(m)?;
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        m.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SingularMatrix);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm2(&r) <= tol * bnorm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence(max_iter))
}

/// Jacobi-preconditioned BiCGSTAB; stops at `‖r‖ ≤ tol ‖b‖`.
pub fn bicgstab(m: &SparseMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let inv_diag = jacobi(m)?;
    let precond = |v: &[f64]| -> Vec<f64> { v.iter().zip(&inv_diag).map(|(a, d)| a * d).collect() };

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    for _ in 0..max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 {
            return Err(Error::NoConvergence(max_iter));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let p_hat = precond(&p);
        m.matvec_into(&p_hat, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 {
            return Err(Error::SingularMatrix);
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) <= tol * bnorm {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            return Ok(x);
        }
        let s_hat = precond(&s);
        m.matvec_into(&s_hat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(Error::SingularMatrix);
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm2(&r) <= tol * bnorm {
            return Ok(x);
        }
        if omega == 0.0 {
            return Err(Error::NoConvergence(max_iter));
        }
    }
    Err(Error::NoConvergence(max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(n: usize, density: f64, rng: &mut ChaCha8Rng) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if rng.gen::<f64>() < density {
                    t.push((i, j, rng.gen_range(-1.0..1.0)));
                }
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> SparseMatrix {
        let a = random_sparse(n, 0.4, rng);
        let mut t: Vec<_> = Vec::new();
        // AᵀA + n I
        let d = a.to_dense();
        for i in 0..n {
            for j in 0..n {
                let s: f64 = (0..n).map(|k| d[k][i] * d[k][j]).sum();
                if s != 0.0 || i == j {
                    t.push((i, j, s + if i == j { n as f64 } else { 0.0 }));
                }
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    // Dense Gaussian elimination with partial pivoting.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
            x[k] = (b[k] - s) / a[k][k];
        }
        x
    }

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let m = SparseMatrix::from_triplets(2, 3, &[(1, 2, 1.0), (0, 1, 2.0), (1, 2, 3.0), (1, 0, -1.0)]).unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(1, 2), 4.0);
        assert_eq!(m.col_idx(), &[1, 0, 2]);
        assert!(SparseMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn matvec_cases() {
        let x = vec![1.0, -2.0, 3.5];
        assert_eq!(SparseMatrix::identity(3).matvec(&x).unwrap(), x);
        assert_eq!(SparseMatrix::zeros(3, 3).matvec(&x).unwrap(), vec![0.0; 3]);
        assert!(matches!(
            SparseMatrix::identity(2).matvec(&x),
            Err(Error::DimensionMismatch { .. })
        ));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_sparse(20, 0.3, &mut rng);
        let x: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d = m.to_dense();
        let y = m.matvec(&x).unwrap();
        for i in 0..20 {
            let yi: f64 = (0..20).map(|j| d[i][j] * x[j]).sum();
            assert!((yi - y[i]).abs() <= 1e-14);
        }
    }

    #[test]
    fn small_direct_solves() {
        let h = SolverHandle::direct();
        let d = SparseMatrix::from_diagonal(&[2.0, 4.0]);
        let x = h.solve(&d, &[2.0, 4.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
        let b = vec![0.3, -1.0, 2.0];
        assert_eq!(h.solve(&SparseMatrix::identity(3), &b).unwrap(), b);
        assert_eq!(h.solve(&SparseMatrix::identity(3), &[0.0; 3]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let m = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        let err = SolverHandle::direct().solve(&m, &[1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::SingularMatrix), "{err:?}");
    }

    #[test]
    fn all_modes_match_dense_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let m = random_spd(10, &mut rng);
            let b: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let reference = dense_solve(m.to_dense(), b.clone());
            for mode in [
                SolverMode::DirectFactorization,
                SolverMode::iterative_spd(),
                SolverMode::iterative_general(),
            ] {
                let x = solve(&m, &b, &SolverHandle::new(mode)).unwrap();
                for (a, r) in x.iter().zip(&reference) {
                    assert!((a - r).abs() <= 1e-10, "{mode:?}");
                }
            }
        }
    }

    #[test]
    fn cached_factorization_is_bitwise_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_spd(30, &mut rng);
        let b: Vec<f64> = (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h = SolverHandle::direct();
        let first = h.solve(&m, &b).unwrap();
        let cached = h.solve(&m, &b).unwrap();
        let fresh = SolverHandle::direct().solve(&m, &b).unwrap();
        assert_eq!(first, cached);
        assert_eq!(first, fresh);
        // A different matrix must not hit the cache.
        let m2 = m.scaled(2.0);
        let x2 = h.solve(&m2, &b).unwrap();
        for (a, c) in x2.iter().zip(&first) {
            assert!((2.0 * a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn cg_reports_non_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_spd(40, &mut rng);
        let b = vec![1.0; 40];
        assert!(matches!(conjugate_gradient(&m, &b, 1e-30, 2), Err(Error::NoConvergence(2))));
    }

    #[test]
    fn symmetry_and_skew_defects() {
        let s = SparseMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        assert_eq!(s.symmetry_defect(), 0.0);
        let k = SparseMatrix::from_dense(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        assert_eq!(k.skew_defect(), 0.0);
        assert_eq!(k.symmetry_defect(), 2.0);
    }
}
