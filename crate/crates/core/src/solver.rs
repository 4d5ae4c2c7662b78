//! Damped Newton iteration, sparse LU solves and prolongation between
//! nested meshes.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::lu::{factorize_symbolic_lu, LuRef, LuSymbolicParams, NumericLu, SymbolicLu};
use faer::sparse::linalg::{LuError, SupernodalThreshold};
use faer::sparse::{FaerError, SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Par};

use crate::assembly::{DiscreteProblem, MixedSolution, MixedSystem};
use crate::error::{Error, Result};
use crate::mesh::{Point2, Triangulation};
use crate::sparse::CsrMatrix;
use crate::spaces::{eval_basis, Family, FeSpace, MixedSpaces};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub atol: f64,
    pub rtol: f64,
    pub max_iter: usize,
    /// Step reduction factor of the backtracking search.
    pub backtrack: f64,
    /// Smallest admissible step length.
    pub min_step: f64,
    /// Full steps only when false.
    pub damping: bool,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { atol: 1e-8, rtol: 1e-10, max_iter: 50, backtrack: 0.5, min_step: 1.0 / 1024.0, damping: true }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.atol > 0.0 && self.rtol > 0.0) {
            return Err(Error::Config("Newton tolerances must be positive".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) || !(self.min_step > 0.0 && self.min_step <= 1.0) {
            return Err(Error::Config("backtracking factor and minimum step must lie in (0,1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    /// Euclidean residual norms, starting with the initial guess.
    pub residuals: Vec<f64>,
    /// Accepted step lengths.
    pub steps: Vec<f64>,
    pub converged: bool,
}

impl NewtonReport {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::NAN)
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Newton's method with backtracking on the Euclidean residual norm.
///
/// `u0` must already carry the Dirichlet values. The last iterate is
/// returned together with the report whether or not the iteration
/// converged; only a failing linear solve is an error. `level` is used for
/// error context.
pub fn solve_newton(
    problem: &DiscreteProblem<'_>,
    u0: MixedSolution,
    cfg: &NewtonConfig,
    level: usize,
) -> Result<(MixedSolution, NewtonReport)> {
    cfg.validate()?;
    let mut lu = MixedLinearSolver::new();
    let mut u = u0;
    let mut r = norm2(&problem.residual(&u)?);
    let r0 = r;
    let mut report = NewtonReport { residuals: vec![r], ..Default::default() };
    let done = |r: f64| r <= cfg.atol || r <= cfg.rtol * r0;
    if done(r) {
        report.converged = true;
        return Ok((u, report));
    }
    for it in 1..=cfg.max_iter {
        let sys = problem.system(&u)?;
        let rhs: Vec<f64> = sys.residual.iter().map(|v| -v).collect();
        let dx = lu
            .solve(&sys, &rhs)
            .map_err(|e| Error::LinearSolve { level, iteration: it, source: Box::new(e) })?;
        let mut step = 1.0;
        let accepted = loop {
            let cand = u.axpy(step, &dx);
            let rc = norm2(&problem.residual(&cand)?);
            if !cfg.damping || rc < r {
                break Some((cand, rc));
            }
            step *= cfg.backtrack;
            if step < cfg.min_step {
                break None;
            }
        };
        let Some((cand, rc)) = accepted else {
            report.iterations = it - 1;
            return Ok((u, report));
        };
        u = cand;
        r = rc;
        report.iterations = it;
        report.residuals.push(r);
        report.steps.push(step);
        if !r.is_finite() {
            return Ok((u, report));
        }
        if done(r) {
            report.converged = true;
            return Ok((u, report));
        }
    }
    Ok((u, report))
}

/// Sparse LU with a COLAMD column ordering and the symbolic factorization
/// cached across matrices of identical pattern.
#[derive(Debug)]
pub struct LuSolver {
    threshold: SupernodalThreshold,
    cached: Option<(Vec<usize>, Vec<usize>, SymbolicLu<usize>)>,
}

impl Default for LuSolver {
    fn default() -> Self {
        Self::new()
    }
}

impl LuSolver {
    /// Supernodal or simplicial factorization chosen from the flop count.
    pub fn new() -> Self {
        Self { threshold: SupernodalThreshold::AUTO, cached: None }
    }

    /// Always use the left-looking simplicial factorization.
    pub fn simplicial() -> Self {
        Self { threshold: SupernodalThreshold::FORCE_SIMPLICIAL, cached: None }
    }

    /// Solves `a x = b`.
    pub fn solve(&mut self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
        let n = a.n_rows();
        if a.n_cols() != n || b.len() != n {
            return Err(Error::Dimension(format!(
                "system is {}x{} with {} right-hand-side entries",
                n,
                a.n_cols(),
                b.len()
            )));
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        // CSR storage of A is CSC storage of A^T.
        let pattern = SymbolicSparseColMatRef::new_checked(n, n, a.row_ptr(), None, a.col_idx());
        let at = SparseColMatRef::new(pattern, a.values());
        let same = matches!(&self.cached, Some((rp, ci, _)) if rp == a.row_ptr() && ci == a.col_idx());
        if !same {
            let params = LuSymbolicParams { supernodal_flop_ratio_threshold: self.threshold, ..Default::default() };
            let symbolic = factorize_symbolic_lu(pattern, params).map_err(faer_error)?;
            self.cached = Some((a.row_ptr().to_vec(), a.col_idx().to_vec(), symbolic));
        }
        let symbolic = &self.cached.as_ref().expect("symbolic factorization cached").2;

        let mut numeric = NumericLu::new();
        let mut mem = MemBuffer::try_new(symbolic.factorize_numeric_lu_scratch::<f64>(Par::Seq, Default::default()))
            .map_err(|_| faer_error(FaerError::OutOfMemory))?;
        let mut solve_mem = MemBuffer::try_new(symbolic.solve_transpose_in_place_scratch::<f64>(1, Par::Seq))
            .map_err(|_| faer_error(FaerError::OutOfMemory))?;
        let bnorm = norm2(b).max(f64::MIN_POSITIVE);
        // the numeric factorization panics on an exactly zero pivot
        let (x, res) = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| -> Result<(Vec<f64>, Vec<f64>)> {
            let lu = symbolic
                .factorize_numeric_lu(&mut numeric, at, Par::Seq, MemStack::new(&mut mem), Default::default())
                .map_err(lu_error)?;
            let mut x = b.to_vec();
            transpose_solve(lu, &mut x, &mut solve_mem);
            if let Some(i) = x.iter().position(|v| !v.is_finite()) {
                return Err(Error::Singular { pivot: i });
            }
            // one round of iterative refinement keeps the residual at
            // roundoff level for badly scaled Jacobians
            let mut res = residual(a, &x, b)?;
            if norm2(&res) > 1e-12 * bnorm {
                transpose_solve(lu, &mut res, &mut solve_mem);
                for (xi, d) in x.iter_mut().zip(&res) {
                    *xi += d;
                }
                res = residual(a, &x, b)?;
            }
            Ok((x, res))
        }))
        .map_err(|_| Error::Singular { pivot: 0 })??;
        let rel = norm2(&res) / bnorm;
        if !(rel <= 1e-6) {
            let pivot = res
                .iter()
                .enumerate()
                .fold((0, 0.0), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) })
                .0;
            return Err(Error::Singular { pivot });
        }
        Ok(x)
    }
}

fn transpose_solve(lu: LuRef<'_, usize, f64>, x: &mut [f64], mem: &mut MemBuffer) {
    let n = x.len();
    let rhs = MatMut::from_column_major_slice_mut(x, n, 1);
    lu.solve_transpose_in_place_with_conj(Conj::No, rhs, Par::Seq, MemStack::new(mem));
}

fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    Ok(a.mul_vec(x)?.iter().zip(b).map(|(ax, bi)| bi - ax).collect())
}

fn lu_error(e: LuError) -> Error {
    match e {
        LuError::SymbolicSingular { index } => Error::Singular { pivot: index },
        LuError::Generic(e) => faer_error(e),
    }
}

fn faer_error(e: FaerError) -> Error {
    Error::Unsupported(format!("sparse factorization: {e:?}"))
}

/// Newton-system solver for the mixed problem.
///
/// The multiplier row and column couple to every pressure dof, which makes
/// a direct factorization expensive. Every continuity row sums to zero over
/// the pressure basis (interior velocity test functions have zero flux), so
/// summing those rows gives the multiplier directly. The remaining system is
/// singular only by constant pressures; one pressure dof is pinned, and the
/// constant is restored from the mean constraint afterwards.
#[derive(Debug, Default)]
pub struct MixedLinearSolver {
    lu: LuSolver,
}

impl MixedLinearSolver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Solves `sys.matrix x = rhs`.
    pub fn solve(&mut self, sys: &MixedSystem, rhs: &[f64]) -> Result<Vec<f64>> {
        let a = &sys.matrix;
        let n = a.n_rows();
        let l = sys.multiplier_index();
        let (p0, p1) = (sys.n_velocity, sys.n_velocity + sys.n_pressure);
        if n != l + 1 || rhs.len() != n || sys.n_pressure == 0 {
            return Err(Error::Dimension(format!("mixed system of size {n} with {} right-hand-side entries", rhs.len())));
        }
        let mut mass = vec![0.0; sys.n_pressure];
        for (j, v) in a.row(l) {
            if (p0..p1).contains(&j) {
                mass[j - p0] = v;
            }
        }
        let area: f64 = mass.iter().sum();
        if !(area > 0.0) {
            return Err(Error::Singular { pivot: l });
        }
        let lambda = rhs[p0..p1].iter().sum::<f64>() / area;
        let pin = p0;

        // system without the multiplier, pressure dof `pin` fixed to zero
        let mut row_ptr = Vec::with_capacity(l + 1);
        let mut col_idx = Vec::with_capacity(a.nnz());
        let mut values = Vec::with_capacity(a.nnz());
        row_ptr.push(0);
        for i in 0..l {
            if i == pin {
                col_idx.push(pin);
                values.push(1.0);
            } else {
                for (j, v) in a.row(i) {
                    if j != l && j != pin {
                        col_idx.push(j);
                        values.push(v);
                    }
                }
            }
            row_ptr.push(col_idx.len());
        }
        let reduced = CsrMatrix::from_raw_parts(l, l, row_ptr, col_idx, values)?;
        let mut b = rhs[..l].to_vec();
        for (bi, m) in b[p0..p1].iter_mut().zip(&mass) {
            *bi -= m * lambda;
        }
        b[pin] = 0.0;
        let mut x = self.lu.solve(&reduced, &b)?;
        let mean: f64 = x[p0..p1].iter().zip(&mass).map(|(q, m)| q * m).sum();
        let shift = (rhs[l] - mean) / area;
        for q in &mut x[p0..p1] {
            *q += shift;
        }
        x.push(lambda);
        Ok(x)
    }
}

/// One-shot sparse LU solve.
pub fn sparse_lu_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    LuSolver::new().solve(a, b)
}

/// Reference coordinates of `x` in coarse element `t`.
fn to_reference(coarse: &Triangulation, t: usize, x: &Point2) -> Point2 {
    let geo = coarse.geometry(t);
    geo.inverse_jacobian * (x - geo.origin)
}

/// Evaluates every component of a coarse field at the nodes of the fine
/// space. Fine element `4t + k` lies inside coarse element `t`.
fn prolong_field(
    coarse_mesh: &Triangulation,
    fine_mesh: &Triangulation,
    coarse_space: &FeSpace,
    fine_space: &FeSpace,
    coarse: &[f64],
) -> Vec<f64> {
    let nsc = coarse_space.n_scalar_dofs();
    let nsf = fine_space.n_scalar_dofs();
    let dim = fine_space.value_dim();
    let mut out = vec![0.0; fine_space.n_dofs()];
    let nodal = match fine_space.family() {
        Family::P1Bubble => 3,
        f => f.local_dofs(),
    };
    let fine_nodes = fine_space.nodes();
    for f in 0..fine_mesh.n_triangles() {
        let parent = f / 4;
        let fd = fine_space.element_dofs(f);
        let cd = coarse_space.element_dofs(parent);
        let eval_coarse = |x: &Point2, c: usize| {
            let xi = to_reference(coarse_mesh, parent, x);
            let (v, _) = eval_basis(coarse_space.family(), &xi);
            cd.iter().zip(v).map(|(&d, b)| coarse[c * nsc + d] * b).sum::<f64>()
        };
        for &d in &fd[..nodal] {
            for c in 0..dim {
                out[c * nsf + d] = eval_coarse(&fine_nodes[d], c);
            }
        }
        if fine_space.family() == Family::P1Bubble {
            // bubble coefficient matches the coarse field at the barycenter
            let xb = fine_nodes[fd[3]];
            for c in 0..dim {
                let linear: f64 = fd[..3].iter().map(|&d| out[c * nsf + d]).sum::<f64>() / 3.0;
                out[c * nsf + fd[3]] = eval_coarse(&xb, c) - linear;
            }
        }
    }
    out
}

/// Nodal prolongation of a mixed solution from `coarse_mesh` to its red
/// refinement `fine_mesh`.
pub fn prolong(
    u: &MixedSolution,
    coarse_mesh: &Triangulation,
    fine_mesh: &Triangulation,
    coarse: &MixedSpaces,
    fine: &MixedSpaces,
) -> Result<MixedSolution> {
    if fine_mesh.n_triangles() != 4 * coarse_mesh.n_triangles() || coarse.pair != fine.pair {
        return Err(Error::InvalidMesh("fine mesh is not the red refinement of the coarse mesh".into()));
    }
    // each child must lie inside its parent
    for f in 0..fine_mesh.n_triangles() {
        let xi = to_reference(coarse_mesh, f / 4, &fine_mesh.geometry(f).barycenter);
        let tol = 1e-10;
        if xi.x < -tol || xi.y < -tol || xi.x + xi.y > 1.0 + tol {
            return Err(Error::InvalidMesh(format!("fine element {f} is not nested in its parent")));
        }
    }
    if u.velocity.len() != coarse.n_velocity() || u.pressure.len() != coarse.n_pressure() {
        return Err(Error::Dimension("solution does not match the coarse spaces".into()));
    }
    Ok(MixedSolution {
        velocity: prolong_field(coarse_mesh, fine_mesh, &coarse.velocity, &fine.velocity, &u.velocity),
        pressure: prolong_field(coarse_mesh, fine_mesh, &coarse.pressure, &fine.pressure, &u.pressure),
        multiplier: u.multiplier,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_diagonal() {
        let x = sparse_lu_solve(&CsrMatrix::identity(3), &[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, -2.0, 3.0]);
        let a = CsrMatrix::from_dense(&[vec![2.0, 0.0], vec![0.0, 4.0]]);
        let x = sparse_lu_solve(&a, &[2.0, 4.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nonsymmetric() {
        let a = CsrMatrix::from_dense(&[vec![0.0, 2.0, 1.0], vec![1.0, 0.0, 0.0], vec![3.0, 1.0, 5.0]]);
        let b = [3.0, 1.0, 9.0];
        let x = sparse_lu_solve(&a, &b).unwrap();
        let ax = a.mul_vec(&x).unwrap();
        for (l, r) in ax.iter().zip(&b) {
            assert!((l - r).abs() < 1e-13);
        }
    }

    #[test]
    fn singular_reported() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(matches!(sparse_lu_solve(&a, &[1.0, 2.0]), Err(Error::Singular { .. })));
        let mut t = crate::sparse::Triplets::new(2, 2);
        t.push(0, 0, 1.0);
        assert!(matches!(sparse_lu_solve(&t.to_csr(), &[1.0, 2.0]), Err(Error::Singular { .. })));
    }

    #[test]
    fn symbolic_reuse() {
        let mut s = LuSolver::new();
        let a = CsrMatrix::from_dense(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        let b = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 5.0]]);
        let x1 = s.solve(&a, &[1.0, 2.0]).unwrap();
        let x2 = s.solve(&b, &[1.0, 2.0]).unwrap();
        assert!((4.0 * x1[0] + x1[1] - 1.0).abs() < 1e-14);
        assert!((2.0 * x2[0] + x2[1] - 1.0).abs() < 1e-14);
    }
}
