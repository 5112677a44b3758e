//! Linear solves for the mixed problem
//!
//! ```text
//!   -Delta u + gamma (-Delta)^s u~ + a u + q . grad u = f,   zero flux
//! ```
//!
//! on the interior unknowns. Assembly keeps the fractional block separate so
//! a gamma sweep factors it only once. Solves are dense LU with a Hager
//! 1-norm condition estimate and iterative refinement to a pinned residual.
//!
//! Besides the direct solve there is a continuation path: start from the
//! classical solve at gamma = 0 and walk gamma up in steps of size eps, each
//! step resolved by the fixed-point iteration
//!
//! ```text
//!   A(gamma) phi_{k+1} = -eps M (v + phi_k)
//! ```
//!
//! where M is the fractional block. The step is accepted when the iteration
//! contracts; eps halves on divergence and grows back after effortless steps.

use crate::geometry::Grid;
use crate::kernels::{FracParams, QuadPolicy};
use crate::operators::{
    gradient_matrix, laplacian_matrix, AssemblyDiagnostics, FracOperator, TailMode,
};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Coefficients and data of one problem instance. `a`, `q`, and `f` are
/// nodal values on the interior lattice (`q` is the drift field); `gamma`
/// is the target strength of the fractional term.
#[derive(Clone, Debug)]
pub struct ProblemData {
    pub a: Vec<f64>,
    pub q: Vec<f64>,
    pub gamma: f64,
    pub f: Vec<f64>,
}

impl ProblemData {
    pub fn constant_coeffs(n: usize, a: f64, q: f64, gamma: f64, f: Vec<f64>) -> Self {
        ProblemData { a: vec![a; n], q: vec![q; n], gamma, f }
    }
}

/// Dense LU factorization with a condition estimate and refined solves.
pub struct DenseSolver {
    lu: nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    norm_inf: f64,
    cond_1: f64,
}

impl DenseSolver {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::InvalidParameter("solver needs a square matrix".into()));
        }
        let norm_1 = (0..n)
            .map(|j| (0..n).map(|i| a[(i, j)].abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
        let norm_inf = (0..n)
            .map(|i| (0..n).map(|j| a[(i, j)].abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
        let lu = nalgebra::linalg::LU::new(a.clone());
        let lu_t = nalgebra::linalg::LU::new(a.transpose());
        if !lu.is_invertible() {
            return Err(Error::SingularSystem { cond_estimate: f64::INFINITY });
        }
        // Hager's 1-norm estimator for ||A^-1||.
        let mut x = DVector::from_element(n, 1.0 / n as f64);
        let mut est = 0.0f64;
        for iter in 0..5 {
            let y = lu
                .solve(&x)
                .ok_or(Error::SingularSystem { cond_estimate: f64::INFINITY })?;
            est = est.max(y.iter().map(|v| v.abs()).sum());
            let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
            let z = lu_t
                .solve(&xi)
                .ok_or(Error::SingularSystem { cond_estimate: f64::INFINITY })?;
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.abs()))
                .max_by(|a, b| a.1.partial_cmp(&b.1).expect("finite estimator"))
                .expect("nonempty");
            if iter > 0 && zmax <= z.dot(&x) {
                break;
            }
            x = DVector::zeros(n);
            x[jmax] = 1.0;
        }
        Ok(DenseSolver { lu, norm_inf, cond_1: norm_1 * est })
    }

    /// Estimated 1-norm condition number of the factored matrix.
    pub fn cond_estimate(&self) -> f64 {
        self.cond_1
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.lu
            .solve(b)
            .ok_or(Error::SingularSystem { cond_estimate: self.cond_1 })
    }

    /// Solve with iterative refinement until the residual is below
    /// `tol * ||b||_inf` (or the attainable floor for this matrix). Returns
    /// the solution, the final residual, and the refinement count.
    pub fn solve_refined(
        &self,
        a: &DMatrix<f64>,
        b: &DVector<f64>,
        tol: f64,
    ) -> Result<(DVector<f64>, f64, usize)> {
        let bn = b.amax();
        let mut x = self.solve(b)?;
        let mut refinements = 0;
        for pass in 0..3 {
            let r = b - a * &x;
            let rn = r.amax();
            let floor = 40.0 * f64::EPSILON * self.norm_inf * x.amax();
            if rn <= tol * bn || rn <= floor {
                return Ok((x, rn, refinements));
            }
            if pass == 2 {
                break;
            }
            let dx = self.solve(&r)?;
            x += dx;
            refinements += 1;
        }
        Err(Error::SingularSystem { cond_estimate: self.cond_1 })
    }
}

/// The assembled discrete system. The local block bundles the Laplacian,
/// reaction, and drift; the fractional block is kept gamma-free so the same
/// assembly serves every gamma.
pub struct AssembledSystem {
    grid: Arc<Grid>,
    pub local: DMatrix<f64>,
    pub frac: DMatrix<f64>,
    pub diagnostics: AssemblyDiagnostics,
    a: Vec<f64>,
    pub f: DVector<f64>,
    pub gamma: f64,
}

impl AssembledSystem {
    pub fn new(
        grid: Arc<Grid>,
        params: FracParams,
        policy: QuadPolicy,
        data: &ProblemData,
    ) -> Result<Self> {
        let n = grid.interior_nodes().len();
        if data.a.len() != n || data.q.len() != n || data.f.len() != n {
            return Err(Error::InvalidParameter(format!(
                "coefficient lengths {} / {} / {} do not match the {} interior nodes",
                data.a.len(),
                data.q.len(),
                data.f.len(),
                n
            )));
        }
        if !data.gamma.is_finite() || data.gamma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gamma must be finite and nonnegative, got {}",
                data.gamma
            )));
        }
        if data.q.iter().chain(&data.a).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("coefficients must be finite".into()));
        }
        if data.f.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("source values must be finite".into()));
        }
        let mut local = laplacian_matrix(&grid)?;
        if data.q.iter().any(|&v| v != 0.0) {
            // q_i (du/dx)_i: scale row i of the gradient stencil by the
            // nodal drift sample.
            let g = gradient_matrix(&grid)?;
            for i in 0..n {
                if data.q[i] != 0.0 {
                    for j in 0..n {
                        local[(i, j)] += data.q[i] * g[(i, j)];
                    }
                }
            }
        }
        for i in 0..n {
            local[(i, i)] += data.a[i];
        }
        project_row_sums(&mut local, &data.a);
        let op = FracOperator::new(grid.clone(), params, policy, TailMode::FarFieldMean)?;
        let (frac, diagnostics) = op.matrix()?;
        Ok(AssembledSystem {
            grid,
            local,
            frac,
            diagnostics,
            a: data.a.clone(),
            f: DVector::from_vec(data.f.clone()),
            gamma: data.gamma,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.local.nrows()
    }

    /// Full matrix at a given gamma. Row sums are projected back to the
    /// reaction coefficient so constants stay exact discrete solutions.
    pub fn system_matrix(&self, gamma: f64) -> DMatrix<f64> {
        let mut m = self.local.clone();
        if gamma != 0.0 {
            m += &self.frac * gamma;
        }
        project_row_sums(&mut m, &self.a);
        m
    }
}

/// The continuous operator maps constants to `a * const`, so every discrete
/// row must sum to the reaction coefficient. Summing the assembled blocks
/// leaves an ulp-level residue; push it onto the diagonal.
fn project_row_sums(m: &mut DMatrix<f64>, a: &[f64]) {
    for i in 0..m.nrows() {
        let s: f64 = (0..m.ncols()).map(|j| m[(i, j)]).sum();
        m[(i, i)] -= s - a[i];
    }
}

#[derive(Clone, Debug)]
pub struct DirectSolve {
    pub u: Vec<f64>,
    pub residual_inf: f64,
    pub cond_estimate: f64,
    pub refinements: usize,
}

/// Pinned relative residual for every linear solve.
pub const SOLVE_TOL: f64 = 1e-10;

/// One-shot solve at an explicit gamma.
pub fn solve_direct_at(sys: &AssembledSystem, gamma: f64) -> Result<DirectSolve> {
    let a = sys.system_matrix(gamma);
    let solver = DenseSolver::new(&a)?;
    let (x, rn, refinements) = solver.solve_refined(&a, &sys.f, SOLVE_TOL)?;
    Ok(DirectSolve {
        u: x.iter().copied().collect(),
        residual_inf: rn,
        cond_estimate: solver.cond_estimate(),
        refinements,
    })
}

/// One-shot solve at the problem's target gamma.
pub fn solve_direct(sys: &AssembledSystem) -> Result<DirectSolve> {
    solve_direct_at(sys, sys.gamma)
}

/// One application of the continuation map at base matrix `A`:
/// solve `A phi_new = -eps M (v + phi)`.
pub fn fixed_point_step(
    solver: &DenseSolver,
    frac: &DMatrix<f64>,
    eps: f64,
    v: &DVector<f64>,
    phi: &DVector<f64>,
) -> Result<DVector<f64>> {
    let rhs = frac * (v + phi) * (-eps);
    solver.solve(&rhs)
}

#[derive(Clone, Copy, Debug)]
pub struct ContinuationOptions {
    pub eps0: f64,
    pub eps_floor: f64,
    pub fp_tol: f64,
    pub max_fp_iters: usize,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions { eps0: 0.1, eps_floor: 1e-6, fp_tol: 1e-11, max_fp_iters: 60 }
    }
}

/// One accepted continuation step, as recorded in the trace.
#[derive(Clone, Copy, Debug)]
pub struct ContinuationStep {
    pub gamma: f64,
    pub eps: f64,
    pub iters: usize,
    pub residual: f64,
    pub rho: f64,
    pub sup_norm: f64,
}

#[derive(Clone, Debug)]
pub struct ContinuationResult {
    pub u: Vec<f64>,
    pub v0: Vec<f64>,
    pub trace: Vec<ContinuationStep>,
}

enum Attempt {
    Converged { phi: DVector<f64>, iters: usize, rho: f64 },
    Diverged,
}

fn fixed_point_attempt(
    solver: &DenseSolver,
    frac: &DMatrix<f64>,
    eps: f64,
    v: &DVector<f64>,
    opts: &ContinuationOptions,
) -> Result<Attempt> {
    let scale = v.amax().max(1.0);
    let mut phi = DVector::zeros(v.len());
    let mut d_prev = f64::INFINITY;
    let mut rises = 0;
    let mut first_delta = 0.0;
    for k in 1..=opts.max_fp_iters {
        let phi_new = fixed_point_step(solver, frac, eps, v, &phi)?;
        let delta = (&phi_new - &phi).amax();
        phi = phi_new;
        if k == 1 {
            first_delta = delta;
        }
        if delta <= opts.fp_tol * scale {
            // geometric-mean contraction factor over the observed deltas
            let rho = if k >= 2 && first_delta > 0.0 {
                (delta / first_delta).powf(1.0 / (k - 1) as f64)
            } else {
                0.0
            };
            return Ok(Attempt::Converged { phi, iters: k, rho });
        }
        if delta >= d_prev {
            rises += 1;
            if rises >= 2 {
                return Ok(Attempt::Diverged);
            }
        } else {
            rises = 0;
        }
        d_prev = delta;
    }
    Ok(Attempt::Diverged)
}

/// Walk gamma from 0 to the target with adaptive steps, resolving each step
/// by the contraction map. Fails with the stall error when no step above the
/// floor contracts.
pub fn continuation_solve(
    sys: &AssembledSystem,
    opts: ContinuationOptions,
) -> Result<ContinuationResult> {
    let target = sys.gamma;
    let a0 = sys.system_matrix(0.0);
    let solver0 = DenseSolver::new(&a0)?;
    let (v0, _, _) = solver0.solve_refined(&a0, &sys.f, SOLVE_TOL)?;
    let v0_out: Vec<f64> = v0.iter().copied().collect();
    if target == 0.0 {
        return Ok(ContinuationResult { u: v0_out.clone(), v0: v0_out, trace: Vec::new() });
    }

    let mut u = v0;
    let mut gamma_cur = 0.0f64;
    let mut solver_cur = solver0;
    let mut eps = opts.eps0.min(target);
    let mut streak = 0usize;
    let mut trace = Vec::new();

    while gamma_cur < target * (1.0 - 1e-14) {
        let step = eps.min(target - gamma_cur);
        match fixed_point_attempt(&solver_cur, &sys.frac, step, &u, &opts)? {
            Attempt::Converged { phi, iters, rho } => {
                u += phi;
                gamma_cur = if target - gamma_cur <= step * (1.0 + 1e-14) {
                    target
                } else {
                    gamma_cur + step
                };
                let a_new = sys.system_matrix(gamma_cur);
                let residual = (&sys.f - &a_new * &u).amax();
                solver_cur = DenseSolver::new(&a_new)?;
                trace.push(ContinuationStep {
                    gamma: gamma_cur,
                    eps: step,
                    iters,
                    residual,
                    rho,
                    sup_norm: u.amax(),
                });
                if iters == 1 {
                    streak += 1;
                    if streak >= 2 {
                        eps = (eps * 2.0).min(opts.eps0);
                        streak = 0;
                    }
                } else {
                    streak = 0;
                }
            }
            Attempt::Diverged => {
                eps /= 2.0;
                if eps < opts.eps_floor {
                    return Err(Error::ContinuationStalled {
                        gamma: gamma_cur,
                        eps,
                        eps_floor: opts.eps_floor,
                    });
                }
            }
        }
    }
    Ok(ContinuationResult { u: u.iter().copied().collect(), v0: v0_out, trace })
}

/// Measured contraction factor of the map `phi -> -eps A(gamma0)^-1 M phi`
/// by normalized power iteration. Linearity of this quantity in eps is one
/// of the structural claims checked downstream.
pub fn contraction_factor(sys: &AssembledSystem, gamma0: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let a = sys.system_matrix(gamma0);
    let solver = DenseSolver::new(&a)?;
    let n = sys.n();
    let mut d = DVector::from_fn(n, |i, _| 1.0 + 0.3 * ((i as f64) * 1.7).sin());
    d /= d.amax();
    let mut rho = 0.0;
    for _ in 0..30 {
        let y = solver.solve(&(&sys.frac * &d * (-eps)))?;
        rho = y.amax();
        if rho == 0.0 {
            return Ok(0.0);
        }
        d = y / rho;
    }
    Ok(rho)
}
