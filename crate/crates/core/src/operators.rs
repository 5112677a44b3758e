//! Discrete operators at interior nodes: the local second-difference
//! Laplacian and centered first derivative (both closed with the zero-flux
//! ghost elimination), and the fractional Laplacian of the extended field.
//!
//! The fractional operator uses the symmetric-difference form
//!
//! ```text
//!   (-Delta)^s u~(x) = C int_0^inf [2u~(x) - u~(x+z) - u~(x-z)] z^(-1-2s) dz
//! ```
//!
//! split into three zones. An inner zone [0, h] replaces the difference by
//! the discrete curvature model (the raw piecewise-linear interpolant has a
//! kink at x, which would make the integral diverge for s >= 1/2; the model
//! is part of the operator definition and is shared with the brute-force
//! oracle). A panel zone covers z up to the truncation caps with Gauss
//! panels whose breakpoints sit on every integrand kink: node offsets,
//! boundary crossings, and exterior shell offsets, so no panel straddles a
//! classification change. Beyond the caps a far-field term uses the fact
//! that the extension tends to the interpolant mean.
//!
//! 1D intervals only; the disk pipeline stops at extension and rates.

use crate::extension::{extension_row, GridFunction};
use crate::geometry::{Domain, Grid};
use crate::kernels::{Breakpoints, FracParams, QuadPolicy, QuadratureRule};
use crate::{Error, Result};
use nalgebra::DMatrix;
use rayon::prelude::*;
use std::sync::Arc;

/// Discrete negative Laplacian on interior unknowns, zero-flux closure.
/// Interior rows are the standard second difference; the rows next to the
/// boundary eliminate the ghost value implied by a second-order one-sided
/// zero-derivative condition.
pub fn laplacian_matrix(grid: &Grid) -> Result<DMatrix<f64>> {
    let n = require_1d(grid, "laplacian_matrix")?;
    let h2 = grid.h() * grid.h();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        if i == 0 {
            m[(0, 0)] = 2.0 / (3.0 * h2);
            m[(0, 1)] = -2.0 / (3.0 * h2);
        } else if i == n - 1 {
            m[(n - 1, n - 1)] = 2.0 / (3.0 * h2);
            m[(n - 1, n - 2)] = -2.0 / (3.0 * h2);
        } else {
            m[(i, i - 1)] = -1.0 / h2;
            m[(i, i)] = 2.0 / h2;
            m[(i, i + 1)] = -1.0 / h2;
        }
    }
    Ok(m)
}

/// Discrete first derivative on interior unknowns, centered differences with
/// the same ghost elimination at the two boundary-adjacent rows.
pub fn gradient_matrix(grid: &Grid) -> Result<DMatrix<f64>> {
    let n = require_1d(grid, "gradient_matrix")?;
    let h = grid.h();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        if i == 0 {
            m[(0, 0)] = -2.0 / (3.0 * h);
            m[(0, 1)] = 2.0 / (3.0 * h);
        } else if i == n - 1 {
            m[(n - 1, n - 2)] = -2.0 / (3.0 * h);
            m[(n - 1, n - 1)] = 2.0 / (3.0 * h);
        } else {
            m[(i, i - 1)] = -1.0 / (2.0 * h);
            m[(i, i + 1)] = 1.0 / (2.0 * h);
        }
    }
    Ok(m)
}

fn require_1d(grid: &Grid, op: &'static str) -> Result<usize> {
    match grid.domain() {
        Domain::Interval { .. } => {
            let n = grid.interior_nodes().len();
            if n < 2 {
                return Err(Error::GridConstruction("need at least two interior nodes".into()));
            }
            Ok(n)
        }
        Domain::Disk { .. } => Err(Error::DimensionUnsupported { op, dim: 2 }),
    }
}

/// How the mass beyond the truncation caps is treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TailMode {
    /// Far field approximated through the interpolant mean (production mode).
    FarFieldMean,
    /// Drop everything beyond the caps. Used by identity checks, which
    /// truncate both sides of an identity to the same exterior region.
    TruncatedNoTail,
}

/// Cell classification of one symmetric quadrature panel: whether x+z and
/// x-z land inside the domain over that z-panel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PanelClassCounts {
    pub both_inside: usize,
    pub plus_outside: usize,
    pub minus_outside: usize,
    pub both_outside: usize,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct AssemblyDiagnostics {
    pub classes: PanelClassCounts,
    pub merged_breakpoints: usize,
    pub panels: usize,
}

impl AssemblyDiagnostics {
    fn absorb(&mut self, other: &AssemblyDiagnostics) {
        self.classes.both_inside += other.classes.both_inside;
        self.classes.plus_outside += other.classes.plus_outside;
        self.classes.minus_outside += other.classes.minus_outside;
        self.classes.both_outside += other.classes.both_outside;
        self.merged_breakpoints += other.merged_breakpoints;
        self.panels += other.panels;
    }
}

/// Second-difference coefficients at interior node `i`, with the zero-flux
/// ghost eliminated at the two boundary-adjacent nodes. Shared between the
/// operator's inner-zone model and the brute-force oracle.
pub(crate) fn curvature_coeffs(n: usize, i: usize) -> Vec<(usize, f64)> {
    if i == 0 {
        vec![(0, -2.0 / 3.0), (1, 2.0 / 3.0)]
    } else if i == n - 1 {
        vec![(n - 1, -2.0 / 3.0), (n - 2, 2.0 / 3.0)]
    } else {
        vec![(i - 1, 1.0), (i, -2.0), (i + 1, 1.0)]
    }
}

/// Truncation caps of the two sides as seen from interior node `i`.
pub(crate) fn side_caps(grid: &Grid, i: usize) -> (f64, f64) {
    let (a, b) = match grid.domain() {
        Domain::Interval { a, b } => (*a, *b),
        _ => unreachable!("1D operator"),
    };
    let xi = grid.interior_nodes()[i].scalar();
    ((b - xi) + grid.r_trunc(), (xi - a) + grid.r_trunc())
}

/// Breakpoints of z -> u~(x_i +- z) on [h, max cap]: node offsets, boundary
/// crossings, shell offsets, and the two caps. Every kink of the piecewise
/// linear extended field lies on a breakpoint, so panels never straddle one.
pub(crate) fn z_breakpoints(grid: &Grid, i: usize) -> (Vec<f64>, usize) {
    let (a, b) = match grid.domain() {
        Domain::Interval { a, b } => (*a, *b),
        _ => unreachable!("1D operator"),
    };
    let xi = grid.interior_nodes()[i].scalar();
    let (cap_plus, cap_minus) = side_caps(grid, i);
    let z_max = cap_plus.max(cap_minus);
    let mut bp = Breakpoints::new(grid.h(), z_max);
    for p in grid.interior_nodes() {
        bp.insert((p.scalar() - xi).abs());
    }
    for (dist, cap) in [(b - xi, cap_plus), (xi - a, cap_minus)] {
        bp.insert(dist);
        for &d in grid.shells() {
            bp.insert(dist + d);
        }
        bp.insert(cap);
    }
    bp.finish(1e-12 * z_max)
}

/// Where one quadrature contribution reads the extended field.
enum Target {
    /// Interpolant at a point of the closed domain (two hat coefficients).
    Interp([(usize, f64); 2]),
    /// A single interior node value.
    Node(usize),
    /// A cached exterior node value (index into the grid's exterior list).
    Shell(usize),
    /// The interpolant mean over the domain.
    Mean,
}

struct Event {
    w: f64,
    target: Target,
}

/// Fractional Laplacian of extended fields on a fixed grid. Construction
/// precomputes the extension rows at every exterior node and the interpolant
/// mean row, so both pointwise evaluation and dense assembly are cheap.
pub struct FracOperator {
    grid: Arc<Grid>,
    params: FracParams,
    policy: QuadPolicy,
    mode: TailMode,
    /// extension coefficients over interior unknowns, one row per exterior node
    e_rows: Vec<Vec<f64>>,
    mean_row: Vec<f64>,
}

impl FracOperator {
    pub fn new(grid: Arc<Grid>, params: FracParams, policy: QuadPolicy, mode: TailMode) -> Result<Self> {
        let n = require_1d(&grid, "frac_laplacian_extended")?;
        if params.dim() != 1 {
            return Err(Error::InvalidParameter(
                "fractional operator parameters must be one-dimensional".into(),
            ));
        }
        let e_rows: Result<Vec<Vec<f64>>> = grid
            .exterior_nodes()
            .par_iter()
            .map(|p| extension_row(&grid, &params, policy, p.scalar()))
            .collect();
        // Mean of the canonical interpolant: trapezoid weights plus the
        // extrapolated end-cell corrections, scaled to unit total mass.
        let mut mean = vec![0.0; n];
        for j in 0..n - 1 {
            mean[j] += 0.5;
            mean[j + 1] += 0.5;
        }
        mean[0] += 1.5;
        mean[1] -= 0.5;
        mean[n - 1] += 1.5;
        mean[n - 2] -= 0.5;
        let scale = grid.h() / grid.domain().diameter();
        for c in &mut mean {
            *c *= scale;
        }
        Ok(FracOperator { grid, params, policy, mode, e_rows: e_rows?, mean_row: mean })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn params(&self) -> &FracParams {
        &self.params
    }

    /// Quadrature events for the operator at interior node `i`, without the
    /// normalization constant.
    fn events(&self, i: usize) -> Result<(Vec<Event>, AssemblyDiagnostics)> {
        let grid = &self.grid;
        let (a, b) = match grid.domain() {
            Domain::Interval { a, b } => (*a, *b),
            _ => unreachable!("checked in new()"),
        };
        let n = grid.interior_nodes().len();
        let h = grid.h();
        let s = self.params.s();
        let xi = grid.interior_nodes()[i].scalar();
        let (cap_plus, cap_minus) = side_caps(grid, i);

        let mut events = Vec::new();
        let mut diag = AssemblyDiagnostics::default();

        // Inner zone [0, h]: discrete curvature model. The second difference
        // at the boundary-adjacent nodes eliminates the zero-flux ghost.
        let inner = -h.powf(-2.0 * s) / (2.0 - 2.0 * s);
        for (j, c) in curvature_coeffs(n, i) {
            events.push(Event { w: inner * c, target: Target::Node(j) });
        }

        // Panel zone: breakpoints at every kink of z -> u~(x +- z).
        let (breaks, merged) = z_breakpoints(grid, i);
        diag.merged_breakpoints = merged;
        let rule = QuadratureRule::from_breakpoints(&breaks, self.policy.order)?;

        let shell_count = grid.shells().len();
        // exterior node layout: left block (delta ascending), right block
        let ext_target = |side_plus: bool, delta: f64| -> (Target, Target, f64) {
            let shells = grid.shells();
            let base = if side_plus { shell_count } else { 0 };
            let bcoord = if side_plus { b } else { a };
            let k = shells.partition_point(|&d| d < delta);
            if k == 0 {
                // between the boundary and the innermost shell
                let t = delta / shells[0];
                (
                    Target::Interp(GridFunction::basis1(grid, bcoord)),
                    Target::Shell(base),
                    t,
                )
            } else {
                let k = k.min(shell_count - 1);
                let lo = shells[k - 1];
                let hi = shells[k];
                let t = (delta - lo) / (hi - lo);
                (Target::Shell(base + k - 1), Target::Shell(base + k), t)
            }
        };

        let order = self.policy.order;
        for (p, chunk) in rule.nodes.chunks(order).enumerate() {
            let wchunk = &rule.weights[p * order..p * order + chunk.len()];
            let z_lo = breaks[p];
            let z_hi = breaks[p + 1];
            let zmid = 0.5 * (z_lo + z_hi);
            let plus_inside = xi + zmid < b;
            let minus_inside = xi - zmid > a;
            match (plus_inside, minus_inside) {
                (true, true) => diag.classes.both_inside += 1,
                (false, true) => diag.classes.plus_outside += 1,
                (true, false) => diag.classes.minus_outside += 1,
                (false, false) => diag.classes.both_outside += 1,
            }
            diag.panels += 1;
            for (&z, &w) in chunk.iter().zip(wchunk) {
                let k = w * z.powf(-1.0 - 2.0 * s);
                // plus side
                if z_hi <= cap_plus * (1.0 + 1e-12) {
                    events.push(Event { w: k, target: Target::Node(i) });
                    if plus_inside {
                        events.push(Event {
                            w: -k,
                            target: Target::Interp(GridFunction::basis1(grid, xi + z)),
                        });
                    } else {
                        let (t0, t1, t) = ext_target(true, (xi + z) - b);
                        events.push(Event { w: -k * (1.0 - t), target: t0 });
                        events.push(Event { w: -k * t, target: t1 });
                    }
                }
                // minus side
                if z_hi <= cap_minus * (1.0 + 1e-12) {
                    events.push(Event { w: k, target: Target::Node(i) });
                    if minus_inside {
                        events.push(Event {
                            w: -k,
                            target: Target::Interp(GridFunction::basis1(grid, xi - z)),
                        });
                    } else {
                        let (t0, t1, t) = ext_target(false, a - (xi - z));
                        events.push(Event { w: -k * (1.0 - t), target: t0 });
                        events.push(Event { w: -k * t, target: t1 });
                    }
                }
            }
        }

        if self.mode == TailMode::FarFieldMean {
            for cap in [cap_plus, cap_minus] {
                let mass = cap.powf(-2.0 * s) / (2.0 * s);
                events.push(Event { w: mass, target: Target::Node(i) });
                events.push(Event { w: -mass, target: Target::Mean });
            }
        }
        Ok((events, diag))
    }

    /// Pointwise evaluation using the exterior cache of an extended field.
    /// The cache must match this operator's s, truncation radius, and grid.
    pub fn apply_cached(&self, u_ext: &GridFunction, i: usize) -> Result<f64> {
        if i >= self.grid.interior_nodes().len() {
            return Err(Error::NotInterior);
        }
        let cache = u_ext.exterior_checked(self.params.s(), self.grid.r_trunc())?;
        let v = u_ext.values();
        let mean: f64 = self.mean_row.iter().zip(v).map(|(&c, &x)| c * x).sum();
        let (events, _) = self.events(i)?;
        let mut acc = 0.0;
        for e in &events {
            let val = match e.target {
                Target::Interp(pairs) => pairs.iter().map(|&(j, c)| c * v[j]).sum(),
                Target::Node(j) => v[j],
                Target::Shell(k) => cache[k],
                Target::Mean => mean,
            };
            acc += e.w * val;
        }
        Ok(self.params.c_ns() * acc)
    }

    /// Dense row of the operator over the interior unknowns.
    pub fn row(&self, i: usize) -> Result<(Vec<f64>, AssemblyDiagnostics)> {
        let n = self.grid.interior_nodes().len();
        if i >= n {
            return Err(Error::NotInterior);
        }
        let (events, diag) = self.events(i)?;
        let mut row = vec![0.0; n];
        for e in &events {
            match e.target {
                Target::Interp(pairs) => {
                    for (j, c) in pairs {
                        row[j] += e.w * c;
                    }
                }
                Target::Node(j) => row[j] += e.w,
                Target::Shell(k) => {
                    for (r, &c) in row.iter_mut().zip(&self.e_rows[k]) {
                        *r += e.w * c;
                    }
                }
                Target::Mean => {
                    for (r, &c) in row.iter_mut().zip(&self.mean_row) {
                        *r += e.w * c;
                    }
                }
            }
        }
        for r in &mut row {
            *r *= self.params.c_ns();
        }
        // Difference-form normalization: the operator annihilates constants by
        // definition, so the accumulated rounding residue of the row sum is
        // projected onto the diagonal.
        let residue: f64 = row.iter().sum();
        row[i] -= residue;
        Ok((row, diag))
    }

    /// Dense matrix of the operator, rows assembled in parallel.
    pub fn matrix(&self) -> Result<(DMatrix<f64>, AssemblyDiagnostics)> {
        let n = self.grid.interior_nodes().len();
        let rows: Result<Vec<(Vec<f64>, AssemblyDiagnostics)>> =
            (0..n).into_par_iter().map(|i| self.row(i)).collect();
        let rows = rows?;
        let mut m = DMatrix::zeros(n, n);
        let mut diag = AssemblyDiagnostics::default();
        for (i, (row, d)) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
            diag.absorb(d);
        }
        Ok((m, diag))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extension::extend;
    use crate::geometry::{build_grid, ShellPolicy};
    use approx::assert_relative_eq;

    fn unit_grid(h: f64) -> Arc<Grid> {
        let d = Domain::interval(0.0, 1.0).unwrap();
        Arc::new(build_grid(&d, h, 8.0, ShellPolicy::default()).unwrap())
    }

    // cubic with zero derivative at both ends of (0,1)
    fn neumann_cubic(x: f64) -> f64 {
        x * x * (3.0 - 2.0 * x)
    }

    #[test]
    fn laplacian_interior_rows_exact_for_compatible_cubic() {
        let g = unit_grid(0.1);
        let m = laplacian_matrix(&g).unwrap();
        let u: Vec<f64> = g.interior_xs().iter().map(|&x| neumann_cubic(x)).collect();
        let exact: Vec<f64> = g.interior_xs().iter().map(|&x| -(6.0 - 12.0 * x)).collect();
        let n = u.len();
        for i in 1..n - 1 {
            let val: f64 = (0..n).map(|j| m[(i, j)] * u[j]).sum();
            assert_relative_eq!(val, exact[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn laplacian_boundary_rows_converge() {
        // ghost elimination at the ends is O(h) for smooth compatible data
        let mut errs = Vec::new();
        for h in [0.1, 0.05, 0.025] {
            let g = unit_grid(h);
            let m = laplacian_matrix(&g).unwrap();
            let u: Vec<f64> = g.interior_xs().iter().map(|&x| neumann_cubic(x)).collect();
            let n = u.len();
            let val: f64 = (0..n).map(|j| m[(0, j)] * u[j]).sum();
            let x0 = g.interior_xs()[0];
            errs.push((val - (-(6.0 - 12.0 * x0))).abs());
        }
        assert!(errs[1] < 0.75 * errs[0], "{errs:?}");
        assert!(errs[2] < 0.75 * errs[1], "{errs:?}");
    }

    #[test]
    fn local_stencils_annihilate_constants_exactly() {
        let g = unit_grid(0.1);
        let lap = laplacian_matrix(&g).unwrap();
        let grad = gradient_matrix(&g).unwrap();
        let n = g.interior_nodes().len();
        for i in 0..n {
            let lr: f64 = (0..n).map(|j| lap[(i, j)]).sum();
            let gr: f64 = (0..n).map(|j| grad[(i, j)]).sum();
            assert_eq!(lr, 0.0, "laplacian row {i}");
            assert_eq!(gr, 0.0, "gradient row {i}");
        }
    }

    #[test]
    fn gradient_interior_rows_exact_for_quadratics() {
        let g = unit_grid(0.1);
        let m = gradient_matrix(&g).unwrap();
        let u: Vec<f64> = g.interior_xs().iter().map(|&x| x * x).collect();
        let n = u.len();
        for i in 1..n - 1 {
            let val: f64 = (0..n).map(|j| m[(i, j)] * u[j]).sum();
            assert_relative_eq!(val, 2.0 * g.interior_xs()[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn frac_rows_annihilate_constants() {
        let g = unit_grid(0.1);
        let p = FracParams::new(1, 0.6).unwrap();
        let op = FracOperator::new(g, p, QuadPolicy::default(), TailMode::FarFieldMean).unwrap();
        let (m, _) = op.matrix().unwrap();
        for i in 0..m.nrows() {
            let row_sum: f64 = (0..m.ncols()).map(|j| m[(i, j)]).sum();
            let row_mass: f64 = (0..m.ncols()).map(|j| m[(i, j)].abs()).sum();
            assert!(
                row_sum.abs() <= 1e-14 * row_mass.max(1.0),
                "row {i}: sum {row_sum}, mass {row_mass}"
            );
        }
    }

    #[test]
    fn row_and_cached_evaluation_agree() {
        let g = unit_grid(0.1);
        let p = FracParams::new(1, 0.4).unwrap();
        let u = GridFunction::from_fn(g.clone(), |p| (3.0 * p.scalar()).sin()).unwrap();
        let ext = extend(&u, &p, QuadPolicy::default()).unwrap();
        let op =
            FracOperator::new(g.clone(), p, QuadPolicy::default(), TailMode::FarFieldMean).unwrap();
        for i in [0, 3, 8] {
            let (row, _) = op.row(i).unwrap();
            let via_row: f64 = row.iter().zip(u.values()).map(|(&r, &v)| r * v).sum();
            let direct = op.apply_cached(&ext, i).unwrap();
            // row assembly uses extension rows, pointwise uses the cache; both
            // come from the same quadrature so they agree to rounding
            assert_relative_eq!(via_row, direct, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn operator_positive_at_strict_interior_maximum() {
        let g = unit_grid(0.05);
        let p = FracParams::new(1, 0.5).unwrap();
        let u = GridFunction::from_fn(g.clone(), |p| {
            (std::f64::consts::PI * p.scalar()).sin()
        })
        .unwrap();
        let ext = extend(&u, &p, QuadPolicy::default()).unwrap();
        let op = FracOperator::new(g, p, QuadPolicy::default(), TailMode::FarFieldMean).unwrap();
        // maximum sits at the middle node
        let imax = ext
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let v = op.apply_cached(&ext, imax).unwrap();
        assert!(v > 0.0, "operator at the maximum: {v}");
    }

    #[test]
    fn stale_cache_is_rejected_by_the_operator() {
        let g = unit_grid(0.1);
        let p3 = FracParams::new(1, 0.3).unwrap();
        let p5 = FracParams::new(1, 0.5).unwrap();
        let u = GridFunction::from_fn(g.clone(), |p| p.scalar()).unwrap();
        let ext3 = extend(&u, &p3, QuadPolicy::default()).unwrap();
        let op5 =
            FracOperator::new(g, p5, QuadPolicy::default(), TailMode::FarFieldMean).unwrap();
        assert!(matches!(
            op5.apply_cached(&ext3, 2),
            Err(Error::StaleExteriorCache { .. })
        ));
    }

    #[test]
    fn tail_mode_changes_value_by_roughly_the_tail_mass() {
        let g = unit_grid(0.1);
        let p = FracParams::new(1, 0.3).unwrap();
        let u = GridFunction::from_fn(g.clone(), |p| p.scalar()).unwrap();
        let ext = extend(&u, &p, QuadPolicy::default()).unwrap();
        let full = FracOperator::new(g.clone(), p, QuadPolicy::default(), TailMode::FarFieldMean)
            .unwrap();
        let bare = FracOperator::new(g, p, QuadPolicy::default(), TailMode::TruncatedNoTail)
            .unwrap();
        let i = 4;
        let vf = full.apply_cached(&ext, i).unwrap();
        let vb = bare.apply_cached(&ext, i).unwrap();
        let diff = (vf - vb).abs();
        // tail scale: C * |u_i - mean| * cap^(-2s)/s with caps near 8..9
        let bound = p.c_ns() * 1.0 * 8f64.powf(-0.6) / 0.3;
        assert!(diff > 0.0 && diff < bound, "diff {diff} vs bound {bound}");
    }

    #[test]
    fn diagnostics_classify_panels_sensibly() {
        let g = unit_grid(0.1);
        let p = FracParams::new(1, 0.5).unwrap();
        let op = FracOperator::new(g, p, QuadPolicy::default(), TailMode::FarFieldMean).unwrap();
        // center node: symmetric, sides leave the domain together at z ~ 0.5
        let (_, dc) = op.row(4).unwrap();
        assert!(dc.classes.both_inside > 0);
        assert!(dc.classes.both_outside > 0);
        // node next to the right boundary: plus side leaves almost immediately
        let (_, dr) = op.row(8).unwrap();
        assert!(dr.classes.plus_outside > 0);
        assert!(dr.panels > 0);
    }

    #[test]
    fn operators_reject_disks() {
        let d = Domain::disk([0.0, 0.0], 1.0).unwrap();
        let g = Arc::new(build_grid(&d, 0.25, 4.0, ShellPolicy::default()).unwrap());
        assert!(matches!(
            laplacian_matrix(&g),
            Err(Error::DimensionUnsupported { dim: 2, .. })
        ));
        let p = FracParams::new(1, 0.5).unwrap();
        assert!(FracOperator::new(g, p, QuadPolicy::default(), TailMode::FarFieldMean).is_err());
    }
}
