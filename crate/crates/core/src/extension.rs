//! Grid functions and the exterior extension: interior values are kept, and
//! every exterior point x carries the kernel-weighted average
//!
//! ```text
//!   u_1(x) = ( int_Omega u(y) |x-y|^(-N-2s) dy ) / ( int_Omega |x-y|^(-N-2s) dy )
//! ```
//!
//! computed with shared quadrature nodes in numerator and denominator. The
//! nonlocal flux of the extended field vanishes outside the domain by
//! construction; `neumann_derivative` measures the discrete residual of that
//! statement with an independent quadrature. `exterior_gradient_rate` fits
//! the blow-up rate of |grad u_1| along the exterior shell sequence.

use crate::fitting::{compare_rate_models, RateComparison};
use crate::geometry::{Domain, Grid, Point};
use crate::kernels::{gauss_legendre, Breakpoints, FracParams, QuadPolicy, QuadratureRule};
use crate::{Error, Result};
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::Arc;

/// Exterior values cached on a grid function, tagged with the parameters they
/// were built from so staleness is detectable.
#[derive(Clone, Debug)]
pub struct ExteriorCache {
    s: f64,
    r_trunc: f64,
    grid_token: u64,
    values: Vec<f64>,
}

impl ExteriorCache {
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Interior nodal values on a grid, evaluated in between nodes by the
/// canonical interpolant: piecewise linear, with linear extrapolation on the
/// final cell toward each boundary (1D); bilinear with nearest-node fallback
/// near the rim (2D).
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
    lattice: Option<Arc<HashMap<(i64, i64), usize>>>,
    cache: Option<ExteriorCache>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.interior_nodes().len() {
            return Err(Error::InvalidParameter(format!(
                "value count {} does not match interior node count {}",
                values.len(),
                grid.interior_nodes().len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite grid value".into()));
        }
        let lattice = match grid.domain() {
            Domain::Interval { .. } => None,
            Domain::Disk { center, .. } => {
                let h = grid.h();
                let mut map = HashMap::new();
                for (idx, p) in grid.interior_nodes().iter().enumerate() {
                    let i = ((p.coord(0) - center[0]) / h).round() as i64;
                    let j = ((p.coord(1) - center[1]) / h).round() as i64;
                    map.insert((i, j), idx);
                }
                Some(Arc::new(map))
            }
        };
        Ok(GridFunction { grid, values, lattice, cache: None })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&Point) -> f64) -> Result<Self> {
        let values = grid.interior_nodes().iter().map(|p| f(p)).collect();
        GridFunction::new(grid, values)
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Result<Self> {
        let n = grid.interior_nodes().len();
        GridFunction::new(grid, vec![c; n])
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        self.cache = None;
        &mut self.values
    }

    /// Interpolant value at a point of the closed domain.
    pub fn eval(&self, p: &Point) -> f64 {
        match self.grid.domain() {
            Domain::Interval { .. } => self.eval1(p.scalar()),
            Domain::Disk { .. } => self.eval2(p.coord(0), p.coord(1)),
        }
    }

    /// 1D interpolant. The clamped cell index makes the end cells linear
    /// extrapolations of the outermost node pairs.
    pub fn eval1(&self, x: f64) -> f64 {
        let xs = self.grid.interior_nodes();
        let n = xs.len();
        debug_assert!(n >= 2);
        let x0 = xs[0].scalar();
        let h = self.grid.h();
        let j = (((x - x0) / h).floor() as i64).clamp(0, n as i64 - 2) as usize;
        let t = (x - xs[j].scalar()) / h;
        let a = self.values[j];
        let b = self.values[j + 1];
        // a + t*(b - a) keeps constants exact in floating point
        a + t * (b - a)
    }

    /// Interpolation coefficients of `eval1`: pairs (node index, weight).
    pub fn basis1(grid: &Grid, x: f64) -> [(usize, f64); 2] {
        let xs = grid.interior_nodes();
        let n = xs.len();
        let x0 = xs[0].scalar();
        let h = grid.h();
        let j = (((x - x0) / h).floor() as i64).clamp(0, n as i64 - 2) as usize;
        let t = (x - xs[j].scalar()) / h;
        [(j, 1.0 - t), (j + 1, t)]
    }

    fn eval2(&self, x: f64, y: f64) -> f64 {
        let (center, _) = match self.grid.domain() {
            Domain::Disk { center, radius } => (center, radius),
            _ => unreachable!(),
        };
        let h = self.grid.h();
        let map = self.lattice.as_ref().expect("lattice map present for disks");
        let fi = (x - center[0]) / h;
        let fj = (y - center[1]) / h;
        let i = fi.floor() as i64;
        let j = fj.floor() as i64;
        let corners = [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)];
        let vals: Vec<Option<usize>> = corners.iter().map(|c| map.get(c).copied()).collect();
        if vals.iter().all(|v| v.is_some()) {
            let s = fi - i as f64;
            let t = fj - j as f64;
            let v00 = self.values[vals[0].unwrap()];
            let v10 = self.values[vals[1].unwrap()];
            let v01 = self.values[vals[2].unwrap()];
            let v11 = self.values[vals[3].unwrap()];
            let lo = v00 + s * (v10 - v00);
            let hi = v01 + s * (v11 - v01);
            return lo + t * (hi - lo);
        }
        // Rim fallback: nearest existing lattice node in an expanding window.
        for radius in 0..=8i64 {
            let mut best: Option<(f64, usize)> = None;
            for di in -radius..=radius {
                for dj in -radius..=radius {
                    if let Some(&idx) = map.get(&(i + di, j + dj)) {
                        let p = self.grid.interior_nodes()[idx];
                        let d2 = (p.coord(0) - x).powi(2) + (p.coord(1) - y).powi(2);
                        if best.map_or(true, |(bd, _)| d2 < bd) {
                            best = Some((d2, idx));
                        }
                    }
                }
            }
            if let Some((_, idx)) = best {
                return self.values[idx];
            }
        }
        panic!("no lattice node within 8 cells of ({x}, {y}); grid too coarse");
    }

    /// Range of the interpolant over the closed domain: nodal values plus,
    /// in 1D, the extrapolated boundary values (which can exceed the nodal
    /// range by O(h^2) for curved data).
    pub fn range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if let Domain::Interval { a, b } = self.grid.domain() {
            for x in [*a, *b] {
                let v = self.eval1(x);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }

    pub fn has_cache(&self) -> bool {
        self.cache.is_some()
    }

    pub fn cache(&self) -> Result<&ExteriorCache> {
        self.cache.as_ref().ok_or(Error::MissingExteriorCache)
    }

    /// Exterior values checked against the parameters the caller is using.
    pub fn exterior_checked(&self, s: f64, r_trunc: f64) -> Result<&[f64]> {
        let c = self.cache()?;
        if c.s != s || c.r_trunc != r_trunc || c.grid_token != self.grid.token() {
            return Err(Error::StaleExteriorCache {
                cached_s: c.s,
                cached_r: c.r_trunc,
                cached_grid: c.grid_token,
                want_s: s,
                want_r: r_trunc,
                want_grid: self.grid.token(),
            });
        }
        Ok(&c.values)
    }

    /// Overwrite one cached exterior value (diagnostic tool for probing the
    /// sign behavior of the nonlocal flux).
    pub fn override_exterior_value(&mut self, idx: usize, v: f64) -> Result<()> {
        let c = self.cache.as_mut().ok_or(Error::MissingExteriorCache)?;
        if idx >= c.values.len() {
            return Err(Error::InvalidParameter(format!("exterior index {idx} out of range")));
        }
        c.values[idx] = v;
        Ok(())
    }
}

/// Quadrature panels over a 1D domain for a kernel centered at exterior x:
/// breakpoints at every interior node (the interpolant's kinks) plus dyadic
/// refinement of the cell adjacent to the near boundary, down to about a
/// quarter of the boundary distance.
pub(crate) fn omega_panels_1d(grid: &Grid, x: f64, order: usize) -> Result<QuadratureRule> {
    let (a, b) = match grid.domain() {
        Domain::Interval { a, b } => (*a, *b),
        _ => unreachable!("1D panel builder"),
    };
    let h = grid.h();
    let delta = grid.domain().distance_to_boundary(&Point::one(x));
    let mut bp = Breakpoints::new(a, b);
    for p in grid.interior_nodes() {
        bp.insert(p.scalar());
    }
    let floor = (delta / 4.0).max(1e-14);
    let mut w = h / 2.0;
    while w > floor {
        if x > b {
            bp.insert(b - w);
        } else {
            bp.insert(a + w);
        }
        w *= 0.5;
    }
    let (pts, _merged) = bp.finish(1e-13 * (b - a));
    QuadratureRule::from_breakpoints(&pts, order)
}

/// Extension value at one exterior point, reference quadrature. Computed in
/// difference form around the interpolant value at the nearest boundary
/// point, so a constant field extends to exactly that constant.
pub fn extension_value(u: &GridFunction, params: &FracParams, policy: QuadPolicy, x: &Point) -> Result<f64> {
    let grid = u.grid();
    let domain = grid.domain();
    if !domain.is_exterior(x) {
        return Err(Error::NotExterior { delta: domain.distance_to_boundary(x) });
    }
    let xhat = domain.nearest_boundary_point(x)?;
    let u_ref = u.eval(&xhat);
    match domain {
        Domain::Interval { .. } => {
            let xv = x.scalar();
            let rule = omega_panels_1d(grid, xv, policy.order)?;
            let mut num = 0.0;
            let mut den = 0.0;
            for (&y, &w) in rule.nodes.iter().zip(&rule.weights) {
                let k = w * params.kernel((xv - y).abs());
                num += k * (u.eval1(y) - u_ref);
                den += k;
            }
            Ok(u_ref + num / den)
        }
        Domain::Disk { center, radius } => {
            let rays = crate::kernels::disk_ray_fan(*center, *radius, x, policy)?;
            let gl = gauss_legendre(policy.order);
            let (gx, gw) = (&gl.0, &gl.1);
            let mut num = 0.0;
            let mut den = 0.0;
            for ray in &rays {
                // radial panels graded toward the chord entry point
                let len = ray.t_out - ray.t_in;
                if len <= 0.0 {
                    continue;
                }
                let mut fracs = vec![0.0, 1.0];
                let mut f = 0.5;
                for _ in 0..policy.radial_grade {
                    fracs.push(f);
                    f *= 0.5;
                }
                fracs.sort_by(|p, q| p.partial_cmp(q).unwrap());
                for pair in fracs.windows(2) {
                    let t0 = ray.t_in + len * pair[0];
                    let t1 = ray.t_in + len * pair[1];
                    let mid = 0.5 * (t0 + t1);
                    let half = 0.5 * (t1 - t0);
                    for (gn, gwt) in gx.iter().zip(gw) {
                        let t = mid + half * gn;
                        // polar measure: t^(-2-2s) * t dt dtheta
                        let k = ray.weight * half * gwt * t.powf(-1.0 - 2.0 * params.s());
                        let y = Point::two(
                            x.coord(0) + t * ray.dir[0],
                            x.coord(1) + t * ray.dir[1],
                        );
                        num += k * (u.eval(&y) - u_ref);
                        den += k;
                    }
                }
            }
            Ok(u_ref + num / den)
        }
    }
}

/// Linear coefficients of `extension_value` over the interior unknowns:
/// u_1(x) = row . u for every grid function on this grid. 1D only.
pub fn extension_row(grid: &Grid, params: &FracParams, policy: QuadPolicy, x: f64) -> Result<Vec<f64>> {
    let domain = grid.domain();
    let px = Point::one(x);
    if domain.dim() != 1 {
        return Err(Error::DimensionUnsupported { op: "extension_row", dim: domain.dim() });
    }
    if !domain.is_exterior(&px) {
        return Err(Error::NotExterior { delta: domain.distance_to_boundary(&px) });
    }
    let n = grid.interior_nodes().len();
    let rule = omega_panels_1d(grid, x, policy.order)?;
    let mut row = vec![0.0; n];
    let mut den = 0.0;
    for (&y, &w) in rule.nodes.iter().zip(&rule.weights) {
        let k = w * params.kernel((x - y).abs());
        for (idx, c) in GridFunction::basis1(grid, y) {
            row[idx] += k * c;
        }
        den += k;
    }
    for r in &mut row {
        *r /= den;
    }
    Ok(row)
}

/// Fill the exterior cache at every exterior node of the grid.
pub fn extend(u: &GridFunction, params: &FracParams, policy: QuadPolicy) -> Result<GridFunction> {
    if params.dim() != u.grid().domain().dim() {
        return Err(Error::InvalidParameter(format!(
            "parameter dimension {} does not match domain dimension {}",
            params.dim(),
            u.grid().domain().dim()
        )));
    }
    let nodes = u.grid().exterior_nodes();
    let values: Result<Vec<f64>> = nodes
        .par_iter()
        .map(|p| extension_value(u, params, policy, p))
        .collect();
    let mut out = u.clone();
    out.cache = Some(ExteriorCache {
        s: params.s(),
        r_trunc: u.grid().r_trunc(),
        grid_token: u.grid().token(),
        values: values?,
    });
    Ok(out)
}

/// Evaluate an extended 1D field anywhere within the truncation collar.
/// Interior points use the canonical interpolant; exterior points the
/// piecewise-linear interpolant of the cached shell values, anchored at the
/// boundary trace of the interpolant. This is the field the discrete
/// operators integrate.
pub fn eval_extended(u_ext: &GridFunction, x: f64, s: f64, r_trunc: f64) -> Result<f64> {
    let grid = u_ext.grid();
    let (a, b) = match grid.domain() {
        Domain::Interval { a, b } => (*a, *b),
        d => return Err(Error::DimensionUnsupported { op: "eval_extended", dim: d.dim() }),
    };
    if x >= a && x <= b {
        return Ok(u_ext.eval1(x));
    }
    let cache = u_ext.exterior_checked(s, r_trunc)?;
    let shells = grid.shells();
    let m = shells.len();
    let (delta, base, anchor) = if x < a { (a - x, 0, a) } else { (x - b, m, b) };
    if delta > r_trunc * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "point at boundary distance {delta} is beyond the truncation radius {r_trunc}"
        )));
    }
    let k = shells.partition_point(|&d| d < delta);
    if k == 0 {
        let t = delta / shells[0];
        Ok(u_ext.eval1(anchor) * (1.0 - t) + cache[base] * t)
    } else {
        let k = k.min(m - 1);
        let t = (delta - shells[k - 1]) / (shells[k] - shells[k - 1]);
        Ok(cache[base + k - 1] * (1.0 - t) + cache[base + k] * t)
    }
}

/// Discrete nonlocal flux at an exterior point x:
///
/// ```text
///   N_s u(x) = C_{N,s} int_Omega (u(x) - u(y)) |x-y|^(-N-2s) dy
/// ```
///
/// The exterior value u(x) is taken from the cache when x coincides with an
/// exterior node (so manual overrides are honored) and recomputed with the
/// reference quadrature otherwise. The integral itself uses a midpoint rule
/// on the grid cells split into `midpoint_refine` subcells, deliberately
/// independent of the reference quadrature: for extended fields the result
/// is a pure quadrature residual that shrinks as O(width^2).
pub fn neumann_derivative(
    u_ext: &GridFunction,
    x: &Point,
    params: &FracParams,
    policy: QuadPolicy,
    midpoint_refine: usize,
) -> Result<f64> {
    let grid = u_ext.grid();
    let domain = grid.domain();
    if !domain.is_exterior(x) {
        return Err(Error::NotExterior { delta: domain.distance_to_boundary(x) });
    }
    let cache = u_ext.cache()?;
    let tol = 1e-12 * domain.diameter();
    let ux = grid
        .exterior_nodes()
        .iter()
        .position(|p| p.distance(x) <= tol)
        .map(|i| cache.values[i])
        .map_or_else(|| extension_value(u_ext, params, policy, x), Ok)?;
    let refine = midpoint_refine.max(1);
    let mut acc = 0.0;
    match domain {
        Domain::Interval { a, b } => {
            let xv = x.scalar();
            let cells = ((b - a) / grid.h()).round() as usize * refine;
            let w = (b - a) / cells as f64;
            for c in 0..cells {
                let y = a + (c as f64 + 0.5) * w;
                acc += w * params.kernel((xv - y).abs()) * (ux - u_ext.eval1(y));
            }
        }
        Domain::Disk { center, .. } => {
            // midpoint rule over fully interior lattice cells; the uncovered
            // rim band contributes an O(h) residual by design
            let h = grid.h() / refine as f64;
            let lattice = u_ext.lattice.as_ref().expect("disk lattice");
            let hg = grid.h();
            let mut seen = std::collections::HashSet::new();
            for (i, j) in lattice.keys() {
                for di in 0..refine as i64 {
                    for dj in 0..refine as i64 {
                        let key = (i * refine as i64 + di, j * refine as i64 + dj);
                        if !seen.insert(key) {
                            continue;
                        }
                        let y = Point::two(
                            center[0] + (key.0 as f64 + 0.5) * h - 0.5 * hg,
                            center[1] + (key.1 as f64 + 0.5) * h - 0.5 * hg,
                        );
                        if !domain.contains(&y) {
                            continue;
                        }
                        let r = x.distance(&y);
                        acc += h * h * params.kernel(r) * (ux - u_ext.eval(&y));
                    }
                }
            }
        }
    }
    Ok(params.c_ns() * acc)
}

/// Discrete W^{2,p} surrogate norm: nodal values together with first and
/// second difference quotients, in the p-mean weighted by cell volume.
pub fn w2p_surrogate_norm(u: &GridFunction, p: f64) -> f64 {
    let h = u.grid().h();
    let v = u.values();
    let n = v.len();
    let mut acc = 0.0;
    match u.grid().domain() {
        Domain::Interval { .. } => {
            for i in 0..n {
                let d1 = if i == 0 {
                    (v[1] - v[0]) / h
                } else if i == n - 1 {
                    (v[n - 1] - v[n - 2]) / h
                } else {
                    (v[i + 1] - v[i - 1]) / (2.0 * h)
                };
                let d2 = if i == 0 || i == n - 1 {
                    0.0
                } else {
                    (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h)
                };
                acc += h * (v[i].abs().powf(p) + d1.abs().powf(p) + d2.abs().powf(p));
            }
        }
        Domain::Disk { center, .. } => {
            let map = u.lattice.as_ref().expect("disk lattice");
            for (idx, pt) in u.grid().interior_nodes().iter().enumerate() {
                let i = ((pt.coord(0) - center[0]) / h).round() as i64;
                let j = ((pt.coord(1) - center[1]) / h).round() as i64;
                let mut term = v[idx].abs().powf(p);
                for (dl, dr) in [((-1, 0), (1, 0)), ((0, -1), (0, 1))] {
                    if let (Some(&l), Some(&r)) =
                        (map.get(&(i + dl.0, j + dl.1)), map.get(&(i + dr.0, j + dr.1)))
                    {
                        term += ((v[r] - v[l]) / (2.0 * h)).abs().powf(p);
                        term += ((v[r] - 2.0 * v[idx] + v[l]) / (h * h)).abs().powf(p);
                    }
                }
                acc += h * h * term;
            }
        }
    }
    acc.powf(1.0 / p)
}

/// Result of the exterior gradient rate measurement.
#[derive(Clone, Debug)]
pub enum GradientRate {
    /// The gradient vanishes along the shells (constant data).
    Flat,
    Fitted(GradientFit),
}

#[derive(Clone, Debug)]
pub struct GradientFit {
    pub slope: f64,
    /// Two standard errors of the fitted slope.
    pub band: f64,
    pub comparison: RateComparison,
    pub deltas: Vec<f64>,
    pub grads: Vec<f64>,
}

/// Magnitude of the exterior gradient of the extension along the outward ray
/// (right end in 1D, the +x radial direction for a disk), fitted against the
/// boundary distance over the inward shell window [h^2, h]. The field is
/// first normalized to surrogate norm <= 1; per-point gradients use centered
/// differences with step delta/4.
pub fn exterior_gradient_rate(
    u: &GridFunction,
    params: &FracParams,
    policy: QuadPolicy,
) -> Result<GradientRate> {
    let grid = u.grid().clone();
    let norm = w2p_surrogate_norm(u, 2.0);
    let scaled = if norm > 1.0 {
        let mut c = u.clone();
        c.cache = None;
        for v in &mut c.values {
            *v /= norm;
        }
        c
    } else {
        u.clone()
    };

    let h = grid.h();
    let window: Vec<f64> = grid
        .shells()
        .iter()
        .copied()
        .filter(|&d| d <= h * (1.0 + 1e-9))
        .collect();
    if window.len() < 5 {
        return Err(Error::InsufficientShells { have: window.len(), need: 5 });
    }

    let grad_at = |delta: f64| -> Result<f64> {
        let step = delta / 4.0;
        let (pp, pm) = match grid.domain() {
            Domain::Interval { b, .. } => {
                (Point::one(b + delta + step), Point::one(b + delta - step))
            }
            Domain::Disk { center, radius } => (
                Point::two(center[0] + radius + delta + step, center[1]),
                Point::two(center[0] + radius + delta - step, center[1]),
            ),
        };
        let vp = extension_value(&scaled, params, policy, &pp)?;
        let vm = extension_value(&scaled, params, policy, &pm)?;
        Ok(((vp - vm) / (2.0 * step)).abs())
    };

    let mut deltas = Vec::with_capacity(window.len());
    let mut grads = Vec::with_capacity(window.len());
    for &d in &window {
        deltas.push(d);
        grads.push(grad_at(d)?);
    }

    let scale = scaled.values().iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1e-300);
    let usable: Vec<(f64, f64)> = deltas
        .iter()
        .zip(&grads)
        .filter(|(_, &g)| g > 1e-9 * scale)
        .map(|(&d, &g)| (d, g))
        .collect();
    if usable.is_empty() {
        return Ok(GradientRate::Flat);
    }
    if usable.len() < 5 {
        return Err(Error::InsufficientShells { have: usable.len(), need: 5 });
    }
    let (ds, gs): (Vec<f64>, Vec<f64>) = usable.into_iter().unzip();
    // Log-model scale: comfortably larger than any shell distance, tied to
    // the exterior reach of the truncated geometry.
    let k_scale = 1.0 + 4.0 * grid.domain().diameter();
    let comparison = compare_rate_models(&ds, &gs, k_scale)?;
    Ok(GradientRate::Fitted(GradientFit {
        slope: comparison.power.slope,
        band: 2.0 * comparison.power.stderr_slope,
        comparison,
        deltas: ds,
        grads: gs,
    }))
}
