//! Singular-kernel machinery: the gamma function, the fractional
//! normalization constant, Gauss-Legendre panel quadrature, the boundary
//! weight F(x) = int_Omega |x-y|^(-N-2s) dy, general tail integrals, and the
//! induced interior kernel K_Omega.
//!
//! Kernel values here are in plain normalization (no C_{N,s} factor); the
//! constant is applied explicitly where an operator definition requires it.

use crate::geometry::{Domain, Point};
use crate::{Error, Result};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Lanczos approximation of the gamma function (g = 7, 9 terms), with the
/// reflection formula for arguments below 1/2. Relative accuracy ~1e-14 on
/// the range used here.
pub fn gamma_fn(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma_fn(1.0 - x))
    } else {
        let z = x - 1.0;
        let mut a = COEF[0];
        for (i, c) in COEF.iter().enumerate().skip(1) {
            a += c / (z + i as f64);
        }
        let t = z + G + 0.5;
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * a
    }
}

/// The constant in front of the fractional Laplacian:
/// pi^(-N/2) * 4^s * s * Gamma(N/2 + s) / Gamma(1 - s).
pub fn normalization_constant(dim: usize, s: f64) -> Result<f64> {
    check_dim_s(dim, s)?;
    let n = dim as f64;
    let pi = std::f64::consts::PI;
    Ok(pi.powf(-n / 2.0) * 4f64.powf(s) * s * gamma_fn(n / 2.0 + s) / gamma_fn(1.0 - s))
}

fn check_dim_s(dim: usize, s: f64) -> Result<()> {
    if dim != 1 && dim != 2 {
        return Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {dim}")));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParameter(format!("order s must lie strictly in (0,1), got {s}")));
    }
    Ok(())
}

/// Fractional order together with its cached normalization constant.
#[derive(Clone, Copy, Debug)]
pub struct FracParams {
    dim: usize,
    s: f64,
    c_ns: f64,
}

impl FracParams {
    pub fn new(dim: usize, s: f64) -> Result<Self> {
        let c_ns = normalization_constant(dim, s)?;
        Ok(FracParams { dim, s, c_ns })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn c_ns(&self) -> f64 {
        self.c_ns
    }

    /// Exponent of the kernel as a power of the distance: -(N + 2s).
    pub fn kernel_exponent(&self) -> f64 {
        -(self.dim as f64) - 2.0 * self.s
    }

    /// Plain kernel |r|^(-N-2s), without the normalization constant.
    pub fn kernel(&self, r: f64) -> f64 {
        debug_assert!(r > 0.0);
        r.powf(self.kernel_exponent())
    }
}

/// Integral of t^e over [lo, hi] with 0 < lo <= hi, including the
/// logarithmic branch at e = -1.
pub fn power_integral(e: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo > 0.0 && hi >= lo);
    if (e + 1.0).abs() < 1e-13 {
        (hi / lo).ln()
    } else {
        (hi.powf(e + 1.0) - lo.powf(e + 1.0)) / (e + 1.0)
    }
}

/// Mass of the plain kernel outside a ball: int_{|z| > r} |z|^(-N-2s) dz.
pub fn power_tail_mass(dim: usize, s: f64, r: f64) -> f64 {
    debug_assert!(r > 0.0);
    match dim {
        1 => 2.0 * r.powf(-2.0 * s) / (2.0 * s),
        2 => std::f64::consts::PI * r.powf(-2.0 * s) / s,
        _ => unreachable!("dimension checked at construction"),
    }
}

fn compute_gauss(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-like initial guess, then Newton on the Legendre recurrence.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 1..n {
                let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// Gauss-Legendre nodes and weights on [-1, 1], cached by order.
pub fn gauss_legendre(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("gauss cache poisoned");
    guard.entry(n).or_insert_with(|| Arc::new(compute_gauss(n))).clone()
}

/// Knobs for the quadrature builders. `order` is the Gauss order per panel;
/// the grade counts control geometric refinement toward singular points.
#[derive(Clone, Copy, Debug)]
pub struct QuadPolicy {
    pub order: usize,
    pub angular_grade: usize,
    pub radial_grade: usize,
    /// Smallest boundary distance resolved by graded exterior quadratures.
    pub z_floor: f64,
}

impl Default for QuadPolicy {
    fn default() -> Self {
        QuadPolicy { order: 10, angular_grade: 40, radial_grade: 12, z_floor: 1e-10 }
    }
}

/// A realized 1D quadrature rule: explicit nodes with plain-measure weights.
/// Invariant: all weights positive and summing to the covered length.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Gauss panels between consecutive breakpoints (sorted ascending).
    pub fn from_breakpoints(breaks: &[f64], order: usize) -> Result<Self> {
        if breaks.len() < 2 {
            return Err(Error::Quadrature("need at least two breakpoints".into()));
        }
        for w in breaks.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::Quadrature(format!(
                    "breakpoints must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        let gl = gauss_legendre(order);
        let (gx, gw) = (&gl.0, &gl.1);
        let mut nodes = Vec::with_capacity((breaks.len() - 1) * order);
        let mut weights = Vec::with_capacity((breaks.len() - 1) * order);
        for w in breaks.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let half = 0.5 * (w[1] - w[0]);
            for (x, wt) in gx.iter().zip(gw) {
                nodes.push(mid + half * x);
                weights.push(half * wt);
            }
        }
        Ok(QuadratureRule { nodes, weights })
    }

    pub fn covered_measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Check the rule invariant against the expected covered measure.
    pub fn validate(&self, expected_measure: f64) -> Result<()> {
        if self.weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::Quadrature("non-positive quadrature weight".into()));
        }
        let sum = self.covered_measure();
        if (sum - expected_measure).abs() > 1e-10 * expected_measure.abs().max(1.0) {
            return Err(Error::Quadrature(format!(
                "weights sum to {sum}, expected measure {expected_measure}"
            )));
        }
        Ok(())
    }
}

/// Breakpoint collector with tolerance-based dedup. Out-of-range insertions
/// are clipped away; the merge count is reported for diagnostics.
#[derive(Clone, Debug)]
pub struct Breakpoints {
    lo: f64,
    hi: f64,
    pts: Vec<f64>,
}

impl Breakpoints {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo < hi);
        Breakpoints { lo, hi, pts: vec![lo, hi] }
    }

    pub fn insert(&mut self, x: f64) {
        if x > self.lo && x < self.hi && x.is_finite() {
            self.pts.push(x);
        }
    }

    /// Sorted breakpoints with near-duplicates (within `tol`) merged;
    /// returns the merged count.
    pub fn finish(mut self, tol: f64) -> (Vec<f64>, usize) {
        self.pts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        let mut out: Vec<f64> = Vec::with_capacity(self.pts.len());
        let mut merged = 0;
        for x in self.pts {
            match out.last() {
                Some(&last) if x - last <= tol => merged += 1,
                _ => out.push(x),
            }
        }
        // The right endpoint must survive merging so the covered measure is exact.
        if let Some(last) = out.last_mut() {
            if (*last - self.hi).abs() <= tol && *last != self.hi {
                *last = self.hi;
            }
        }
        (out, merged)
    }
}

/// One chord of a disk seen from an exterior point: angular Gauss weight and
/// the entry/exit distances along the ray.
#[derive(Clone, Copy, Debug)]
pub struct Ray {
    pub weight: f64,
    pub t_in: f64,
    pub t_out: f64,
    pub dir: [f64; 2],
}

/// Angular decomposition of a disk as seen from an exterior point, with
/// geometric grading toward the near direction (where the chord starts at
/// distance delta and the integrands peak).
pub fn disk_ray_fan(center: [f64; 2], radius: f64, x: &Point, policy: QuadPolicy) -> Result<Vec<Ray>> {
    let dx = [x.coord(0) - center[0], x.coord(1) - center[1]];
    let dc = (dx[0] * dx[0] + dx[1] * dx[1]).sqrt();
    if dc <= radius {
        return Err(Error::NotExterior { delta: (dc - radius).abs() });
    }
    let alpha = (radius / dc).asin();
    // Unit vector from x toward the center and its perpendicular.
    let e = [-dx[0] / dc, -dx[1] / dc];
    let ep = [-e[1], e[0]];

    // Dyadic grading toward both endpoints: theta = 0 holds the integrand
    // peak when delta is small, and theta = alpha is a square-root endpoint
    // singularity of the chord length.
    let mut breaks = vec![0.0, alpha];
    let mut d = 0.5 * alpha;
    for _ in 0..policy.angular_grade {
        breaks.push(d);
        breaks.push(alpha - d);
        d *= 0.5;
    }
    breaks.sort_by(|p, q| p.partial_cmp(q).unwrap());
    breaks.dedup();

    let gl = gauss_legendre(policy.order);
    let (gx, gw) = (&gl.0, &gl.1);
    let mut rays = Vec::with_capacity(2 * (breaks.len() - 1) * policy.order);
    for w in breaks.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let half = 0.5 * (w[1] - w[0]);
        for (gn, gwt) in gx.iter().zip(gw) {
            let th = mid + half * gn;
            let weight = half * gwt;
            // chord distances solve |x + t*dir - center| = radius
            let c = th.cos();
            let disc = radius * radius - dc * dc * th.sin() * th.sin();
            debug_assert!(disc > 0.0, "ray breaks confined to the visibility cone");
            let r = disc.sqrt();
            let (t_in, t_out) = (dc * c - r, dc * c + r);
            for sign in [-1.0, 1.0] {
                let dir = [e[0] * c + sign * ep[0] * th.sin(), e[1] * c + sign * ep[1] * th.sin()];
                rays.push(Ray { weight, t_in, t_out, dir });
            }
        }
    }
    Ok(rays)
}

/// Boundary weight F(x) = int_Omega |x-y|^(-N-2s) dy for exterior x, in plain
/// normalization. Closed form on an interval; ray-chord quadrature with a
/// closed-form radial factor on a disk.
pub fn boundary_factor(domain: &Domain, params: &FracParams, x: &Point, policy: QuadPolicy) -> Result<f64> {
    general_tail_integral(domain, 2.0 * params.s(), x, policy)
}

/// int_Omega |x-y|^(-N-tau) dy for exterior x and tau > 0.
pub fn general_tail_integral(domain: &Domain, tau: f64, x: &Point, policy: QuadPolicy) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tail exponent must be positive, got {tau}")));
    }
    if !domain.is_exterior(x) {
        return Err(Error::NotExterior { delta: domain.distance_to_boundary(x) });
    }
    match domain {
        Domain::Interval { a, b } => {
            let xv = x.scalar();
            let (near, far) = if xv > *b { (xv - b, xv - a) } else { (a - xv, b - xv) };
            Ok(power_integral(-1.0 - tau, near, far))
        }
        Domain::Disk { center, radius } => {
            let rays = disk_ray_fan(*center, *radius, x, policy)?;
            // The fan holds mirrored half-cone rays; summing all of them
            // covers the full visibility cone. Radial integral in polar
            // measure: int t^(-2-tau) * t dt.
            Ok(rays
                .iter()
                .map(|r| r.weight * power_integral(-1.0 - tau, r.t_in, r.t_out))
                .sum())
        }
    }
}

/// The interior kernel induced by the exterior weighted-average extension:
/// k_aux(x,y) = int_ext |x-z|^(-N-2s) |y-z|^(-N-2s) / F(z) dz (truncated at
/// boundary distance r_trunc), and K(x,y) = |x-y|^(-N-2s) + k_aux(x,y).
/// 1D only; the exterior z-quadrature and F(z) values are precomputed once.
#[derive(Clone, Debug)]
pub struct RegionalKernel {
    params: FracParams,
    domain: Domain,
    r_trunc: f64,
    z_nodes: Vec<f64>,
    /// weight / F(z) per node, so eval is a plain dot product
    z_wf: Vec<f64>,
}

impl RegionalKernel {
    pub fn new(domain: &Domain, params: &FracParams, r_trunc: f64, policy: QuadPolicy) -> Result<Self> {
        let (a, b) = match domain {
            Domain::Interval { a, b } => (*a, *b),
            Domain::Disk { .. } => {
                return Err(Error::DimensionUnsupported { op: "regional_kernel", dim: 2 })
            }
        };
        if r_trunc <= 0.0 {
            return Err(Error::InvalidParameter("truncation radius must be positive".into()));
        }
        // Graded boundary-distance breakpoints from the floor up to r_trunc.
        let mut deltas = vec![0.0];
        let mut d = r_trunc;
        while d > policy.z_floor {
            deltas.push(d);
            d *= 0.5;
        }
        deltas.push(d);
        deltas.sort_by(|p, q| p.partial_cmp(q).unwrap());
        deltas.dedup();

        let mut z_nodes = Vec::new();
        let mut z_wf = Vec::new();
        let gl = gauss_legendre(policy.order);
        let (gx, gw) = (&gl.0, &gl.1);
        for w in deltas.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let half = 0.5 * (w[1] - w[0]);
            for (gn, gwt) in gx.iter().zip(gw) {
                let delta = mid + half * gn;
                let weight = half * gwt;
                for z in [a - delta, b + delta] {
                    let f = power_integral(
                        -1.0 - 2.0 * params.s(),
                        delta,
                        delta + (b - a),
                    );
                    z_nodes.push(z);
                    z_wf.push(weight / f);
                }
            }
        }
        Ok(RegionalKernel {
            params: *params,
            domain: domain.clone(),
            r_trunc,
            z_nodes,
            z_wf,
        })
    }

    pub fn params(&self) -> &FracParams {
        &self.params
    }

    pub fn r_trunc(&self) -> f64 {
        self.r_trunc
    }

    /// Exterior quadrature rule behind `k_aux`: node positions and weights
    /// already divided by the boundary factor at the node.
    pub(crate) fn exterior_rule(&self) -> (&[f64], &[f64]) {
        (&self.z_nodes, &self.z_wf)
    }

    /// The auxiliary part k_aux(x,y), symmetric and nonnegative.
    pub fn k_aux(&self, x: f64, y: f64) -> f64 {
        let mut acc = 0.0;
        for (&z, &wf) in self.z_nodes.iter().zip(&self.z_wf) {
            acc += wf * self.params.kernel((x - z).abs()) * self.params.kernel((y - z).abs());
        }
        acc
    }

    /// Full interior kernel K(x,y); rejects the non-integrable diagonal.
    pub fn full(&self, x: f64, y: f64) -> Result<f64> {
        let px = Point::one(x);
        let py = Point::one(y);
        if !self.domain.contains(&px) || !self.domain.contains(&py) {
            return Err(Error::NotInterior);
        }
        if x == y {
            return Err(Error::InvalidParameter(
                "interior kernel is not defined on the diagonal".into(),
            ));
        }
        Ok(self.params.kernel((x - y).abs()) + self.k_aux(x, y))
    }

    /// Conservative bound on the mass dropped by truncating the exterior
    /// integral at boundary distance R = r_trunc. For distant z the integrand
    /// behaves like delta^(-N-2s)/|Omega|, so the dropped mass per side is
    /// about R^(-2s)/(2s |Omega|); a safety factor 2 absorbs the offsets
    /// between |x-z|, |y-z| and the boundary distance.
    pub fn tail_bound(&self) -> f64 {
        let s = self.params.s();
        2.0 * 2.0 * self.r_trunc.powf(-2.0 * s) / (2.0 * s * self.domain.measure())
    }
}
