//! Computational domains (interval, disk), exact boundary geometry, and the
//! node sets used by the discretization: interior lattice, boundary points,
//! and exterior quadrature shells.

use crate::{Error, Result};
use std::sync::atomic::{AtomicU64, Ordering};

/// A point in 1 or 2 dimensions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    coords: [f64; 2],
    dim: usize,
}

impl Point {
    pub fn one(x: f64) -> Self {
        Point { coords: [x, 0.0], dim: 1 }
    }

    pub fn two(x: f64, y: f64) -> Self {
        Point { coords: [x, y], dim: 2 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coord(&self, i: usize) -> f64 {
        debug_assert!(i < self.dim);
        self.coords[i]
    }

    /// The single coordinate of a 1D point.
    pub fn scalar(&self) -> f64 {
        debug_assert_eq!(self.dim, 1);
        self.coords[0]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    pub fn distance(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let mut s = 0.0;
        for i in 0..self.dim {
            let d = self.coords[i] - other.coords[i];
            s += d * d;
        }
        s.sqrt()
    }
}

/// Bounded domain with exact distance-to-boundary and outward normal.
#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Disk { center: [f64; 2], radius: f64 },
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidDomain("interval endpoints must be finite".into()));
        }
        if a >= b {
            return Err(Error::InvalidDomain(format!(
                "interval requires a < b, got a={a}, b={b}"
            )));
        }
        Ok(Domain::Interval { a, b })
    }

    pub fn disk(center: [f64; 2], radius: f64) -> Result<Self> {
        if !center.iter().all(|c| c.is_finite()) || !radius.is_finite() {
            return Err(Error::InvalidDomain("disk parameters must be finite".into()));
        }
        if radius <= 0.0 {
            return Err(Error::InvalidDomain(format!("disk radius must be positive, got {radius}")));
        }
        Ok(Domain::Disk { center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Disk { .. } => 2,
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Interval { a, b } => b - a,
            Domain::Disk { radius, .. } => 2.0 * radius,
        }
    }

    pub fn measure(&self) -> f64 {
        match self {
            Domain::Interval { a, b } => b - a,
            Domain::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
        }
    }

    /// Strict interior membership.
    pub fn contains(&self, p: &Point) -> bool {
        if p.dim() != self.dim() {
            return false;
        }
        match self {
            Domain::Interval { a, b } => {
                let x = p.scalar();
                x > *a && x < *b
            }
            Domain::Disk { center, radius } => {
                let dx = p.coord(0) - center[0];
                let dy = p.coord(1) - center[1];
                (dx * dx + dy * dy).sqrt() < *radius
            }
        }
    }

    /// Strictly outside the closure.
    pub fn is_exterior(&self, p: &Point) -> bool {
        if p.dim() != self.dim() {
            return false;
        }
        match self {
            Domain::Interval { a, b } => {
                let x = p.scalar();
                x < *a || x > *b
            }
            Domain::Disk { center, radius } => {
                let dx = p.coord(0) - center[0];
                let dy = p.coord(1) - center[1];
                (dx * dx + dy * dy).sqrt() > *radius
            }
        }
    }

    /// Unsigned distance to the boundary; zero exactly on the boundary.
    pub fn distance_to_boundary(&self, p: &Point) -> f64 {
        match self {
            Domain::Interval { a, b } => {
                let x = p.scalar();
                (x - a).abs().min((x - b).abs())
            }
            Domain::Disk { center, radius } => {
                let dx = p.coord(0) - center[0];
                let dy = p.coord(1) - center[1];
                ((dx * dx + dy * dy).sqrt() - radius).abs()
            }
        }
    }

    /// Unit outward normal at a boundary point.
    pub fn outward_normal(&self, p: &Point) -> Result<Point> {
        let tol = 1e-12 * self.diameter();
        if self.distance_to_boundary(p) > tol {
            return Err(Error::InvalidParameter(
                "outward_normal requires a boundary point".into(),
            ));
        }
        match self {
            Domain::Interval { a, .. } => {
                let x = p.scalar();
                Ok(Point::one(if (x - a).abs() <= tol { -1.0 } else { 1.0 }))
            }
            Domain::Disk { center, .. } => {
                let dx = p.coord(0) - center[0];
                let dy = p.coord(1) - center[1];
                let r = (dx * dx + dy * dy).sqrt();
                Ok(Point::two(dx / r, dy / r))
            }
        }
    }

    /// Closest boundary point to a strictly exterior point.
    pub fn nearest_boundary_point(&self, p: &Point) -> Result<Point> {
        if !self.is_exterior(p) {
            return Err(Error::NotExterior { delta: self.distance_to_boundary(p) });
        }
        match self {
            Domain::Interval { a, b } => {
                let x = p.scalar();
                Ok(Point::one(if x < *a { *a } else { *b }))
            }
            Domain::Disk { center, radius } => {
                let dx = p.coord(0) - center[0];
                let dy = p.coord(1) - center[1];
                let r = (dx * dx + dy * dy).sqrt();
                Ok(Point::two(
                    center[0] + radius * dx / r,
                    center[1] + radius * dy / r,
                ))
            }
        }
    }
}

/// Policy knobs for the exterior shell layout.
#[derive(Clone, Copy, Debug)]
pub struct ShellPolicy {
    /// Ratio of the geometric sequence approaching the boundary (delta = h / ratio^k).
    pub inward_ratio: f64,
    /// Growth ratio of the shell distances from h out to the truncation radius.
    pub outward_ratio: f64,
    /// Angular resolution of 2D exterior shells.
    pub n_theta: usize,
}

impl Default for ShellPolicy {
    fn default() -> Self {
        ShellPolicy { inward_ratio: 2.0, outward_ratio: 1.5, n_theta: 48 }
    }
}

static GRID_TOKEN: AtomicU64 = AtomicU64::new(1);

/// Discretization node sets: uniform interior lattice, boundary points, and
/// exterior shells at distances `delta in [h^2, r_trunc]` from the boundary.
#[derive(Clone, Debug)]
pub struct Grid {
    domain: Domain,
    h: f64,
    r_trunc: f64,
    interior: Vec<Point>,
    boundary: Vec<Point>,
    shells: Vec<f64>,
    exterior: Vec<Point>,
    token: u64,
}

/// Build a grid with spacing `h` (snapped so the domain diameter is an integer
/// number of cells in 1D) and exterior shells reaching `r_trunc`.
pub fn build_grid(domain: &Domain, h: f64, r_trunc: f64, policy: ShellPolicy) -> Result<Grid> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::GridConstruction(format!("spacing must be positive, got {h}")));
    }
    let diam = domain.diameter();
    if h > diam / 2.0 {
        return Err(Error::GridConstruction(format!(
            "spacing {h} too large for a domain of diameter {diam}"
        )));
    }
    if r_trunc < 2.0 * diam {
        return Err(Error::GridConstruction(format!(
            "truncation radius {r_trunc} must be at least twice the diameter {diam}"
        )));
    }
    if !(policy.inward_ratio > 1.0) || !(policy.outward_ratio > 1.0) {
        return Err(Error::GridConstruction("shell ratios must exceed 1".into()));
    }

    let (h_eff, interior, boundary) = match domain {
        Domain::Interval { a, b } => {
            let cells = ((b - a) / h).round() as usize;
            if cells < 2 {
                return Err(Error::GridConstruction(
                    "interval needs at least two cells (one interior node)".into(),
                ));
            }
            let h_eff = (b - a) / cells as f64;
            let interior: Vec<Point> =
                (1..cells).map(|i| Point::one(a + i as f64 * h_eff)).collect();
            let boundary = vec![Point::one(*a), Point::one(*b)];
            (h_eff, interior, boundary)
        }
        Domain::Disk { center, radius } => {
            let mut interior = Vec::new();
            let k_max = (radius / h).ceil() as i64 + 1;
            for i in -k_max..=k_max {
                for j in -k_max..=k_max {
                    let p = Point::two(center[0] + i as f64 * h, center[1] + j as f64 * h);
                    if domain.contains(&p) {
                        interior.push(p);
                    }
                }
            }
            if interior.is_empty() {
                return Err(Error::GridConstruction("no lattice point falls inside the disk".into()));
            }
            let boundary = (0..policy.n_theta)
                .map(|k| {
                    let th = 2.0 * std::f64::consts::PI * k as f64 / policy.n_theta as f64;
                    Point::two(center[0] + radius * th.cos(), center[1] + radius * th.sin())
                })
                .collect();
            (h, interior, boundary)
        }
    };

    let shells = shell_distances(h_eff, r_trunc, policy);
    if shells.is_empty() {
        return Err(Error::GridConstruction("empty shell sequence".into()));
    }

    let exterior = match domain {
        Domain::Interval { a, b } => {
            let mut ext: Vec<Point> = shells.iter().map(|&d| Point::one(a - d)).collect();
            ext.extend(shells.iter().map(|&d| Point::one(b + d)));
            ext
        }
        Domain::Disk { center, radius } => {
            let mut ext = Vec::new();
            for &d in &shells {
                for k in 0..policy.n_theta {
                    let th = 2.0 * std::f64::consts::PI * k as f64 / policy.n_theta as f64;
                    ext.push(Point::two(
                        center[0] + (radius + d) * th.cos(),
                        center[1] + (radius + d) * th.sin(),
                    ));
                }
            }
            ext
        }
    };

    Ok(Grid {
        domain: domain.clone(),
        h: h_eff,
        r_trunc,
        interior,
        boundary,
        shells,
        exterior,
        token: GRID_TOKEN.fetch_add(1, Ordering::Relaxed),
    })
}

/// Shell distances: geometric refinement from h down to the floor h^2, then
/// graded growth from h out to (and including) r_trunc. Sorted ascending.
fn shell_distances(h: f64, r_trunc: f64, policy: ShellPolicy) -> Vec<f64> {
    let delta_min = h * h;
    let mut shells = Vec::new();
    let mut d = h;
    while d > delta_min * (1.0 + 1e-9) {
        shells.push(d);
        d /= policy.inward_ratio;
    }
    shells.push(delta_min);
    let mut d = h * policy.outward_ratio;
    while d < r_trunc * (1.0 - 1e-12) {
        shells.push(d);
        d *= policy.outward_ratio;
    }
    shells.push(r_trunc);
    shells.sort_by(|x, y| x.partial_cmp(y).unwrap());
    shells.dedup_by(|x, y| (*x - *y).abs() < 1e-15 * r_trunc);
    shells
}

impl Grid {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn r_trunc(&self) -> f64 {
        self.r_trunc
    }

    pub fn interior_nodes(&self) -> &[Point] {
        &self.interior
    }

    pub fn boundary_nodes(&self) -> &[Point] {
        &self.boundary
    }

    /// Shell distances, ascending, from h^2 up to r_trunc.
    pub fn shells(&self) -> &[f64] {
        &self.shells
    }

    /// All exterior nodes. For an interval: the left side (delta ascending)
    /// followed by the right side (delta ascending). For a disk: one ring of
    /// `n_theta` points per shell, shells ascending.
    pub fn exterior_nodes(&self) -> &[Point] {
        &self.exterior
    }

    /// Identity token used to tag exterior caches built from this grid.
    pub fn token(&self) -> u64 {
        self.token
    }

    /// Interior coordinates of a 1D grid.
    pub fn interior_xs(&self) -> Vec<f64> {
        self.interior.iter().map(|p| p.scalar()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn interval_distances() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        assert_relative_eq!(d.distance_to_boundary(&Point::one(0.5)), 0.5);
        assert_relative_eq!(d.distance_to_boundary(&Point::one(2.0)), 1.0);
        assert_eq!(d.distance_to_boundary(&Point::one(1.0)), 0.0);
    }

    #[test]
    fn disk_distance_is_radial() {
        let d = Domain::disk([0.0, 0.0], 1.0).unwrap();
        assert_relative_eq!(d.distance_to_boundary(&Point::two(2.0, 0.0)), 1.0);
        assert_relative_eq!(d.distance_to_boundary(&Point::two(0.0, 0.25)), 0.75);
    }

    #[test]
    fn nearest_boundary_point_interval() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        assert_eq!(d.nearest_boundary_point(&Point::one(1.3)).unwrap(), Point::one(1.0));
        assert_eq!(d.nearest_boundary_point(&Point::one(-0.2)).unwrap(), Point::one(0.0));
        assert!(d.nearest_boundary_point(&Point::one(0.4)).is_err());
    }

    #[test]
    fn nearest_boundary_point_disk() {
        let d = Domain::disk([0.0, 0.0], 1.0).unwrap();
        let p = d.nearest_boundary_point(&Point::two(0.0, -2.0)).unwrap();
        assert_relative_eq!(p.coord(0), 0.0, epsilon = 1e-15);
        assert_relative_eq!(p.coord(1), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn normals_are_unit_outward() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        assert_eq!(d.outward_normal(&Point::one(0.0)).unwrap().scalar(), -1.0);
        assert_eq!(d.outward_normal(&Point::one(1.0)).unwrap().scalar(), 1.0);
        assert!(d.outward_normal(&Point::one(0.5)).is_err());

        let disk = Domain::disk([1.0, 0.0], 2.0).unwrap();
        let n = disk.outward_normal(&Point::two(3.0, 0.0)).unwrap();
        assert_relative_eq!(n.coord(0), 1.0);
        assert_relative_eq!(n.coord(1), 0.0);
    }

    #[test]
    fn unit_interval_h01_has_nine_interior_nodes() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let g = build_grid(&d, 0.1, 2.0, ShellPolicy::default()).unwrap();
        let xs = g.interior_xs();
        assert_eq!(xs.len(), 9);
        assert_relative_eq!(xs[0], 0.1, epsilon = 1e-12);
        assert_relative_eq!(xs[8], 0.9, epsilon = 1e-12);
    }

    #[test]
    fn disk_grid_nodes_strictly_inside() {
        let d = Domain::disk([0.0, 0.0], 1.0).unwrap();
        let g = build_grid(&d, 0.25, 4.0, ShellPolicy::default()).unwrap();
        assert!(!g.interior_nodes().is_empty());
        for p in g.interior_nodes() {
            assert!(d.contains(p));
        }
        for p in g.exterior_nodes() {
            assert!(d.is_exterior(p));
        }
    }

    #[test]
    fn shells_sorted_strictly_increasing_and_span_range() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let g = build_grid(&d, 0.05, 8.0, ShellPolicy::default()).unwrap();
        let s = g.shells();
        for w in s.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert_relative_eq!(s[0], 0.05 * 0.05, epsilon = 1e-15);
        assert_relative_eq!(*s.last().unwrap(), 8.0);
        // geometric descent from h is present
        assert!(s.contains(&0.05));
        assert!(s.iter().any(|&d| (d - 0.025).abs() < 1e-12));
    }

    #[test]
    fn build_grid_rejects_bad_inputs() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        assert!(build_grid(&d, 0.8, 2.0, ShellPolicy::default()).is_err());
        assert!(build_grid(&d, 0.1, 1.0, ShellPolicy::default()).is_err());
        assert!(Domain::interval(1.0, 0.0).is_err());
        assert!(Domain::disk([0.0, 0.0], -1.0).is_err());
    }

    proptest! {
        // Triangle-inequality bound for the boundary projection of an exterior
        // point: for every y in the domain, |y - xhat| <= 2 |y - x|.
        #[test]
        fn projection_within_twice_the_distance_interval(
            x in prop_oneof![(-3.0f64..-0.001), (1.001f64..4.0)],
            y in 0.0001f64..0.9999,
        ) {
            let d = Domain::interval(0.0, 1.0).unwrap();
            let p = Point::one(x);
            let xhat = d.nearest_boundary_point(&p).unwrap();
            let yq = Point::one(y);
            prop_assert!(yq.distance(&xhat) <= 2.0 * yq.distance(&p) + 1e-12);
        }

        #[test]
        fn projection_within_twice_the_distance_disk(
            r in 1.001f64..5.0,
            th in 0.0f64..std::f64::consts::TAU,
            yr in 0.0f64..0.999,
            yth in 0.0f64..std::f64::consts::TAU,
        ) {
            let d = Domain::disk([0.0, 0.0], 1.0).unwrap();
            let p = Point::two(r * th.cos(), r * th.sin());
            let xhat = d.nearest_boundary_point(&p).unwrap();
            let yq = Point::two(yr * yth.cos(), yr * yth.sin());
            prop_assert!(yq.distance(&xhat) <= 2.0 * yq.distance(&p) + 1e-12);
        }
    }
}
