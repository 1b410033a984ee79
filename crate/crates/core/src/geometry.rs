//! Regions, decompositions and collocation sampling.

use std::io::Write;
use std::path::Path;

use rand::Rng;

use crate::error::{DdmError, Result};

pub type Point = [f64; 2];

/// Rejection-sampling attempts allowed per accepted point.
const MAX_REJECTIONS: usize = 1_000_000;

/// On-set tolerance used by the geometry predicates.
pub const ON_SET_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) {
            return Err(DdmError::config(format!(
                "degenerate rectangle [{x0}, {x1}]x[{y0}, {y1}]"
            )));
        }
        Ok(Rect { x0, x1, y0, y1 })
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disc {
    pub center: Point,
    pub radius: f64,
}

impl Disc {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if radius.is_nan() || radius <= 0.0 {
            return Err(DdmError::config(format!(
                "disc radius must be positive, got {radius}"
            )));
        }
        Ok(Disc { center, radius })
    }

    fn dist_sq(&self, p: Point) -> f64 {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        dx * dx + dy * dy
    }

    /// Open disc membership.
    pub fn contains(&self, p: Point) -> bool {
        self.dist_sq(p) < self.radius * self.radius
    }

    pub fn on_circle(&self, p: Point, tol: f64) -> bool {
        (self.dist_sq(p).sqrt() - self.radius).abs() <= tol
    }

    fn bounding_rect(&self) -> Rect {
        Rect {
            x0: self.center[0] - self.radius,
            x1: self.center[0] + self.radius,
            y0: self.center[1] - self.radius,
            y1: self.center[1] + self.radius,
        }
    }
}

/// A subdomain region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Rectangle(Rect),
    Disc(Disc),
    /// Closed rectangle minus the closed disc.
    RectMinusDisc(Rect, Disc),
}

impl Region {
    pub fn contains(&self, p: Point) -> bool {
        match self {
            Region::Rectangle(r) => r.contains(p),
            Region::Disc(d) => d.contains(p),
            Region::RectMinusDisc(r, d) => r.contains(p) && d.dist_sq(p) > d.radius * d.radius,
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Region::Rectangle(r) => r.area(),
            Region::Disc(d) => std::f64::consts::PI * d.radius * d.radius,
            Region::RectMinusDisc(r, d) => r.area() - std::f64::consts::PI * d.radius * d.radius,
        }
    }

    pub fn bounding_rect(&self) -> Rect {
        match self {
            Region::Rectangle(r) | Region::RectMinusDisc(r, _) => *r,
            Region::Disc(d) => d.bounding_rect(),
        }
    }
}

/// Shape of an artificial interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterfaceShape {
    /// `x = x`, `y ∈ [y0, y1]`; `sign` is the x-component of the normal.
    VerticalLine { x: f64, y0: f64, y1: f64, sign: f64 },
    /// Normal is `(p - center) / r`, outward from the disc, for both sides.
    Circle(Disc),
}

/// The part of `∂Ω_s` that lies on an interface, seen from subdomain `owner`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interface {
    pub shape: InterfaceShape,
    pub owner: usize,
    pub neighbor: usize,
}

impl Interface {
    pub fn normal(&self, p: Point) -> [f64; 2] {
        match self.shape {
            InterfaceShape::VerticalLine { sign, .. } => [sign, 0.0],
            InterfaceShape::Circle(d) => {
                let dx = p[0] - d.center[0];
                let dy = p[1] - d.center[1];
                let r = (dx * dx + dy * dy).sqrt();
                [dx / r, dy / r]
            }
        }
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        match self.shape {
            InterfaceShape::VerticalLine { x, y0, y1, .. } => {
                (p[0] - x).abs() <= tol && p[1] >= y0 - tol && p[1] <= y1 + tol
            }
            InterfaceShape::Circle(d) => d.on_circle(p, tol),
        }
    }

    /// Point of a circular interface at polar angle `theta`.
    pub fn point_at_angle(&self, theta: f64) -> Option<Point> {
        match self.shape {
            InterfaceShape::Circle(d) => Some([
                d.center[0] + d.radius * theta.cos(),
                d.center[1] + d.radius * theta.sin(),
            ]),
            InterfaceShape::VerticalLine { .. } => None,
        }
    }
}

/// A straight piece of the global boundary `∂Ω` that also bounds a
/// subdomain. `share` is its length relative to the global edge it lies on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub start: Point,
    pub end: Point,
    pub share: f64,
}

impl BoundaryEdge {
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        let (dx, dy) = (self.end[0] - self.start[0], self.end[1] - self.start[1]);
        let len2 = dx * dx + dy * dy;
        let t = ((p[0] - self.start[0]) * dx + (p[1] - self.start[1]) * dy) / len2;
        let (qx, qy) = (self.start[0] + t * dx, self.start[1] + t * dy);
        t >= -tol && t <= 1.0 + tol && (p[0] - qx).hypot(p[1] - qy) <= tol
    }
}

/// How the points of a subdomain are assigned when stitching a global
/// solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoreCell {
    /// `x ∈ [lo, hi]` (closed; ties go to the lower index).
    Strip { lo: f64, hi: f64 },
    /// Closed disc.
    Disc(Disc),
    /// Everything not claimed by a lower-index subdomain.
    Rest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subdomain {
    pub region: Region,
    pub outer_edges: Vec<BoundaryEdge>,
    pub interfaces: Vec<Interface>,
    pub core: CoreCell,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecompositionKind {
    Strips,
    Interface,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub domain: Rect,
    pub kind: DecompositionKind,
    pub overlap: f64,
    pub subdomains: Vec<Subdomain>,
}

impl Decomposition {
    pub fn len(&self) -> usize {
        self.subdomains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subdomains.is_empty()
    }

    /// Index of the subdomain whose core cell owns `p`.
    pub fn owner_of(&self, p: Point) -> usize {
        for (s, sub) in self.subdomains.iter().enumerate() {
            let owns = match sub.core {
                CoreCell::Strip { hi, .. } => p[0] <= hi,
                CoreCell::Disc(d) => d.dist_sq(p) <= d.radius * d.radius,
                CoreCell::Rest => true,
            };
            if owns {
                return s;
            }
        }
        self.subdomains.len() - 1
    }
}

fn global_edges(domain: &Rect) -> [BoundaryEdge; 4] {
    let Rect { x0, x1, y0, y1 } = *domain;
    [
        BoundaryEdge {
            start: [x0, y0],
            end: [x1, y0],
            share: 1.0,
        },
        BoundaryEdge {
            start: [x1, y0],
            end: [x1, y1],
            share: 1.0,
        },
        BoundaryEdge {
            start: [x1, y1],
            end: [x0, y1],
            share: 1.0,
        },
        BoundaryEdge {
            start: [x0, y1],
            end: [x0, y0],
            share: 1.0,
        },
    ]
}

/// Splits `domain` into `count` vertical strips around the uniform cuts
/// `x0 + k (x1 - x0) / count`, each interior cut widened by `overlap / 2` on
/// both sides. `count = 1` yields the whole domain.
pub fn decompose_strips(domain: Rect, count: usize, overlap: f64) -> Result<Decomposition> {
    if count == 0 {
        return Err(DdmError::config("need at least one subdomain"));
    }
    let width = (domain.x1 - domain.x0) / count as f64;
    if overlap.is_nan() || overlap < 0.0 || (count > 1 && overlap >= 2.0 * width) {
        return Err(DdmError::config(format!(
            "overlap {overlap} invalid for {count} strips of width {width}"
        )));
    }
    let half = 0.5 * overlap;
    let cut = |k: usize| domain.x0 + k as f64 * width;
    let span = domain.x1 - domain.x0;
    let mut subdomains = Vec::with_capacity(count);
    for s in 0..count {
        let lo = if s == 0 { domain.x0 } else { cut(s) - half };
        let hi = if s + 1 == count {
            domain.x1
        } else {
            cut(s + 1) + half
        };
        let rect = Rect::new(lo, hi, domain.y0, domain.y1)?;
        let share = (hi - lo) / span;
        let mut outer_edges = vec![
            BoundaryEdge {
                start: [lo, domain.y0],
                end: [hi, domain.y0],
                share,
            },
            BoundaryEdge {
                start: [hi, domain.y1],
                end: [lo, domain.y1],
                share,
            },
        ];
        if s + 1 == count {
            outer_edges.insert(1, global_edges(&domain)[1]);
        }
        if s == 0 {
            outer_edges.push(global_edges(&domain)[3]);
        }
        let mut interfaces = Vec::new();
        if s > 0 {
            interfaces.push(Interface {
                shape: InterfaceShape::VerticalLine {
                    x: lo,
                    y0: domain.y0,
                    y1: domain.y1,
                    sign: -1.0,
                },
                owner: s,
                neighbor: s - 1,
            });
        }
        if s + 1 < count {
            interfaces.push(Interface {
                shape: InterfaceShape::VerticalLine {
                    x: hi,
                    y0: domain.y0,
                    y1: domain.y1,
                    sign: 1.0,
                },
                owner: s,
                neighbor: s + 1,
            });
        }
        let core = CoreCell::Strip {
            lo: cut(s),
            hi: if s + 1 == count {
                domain.x1
            } else {
                cut(s + 1)
            },
        };
        subdomains.push(Subdomain {
            region: Region::Rectangle(rect),
            outer_edges,
            interfaces,
            core,
        });
    }
    Ok(Decomposition {
        domain,
        kind: DecompositionKind::Strips,
        overlap,
        subdomains,
    })
}

/// Splits `domain` along a circle into the open disc (subdomain 0) and the
/// rectangle minus the closed disc (subdomain 1). No overlap.
pub fn decompose_interface(domain: Rect, circle: Disc) -> Result<Decomposition> {
    let bb = circle.bounding_rect();
    if !(bb.x0 > domain.x0 && bb.x1 < domain.x1 && bb.y0 > domain.y0 && bb.y1 < domain.y1) {
        return Err(DdmError::config(
            "interface circle must lie strictly inside the domain",
        ));
    }
    let gamma = InterfaceShape::Circle(circle);
    let inner = Subdomain {
        region: Region::Disc(circle),
        outer_edges: Vec::new(),
        interfaces: vec![Interface {
            shape: gamma,
            owner: 0,
            neighbor: 1,
        }],
        core: CoreCell::Disc(circle),
    };
    let outer = Subdomain {
        region: Region::RectMinusDisc(domain, circle),
        outer_edges: global_edges(&domain).to_vec(),
        interfaces: vec![Interface {
            shape: gamma,
            owner: 1,
            neighbor: 0,
        }],
        core: CoreCell::Rest,
    };
    Ok(Decomposition {
        domain,
        kind: DecompositionKind::Interface,
        overlap: 0.0,
        subdomains: vec![inner, outer],
    })
}

/// `n` i.i.d. uniform points in `region`.
pub fn sample_interior<R: Rng + ?Sized>(
    region: &Region,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Point>> {
    let bb = region.bounding_rect();
    let draw = |rng: &mut R| {
        [
            bb.x0 + (bb.x1 - bb.x0) * rng.random::<f64>(),
            bb.y0 + (bb.y1 - bb.y0) * rng.random::<f64>(),
        ]
    };
    let mut points = Vec::with_capacity(n);
    if let Region::Rectangle(_) = region {
        points.extend((0..n).map(|_| draw(rng)));
        return Ok(points);
    }
    for _ in 0..n {
        let mut tries = 0;
        let p = loop {
            let p = draw(rng);
            if region.contains(p) {
                break p;
            }
            tries += 1;
            if tries >= MAX_REJECTIONS {
                return Err(DdmError::Sampling(format!(
                    "no interior point found after {MAX_REJECTIONS} draws; region {region:?} looks degenerate"
                )));
            }
        };
        points.push(p);
    }
    Ok(points)
}

/// Uniform points on the outer boundary of a subdomain: `per_edge` points on
/// each full global edge, proportionally fewer on partial edges. Empty when
/// the subdomain does not touch `∂Ω`.
pub fn sample_boundary<R: Rng + ?Sized>(
    sub: &Subdomain,
    per_edge: usize,
    rng: &mut R,
) -> Vec<Point> {
    let mut points = Vec::new();
    for edge in &sub.outer_edges {
        let n = ((per_edge as f64 * edge.share).round() as usize).max(1);
        for _ in 0..n {
            let t: f64 = rng.random();
            points.push([
                edge.start[0] + t * (edge.end[0] - edge.start[0]),
                edge.start[1] + t * (edge.end[1] - edge.start[1]),
            ]);
        }
    }
    points
}

/// A collocation point on an interface with its unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfacePoint {
    pub point: Point,
    pub normal: [f64; 2],
}

/// `n` uniform points on an interface: uniform in `y` on lines, uniform in
/// angle on circles.
pub fn sample_interface<R: Rng + ?Sized>(
    itf: &Interface,
    n: usize,
    rng: &mut R,
) -> Vec<InterfacePoint> {
    (0..n)
        .map(|_| {
            let point = match itf.shape {
                InterfaceShape::VerticalLine { x, y0, y1, .. } => {
                    [x, y0 + (y1 - y0) * rng.random::<f64>()]
                }
                InterfaceShape::Circle(_) => {
                    let theta = std::f64::consts::TAU * rng.random::<f64>();
                    itf.point_at_angle(theta).expect("circle")
                }
            };
            InterfacePoint {
                point,
                normal: itf.normal(point),
            }
        })
        .collect()
}

/// `n × n` equispaced tensor grid including the corners, x varying slowest.
pub fn test_grid(domain: &Rect, n: usize) -> Result<Vec<Point>> {
    if n < 2 {
        return Err(DdmError::config(
            "test grid needs at least 2 points per axis",
        ));
    }
    let hx = (domain.x1 - domain.x0) / (n - 1) as f64;
    let hy = (domain.y1 - domain.y0) / (n - 1) as f64;
    let mut pts = Vec::with_capacity(n * n);
    for i in 0..n {
        let x = if i + 1 == n {
            domain.x1
        } else {
            domain.x0 + i as f64 * hx
        };
        for j in 0..n {
            let y = if j + 1 == n {
                domain.y1
            } else {
                domain.y0 + j as f64 * hy
            };
            pts.push([x, y]);
        }
    }
    Ok(pts)
}

/// Collocation points of one subdomain. Interface points remember which
/// neighbor supplies their target.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CollocationSet {
    pub interior: Vec<Point>,
    pub boundary: Vec<Point>,
    pub interface: Vec<InterfacePoint>,
    pub interface_neighbor: Vec<usize>,
}

/// Writes collocation sets as CSV with columns `set,x,y,nx,ny`
/// (`set` is `interior_<s>`, `boundary_<s>` or `interface_<s>`).
pub fn dump_collocation_csv(path: &Path, sets: &[CollocationSet]) -> Result<()> {
    let io = |e| DdmError::io(path, e);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(out, "set,x,y,nx,ny").map_err(io)?;
    for (s, set) in sets.iter().enumerate() {
        for p in &set.interior {
            writeln!(out, "interior_{s},{:e},{:e},0,0", p[0], p[1]).map_err(io)?;
        }
        for p in &set.boundary {
            writeln!(out, "boundary_{s},{:e},{:e},0,0", p[0], p[1]).map_err(io)?;
        }
        for q in &set.interface {
            writeln!(
                out,
                "interface_{s},{:e},{:e},{:e},{:e}",
                q.point[0], q.point[1], q.normal[0], q.normal[1]
            )
            .map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn model_rect() -> Rect {
        Rect::new(0.0, PI, 0.0, 1.0).unwrap()
    }

    fn x_extent(sub: &Subdomain) -> (f64, f64) {
        let r = sub.region.bounding_rect();
        (r.x0, r.x1)
    }

    #[test]
    fn two_strips() {
        let d = decompose_strips(model_rect(), 2, 0.1).unwrap();
        let (a0, b0) = x_extent(&d.subdomains[0]);
        let (a1, b1) = x_extent(&d.subdomains[1]);
        assert_eq!(a0, 0.0);
        assert!((b0 - (FRAC_PI_2 + 0.05)).abs() < 1e-15);
        assert!((a1 - (FRAC_PI_2 - 0.05)).abs() < 1e-15);
        assert_eq!(b1, PI);
        // Γ_1 faces Ω_2 at the right edge of Ω_1.
        let g1 = d.subdomains[0].interfaces[0];
        assert_eq!(g1.neighbor, 1);
        assert!(
            matches!(g1.shape, InterfaceShape::VerticalLine { x, sign, .. } if x == b0 && sign == 1.0)
        );
        let g2 = d.subdomains[1].interfaces[0];
        assert!(
            matches!(g2.shape, InterfaceShape::VerticalLine { x, sign, .. } if x == a1 && sign == -1.0)
        );
    }

    #[test]
    fn four_strips() {
        let d = decompose_strips(model_rect(), 4, 0.2).unwrap();
        let (a, b) = x_extent(&d.subdomains[1]);
        assert!((a - (FRAC_PI_4 - 0.1)).abs() < 1e-15);
        assert!((b - (FRAC_PI_2 + 0.1)).abs() < 1e-15);
        assert_eq!(d.subdomains[1].interfaces.len(), 2);
        assert_eq!(d.subdomains[0].interfaces.len(), 1);
        // end strips touch three global edges, middle strips two
        assert_eq!(d.subdomains[0].outer_edges.len(), 3);
        assert_eq!(d.subdomains[1].outer_edges.len(), 2);
        assert_eq!(d.subdomains[3].outer_edges.len(), 3);
    }

    #[test]
    fn zero_overlap_shares_cut() {
        let d = decompose_strips(model_rect(), 2, 0.0).unwrap();
        assert_eq!(x_extent(&d.subdomains[0]).1, x_extent(&d.subdomains[1]).0);
    }

    #[test]
    fn rejects_bad_overlap() {
        assert!(decompose_strips(model_rect(), 2, -0.1).is_err());
        assert!(decompose_strips(model_rect(), 2, PI).is_err());
        assert!(decompose_strips(model_rect(), 4, 0.8).is_ok());
        assert!(decompose_strips(model_rect(), 0, 0.1).is_err());
    }

    #[test]
    fn interface_split() {
        let dom = Rect::new(0.0, 2.0, 0.0, 2.0).unwrap();
        let disc = Disc::new([1.0, 1.0], 0.5).unwrap();
        let d = decompose_interface(dom, disc).unwrap();
        assert!((d.subdomains[0].region.area() - PI / 4.0).abs() < 1e-15);
        assert!((d.subdomains[1].region.area() - (4.0 - PI / 4.0)).abs() < 1e-15);
        assert!(d.subdomains[0].region.contains([1.0, 1.0]));
        assert!(!d.subdomains[1].region.contains([1.0, 1.0]));
        assert!(!d.subdomains[0].region.contains([1.5, 1.0]));
        assert!(!d.subdomains[1].region.contains([1.5, 1.0]));
        assert!(d.subdomains[0].outer_edges.is_empty());

        let bad = Disc::new([0.2, 1.0], 0.5).unwrap();
        assert!(decompose_interface(dom, bad).is_err());
    }

    #[test]
    fn boundary_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let whole = decompose_strips(model_rect(), 1, 0.0).unwrap();
        let pts = sample_boundary(&whole.subdomains[0], 50, &mut rng);
        assert_eq!(pts.len(), 200);

        let d = decompose_strips(model_rect(), 2, 0.2).unwrap();
        let s0 = &d.subdomains[0];
        let pts = sample_boundary(s0, 50, &mut rng);
        for p in &pts {
            assert!(s0.outer_edges.iter().any(|e| e.contains(*p, ON_SET_TOL)));
            // bottom, top or the left wall; never the interface side
            assert!(p[1] == 0.0 || p[1] == 1.0 || p[0] == 0.0);
        }
        // left edge 50, bottom/top round(50 * (π/2 + 0.1)/π) = 27 each
        assert_eq!(pts.len(), 50 + 27 + 27);

        let disc = decompose_interface(
            Rect::new(0.0, 2.0, 0.0, 2.0).unwrap(),
            Disc::new([1.0, 1.0], 0.5).unwrap(),
        )
        .unwrap();
        assert!(sample_boundary(&disc.subdomains[0], 50, &mut rng).is_empty());
    }

    #[test]
    fn interface_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let circle = Interface {
            shape: InterfaceShape::Circle(Disc::new([1.0, 1.0], 0.5).unwrap()),
            owner: 1,
            neighbor: 0,
        };
        let p = circle.point_at_angle(0.0).unwrap();
        assert_eq!(p, [1.5, 1.0]);
        assert_eq!(circle.normal(p), [1.0, 0.0]);
        for q in sample_interface(&circle, 200, &mut rng) {
            assert!(circle.contains(q.point, ON_SET_TOL));
            assert!((q.normal[0].hypot(q.normal[1]) - 1.0).abs() < 1e-12);
        }
        let line = Interface {
            shape: InterfaceShape::VerticalLine {
                x: FRAC_PI_2,
                y0: 0.0,
                y1: 1.0,
                sign: 1.0,
            },
            owner: 0,
            neighbor: 1,
        };
        let pts = sample_interface(&line, 50, &mut rng);
        assert_eq!(pts.len(), 50);
        assert!(pts
            .iter()
            .all(|q| q.point[0] == FRAC_PI_2 && q.normal == [1.0, 0.0]));
    }

    #[test]
    fn grid() {
        let g = test_grid(&model_rect(), 200).unwrap();
        assert_eq!(g.len(), 40_000);
        assert!((g[200][0] - PI / 199.0).abs() < 1e-15);
        let corners = test_grid(&model_rect(), 2).unwrap();
        assert_eq!(corners, vec![[0.0, 0.0], [0.0, 1.0], [PI, 0.0], [PI, 1.0]]);
        assert!(test_grid(&model_rect(), 1).is_err());
    }

    #[test]
    fn interior_sampling_is_deterministic() {
        let region = Region::Rectangle(model_rect());
        let a = sample_interior(&region, 2500, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = sample_interior(&region, 2500, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2500);
        assert!(a.iter().all(|p| region.contains(*p)));

        let disc = Region::Disc(Disc::new([1.0, 1.0], 0.5).unwrap());
        let pts = sample_interior(&disc, 100, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert!(pts.iter().all(|p| disc.contains(*p)));
    }

    #[test]
    fn stitching_owner() {
        let d2 = decompose_strips(model_rect(), 2, 0.2).unwrap();
        assert_eq!(d2.owner_of([1.0, 0.5]), 0);
        assert_eq!(d2.owner_of([FRAC_PI_2, 0.5]), 0);
        assert_eq!(d2.owner_of([2.0, 0.5]), 1);
        let d4 = decompose_strips(model_rect(), 4, 0.2).unwrap();
        // 2.0 lies in (π/2, 3π/4), 2.5 beyond 3π/4 ≈ 2.356
        assert_eq!(d4.owner_of([2.0, 0.5]), 2);
        assert_eq!(d4.owner_of([2.5, 0.5]), 3);
        assert_eq!(d4.owner_of([PI, 0.5]), 3);
    }
}
