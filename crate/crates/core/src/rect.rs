//! Convex hull and minimum-area rotated rectangle of pixel centers.

use crate::error::{Error, Result};
use crate::labeling::Region;

/// A real-valued point, `(y, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pt {
    pub y: f64,
    pub x: f64,
}

impl Pt {
    pub const fn new(y: f64, x: f64) -> Self {
        Pt { y, x }
    }

    pub fn add(self, o: Pt) -> Pt {
        Pt::new(self.y + o.y, self.x + o.x)
    }

    pub fn sub(self, o: Pt) -> Pt {
        Pt::new(self.y - o.y, self.x - o.x)
    }

    pub fn scale(self, k: f64) -> Pt {
        Pt::new(self.y * k, self.x * k)
    }

    pub fn dot(self, o: Pt) -> f64 {
        self.y * o.y + self.x * o.x
    }

    /// z-component of the cross product with `x` as the first axis.
    pub fn cross(self, o: Pt) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.y.hypot(self.x)
    }

    pub fn midpoint(self, o: Pt) -> Pt {
        Pt::new((self.y + o.y) * 0.5, (self.x + o.x) * 0.5)
    }

    pub fn distance(self, o: Pt) -> f64 {
        self.sub(o).norm()
    }
}

fn cross_i(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    // points are (y, x); cross in (x, y) orientation
    (a.1 - o.1) * (b.0 - o.0) - (a.0 - o.0) * (b.1 - o.1)
}

/// Monotone-chain convex hull of integer points; collinear points dropped.
/// Returned counter-clockwise in (x, y) orientation, starting at the
/// lexicographically smallest `(x, y)` point.
pub fn convex_hull(points: &[(i64, i64)]) -> Vec<(i64, i64)> {
    let mut pts: Vec<(i64, i64)> = points.to_vec();
    pts.sort_unstable_by_key(|&(y, x)| (x, y));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<(i64, i64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross_i(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(i64, i64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross_i(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Edges of a [`RotatedRect`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RectEdge {
    Superior,
    Inferior,
}

/// Minimum-area enclosing rectangle.
///
/// Corners are ordered `[superior-a, superior-b, inferior-b, inferior-a]`
/// where `a` is the smaller-x end of the superior edge, so edge 0–1 is the
/// superior edge, 2–3 the inferior edge, and the corners run around the
/// rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatedRect {
    pub corners: [Pt; 4],
    /// Integer direction of the hull edge the rectangle is flush with.
    pub axis: (i64, i64),
    pub area: f64,
}

impl RotatedRect {
    pub fn edge(&self, edge: RectEdge) -> (Pt, Pt) {
        match edge {
            RectEdge::Superior => (self.corners[0], self.corners[1]),
            RectEdge::Inferior => (self.corners[3], self.corners[2]),
        }
    }

    /// Side lengths `(edge 0–1, edge 1–2)`.
    pub fn sides(&self) -> (f64, f64) {
        (
            self.corners[0].distance(self.corners[1]),
            self.corners[1].distance(self.corners[2]),
        )
    }

    pub fn center(&self) -> Pt {
        self.corners[0].midpoint(self.corners[2])
    }

    /// Exact integer direction of `edge`, oriented toward increasing x.
    ///
    /// The rectangle is flush with a hull edge, so every side is parallel or
    /// perpendicular to [`RotatedRect::axis`]; angles computed from this
    /// vector are free of corner round-off.
    pub fn edge_direction(&self, edge: RectEdge) -> (i64, i64) {
        let (a, b) = self.edge(edge);
        snap_to_axis(self.axis, b.sub(a))
    }

    /// Angle of the longer side in degrees, in (−90, 90].
    pub fn long_axis_angle_deg(&self) -> f64 {
        let (a, b) = self.sides();
        let d = if a >= b {
            self.corners[1].sub(self.corners[0])
        } else {
            self.corners[2].sub(self.corners[1])
        };
        let (dy, dx) = snap_to_axis(self.axis, d);
        (dy as f64).atan2(dx as f64).to_degrees()
    }

    /// Angle of `edge` in degrees, measured from the +x axis toward +y
    /// (downward), in (−90, 90].
    pub fn edge_angle_deg(&self, edge: RectEdge) -> f64 {
        let (dy, dx) = self.edge_direction(edge);
        (dy as f64).atan2(dx as f64).to_degrees()
    }
}

/// The integer vector parallel or perpendicular to `axis` that best matches
/// `d`, oriented toward increasing x.
fn snap_to_axis(axis: (i64, i64), d: Pt) -> (i64, i64) {
    let (vy, vx) = axis;
    let along = (d.y * vy as f64 + d.x * vx as f64).abs();
    let across = (d.y * vx as f64 - d.x * vy as f64).abs();
    let (dy, dx) = if along >= across { (vy, vx) } else { (-vx, vy) };
    if dx > 0 || (dx == 0 && dy > 0) {
        (dy, dx)
    } else {
        (-dy, -dx)
    }
}

/// Minimum-area rectangle of integer points `(y, x)` by hull-edge
/// enumeration (rotating calipers).
///
/// Candidate areas are compared exactly in integer arithmetic, so the chosen
/// hull edge depends only on the shape of the point set and not on its
/// position or on a uniform integer scaling.
pub fn min_area_rect(points: &[(i64, i64)]) -> Result<RotatedRect> {
    let hull = convex_hull(points);
    if hull.len() < 3 {
        return Err(Error::DegenerateRegion(format!(
            "{} distinct point(s) span no area",
            hull.len()
        )));
    }
    let origin = hull[0];
    let rel: Vec<(i64, i64)> = hull
        .iter()
        .map(|&(y, x)| (y - origin.0, x - origin.1))
        .collect();
    // (width·height·|a|², |a|², axis, [lo_e, hi_e, lo_n, hi_n]) in units of |a|
    let mut best: Option<(i128, i128, (i64, i64), [i64; 4])> = None;
    for i in 0..rel.len() {
        let (a, b) = (rel[i], rel[(i + 1) % rel.len()]);
        let g = gcd(b.0 - a.0, b.1 - a.1);
        let axis = ((b.0 - a.0) / g, (b.1 - a.1) / g);
        let (mut lo_e, mut hi_e, mut lo_n, mut hi_n) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
        for &(py, px) in &rel {
            let pe = py * axis.0 + px * axis.1;
            let pn = py * axis.1 - px * axis.0;
            lo_e = lo_e.min(pe);
            hi_e = hi_e.max(pe);
            lo_n = lo_n.min(pn);
            hi_n = hi_n.max(pn);
        }
        let num = (hi_e - lo_e) as i128 * (hi_n - lo_n) as i128;
        let den = axis.0 as i128 * axis.0 as i128 + axis.1 as i128 * axis.1 as i128;
        let better = match best {
            None => true,
            Some((bn, bd, ..)) => num * bd < bn * den,
        };
        if better {
            best = Some((num, den, axis, [lo_e, hi_e, lo_n, hi_n]));
        }
    }
    let (num, den, axis, [lo_e, hi_e, lo_n, hi_n]) = best.expect("hull has edges");
    let len2 = den as f64;
    let e = Pt::new(axis.0 as f64, axis.1 as f64);
    let n = Pt::new(axis.1 as f64, -(axis.0 as f64));
    let o = Pt::new(origin.0 as f64, origin.1 as f64);
    let at = |s: i64, t: i64| {
        o.add(e.scale(s as f64 / len2))
            .add(n.scale(t as f64 / len2))
    };
    let ring = [
        at(lo_e, lo_n),
        at(hi_e, lo_n),
        at(hi_e, hi_n),
        at(lo_e, hi_n),
    ];
    Ok(RotatedRect {
        corners: order_corners(ring),
        axis,
        area: num as f64 / len2,
    })
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// Reorder a corner ring so the superior edge (smallest mean y) comes first.
fn order_corners(ring: [Pt; 4]) -> [Pt; 4] {
    let mut sup = 0;
    let mut best = (f64::MAX, f64::MAX);
    for i in 0..4 {
        let (p, q) = (ring[i], ring[(i + 1) % 4]);
        let key = ((p.y + q.y) * 0.5, (p.x + q.x) * 0.5);
        if key.0 < best.0 - 1e-9 || ((key.0 - best.0).abs() <= 1e-9 && key.1 < best.1) {
            best = key;
            sup = i;
        }
    }
    let (p, q) = (ring[sup], ring[(sup + 1) % 4]);
    let p_after = ring[(sup + 3) % 4]; // neighbour of p off the superior edge
    let q_after = ring[(sup + 2) % 4]; // neighbour of q off the superior edge
    let p_first = p.x < q.x || (p.x == q.x && p.y < q.y);
    if p_first {
        [p, q, q_after, p_after]
    } else {
        [q, p, p_after, q_after]
    }
}

/// Minimum-area rotated rectangle of a region's pixel centers, in image
/// coordinates.
pub fn min_rotated_rect(region: &Region) -> Result<RotatedRect> {
    if region.area() < 3 {
        return Err(Error::DegenerateRegion(format!(
            "area {} below 3",
            region.area()
        )));
    }
    let pts: Vec<(i64, i64)> = region
        .pixels()
        .iter()
        .map(|&(y, x)| (y as i64, x as i64))
        .collect();
    min_area_rect(&pts)
}

/// Minimum-area rectangle of the union of the unit pixel squares around
/// `points`. Unlike the pixel-center rectangle, this one scales exactly when
/// every pixel is replaced by an `s`×`s` block.
pub fn footprint_rect(points: &[(i64, i64)]) -> Result<RotatedRect> {
    let corners: Vec<(i64, i64)> = points
        .iter()
        .flat_map(|&(y, x)| {
            [(-1, -1), (-1, 1), (1, 1), (1, -1)].map(|(dy, dx)| (2 * y + dy, 2 * x + dx))
        })
        .collect();
    let r = min_area_rect(&corners)?;
    Ok(RotatedRect {
        corners: r.corners.map(|c| c.scale(0.5)),
        axis: r.axis,
        area: r.area * 0.25,
    })
}
