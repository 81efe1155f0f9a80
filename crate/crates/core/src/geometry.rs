//! Planar geometry in micrometres: points, rectangles, polygons and
//! rectangle clipping of arbitrary simple polygons.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Axis-aligned rectangle `[x_min, x_max] x [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn centered(cx: f64, cy: f64, half: f64) -> Self {
        Self::new(cx - half, cy - half, cx + half, cy + half)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn has_positive_area(&self) -> bool {
        self.width() > 0.0 && self.height() > 0.0
    }

    /// Closed-interval overlap test.
    pub fn intersects(&self, other: &Rect) -> bool {
        self.x_min <= other.x_max
            && other.x_min <= self.x_max
            && self.y_min <= other.y_max
            && other.y_min <= self.y_max
    }

    /// Overlap with positive area.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.x_min < other.x_max
            && other.x_min < self.x_max
            && self.y_min < other.y_max
            && other.y_min < self.y_max
    }

    pub fn union(&self, other: &Rect) -> Rect {
        Rect::new(
            self.x_min.min(other.x_min),
            self.y_min.min(other.y_min),
            self.x_max.max(other.x_max),
            self.y_max.max(other.y_max),
        )
    }
}

/// A simple polygon without the duplicated closing vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub points: Vec<Point2>,
}

impl Polygon {
    pub fn new(points: Vec<Point2>) -> Self {
        Self { points }
    }

    pub fn from_rect(r: &Rect) -> Self {
        Self::new(vec![
            Point2::new(r.x_min, r.y_min),
            Point2::new(r.x_max, r.y_min),
            Point2::new(r.x_max, r.y_max),
            Point2::new(r.x_min, r.y_max),
        ])
    }

    /// Shoelace area, positive for counter-clockwise orientation.
    pub fn signed_area(&self) -> f64 {
        let n = self.points.len();
        if n < 3 {
            return 0.0;
        }
        let mut acc = 0.0;
        for i in 0..n {
            let a = self.points[i];
            let b = self.points[(i + 1) % n];
            acc += a.x * b.y - b.x * a.y;
        }
        0.5 * acc
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn bbox(&self) -> Rect {
        let mut r = Rect::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.points {
            r.x_min = r.x_min.min(p.x);
            r.y_min = r.y_min.min(p.y);
            r.x_max = r.x_max.max(p.x);
            r.y_max = r.y_max.max(p.y);
        }
        r
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Polygon {
        Polygon::new(
            self.points
                .iter()
                .map(|p| Point2::new(p.x + dx, p.y + dy))
                .collect(),
        )
    }

    /// Crossing-number test with half-open edges: a point on a left or bottom
    /// edge of a rectangle is inside, a point on a right or top edge is not.
    pub fn contains(&self, p: Point2) -> bool {
        let n = self.points.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let a = self.points[i];
            let b = self.points[j];
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// Decompose into trapezoids bounded by horizontal lines through every
    /// vertex. Each piece is convex and y-monotone; their union is the
    /// polygon (even-odd fill).
    pub fn trapezoids(&self) -> Vec<Polygon> {
        let n = self.points.len();
        if n < 3 {
            return Vec::new();
        }
        let mut ys: Vec<f64> = self.points.iter().map(|p| p.y).collect();
        ys.sort_by(f64::total_cmp);
        ys.dedup();

        let mut out = Vec::new();
        let mut crossings: Vec<(f64, f64, f64)> = Vec::new();
        for w in ys.windows(2) {
            let (y0, y1) = (w[0], w[1]);
            let ym = 0.5 * (y0 + y1);
            crossings.clear();
            for i in 0..n {
                let a = self.points[i];
                let b = self.points[(i + 1) % n];
                let (lo, hi) = if a.y < b.y { (a, b) } else { (b, a) };
                if lo.y == hi.y || lo.y > y0 || hi.y < y1 {
                    continue;
                }
                let x_at = |y: f64| {
                    if y == lo.y {
                        lo.x
                    } else if y == hi.y {
                        hi.x
                    } else {
                        lo.x + (y - lo.y) * (hi.x - lo.x) / (hi.y - lo.y)
                    }
                };
                crossings.push((x_at(ym), x_at(y0), x_at(y1)));
            }
            crossings.sort_by(|a, b| a.0.total_cmp(&b.0));
            for pair in crossings.chunks_exact(2) {
                let (l, r) = (pair[0], pair[1]);
                let mut pts = vec![
                    Point2::new(l.1, y0),
                    Point2::new(r.1, y0),
                    Point2::new(r.2, y1),
                    Point2::new(l.2, y1),
                ];
                pts.dedup();
                if pts.len() > 1 && pts.first() == pts.last() {
                    pts.pop();
                }
                if pts.len() >= 3 {
                    out.push(Polygon::new(pts));
                }
            }
        }
        out
    }

    /// Clip against an axis-aligned window. Concave inputs are split into
    /// convex trapezoids first, so the result may hold several pieces.
    pub fn clip_to_rect(&self, window: &Rect) -> Vec<Polygon> {
        let bb = self.bbox();
        if !bb.overlaps(window) {
            return Vec::new();
        }
        if bb.x_min >= window.x_min
            && bb.x_max <= window.x_max
            && bb.y_min >= window.y_min
            && bb.y_max <= window.y_max
        {
            return vec![self.clone()];
        }
        if self.is_convex() {
            return clip_convex(self, window).into_iter().collect();
        }
        self.trapezoids()
            .into_iter()
            .filter_map(|t| clip_convex(&t, window))
            .collect()
    }

    pub fn is_convex(&self) -> bool {
        let n = self.points.len();
        if n < 3 {
            return false;
        }
        let mut sign = 0.0f64;
        for i in 0..n {
            let a = self.points[i];
            let b = self.points[(i + 1) % n];
            let c = self.points[(i + 2) % n];
            let cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
            if cross != 0.0 {
                if sign != 0.0 && cross.signum() != sign {
                    return false;
                }
                sign = cross.signum();
            }
        }
        true
    }
}

#[derive(Clone, Copy)]
enum Side {
    Left(f64),
    Right(f64),
    Bottom(f64),
    Top(f64),
}

impl Side {
    fn inside(self, p: Point2) -> bool {
        match self {
            Side::Left(x) => p.x >= x,
            Side::Right(x) => p.x <= x,
            Side::Bottom(y) => p.y >= y,
            Side::Top(y) => p.y <= y,
        }
    }

    fn intersect(self, a: Point2, b: Point2) -> Point2 {
        match self {
            Side::Left(x) | Side::Right(x) => {
                let t = (x - a.x) / (b.x - a.x);
                Point2::new(x, a.y + t * (b.y - a.y))
            }
            Side::Bottom(y) | Side::Top(y) => {
                let t = (y - a.y) / (b.y - a.y);
                Point2::new(a.x + t * (b.x - a.x), y)
            }
        }
    }
}

/// Sutherland-Hodgman against the four window half-planes. Exact for convex
/// input; returns `None` when nothing with positive area survives.
fn clip_convex(poly: &Polygon, window: &Rect) -> Option<Polygon> {
    let mut pts = poly.points.clone();
    for side in [
        Side::Left(window.x_min),
        Side::Right(window.x_max),
        Side::Bottom(window.y_min),
        Side::Top(window.y_max),
    ] {
        if pts.is_empty() {
            break;
        }
        let input = std::mem::take(&mut pts);
        let n = input.len();
        for i in 0..n {
            let cur = input[i];
            let prev = input[(i + n - 1) % n];
            match (side.inside(prev), side.inside(cur)) {
                (true, true) => pts.push(cur),
                (true, false) => pts.push(side.intersect(prev, cur)),
                (false, true) => {
                    pts.push(side.intersect(prev, cur));
                    pts.push(cur);
                }
                (false, false) => {}
            }
        }
    }
    pts.dedup();
    if pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    let out = Polygon::new(pts);
    (out.points.len() >= 3 && out.area() > 0.0).then_some(out)
}

/// Segment intersection test used for simplicity validation. Adjacent edges
/// sharing an endpoint are not considered intersecting.
pub(crate) fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    fn orient(p: Point2, q: Point2, r: Point2) -> f64 {
        (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x)
    }
    fn on_segment(p: Point2, q: Point2, r: Point2) -> bool {
        r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    }
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// True when no two non-adjacent edges touch and adjacent edges only share
/// their common vertex.
pub fn is_simple(points: &[Point2]) -> bool {
    let n = points.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        if a == b {
            return false;
        }
        for j in (i + 1)..n {
            let c = points[j];
            let d = points[(j + 1) % n];
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // Collinear fold-back: the shared vertex is the only contact allowed.
                let (shared, other_ab, other_cd) = if j == i + 1 { (b, a, d) } else { (a, b, c) };
                let cross = (other_ab.x - shared.x) * (other_cd.y - shared.y)
                    - (other_ab.y - shared.y) * (other_cd.x - shared.x);
                let dot = (other_ab.x - shared.x) * (other_cd.x - shared.x)
                    + (other_ab.y - shared.y) * (other_cd.y - shared.y);
                if cross == 0.0 && dot > 0.0 {
                    return false;
                }
                continue;
            }
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}
