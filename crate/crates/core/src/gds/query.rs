//! Hierarchy flattening and window queries.

use std::collections::{BTreeSet, HashMap};

use super::{Cell, GdsError, LayoutDatabase, StructRef};
use crate::geometry::{Point2, Polygon, Rect};

/// Orthogonal affine map `p -> M p + t` in database units.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Affine {
    m: [f64; 4],
    t: [f64; 2],
}

impl Affine {
    const IDENTITY: Affine = Affine {
        m: [1.0, 0.0, 0.0, 1.0],
        t: [0.0, 0.0],
    };

    fn of_ref(r: &StructRef) -> Self {
        let (c, s) = r.rotation.cos_sin();
        let m = if r.mirror_x {
            [c, s, s, -c]
        } else {
            [c, -s, s, c]
        };
        Affine {
            m,
            t: [f64::from(r.origin.x), f64::from(r.origin.y)],
        }
    }

    fn apply(&self, p: Point2) -> Point2 {
        Point2::new(
            self.m[0] * p.x + self.m[1] * p.y + self.t[0],
            self.m[2] * p.x + self.m[3] * p.y + self.t[1],
        )
    }

    /// `self ∘ inner`
    fn then_inner(&self, inner: &Affine) -> Affine {
        let a = &self.m;
        let b = &inner.m;
        Affine {
            m: [
                a[0] * b[0] + a[1] * b[2],
                a[0] * b[1] + a[1] * b[3],
                a[2] * b[0] + a[3] * b[2],
                a[2] * b[1] + a[3] * b[3],
            ],
            t: [
                a[0] * inner.t[0] + a[1] * inner.t[1] + self.t[0],
                a[2] * inner.t[0] + a[3] * inner.t[1] + self.t[1],
            ],
        }
    }

    fn translated(&self, dx: f64, dy: f64) -> Affine {
        Affine {
            m: self.m,
            t: [self.t[0] + dx, self.t[1] + dy],
        }
    }

    fn rect(&self, r: &Rect) -> Rect {
        let a = self.apply(Point2::new(r.x_min, r.y_min));
        let b = self.apply(Point2::new(r.x_max, r.y_max));
        Rect::new(a.x.min(b.x), a.y.min(b.y), a.x.max(b.x), a.y.max(b.y))
    }
}

/// Outline of a path with flush (square, non-extended) ends. Joins are
/// mitred, which is exact for Manhattan routing. Returns `None` for paths
/// that fold back on themselves.
pub fn path_outline(points: &[Point2], width: f64) -> Option<Polygon> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.dedup();
    if pts.len() < 2 || width <= 0.0 {
        return None;
    }
    let hw = 0.5 * width;
    let normals: Vec<(f64, f64)> = pts
        .windows(2)
        .map(|w| {
            let (dx, dy) = (w[1].x - w[0].x, w[1].y - w[0].y);
            let len = dx.hypot(dy);
            (-dy / len, dx / len)
        })
        .collect();
    let n = pts.len();
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    for i in 0..n {
        let (nx, ny) = if i == 0 {
            normals[0]
        } else if i == n - 1 {
            normals[n - 2]
        } else {
            let (a, b) = (normals[i - 1], normals[i]);
            let denom = 1.0 + a.0 * b.0 + a.1 * b.1;
            if denom.abs() < 1e-12 {
                return None;
            }
            ((a.0 + b.0) / denom, (a.1 + b.1) / denom)
        };
        let p = pts[i];
        left.push(Point2::new(p.x + hw * nx, p.y + hw * ny));
        right.push(Point2::new(p.x - hw * nx, p.y - hw * ny));
    }
    right.reverse();
    left.extend(right);
    left.dedup();
    Some(Polygon::new(left))
}

type LayerKey = (i16, i16);

/// Read-only query structure over a validated database. Holds per-layer
/// bounding boxes of every cell so window queries prune whole subtrees and
/// array ranges. `Sync`, so one index can serve many workers.
pub struct LayoutIndex<'a> {
    db: &'a LayoutDatabase,
    top: Option<usize>,
    targets: Vec<Vec<usize>>,
    db_per_um: f64,
    bboxes: HashMap<LayerKey, Vec<Option<Rect>>>,
}

impl<'a> LayoutIndex<'a> {
    pub fn new(db: &'a LayoutDatabase) -> Result<Self, GdsError> {
        db.validate()?;
        let by_name: HashMap<&str, usize> = db
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| (c.name.as_str(), i))
            .collect();
        let targets = db
            .cells
            .iter()
            .map(|c| c.refs.iter().map(|r| by_name[r.target.as_str()]).collect())
            .collect();
        let top = db.top_cell().map(|name| by_name[name]);
        let layers: BTreeSet<LayerKey> = db
            .cells
            .iter()
            .flat_map(|c| {
                c.boundaries
                    .iter()
                    .map(|b| (b.layer, b.datatype))
                    .chain(c.paths.iter().map(|p| (p.layer, p.datatype)))
            })
            .collect();
        let mut index = LayoutIndex {
            db,
            top,
            targets,
            db_per_um: db.db_units_per_um(),
            bboxes: HashMap::new(),
        };
        for key in layers {
            let mut memo = vec![None; db.cells.len()];
            let mut done = vec![false; db.cells.len()];
            for i in 0..db.cells.len() {
                index.cell_bbox(i, key, &mut memo, &mut done);
            }
            index.bboxes.insert(key, memo);
        }
        Ok(index)
    }

    pub fn database(&self) -> &LayoutDatabase {
        self.db
    }

    /// Bounding box of all geometry reachable from the top cell, in µm.
    pub fn extent(&self) -> Option<Rect> {
        let top = self.top?;
        self.bboxes
            .values()
            .filter_map(|v| v[top])
            .reduce(|a, b| a.union(&b))
            .map(|r| self.to_um_rect(&r))
    }

    /// Layer extent in µm, if the layer holds any geometry under the top cell.
    pub fn layer_extent(&self, layer: i16, datatype: i16) -> Option<Rect> {
        let top = self.top?;
        self.bboxes
            .get(&(layer, datatype))
            .and_then(|v| v[top])
            .map(|r| self.to_um_rect(&r))
    }

    fn to_um_rect(&self, r: &Rect) -> Rect {
        Rect::new(
            r.x_min / self.db_per_um,
            r.y_min / self.db_per_um,
            r.x_max / self.db_per_um,
            r.y_max / self.db_per_um,
        )
    }

    fn cell_bbox(
        &self,
        i: usize,
        key: LayerKey,
        memo: &mut Vec<Option<Rect>>,
        done: &mut Vec<bool>,
    ) -> Option<Rect> {
        if done[i] {
            return memo[i];
        }
        let cell = &self.db.cells[i];
        let mut acc: Option<Rect> = None;
        let mut grow = |r: Rect| {
            acc = Some(acc.map_or(r, |a| a.union(&r)));
        };
        for poly in local_polygons(cell, key) {
            grow(poly.bbox());
        }
        for (r, &child) in cell.refs.iter().zip(&self.targets[i]) {
            let Some(cb) = self.cell_bbox(child, key, memo, done) else {
                continue;
            };
            let base = Affine::of_ref(r).rect(&cb);
            grow(base);
            if let Some(a) = r.array {
                let (cv, rv) = array_steps(r);
                let last = base.translated_by(
                    cv.0 * f64::from(a.cols - 1) + rv.0 * f64::from(a.rows - 1),
                    cv.1 * f64::from(a.cols - 1) + rv.1 * f64::from(a.rows - 1),
                );
                let c_only = base.translated_by(cv.0 * f64::from(a.cols - 1), cv.1 * f64::from(a.cols - 1));
                let r_only = base.translated_by(rv.0 * f64::from(a.rows - 1), rv.1 * f64::from(a.rows - 1));
                grow(last);
                grow(c_only);
                grow(r_only);
            }
        }
        memo[i] = acc;
        done[i] = true;
        acc
    }

    /// Flattened polygons on `(layer, datatype)` intersecting `window` (µm),
    /// clipped to it, in µm.
    pub fn query(&self, layer: i16, datatype: i16, window: &Rect) -> Vec<Polygon> {
        let mut out = Vec::new();
        let (Some(top), Some(boxes)) = (self.top, self.bboxes.get(&(layer, datatype))) else {
            return out;
        };
        if !window.has_positive_area() {
            return out;
        }
        let s = self.db_per_um;
        let window_db = Rect::new(
            window.x_min * s - 1.0,
            window.y_min * s - 1.0,
            window.x_max * s + 1.0,
            window.y_max * s + 1.0,
        );
        let mut ctx = Flatten {
            index: self,
            key: (layer, datatype),
            boxes,
            window_db,
            window_um: *window,
            out: &mut out,
        };
        ctx.visit(top, &Affine::IDENTITY);
        out
    }
}

trait Translate {
    fn translated_by(&self, dx: f64, dy: f64) -> Rect;
}

impl Translate for Rect {
    fn translated_by(&self, dx: f64, dy: f64) -> Rect {
        Rect::new(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)
    }
}

/// Column and row pitch vectors of an array reference, in the parent frame.
fn array_steps(r: &StructRef) -> ((f64, f64), (f64, f64)) {
    let a = r.array.expect("array reference");
    let o = r.origin;
    (
        (
            f64::from(a.col_end.x - o.x) / f64::from(a.cols),
            f64::from(a.col_end.y - o.y) / f64::from(a.cols),
        ),
        (
            f64::from(a.row_end.x - o.x) / f64::from(a.rows),
            f64::from(a.row_end.y - o.y) / f64::from(a.rows),
        ),
    )
}

fn local_polygons(cell: &Cell, key: LayerKey) -> impl Iterator<Item = Polygon> + '_ {
    let boundaries = cell
        .boundaries
        .iter()
        .filter(move |b| (b.layer, b.datatype) == key)
        .map(|b| {
            Polygon::new(
                b.points
                    .iter()
                    .map(|p| Point2::new(f64::from(p.x), f64::from(p.y)))
                    .collect(),
            )
        });
    let paths = cell
        .paths
        .iter()
        .filter(move |p| (p.layer, p.datatype) == key)
        .filter_map(|p| {
            let pts: Vec<Point2> = p
                .points
                .iter()
                .map(|q| Point2::new(f64::from(q.x), f64::from(q.y)))
                .collect();
            path_outline(&pts, f64::from(p.width))
        });
    boundaries.chain(paths)
}

struct Flatten<'i, 'a> {
    index: &'i LayoutIndex<'a>,
    key: LayerKey,
    boxes: &'i [Option<Rect>],
    window_db: Rect,
    window_um: Rect,
    out: &'i mut Vec<Polygon>,
}

impl Flatten<'_, '_> {
    fn visit(&mut self, cell_idx: usize, xf: &Affine) {
        let cell = &self.index.db.cells[cell_idx];
        let s = self.index.db_per_um;
        for poly in local_polygons(cell, self.key) {
            let global = Polygon::new(poly.points.iter().map(|&p| xf.apply(p)).collect());
            if !global.bbox().overlaps(&self.window_db) {
                continue;
            }
            let um = Polygon::new(
                global
                    .points
                    .iter()
                    .map(|p| Point2::new(p.x / s, p.y / s))
                    .collect(),
            );
            self.out.extend(um.clip_to_rect(&self.window_um));
        }
        for (r, &child) in cell.refs.iter().zip(&self.index.targets[cell_idx]) {
            let Some(child_box) = self.boxes[child] else {
                continue;
            };
            let placed = xf.then_inner(&Affine::of_ref(r));
            let Some(a) = r.array else {
                if placed.rect(&child_box).overlaps(&self.window_db) {
                    self.visit(child, &placed);
                }
                continue;
            };
            let (cv, rv) = array_steps(r);
            // Instance extents in the parent frame.
            let base = xf.rect(&Affine::of_ref(r).rect(&child_box));
            let gcv = (xf.m[0] * cv.0 + xf.m[1] * cv.1, xf.m[2] * cv.0 + xf.m[3] * cv.1);
            let grv = (xf.m[0] * rv.0 + xf.m[1] * rv.1, xf.m[2] * rv.0 + xf.m[3] * rv.1);
            let (cols, rows) = (a.cols as i64, a.rows as i64);
            let (c_range, r_range) = match (axis_range(gcv, &base, &self.window_db, cols), axis_range(grv, &base, &self.window_db, rows)) {
                (Some(c), Some(r)) => (c, r),
                _ => ((0, cols - 1), (0, rows - 1)),
            };
            for j in r_range.0..=r_range.1 {
                for i in c_range.0..=c_range.1 {
                    let (fi, fj) = (i as f64, j as f64);
                    let dx = gcv.0 * fi + grv.0 * fj;
                    let dy = gcv.1 * fi + grv.1 * fj;
                    if !base.translated_by(dx, dy).overlaps(&self.window_db) {
                        continue;
                    }
                    let inst = xf
                        .then_inner(&Affine::of_ref(r).translated(cv.0 * fi + rv.0 * fj, cv.1 * fi + rv.1 * fj));
                    self.visit(child, &inst);
                }
            }
        }
    }
}

/// Index range `[lo, hi]` of array steps along `step` whose translated
/// `base` can overlap `window`, when `step` is axis aligned. `None` when the
/// step is oblique (caller scans everything). Empty ranges come back as
/// `lo > hi`.
fn axis_range(step: (f64, f64), base: &Rect, window: &Rect, count: i64) -> Option<(i64, i64)> {
    let (s, lo_b, hi_b, lo_w, hi_w) = if step.1 == 0.0 {
        (step.0, base.x_min, base.x_max, window.x_min, window.x_max)
    } else if step.0 == 0.0 {
        (step.1, base.y_min, base.y_max, window.y_min, window.y_max)
    } else {
        return None;
    };
    if s == 0.0 {
        return Some((0, count - 1));
    }
    // Need lo_b + k s < hi_w and hi_b + k s > lo_w.
    let a = (lo_w - hi_b) / s;
    let b = (hi_w - lo_b) / s;
    let (kmin, kmax) = if a < b { (a, b) } else { (b, a) };
    let lo = (kmin.floor() as i64).max(0);
    let hi = (kmax.ceil() as i64).min(count - 1);
    Some((lo, hi))
}

/// Flatten, convert to µm and clip every polygon on `(layer, datatype)` to
/// `window` (µm).
pub fn query_window(
    db: &LayoutDatabase,
    layer: i16,
    datatype: i16,
    window: &Rect,
) -> Result<Vec<Polygon>, GdsError> {
    Ok(LayoutIndex::new(db)?.query(layer, datatype, window))
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;

    fn rect_boundary(layer: i16, x0: i32, y0: i32, x1: i32, y1: i32) -> Boundary {
        Boundary {
            layer,
            datatype: 0,
            points: vec![
                Point::new(x0, y0),
                Point::new(x1, y0),
                Point::new(x1, y1),
                Point::new(x0, y1),
            ],
        }
    }

    #[test]
    fn straight_path_outline_is_rectangle() {
        let out = path_outline(&[Point2::new(0.0, 0.0), Point2::new(10.0, 0.0)], 2.0).unwrap();
        assert_eq!(out.area(), 20.0);
        assert_eq!(out.bbox(), Rect::new(0.0, -1.0, 10.0, 1.0));
    }

    #[test]
    fn bent_path_outline_area() {
        // L-shaped centre line: 10 right then 10 up, width 2.
        let out = path_outline(
            &[Point2::new(0.0, 0.0), Point2::new(10.0, 0.0), Point2::new(10.0, 10.0)],
            2.0,
        )
        .unwrap();
        // Two 10x2 arms overlapping in a 1x1 corner square region counted once:
        // outer corner adds 1, inner corner removes 1.
        assert!((out.area() - 40.0).abs() < 1e-12);
        assert!(crate::geometry::is_simple(&out.points));
    }

    #[test]
    fn rotated_and_mirrored_reference() {
        let mut db = LayoutDatabase::new("LIB");
        let mut leaf = Cell::new("LEAF");
        leaf.boundaries.push(rect_boundary(1, 0, 0, 2000, 1000));
        let mut top = Cell::new("TOP");
        top.refs.push(StructRef {
            target: "LEAF".into(),
            origin: Point::new(10_000, 10_000),
            rotation: Rotation::R90,
            mirror_x: true,
            array: None,
        });
        db.cells = vec![leaf, top];
        let polys = query_window(&db, 1, 0, &Rect::new(0.0, 0.0, 20.0, 20.0)).unwrap();
        assert_eq!(polys.len(), 1);
        // mirror: (x, -y) -> [0,2]x[-1,0]; rotate 90: (-y, x) -> [0,1]x[0,2]
        assert_eq!(polys[0].bbox(), Rect::new(10.0, 10.0, 11.0, 12.0));
    }

    #[test]
    fn array_range_pruning_matches_full_scan() {
        let mut db = LayoutDatabase::new("LIB");
        let mut via = Cell::new("VIA");
        via.boundaries.push(rect_boundary(3, 0, 0, 100, 100));
        let mut top = Cell::new("TOP");
        top.refs.push(StructRef {
            target: "VIA".into(),
            origin: Point::new(0, 0),
            rotation: Rotation::R0,
            mirror_x: false,
            array: Some(ArraySpec {
                cols: 50,
                rows: 40,
                col_end: Point::new(50 * 400, 0),
                row_end: Point::new(0, 40 * 400),
            }),
        });
        db.cells = vec![via, top];
        let idx = LayoutIndex::new(&db).unwrap();
        let w = Rect::new(1.05, 2.0, 3.0, 4.05);
        let got = idx.query(3, 0, &w);
        let area: f64 = got.iter().map(Polygon::area).sum();
        // Brute force over every instance.
        let mut expected = 0.0;
        for j in 0..40 {
            for i in 0..50 {
                let r = Rect::new(0.4 * i as f64, 0.4 * j as f64, 0.4 * i as f64 + 0.1, 0.4 * j as f64 + 0.1);
                let ox = (r.x_max.min(w.x_max) - r.x_min.max(w.x_min)).max(0.0);
                let oy = (r.y_max.min(w.y_max) - r.y_min.max(w.y_min)).max(0.0);
                expected += ox * oy;
            }
        }
        assert!((area - expected).abs() < 1e-9, "{area} vs {expected}");
    }
}
