#![allow(dead_code)]

use beol_therm::gds::{ArraySpec, Boundary, Cell, LayoutDatabase, PathElement, Point, Rotation, StructRef};
use beol_therm::rve::VoxelGrid;
use proptest::prelude::*;
use beol_therm::stack::Material;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn mat(name: &str, k: f64) -> Material {
    Material {
        name: name.into(),
        conductivity: k,
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Lower half in z is phase `k.0`, upper half phase `k.1`.
pub fn laminate(n: [usize; 3], size: [f64; 3], k: (f64, f64)) -> VoxelGrid {
    let mut g = VoxelGrid::uniform(n, size, mat("a", k.0));
    g.materials.push(mat("b", k.1));
    for kz in n[2] / 2..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                let v = g.voxel_index(i, j, kz);
                g.material_id[v] = 1;
            }
        }
    }
    g
}

/// Random two-phase grid with uneven z spacing.
pub fn random_grid(seed: u64, n: [usize; 3], contrast: f64) -> VoxelGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dz: Vec<f64> = (0..n[2]).map(|_| rng.gen_range(0.05..0.3)).collect();
    let ids: Vec<u8> = (0..n[0] * n[1] * n[2]).map(|_| rng.gen_bool(0.4) as u8).collect();
    VoxelGrid::new(
        (n[0], n[1]),
        (rng.gen_range(0.05..0.2), rng.gen_range(0.05..0.2)),
        dz,
        ids,
        vec![mat("low", 1.0), mat("high", contrast)],
        [0.0; 3],
    )
    .unwrap()
}

fn arb_point() -> impl Strategy<Value = Point> {
    (-100_000i32..100_000, -100_000i32..100_000).prop_map(|(x, y)| Point::new(x, y))
}

fn arb_boundary() -> impl Strategy<Value = Boundary> {
    (0i16..64, 0i16..4, arb_point(), 1i32..5000, 1i32..5000).prop_map(|(layer, datatype, p, w, h)| Boundary {
        layer,
        datatype,
        points: vec![p, Point::new(p.x + w, p.y), Point::new(p.x + w, p.y + h), Point::new(p.x, p.y + h)],
    })
}

fn arb_path() -> impl Strategy<Value = PathElement> {
    (0i16..64, 0i16..4, 1i32..500, prop::collection::vec(arb_point(), 2..6)).prop_map(
        |(layer, datatype, half, points)| PathElement {
            layer,
            datatype,
            width: 2 * half,
            points,
        },
    )
}

pub fn arb_rotation() -> impl Strategy<Value = Rotation> {
    prop_oneof![
        Just(Rotation::R0),
        Just(Rotation::R90),
        Just(Rotation::R180),
        Just(Rotation::R270)
    ]
}

fn arb_ref(targets: usize) -> impl Strategy<Value = (usize, StructRef)> {
    (
        0..targets,
        arb_point(),
        arb_rotation(),
        any::<bool>(),
        prop::option::of((1u16..6, 1u16..6, 1i32..3000, 1i32..3000)),
    )
        .prop_map(|(t, origin, rotation, mirror_x, array)| {
            let array = array.map(|(cols, rows, px, py)| ArraySpec {
                cols,
                rows,
                col_end: Point::new(origin.x + cols as i32 * px, origin.y),
                row_end: Point::new(origin.x, origin.y + rows as i32 * py),
            });
            (
                t,
                StructRef {
                    target: String::new(),
                    origin,
                    rotation,
                    mirror_x,
                    array,
                },
            )
        })
}

/// Random acyclic library: cell `i` only references cells before it.
pub fn arb_layout() -> impl Strategy<Value = LayoutDatabase> {
    let units = prop_oneof![
        Just((1e-3, 1e-9)),
        Just((1e-4, 1e-10)),
        (1e-6f64..1.0, 1e-12f64..1e-6),
    ];
    let cells = prop::collection::vec(
        (
            prop::collection::vec(arb_boundary(), 0..6),
            prop::collection::vec(arb_path(), 0..3),
            prop::collection::vec(arb_ref(8), 0..3),
        ),
        1..6,
    );
    (units, cells).prop_map(|((user, meters), cells)| {
        let mut db = LayoutDatabase::new("RANDOM");
        db.user_unit_per_db_unit = user;
        db.meters_per_db_unit = meters;
        for (i, (boundaries, paths, refs)) in cells.into_iter().enumerate() {
            let mut cell = Cell::new(format!("C{i}"));
            cell.boundaries = boundaries;
            cell.paths = paths;
            if i > 0 {
                cell.refs = refs
                    .into_iter()
                    .map(|(t, mut r)| {
                        r.target = format!("C{}", t % i);
                        r
                    })
                    .collect();
            }
            db.cells.push(cell);
        }
        db
    })
}

