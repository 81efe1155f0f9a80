//! Minimal legacy ASCII VTK writers.

use std::fmt::Write;

/// A named scalar array attached to points or cells.
pub struct Scalars<'a> {
    pub name: &'a str,
    pub values: ScalarValues<'a>,
}

pub enum ScalarValues<'a> {
    Float(&'a [f64]),
    Int(&'a [u8]),
}

impl ScalarValues<'_> {
    fn len(&self) -> usize {
        match self {
            ScalarValues::Float(v) => v.len(),
            ScalarValues::Int(v) => v.len(),
        }
    }
}

fn write_scalars(out: &mut String, s: &Scalars<'_>) {
    match &s.values {
        ScalarValues::Float(v) => {
            writeln!(out, "SCALARS {} double 1\nLOOKUP_TABLE default", s.name).unwrap();
            for x in *v {
                writeln!(out, "{x:e}").unwrap();
            }
        }
        ScalarValues::Int(v) => {
            writeln!(out, "SCALARS {} int 1\nLOOKUP_TABLE default", s.name).unwrap();
            for x in *v {
                writeln!(out, "{x}").unwrap();
            }
        }
    }
}

/// Rectilinear grid with explicit node coordinates per axis and cell data.
pub fn rectilinear_grid(title: &str, xs: &[f64], ys: &[f64], zs: &[f64], cell_data: &[Scalars<'_>]) -> String {
    let mut out = String::new();
    writeln!(out, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET RECTILINEAR_GRID").unwrap();
    writeln!(out, "DIMENSIONS {} {} {}", xs.len(), ys.len(), zs.len()).unwrap();
    for (axis, coords) in [("X", xs), ("Y", ys), ("Z", zs)] {
        writeln!(out, "{axis}_COORDINATES {} double", coords.len()).unwrap();
        let line: Vec<String> = coords.iter().map(|c| format!("{c:e}")).collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
    }
    let n_cells = (xs.len().saturating_sub(1)) * (ys.len().saturating_sub(1)) * (zs.len().saturating_sub(1));
    if !cell_data.is_empty() {
        writeln!(out, "CELL_DATA {n_cells}").unwrap();
        for s in cell_data {
            assert_eq!(s.values.len(), n_cells, "cell array '{}' length", s.name);
            write_scalars(&mut out, s);
        }
    }
    out
}

/// Unstructured grid of 8-node hexahedra (VTK cell type 12).
pub fn hexahedral_grid(
    title: &str,
    points: &[[f64; 3]],
    cells: &[[usize; 8]],
    point_data: &[Scalars<'_>],
    cell_data: &[Scalars<'_>],
) -> String {
    let mut out = String::new();
    writeln!(out, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(out, "POINTS {} double", points.len()).unwrap();
    for p in points {
        writeln!(out, "{:e} {:e} {:e}", p[0], p[1], p[2]).unwrap();
    }
    writeln!(out, "CELLS {} {}", cells.len(), cells.len() * 9).unwrap();
    for c in cells {
        let ids: Vec<String> = c.iter().map(usize::to_string).collect();
        writeln!(out, "8 {}", ids.join(" ")).unwrap();
    }
    writeln!(out, "CELL_TYPES {}", cells.len()).unwrap();
    for _ in cells {
        out.push_str("12\n");
    }
    if !point_data.is_empty() {
        writeln!(out, "POINT_DATA {}", points.len()).unwrap();
        for s in point_data {
            assert_eq!(s.values.len(), points.len(), "point array '{}' length", s.name);
            write_scalars(&mut out, s);
        }
    }
    if !cell_data.is_empty() {
        writeln!(out, "CELL_DATA {}", cells.len()).unwrap();
        for s in cell_data {
            assert_eq!(s.values.len(), cells.len(), "cell array '{}' length", s.name);
            write_scalars(&mut out, s);
        }
    }
    out
}
