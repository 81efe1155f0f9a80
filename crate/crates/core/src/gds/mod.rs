//! GDSII stream ingestion and emission.
//!
//! The reader keeps coordinates in integer database units. Conversion to
//! micrometres happens once, in [`LayoutIndex::query`], together with
//! hierarchy flattening and window clipping.
//!
//! Only orthogonal placements are supported: rotations in multiples of 90
//! degrees, optional mirroring about x, unit magnification. Interconnect
//! layouts are Manhattan, and this keeps the flattened geometry exact.

mod query;
mod read;
pub(crate) mod record;
mod write;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use query::{path_outline, query_window, LayoutIndex};
pub use read::{parse_gdsii, parse_gdsii_with_report, ParseReport};
pub use write::write_gdsii;

/// Longest structure name accepted by the writer.
pub const MAX_NAME_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum GdsError {
    #[error("truncated record at byte offset {offset}")]
    Truncated { offset: usize },

    #[error("malformed record 0x{record:04X} at byte offset {offset}: {message}")]
    Malformed {
        offset: usize,
        record: u16,
        message: String,
    },

    #[error("missing UNITS")]
    MissingUnits,

    #[error("unsupported feature at byte offset {offset}: {message}")]
    Unsupported { offset: usize, message: String },

    #[error("cyclic structure reference: {}", .0.join(" -> "))]
    CyclicReference(Vec<String>),

    #[error("cell '{0}' referenced but not defined")]
    UndefinedCell(String),

    #[error("duplicate cell name '{0}'")]
    DuplicateCell(String),

    #[error("invalid geometry in cell '{cell}': {message}")]
    InvalidGeometry { cell: String, message: String },

    #[error("cell name '{0}' longer than 32 characters")]
    NameTooLong(String),

    #[error("invalid units: user/db = {user_per_db}, m/db = {meters_per_db}")]
    InvalidUnits { user_per_db: f64, meters_per_db: f64 },
}

/// A point in integer database units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Point {
    pub x: i32,
    pub y: i32,
}

impl Point {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }
}

/// Closed polygon on a layer; stored without the repeated closing vertex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Boundary {
    pub layer: i16,
    pub datatype: i16,
    pub points: Vec<Point>,
}

/// Centre-line path with a constant width, converted to an outline with
/// flush ends when queried.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathElement {
    pub layer: i16,
    pub datatype: i16,
    pub width: i32,
    pub points: Vec<Point>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Rotation {
    #[default]
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub fn degrees(self) -> f64 {
        match self {
            Rotation::R0 => 0.0,
            Rotation::R90 => 90.0,
            Rotation::R180 => 180.0,
            Rotation::R270 => 270.0,
        }
    }

    pub fn from_degrees(deg: f64) -> Option<Self> {
        let d = deg.rem_euclid(360.0);
        let snapped = (d / 90.0).round();
        if (d - snapped * 90.0).abs() > 1e-9 {
            return None;
        }
        Some(match snapped as i64 % 4 {
            0 => Rotation::R0,
            1 => Rotation::R90,
            2 => Rotation::R180,
            _ => Rotation::R270,
        })
    }

    /// (cos, sin) as exact integers.
    pub(crate) fn cos_sin(self) -> (f64, f64) {
        match self {
            Rotation::R0 => (1.0, 0.0),
            Rotation::R90 => (0.0, 1.0),
            Rotation::R180 => (-1.0, 0.0),
            Rotation::R270 => (0.0, -1.0),
        }
    }
}

/// Array placement parameters of an AREF. `col_end` and `row_end` are the
/// second and third XY points of the record: the origin displaced by
/// `cols` column pitches and by `rows` row pitches respectively.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArraySpec {
    pub cols: u16,
    pub rows: u16,
    pub col_end: Point,
    pub row_end: Point,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructRef {
    pub target: String,
    pub origin: Point,
    pub rotation: Rotation,
    /// Mirror about the x axis, applied before rotation.
    pub mirror_x: bool,
    pub array: Option<ArraySpec>,
}

impl StructRef {
    pub fn single(target: impl Into<String>, origin: Point) -> Self {
        Self {
            target: target.into(),
            origin,
            rotation: Rotation::R0,
            mirror_x: false,
            array: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Cell {
    pub name: String,
    pub boundaries: Vec<Boundary>,
    pub paths: Vec<PathElement>,
    pub refs: Vec<StructRef>,
}

impl Cell {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutDatabase {
    pub library_name: String,
    pub user_unit_per_db_unit: f64,
    pub meters_per_db_unit: f64,
    pub cells: Vec<Cell>,
}

impl LayoutDatabase {
    /// Empty library with the common 1 nm database unit and µm user unit.
    pub fn new(library_name: impl Into<String>) -> Self {
        Self {
            library_name: library_name.into(),
            user_unit_per_db_unit: 1e-3,
            meters_per_db_unit: 1e-9,
            cells: Vec::new(),
        }
    }

    pub fn cell(&self, name: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.name == name)
    }

    /// The last cell in file order that no other cell references.
    pub fn top_cell(&self) -> Option<&str> {
        let referenced: std::collections::HashSet<&str> = self
            .cells
            .iter()
            .flat_map(|c| c.refs.iter().map(|r| r.target.as_str()))
            .collect();
        self.cells
            .iter()
            .rev()
            .find(|c| !referenced.contains(c.name.as_str()))
            .map(|c| c.name.as_str())
    }

    /// Database units per micrometre, snapped to an integer when the unit is
    /// a whole fraction of a micrometre so coordinate conversion is a single
    /// correctly rounded division.
    pub fn db_units_per_um(&self) -> f64 {
        let ratio = 1e-6 / self.meters_per_db_unit;
        let rounded = ratio.round();
        if rounded >= 1.0 && (ratio - rounded).abs() <= 1e-9 * rounded {
            rounded
        } else {
            ratio
        }
    }

    /// Check units, unique names, reference targets and acyclicity.
    pub fn validate(&self) -> Result<(), GdsError> {
        if !(self.meters_per_db_unit > 0.0 && self.user_unit_per_db_unit > 0.0) {
            return Err(GdsError::InvalidUnits {
                user_per_db: self.user_unit_per_db_unit,
                meters_per_db: self.meters_per_db_unit,
            });
        }
        let mut index = HashMap::new();
        for (i, c) in self.cells.iter().enumerate() {
            if index.insert(c.name.as_str(), i).is_some() {
                return Err(GdsError::DuplicateCell(c.name.clone()));
            }
        }
        for c in &self.cells {
            for r in &c.refs {
                if !index.contains_key(r.target.as_str()) {
                    return Err(GdsError::UndefinedCell(r.target.clone()));
                }
            }
        }
        find_cycle(self, &index).map_or(Ok(()), |cycle| Err(GdsError::CyclicReference(cycle)))
    }
}

fn find_cycle(db: &LayoutDatabase, index: &HashMap<&str, usize>) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let n = db.cells.len();
    let mut marks = vec![Mark::New; n];
    let mut stack: Vec<usize> = Vec::new();

    fn visit(
        v: usize,
        db: &LayoutDatabase,
        index: &HashMap<&str, usize>,
        marks: &mut [Mark],
        stack: &mut Vec<usize>,
    ) -> Option<Vec<String>> {
        marks[v] = Mark::Active;
        stack.push(v);
        for r in &db.cells[v].refs {
            let w = index[r.target.as_str()];
            match marks[w] {
                Mark::Active => {
                    let start = stack.iter().position(|&s| s == w).unwrap_or(0);
                    let mut cycle: Vec<String> =
                        stack[start..].iter().map(|&s| db.cells[s].name.clone()).collect();
                    cycle.push(db.cells[w].name.clone());
                    return Some(cycle);
                }
                Mark::New => {
                    if let Some(c) = visit(w, db, index, marks, stack) {
                        return Some(c);
                    }
                }
                Mark::Done => {}
            }
        }
        stack.pop();
        marks[v] = Mark::Done;
        None
    }

    for v in 0..n {
        if marks[v] == Mark::New {
            if let Some(c) = visit(v, db, index, &mut marks, &mut stack) {
                return Some(c);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_cycle_and_names_it() {
        let mut db = LayoutDatabase::new("LIB");
        let mut a = Cell::new("A");
        a.refs.push(StructRef::single("B", Point::new(0, 0)));
        let mut b = Cell::new("B");
        b.refs.push(StructRef::single("A", Point::new(0, 0)));
        db.cells = vec![a, b];
        match db.validate() {
            Err(GdsError::CyclicReference(c)) => assert_eq!(c, vec!["A", "B", "A"]),
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn top_cell_is_unreferenced() {
        let mut db = LayoutDatabase::new("LIB");
        let leaf = Cell::new("LEAF");
        let mut top = Cell::new("TOP");
        top.refs.push(StructRef::single("LEAF", Point::new(5, 5)));
        db.cells = vec![top, leaf];
        assert_eq!(db.top_cell(), Some("TOP"));
    }

    #[test]
    fn rotation_parsing() {
        assert_eq!(Rotation::from_degrees(270.0), Some(Rotation::R270));
        assert_eq!(Rotation::from_degrees(-90.0), Some(Rotation::R270));
        assert_eq!(Rotation::from_degrees(45.0), None);
    }

    #[test]
    fn nanometre_units_snap() {
        let db = LayoutDatabase::new("LIB");
        assert_eq!(db.db_units_per_um(), 1000.0);
    }
}
