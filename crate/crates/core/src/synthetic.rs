//! Synthetic 11-level interconnect layouts: banks of parallel lines running
//! in x or y on alternate line levels, square vias at line crossings, and an
//! optional vertical band of reduced metal density.
//!
//! Level order bottom-up is V0, M1, V1, M2, ..., M5, V5 on GDS layers 1..=11
//! (datatype 0), matching the bundled demo stack.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gds::{ArraySpec, Boundary, Cell, LayoutDatabase, Point, StructRef};
use crate::rve::{DEFAULT_HALF_SIZE_UM, DEFAULT_VOXELS_PER_EDGE_XY};

pub const LINE_LEVELS: usize = 5;
pub const VIA_LEVELS: usize = 6;
const DB_PER_UM: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("invalid synthetic layout spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    X,
    Y,
}

impl Direction {
    fn flip(self) -> Self {
        match self {
            Direction::X => Direction::Y,
            Direction::Y => Direction::X,
        }
    }
}

/// Vertical stripe `x_min <= x < x_max` with sparser lines and no vias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowDensityBand {
    pub x_min_um: f64,
    pub x_max_um: f64,
    /// Keep every n-th line inside the band.
    pub keep_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticLayoutSpec {
    /// The layout covers `[0, extent]^2`, µm.
    pub extent_um: f64,
    pub line_width_um: f64,
    pub line_pitch_um: f64,
    /// Direction of M1; later levels alternate when `alternate` is set.
    pub first_direction: Direction,
    pub alternate: bool,
    pub via_size_um: f64,
    /// Multiple of the line pitch; 0 disables vias.
    pub via_pitch_lines: usize,
    pub band: Option<LowDensityBand>,
    /// Probability of dropping each via.
    pub via_dropout: f64,
    pub seed: u64,
}

impl Default for SyntheticLayoutSpec {
    fn default() -> Self {
        Self {
            extent_um: 100.0,
            line_width_um: 0.2,
            line_pitch_um: 0.4,
            first_direction: Direction::X,
            alternate: true,
            via_size_um: 0.1,
            via_pitch_lines: 1,
            band: None,
            via_dropout: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticLayoutSpec {
    /// Default spec with a 20 µm low-density band in the middle of the chip.
    pub fn with_band() -> Self {
        Self {
            band: Some(LowDensityBand {
                x_min_um: 40.0,
                x_max_um: 60.0,
                keep_every: 4,
            }),
            ..Default::default()
        }
    }

    fn min_feature_um() -> f64 {
        2.0 * 2.0 * DEFAULT_HALF_SIZE_UM / DEFAULT_VOXELS_PER_EDGE_XY as f64
    }

    pub fn validate(&self) -> Result<(), SyntheticError> {
        let bad = |m: String| Err(SyntheticError::InvalidSpec(m));
        let min = Self::min_feature_um() - 1e-12;
        if !(self.extent_um > 0.0) {
            return bad("extent must be positive".into());
        }
        if !(self.line_width_um > 0.0 && self.line_width_um < self.line_pitch_um) {
            return bad(format!(
                "line width {} must be positive and below the pitch {}",
                self.line_width_um, self.line_pitch_um
            ));
        }
        if self.line_width_um < min || self.line_pitch_um - self.line_width_um < min {
            return bad(format!("line width and spacing must be at least {} µm", Self::min_feature_um()));
        }
        if self.via_pitch_lines > 0 && (self.via_size_um < min || self.via_size_um > self.line_width_um) {
            return bad(format!(
                "via size {} must lie in [{}, line width]",
                self.via_size_um,
                Self::min_feature_um()
            ));
        }
        if !(0.0..=1.0).contains(&self.via_dropout) {
            return bad("via dropout must lie in [0, 1]".into());
        }
        if let Some(b) = &self.band {
            if !(b.x_min_um < b.x_max_um) || b.keep_every == 0 {
                return bad("band needs x_min < x_max and keep_every >= 1".into());
            }
        }
        for v in [self.extent_um, self.line_width_um, self.line_pitch_um, self.via_size_um] {
            if ((v * DB_PER_UM).round() - v * DB_PER_UM).abs() > 1e-6 {
                return bad(format!("{v} µm is not a whole number of nanometres"));
            }
        }
        Ok(())
    }

    pub fn line_direction(&self, level: usize) -> Direction {
        if self.alternate && level % 2 == 1 {
            self.first_direction.flip()
        } else {
            self.first_direction
        }
    }

    fn line_count(&self) -> usize {
        ((self.extent_um - self.line_width_um) / self.line_pitch_um).floor() as usize + 1
    }

    /// Centre of line `k`, offset by half a pitch from the chip edge.
    fn line_center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.line_pitch_um
    }

    fn in_band(&self, x: f64) -> bool {
        self.band.is_some_and(|b| x >= b.x_min_um && x < b.x_max_um)
    }

    fn keep_line(&self, k: usize) -> bool {
        self.band.is_none_or(|b| k.is_multiple_of(b.keep_every))
    }
}

fn um(v: f64) -> i32 {
    (v * DB_PER_UM).round() as i32
}

fn rect(layer: i16, x0: f64, y0: f64, x1: f64, y1: f64) -> Boundary {
    let (x0, y0, x1, y1) = (um(x0), um(y0), um(x1), um(y1));
    Boundary {
        layer,
        datatype: 0,
        points: vec![Point::new(x0, y0), Point::new(x1, y0), Point::new(x1, y1), Point::new(x0, y1)],
    }
}

pub fn line_layer(level: usize) -> i16 {
    2 * level as i16 + 2
}

pub fn via_layer(level: usize) -> i16 {
    2 * level as i16 + 1
}

/// Build the layout. Deterministic for a fixed spec (including seed).
pub fn generate_synthetic_layout(spec: &SyntheticLayoutSpec) -> Result<LayoutDatabase, SyntheticError> {
    spec.validate()?;
    let mut db = LayoutDatabase::new("SYNTH");
    let mut top = Cell::new("TOP");
    let n = spec.line_count();
    let hw = 0.5 * spec.line_width_um;
    let l = spec.extent_um;

    for level in 0..LINE_LEVELS {
        let layer = line_layer(level);
        for k in 0..n {
            let c = spec.line_center(k);
            match spec.line_direction(level) {
                Direction::Y => {
                    if !spec.in_band(c) || spec.keep_line(k) {
                        top.boundaries.push(rect(layer, c - hw, 0.0, c + hw, l));
                    }
                }
                Direction::X => match spec.band {
                    Some(b) if !spec.keep_line(k) => {
                        let (x0, x1) = (b.x_min_um.clamp(0.0, l), b.x_max_um.clamp(0.0, l));
                        if x0 > 0.0 {
                            top.boundaries.push(rect(layer, 0.0, c - hw, x0, c + hw));
                        }
                        if x1 < l {
                            top.boundaries.push(rect(layer, x1, c - hw, l, c + hw));
                        }
                    }
                    _ => top.boundaries.push(rect(layer, 0.0, c - hw, l, c + hw)),
                },
            }
        }
    }

    if spec.via_pitch_lines > 0 {
        let step = spec.via_pitch_lines;
        let sites: Vec<usize> = (0..n).step_by(step).collect();
        let cols_ok: Vec<usize> = sites.iter().copied().filter(|&k| !spec.in_band(spec.line_center(k))).collect();
        let hv = 0.5 * spec.via_size_um;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for level in 0..VIA_LEVELS {
            let name = format!("VIA{level}");
            let mut cell = Cell::new(name.clone());
            cell.boundaries.push(rect(via_layer(level), -hv, -hv, hv, hv));
            db.cells.push(cell);

            if spec.via_dropout > 0.0 {
                for &j in &sites {
                    for &i in &cols_ok {
                        if rng.gen::<f64>() >= spec.via_dropout {
                            top.refs.push(StructRef::single(
                                name.clone(),
                                Point::new(um(spec.line_center(i)), um(spec.line_center(j))),
                            ));
                        }
                    }
                }
                continue;
            }
            // One array per run of consecutive allowed columns.
            let mut runs: Vec<(usize, usize)> = Vec::new();
            for &i in &cols_ok {
                match runs.last_mut() {
                    Some((_, end)) if *end + step == i => *end = i,
                    _ => runs.push((i, i)),
                }
            }
            for (first, last) in runs {
                let cols = (last - first) / step + 1;
                let rows = sites.len();
                let origin = Point::new(um(spec.line_center(first)), um(spec.line_center(0)));
                let pitch = um(spec.line_pitch_um * step as f64);
                top.refs.push(StructRef {
                    array: Some(ArraySpec {
                        cols: cols as u16,
                        rows: rows as u16,
                        col_end: Point::new(origin.x + pitch * cols as i32, origin.y),
                        row_end: Point::new(origin.x, origin.y + pitch * rows as i32),
                    }),
                    ..StructRef::single(name.clone(), origin)
                });
            }
        }
    }
    db.cells.push(top);
    Ok(db)
}
