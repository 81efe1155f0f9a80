use log::warn;

use super::record::{rt, Record, RecordReader};
use super::{
    ArraySpec, Boundary, Cell, GdsError, LayoutDatabase, PathElement, Point, Rotation, StructRef,
};
use crate::geometry::{is_simple, Point2, Polygon};

/// Diagnostics collected while reading a stream.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseReport {
    /// Records of unknown or ignored types that were skipped.
    pub skipped_records: usize,
    /// Whole elements skipped (TEXT, NODE, BOX).
    pub skipped_elements: usize,
}

impl ParseReport {
    pub fn warnings(&self) -> usize {
        self.skipped_records + self.skipped_elements
    }
}

pub fn parse_gdsii(bytes: &[u8]) -> Result<LayoutDatabase, GdsError> {
    parse_gdsii_with_report(bytes).map(|(db, _)| db)
}

pub fn parse_gdsii_with_report(bytes: &[u8]) -> Result<(LayoutDatabase, ParseReport), GdsError> {
    let mut p = Parser {
        reader: RecordReader::new(bytes),
        report: ParseReport::default(),
    };
    let db = p.library()?;
    db.validate()?;
    if p.report.warnings() > 0 {
        warn!(
            "GDSII: skipped {} unsupported records and {} unsupported elements",
            p.report.skipped_records, p.report.skipped_elements
        );
    }
    Ok((db, p.report))
}

struct Parser<'a> {
    reader: RecordReader<'a>,
    report: ParseReport,
}

impl<'a> Parser<'a> {
    fn library(&mut self) -> Result<LayoutDatabase, GdsError> {
        let first = self.reader.require()?;
        if first.kind != rt::HEADER {
            return Err(first.error("stream must start with HEADER"));
        }
        first.i16s()?;
        let bgn = self.reader.require()?;
        if bgn.kind != rt::BGNLIB {
            return Err(bgn.error("expected BGNLIB"));
        }

        let mut name = String::new();
        let mut units: Option<(f64, f64)> = None;
        let mut cells = Vec::new();
        loop {
            let rec = self.reader.require()?;
            match rec.kind {
                rt::LIBNAME => name = rec.ascii()?,
                rt::UNITS => {
                    let v = rec.reals()?;
                    if v.len() != 2 {
                        return Err(rec.error("UNITS must hold two reals"));
                    }
                    units = Some((v[0], v[1]));
                }
                rt::BGNSTR => {
                    if units.is_none() {
                        return Err(GdsError::MissingUnits);
                    }
                    cells.push(self.structure()?);
                }
                rt::ENDLIB => break,
                _ => self.skip_record(&rec),
            }
        }
        let (user_unit_per_db_unit, meters_per_db_unit) = units.ok_or(GdsError::MissingUnits)?;
        Ok(LayoutDatabase {
            library_name: name,
            user_unit_per_db_unit,
            meters_per_db_unit,
            cells,
        })
    }

    fn skip_record(&mut self, rec: &Record<'_>) {
        log::debug!(
            "skipping record 0x{:02X}{:02X} at offset {}",
            rec.kind,
            rec.data_type,
            rec.offset
        );
        self.report.skipped_records += 1;
    }

    fn structure(&mut self) -> Result<Cell, GdsError> {
        let mut cell = Cell::default();
        let mut named = false;
        loop {
            let rec = self.reader.require()?;
            match rec.kind {
                rt::STRNAME => {
                    cell.name = rec.ascii()?;
                    named = true;
                }
                rt::BOUNDARY => {
                    let el = self.element(rec)?;
                    cell.boundaries.push(el.into_boundary(&cell.name)?);
                }
                rt::PATH => {
                    let el = self.element(rec)?;
                    cell.paths.push(el.into_path(&cell.name)?);
                }
                rt::SREF | rt::AREF => {
                    let el = self.element(rec)?;
                    cell.refs.push(el.into_ref()?);
                }
                rt::TEXT | rt::NODE | rt::BOX => {
                    self.skip_element()?;
                    self.report.skipped_elements += 1;
                }
                rt::ENDSTR => break,
                _ => self.skip_record(&rec),
            }
        }
        if !named {
            return Err(GdsError::Malformed {
                offset: self.reader.offset(),
                record: u16::from(rt::ENDSTR) << 8,
                message: "structure without STRNAME".into(),
            });
        }
        Ok(cell)
    }

    fn skip_element(&mut self) -> Result<(), GdsError> {
        loop {
            if self.reader.require()?.kind == rt::ENDEL {
                return Ok(());
            }
        }
    }

    fn element(&mut self, start: Record<'a>) -> Result<RawElement, GdsError> {
        let mut el = RawElement {
            kind: start.kind,
            offset: start.offset,
            ..Default::default()
        };
        loop {
            let rec = self.reader.require()?;
            match rec.kind {
                rt::LAYER => el.layer = Some(rec.i16_single()?),
                rt::DATATYPE => el.datatype = Some(rec.i16_single()?),
                rt::WIDTH => {
                    el.width = Some(
                        *rec.i32s()?
                            .first()
                            .ok_or_else(|| rec.error("empty WIDTH"))?,
                    )
                }
                rt::PATHTYPE => {
                    let t = rec.i16_single()?;
                    if ![0, 1, 2, 4].contains(&t) {
                        return Err(rec.error(format!("invalid PATHTYPE {t}")));
                    }
                }
                rt::XY => {
                    let v = rec.i32s()?;
                    if v.len() % 2 != 0 {
                        return Err(rec.error("odd coordinate count"));
                    }
                    el.xy = v.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect();
                }
                rt::SNAME => el.sname = Some(rec.ascii()?),
                rt::STRANS => {
                    let bits = rec.bits()?;
                    if bits & 0x0006 != 0 {
                        return Err(GdsError::Unsupported {
                            offset: rec.offset,
                            message: "absolute magnification/angle flags".into(),
                        });
                    }
                    el.mirror_x = bits & 0x8000 != 0;
                }
                rt::MAG => {
                    let m = rec.reals()?.first().copied().unwrap_or(1.0);
                    if m != 1.0 {
                        return Err(GdsError::Unsupported {
                            offset: rec.offset,
                            message: format!("magnification {m} (only 1 is supported)"),
                        });
                    }
                }
                rt::ANGLE => {
                    let a = rec.reals()?.first().copied().unwrap_or(0.0);
                    el.rotation = Rotation::from_degrees(a).ok_or_else(|| GdsError::Unsupported {
                        offset: rec.offset,
                        message: format!("rotation {a} degrees (only multiples of 90 are supported)"),
                    })?;
                }
                rt::COLROW => {
                    let v = rec.i16s()?;
                    if v.len() != 2 || v[0] <= 0 || v[1] <= 0 {
                        return Err(rec.error("COLROW must hold two positive counts"));
                    }
                    el.colrow = Some((v[0] as u16, v[1] as u16));
                }
                rt::ENDEL => return Ok(el),
                _ => self.skip_record(&rec),
            }
        }
    }
}

#[derive(Default)]
struct RawElement {
    kind: u8,
    offset: usize,
    layer: Option<i16>,
    datatype: Option<i16>,
    width: Option<i32>,
    xy: Vec<Point>,
    sname: Option<String>,
    mirror_x: bool,
    rotation: Rotation,
    colrow: Option<(u16, u16)>,
}

impl RawElement {
    fn malformed(&self, message: &str) -> GdsError {
        GdsError::Malformed {
            offset: self.offset,
            record: u16::from(self.kind) << 8,
            message: message.into(),
        }
    }

    fn layer_datatype(&self) -> Result<(i16, i16), GdsError> {
        let layer = self.layer.ok_or_else(|| self.malformed("element without LAYER"))?;
        let datatype = self
            .datatype
            .ok_or_else(|| self.malformed("element without DATATYPE"))?;
        Ok((layer, datatype))
    }

    fn into_boundary(self, cell: &str) -> Result<Boundary, GdsError> {
        let (layer, datatype) = self.layer_datatype()?;
        let mut pts = self.xy;
        if pts.len() < 4 || pts.first() != pts.last() {
            return Err(GdsError::InvalidGeometry {
                cell: cell.into(),
                message: format!("boundary at offset {} is not closed", self.offset),
            });
        }
        pts.pop();
        validate_polygon(&pts).map_err(|m| GdsError::InvalidGeometry {
            cell: cell.into(),
            message: format!("boundary at offset {}: {m}", self.offset),
        })?;
        Ok(Boundary {
            layer,
            datatype,
            points: pts,
        })
    }

    fn into_path(self, cell: &str) -> Result<PathElement, GdsError> {
        let (layer, datatype) = self.layer_datatype()?;
        let width = self.width.unwrap_or(0);
        let bad = |message: String| GdsError::InvalidGeometry {
            cell: cell.into(),
            message,
        };
        if width <= 0 {
            return Err(bad(format!("path at offset {} has width {width}", self.offset)));
        }
        if self.xy.len() < 2 {
            return Err(bad(format!("path at offset {} has fewer than 2 points", self.offset)));
        }
        Ok(PathElement {
            layer,
            datatype,
            width,
            points: self.xy,
        })
    }

    fn into_ref(self) -> Result<StructRef, GdsError> {
        let target = self
            .sname
            .clone()
            .ok_or_else(|| self.malformed("reference without SNAME"))?;
        let array = if self.kind == rt::AREF {
            let (cols, rows) = self
                .colrow
                .ok_or_else(|| self.malformed("AREF without COLROW"))?;
            if self.xy.len() != 3 {
                return Err(self.malformed("AREF requires 3 XY points"));
            }
            Some(ArraySpec {
                cols,
                rows,
                col_end: self.xy[1],
                row_end: self.xy[2],
            })
        } else {
            if self.xy.len() != 1 {
                return Err(self.malformed("SREF requires 1 XY point"));
            }
            None
        };
        Ok(StructRef {
            target,
            origin: self.xy[0],
            rotation: self.rotation,
            mirror_x: self.mirror_x,
            array,
        })
    }
}

/// At least 3 distinct vertices, nonzero area, no self-intersection.
pub(crate) fn validate_polygon(points: &[Point]) -> Result<(), String> {
    let mut distinct = points.to_vec();
    distinct.sort_by_key(|p| (p.x, p.y));
    distinct.dedup();
    if distinct.len() < 3 {
        return Err("fewer than 3 distinct vertices".into());
    }
    let pts: Vec<Point2> = points
        .iter()
        .map(|p| Point2::new(f64::from(p.x), f64::from(p.y)))
        .collect();
    if Polygon::new(pts.clone()).signed_area() == 0.0 {
        return Err("zero area".into());
    }
    if !is_simple(&pts) {
        return Err("self-intersecting".into());
    }
    Ok(())
}
