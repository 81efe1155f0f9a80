use super::read::validate_polygon;
use super::record::{rt, RecordWriter};
use super::{GdsError, LayoutDatabase, Point, Rotation, MAX_NAME_LEN};

/// Fixed modification/access timestamp (1970-01-01 00:00:00) so output is
/// reproducible byte for byte.
const TIMESTAMP: [i16; 12] = [70, 1, 1, 0, 0, 0, 70, 1, 1, 0, 0, 0];

/// Serialize a database as a GDSII stream (release 600 header).
pub fn write_gdsii(db: &LayoutDatabase) -> Result<Vec<u8>, GdsError> {
    db.validate()?;
    let mut w = RecordWriter::default();
    w.i16s(rt::HEADER, &[600]);
    w.i16s(rt::BGNLIB, &TIMESTAMP);
    w.ascii(rt::LIBNAME, &db.library_name);
    w.reals(rt::UNITS, &[db.user_unit_per_db_unit, db.meters_per_db_unit]);

    for cell in &db.cells {
        if cell.name.len() > MAX_NAME_LEN {
            return Err(GdsError::NameTooLong(cell.name.clone()));
        }
        w.i16s(rt::BGNSTR, &TIMESTAMP);
        w.ascii(rt::STRNAME, &cell.name);

        for b in &cell.boundaries {
            validate_polygon(&b.points).map_err(|message| GdsError::InvalidGeometry {
                cell: cell.name.clone(),
                message,
            })?;
            w.empty(rt::BOUNDARY);
            w.i16s(rt::LAYER, &[b.layer]);
            w.i16s(rt::DATATYPE, &[b.datatype]);
            let mut xy = flatten_points(&b.points);
            xy.extend([b.points[0].x, b.points[0].y]);
            w.i32s(rt::XY, &xy);
            w.empty(rt::ENDEL);
        }

        for p in &cell.paths {
            if p.width <= 0 || p.points.len() < 2 {
                return Err(GdsError::InvalidGeometry {
                    cell: cell.name.clone(),
                    message: format!("path with width {} and {} points", p.width, p.points.len()),
                });
            }
            w.empty(rt::PATH);
            w.i16s(rt::LAYER, &[p.layer]);
            w.i16s(rt::DATATYPE, &[p.datatype]);
            w.i16s(rt::PATHTYPE, &[0]);
            w.i32s(rt::WIDTH, &[p.width]);
            w.i32s(rt::XY, &flatten_points(&p.points));
            w.empty(rt::ENDEL);
        }

        for r in &cell.refs {
            if r.target.len() > MAX_NAME_LEN {
                return Err(GdsError::NameTooLong(r.target.clone()));
            }
            w.empty(if r.array.is_some() { rt::AREF } else { rt::SREF });
            w.ascii(rt::SNAME, &r.target);
            if r.mirror_x || r.rotation != Rotation::R0 {
                w.bits(rt::STRANS, if r.mirror_x { 0x8000 } else { 0 });
                if r.rotation != Rotation::R0 {
                    w.reals(rt::ANGLE, &[r.rotation.degrees()]);
                }
            }
            match r.array {
                Some(a) => {
                    w.i16s(rt::COLROW, &[a.cols as i16, a.rows as i16]);
                    w.i32s(rt::XY, &flatten_points(&[r.origin, a.col_end, a.row_end]));
                }
                None => w.i32s(rt::XY, &[r.origin.x, r.origin.y]),
            }
            w.empty(rt::ENDEL);
        }
        w.empty(rt::ENDSTR);
    }
    w.empty(rt::ENDLIB);
    Ok(w.buf)
}

fn flatten_points(points: &[Point]) -> Vec<i32> {
    points.iter().flat_map(|p| [p.x, p.y]).collect()
}

#[cfg(test)]
mod tests {
    use super::super::*;

    #[test]
    fn empty_library_records() {
        let db = LayoutDatabase::new("EMPTY");
        let bytes = write_gdsii(&db).unwrap();
        let mut kinds = Vec::new();
        let mut r = record::RecordReader::new(&bytes);
        while let Some(rec) = r.next_record().unwrap() {
            kinds.push(rec.kind);
        }
        use record::rt::*;
        assert_eq!(kinds, vec![HEADER, BGNLIB, LIBNAME, UNITS, ENDLIB]);
        let back = parse_gdsii(&bytes).unwrap();
        assert_eq!(back, db);
    }

    #[test]
    fn rectangle_xy_is_closed() {
        let mut db = LayoutDatabase::new("LIB");
        let mut c = Cell::new("TOP");
        c.boundaries.push(Boundary {
            layer: 1,
            datatype: 0,
            points: vec![
                Point::new(0, 0),
                Point::new(10, 0),
                Point::new(10, 5),
                Point::new(0, 5),
            ],
        });
        db.cells.push(c);
        let bytes = write_gdsii(&db).unwrap();
        let mut r = record::RecordReader::new(&bytes);
        let mut xy_pairs = None;
        while let Some(rec) = r.next_record().unwrap() {
            if rec.kind == record::rt::XY {
                xy_pairs = Some(rec.payload.len() / 8);
            }
        }
        assert_eq!(xy_pairs, Some(5));
    }

    #[test]
    fn long_name_rejected() {
        let mut db = LayoutDatabase::new("LIB");
        db.cells.push(Cell::new("X".repeat(33)));
        assert!(matches!(write_gdsii(&db), Err(GdsError::NameTooLong(_))));
    }
}
