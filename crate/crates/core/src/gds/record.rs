//! GDSII record framing and the excess-64 REAL8 encoding.
//!
//! Each record is `[u16 length][u8 record type][u8 data type][payload]`,
//! big-endian, with `length` counting the 4 header bytes.

use super::GdsError;

pub(crate) mod rt {
    pub const HEADER: u8 = 0x00;
    pub const BGNLIB: u8 = 0x01;
    pub const LIBNAME: u8 = 0x02;
    pub const UNITS: u8 = 0x03;
    pub const ENDLIB: u8 = 0x04;
    pub const BGNSTR: u8 = 0x05;
    pub const STRNAME: u8 = 0x06;
    pub const ENDSTR: u8 = 0x07;
    pub const BOUNDARY: u8 = 0x08;
    pub const PATH: u8 = 0x09;
    pub const SREF: u8 = 0x0A;
    pub const AREF: u8 = 0x0B;
    pub const TEXT: u8 = 0x0C;
    pub const LAYER: u8 = 0x0D;
    pub const DATATYPE: u8 = 0x0E;
    pub const WIDTH: u8 = 0x0F;
    pub const XY: u8 = 0x10;
    pub const ENDEL: u8 = 0x11;
    pub const SNAME: u8 = 0x12;
    pub const COLROW: u8 = 0x13;
    pub const NODE: u8 = 0x15;
    pub const STRANS: u8 = 0x1A;
    pub const MAG: u8 = 0x1B;
    pub const ANGLE: u8 = 0x1C;
    pub const PATHTYPE: u8 = 0x21;
    pub const BOX: u8 = 0x2D;
}

pub(crate) mod dt {
    pub const NO_DATA: u8 = 0x00;
    pub const BIT_ARRAY: u8 = 0x01;
    pub const INT16: u8 = 0x02;
    pub const INT32: u8 = 0x03;
    pub const REAL8: u8 = 0x05;
    pub const ASCII: u8 = 0x06;
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Record<'a> {
    pub offset: usize,
    pub kind: u8,
    pub data_type: u8,
    pub payload: &'a [u8],
}

impl<'a> Record<'a> {
    fn malformed(&self, message: impl Into<String>) -> GdsError {
        GdsError::Malformed {
            offset: self.offset,
            record: u16::from(self.kind) << 8 | u16::from(self.data_type),
            message: message.into(),
        }
    }

    fn expect_type(&self, data_type: u8, unit: usize) -> Result<(), GdsError> {
        if self.data_type != data_type {
            return Err(self.malformed(format!(
                "expected data type 0x{data_type:02X}, found 0x{:02X}",
                self.data_type
            )));
        }
        if !self.payload.len().is_multiple_of(unit) {
            return Err(self.malformed("payload length not a multiple of the item size"));
        }
        Ok(())
    }

    pub fn i16s(&self) -> Result<Vec<i16>, GdsError> {
        self.expect_type(dt::INT16, 2)?;
        Ok(self
            .payload
            .chunks_exact(2)
            .map(|c| i16::from_be_bytes([c[0], c[1]]))
            .collect())
    }

    pub fn i16_single(&self) -> Result<i16, GdsError> {
        self.i16s()?
            .first()
            .copied()
            .ok_or_else(|| self.malformed("empty INT16 record"))
    }

    pub fn i32s(&self) -> Result<Vec<i32>, GdsError> {
        self.expect_type(dt::INT32, 4)?;
        Ok(self
            .payload
            .chunks_exact(4)
            .map(|c| i32::from_be_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    pub fn reals(&self) -> Result<Vec<f64>, GdsError> {
        self.expect_type(dt::REAL8, 8)?;
        Ok(self
            .payload
            .chunks_exact(8)
            .map(|c| real8_to_f64(c.try_into().expect("chunk of 8")))
            .collect())
    }

    pub fn ascii(&self) -> Result<String, GdsError> {
        self.expect_type(dt::ASCII, 1)?;
        let end = self
            .payload
            .iter()
            .position(|&b| b == 0)
            .unwrap_or(self.payload.len());
        std::str::from_utf8(&self.payload[..end])
            .map(str::to_owned)
            .map_err(|_| self.malformed("string is not valid ASCII"))
    }

    pub fn bits(&self) -> Result<u16, GdsError> {
        self.expect_type(dt::BIT_ARRAY, 2)?;
        if self.payload.len() != 2 {
            return Err(self.malformed("bit array must hold exactly 2 bytes"));
        }
        Ok(u16::from_be_bytes([self.payload[0], self.payload[1]]))
    }

    pub fn error(&self, message: impl Into<String>) -> GdsError {
        self.malformed(message)
    }
}

/// Sequential record reader over an in-memory stream.
pub(crate) struct RecordReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> RecordReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn offset(&self) -> usize {
        self.pos
    }

    /// `Ok(None)` only at a clean end of input.
    pub fn next_record(&mut self) -> Result<Option<Record<'a>>, GdsError> {
        let offset = self.pos;
        let rest = &self.data[offset..];
        if rest.is_empty() {
            return Ok(None);
        }
        if rest.len() < 4 {
            return Err(GdsError::Truncated { offset });
        }
        let len = usize::from(u16::from_be_bytes([rest[0], rest[1]]));
        if len < 4 || len % 2 != 0 {
            return Err(GdsError::Malformed {
                offset,
                record: u16::from_be_bytes([rest[2], rest[3]]),
                message: format!("invalid record length {len}"),
            });
        }
        if rest.len() < len {
            return Err(GdsError::Truncated { offset });
        }
        self.pos += len;
        Ok(Some(Record {
            offset,
            kind: rest[2],
            data_type: rest[3],
            payload: &rest[4..len],
        }))
    }

    /// Like `next_record` but end of input is a truncation error.
    pub fn require(&mut self) -> Result<Record<'a>, GdsError> {
        let offset = self.pos;
        self.next_record()?.ok_or(GdsError::Truncated { offset })
    }
}

/// Big-endian record writer.
#[derive(Default)]
pub(crate) struct RecordWriter {
    pub buf: Vec<u8>,
}

impl RecordWriter {
    fn header(&mut self, kind: u8, data_type: u8, payload_len: usize) {
        let len = u16::try_from(payload_len + 4).expect("GDSII record exceeds 65535 bytes");
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.push(kind);
        self.buf.push(data_type);
    }

    pub fn empty(&mut self, kind: u8) {
        self.header(kind, dt::NO_DATA, 0);
    }

    pub fn i16s(&mut self, kind: u8, values: &[i16]) {
        self.header(kind, dt::INT16, values.len() * 2);
        for v in values {
            self.buf.extend_from_slice(&v.to_be_bytes());
        }
    }

    pub fn i32s(&mut self, kind: u8, values: &[i32]) {
        self.header(kind, dt::INT32, values.len() * 4);
        for v in values {
            self.buf.extend_from_slice(&v.to_be_bytes());
        }
    }

    pub fn reals(&mut self, kind: u8, values: &[f64]) {
        self.header(kind, dt::REAL8, values.len() * 8);
        for &v in values {
            self.buf.extend_from_slice(&f64_to_real8(v));
        }
    }

    pub fn ascii(&mut self, kind: u8, s: &str) {
        let mut bytes = s.as_bytes().to_vec();
        if bytes.len() % 2 == 1 {
            bytes.push(0);
        }
        self.header(kind, dt::ASCII, bytes.len());
        self.buf.extend_from_slice(&bytes);
    }

    pub fn bits(&mut self, kind: u8, value: u16) {
        self.header(kind, dt::BIT_ARRAY, 2);
        self.buf.extend_from_slice(&value.to_be_bytes());
    }
}

/// Decode an excess-64, base-16 REAL8: sign bit, 7-bit exponent, 56-bit
/// mantissa with value `0.mantissa * 16^(exp - 64)`.
pub fn real8_to_f64(bytes: [u8; 8]) -> f64 {
    let negative = bytes[0] & 0x80 != 0;
    let exponent = i32::from(bytes[0] & 0x7F) - 64;
    let mut mantissa = 0u64;
    for &b in &bytes[1..] {
        mantissa = mantissa << 8 | u64::from(b);
    }
    if mantissa == 0 {
        return 0.0;
    }
    // mantissa * 2^(4*exponent - 56); the u64 -> f64 conversion rounds once,
    // the power-of-two scaling is exact.
    let value = mantissa as f64 * 2f64.powi(4 * exponent - 56);
    if negative {
        -value
    } else {
        value
    }
}

/// Encode an f64 as REAL8 without rounding: 53 significant bits always fit
/// inside the 56-bit mantissa after the base-16 alignment shift.
pub fn f64_to_real8(value: f64) -> [u8; 8] {
    if value == 0.0 || !value.is_finite() {
        return [0u8; 8];
    }
    let bits = value.to_bits();
    let negative = bits >> 63 != 0;
    let raw_exp = ((bits >> 52) & 0x7FF) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    // value = sig * 2^e2 with sig an integer.
    let (sig, e2) = if raw_exp == 0 {
        (frac, -1074)
    } else {
        (frac | 1u64 << 52, raw_exp - 1075)
    };
    let bit_len = 64 - sig.leading_zeros() as i32;
    // value = 2^(e2 + bit_len) * (sig / 2^bit_len); pick base-16 exponent E
    // with 16^(E-1) <= value < 16^E.
    let top = e2 + bit_len;
    let exp16 = top.div_euclid(4) + i32::from(top.rem_euclid(4) != 0);
    // mantissa = value * 2^(56 - 4*exp16) = sig * 2^(e2 + 56 - 4*exp16)
    let shift = e2 + 56 - 4 * exp16;
    let mantissa = if shift >= 0 { sig << shift } else { sig >> -shift };
    let biased = (exp16 + 64).clamp(0, 127) as u8;
    let mut out = [0u8; 8];
    out[0] = biased | if negative { 0x80 } else { 0 };
    out[1..].copy_from_slice(&mantissa.to_be_bytes()[1..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_encodings() {
        // 1.0 = 1/16 * 16^1 -> 0x41 0x10 ...
        assert_eq!(f64_to_real8(1.0), [0x41, 0x10, 0, 0, 0, 0, 0, 0]);
        assert_eq!(real8_to_f64([0x41, 0x10, 0, 0, 0, 0, 0, 0]), 1.0);
        assert_eq!(real8_to_f64(f64_to_real8(-0.5)), -0.5);
        assert_eq!(real8_to_f64(f64_to_real8(1e-9)), 1e-9);
        assert_eq!(real8_to_f64(f64_to_real8(1e-3)), 1e-3);
    }

    proptest! {
        #[test]
        fn real8_round_trip_is_exact(v in -1e30f64..1e30) {
            let back = real8_to_f64(f64_to_real8(v));
            prop_assert_eq!(back.to_bits(), v.to_bits());
        }

        #[test]
        fn real8_round_trip_small(v in 1e-15f64..1e-6) {
            prop_assert_eq!(real8_to_f64(f64_to_real8(v)), v);
        }
    }

    #[test]
    fn truncated_header() {
        let mut r = RecordReader::new(&[0x00, 0x06, 0x00]);
        assert!(matches!(r.next_record(), Err(GdsError::Truncated { offset: 0 })));
    }
}
