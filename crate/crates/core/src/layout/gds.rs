use super::{Cell, Library, LayoutError, Placement, Polygon, Rotation, Timestamp};
use thiserror::Error;

const HEADER: u16 = 0x0002;
const BGNLIB: u16 = 0x0102;
const LIBNAME: u16 = 0x0206;
const UNITS: u16 = 0x0305;
const ENDLIB: u16 = 0x0400;
const BGNSTR: u16 = 0x0502;
const STRNAME: u16 = 0x0606;
const ENDSTR: u16 = 0x0700;
const BOUNDARY: u16 = 0x0800;
const SREF: u16 = 0x0A00;
const LAYER: u16 = 0x0D02;
const DATATYPE: u16 = 0x0E02;
const XY: u16 = 0x1003;
const ENDEL: u16 = 0x1100;
const SNAME: u16 = 0x1206;
const STRANS: u16 = 0x1A01;
const MAG: u16 = 0x1B05;
const ANGLE: u16 = 0x1C05;

/// Records that carry no geometry and are skipped on read.
const IGNORED: [u16; 9] = [
    0x1F06, // REFLIBS
    0x2006, // FONTS
    0x2202, // GENERATIONS
    0x2306, // ATTRTABLE
    0x2602, // ELFLAGS (legacy data type)
    0x2601, // ELFLAGS
    0x2F03, // PLEX
    0x2B02, // PROPATTR
    0x2C06, // PROPVALUE
];

const STREAM_VERSION: i16 = 600;

#[derive(Debug, Error, PartialEq)]
pub enum GdsError {
    #[error("truncated stream at byte {offset}")]
    Truncated { offset: usize },
    #[error("malformed record at byte {offset}: {message}")]
    Malformed { offset: usize, message: String },
    #[error("unsupported record 0x{record:04X} at byte {offset}")]
    Unsupported { offset: usize, record: u16 },
    #[error("library is invalid: {0}")]
    Invalid(#[from] LayoutError),
}

/// GDSII 8-byte real: sign bit, 7-bit base-16 exponent biased by 64 and a
/// 56-bit fraction.
pub(crate) fn encode_real8(v: f64) -> [u8; 8] {
    if v == 0.0 || !v.is_finite() {
        return [0; 8];
    }
    let sign = if v < 0.0 { 0x80u8 } else { 0 };
    let a = v.abs();
    // a = m · 2^e with m in [0.5, 1)
    let bits = a.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i32;
    let (m53, e2) = if raw_exp == 0 {
        // subnormal: normalise by hand
        let frac = bits & ((1u64 << 52) - 1);
        let lz = frac.leading_zeros() as i32 - 11;
        (frac << lz, -1022 - lz + 1)
    } else {
        ((bits & ((1u64 << 52) - 1)) | (1u64 << 52), raw_exp - 1022)
    };
    // a = m53 · 2^(e2 − 53); pick base-16 exponent so the fraction is in [1/16, 1)
    let e16 = e2.div_euclid(4) + i32::from(e2.rem_euclid(4) != 0);
    let shift = 4 * e16 - e2; // 0..=3
    let mantissa = (m53 << 3) >> shift; // 56-bit fraction
    let exp = e16 + 64;
    if !(0..=127).contains(&exp) {
        return if exp < 0 { [0; 8] } else { [sign | 0x7f, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff] };
    }
    let mut out = [0u8; 8];
    out[0] = sign | exp as u8;
    out[1..].copy_from_slice(&mantissa.to_be_bytes()[1..]);
    out
}

pub(crate) fn decode_real8(b: &[u8]) -> f64 {
    let sign = if b[0] & 0x80 != 0 { -1.0 } else { 1.0 };
    let exp = i32::from(b[0] & 0x7f) - 64;
    let mut m = [0u8; 8];
    m[1..].copy_from_slice(&b[1..8]);
    let mantissa = u64::from_be_bytes(m) as f64;
    sign * mantissa * 2f64.powi(4 * exp - 56)
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn record(&mut self, rec: u16, data: &[u8]) {
        let len = (4 + data.len()) as u16;
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.extend_from_slice(&rec.to_be_bytes());
        self.buf.extend_from_slice(data);
    }

    fn int2(&mut self, rec: u16, vals: &[i16]) {
        let data: Vec<u8> = vals.iter().flat_map(|v| v.to_be_bytes()).collect();
        self.record(rec, &data);
    }

    fn string(&mut self, rec: u16, s: &str) {
        let mut data = s.as_bytes().to_vec();
        if data.len() % 2 == 1 {
            data.push(0);
        }
        self.record(rec, &data);
    }

    fn stamps(&mut self, rec: u16, t: &[Timestamp; 2]) {
        let vals: Vec<i16> = t.iter().flatten().copied().collect();
        self.int2(rec, &vals);
    }
}

/// Serialises a library as a GDSII release-6 stream.
pub fn write_gdsii(lib: &Library) -> Result<Vec<u8>, GdsError> {
    lib.validate()?;
    let mut w = Writer { buf: Vec::new() };
    w.int2(HEADER, &[STREAM_VERSION]);
    w.stamps(BGNLIB, &lib.timestamps);
    w.string(LIBNAME, &lib.name);
    let mut units = Vec::with_capacity(16);
    units.extend_from_slice(&encode_real8(lib.user_unit));
    units.extend_from_slice(&encode_real8(lib.db_unit_m));
    w.record(UNITS, &units);
    for cell in &lib.cells {
        w.stamps(BGNSTR, &cell.timestamps);
        w.string(STRNAME, &cell.name);
        for p in &cell.polygons {
            if p.vertices.len() + 1 > 8191 {
                return Err(GdsError::Invalid(LayoutError::InvalidPolygon(format!(
                    "{} vertices exceed the XY record limit",
                    p.vertices.len()
                ))));
            }
            w.record(BOUNDARY, &[]);
            w.int2(LAYER, &[p.layer]);
            w.int2(DATATYPE, &[p.datatype]);
            let mut xy = Vec::with_capacity(8 * (p.vertices.len() + 1));
            for &(x, y) in p.vertices.iter().chain(p.vertices.first()) {
                xy.extend_from_slice(&x.to_be_bytes());
                xy.extend_from_slice(&y.to_be_bytes());
            }
            w.record(XY, &xy);
            w.record(ENDEL, &[]);
        }
        for pl in &cell.placements {
            w.record(SREF, &[]);
            w.string(SNAME, &pl.cell);
            if pl.rotation != Rotation::R0 {
                w.record(STRANS, &[0, 0]);
                w.record(ANGLE, &encode_real8(pl.rotation.degrees()));
            }
            let mut xy = Vec::with_capacity(8);
            xy.extend_from_slice(&pl.origin.0.to_be_bytes());
            xy.extend_from_slice(&pl.origin.1.to_be_bytes());
            w.record(XY, &xy);
            w.record(ENDEL, &[]);
        }
        w.record(ENDSTR, &[]);
    }
    w.record(ENDLIB, &[]);
    Ok(w.buf)
}

struct Record<'a> {
    offset: usize,
    kind: u16,
    data: &'a [u8],
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn next(&mut self) -> Result<Record<'a>, GdsError> {
        let offset = self.pos;
        if self.pos + 4 > self.bytes.len() {
            return Err(GdsError::Truncated { offset });
        }
        let len = usize::from(u16::from_be_bytes([self.bytes[self.pos], self.bytes[self.pos + 1]]));
        let kind = u16::from_be_bytes([self.bytes[self.pos + 2], self.bytes[self.pos + 3]]);
        if len < 4 || len % 2 != 0 {
            return Err(GdsError::Malformed {
                offset,
                message: format!("record length {len}"),
            });
        }
        if self.pos + len > self.bytes.len() {
            return Err(GdsError::Truncated { offset });
        }
        let data = &self.bytes[self.pos + 4..self.pos + len];
        self.pos += len;
        Ok(Record { offset, kind, data })
    }

    fn expect(&mut self, kind: u16) -> Result<Record<'a>, GdsError> {
        let r = self.next_significant()?;
        if r.kind != kind {
            return Err(GdsError::Malformed {
                offset: r.offset,
                message: format!("expected record 0x{kind:04X}, found 0x{:04X}", r.kind),
            });
        }
        Ok(r)
    }

    fn next_significant(&mut self) -> Result<Record<'a>, GdsError> {
        loop {
            let r = self.next()?;
            if !IGNORED.contains(&r.kind) {
                return Ok(r);
            }
        }
    }
}

fn malformed(r: &Record, message: &str) -> GdsError {
    GdsError::Malformed {
        offset: r.offset,
        message: message.into(),
    }
}

fn int2s(r: &Record) -> Vec<i16> {
    r.data.chunks_exact(2).map(|c| i16::from_be_bytes([c[0], c[1]])).collect()
}

fn int2(r: &Record) -> Result<i16, GdsError> {
    int2s(r).first().copied().ok_or_else(|| malformed(r, "empty integer record"))
}

fn int4s(r: &Record) -> Result<Vec<(i32, i32)>, GdsError> {
    if !r.data.len().is_multiple_of(8) {
        return Err(malformed(r, "XY data is not a whole number of points"));
    }
    Ok(r.data
        .chunks_exact(8)
        .map(|c| {
            (
                i32::from_be_bytes([c[0], c[1], c[2], c[3]]),
                i32::from_be_bytes([c[4], c[5], c[6], c[7]]),
            )
        })
        .collect())
}

fn string(r: &Record) -> Result<String, GdsError> {
    let end = r.data.iter().position(|&b| b == 0).unwrap_or(r.data.len());
    String::from_utf8(r.data[..end].to_vec()).map_err(|_| malformed(r, "string is not ASCII"))
}

fn stamps(r: &Record) -> Result<[Timestamp; 2], GdsError> {
    let v = int2s(r);
    if v.len() != 12 {
        return Err(malformed(r, "timestamp needs 12 integers"));
    }
    let mut out = [[0i16; 6]; 2];
    out[0].copy_from_slice(&v[..6]);
    out[1].copy_from_slice(&v[6..]);
    Ok(out)
}

fn read_boundary(rd: &mut Reader) -> Result<Polygon, GdsError> {
    let mut layer = None;
    let mut datatype = 0;
    let mut pts = None;
    loop {
        let r = rd.next_significant()?;
        match r.kind {
            LAYER => layer = Some(int2(&r)?),
            DATATYPE => datatype = int2(&r)?,
            XY => pts = Some((int4s(&r)?, r.offset)),
            ENDEL => break,
            other => return Err(GdsError::Unsupported { offset: r.offset, record: other }),
        }
    }
    let layer = layer.ok_or(GdsError::Malformed {
        offset: rd.pos,
        message: "BOUNDARY without LAYER".into(),
    })?;
    let (mut v, off) = pts.ok_or(GdsError::Malformed {
        offset: rd.pos,
        message: "BOUNDARY without XY".into(),
    })?;
    if v.len() < 4 || v.first() != v.last() {
        return Err(GdsError::Malformed {
            offset: off,
            message: "BOUNDARY XY must be closed with at least 4 points".into(),
        });
    }
    v.pop();
    Ok(Polygon { layer, datatype, vertices: v })
}

fn read_sref(rd: &mut Reader) -> Result<Placement, GdsError> {
    let mut name = None;
    let mut rotation = Rotation::R0;
    let mut origin = None;
    loop {
        let r = rd.next_significant()?;
        match r.kind {
            SNAME => name = Some(string(&r)?),
            STRANS => {
                if r.data.len() != 2 || r.data[0] & 0x80 != 0 {
                    return Err(malformed(&r, "reflection is not supported"));
                }
            }
            MAG => {
                if r.data.len() != 8 || (decode_real8(r.data) - 1.0).abs() > 1e-12 {
                    return Err(malformed(&r, "magnification other than 1 is not supported"));
                }
            }
            ANGLE => {
                if r.data.len() != 8 {
                    return Err(malformed(&r, "ANGLE needs one real"));
                }
                rotation = Rotation::from_degrees(decode_real8(r.data))
                    .ok_or_else(|| malformed(&r, "only multiples of 90 degrees are supported"))?;
            }
            XY => {
                let v = int4s(&r)?;
                if v.len() != 1 {
                    return Err(malformed(&r, "SREF XY needs exactly one point"));
                }
                origin = Some(v[0]);
            }
            ENDEL => break,
            other => return Err(GdsError::Unsupported { offset: r.offset, record: other }),
        }
    }
    let missing = |what: &str| GdsError::Malformed {
        offset: rd.pos,
        message: format!("SREF without {what}"),
    };
    Ok(Placement {
        cell: name.ok_or_else(|| missing("SNAME"))?,
        origin: origin.ok_or_else(|| missing("XY"))?,
        rotation,
    })
}

/// Parses a GDSII stream containing BOUNDARY and SREF elements.
pub fn read_gdsii(bytes: &[u8]) -> Result<Library, GdsError> {
    let mut rd = Reader { bytes, pos: 0 };
    let h = rd.expect(HEADER)?;
    int2(&h)?;
    let bgn = rd.expect(BGNLIB)?;
    let lib_stamps = stamps(&bgn)?;
    let name = string(&rd.expect(LIBNAME)?)?;
    let u = rd.expect(UNITS)?;
    if u.data.len() != 16 {
        return Err(malformed(&u, "UNITS needs two reals"));
    }
    let mut lib = Library {
        name,
        user_unit: decode_real8(&u.data[..8]),
        db_unit_m: decode_real8(&u.data[8..]),
        timestamps: lib_stamps,
        cells: Vec::new(),
    };
    loop {
        let r = rd.next_significant()?;
        match r.kind {
            ENDLIB => break,
            BGNSTR => {
                let mut cell = Cell::new(string(&rd.expect(STRNAME)?)?);
                cell.timestamps = stamps(&r)?;
                loop {
                    let e = rd.next_significant()?;
                    match e.kind {
                        ENDSTR => break,
                        BOUNDARY => cell.polygons.push(read_boundary(&mut rd)?),
                        SREF => cell.placements.push(read_sref(&mut rd)?),
                        other => return Err(GdsError::Unsupported { offset: e.offset, record: other }),
                    }
                }
                lib.cells.push(cell);
            }
            other => return Err(GdsError::Unsupported { offset: r.offset, record: other }),
        }
    }
    lib.validate()?;
    Ok(lib)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_bytes() {
        let bytes = write_gdsii(&Library::new("L")).unwrap();
        assert_eq!(&bytes[..6], &[0x00, 0x06, 0x00, 0x02, 0x02, 0x58]);
    }

    #[test]
    fn real8_known_values() {
        // 1.0 = 1/16 · 16^1
        assert_eq!(encode_real8(1.0), [0x41, 0x10, 0, 0, 0, 0, 0, 0]);
        assert_eq!(encode_real8(-1.0)[0], 0xC1);
        assert_eq!(encode_real8(0.0), [0; 8]);
        for v in [1e-3, 1e-9, 90.0, 270.0, 123.456, 5e-70] {
            let back = decode_real8(&encode_real8(v));
            assert!((back - v).abs() <= v.abs() * 1e-15, "{v} -> {back}");
        }
    }

    #[test]
    fn empty_library_is_byte_stable() {
        let bytes = write_gdsii(&Library::new("EMPTY")).unwrap();
        let lib = read_gdsii(&bytes).unwrap();
        assert_eq!(lib, Library::new("EMPTY"));
        assert_eq!(write_gdsii(&lib).unwrap(), bytes);
    }

    #[test]
    fn square_has_five_points() {
        let mut lib = Library::new("L");
        let mut c = Cell::new("SQ");
        c.polygons.push(Polygon::rect(3, 0, 0, 100, 100).unwrap());
        lib.cells.push(c);
        let bytes = write_gdsii(&lib).unwrap();
        let xy = bytes.windows(4).position(|w| w[2..] == [0x10, 0x03]).unwrap();
        let len = u16::from_be_bytes([bytes[xy], bytes[xy + 1]]);
        assert_eq!((len - 4) / 8, 5);
    }

    #[test]
    fn rejects_truncated_and_garbage() {
        let bytes = write_gdsii(&Library::new("L")).unwrap();
        assert!(matches!(read_gdsii(&bytes[..bytes.len() - 2]), Err(GdsError::Truncated { .. })));
        let mut bad = bytes.clone();
        bad[1] = 0x05; // odd record length
        assert!(matches!(read_gdsii(&bad), Err(GdsError::Malformed { offset: 0, .. })));
        let mut text = bytes[..bytes.len() - 4].to_vec();
        text.extend_from_slice(&[0x00, 0x04, 0x0C, 0x00, 0x00, 0x04, 0x04, 0x00]); // TEXT element
        assert!(matches!(read_gdsii(&text), Err(GdsError::Unsupported { record: 0x0C00, .. })));
    }
}
