//! Binary and CSV serialization for fields and trajectory blocks.
//!
//! Binary field layout, all little-endian:
//!
//! ```text
//! 0..8    magic  b"PWFIELD\0"
//! 8..12   u32    format version (1)
//! 12..16  u32    kind: 0 = real, 1 = complex, 2 = trajectory block
//! u64     n (dimension)
//! n × { f64 lower, f64 upper, u64 count, u64 boundary (0 periodic, 1 dirichlet-zero) }
//! f64     timestamp
//! f64...  values, row-major with axis 0 slowest; complex values as (re, im) pairs
//! ```
//!
//! The metric is not stored; readers attach the unit metric unless told otherwise.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ComplexField, Field, FieldValue, RealField};
use crate::grid::{Axis, Boundary, Grid, Metric};

pub const MAGIC: &[u8; 8] = b"PWFIELD\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Real = 0,
    Complex = 1,
    Trajectory = 2,
}

impl Kind {
    fn from_u32(v: u32) -> Result<Self> {
        match v {
            0 => Ok(Kind::Real),
            1 => Ok(Kind::Complex),
            2 => Ok(Kind::Trajectory),
            other => Err(Error::Format(format!("unknown kind {other}"))),
        }
    }
}

/// Values that can be written in the binary format.
pub trait BinaryValue: FieldValue {
    const KIND: Kind;
    fn write_le(&self, out: &mut Vec<u8>);
    fn read_le(r: &mut Reader<'_>) -> Result<Self>;
    fn csv_header() -> &'static str;
    fn csv_cells(&self) -> String;
}

impl BinaryValue for f64 {
    const KIND: Kind = Kind::Real;
    fn write_le(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(r: &mut Reader<'_>) -> Result<Self> {
        r.f64()
    }
    fn csv_header() -> &'static str {
        "value"
    }
    fn csv_cells(&self) -> String {
        format!("{self}")
    }
}

impl BinaryValue for Complex64 {
    const KIND: Kind = Kind::Complex;
    fn write_le(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.re.to_le_bytes());
        out.extend_from_slice(&self.im.to_le_bytes());
    }
    fn read_le(r: &mut Reader<'_>) -> Result<Self> {
        Ok(Complex64::new(r.f64()?, r.f64()?))
    }
    fn csv_header() -> &'static str {
        "re,im"
    }
    fn csv_cells(&self) -> String {
        format!("{},{}", self.re, self.im)
    }
}

/// Cursor over a byte slice with bounds-checked little-endian reads.
pub struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        self.take(n)
    }

    pub fn is_done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

pub(crate) fn write_header(out: &mut Vec<u8>, kind: Kind) {
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(kind as u32).to_le_bytes());
}

pub(crate) fn read_header(r: &mut Reader<'_>) -> Result<Kind> {
    if r.take(8)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    Kind::from_u32(r.u32()?)
}

pub(crate) fn write_axes(out: &mut Vec<u8>, grid: &Grid) {
    out.extend_from_slice(&(grid.dim() as u64).to_le_bytes());
    for a in grid.axes() {
        out.extend_from_slice(&a.lower.to_le_bytes());
        out.extend_from_slice(&a.upper.to_le_bytes());
        out.extend_from_slice(&(a.count as u64).to_le_bytes());
        let mode: u64 = match a.boundary {
            Boundary::Periodic => 0,
            Boundary::DirichletZero => 1,
        };
        out.extend_from_slice(&mode.to_le_bytes());
    }
}

pub(crate) fn read_axes(r: &mut Reader<'_>) -> Result<Vec<Axis>> {
    let n = r.u64()? as usize;
    if n == 0 || n > crate::grid::MAX_DIM {
        return Err(Error::Format(format!("dimension {n} out of range")));
    }
    (0..n)
        .map(|_| {
            let lower = r.f64()?;
            let upper = r.f64()?;
            let count = r.u64()? as usize;
            let boundary = match r.u64()? {
                0 => Boundary::Periodic,
                1 => Boundary::DirichletZero,
                m => return Err(Error::Format(format!("unknown boundary mode {m}"))),
            };
            Ok(Axis { lower, upper, count, boundary })
        })
        .collect()
}

pub fn encode_field<T: BinaryValue>(f: &Field<T>) -> Vec<u8> {
    let per = if T::KIND == Kind::Complex { 16 } else { 8 };
    let mut out = Vec::with_capacity(64 + f.len() * per);
    write_header(&mut out, T::KIND);
    write_axes(&mut out, f.grid());
    out.extend_from_slice(&f.time().to_le_bytes());
    for v in f.values() {
        v.write_le(&mut out);
    }
    out
}

/// Decodes a field, attaching `metric` (unit metric when `None`).
pub fn decode_field<T: BinaryValue>(bytes: &[u8], metric: Option<Metric>) -> Result<Field<T>> {
    let mut r = Reader::new(bytes);
    let kind = read_header(&mut r)?;
    if kind != T::KIND {
        return Err(Error::Format(format!("expected {:?} field, found {kind:?}", T::KIND)));
    }
    let axes = read_axes(&mut r)?;
    let dim = axes.len();
    let grid = Grid::with_metric(axes, metric.unwrap_or_else(|| Metric::unit(dim)))?;
    let time = r.f64()?;
    let values = (0..grid.len()).map(|_| T::read_le(&mut r)).collect::<Result<Vec<_>>>()?;
    if !r.is_done() {
        return Err(Error::Format("trailing bytes after field values".into()));
    }
    Field::new(Arc::new(grid), values, time)
}

pub fn write_field<T: BinaryValue>(path: &Path, f: &Field<T>) -> Result<()> {
    std::fs::File::create(path)?.write_all(&encode_field(f))?;
    Ok(())
}

pub fn read_field<T: BinaryValue>(path: &Path, metric: Option<Metric>) -> Result<Field<T>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_field(&bytes, metric)
}

pub fn read_real(path: &Path) -> Result<RealField> {
    read_field(path, None)
}

pub fn read_complex(path: &Path) -> Result<ComplexField> {
    read_field(path, None)
}

/// CSV with one row per node: coordinates then value columns.
pub fn field_csv<T: BinaryValue>(f: &Field<T>) -> String {
    let grid = f.grid();
    let mut s = String::new();
    let coords: Vec<String> = (0..grid.dim()).map(|i| format!("q{i}")).collect();
    s.push_str(&coords.join(","));
    s.push(',');
    s.push_str(T::csv_header());
    s.push('\n');
    let mut q = vec![0.0; grid.dim()];
    for (p, v) in f.values().iter().enumerate() {
        grid.coords_into(p, &mut q);
        for x in &q {
            s.push_str(&format!("{x},"));
        }
        s.push_str(&v.csv_cells());
        s.push('\n');
    }
    s
}

/// Lowercase hex SHA-256 of `bytes`, used as the config hash in manifests.
pub fn content_hash(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ComplexField {
        let g = Arc::new(Grid::new(vec![Axis::periodic(0.0, 1.0, 4), Axis::dirichlet(-1.0, 1.0, 5)]).unwrap());
        ComplexField::from_fn(g, 0.25, |q| Complex64::new(q[0], q[1] * q[1])).unwrap()
    }

    #[test]
    fn content_hash_matches_known_digest() {
        assert_eq!(content_hash(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn header_is_sixteen_bytes() {
        let bytes = encode_field(&sample());
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 1);
        assert_eq!(bytes.len(), 16 + 8 + 2 * 32 + 8 + 20 * 16);
    }

    #[test]
    fn decode_rejects_wrong_kind_and_truncation() {
        let bytes = encode_field(&sample());
        assert!(decode_field::<f64>(&bytes, None).is_err());
        assert!(decode_field::<Complex64>(&bytes[..bytes.len() - 3], None).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_field::<Complex64>(&bad, None).is_err());
    }

    #[test]
    fn csv_lists_every_node() {
        let csv = field_csv(&sample());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "q0,q1,re,im");
        assert_eq!(lines.len(), 21);
        assert_eq!(lines[1], "0,-1,0,1");
    }
}
