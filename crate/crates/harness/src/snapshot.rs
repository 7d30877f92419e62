//! Binary field snapshots.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic   b"EKSNAP1\0"
//! u32     version
//! u32     d
//! u32     N_1 .. N_d
//! f64     L_1 .. L_d
//! f64     time
//! u32     field count
//! per field:  u32 name length, UTF-8 name, u32 components, u32 kind (0 real, 1 complex)
//! per field, per component: row-major samples, f64 (complex as re, im pairs)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use korteweg_core::{Field, FourierGrid, ValueKind};

use crate::error::{HarnessError, Result};

pub const MAGIC: [u8; 8] = *b"EKSNAP1\0";
pub const VERSION: u32 = 1;
const MAX_NAME: u32 = 1 << 16;

/// Bytes before the first field descriptor.
pub fn header_len(d: usize) -> usize {
    8 + 4 + 4 + 4 * d + 8 * d + 8 + 4
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub time: f64,
    pub fields: Vec<(String, Field)>,
}

impl Snapshot {
    pub fn get(&self, name: &str) -> Option<&Field> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }
}

fn put_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

pub fn write_snapshot<W: Write>(mut w: W, grid: &FourierGrid, time: f64, fields: &[(&str, &Field)]) -> Result<()> {
    w.write_all(&MAGIC)?;
    put_u32(&mut w, VERSION)?;
    put_u32(&mut w, grid.dim() as u32)?;
    for &n in grid.dims() {
        put_u32(&mut w, n as u32)?;
    }
    for &l in grid.lengths() {
        put_f64(&mut w, l)?;
    }
    put_f64(&mut w, time)?;
    put_u32(&mut w, fields.len() as u32)?;
    for (name, f) in fields {
        if f.grid().as_ref() != grid {
            return Err(HarnessError::SnapshotFormat(format!("field '{name}' lives on another grid")));
        }
        put_u32(&mut w, name.len() as u32)?;
        w.write_all(name.as_bytes())?;
        put_u32(&mut w, f.n_components() as u32)?;
        put_u32(&mut w, if f.is_real() { 0 } else { 1 })?;
    }
    for (_, f) in fields {
        for comp in f.physical() {
            for v in comp {
                put_f64(&mut w, v.re)?;
                if !f.is_real() {
                    put_f64(&mut w, v.im)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes(&mut self, n: usize, what: &'static str) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.inner.read_exact(&mut buf).map_err(|e| match e.kind() {
            ErrorKind::UnexpectedEof => HarnessError::SnapshotTruncated(what),
            _ => HarnessError::Io(e),
        })?;
        Ok(buf)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &'static str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(8, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &'static str) -> Result<Vec<f64>> {
        let raw = self.bytes(8 * n, what)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

/// Read a snapshot whose grid must equal `grid` exactly.
pub fn read_snapshot<R: Read>(r: R, grid: &Arc<FourierGrid>) -> Result<Snapshot> {
    let mut r = Reader { inner: r };
    let magic: [u8; 8] = r.bytes(8, "magic")?.try_into().unwrap();
    if magic != MAGIC {
        return Err(HarnessError::SnapshotMagic(magic));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(HarnessError::SnapshotVersion(version));
    }
    let d = r.u32("dimension")? as usize;
    if d == 0 || d > korteweg_core::grid::MAX_DIM {
        return Err(HarnessError::SnapshotFormat(format!("dimension {d}")));
    }
    let dims = (0..d).map(|_| r.u32("grid size").map(|n| n as usize)).collect::<Result<Vec<_>>>()?;
    let lengths = r.f64s(d, "box lengths")?;
    if dims != grid.dims() || lengths != grid.lengths() {
        return Err(HarnessError::SnapshotGrid { expected: grid.dims().to_vec(), found: dims });
    }
    let time = r.f64("time")?;
    let count = r.u32("field count")?;
    let mut descs = Vec::new();
    for _ in 0..count {
        let len = r.u32("name length")?;
        if len > MAX_NAME {
            return Err(HarnessError::SnapshotFormat(format!("name length {len}")));
        }
        let name = String::from_utf8(r.bytes(len as usize, "name")?)
            .map_err(|_| HarnessError::SnapshotFormat("field name is not UTF-8".into()))?;
        let comps = r.u32("component count")? as usize;
        let kind = match r.u32("value kind")? {
            0 => ValueKind::Real,
            1 => ValueKind::Complex,
            k => return Err(HarnessError::SnapshotFormat(format!("value kind {k}"))),
        };
        descs.push((name, comps, kind));
    }
    let n = grid.len();
    let mut fields = Vec::with_capacity(descs.len());
    for (name, comps, kind) in descs {
        let field = match kind {
            ValueKind::Real => {
                let data = (0..comps).map(|_| r.f64s(n, "samples")).collect::<Result<Vec<_>>>()?;
                Field::real_vector(grid, data)
            }
            ValueKind::Complex => {
                let data = (0..comps)
                    .map(|_| {
                        r.f64s(2 * n, "samples")
                            .map(|v| v.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect())
                    })
                    .collect::<Result<Vec<_>>>()?;
                Field::complex(grid, data)
            }
        };
        fields.push((name, field));
    }
    let mut probe = [0u8; 1];
    if r.inner.read(&mut probe)? != 0 {
        return Err(HarnessError::SnapshotFormat("trailing bytes".into()));
    }
    Ok(Snapshot { time, fields })
}

pub fn save(path: &Path, grid: &FourierGrid, time: f64, fields: &[(&str, &Field)]) -> Result<()> {
    write_snapshot(BufWriter::new(File::create(path)?), grid, time, fields)
}

pub fn load(path: &Path, grid: &Arc<FourierGrid>) -> Result<Snapshot> {
    read_snapshot(BufReader::new(File::open(path)?), grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_size_for_a_square_grid() {
        let g = FourierGrid::uniform(2, 64, 10.0).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &g, 0.5, &[]).unwrap();
        assert_eq!(buf.len(), 52);
        assert_eq!(header_len(2), 52);
    }

    #[test]
    fn bytes_follow_the_documented_layout() {
        let g = FourierGrid::uniform(1, 8, 2.0).unwrap();
        let f = Field::real_scalar(&g, (0..8).map(|i| i as f64).collect());
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &g, 1.5, &[("r", &f)]).unwrap();
        assert_eq!(&buf[..8], b"EKSNAP1\0");
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[16..20].try_into().unwrap()), 8);
        assert_eq!(f64::from_le_bytes(buf[20..28].try_into().unwrap()), 2.0);
        assert_eq!(f64::from_le_bytes(buf[28..36].try_into().unwrap()), 1.5);
        let desc = header_len(1) + 4 + 1 + 4 + 4;
        assert_eq!(buf.len(), desc + 8 * 8);
        assert_eq!(f64::from_le_bytes(buf[desc + 8..desc + 16].try_into().unwrap()), 1.0);
    }
}
