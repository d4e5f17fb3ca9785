//! Binary trajectory snapshots.
//!
//! Little-endian layout:
//!
//! ```text
//! header:  N: u64, M: u64, L: f64, record_count: u64
//! record:  t: f64, then N×M f64 (species-major)
//! ```
//!
//! The record count is patched into the header when the writer finishes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::GridState;
use crate::error::{Error, Result};

pub struct SnapshotWriter {
    out: BufWriter<File>,
    n: usize,
    m: usize,
    count: u64,
}

impl SnapshotWriter {
    pub fn create(path: &Path, n: usize, m: usize, l: f64) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_u64::<LittleEndian>(n as u64)?;
        out.write_u64::<LittleEndian>(m as u64)?;
        out.write_f64::<LittleEndian>(l)?;
        out.write_u64::<LittleEndian>(0)?;
        Ok(SnapshotWriter { out, n, m, count: 0 })
    }

    pub fn push(&mut self, state: &GridState) -> Result<()> {
        if state.u.len() != self.n || state.u.iter().any(|u| u.len() != self.m) {
            return Err(Error::Invalid("snapshot shape mismatch".into()));
        }
        self.out.write_f64::<LittleEndian>(state.t)?;
        for u in &state.u {
            for &v in u {
                self.out.write_f64::<LittleEndian>(v)?;
            }
        }
        self.count += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<u64> {
        self.out.flush()?;
        let mut f = self.out.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        f.seek(SeekFrom::Start(24))?;
        f.write_u64::<LittleEndian>(self.count)?;
        f.flush()?;
        Ok(self.count)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshots {
    pub n: usize,
    pub m: usize,
    pub l: f64,
    pub records: Vec<(f64, Vec<Vec<f64>>)>,
}

pub fn read_snapshots(path: &Path) -> Result<Snapshots> {
    let mut r = BufReader::new(File::open(path)?);
    let n = r.read_u64::<LittleEndian>()? as usize;
    let m = r.read_u64::<LittleEndian>()? as usize;
    let l = r.read_f64::<LittleEndian>()?;
    let count = r.read_u64::<LittleEndian>()? as usize;
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let t = r.read_f64::<LittleEndian>()?;
        let mut u = vec![vec![0.0; m]; n];
        for row in u.iter_mut() {
            r.read_f64_into::<LittleEndian>(row)?;
        }
        records.push((t, u));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Invalid(format!("{} trailing bytes in snapshot file", rest.len())));
    }
    Ok(Snapshots { n, m, l, records })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.bin");
        let mut w = SnapshotWriter::create(&path, 2, 4, 3.0).unwrap();
        let mut st = GridState { l: 3.0, m: 4, t: 0.0, u: vec![vec![1.0, 2.0, 3.0, 4.0], vec![0.5; 4]], khat: vec![] };
        w.push(&st).unwrap();
        st.t = 0.25;
        st.u[1][2] = -1.0;
        w.push(&st).unwrap();
        assert_eq!(w.finish().unwrap(), 2);
        let s = read_snapshots(&path).unwrap();
        assert_eq!((s.n, s.m, s.l), (2, 4, 3.0));
        assert_eq!(s.records[1].0, 0.25);
        assert_eq!(s.records[1].1, st.u);
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 32 + 2 * (8 + 2 * 4 * 8));
    }
}
