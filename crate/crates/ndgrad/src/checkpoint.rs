//! Versioned binary container for named tensors.
//!
//! Layout (all integers little-endian):
//!   magic "NDGT" | u32 version | u64 entry count
//!   per entry: u32 name length | name bytes (UTF-8) | u32 rank |
//!              u64 dim per rank | f64 payload, row-major
//!
//! The writer emits entries in the order given, so a fixed parameter order
//! produces byte-identical files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::NdError;
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"NDGT";
const VERSION: u32 = 1;

pub fn write_tensors<W: Write>(w: &mut W, entries: &[(&str, &Tensor)]) -> Result<(), NdError> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(entries.len() as u64).to_le_bytes())?;
    for (name, t) in entries {
        let nb = name.as_bytes();
        w.write_all(&(nb.len() as u32).to_le_bytes())?;
        w.write_all(nb)?;
        w.write_all(&2u32.to_le_bytes())?;
        w.write_all(&(t.rows() as u64).to_le_bytes())?;
        w.write_all(&(t.cols() as u64).to_le_bytes())?;
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn save_tensors<P: AsRef<Path>>(path: P, entries: &[(&str, &Tensor)]) -> Result<(), NdError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensors(&mut w, entries)?;
    w.flush()?;
    Ok(())
}

fn read_exact_or(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<(), NdError> {
    r.read_exact(buf).map_err(|_| NdError::Checkpoint(format!("truncated while reading {what}")))
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32, NdError> {
    let mut b = [0u8; 4];
    read_exact_or(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read, what: &str) -> Result<u64, NdError> {
    let mut b = [0u8; 8];
    read_exact_or(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_tensors<R: Read>(r: &mut R) -> Result<Vec<(String, Tensor)>, NdError> {
    let mut magic = [0u8; 4];
    read_exact_or(r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(NdError::Checkpoint("bad magic, not a tensor container".into()));
    }
    let version = read_u32(r, "version")?;
    if version != VERSION {
        return Err(NdError::Checkpoint(format!("unsupported container version {version}")));
    }
    let count = read_u64(r, "entry count")?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let name_len = read_u32(r, "name length")? as usize;
        let mut name_bytes = vec![0u8; name_len];
        read_exact_or(r, &mut name_bytes, "name")?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| NdError::Checkpoint("tensor name is not UTF-8".into()))?;
        let rank = read_u32(r, "rank")?;
        if rank == 0 || rank > 2 {
            return Err(NdError::Checkpoint(format!("tensor {name}: unsupported rank {rank}")));
        }
        let mut dims = Vec::with_capacity(rank as usize);
        for _ in 0..rank {
            dims.push(read_u64(r, "dimension")? as usize);
        }
        let (rows, cols) = if rank == 1 { (1, dims[0]) } else { (dims[0], dims[1]) };
        let numel = rows.checked_mul(cols).ok_or_else(|| {
            NdError::Checkpoint(format!("tensor {name}: dimension overflow"))
        })?;
        let mut data = Vec::with_capacity(numel);
        let mut b = [0u8; 8];
        for _ in 0..numel {
            read_exact_or(r, &mut b, "payload")?;
            data.push(f64::from_le_bytes(b));
        }
        out.push((name, Tensor::from_vec(rows, cols, data)));
    }
    Ok(out)
}

pub fn load_tensors<P: AsRef<Path>>(path: P) -> Result<Vec<(String, Tensor)>, NdError> {
    let mut r = BufReader::new(File::open(path)?);
    read_tensors(&mut r)
}
