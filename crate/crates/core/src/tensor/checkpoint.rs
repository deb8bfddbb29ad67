//! Binary checkpoint: `magic, version: u32, count: u32`, then per parameter
//! `name_len: u32, name bytes, rank: u32, dims: u32 * rank, f32 payload`.
//! Integers and floats are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Element, ParamStore, Tensor, TensorError};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ECHOLAB\0";
pub const CHECKPOINT_VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> TensorError {
    TensorError::Checkpoint(msg.into())
}

pub fn write_checkpoint<T: Element>(params: &ParamStore<T>, out: &mut impl Write) -> Result<(), TensorError> {
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    out.write_all(&(params.len() as u32).to_le_bytes())?;
    for (name, t) in params.iter() {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            out.write_all(&(d as u32).to_le_bytes())?;
        }
        for &x in t.data() {
            out.write_all(&(x.as_f64() as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32, TensorError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_checkpoint<T: Element>(r: &mut impl Read) -> Result<ParamStore<T>, TensorError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(bad("bad magic"));
    }
    let version = read_u32(r)?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let count = read_u32(r)?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let len = read_u32(r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| bad("parameter name is not utf-8"))?;
        let rank = read_u32(r)? as usize;
        let shape = (0..rank).map(|_| read_u32(r).map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let n: usize = shape.iter().product();
        let mut raw = vec![0u8; n * 4];
        r.read_exact(&mut raw)?;
        let data = raw.chunks_exact(4).map(|c| T::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)).collect();
        store.add(name, Tensor::new(shape, data)?);
    }
    Ok(store)
}

pub fn save_checkpoint<T: Element>(params: &ParamStore<T>, path: &Path) -> Result<(), TensorError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(params, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint<T: Element>(path: &Path) -> Result<ParamStore<T>, TensorError> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_names_shapes_and_f32_values() {
        let mut p = ParamStore::<f32>::new();
        p.add("enc.0.w", Tensor::from_f64(&[2, 3], &[1.0, -2.5, 3.25, 0.0, 1e-7, 9.0]).unwrap());
        p.add("b", Tensor::from_f64(&[1], &[0.5]).unwrap());
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        assert_eq!(&buf[..8], CHECKPOINT_MAGIC);
        let q: ParamStore<f32> = read_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(q.len(), 2);
        for ((n1, t1), (n2, t2)) in p.iter().zip(q.iter()) {
            assert_eq!(n1, n2);
            assert_eq!(t1, t2);
        }
    }

    #[test]
    fn rejects_truncated_and_foreign_files() {
        assert!(read_checkpoint::<f32>(&mut &b"NOTACKPT\x01\0\0\0\0\0\0\0"[..]).is_err());
        let mut p = ParamStore::<f32>::new();
        p.add("w", Tensor::zeros(&[4]));
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        buf.truncate(buf.len() - 2);
        assert!(read_checkpoint::<f32>(&mut buf.as_slice()).is_err());
    }
}
