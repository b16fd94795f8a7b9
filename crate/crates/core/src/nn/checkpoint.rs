//! Binary checkpoint container.
//!
//! Byte layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes  "PSKCKPT1"
//! header_len   u64
//! header       header_len bytes of UTF-8 JSON: {"format_version": 1, "model_config": {...}, ...}
//! tensor_count u64
//! per tensor:
//!   name_len   u32
//!   name       name_len bytes UTF-8
//!   ndim       u32
//!   dims       ndim × u64
//!   data       prod(dims) × f64 (IEEE-754 binary64, LE)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde_json::Value;

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PSKCKPT1";
pub const FORMAT_VERSION: u64 = 1;

pub fn write_checkpoint(mut w: impl Write, header: &Value, store: &ParamStore) -> Result<()> {
    let mut header = header.clone();
    if let Value::Object(map) = &mut header {
        map.insert("format_version".into(), FORMAT_VERSION.into());
    } else {
        return Err(Error::Format("checkpoint header must be a JSON object".into()));
    }
    let header_bytes = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    w.write_all(&(store.len() as u64).to_le_bytes())?;
    for (name, t) in store.iter() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(t.len() * 8);
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

/// Reads the header and all tensors in file order.
pub fn read_checkpoint(mut r: impl Read) -> Result<(Value, Vec<(String, Tensor)>)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a checkpoint file (bad magic)".into()));
    }
    let header_len = read_u64(&mut r)? as usize;
    let mut header = vec![0u8; header_len];
    r.read_exact(&mut header)?;
    let header: Value = serde_json::from_slice(&header)?;
    match header.get("format_version").and_then(Value::as_u64) {
        Some(FORMAT_VERSION) => {}
        other => {
            return Err(Error::Format(format!(
                "unsupported checkpoint format_version {other:?}"
            )))
        }
    }
    let count = read_u64(&mut r)? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        let ndim = read_u32(&mut r)? as usize;
        let dims = (0..ndim)
            .map(|_| read_u64(&mut r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = dims.iter().product();
        let mut raw = vec![0u8; n * 8];
        r.read_exact(&mut raw)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        tensors.push((name, Tensor::new(dims, data)?));
    }
    Ok((header, tensors))
}

/// Copies tensors into `store` by name; every parameter must be present with
/// a matching shape.
pub fn load_into(store: &mut ParamStore, tensors: Vec<(String, Tensor)>) -> Result<()> {
    let mut seen = vec![false; store.len()];
    for (name, t) in tensors {
        let id = store
            .find(&name)
            .ok_or_else(|| Error::Config(format!("checkpoint has unknown tensor {name}")))?;
        if store.get(id).shape() != t.shape() {
            return Err(Error::Config(format!(
                "tensor {name}: checkpoint shape {:?}, model expects {:?}",
                t.shape(),
                store.get(id).shape()
            )));
        }
        *store.get_mut(id) = t;
        seen[id.0] = true;
    }
    if let Some(missing) = store.ids().find(|id| !seen[id.0]) {
        return Err(Error::Config(format!(
            "checkpoint lacks tensor {}",
            store.name(missing)
        )));
    }
    Ok(())
}

pub fn save_file(path: &Path, header: &Value, store: &ParamStore) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_checkpoint(&mut w, header, store)?;
    w.flush()?;
    Ok(())
}

pub fn load_file(path: &Path) -> Result<(Value, Vec<(String, Tensor)>)> {
    let file = std::fs::File::open(path)?;
    read_checkpoint(std::io::BufReader::new(file))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn store() -> ParamStore {
        let mut s = ParamStore::new();
        s.add("a.w", Tensor::matrix(2, 2, vec![1.0, -2.5, 3.25, f64::MIN_POSITIVE]).unwrap());
        s.add("b", Tensor::vector(vec![0.1, 0.2, 0.3]));
        s
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = store();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &json!({"model_config": {"m": 8}}), &s).unwrap();
        let (header, tensors) = read_checkpoint(&buf[..]).unwrap();
        assert_eq!(header["format_version"], 1);
        assert_eq!(header["model_config"]["m"], 8);
        let mut fresh = store();
        for id in fresh.ids().collect::<Vec<_>>() {
            fresh.get_mut(id).data_mut().fill(0.0);
        }
        load_into(&mut fresh, tensors).unwrap();
        assert_eq!(fresh, s);
    }

    #[test]
    fn layout_starts_with_magic_and_header_length() {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &json!({}), &ParamStore::new()).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        let len = u64::from_le_bytes(buf[8..16].try_into().unwrap()) as usize;
        let header: Value = serde_json::from_slice(&buf[16..16 + len]).unwrap();
        assert_eq!(header, json!({"format_version": 1}));
        assert_eq!(&buf[16 + len..], &0u64.to_le_bytes());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut other = ParamStore::new();
        other.add("a.w", Tensor::zeros(&[3, 2]));
        other.add("b", Tensor::zeros(&[3]));
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &json!({}), &store()).unwrap();
        let (_, tensors) = read_checkpoint(&buf[..]).unwrap();
        assert!(load_into(&mut other, tensors).is_err());
    }

    #[test]
    fn bad_magic_is_rejected() {
        assert!(read_checkpoint(&b"NOTACKPT\0\0\0\0\0\0\0\0"[..]).is_err());
    }
}
