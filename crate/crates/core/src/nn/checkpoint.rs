//! Checkpoint file format.
//!
//! Layout: 8-byte magic `STMSCKPT`, format version as little-endian u16,
//! metadata length as little-endian u64, the metadata block as canonical
//! JSON text (sorted keys, no whitespace), then one little-endian IEEE-754
//! f64 payload per tensor, in metadata (sorted-name) order. Round-trips
//! are bit-exact; no timestamps live in the file.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::params::ParameterStore;
use crate::nn::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"STMSCKPT";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Metadata {
    hyper: BTreeMap<String, String>,
    seed: u64,
    #[serde(rename = "tensors")]
    tensor_shapes: BTreeMap<String, Vec<usize>>,
    version: u64,
}

pub fn save(
    path: &Path,
    store: &ParameterStore,
    hyper: &BTreeMap<String, String>,
) -> Result<()> {
    let mut shapes = BTreeMap::new();
    for (name, tensor) in store.iter() {
        shapes.insert(name.to_string(), tensor.shape().to_vec());
    }
    let meta = Metadata {
        hyper: hyper.clone(),
        seed: store.seed(),
        tensor_shapes: shapes,
        version: store.version(),
    };
    let meta_json = serde_json::to_string(&meta)
        .map_err(|e| Error::Checkpoint(format!("metadata encode: {e}")))?;

    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(meta_json.len() as u64).to_le_bytes());
    buf.extend_from_slice(meta_json.as_bytes());
    for name in meta.tensor_shapes.keys() {
        let tensor = store.by_name(name)?;
        for v in tensor.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    file.write_all(&buf)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(ParameterStore, BTreeMap<String, String>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    load_bytes(&bytes)
}

pub fn load_bytes(bytes: &[u8]) -> Result<(ParameterStore, BTreeMap<String, String>)> {
    let fail = |msg: &str| Error::Checkpoint(msg.to_string());
    if bytes.len() < 18 || &bytes[..8] != MAGIC {
        return Err(fail("bad magic"));
    }
    let version = u16::from_le_bytes([bytes[8], bytes[9]]);
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version}"
        )));
    }
    let meta_len = u64::from_le_bytes(bytes[10..18].try_into().unwrap()) as usize;
    if bytes.len() < 18 + meta_len {
        return Err(fail("truncated metadata"));
    }
    let meta: Metadata = serde_json::from_slice(&bytes[18..18 + meta_len])
        .map_err(|e| Error::Checkpoint(format!("metadata decode: {e}")))?;

    let mut store = ParameterStore::new(meta.seed);
    let mut cursor = 18 + meta_len;
    for (name, shape) in &meta.tensor_shapes {
        let count: usize = shape.iter().product();
        let end = cursor + count * 8;
        if bytes.len() < end {
            return Err(fail("truncated tensor payload"));
        }
        let mut data = Vec::with_capacity(count);
        for chunk in bytes[cursor..end].chunks_exact(8) {
            data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        store.add(name, Tensor::from_vec(shape, data)?)?;
        cursor = end;
    }
    if cursor != bytes.len() {
        return Err(fail("trailing bytes after tensor payloads"));
    }
    store.set_version(meta.version);
    Ok((store, meta.hyper))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let mut store = ParameterStore::new(99);
        store.add_uniform("zz.w", &[3, 5]).unwrap();
        store.add_uniform("aa.b", &[7]).unwrap();
        store.bump_version();
        let mut hyper = BTreeMap::new();
        hyper.insert("d_hidden".to_string(), "7".to_string());
        save(&path, &store, &hyper).unwrap();
        let first = fs::read(&path).unwrap();

        let (loaded, hyper2) = load(&path).unwrap();
        assert_eq!(hyper, hyper2);
        assert_eq!(loaded.seed(), 99);
        assert_eq!(loaded.version(), 1);
        assert_eq!(
            store.by_name("zz.w").unwrap().data(),
            loaded.by_name("zz.w").unwrap().data()
        );

        let path2 = dir.path().join("m2.ckpt");
        save(&path2, &loaded, &hyper2).unwrap();
        let second = fs::read(&path2).unwrap();
        assert_eq!(first, second, "resave must be byte-identical");
    }

    #[test]
    fn rejects_corrupt_magic() {
        assert!(load_bytes(b"NOTMAGIC").is_err());
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"XTMSCKPT");
        bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        bytes.extend_from_slice(&0u64.to_le_bytes());
        assert!(load_bytes(&bytes).is_err());
    }
}
