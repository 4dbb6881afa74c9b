//! Versioned binary container of named tensors with a JSON header.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "PNKCKPT\0"
//! version  u32
//! hlen     u64      header length, then `hlen` bytes of UTF-8 JSON
//! count    u32
//! count × { nlen u32, name, trainable u8, rank u32, dims u64 × rank, data f64 × numel }
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::models::ParamStore;
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"PNKCKPT\0";
pub const VERSION: u32 = 1;

/// Prefix of tensors that hold optimizer state rather than parameters.
pub const STATE_PREFIX: &str = "optim.";

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub trainable: bool,
    pub tensor: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: serde_json::Value,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn new(header: serde_json::Value, params: &ParamStore) -> Self {
        let tensors = params
            .entries()
            .iter()
            .map(|p| NamedTensor {
                name: p.name.clone(),
                trainable: p.trainable,
                tensor: p.tensor.clone(),
            })
            .collect();
        Self { header, tensors }
    }

    pub fn push_state(&mut self, name: &str, tensor: Tensor) {
        self.tensors.push(NamedTensor {
            name: format!("{STATE_PREFIX}{name}"),
            trainable: false,
            tensor,
        });
    }

    pub fn state(&self, name: &str) -> Option<&Tensor> {
        let full = format!("{STATE_PREFIX}{name}");
        self.tensors.iter().find(|t| t.name == full).map(|t| &t.tensor)
    }

    /// The parameter tensors, excluding optimizer state.
    pub fn param_store(&self) -> ParamStore {
        let mut store = ParamStore::new();
        for t in self.tensors.iter().filter(|t| !t.name.starts_with(STATE_PREFIX)) {
            store.push(t.name.clone(), t.tensor.clone(), t.trainable);
        }
        store
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::to_vec(&self.header).map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for t in &self.tensors {
            w.write_all(&(t.name.len() as u32).to_le_bytes())?;
            w.write_all(t.name.as_bytes())?;
            w.write_all(&[u8::from(t.trainable)])?;
            w.write_all(&(t.tensor.rank() as u32).to_le_bytes())?;
            for &d in t.tensor.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for v in t.tensor.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let hlen = read_u64(&mut r)? as usize;
        let header_bytes = read_vec(&mut r, hlen)?;
        let header = serde_json::from_slice(&header_bytes).map_err(|e| Error::Format(e.to_string()))?;
        let count = read_u32(&mut r)? as usize;
        let mut tensors = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let nlen = read_u32(&mut r)? as usize;
            let name = String::from_utf8(read_vec(&mut r, nlen)?)
                .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
            let mut flag = [0u8; 1];
            r.read_exact(&mut flag)?;
            let rank = read_u32(&mut r)? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(read_u64(&mut r)? as usize);
            }
            let numel: usize = shape.iter().product();
            let raw = read_vec(&mut r, numel * 8)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            tensors.push(NamedTensor {
                name,
                trainable: flag[0] != 0,
                tensor: Tensor::new(shape, data)?,
            });
        }
        Ok(Self { header, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        self.write_to(BufWriter::new(File::create(&tmp)?))?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn read_vec<R: Read>(r: &mut R, n: usize) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.take(n as u64).read_to_end(&mut buf)?;
    if buf.len() != n {
        return Err(Error::Format("truncated file".into()));
    }
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Mlp, ModelSpec, Network};

    #[test]
    fn roundtrip_preserves_bits() {
        let net = Mlp::new(ModelSpec::mlp(2, 5, 2, 1), 4).unwrap();
        let mut ck = Checkpoint::new(net.describe(), net.params());
        ck.push_state("adam.m", Tensor::row(vec![f64::MIN_POSITIVE, -0.0, 1e300]));
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        let back = Checkpoint::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(&back.param_store(), net.params());
        assert_eq!(back.state("adam.m").unwrap().data()[2], 1e300);
    }

    #[test]
    fn rejects_corruption() {
        let ck = Checkpoint::new(serde_json::json!({}), &ParamStore::new());
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(Checkpoint::read_from(bad.as_slice()).is_err());
        let mut bad = buf.clone();
        bad[8] = 9;
        assert!(Checkpoint::read_from(bad.as_slice()).is_err());
        assert!(Checkpoint::read_from(&buf[..buf.len() - 1]).is_err());
    }
}
