//! Binary checkpoint (`NMCK`) and tensor dump (`NMTD`) files.
//!
//! Both are little-endian: magic, `u32` version, then entry sections. A
//! section is a `u32` count followed by entries of `u32` key length, UTF-8
//! key, `u32` rank, `u64` dims and raw `f32` data. A checkpoint also stores
//! the graph seed before its sections and the step counter after them.

use std::path::Path;

use super::RuntimeError;
use crate::backend::{ParamStore, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"NMCK";
pub const DUMP_MAGIC: &[u8; 4] = b"NMTD";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub params: ParamStore,
    pub optimizer: ParamStore,
    pub step: u64,
}

fn put_entries<'a>(
    out: &mut Vec<u8>,
    entries: impl ExactSizeIterator<Item = (&'a String, &'a Tensor)>,
) {
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (k, t) in entries {
        out.extend_from_slice(&(k.len() as u32).to_le_bytes());
        out.extend_from_slice(k.as_bytes());
        out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], RuntimeError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| RuntimeError::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, RuntimeError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, RuntimeError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<(), RuntimeError> {
        if self.take(4)? != magic {
            return Err(RuntimeError::Checkpoint(format!(
                "bad magic, expected {}",
                String::from_utf8_lossy(magic)
            )));
        }
        let v = self.u32()?;
        if v != FORMAT_VERSION {
            return Err(RuntimeError::Checkpoint(format!("unsupported version {v}")));
        }
        Ok(())
    }

    fn entries(&mut self) -> Result<Vec<(String, Tensor)>, RuntimeError> {
        let count = self.u32()?;
        let mut out = Vec::new();
        for _ in 0..count {
            let klen = self.u32()? as usize;
            let key = std::str::from_utf8(self.take(klen)?)
                .map_err(|_| RuntimeError::Checkpoint("key is not UTF-8".into()))?
                .to_string();
            let rank = self.u32()? as usize;
            let shape = (0..rank)
                .map(|_| self.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>, _>>()?;
            let n = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| RuntimeError::Checkpoint(format!("entry `{key}` is too large")))?;
            let bytes = self.take(
                n.checked_mul(4)
                    .ok_or_else(|| RuntimeError::Checkpoint("overflow".into()))?,
            )?;
            let data = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let t =
                Tensor::new(shape, data).map_err(|e| RuntimeError::Checkpoint(e.to_string()))?;
            out.push((key, t));
        }
        Ok(out)
    }

    fn finish(&self) -> Result<(), RuntimeError> {
        if self.pos != self.buf.len() {
            return Err(RuntimeError::Checkpoint(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), RuntimeError> {
    std::fs::write(path, bytes).map_err(|e| RuntimeError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>, RuntimeError> {
    std::fs::read(path).map_err(|e| RuntimeError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        put_entries(&mut out, self.params.iter());
        put_entries(&mut out, self.optimizer.iter());
        out.extend_from_slice(&self.step.to_le_bytes());
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, RuntimeError> {
        let mut r = Reader { buf, pos: 0 };
        r.header(CHECKPOINT_MAGIC)?;
        let seed = r.u64()?;
        let params = r.entries()?.into_iter().collect();
        let optimizer = r.entries()?.into_iter().collect();
        let step = r.u64()?;
        r.finish()?;
        Ok(Checkpoint {
            seed,
            params,
            optimizer,
            step,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), RuntimeError> {
        write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, RuntimeError> {
        Self::from_bytes(&read_file(path)?)
    }
}

/// Ordered tensors written by `infer`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorDump {
    pub entries: Vec<(String, Tensor)>,
}

impl TensorDump {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(DUMP_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        put_entries(&mut out, self.entries.iter().map(|(k, t)| (k, t)));
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, RuntimeError> {
        let mut r = Reader { buf, pos: 0 };
        r.header(DUMP_MAGIC)?;
        let entries = r.entries()?;
        r.finish()?;
        Ok(TensorDump { entries })
    }

    pub fn save(&self, path: &Path) -> Result<(), RuntimeError> {
        write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, RuntimeError> {
        Self::from_bytes(&read_file(path)?)
    }
}
