//! Binary checkpoint container. Layout (little-endian):
//! magic `LOLWSCKP`, u32 format version, u32 layer count, u64 per layer size,
//! f64 dropout rate, u64 rng seed, u64 epoch, u64 parameter count, f64 params.

use std::io::{Read, Write};
use std::path::Path;

use super::MlpModel;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"LOLWSCKP";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: MlpModel,
    pub rng_seed: u64,
    pub epoch: usize,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Schema(format!("checkpoint: {}", msg.into()))
}

pub fn write_checkpoint<W: Write>(w: &mut W, ckpt: &Checkpoint) -> std::io::Result<()> {
    let m = &ckpt.model;
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(m.layer_sizes().len() as u32).to_le_bytes())?;
    for s in m.layer_sizes() {
        w.write_all(&(*s as u64).to_le_bytes())?;
    }
    w.write_all(&m.dropout_rate().to_le_bytes())?;
    w.write_all(&ckpt.rng_seed.to_le_bytes())?;
    w.write_all(&(ckpt.epoch as u64).to_le_bytes())?;
    w.write_all(&(m.num_params() as u64).to_le_bytes())?;
    for p in m.params() {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

struct Cursor<'a>(&'a [u8]);

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        if self.0.len() < N {
            return Err(bad("truncated"));
        }
        let (head, rest) = self.0.split_at(N);
        self.0 = rest;
        Ok(head.try_into().unwrap())
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut c = Cursor(bytes);
    if &c.take::<8>()? != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = c.u32()?;
    if version != CHECKPOINT_FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {version}")));
    }
    let layers = c.u32()? as usize;
    if layers > 64 {
        return Err(bad("implausible layer count"));
    }
    let sizes = (0..layers)
        .map(|_| c.u64().map(|s| s as usize))
        .collect::<Result<Vec<_>>>()?;
    let dropout = c.f64()?;
    let rng_seed = c.u64()?;
    let epoch = c.u64()? as usize;
    let count = c.u64()? as usize;
    if c.0.len() != count.saturating_mul(8) {
        return Err(bad("parameter block length mismatch"));
    }
    let params = (0..count).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
    Ok(Checkpoint {
        model: MlpModel::from_params(sizes, dropout, params)?,
        rng_seed,
        epoch,
    })
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, ckpt).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    read_checkpoint(&buf)
}
