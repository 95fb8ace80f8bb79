//! Versioned binary checkpoint of every parameter tensor, its Adam state, and
//! the random-stream cursor.
//!
//! Layout (little-endian):
//! `magic[8] version:u32 shape_len:u32 shape_json rng_seed:u64 rng_stream:u64
//! rng_counter:u64 count:u32` then per tensor
//! `name_len:u32 name rows:u64 cols:u64 step:u64 value[] adam_m[] adam_v[]`.

use std::fs;
use std::path::Path;

use super::state::{ModelShape, ModelState};
use crate::error::{Error, Result};
use crate::numcore::{Matrix, RngCursor, RngStream};

const MAGIC: &[u8; 8] = b"E2LMVSC\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(state: &ModelState, cursor: RngCursor) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let shape = serde_json::to_vec(&state.shape)?;
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    out.extend_from_slice(&shape);
    for word in [cursor.seed, cursor.stream_id, cursor.counter] {
        out.extend_from_slice(&word.to_le_bytes());
    }
    out.extend_from_slice(&(state.params.len() as u32).to_le_bytes());
    for p in &state.params {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        let (r, c) = p.shape();
        for word in [r as u64, c as u64, p.step_count] {
            out.extend_from_slice(&word.to_le_bytes());
        }
        for m in [&p.value, &p.adam_m, &p.adam_v] {
            for v in m.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn save_checkpoint(state: &ModelState, cursor: RngCursor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(state, cursor)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("unexpected end of data".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        let raw = self.take(rows * cols * 8)?;
        let data = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        Matrix::from_vec(rows, cols, data)
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ModelState, RngCursor)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let shape_len = r.u32()? as usize;
    let shape: ModelShape = serde_json::from_slice(r.take(shape_len)?)?;
    let cursor = RngCursor {
        seed: r.u64()?,
        stream_id: r.u64()?,
        counter: r.u64()?,
    };
    // Structure only; every value is overwritten below.
    let mut state = ModelState::new(shape, &mut RngStream::new(0, 0))?;
    let count = r.u32()? as usize;
    if count != state.params.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors, found {count}",
            state.params.len()
        )));
    }
    for p in &mut state.params {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not utf-8".into()))?;
        if name != p.name {
            return Err(Error::Checkpoint(format!("expected tensor `{}`, found `{name}`", p.name)));
        }
        let (rows, cols) = (r.u64()? as usize, r.u64()? as usize);
        if (rows, cols) != p.shape() {
            return Err(Error::Checkpoint(format!(
                "tensor `{name}` has shape {rows}x{cols}, expected {:?}",
                p.shape()
            )));
        }
        p.step_count = r.u64()?;
        p.value = r.matrix(rows, cols)?;
        p.adam_m = r.matrix(rows, cols)?;
        p.adam_v = r.matrix(rows, cols)?;
        p.zero_grad();
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok((state, cursor))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ModelState, RngCursor)> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
