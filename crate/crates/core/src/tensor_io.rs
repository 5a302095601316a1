//! Little-endian binary containers for volumes, attention stacks and
//! contextual token vectors.
//!
//! ```text
//! MPRV: "MPRV" u8 version=1, u8 dtype=1 (f32), u16 reserved=0,
//!       u32 D, u32 H, u32 W, then D*H*W f32 (slice-major, row-major)
//! MPRA: "MPRA" u8 version=1, 3 reserved bytes=0, u32 num_slices, then per
//!       slice: u32 heads, u32 tokens, u32 head_dim, Q payload, K payload
//!       (heads*tokens*head_dim f32 each, head-major, row-major)
//! MPRC: "MPRC" u8 version=1, u8 dtype=1, u16 reserved=0, u32 count,
//!       u32 dim, then count*dim f32
//! ```
//!
//! Readers check every declared size against the bytes actually present
//! before allocating.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::saliency::HeadStack;
use crate::types::Volume;

pub const VOLUME_MAGIC: [u8; 4] = *b"MPRV";
pub const ATTENTION_MAGIC: [u8; 4] = *b"MPRA";
pub const CONTEXTUAL_MAGIC: [u8; 4] = *b"MPRC";
pub const FORMAT_VERSION: u8 = 1;
pub const DTYPE_F32: u8 = 1;

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(FormatError::Truncated {
                expected: (self.pos + n) as u64,
                actual: self.bytes.len() as u64,
            }
            .into());
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let found: [u8; 4] = self.take(4)?.try_into().unwrap();
        if found != expected {
            return Err(FormatError::BadMagic { expected, found }.into());
        }
        Ok(())
    }

    /// Reads `count` f32 values after confirming they are all present.
    fn f32s(&mut self, count: usize, what: &str) -> Result<Vec<f32>> {
        let bytes = count
            .checked_mul(4)
            .ok_or(FormatError::BadDimension("payload"))?;
        let raw = self.take(bytes)?;
        let values: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite {what} value at index {i}")));
        }
        Ok(values)
    }

    fn finish(&self) -> Result<()> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(FormatError::TrailingBytes(n as u64).into()),
        }
    }
}

/// Reads version, dtype and the zero reserved half-word shared by MPRV and MPRC.
fn f32_header(r: &mut ByteReader<'_>) -> Result<()> {
    let version = r.u8()?;
    if version != FORMAT_VERSION {
        return Err(FormatError::UnsupportedVersion(version).into());
    }
    let dtype = r.u8()?;
    if dtype != DTYPE_F32 {
        return Err(FormatError::UnsupportedDtype(dtype).into());
    }
    if r.take(2)? != [0, 0] {
        return Err(FormatError::ReservedNonZero.into());
    }
    Ok(())
}

fn positive_dim(v: u32, name: &'static str) -> Result<usize> {
    if v == 0 {
        return Err(FormatError::BadDimension(name).into());
    }
    Ok(v as usize)
}

fn checked_product(dims: &[usize], name: &'static str) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| FormatError::BadDimension(name).into())
}

fn write_f32s(w: &mut impl Write, values: impl IntoIterator<Item = f32>) -> std::io::Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn to_u32(v: usize, name: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Invalid(format!("{name} {v} does not fit in u32")))
}

pub fn volume_from_bytes(bytes: &[u8]) -> Result<Volume> {
    let mut r = ByteReader::new(bytes);
    r.magic(VOLUME_MAGIC)?;
    f32_header(&mut r)?;
    let d = positive_dim(r.u32()?, "depth")?;
    let h = positive_dim(r.u32()?, "height")?;
    let w = positive_dim(r.u32()?, "width")?;
    let n = checked_product(&[d, h, w], "volume")?;
    let data = r.f32s(n, "voxel")?;
    r.finish()?;
    Volume::new(d, h, w, data)
}

pub fn volume_to_bytes(vol: &Volume) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(20 + vol.data().len() * 4);
    out.extend_from_slice(&VOLUME_MAGIC);
    out.extend_from_slice(&[FORMAT_VERSION, DTYPE_F32, 0, 0]);
    for (v, name) in [
        (vol.depth(), "depth"),
        (vol.height(), "height"),
        (vol.width(), "width"),
    ] {
        out.extend_from_slice(&to_u32(v, name)?.to_le_bytes());
    }
    write_f32s(&mut out, vol.data().iter().copied())?;
    Ok(out)
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume> {
    volume_from_bytes(&fs::read(path)?)
}

pub fn write_volume(vol: &Volume, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, volume_to_bytes(vol)?)?;
    Ok(())
}

pub fn attention_from_bytes(bytes: &[u8]) -> Result<Vec<HeadStack>> {
    let mut r = ByteReader::new(bytes);
    r.magic(ATTENTION_MAGIC)?;
    let version = r.u8()?;
    if version != FORMAT_VERSION {
        return Err(FormatError::UnsupportedVersion(version).into());
    }
    if r.take(3)? != [0, 0, 0] {
        return Err(FormatError::ReservedNonZero.into());
    }
    let num_slices = r.u32()? as usize;
    // Each block needs at least its 12-byte header.
    if num_slices.saturating_mul(12) > r.remaining() {
        return Err(FormatError::Truncated {
            expected: (r.pos as u64).saturating_add(num_slices as u64 * 12),
            actual: bytes.len() as u64,
        }
        .into());
    }
    let mut stacks = Vec::with_capacity(num_slices);
    let mut tokens_seen = None;
    for block in 0..num_slices {
        let heads = positive_dim(r.u32()?, "heads")?;
        let tokens = positive_dim(r.u32()?, "tokens")?;
        let head_dim = positive_dim(r.u32()?, "head_dim")?;
        match tokens_seen {
            None => tokens_seen = Some(tokens),
            Some(expected) if expected != tokens => {
                return Err(FormatError::InconsistentTokens {
                    block,
                    expected,
                    found: tokens,
                }
                .into())
            }
            Some(_) => {}
        }
        let per_head = checked_product(&[tokens, head_dim], "head matrix")?;
        let block_len = checked_product(&[per_head, heads, 8], "attention block")?;
        if block_len > r.remaining() {
            return Err(FormatError::Truncated {
                expected: (r.pos + block_len) as u64,
                actual: bytes.len() as u64,
            }
            .into());
        }
        let q = r.f32s(per_head * heads, "query")?;
        let k = r.f32s(per_head * heads, "key")?;
        let split = |m: Vec<f32>| m.chunks_exact(per_head).map(<[f32]>::to_vec).collect();
        stacks.push(HeadStack::new(tokens, head_dim, split(q), split(k))?);
    }
    r.finish()?;
    Ok(stacks)
}

pub fn attention_to_bytes(stacks: &[HeadStack]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(&ATTENTION_MAGIC);
    out.extend_from_slice(&[FORMAT_VERSION, 0, 0, 0]);
    out.extend_from_slice(&to_u32(stacks.len(), "slice count")?.to_le_bytes());
    for s in stacks {
        for (v, name) in [
            (s.num_heads(), "heads"),
            (s.tokens(), "tokens"),
            (s.head_dim(), "head_dim"),
        ] {
            out.extend_from_slice(&to_u32(v, name)?.to_le_bytes());
        }
        for h in 0..s.num_heads() {
            write_f32s(&mut out, s.query(h).iter().copied())?;
        }
        for h in 0..s.num_heads() {
            write_f32s(&mut out, s.key(h).iter().copied())?;
        }
    }
    Ok(out)
}

pub fn read_attention(path: impl AsRef<Path>) -> Result<Vec<HeadStack>> {
    attention_from_bytes(&fs::read(path)?)
}

pub fn write_attention(stacks: &[HeadStack], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, attention_to_bytes(stacks)?)?;
    Ok(())
}

/// Writes equal-length vectors as f32. An empty list writes `dim` 0.
pub fn write_contextual(tokens: &[Vec<f64>], path: impl AsRef<Path>) -> Result<()> {
    let dim = tokens.first().map_or(0, Vec::len);
    if tokens.iter().any(|t| t.len() != dim) {
        return Err(Error::Invalid("contextual tokens differ in length".into()));
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&CONTEXTUAL_MAGIC)?;
    w.write_all(&[FORMAT_VERSION, DTYPE_F32, 0, 0])?;
    w.write_all(&to_u32(tokens.len(), "count")?.to_le_bytes())?;
    w.write_all(&to_u32(dim, "dim")?.to_le_bytes())?;
    for t in tokens {
        write_f32s(&mut w, t.iter().map(|&v| v as f32))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_contextual(path: impl AsRef<Path>) -> Result<Vec<Vec<f32>>> {
    let bytes = fs::read(path)?;
    let mut r = ByteReader::new(&bytes);
    r.magic(CONTEXTUAL_MAGIC)?;
    f32_header(&mut r)?;
    let count = r.u32()? as usize;
    let dim = r.u32()? as usize;
    if count > 0 && dim == 0 {
        return Err(FormatError::BadDimension("dim").into());
    }
    let n = checked_product(&[count, dim], "contextual")?;
    let flat = r.f32s(n, "contextual")?;
    r.finish()?;
    Ok(if dim == 0 {
        Vec::new()
    } else {
        flat.chunks_exact(dim).map(<[f32]>::to_vec).collect()
    })
}
