//! Binary model container.
//!
//! ```text
//! magic      8 bytes  "UDPMODEL"
//! version    u32
//! config     u32 length + UTF-8 canonical JSON
//! vocabs     u32 count, then per vocabulary: name, u32 item count, items
//! params     u32 count, then per array: name, u32 rank, u64 dims,
//!            f32 values in row-major order
//! ```
//!
//! Integers and floats are little-endian; strings are a u32 byte length
//! followed by UTF-8 bytes.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::config::ModelConfig;
use super::params::Params;
use super::vocab::{Vocab, Vocabularies};
use super::{ModelError, ParserModel};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"UDPMODEL";
pub const FORMAT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

/// Encodes a model; values are stored as `f32`.
pub fn to_bytes<T: Scalar>(model: &ParserModel<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_str(&mut out, &model.config.to_canonical());

    let vocabs = model.vocabs.named();
    put_u32(&mut out, vocabs.len() as u32);
    for (name, vocab) in vocabs {
        put_str(&mut out, name);
        put_u32(&mut out, vocab.len() as u32);
        for item in vocab.items() {
            put_str(&mut out, item);
        }
    }

    let shapes = model.params.shapes();
    put_u32(&mut out, shapes.len() as u32);
    model.params.for_each(|name, _, a| {
        put_str(&mut out, name);
        put_u32(&mut out, 2);
        out.extend_from_slice(&(a.nrows() as u64).to_le_bytes());
        out.extend_from_slice(&(a.ncols() as u64).to_le_bytes());
        for v in a.iter() {
            out.extend_from_slice(&v.to_f32_lossy().to_le_bytes());
        }
    });
    out
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| ModelError::Format("truncated file".into()))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String, ModelError> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| ModelError::Format("invalid UTF-8".into()))
    }
}

/// Decodes a model into precision `T`.
pub fn from_bytes<T: Scalar>(data: &[u8]) -> Result<ParserModel<T>, ModelError> {
    let mut cur = Cursor { data, pos: 0 };
    if cur.take(MAGIC.len())? != MAGIC {
        return Err(ModelError::Format("not a model file".into()));
    }
    let version = cur.u32()?;
    if version != FORMAT_VERSION {
        return Err(ModelError::Format(format!("unsupported version {}", version)));
    }
    let config = ModelConfig::from_canonical(&cur.string()?)?;
    config.validate()?;

    let mut vocabs = Vocabularies::default();
    let count = cur.u32()?;
    for _ in 0..count {
        let name = cur.string()?;
        let len = cur.u32()? as usize;
        let items = (0..len).map(|_| cur.string()).collect::<Result<Vec<_>, _>>()?;
        let vocab = Vocab::from_items(items);
        match name.as_str() {
            "forms" => vocabs.forms = vocab,
            "upos_input" => vocabs.upos_input = vocab,
            "labels" => vocabs.labels = vocab,
            "upos" => vocabs.upos = vocab,
            "feats" => vocabs.feats = vocab,
            other => return Err(ModelError::Format(format!("unknown vocabulary `{}`", other))),
        }
    }

    let mut params = Params::<T>::zeros(&config, &vocabs);
    let expected = params.shapes();
    let count = cur.u32()? as usize;
    if count != expected.len() {
        return Err(ModelError::Format(format!(
            "expected {} parameter arrays, found {}",
            expected.len(),
            count
        )));
    }
    let mut arrays = Vec::with_capacity(count);
    for (name, shape) in &expected {
        let found = cur.string()?;
        if &found != name {
            return Err(ModelError::Format(format!(
                "expected parameter `{}`, found `{}`",
                name, found
            )));
        }
        if cur.u32()? != 2 {
            return Err(ModelError::Format(format!("parameter `{}` is not 2-D", name)));
        }
        let dims = (cur.u64()? as usize, cur.u64()? as usize);
        if dims != *shape {
            return Err(ModelError::Format(format!(
                "parameter `{}` has shape {:?}, expected {:?}",
                name, dims, shape
            )));
        }
        let raw = cur.take(dims.0 * dims.1 * 4)?;
        let values: Vec<T> = raw
            .chunks_exact(4)
            .map(|b| T::from_f32_exact(f32::from_le_bytes(b.try_into().expect("4 bytes"))))
            .collect();
        arrays.push(Array2::from_shape_vec(dims, values).expect("length checked"));
    }
    if cur.pos != data.len() {
        return Err(ModelError::Format("trailing bytes".into()));
    }
    let mut it = arrays.into_iter();
    params.for_each_mut(|_, _, a| *a = it.next().expect("count checked"));

    Ok(ParserModel { config, vocabs, params })
}

pub fn save<T: Scalar>(model: &ParserModel<T>, path: &Path) -> Result<(), ModelError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&to_bytes(model))?;
    Ok(())
}

pub fn load<T: Scalar>(path: &Path) -> Result<ParserModel<T>, ModelError> {
    let mut data = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut data)?;
    from_bytes(&data)
}
