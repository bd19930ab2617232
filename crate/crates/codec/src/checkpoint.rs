//! Model checkpoints: the canonical config text plus every named
//! parameter tensor, little-endian doubles. Loading rebuilds the model
//! from the embedded config and overwrites each parameter by name.

use crate::csrvq::CodecModel;
use crate::config::CodecConfig;
use crate::error::CodecError;
use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"ESCKPT01";

pub fn save(model: &CodecModel, path: &Path) -> Result<(), CodecError> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(if model.bypassed() { 0 } else { 1 });
    out.extend_from_slice(&model.seed.to_le_bytes());
    let cfg = model.config.canonical_string();
    out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    out.extend_from_slice(cfg.as_bytes());
    out.extend_from_slice(&(model.registry.params.len() as u32).to_le_bytes());
    for p in &model.registry.params {
        let name = p.name().as_bytes();
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        out.push(p.shape().len() as u8);
        for &d in p.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in p.value().iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.pos + n > self.buf.len() {
            return Err(CodecError::Checkpoint("unexpected end of file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CodecError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn load(path: &Path) -> Result<CodecModel, CodecError> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(CodecError::Checkpoint("not a checkpoint file".into()));
    }
    let active = c.u8()? != 0;
    let seed = u64::from_le_bytes(c.take(8)?.try_into().unwrap());
    let cfg_len = c.u32()? as usize;
    let cfg_text = std::str::from_utf8(c.take(cfg_len)?)
        .map_err(|_| CodecError::Checkpoint("config text is not utf-8".into()))?;
    let config = CodecConfig::from_canonical(cfg_text)?;
    let model = CodecModel::new(config, seed)?;

    let count = c.u32()? as usize;
    let mut seen = HashSet::with_capacity(count);
    for _ in 0..count {
        let name_len = c.u16()? as usize;
        let name = std::str::from_utf8(c.take(name_len)?)
            .map_err(|_| CodecError::Checkpoint("parameter name is not utf-8".into()))?
            .to_string();
        let ndim = c.u8()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(c.u32()? as usize);
        }
        let len: usize = shape.iter().product();
        let raw = c.take(len * 8)?;
        let param = model
            .registry
            .by_name(&name)
            .ok_or_else(|| CodecError::Checkpoint(format!("unknown parameter {name:?}")))?;
        if param.shape() != shape.as_slice() {
            return Err(CodecError::Checkpoint(format!(
                "parameter {name:?} has shape {shape:?}, expected {:?}",
                param.shape()
            )));
        }
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        param.set(data);
        seen.insert(name);
    }
    if seen.len() != model.registry.params.len() {
        let missing: Vec<&str> = model
            .registry
            .params
            .iter()
            .map(|p| p.name())
            .filter(|n| !seen.contains(*n))
            .collect();
        return Err(CodecError::Checkpoint(format!("missing parameters: {missing:?}")));
    }
    if c.pos != buf.len() {
        return Err(CodecError::Checkpoint("trailing bytes".into()));
    }
    model.set_bypass_raw(!active);
    Ok(model)
}
