//! Binary model file. All integers and floats are little-endian.
//!
//! ```text
//! magic        8 bytes  "CPSLMDL\0"
//! version      u32
//! n_nets       u32
//! per net:
//!   n_sizes    u32
//!   sizes      n_sizes x u32
//!   n_params   u64
//!   params     n_params x f64   (per layer: weights row-major out x in, then biases)
//! input_norm   u32 len, len x f64 mean, len x f64 std
//! output_norm  u32 len, len x f64 mean, len x f64 std
//! metadata     u32 len, len bytes of UTF-8 JSON
//! ```
//!
//! The reader requires every byte to be consumed.

use std::fs;
use std::path::Path;

use super::mlp::Mlp;
use super::{ModelMetadata, PredictionModel};
use crate::error::{Error, Result};
use crate::features::NormStats;

pub const MODEL_MAGIC: [u8; 8] = *b"CPSLMDL\0";
pub const MODEL_FORMAT_VERSION: u32 = 1;

// Guards against absurd allocations from corrupt headers.
const MAX_LEN: u64 = 1 << 28;

pub fn model_to_bytes(model: &PredictionModel) -> Result<Vec<u8>> {
    model.validate()?;
    let mut out = Vec::new();
    out.extend_from_slice(&MODEL_MAGIC);
    out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.nets.len() as u32).to_le_bytes());
    for net in &model.nets {
        out.extend_from_slice(&(net.sizes().len() as u32).to_le_bytes());
        for s in net.sizes() {
            out.extend_from_slice(&(*s as u32).to_le_bytes());
        }
        out.extend_from_slice(&(net.params().len() as u64).to_le_bytes());
        for p in net.params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }
    for norm in [&model.input_norm, &model.output_norm] {
        out.extend_from_slice(&(norm.len() as u32).to_le_bytes());
        for v in norm.mean.iter().chain(&norm.std) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let meta = serde_json::to_vec(&model.metadata).map_err(|e| Error::Model(e.to_string()))?;
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta);
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, section: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Parse {
                line: 0,
                field: section.to_string(),
                message: format!("file truncated at byte {} (needed {n} more bytes)", self.bytes.len()),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, section: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, section)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, section: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, section)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self, n: u64, section: &str) -> Result<usize> {
        if n > MAX_LEN {
            return Err(Error::Parse { line: 0, field: section.to_string(), message: format!("implausible length {n}") });
        }
        Ok(n as usize)
    }

    fn f64s(&mut self, n: usize, section: &str) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Model("length overflow".into()))?, section)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<PredictionModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "magic")? != MODEL_MAGIC {
        return Err(Error::Model("not a model file (bad magic bytes)".into()));
    }
    let version = r.u32("version")?;
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::VersionMismatch { found: version, expected: MODEL_FORMAT_VERSION });
    }
    let n_nets = r.u32("n_nets")?;
    let n_nets = r.len(n_nets.into(), "n_nets")?;
    let mut nets = Vec::with_capacity(n_nets.min(8));
    for i in 0..n_nets {
        let section = format!("net[{i}]");
        let n_sizes = r.u32(&section)?;
        let n_sizes = r.len(n_sizes.into(), &section)?;
        let mut sizes = Vec::with_capacity(n_sizes.min(16));
        for _ in 0..n_sizes {
            sizes.push(r.u32(&section)? as usize);
        }
        let n_params = r.u64(&section)?;
        let n_params = r.len(n_params, &section)?;
        let params = r.f64s(n_params, &section)?;
        nets.push(Mlp::from_params(&sizes, params).map_err(|e| Error::Model(format!("{section}: {e}")))?);
    }
    let mut norms = Vec::with_capacity(2);
    for section in ["input_norm", "output_norm"] {
        let len = r.u32(section)?;
        let len = r.len(len.into(), section)?;
        let mean = r.f64s(len, section)?;
        let std = r.f64s(len, section)?;
        norms.push(NormStats { mean, std });
    }
    let meta_len = r.u32("metadata")?;
    let meta_len = r.len(meta_len.into(), "metadata")?;
    let meta = r.take(meta_len, "metadata")?;
    let metadata: ModelMetadata = serde_json::from_slice(meta)
        .map_err(|e| Error::Parse { line: e.line(), field: "metadata".into(), message: e.to_string() })?;
    if r.pos != bytes.len() {
        return Err(Error::Parse {
            line: 0,
            field: "trailer".into(),
            message: format!("{} unexpected bytes after metadata", bytes.len() - r.pos),
        });
    }
    let output_norm = norms.pop().expect("two norms");
    let input_norm = norms.pop().expect("two norms");
    let model = PredictionModel { nets, input_norm, output_norm, metadata };
    model.validate()?;
    Ok(model)
}

/// Writes through a temporary file and a rename so readers never see a partial model.
pub fn save_model(model: &PredictionModel, path: &Path) -> Result<()> {
    let bytes = model_to_bytes(model)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<PredictionModel> {
    model_from_bytes(&fs::read(path)?)
}
