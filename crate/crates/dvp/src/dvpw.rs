//! DVPW weight files.
//!
//! ```text
//! "DVPW"  u32 version  u32 record count
//! record: u16 name len, name (UTF-8), u8 rank, rank × u32 dims, f32 payload
//! u32 CRC32 of everything before it
//! ```
//!
//! All integers and floats are little-endian. Kernels are `(out, in, kh, kw)`
//! and named by their layer path (`root.conv1`, `s1.b2.conv_mid`, `s1.f3`);
//! biases and PReLU slopes are separate records suffixed `.bias` and `.prelu`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use dvp_core::net::ConvLayer;
use dvp_core::NetworkWeights;
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"DVPW";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DvpwError {
    #[error("not a DVPW file (bad magic)")]
    BadMagic,
    #[error("unsupported DVPW version {0}")]
    UnsupportedVersion(u32),
    #[error("file truncated while reading {0}")]
    Truncated(&'static str),
    #[error("CRC mismatch: stored {stored:08x}, computed {computed:08x}")]
    Crc { stored: u32, computed: u32 },
    #[error("{0} trailing bytes after the CRC")]
    TrailingBytes(usize),
    #[error("record name is not UTF-8")]
    BadName,
    #[error("shape mismatch for {name}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("missing tensor {0}")]
    MissingTensor(String),
    #[error("unknown tensor {0}")]
    UnknownTensor(String),
    #[error("duplicate tensor {0}")]
    DuplicateTensor(String),
    #[error("non-finite value in tensor {0}")]
    NonFinite(String),
    #[error("invalid weights: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One named tensor as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], DvpwError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(DvpwError::Truncated(what))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, DvpwError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, DvpwError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, DvpwError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Parse the container: header, records, CRC. No topology checks.
pub fn parse_records(bytes: &[u8]) -> Result<(u32, Vec<Record>), DvpwError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(DvpwError::BadMagic);
    }
    let mut c = Cursor { buf: bytes, pos: 4 };
    let version = c.u32("version")?;
    if version != VERSION {
        return Err(DvpwError::UnsupportedVersion(version));
    }
    let count = c.u32("record count")?;
    let mut records = Vec::new();
    for _ in 0..count {
        let len = c.u16("name length")? as usize;
        let name = std::str::from_utf8(c.take(len, "name")?).map_err(|_| DvpwError::BadName)?.to_string();
        let rank = c.u8("rank")? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(c.u32("dims")? as usize);
        }
        let n: usize = dims.iter().product();
        let raw = c.take(n.checked_mul(4).ok_or(DvpwError::Truncated("payload"))?, "payload")?;
        let data = raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
        records.push(Record { name, dims, data });
    }
    let body_end = c.pos;
    let stored = c.u32("crc")?;
    if c.pos != bytes.len() {
        return Err(DvpwError::TrailingBytes(bytes.len() - c.pos));
    }
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(DvpwError::Crc { stored, computed });
    }
    Ok((version, records))
}

/// Serialise records in the given order.
pub fn encode_records(records: &[Record]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for r in records {
        out.extend_from_slice(&(r.name.len() as u16).to_le_bytes());
        out.extend_from_slice(r.name.as_bytes());
        out.push(r.dims.len() as u8);
        for &d in &r.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &r.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Records of a network in canonical order.
pub fn to_records(w: &NetworkWeights) -> Vec<Record> {
    let mut out = Vec::new();
    w.visit_layers(|name, l| {
        out.push(Record {
            name: name.to_string(),
            dims: l.weight_dims().to_vec(),
            data: l.weight.clone(),
        });
        out.push(Record {
            name: format!("{name}.bias"),
            dims: vec![l.out_channels],
            data: l.bias.clone(),
        });
        if let Some(p) = &l.prelu {
            out.push(Record {
                name: format!("{name}.prelu"),
                dims: vec![l.out_channels],
                data: p.clone(),
            });
        }
    });
    out
}

pub fn encode_weights(w: &NetworkWeights) -> Vec<u8> {
    encode_records(&to_records(w))
}

/// Decode and validate against the canonical topology. Records may come in
/// any order; every canonical tensor must appear exactly once.
pub fn decode_weights(bytes: &[u8]) -> Result<NetworkWeights, DvpwError> {
    let (version, records) = parse_records(bytes)?;
    let mut by_name: BTreeMap<String, Record> = BTreeMap::new();
    for r in records {
        if by_name.contains_key(&r.name) {
            return Err(DvpwError::DuplicateTensor(r.name));
        }
        by_name.insert(r.name.clone(), r);
    }
    let specs = NetworkWeights::tensor_specs();
    for spec in &specs {
        let r = by_name.get(&spec.name).ok_or_else(|| DvpwError::MissingTensor(spec.name.clone()))?;
        if r.dims != spec.dims {
            return Err(DvpwError::ShapeMismatch {
                name: spec.name.clone(),
                expected: spec.dims.clone(),
                found: r.dims.clone(),
            });
        }
        if r.data.iter().any(|v| !v.is_finite()) {
            return Err(DvpwError::NonFinite(spec.name.clone()));
        }
    }
    if let Some(extra) = by_name.keys().find(|k| !specs.iter().any(|s| &s.name == *k)) {
        return Err(DvpwError::UnknownTensor(extra.clone()));
    }
    let mut w = NetworkWeights::zeros();
    w.visit_layers_mut(|name, l: &mut ConvLayer| {
        l.weight.clone_from(&by_name[name].data);
        l.bias.clone_from(&by_name[&format!("{name}.bias")].data);
        if let Some(p) = &mut l.prelu {
            p.clone_from(&by_name[&format!("{name}.prelu")].data);
        }
    });
    w.validate().map_err(DvpwError::Invalid)?;
    let crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    w.meta.version = version;
    w.meta.run_id = format!("{crc:08x}");
    Ok(w)
}

pub fn read_weights<R: Read>(mut r: R) -> Result<NetworkWeights, DvpwError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode_weights(&bytes)
}

pub fn load_weights(path: &Path) -> Result<NetworkWeights, DvpwError> {
    decode_weights(&fs::read(path)?)
}

pub fn write_weights<W: Write>(mut out: W, w: &NetworkWeights) -> Result<(), DvpwError> {
    out.write_all(&encode_weights(w))?;
    out.flush()?;
    Ok(())
}

pub fn save_weights(path: &Path, w: &NetworkWeights) -> Result<(), DvpwError> {
    fs::write(path, encode_weights(w))?;
    Ok(())
}
