//! Binary weight container.
//!
//! Layout: magic `CXAE`, version, storage dtype code, buffer count,
//! then per-buffer records (name length, name, rank, dims, raw
//! little-endian data), then a JSON manifest trailer carrying the
//! architecture so a model can be rebuilt from the file alone.
//!
//! Checkpoints may append extra buffers (optimizer moments, named
//! `adam.*`); loading a model ignores them.

use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::{build, ArchitectureSpec, Autoencoder};

const MAGIC: &[u8; 4] = b"CXAE";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F64,
    F32,
}

impl Precision {
    fn code(self) -> u8 {
        match self {
            Precision::F64 => 0,
            Precision::F32 => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Precision::F64),
            1 => Ok(Precision::F32),
            other => Err(Error::Format(format!("unknown dtype code {other}"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    dtype: Precision,
    architecture: ArchitectureSpec,
    buffers: Vec<BufferMeta>,
}

#[derive(Serialize, Deserialize)]
struct BufferMeta {
    name: String,
    dims: Vec<usize>,
}

/// A parsed container: architecture plus every stored buffer.
pub struct Container {
    pub architecture: ArchitectureSpec,
    pub precision: Precision,
    pub buffers: Vec<(String, Vec<usize>, Vec<f64>)>,
}

fn encode(
    arch: &ArchitectureSpec,
    buffers: &[(String, Vec<usize>, &[f64])],
    precision: Precision,
) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(precision.code());
    out.extend_from_slice(&(buffers.len() as u32).to_le_bytes());
    for (name, dims, data) in buffers {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(dims.len() as u8);
        for d in dims {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        match precision {
            Precision::F64 => {
                for v in *data {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            Precision::F32 => {
                for v in *data {
                    out.extend_from_slice(&(*v as f32).to_le_bytes());
                }
            }
        }
    }
    let manifest = Manifest {
        format: "CXAE".into(),
        version: VERSION,
        dtype: precision,
        architecture: arch.clone(),
        buffers: buffers
            .iter()
            .map(|(name, dims, _)| BufferMeta { name: name.clone(), dims: dims.clone() })
            .collect(),
    };
    let manifest_json = serde_json::to_vec(&manifest).expect("manifest serialization");
    out.extend_from_slice(&(manifest_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&manifest_json);
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn need(&self, n: usize) -> Result<()> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format(format!(
                "truncated container: need {n} more bytes at offset {}, {} available",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        self.need(n)?;
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn decode(bytes: &[u8]) -> Result<Container> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(Error::Format("bad magic, not a CXAE weight container".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported container version {version}, expected {VERSION}"
        )));
    }
    let precision = Precision::from_code(cur.u8()?)?;
    let count = cur.u32()? as usize;
    let mut buffers = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = cur.u16()? as usize;
        let name = std::str::from_utf8(cur.take(name_len)?)
            .map_err(|_| Error::Format("buffer name is not UTF-8".into()))?
            .to_string();
        let rank = cur.u8()? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(cur.u32()? as usize);
        }
        let len: usize = dims.iter().product();
        let data = match precision {
            Precision::F64 => cur
                .take(len * 8)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
            Precision::F32 => cur
                .take(len * 4)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
        };
        buffers.push((name, dims, data));
    }
    let manifest_len = cur.u32()? as usize;
    let manifest: Manifest = serde_json::from_slice(cur.take(manifest_len)?)
        .map_err(|e| Error::Format(format!("bad manifest JSON: {e}")))?;
    Ok(Container { architecture: manifest.architecture, precision, buffers })
}

fn model_buffers(model: &Autoencoder) -> Vec<(String, Vec<usize>, &[f64])> {
    model
        .named_buffers()
        .into_iter()
        .map(|(name, buf, _)| {
            let (n, c, h, w) = buf.shape();
            // hold data via the same borrow
            (name, vec![n, c, h, w], buf.data())
        })
        .collect()
}

/// Saves the model's buffers at full precision.
pub fn save_weights(model: &Autoencoder, path: &Path) -> Result<()> {
    let buffers = model_buffers(model);
    let bytes = encode(model.spec(), &buffers, Precision::F64);
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

/// Saves the model plus any extra named buffers (optimizer moments) at
/// the chosen precision.
pub fn save_checkpoint(
    model: &Autoencoder,
    extras: &[(String, Vec<usize>, &[f64])],
    precision: Precision,
    path: &Path,
) -> Result<()> {
    let mut buffers = model_buffers(model);
    buffers.extend(extras.iter().map(|(n, d, s)| (n.clone(), d.clone(), *s)));
    let bytes = encode(model.spec(), &buffers, precision);
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

/// Reads the raw container without building a model.
pub fn read_container(path: &Path) -> Result<Container> {
    let bytes = fs::read(path)?;
    decode(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Rebuilds a model from a container: every model buffer must be
/// present with matching dims; extra buffers (e.g. `adam.*`) are
/// ignored.
pub fn load_weights(path: &Path) -> Result<Autoencoder> {
    let container = read_container(path)?;
    let mut model = build(&container.architecture, 0)?;
    let mut lookup: std::collections::HashMap<&str, (&Vec<usize>, &Vec<f64>)> =
        std::collections::HashMap::new();
    for (name, dims, data) in &container.buffers {
        lookup.insert(name.as_str(), (dims, data));
    }
    let mut missing = Vec::new();
    let mut shape_err = None;
    model.visit_buffers_mut(|name, buf, _| {
        match lookup.get(name) {
            None => missing.push(name.to_string()),
            Some((dims, data)) => {
                let (n, c, h, w) = buf.shape();
                if dims.as_slice() != [n, c, h, w] {
                    shape_err.get_or_insert(format!(
                        "buffer {name} has dims {dims:?}, model expects [{n}, {c}, {h}, {w}]"
                    ));
                } else {
                    buf.data_mut().copy_from_slice(data);
                }
            }
        }
    });
    if let Some(msg) = shape_err {
        return Err(Error::Format(format!("{}: {msg}", path.display())));
    }
    if !missing.is_empty() {
        return Err(Error::Format(format!(
            "{}: container is missing buffers: {}",
            path.display(),
            missing.join(", ")
        )));
    }
    Ok(model)
}
