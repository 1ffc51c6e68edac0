//! NPY v1.0 reader/writer.
//!
//! Reads little-endian `<f4` / `<f8` C-order arrays; writes `<f8`
//! C-order version 1.0 files. Loads always land in 64-bit storage, so
//! save-then-load of `<f8` is bit-exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";

/// A parsed NPY array: shape plus 64-bit float storage.
#[derive(Clone, Debug, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NpyArray {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn load_npy(path: &Path) -> Result<NpyArray> {
    let bytes = fs::read(path)?;
    parse_npy(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub(crate) fn parse_npy(bytes: &[u8]) -> Result<NpyArray> {
    if bytes.len() < 10 {
        return Err(Error::Format(format!(
            "file too short for an NPY header ({} bytes, need at least 10)",
            bytes.len()
        )));
    }
    if &bytes[..6] != MAGIC {
        return Err(Error::Format("bad magic, not an NPY file".into()));
    }
    let (major, minor) = (bytes[6], bytes[7]);
    if (major, minor) != (1, 0) {
        return Err(Error::Format(format!(
            "unsupported NPY version {major}.{minor}, only 1.0 is accepted"
        )));
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    if bytes.len() < 10 + header_len {
        return Err(Error::Format(format!(
            "truncated header: declared {header_len} bytes, {} available",
            bytes.len() - 10
        )));
    }
    let header = std::str::from_utf8(&bytes[10..10 + header_len])
        .map_err(|_| Error::Format("header is not valid UTF-8".into()))?;

    let descr = dict_value(header, "descr")?;
    let itemsize = match descr.trim_matches(&['\'', '"'][..]) {
        "<f8" => 8,
        "<f4" => 4,
        other => {
            return Err(Error::Format(format!(
                "unsupported dtype {other:?}, only <f4 and <f8 are accepted"
            )))
        }
    };
    let fortran = dict_value(header, "fortran_order")?;
    match fortran.as_str() {
        "False" => {}
        "True" => {
            return Err(Error::Format(
                "Fortran-order arrays are not supported, save in C order".into(),
            ))
        }
        other => return Err(Error::Format(format!("bad fortran_order value {other:?}"))),
    }
    let shape_str = dict_value(header, "shape")?;
    let shape = parse_shape(&shape_str)?;

    let count: usize = shape.iter().product();
    let payload = &bytes[10 + header_len..];
    let need = count * itemsize;
    if payload.len() < need {
        return Err(Error::Format(format!(
            "truncated data: need {need} bytes for shape {shape:?}, {} present ({} missing)",
            payload.len(),
            need - payload.len()
        )));
    }
    let mut data = Vec::with_capacity(count);
    match itemsize {
        8 => {
            for chunk in payload[..need].chunks_exact(8) {
                data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
            }
        }
        _ => {
            for chunk in payload[..need].chunks_exact(4) {
                data.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
            }
        }
    }
    Ok(NpyArray { shape, data })
}

/// Extracts the raw value string for `key` from the Python dict literal.
fn dict_value(header: &str, key: &str) -> Result<String> {
    let pattern = format!("'{key}':");
    let start = header
        .find(&pattern)
        .ok_or_else(|| Error::Format(format!("header is missing key {key:?}")))?
        + pattern.len();
    let rest = header[start..].trim_start();
    let end = if rest.starts_with('(') {
        rest.find(')')
            .ok_or_else(|| Error::Format("unterminated shape tuple".into()))?
            + 1
    } else {
        rest.find([',', '}'])
            .ok_or_else(|| Error::Format(format!("unterminated value for {key:?}")))?
    };
    Ok(rest[..end].trim().to_string())
}

fn parse_shape(s: &str) -> Result<Vec<usize>> {
    let inner = s
        .trim()
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| Error::Format(format!("bad shape tuple {s:?}")))?;
    let mut shape = Vec::new();
    for part in inner.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        shape.push(
            part.parse::<usize>()
                .map_err(|_| Error::Format(format!("bad shape entry {part:?}")))?,
        );
    }
    Ok(shape)
}

pub fn save_npy(path: &Path, shape: &[usize], data: &[f64]) -> Result<()> {
    let count: usize = shape.iter().product();
    if count != data.len() {
        return Err(Error::Shape(format!(
            "shape {shape:?} expects {count} values, got {}",
            data.len()
        )));
    }
    let bytes = encode_npy(shape, data);
    let mut file = fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

pub(crate) fn encode_npy(shape: &[usize], data: &[f64]) -> Vec<u8> {
    let shape_str = match shape.len() {
        1 => format!("({},)", shape[0]),
        _ => format!(
            "({})",
            shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
        ),
    };
    let mut header = format!(
        "{{'descr': '<f8', 'fortran_order': False, 'shape': {shape_str}, }}"
    );
    // pad with spaces so the data block starts 64-byte aligned
    let unpadded = 10 + header.len() + 1;
    let padding = (64 - unpadded % 64) % 64;
    header.push_str(&" ".repeat(padding));
    header.push('\n');

    let mut out = Vec::with_capacity(10 + header.len() + data.len() * 8);
    out.extend_from_slice(MAGIC);
    out.push(1);
    out.push(0);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}
