//! Minimal NPY reader/writer for 2-D C-order float arrays.

use std::fs;
use std::path::Path;

use super::EmbeddingSet;
use crate::error::{Error, Result};

pub(crate) const MAGIC: &[u8] = b"\x93NUMPY";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dtype {
    F4,
    F8,
}

#[derive(Debug)]
struct Header {
    dtype: Dtype,
    little_endian: bool,
    shape: Vec<usize>,
}

pub fn load_npy(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (header, offset) = parse_header(&bytes)?;
    let (n, d) = match header.shape[..] {
        [n, d] => (n, d),
        _ => {
            return Err(Error::UnsupportedArray(format!(
                "expected a 2-D array, got shape {:?}",
                header.shape
            )))
        }
    };
    let width = match header.dtype {
        Dtype::F4 => 4,
        Dtype::F8 => 8,
    };
    let payload = &bytes[offset..];
    let expected = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(width))
        .ok_or_else(|| Error::Format("array shape overflows".into()))?;
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "payload is {} bytes, shape {n}x{d} needs {expected}",
            payload.len()
        )));
    }
    let data: Vec<f64> = match (header.dtype, header.little_endian) {
        (Dtype::F8, true) => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        (Dtype::F8, false) => payload
            .chunks_exact(8)
            .map(|c| f64::from_be_bytes(c.try_into().unwrap()))
            .collect(),
        (Dtype::F4, true) => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        (Dtype::F4, false) => payload
            .chunks_exact(4)
            .map(|c| f32::from_be_bytes(c.try_into().unwrap()) as f64)
            .collect(),
    };
    EmbeddingSet::new(stem(path), n, d, data, None)
}

/// Writes a version 1.0, little-endian `f8` array. Labels are not stored.
pub fn save_npy(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dict = format!(
        "{{'descr': '<f8', 'fortran_order': False, 'shape': ({}, {}), }}",
        set.len(),
        set.dim()
    );
    // magic(6) + version(2) + header_len(2) + dict + padding + '\n' is a multiple of 64
    let unpadded = MAGIC.len() + 2 + 2 + dict.len() + 1;
    let padding = (64 - unpadded % 64) % 64;
    let header_len = dict.len() + padding + 1;
    let mut out = Vec::with_capacity(unpadded + padding + set.data().len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header_len as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out.resize(out.len() + padding, b' ');
    out.push(b'\n');
    for v in set.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn parse_header(bytes: &[u8]) -> Result<(Header, usize)> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(Error::Format("missing NPY magic".into()));
    }
    let major = bytes[6];
    let (header_len, start) = match major {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(Error::Format("truncated NPY preamble".into()));
            }
            (
                u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize,
                12,
            )
        }
        v => return Err(Error::Format(format!("unsupported NPY version {v}"))),
    };
    let end = start + header_len;
    if bytes.len() < end {
        return Err(Error::Format("truncated NPY header".into()));
    }
    let text = std::str::from_utf8(&bytes[start..end])
        .map_err(|_| Error::Format("NPY header is not text".into()))?;

    let descr = dict_value(text, "descr")?;
    let descr = descr.trim_matches(|c| c == '\'' || c == '"');
    let (little_endian, kind) = match descr.split_at(1) {
        ("<", k) => (true, k),
        (">", k) => (false, k),
        ("=", k) => (cfg!(target_endian = "little"), k),
        ("|", k) => (true, k),
        _ => (true, descr),
    };
    let dtype = match kind {
        "f4" => Dtype::F4,
        "f8" => Dtype::F8,
        other => {
            return Err(Error::UnsupportedArray(format!(
                "dtype {other} is not f4 or f8"
            )))
        }
    };

    let fortran = dict_value(text, "fortran_order")?;
    match fortran.trim() {
        "False" => {}
        "True" => {
            return Err(Error::UnsupportedArray(
                "Fortran-order arrays are not supported".into(),
            ))
        }
        other => return Err(Error::Format(format!("bad fortran_order {other}"))),
    }

    let shape_text = dict_value(text, "shape")?;
    let inner = shape_text
        .trim()
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| Error::Format(format!("bad shape {shape_text}")))?;
    let shape = inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| Error::Format(format!("bad shape entry {s}")))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok((
        Header {
            dtype,
            little_endian,
            shape,
        },
        end,
    ))
}

/// Raw text of the value stored under `key` in a Python dict literal.
fn dict_value<'a>(text: &'a str, key: &str) -> Result<&'a str> {
    let missing = || Error::Format(format!("NPY header lacks '{key}'"));
    let pos = text
        .find(&format!("'{key}'"))
        .or_else(|| text.find(&format!("\"{key}\"")))
        .ok_or_else(missing)?;
    let rest = &text[pos + key.len() + 2..];
    let rest = rest
        .trim_start()
        .strip_prefix(':')
        .ok_or_else(missing)?
        .trim_start();
    let end = if rest.starts_with('(') {
        rest.find(')').map(|i| i + 1)
    } else {
        rest.find([',', '}'])
    }
    .ok_or_else(|| Error::Format(format!("unterminated value for '{key}'")))?;
    Ok(&rest[..end])
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}
