//! EMBV1 container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "EMBV"            4 bytes
//! version   u32     = 1
//! n         u32
//! d         u32
//! has_labels u8     0 or 1
//! values    f64 x n*d, row-major
//! labels    i64 x n   (only when has_labels == 1)
//! ```

use std::fs;
use std::path::Path;

use super::EmbeddingSet;
use crate::error::{Error, Result};

pub const EMBV1_MAGIC: &[u8; 4] = b"EMBV";
pub const EMBV1_VERSION: u32 = 1;

const PREAMBLE: usize = 4 + 4 + 4 + 4 + 1;

pub fn save_embv1(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let n = u32::try_from(set.len())
        .map_err(|_| Error::Format(format!("{} rows exceed the u32 range", set.len())))?;
    let d = u32::try_from(set.dim())
        .map_err(|_| Error::Format(format!("dimension {} exceeds the u32 range", set.dim())))?;
    let labels = set.labels();
    let mut out =
        Vec::with_capacity(PREAMBLE + set.data().len() * 8 + labels.map_or(0, |l| l.len() * 8));
    out.extend_from_slice(EMBV1_MAGIC);
    out.extend_from_slice(&EMBV1_VERSION.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&d.to_le_bytes());
    out.push(u8::from(labels.is_some()));
    for v in set.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(labels) = labels {
        for &l in labels {
            out.extend_from_slice(&i64::from(l).to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_embv1(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode(&bytes, name)
}

pub(crate) fn decode(bytes: &[u8], name: String) -> Result<EmbeddingSet> {
    if bytes.len() < PREAMBLE {
        return Err(Error::Format("truncated EMBV1 preamble".into()));
    }
    if &bytes[..4] != EMBV1_MAGIC {
        return Err(Error::Format("missing EMBV magic".into()));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = word(4);
    if version != EMBV1_VERSION {
        return Err(Error::Format(format!("unsupported EMBV version {version}")));
    }
    let n = word(8) as usize;
    let d = word(12) as usize;
    let has_labels = match bytes[16] {
        0 => false,
        1 => true,
        flag => return Err(Error::Format(format!("bad has_labels flag {flag}"))),
    };

    let values_len = n * d * 8;
    let labels_len = if has_labels { n * 8 } else { 0 };
    let expected = PREAMBLE + values_len + labels_len;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "file is {} bytes, header promises {expected}",
            bytes.len()
        )));
    }

    let data = bytes[PREAMBLE..PREAMBLE + values_len]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let labels = if has_labels {
        let raw = &bytes[PREAMBLE + values_len..];
        let labels = raw
            .chunks_exact(8)
            .enumerate()
            .map(|(i, c)| {
                let v = i64::from_le_bytes(c.try_into().unwrap());
                u32::try_from(v)
                    .map_err(|_| Error::Format(format!("label {v} at row {i} is out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Some(labels)
    } else {
        None
    };
    EmbeddingSet::new(name, n, d, data, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(labels: bool) -> EmbeddingSet {
        let set = EmbeddingSet::from_rows("s", &[vec![0.1, -2.5, 3.0], vec![1e300, -0.0, 4e-320]])
            .unwrap();
        if labels {
            set.with_labels(vec![3, 0]).unwrap()
        } else {
            set
        }
    }

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        for labels in [false, true] {
            let path = dir.path().join("s.embv1");
            let set = sample(labels);
            save_embv1(&set, &path).unwrap();
            let back = load_embv1(&path).unwrap();
            let bits = |s: &EmbeddingSet| s.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&back), bits(&set));
            assert_eq!(back.labels(), set.labels());
        }
    }

    #[test]
    fn layout_matches_format_doc() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.embv1");
        save_embv1(&sample(true), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"EMBV");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &3u32.to_le_bytes());
        assert_eq!(bytes[16], 1);
        assert_eq!(&bytes[17..25], &0.1f64.to_le_bytes());
        assert_eq!(
            &bytes[bytes.len() - 16..bytes.len() - 8],
            &3i64.to_le_bytes()
        );
        assert_eq!(bytes.len(), 17 + 6 * 8 + 2 * 8);
    }

    #[test]
    fn truncation_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.embv1");
        save_embv1(&sample(true), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        for cut in [3, 16, 40, bytes.len() - 1] {
            let err = decode(&bytes[..cut], "s".into()).unwrap_err();
            assert!(matches!(err, Error::Format(_)), "cut at {cut}: {err}");
        }
    }

    #[test]
    fn bad_magic_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.embv1");
        save_embv1(&sample(false), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes, "s".into()), Err(Error::Format(_))));
    }

    #[test]
    fn negative_label_is_rejected() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"EMBV");
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.push(1);
        bytes.extend_from_slice(&2.0f64.to_le_bytes());
        bytes.extend_from_slice(&(-1i64).to_le_bytes());
        assert!(matches!(decode(&bytes, "s".into()), Err(Error::Format(_))));
    }
}
