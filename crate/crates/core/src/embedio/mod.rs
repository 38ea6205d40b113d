//! Embedding datasets and their on-disk formats.
//!
//! Three formats are supported: NPY (2-D float arrays, read as `f4`/`f8`,
//! written as `f8`), CSV with a header row, and EMBV1, a small
//! little-endian container that also carries integer labels.

mod csvio;
mod embv1;
mod npy;

use std::path::Path;

pub use csvio::{load_csv, save_csv};
pub use embv1::{load_embv1, save_embv1, EMBV1_MAGIC, EMBV1_VERSION};
pub use npy::{load_npy, save_npy};

use crate::error::{Error, Result};

/// An `n x d` matrix of embedding vectors with optional class labels.
///
/// Values are stored row-major as `f64` whatever the source dtype. A set is
/// immutable once built; every operation that changes it returns a new set.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    name: String,
    n: usize,
    d: usize,
    data: Vec<f64>,
    labels: Option<Vec<u32>>,
}

impl EmbeddingSet {
    pub fn new(
        name: impl Into<String>,
        n: usize,
        d: usize,
        data: Vec<f64>,
        labels: Option<Vec<u32>>,
    ) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidSet(format!(
                "shape must be at least 1x1, got {n}x{d}"
            )));
        }
        if data.len() != n * d {
            return Err(Error::InvalidSet(format!(
                "{} values do not fill a {n}x{d} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSet(format!(
                "non-finite value at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::InvalidSet(format!(
                    "{} labels for {n} rows",
                    labels.len()
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            n,
            d,
            data,
            labels,
        })
    }

    /// Builds a set from row vectors; all rows must share one length.
    pub fn from_rows(name: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::InvalidSet(format!(
                "row {i} has {} values, expected {d}",
                rows[i].len()
            )));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(name, rows.len(), d, data, None)
    }

    pub fn with_labels(mut self, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::InvalidSet(format!(
                "{} labels for {} rows",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    /// Rows at `indices`, in that order, with their labels.
    ///
    /// Panics if an index is out of range or `indices` is empty.
    pub fn select(&self, indices: &[usize]) -> EmbeddingSet {
        assert!(!indices.is_empty(), "selection must be non-empty");
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        EmbeddingSet {
            name: self.name.clone(),
            n: indices.len(),
            d: self.d,
            data,
            labels,
        }
    }

    /// Sorted distinct labels, if the set is labeled.
    pub fn classes(&self) -> Option<Vec<u32>> {
        let mut classes = self.labels.clone()?;
        classes.sort_unstable();
        classes.dedup();
        Some(classes)
    }
}

/// Divides every row by its Euclidean norm.
///
/// All-zero rows are kept as they are so that row indices stay aligned; the
/// second element of the result counts them.
pub fn l2_normalize(set: &EmbeddingSet) -> (EmbeddingSet, usize) {
    let mut out = set.clone();
    let mut zero_rows = 0;
    for row in out.data.chunks_exact_mut(out.d) {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            zero_rows += 1;
            continue;
        }
        for v in row.iter_mut() {
            *v /= norm;
        }
    }
    if zero_rows > 0 {
        log::warn!(
            "{}: {zero_rows} all-zero row(s) left unnormalized",
            set.name
        );
    }
    (out, zero_rows)
}

/// Loads a set, choosing the reader from the file extension.
///
/// Unknown extensions are sniffed: EMBV1 and NPY files are recognised by
/// their magic bytes, anything else is read as CSV.
pub fn load(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    match Format::from_path(path) {
        Some(Format::Npy) => load_npy(path),
        Some(Format::Csv) => load_csv(path, label_column),
        Some(Format::Embv1) => load_embv1(path),
        None => {
            let head = sniff(path)?;
            if head.starts_with(EMBV1_MAGIC) {
                load_embv1(path)
            } else if head.starts_with(npy::MAGIC) {
                load_npy(path)
            } else {
                load_csv(path, label_column)
            }
        }
    }
}

/// Saves a set in the format implied by the extension (EMBV1 when unknown).
pub fn save(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match Format::from_path(path) {
        Some(Format::Npy) => save_npy(set, path),
        Some(Format::Csv) => save_csv(set, path),
        Some(Format::Embv1) | None => save_embv1(set, path),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Npy,
    Csv,
    Embv1,
}

impl Format {
    fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "npy" => Some(Format::Npy),
            "csv" => Some(Format::Csv),
            "embv1" | "emb" => Some(Format::Embv1),
            _ => None,
        }
    }
}

fn sniff(path: &Path) -> Result<Vec<u8>> {
    use std::io::Read;
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut head = Vec::with_capacity(8);
    file.by_ref()
        .take(8)
        .read_to_end(&mut head)
        .map_err(|e| Error::io(path, e))?;
    Ok(head)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_values() {
        let err = EmbeddingSet::new("x", 1, 2, vec![0.0, f64::NAN], None).unwrap_err();
        assert!(matches!(err, Error::InvalidSet(_)));
        let err = EmbeddingSet::new("x", 1, 2, vec![f64::INFINITY, 0.0], None).unwrap_err();
        assert!(matches!(err, Error::InvalidSet(_)));
    }

    #[test]
    fn rejects_label_length_mismatch() {
        let set = EmbeddingSet::from_rows("x", &[vec![0.0], vec![1.0]]).unwrap();
        assert!(set.with_labels(vec![1]).is_err());
    }

    #[test]
    fn normalizes_three_four_five() {
        let set = EmbeddingSet::from_rows("x", &[vec![3.0, 4.0]]).unwrap();
        let (out, zeros) = l2_normalize(&set);
        assert_eq!(zeros, 0);
        assert!((out.row(0)[0] - 0.6).abs() < 1e-15);
        assert!((out.row(0)[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_rows_are_kept_and_counted() {
        let set = EmbeddingSet::from_rows("x", &[vec![0.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let (out, zeros) = l2_normalize(&set);
        assert_eq!(zeros, 1);
        assert_eq!(out.len(), 2);
        assert_eq!(out.row(0), &[0.0, 0.0]);
        assert_eq!(out.row(1), &[0.0, 1.0]);
    }

    #[test]
    fn normalization_is_idempotent() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                (0..7)
                    .map(|j| ((i * 7 + j) as f64 * 0.37).sin() * 5.0)
                    .collect()
            })
            .collect();
        let set = EmbeddingSet::from_rows("x", &rows).unwrap();
        let (once, _) = l2_normalize(&set);
        let (twice, _) = l2_normalize(&once);
        for (a, b) in once.data().iter().zip(twice.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        for row in once.rows() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn select_carries_labels() {
        let set = EmbeddingSet::from_rows("x", &[vec![0.0], vec![1.0], vec![2.0]])
            .unwrap()
            .with_labels(vec![5, 6, 7])
            .unwrap();
        let sub = set.select(&[2, 0]);
        assert_eq!(sub.data(), &[2.0, 0.0]);
        assert_eq!(sub.labels(), Some(&[7, 5][..]));
    }
}
