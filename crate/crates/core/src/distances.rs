//! Euclidean distance kernels, energy statistics, exact kNN and kNN recall.
//!
//! The statistics stream one row of distances at a time, so memory stays
//! `O(rows)` whatever the set sizes. Row sums use Neumaier compensation and
//! are reduced in row order, which keeps results independent of how many
//! threads computed the rows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedio::EmbeddingSet;
use crate::error::{Error, Result};

/// Euclidean distance. `euclidean(a, b)` and `euclidean(b, a)` are bitwise
/// equal.
#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in ca.by_ref().zip(cb.by_ref()) {
        for l in 0..8 {
            let t = x[l] - y[l];
            acc[l] += t * t;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        let t = x - y;
        tail += t * t;
    }
    (((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail)
        .sqrt()
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Read access to a rectangular block of distances.
pub(crate) trait Distances: Sync {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    /// Writes row `i` into `out[..n_cols]`.
    fn fill_row(&self, i: usize, out: &mut [f64]);
    /// Writes `d(i, j)` for `j` in `from..n_cols` into `out[..n_cols - from]`.
    fn fill_row_from(&self, i: usize, from: usize, out: &mut [f64]);
}

/// Distances computed on demand between the rows of two sets.
pub(crate) struct Direct<'a> {
    pub a: &'a EmbeddingSet,
    pub b: &'a EmbeddingSet,
}

impl Distances for Direct<'_> {
    fn n_rows(&self) -> usize {
        self.a.len()
    }
    fn n_cols(&self) -> usize {
        self.b.len()
    }
    fn fill_row(&self, i: usize, out: &mut [f64]) {
        self.fill_row_from(i, 0, out);
    }
    fn fill_row_from(&self, i: usize, from: usize, out: &mut [f64]) {
        let a = self.a.row(i);
        for (slot, j) in out.iter_mut().zip(from..self.b.len()) {
            *slot = euclidean(a, self.b.row(j));
        }
    }
}

/// A view of a precomputed matrix restricted to chosen rows and columns.
pub(crate) struct Gathered<'a> {
    pub matrix: &'a DistanceMatrix,
    pub rows: &'a [usize],
    pub cols: &'a [usize],
}

impl Distances for Gathered<'_> {
    fn n_rows(&self) -> usize {
        self.rows.len()
    }
    fn n_cols(&self) -> usize {
        self.cols.len()
    }
    fn fill_row(&self, i: usize, out: &mut [f64]) {
        self.fill_row_from(i, 0, out);
    }
    fn fill_row_from(&self, i: usize, from: usize, out: &mut [f64]) {
        let row = self.matrix.row(self.rows[i]);
        for (slot, &j) in out.iter_mut().zip(&self.cols[from..]) {
            *slot = row[j];
        }
    }
}

/// `n x m` matrix of Euclidean distances between two point sets.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    /// Rows and columns index the same point set.
    self_distances: bool,
}

impl DistanceMatrix {
    /// Wraps raw row-major values. Entries must be finite and non-negative;
    /// a self-distance matrix must also be square, symmetric and zero on the
    /// diagonal.
    pub fn from_values(
        rows: usize,
        cols: usize,
        values: Vec<f64>,
        self_distances: bool,
    ) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Config(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("distances must be finite and >= 0".into()));
        }
        let m = Self {
            rows,
            cols,
            values,
            self_distances,
        };
        if self_distances {
            if rows != cols {
                return Err(Error::Config("self-distance matrix must be square".into()));
            }
            for i in 0..rows {
                if m.get(i, i) != 0.0 || (0..i).any(|j| m.get(i, j) != m.get(j, i)) {
                    return Err(Error::Config(
                        "self-distance matrix must be symmetric with zero diagonal".into(),
                    ));
                }
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_self(&self) -> bool {
        self.self_distances
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sub-matrix at the given rows and columns. The result is a
    /// self-distance matrix when this one is and `rows == cols`.
    pub fn gather(&self, rows: &[usize], cols: &[usize]) -> DistanceMatrix {
        let mut values = vec![0.0; rows.len() * cols.len()];
        if !cols.is_empty() {
            values
                .par_chunks_mut(cols.len())
                .zip(rows.par_iter())
                .for_each(|(out, &r)| {
                    let src = self.row(r);
                    for (slot, &c) in out.iter_mut().zip(cols) {
                        *slot = src[c];
                    }
                });
        }
        DistanceMatrix {
            rows: rows.len(),
            cols: cols.len(),
            values,
            self_distances: self.self_distances && rows == cols,
        }
    }

    fn build(a: &EmbeddingSet, b: &EmbeddingSet, symmetric: bool) -> Self {
        let (rows, cols) = (a.len(), b.len());
        let mut values = vec![0.0; rows * cols];
        if symmetric {
            values
                .par_chunks_mut(cols)
                .enumerate()
                .for_each(|(i, out)| {
                    let ai = a.row(i);
                    for (j, v) in out.iter_mut().enumerate().skip(i + 1) {
                        *v = euclidean(ai, b.row(j));
                    }
                });
            for i in 0..rows {
                for j in 0..i {
                    values[i * cols + j] = values[j * cols + i];
                }
            }
        } else {
            values
                .par_chunks_mut(cols)
                .enumerate()
                .for_each(|(i, out)| {
                    let ai = a.row(i);
                    for (j, slot) in out.iter_mut().enumerate() {
                        *slot = euclidean(ai, b.row(j));
                    }
                });
        }
        DistanceMatrix {
            rows,
            cols,
            values,
            self_distances: symmetric,
        }
    }
}

impl Distances for DistanceMatrix {
    fn n_rows(&self) -> usize {
        self.rows
    }
    fn n_cols(&self) -> usize {
        self.cols
    }
    fn fill_row(&self, i: usize, out: &mut [f64]) {
        out[..self.cols].copy_from_slice(self.row(i));
    }
    fn fill_row_from(&self, i: usize, from: usize, out: &mut [f64]) {
        out[..self.cols - from].copy_from_slice(&self.row(i)[from..]);
    }
}

fn check_dims(a: &EmbeddingSet, b: &EmbeddingSet) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Dim {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(())
}

/// Entry `(i, j)` is `||a_i - b_j||`. Passing the same set twice yields a
/// symmetric self-distance matrix with an exact zero diagonal.
pub fn pairwise_euclidean(a: &EmbeddingSet, b: &EmbeddingSet) -> Result<DistanceMatrix> {
    check_dims(a, b)?;
    Ok(DistanceMatrix::build(a, b, std::ptr::eq(a, b)))
}

/// Symmetric distances among the rows of one set.
pub fn pairwise_self(a: &EmbeddingSet) -> DistanceMatrix {
    DistanceMatrix::build(a, a, true)
}

/// The `k` nearest columns of every row, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborIndex {
    k: usize,
    indices: Vec<usize>,
    distances: Vec<f64>,
}

impl NeighborIndex {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.indices.len().checked_div(self.k).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self, row: usize) -> &[usize] {
        &self.indices[row * self.k..(row + 1) * self.k]
    }

    pub fn distances(&self, row: usize) -> &[f64] {
        &self.distances[row * self.k..(row + 1) * self.k]
    }
}

/// Positions of the `k` smallest entries of `row` ordered by (distance,
/// column), skipping `skip`. `scratch` is reused between calls.
fn k_smallest(row: &[f64], k: usize, skip: Option<usize>, scratch: &mut Vec<(f64, usize)>) {
    scratch.clear();
    scratch.extend(
        row.iter()
            .copied()
            .enumerate()
            .filter(|&(j, _)| Some(j) != skip)
            .map(|(j, d)| (d, j)),
    );
    let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < scratch.len() {
        scratch.select_nth_unstable_by(k, by_key);
        scratch.truncate(k);
    }
    scratch.sort_unstable_by(by_key);
}

/// Exact k nearest neighbors of every row, ties broken by the lower column
/// index. With `exclude_self` on a self-distance matrix the diagonal entry is
/// skipped.
pub fn knn(dist: &DistanceMatrix, k: usize, exclude_self: bool) -> Result<NeighborIndex> {
    let skip_diag = exclude_self && dist.is_self();
    let available = dist.cols() - usize::from(skip_diag);
    if k > available {
        return Err(Error::KTooLarge { k, available });
    }
    knn_rows(dist, k, skip_diag)
}

fn knn_rows<D: Distances>(dist: &D, k: usize, skip_diag: bool) -> Result<NeighborIndex> {
    let rows: Vec<Vec<(f64, usize)>> = (0..dist.n_rows())
        .into_par_iter()
        .map_init(
            || (vec![0.0; dist.n_cols()], Vec::new()),
            |(buf, scratch), i| {
                dist.fill_row(i, buf);
                k_smallest(buf, k, skip_diag.then_some(i), scratch);
                scratch.clone()
            },
        )
        .collect();
    let mut indices = Vec::with_capacity(rows.len() * k);
    let mut distances = Vec::with_capacity(rows.len() * k);
    for row in rows {
        for (d, j) in row {
            indices.push(j);
            distances.push(d);
        }
    }
    Ok(NeighborIndex {
        k,
        indices,
        distances,
    })
}

/// Neighborhoods within a set (self excluded), computed without
/// materializing the distance matrix.
pub fn self_neighbors(set: &EmbeddingSet, k: usize) -> Result<NeighborIndex> {
    if k >= set.len() {
        return Err(Error::KTooLarge {
            k,
            available: set.len().saturating_sub(1),
        });
    }
    knn_rows(&Direct { a: set, b: set }, k, true)
}

/// Sum over rows of the row sums of `d`, each compensated.
pub(crate) fn block_sum<D: Distances>(d: &D) -> f64 {
    let row_sums: Vec<f64> = (0..d.n_rows())
        .into_par_iter()
        .map_init(
            || vec![0.0; d.n_cols()],
            |buf, i| {
                d.fill_row(i, buf);
                compensated_sum(buf.iter().copied())
            },
        )
        .collect();
    compensated_sum(row_sums)
}

/// `sum_{i<j} d(i, j)` of a square symmetric block.
pub(crate) fn upper_sum<D: Distances>(d: &D) -> f64 {
    let n = d.n_rows();
    let row_sums: Vec<f64> = (0..n)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |buf, i| {
                let len = n - i - 1;
                d.fill_row_from(i, i + 1, &mut buf[..len]);
                compensated_sum(buf[..len].iter().copied())
            },
        )
        .collect();
    compensated_sum(row_sums)
}

/// V-statistic mean of a square symmetric block: all `n^2` ordered pairs,
/// self-pairs included.
pub(crate) fn within_mean<D: Distances>(d: &D) -> f64 {
    let n = d.n_rows() as f64;
    2.0 * upper_sum(d) / (n * n)
}

/// Mean over rows of the mean distance to the `k` nearest columns
/// (`k` clamped to the columns available).
pub(crate) fn mean_knn_distance<D: Distances>(d: &D, k: usize, skip_diag: bool) -> f64 {
    let available = d.n_cols() - usize::from(skip_diag);
    let k = k.min(available);
    if k == 0 {
        return 0.0;
    }
    let row_means: Vec<f64> = (0..d.n_rows())
        .into_par_iter()
        .map_init(
            || (vec![0.0; d.n_cols()], Vec::new()),
            |(buf, scratch), i| {
                d.fill_row(i, buf);
                k_smallest(buf, k, skip_diag.then_some(i), scratch);
                compensated_sum(scratch.iter().map(|p| p.0)) / k as f64
            },
        )
        .collect();
    compensated_sum(row_means) / d.n_rows() as f64
}

/// `E^2 = 2 E||x-y|| - E||x-x'|| - E||y-y'||` from the three blocks, with the
/// within-set expectations taken as V-statistics.
pub(crate) fn energy_from<C: Distances, W: Distances, V: Distances>(
    cross: &C,
    within_x: &W,
    within_y: &V,
) -> f64 {
    let nm = (cross.n_rows() * cross.n_cols()) as f64;
    let cross_mean = block_sum(cross) / nm;
    2.0 * cross_mean - (within_mean(within_x) + within_mean(within_y))
}

/// Which expectations the neighborhood restriction applies to.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalTerms {
    /// Only the two cross expectations are restricted; the within-set terms
    /// are full V-statistic means.
    #[default]
    CrossOnly,
    /// Within-set terms are restricted too: each point's `k` nearest
    /// neighbors in its own set, self excluded.
    All,
}

/// Within-set term for the local statistic.
pub(crate) fn local_within<W: Distances>(within: &W, k: usize, terms: LocalTerms) -> f64 {
    match terms {
        LocalTerms::CrossOnly => within_mean(within),
        LocalTerms::All => mean_knn_distance(within, k, true),
    }
}

/// Orders two sets canonically so symmetric formulas evaluate their cross
/// term in one fixed orientation.
fn canonical<'a>(x: &'a EmbeddingSet, y: &'a EmbeddingSet) -> (&'a EmbeddingSet, &'a EmbeddingSet) {
    let key = |s: &EmbeddingSet| s.len();
    let swap = match key(x).cmp(&key(y)) {
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Equal => {
            let ord = x
                .data()
                .iter()
                .zip(y.data())
                .map(|(a, b)| a.total_cmp(b))
                .find(|o| o.is_ne());
            ord == Some(std::cmp::Ordering::Greater)
        }
    };
    if swap {
        (y, x)
    } else {
        (x, y)
    }
}

/// Energy statistic `E^2(x, y)`; exactly symmetric in its arguments.
pub fn energy_statistic(x: &EmbeddingSet, y: &EmbeddingSet) -> Result<f64> {
    check_dims(x, y)?;
    let (x, y) = canonical(x, y);
    Ok(energy_from(
        &Direct { a: x, b: y },
        &Direct { a: x, b: x },
        &Direct { a: y, b: y },
    ))
}

/// Local energy statistic: mean distance from each `x` to its `k` nearest
/// points of `y`, plus the same from `y` into `x`, minus the within-set
/// expectations.
///
/// `k` is clamped to the size of the set searched, so `k >= max(|x|, |y|)`
/// reproduces [`energy_statistic`] (up to summation order) under
/// [`LocalTerms::CrossOnly`].
pub fn local_energy_statistic(
    x: &EmbeddingSet,
    y: &EmbeddingSet,
    k: usize,
    terms: LocalTerms,
) -> Result<f64> {
    check_dims(x, y)?;
    if k == 0 {
        return Err(Error::Config("local energy needs k >= 1".into()));
    }
    let cross = mean_knn_distance(&Direct { a: x, b: y }, k, false)
        + mean_knn_distance(&Direct { a: y, b: x }, k, false);
    let within = local_within(&Direct { a: x, b: x }, k, terms)
        + local_within(&Direct { a: y, b: y }, k, terms);
    Ok(cross - within)
}

/// Fraction of each point's `k` reference neighbors (self excluded) that are
/// also among its `k` neighbors in `evaluation`, averaged over points.
/// `evaluation` row `i` must be the transformed reference row `i`.
pub fn knn_recall(reference: &EmbeddingSet, evaluation: &EmbeddingSet, k: usize) -> Result<f64> {
    check_pairing(reference, evaluation)?;
    let reference_nn = self_neighbors(reference, k)?;
    knn_recall_against(&reference_nn, evaluation)
}

/// [`knn_recall`] with the reference neighborhoods precomputed by
/// [`self_neighbors`].
pub fn knn_recall_against(reference_nn: &NeighborIndex, evaluation: &EmbeddingSet) -> Result<f64> {
    if reference_nn.len() != evaluation.len() {
        return Err(Error::IndexPairing {
            reference: reference_nn.len(),
            evaluation: evaluation.len(),
        });
    }
    let k = reference_nn.k();
    let eval_nn = self_neighbors(evaluation, k)?;
    Ok(recall_between(reference_nn, &eval_nn))
}

pub(crate) fn recall_between(a: &NeighborIndex, b: &NeighborIndex) -> f64 {
    let k = a.k();
    let per_point = (0..a.len()).map(|i| {
        let mut ra = a.indices(i).to_vec();
        let mut rb = b.indices(i).to_vec();
        ra.sort_unstable();
        rb.sort_unstable();
        let (mut p, mut q, mut hits) = (0, 0, 0usize);
        while p < k && q < k {
            match ra[p].cmp(&rb[q]) {
                std::cmp::Ordering::Less => p += 1,
                std::cmp::Ordering::Greater => q += 1,
                std::cmp::Ordering::Equal => {
                    hits += 1;
                    p += 1;
                    q += 1;
                }
            }
        }
        hits as f64 / k as f64
    });
    compensated_sum(per_point) / a.len() as f64
}

fn check_pairing(reference: &EmbeddingSet, evaluation: &EmbeddingSet) -> Result<()> {
    if reference.len() != evaluation.len() {
        return Err(Error::IndexPairing {
            reference: reference.len(),
            evaluation: evaluation.len(),
        });
    }
    check_dims(reference, evaluation)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points(values: &[f64]) -> EmbeddingSet {
        let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
        EmbeddingSet::from_rows("p", &rows).unwrap()
    }

    #[test]
    fn three_four_five() {
        let a = EmbeddingSet::from_rows("a", &[vec![0.0, 0.0]]).unwrap();
        let b = EmbeddingSet::from_rows("b", &[vec![3.0, 4.0]]).unwrap();
        assert_eq!(pairwise_euclidean(&a, &b).unwrap().values(), &[5.0]);
    }

    #[test]
    fn self_matrix_is_symmetric_with_zero_diagonal() {
        let a = points(&[0.0, 1.5, -2.0, 7.0]);
        let d = pairwise_euclidean(&a, &a).unwrap();
        assert!(d.is_self());
        for i in 0..4 {
            assert_eq!(d.get(i, i), 0.0);
            for j in 0..4 {
                assert_eq!(d.get(i, j), d.get(j, i));
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let a = EmbeddingSet::from_rows("a", &[vec![0.0, 0.0]]).unwrap();
        let b = points(&[1.0]);
        assert!(matches!(pairwise_euclidean(&a, &b), Err(Error::Dim { .. })));
        assert!(matches!(energy_statistic(&a, &b), Err(Error::Dim { .. })));
    }

    #[test]
    fn knn_on_a_line() {
        let p = points(&[0.0, 1.0, 3.0]);
        let nn = knn(&pairwise_self(&p), 1, true).unwrap();
        assert_eq!(nn.indices(0), &[1]);
        assert_eq!(nn.indices(1), &[0]);
        assert_eq!(nn.indices(2), &[1]);
    }

    #[test]
    fn knn_ties_prefer_lower_column() {
        let row = vec![5.0, 3.0, 1.0, 4.0, 2.0, 1.0];
        let d = DistanceMatrix::from_values(1, 6, row, false).unwrap();
        let nn = knn(&d, 1, false).unwrap();
        assert_eq!(nn.indices(0), &[2]);
        let nn = knn(&d, 3, false).unwrap();
        assert_eq!(nn.indices(0), &[2, 5, 4]);
        assert_eq!(nn.distances(0), &[1.0, 1.0, 2.0]);
    }

    #[test]
    fn knn_with_k_equal_columns_returns_all() {
        let a = points(&[0.0, 2.0]);
        let b = points(&[5.0, 1.0, 3.0]);
        let nn = knn(&pairwise_euclidean(&a, &b).unwrap(), 3, false).unwrap();
        for i in 0..2 {
            let mut cols = nn.indices(i).to_vec();
            cols.sort_unstable();
            assert_eq!(cols, vec![0, 1, 2]);
        }
    }

    #[test]
    fn knn_rejects_oversized_k() {
        let p = points(&[0.0, 1.0, 3.0]);
        assert!(matches!(
            knn(&pairwise_self(&p), 3, true),
            Err(Error::KTooLarge { .. })
        ));
    }

    #[test]
    fn energy_hand_examples() {
        let x = points(&[0.0, 2.0]);
        let y = points(&[1.0, 3.0]);
        assert!((energy_statistic(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let e = energy_statistic(&points(&[0.0]), &points(&[1.0])).unwrap();
        assert!((e - 2.0).abs() < 1e-12);
        assert!(energy_statistic(&x, &x).unwrap().abs() < 1e-10);
    }

    #[test]
    fn local_energy_hand_example() {
        let x = points(&[0.0, 2.0]);
        let y = points(&[1.0, 3.0]);
        let le = local_energy_statistic(&x, &y, 1, LocalTerms::CrossOnly).unwrap();
        assert!(le.abs() < 1e-12, "{le}");
    }

    #[test]
    fn local_energy_of_a_set_with_itself_is_not_positive() {
        let x = points(&[0.0, 0.5, 2.0, 3.5]);
        let le = local_energy_statistic(&x, &x, 1, LocalTerms::CrossOnly).unwrap();
        // nearest neighbor is the point itself, so only the within terms remain
        let within = 2.0 * (0.5 + 2.0 + 3.5 + 1.5 + 3.0 + 1.5) * 2.0 / 16.0;
        assert!((le + within).abs() < 1e-12);
        assert!(le <= 0.0);
    }

    #[test]
    fn local_energy_rejects_zero_k() {
        let x = points(&[0.0, 1.0]);
        assert!(local_energy_statistic(&x, &x, 0, LocalTerms::CrossOnly).is_err());
    }

    #[test]
    fn recall_of_identity_is_one() {
        let p = points(&[0.0, 1.0, 3.0, 7.0, 8.5, 20.0]);
        assert_eq!(knn_recall(&p, &p, 2).unwrap(), 1.0);
    }

    #[test]
    fn recall_checks_pairing_and_k() {
        let p = points(&[0.0, 1.0, 3.0]);
        let q = points(&[0.0, 1.0]);
        assert!(matches!(
            knn_recall(&p, &q, 1),
            Err(Error::IndexPairing { .. })
        ));
        assert!(matches!(
            knn_recall(&p, &p, 3),
            Err(Error::KTooLarge { .. })
        ));
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let values = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(values), 2.0);
    }

    #[test]
    fn gathered_view_matches_direct_rows() {
        let p = points(&[0.0, 1.0, 3.0, 7.0]);
        let full = pairwise_self(&p);
        let sub = full.gather(&[3, 1], &[0, 2, 3]);
        assert_eq!(sub.row(0), &[7.0, 4.0, 0.0]);
        assert_eq!(sub.row(1), &[1.0, 2.0, 6.0]);
        assert!(!sub.is_self());
        assert!(full.gather(&[2, 0], &[2, 0]).is_self());
    }
}
