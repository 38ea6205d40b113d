//! Vietoris-Rips persistence (H0 and H1) and sliced Wasserstein distance
//! between persistence diagrams.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distances::{pairwise_self, DistanceMatrix};
use crate::embedio::EmbeddingSet;
use crate::error::{Error, Result};
use crate::sampling::{subsample_indices, RngSeed};

/// A persistence diagram in one homology dimension: `(birth, death)` pairs,
/// `death = +inf` for essential classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    pub dimension: usize,
    pub points: Vec<(f64, f64)>,
}

impl PersistenceDiagram {
    pub fn new(dimension: usize, points: Vec<(f64, f64)>) -> Self {
        debug_assert!(points.iter().all(|&(b, d)| d >= b));
        Self { dimension, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn essential_count(&self) -> usize {
        self.points.iter().filter(|p| p.1.is_infinite()).count()
    }
}

/// Removes every bar with infinite death.
pub fn drop_essential(diag: &PersistenceDiagram) -> PersistenceDiagram {
    PersistenceDiagram {
        dimension: diag.dimension,
        points: diag
            .points
            .iter()
            .copied()
            .filter(|p| p.1.is_finite())
            .collect(),
    }
}

/// Upper bound on the Rips filtration scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeLimit {
    /// The enclosing radius `min_i max_j d(i, j)`. At that scale the complex
    /// is a cone, so every H1 class has died and the truncation is exact.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RipsConfig {
    /// 0 for components only, 1 to add loops.
    pub max_dimension: usize,
    pub max_edge_length: EdgeLimit,
    /// Clouds larger than this are subsampled (seeded) before computing H1.
    pub h1_point_cap: usize,
    pub seed: RngSeed,
}

impl Default for RipsConfig {
    fn default() -> Self {
        Self {
            max_dimension: 1,
            max_edge_length: EdgeLimit::Auto,
            h1_point_cap: 400,
            seed: RngSeed::new(0),
        }
    }
}

impl RipsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_dimension > 1 {
            return Err(Error::Config(format!(
                "homology dimension {} is not supported (max 1)",
                self.max_dimension
            )));
        }
        if let EdgeLimit::Fixed(r) = self.max_edge_length {
            if r.is_nan() || r <= 0.0 {
                return Err(Error::Config(format!(
                    "max edge length must be positive, got {r}"
                )));
            }
        }
        if !(3..=MAX_H1_POINTS).contains(&self.h1_point_cap) {
            return Err(Error::Config(format!(
                "h1 point cap must be in 3..={MAX_H1_POINTS}, got {}",
                self.h1_point_cap
            )));
        }
        Ok(())
    }
}

/// H0 diagram of the Rips filtration: one bar `(0, w)` per minimum spanning
/// tree edge, in merge order, plus the essential `(0, inf)`.
pub fn rips_h0(points: &EmbeddingSet) -> PersistenceDiagram {
    h0_from_distances(&pairwise_self(points))
}

pub fn h0_from_distances(dist: &DistanceMatrix) -> PersistenceDiagram {
    let mut weights = mst_weights(dist);
    weights.sort_by(f64::total_cmp);
    let mut points: Vec<(f64, f64)> = weights.into_iter().map(|w| (0.0, w)).collect();
    if dist.rows() > 0 {
        points.push((0.0, f64::INFINITY));
    }
    PersistenceDiagram::new(0, points)
}

/// Prim's algorithm on the complete graph; `O(n^2)` time, `O(n)` memory.
fn mst_weights(dist: &DistanceMatrix) -> Vec<f64> {
    let n = dist.rows();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = dist.row(0).to_vec();
    in_tree[0] = true;
    let mut weights = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_w = f64::INFINITY;
        for (j, &w) in best.iter().enumerate() {
            if !in_tree[j] && (next == usize::MAX || w < next_w) {
                next = j;
                next_w = w;
            }
        }
        in_tree[next] = true;
        weights.push(next_w);
        for (j, &w) in dist.row(next).iter().enumerate() {
            if !in_tree[j] && w < best[j] {
                best[j] = w;
            }
        }
    }
    weights
}

/// H1 diagram of the Rips filtration of `points`, truncated at
/// `cfg.max_edge_length`. Zero-length bars are omitted. Clouds larger than
/// `cfg.h1_point_cap` are subsampled with `cfg.seed` first.
pub fn rips_h1(points: &EmbeddingSet, cfg: &RipsConfig) -> Result<PersistenceDiagram> {
    cfg.validate()?;
    if points.len() > cfg.h1_point_cap {
        let idx = subsample_indices(points.len(), cfg.h1_point_cap, cfg.seed)?;
        let sub = points.select(&idx);
        Ok(h1_from_distances(&pairwise_self(&sub), cfg.max_edge_length))
    } else {
        Ok(h1_from_distances(
            &pairwise_self(points),
            cfg.max_edge_length,
        ))
    }
}

/// Enclosing radius of a self-distance matrix.
pub fn enclosing_radius(dist: &DistanceMatrix) -> f64 {
    (0..dist.rows())
        .map(|i| dist.row(i).iter().copied().fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

/// Union-find with path halving and union by size.
pub(crate) struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the classes of `a` and `b`; false if they were already one.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

#[inline]
fn choose2(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

#[inline]
fn choose3(n: u64) -> u64 {
    if n < 3 {
        0
    } else {
        n * (n - 1) * (n - 2) / 6
    }
}

/// Combinatorial index of triangle `{i, j, k}` with `i < j`; `k` is any other
/// vertex. For a fixed edge the index grows with `k`.
#[inline]
fn triangle_index(i: usize, j: usize, k: usize) -> u64 {
    let (a, b, c) = if k < i {
        (k, i, j)
    } else if k < j {
        (i, k, j)
    } else {
        (i, j, k)
    };
    choose3(c as u64) + choose2(b as u64) + a as u64
}

/// Largest cloud [`h1_from_distances`] accepts: triangle keys pack the
/// longest-edge rank and the combinatorial index into 64 bits.
pub const MAX_H1_POINTS: usize = 8000;

const NO_EDGE: u32 = u32::MAX;

struct Edge {
    diam: f64,
    i: usize,
    j: usize,
}

/// H1 persistence pairs by reducing edge coboundary columns, last edge
/// first, over Z/2.
///
/// This is the column algorithm applied to the anti-transposed boundary
/// matrix of the triangles, which has the same persistence pairs. Edges that
/// kill an H0 class (minimum spanning tree edges under the same edge order)
/// are cleared up front. A column whose smallest cofacet is not yet claimed
/// is paired without materializing its coboundary. Otherwise the column is
/// held as a lazy heap and only the reduction coefficients are kept, so
/// entries past the final pivot are never merged.
///
/// Triangles are ordered by their longest edge (edges by diameter, then
/// vertex indices), then by combinatorial index.
///
/// # Panics
///
/// If the matrix has more than [`MAX_H1_POINTS`] rows.
pub fn h1_from_distances(dist: &DistanceMatrix, limit: EdgeLimit) -> PersistenceDiagram {
    let n = dist.rows();
    assert!(
        n <= MAX_H1_POINTS,
        "H1 on {n} points exceeds {MAX_H1_POINTS}"
    );
    if n < 3 {
        return PersistenceDiagram::new(1, Vec::new());
    }
    let threshold = match limit {
        EdgeLimit::Auto => enclosing_radius(dist),
        EdgeLimit::Fixed(r) => r,
    };

    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        let row = dist.row(i);
        for (j, &d) in row.iter().enumerate().skip(i + 1) {
            if d <= threshold {
                edges.push(Edge { diam: d, i, j });
            }
        }
    }
    edges.sort_unstable_by(|a, b| {
        a.diam
            .total_cmp(&b.diam)
            .then(a.i.cmp(&b.i))
            .then(a.j.cmp(&b.j))
    });
    let mut rank_of = vec![NO_EDGE; n * n];
    for (r, e) in edges.iter().enumerate() {
        rank_of[e.i * n + e.j] = r as u32;
        rank_of[e.j * n + e.i] = r as u32;
    }
    let index_bits = 64 - choose3(n as u64).leading_zeros();
    let key = |rank: u32, idx: u64| ((rank as u64) << index_bits) | idx;
    let key_rank = |key: u64| (key >> index_bits) as usize;

    let mut cleared = vec![false; edges.len()];
    let mut uf = UnionFind::new(n);
    for (rank, e) in edges.iter().enumerate() {
        if uf.union(e.i, e.j) {
            cleared[rank] = true;
        }
    }

    let push_coboundary = |rank: usize, heap: &mut BinaryHeap<Reverse<u64>>| {
        let e = &edges[rank];
        let (ri, rj) = (
            &rank_of[e.i * n..(e.i + 1) * n],
            &rank_of[e.j * n..(e.j + 1) * n],
        );
        for k in 0..n {
            if k == e.i || k == e.j || ri[k] == NO_EDGE || rj[k] == NO_EDGE {
                continue;
            }
            let top = (rank as u32).max(ri[k]).max(rj[k]);
            heap.push(Reverse(key(top, triangle_index(e.i, e.j, k))));
        }
    };

    // Smallest cofacet by scanning; among cofacets sharing the longest edge
    // the smallest k has the smallest index, so the first k whose other two
    // edges precede this one wins outright.
    let min_cofacet = |rank: usize| -> Option<u64> {
        let e = &edges[rank];
        let (ri, rj) = (
            &rank_of[e.i * n..(e.i + 1) * n],
            &rank_of[e.j * n..(e.j + 1) * n],
        );
        let mut best: Option<(u32, usize)> = None;
        for k in 0..n {
            if k == e.i || k == e.j || ri[k] == NO_EDGE || rj[k] == NO_EDGE {
                continue;
            }
            let top = (rank as u32).max(ri[k]).max(rj[k]);
            if best.map_or(true, |(bt, _)| top < bt) {
                best = Some((top, k));
                if top == rank as u32 {
                    break;
                }
            }
        }
        best.map(|(top, k)| key(top, triangle_index(e.i, e.j, k)))
    };

    // pivot triangle -> edge rank; reduction coefficients for the edges whose
    // reduced column is not their plain coboundary
    let mut pivots: HashMap<u64, usize> = HashMap::new();
    let mut coefficients: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut points = Vec::new();
    let mut heap: BinaryHeap<Reverse<u64>> = BinaryHeap::new();
    let mut combination = Vec::new();

    for rank in (0..edges.len()).rev() {
        if cleared[rank] {
            continue;
        }
        let birth = edges[rank].diam;
        let Some(first) = min_cofacet(rank) else {
            points.push((birth, f64::INFINITY));
            continue;
        };
        if let std::collections::hash_map::Entry::Vacant(slot) = pivots.entry(first) {
            slot.insert(rank);
            push_bar(&mut points, birth, edges[key_rank(first)].diam);
            continue;
        }

        heap.clear();
        combination.clear();
        combination.push(rank);
        push_coboundary(rank, &mut heap);
        let mut pivot = pop_pivot(&mut heap);
        while let Some(t) = pivot {
            let Some(&other) = pivots.get(&t) else {
                break;
            };
            match coefficients.get(&other) {
                Some(terms) => {
                    for &f in terms {
                        push_coboundary(f, &mut heap);
                    }
                    combination.extend_from_slice(terms);
                }
                None => {
                    push_coboundary(other, &mut heap);
                    combination.push(other);
                }
            }
            // the pivot itself cancels against the added column
            heap.push(Reverse(t));
            pivot = pop_pivot(&mut heap);
        }
        match pivot {
            None => points.push((birth, f64::INFINITY)),
            Some(t) => {
                pivots.insert(t, rank);
                push_bar(&mut points, birth, edges[key_rank(t)].diam);
                coefficients.insert(rank, reduce_mod2(&mut combination));
            }
        }
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    PersistenceDiagram::new(1, points)
}

fn push_bar(points: &mut Vec<(f64, f64)>, birth: f64, death: f64) {
    if death > birth {
        points.push((birth, death));
    }
}

/// Smallest entry of odd multiplicity, removed from the heap.
fn pop_pivot(heap: &mut BinaryHeap<Reverse<u64>>) -> Option<u64> {
    while let Some(Reverse(top)) = heap.pop() {
        match heap.peek() {
            Some(&Reverse(next)) if next == top => {
                heap.pop();
            }
            _ => return Some(top),
        }
    }
    None
}

/// Keeps the entries of odd multiplicity.
fn reduce_mod2(terms: &mut [usize]) -> Vec<usize> {
    terms.sort_unstable();
    let mut out = Vec::with_capacity(terms.len());
    for &t in terms.iter() {
        if out.last() == Some(&t) {
            out.pop();
        } else {
            out.push(t);
        }
    }
    out
}

/// Diagrams for dimensions `0..=cfg.max_dimension` from a self-distance
/// matrix, essential bars included.
pub fn diagrams_from_distances(
    dist: &DistanceMatrix,
    cfg: &RipsConfig,
) -> Result<Vec<PersistenceDiagram>> {
    cfg.validate()?;
    let mut out = vec![h0_from_distances(dist)];
    if cfg.max_dimension >= 1 {
        let h1 = if dist.rows() > cfg.h1_point_cap {
            let idx = subsample_indices(dist.rows(), cfg.h1_point_cap, cfg.seed)?;
            h1_from_distances(&dist.gather(&idx, &idx), cfg.max_edge_length)
        } else {
            h1_from_distances(dist, cfg.max_edge_length)
        };
        out.push(h1);
    }
    Ok(out)
}

/// Diagrams of a point cloud, see [`diagrams_from_distances`].
pub fn diagrams(points: &EmbeddingSet, cfg: &RipsConfig) -> Result<Vec<PersistenceDiagram>> {
    diagrams_from_distances(&pairwise_self(points), cfg)
}

pub const DEFAULT_SLICES: usize = 50;

/// Sliced Wasserstein distance between two finite diagrams.
///
/// Each diagram is augmented with the diagonal projections of the other's
/// points so both have the same cardinality. For directions
/// `theta_m = -pi/2 + (m + 1/2) pi / slices` the points are projected on
/// `(cos theta, sin theta)`, sorted, and compared in L1; the result is the
/// mean over directions.
pub fn sliced_wasserstein(
    a: &PersistenceDiagram,
    b: &PersistenceDiagram,
    slices: usize,
) -> Result<f64> {
    if slices == 0 {
        return Err(Error::Config("need at least one slice".into()));
    }
    let finite =
        |d: &PersistenceDiagram| d.points.iter().all(|p| p.0.is_finite() && p.1.is_finite());
    if !finite(a) || !finite(b) {
        return Err(Error::InfiniteBar);
    }
    let diag = |&(birth, death): &(f64, f64)| {
        let mid = (birth + death) / 2.0;
        (mid, mid)
    };
    let pa: Vec<(f64, f64)> = a
        .points
        .iter()
        .copied()
        .chain(b.points.iter().map(diag))
        .collect();
    let pb: Vec<(f64, f64)> = b
        .points
        .iter()
        .copied()
        .chain(a.points.iter().map(diag))
        .collect();
    if pa.is_empty() {
        return Ok(0.0);
    }

    let mut va = vec![0.0; pa.len()];
    let mut vb = vec![0.0; pb.len()];
    let mut total = 0.0;
    for m in 0..slices {
        let theta =
            -std::f64::consts::FRAC_PI_2 + (m as f64 + 0.5) * std::f64::consts::PI / slices as f64;
        let (s, c) = theta.sin_cos();
        for (slot, &(x, y)) in va.iter_mut().zip(&pa) {
            *slot = x * c + y * s;
        }
        for (slot, &(x, y)) in vb.iter_mut().zip(&pb) {
            *slot = x * c + y * s;
        }
        va.sort_unstable_by(f64::total_cmp);
        vb.sort_unstable_by(f64::total_cmp);
        total += va.iter().zip(&vb).map(|(x, y)| (x - y).abs()).sum::<f64>();
    }
    Ok(total / slices as f64)
}

/// Sum over dimensions of the sliced Wasserstein distance between
/// (essential-free) diagrams.
pub fn swp_from_diagrams(
    a: &[PersistenceDiagram],
    b: &[PersistenceDiagram],
    slices: usize,
) -> Result<f64> {
    a.iter()
        .zip(b)
        .map(|(da, db)| sliced_wasserstein(&drop_essential(da), &drop_essential(db), slices))
        .sum()
}

/// SWP distance between two point clouds: H0 (and H1 when
/// `cfg.max_dimension >= 1`) diagrams of each cloud, essentials dropped,
/// sliced Wasserstein summed over dimensions.
pub fn swp_distance(
    x: &EmbeddingSet,
    y: &EmbeddingSet,
    cfg: &RipsConfig,
    slices: usize,
) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::Dim {
            left: x.dim(),
            right: y.dim(),
        });
    }
    swp_from_diagrams(&diagrams(x, cfg)?, &diagrams(y, cfg)?, slices)
}

/// Writes `dimension,birth,death` rows; essential deaths are written `INF`.
pub fn write_diagrams_csv(diagrams: &[PersistenceDiagram], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("dimension,birth,death\n");
    for d in diagrams {
        for &(b, death) in &d.points {
            if death.is_infinite() {
                out.push_str(&format!("{},{b},INF\n", d.dimension));
            } else {
                out.push_str(&format!("{},{b},{death}\n", d.dimension));
            }
        }
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))
}
