//! The two shift tests and their reports.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distances::{
    compensated_sum, energy_from, energy_statistic, knn_recall_against, local_energy_statistic,
    pairwise_self, self_neighbors, within_mean, DistanceMatrix, Gathered, LocalTerms,
};
use crate::embedio::EmbeddingSet;
use crate::error::{Error, Result};
use crate::sampling::{disjoint_pair_indices, gaussian_perturb, subsample_indices, RngSeed};
use crate::stats::{fit_score, mean, percentile, welch_t_test};
use crate::topology::{
    diagrams, diagrams_from_distances, swp_from_diagrams, EdgeLimit, RipsConfig, DEFAULT_SLICES,
};

/// Distance between two point clouds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Metric {
    Energy,
    LocalEnergy {
        k: usize,
        #[serde(default)]
        terms: LocalTerms,
    },
    /// Sliced Wasserstein between Rips persistence diagrams, summed over
    /// dimensions.
    Swp {
        max_dimension: usize,
        slices: usize,
        h1_point_cap: usize,
        max_edge_length: EdgeLimit,
    },
}

impl Metric {
    pub const DEFAULT_LOCAL_K: usize = 5;

    pub fn local_energy(k: usize) -> Self {
        Metric::LocalEnergy {
            k,
            terms: LocalTerms::CrossOnly,
        }
    }

    pub fn swp() -> Self {
        let rips = RipsConfig::default();
        Metric::Swp {
            max_dimension: rips.max_dimension,
            slices: DEFAULT_SLICES,
            h1_point_cap: rips.h1_point_cap,
            max_edge_length: rips.max_edge_length,
        }
    }

    /// Short name used in tables: `E`, `LE`, `SWP`.
    pub fn abbreviation(&self) -> &'static str {
        match self {
            Metric::Energy => "E",
            Metric::LocalEnergy { .. } => "LE",
            Metric::Swp { .. } => "SWP",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Metric::Energy => Ok(()),
            Metric::LocalEnergy { k, .. } => {
                if k == 0 {
                    Err(Error::Config("local energy needs k >= 1".into()))
                } else {
                    Ok(())
                }
            }
            Metric::Swp { slices, .. } => {
                if slices == 0 {
                    return Err(Error::Config("need at least one slice".into()));
                }
                self.rips(RngSeed::new(0)).unwrap().validate()
            }
        }
    }

    fn rips(&self, seed: RngSeed) -> Option<RipsConfig> {
        match *self {
            Metric::Swp {
                max_dimension,
                h1_point_cap,
                max_edge_length,
                ..
            } => Some(RipsConfig {
                max_dimension,
                max_edge_length,
                h1_point_cap,
                seed,
            }),
            _ => None,
        }
    }
}

/// Evaluates `metric` between two sets. `seed` only matters for SWP, where
/// it picks the H1 subsample.
pub fn metric_distance(
    metric: &Metric,
    x: &EmbeddingSet,
    y: &EmbeddingSet,
    seed: RngSeed,
) -> Result<f64> {
    metric.validate()?;
    match *metric {
        Metric::Energy => energy_statistic(x, y),
        Metric::LocalEnergy { k, terms } => local_energy_statistic(x, y, k, terms),
        Metric::Swp { slices, .. } => {
            check_dims(x, y)?;
            let rips = metric.rips(seed).unwrap();
            swp_from_diagrams(&diagrams(x, &rips)?, &diagrams(y, &rips)?, slices)
        }
    }
}

fn check_dims(x: &EmbeddingSet, y: &EmbeddingSet) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::Dim {
            left: x.dim(),
            right: y.dim(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Yes,
    No,
}

impl Decision {
    pub fn from_shift(shift: bool) -> Self {
        if shift {
            Decision::Yes
        } else {
            Decision::No
        }
    }

    pub fn is_shift(self) -> bool {
        self == Decision::Yes
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Yes => "yes",
            Decision::No => "no",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub metric: Metric,
    pub subsample_size: usize,
    pub samples_per_run: usize,
    pub runs: usize,
    pub alpha: f64,
    pub seed: RngSeed,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            metric: Metric::Energy,
            subsample_size: 1000,
            samples_per_run: 15,
            runs: 20,
            alpha: 0.05,
            seed: RngSeed::new(0),
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.subsample_size < 2 {
            return Err(Error::Config("subsample size must be at least 2".into()));
        }
        if self.samples_per_run < 2 {
            return Err(Error::Config("need at least 2 samples per run".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("need at least one run".into()));
        }
        self.metric.validate()
    }
}

/// Reference-reference and reference-candidate distances of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSamples {
    pub d_xx: Vec<f64>,
    pub d_xy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub p_value: f64,
    pub decision: Decision,
    pub samples: DistanceSamples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub test: String,
    pub decision: Decision,
    pub fit_score: f64,
    pub yes_count: usize,
    pub no_count: usize,
    pub p5_p: f64,
    pub p95_p: f64,
    pub d_xx_p5: f64,
    pub d_xx_p95: f64,
    pub d_xy_p5: f64,
    pub d_xy_p95: f64,
    pub elapsed_seconds: f64,
    pub elapsed_seconds_per_run: f64,
    pub runs: Vec<RunOutcome>,
    pub config: DetectorConfig,
}

/// Pools above this many rows are not cached as a full distance matrix.
const POOL_MAX_ROWS: usize = 10_000;

/// The reference and candidate rows behind one test, indexed as one pool:
/// reference rows first, then candidate rows. Small pools keep the full
/// distance matrix so every subsample distance is a gather.
struct Pool<'a> {
    x: &'a EmbeddingSet,
    y: &'a EmbeddingSet,
    matrix: Option<DistanceMatrix>,
    /// Per pool row, the nearest other reference rows and the nearest
    /// candidate rows in (distance, index) order, truncated.
    neighbors: [NeighborLists; 2],
}

#[derive(Default)]
struct NeighborLists {
    len: usize,
    indices: Vec<u32>,
}

impl NeighborLists {
    fn of(&self, p: usize) -> &[u32] {
        &self.indices[p * self.len..(p + 1) * self.len]
    }
}

impl<'a> Pool<'a> {
    fn new(x: &'a EmbeddingSet, y: &'a EmbeddingSet, metric: &Metric, m: usize) -> Self {
        let total = x.len() + y.len();
        let mut pool = Pool {
            x,
            y,
            matrix: None,
            neighbors: Default::default(),
        };
        if total > POOL_MAX_ROWS {
            log::info!("{total} pooled rows: computing subsample distances directly");
            return pool;
        }
        let mut data = Vec::with_capacity(total * x.dim());
        data.extend_from_slice(x.data());
        data.extend_from_slice(y.data());
        let joined = EmbeddingSet::new("pool", total, x.dim(), data, None)
            .expect("pool of valid sets is valid");
        let matrix = pairwise_self(&joined);
        if let Metric::LocalEnergy { k, .. } = *metric {
            // about 4k members of an m-row subsample are expected in a list
            // of this length; shorter hits fall back to a row scan
            let nx = x.len();
            for (side, range) in [(0, 0..nx), (1, nx..total)] {
                let len = (4 * k * range.len().div_ceil(m) + 16).min(range.len() - 1);
                pool.neighbors[side] = nearest_lists(&matrix, range, len);
            }
        }
        pool.matrix = Some(matrix);
        pool
    }

    fn materialize(&self, idx: &[usize]) -> EmbeddingSet {
        let nx = self.x.len();
        let mut data = Vec::with_capacity(idx.len() * self.x.dim());
        for &i in idx {
            if i < nx {
                data.extend_from_slice(self.x.row(i));
            } else {
                data.extend_from_slice(self.y.row(i - nx));
            }
        }
        EmbeddingSet::new("subsample", idx.len(), self.x.dim(), data, None)
            .expect("rows of valid sets are valid")
    }

    fn distance(&self, metric: &Metric, a: &[usize], b: &[usize], seed: RngSeed) -> Result<f64> {
        let Some(matrix) = &self.matrix else {
            return metric_distance(metric, &self.materialize(a), &self.materialize(b), seed);
        };
        let g = |rows, cols| Gathered { matrix, rows, cols };
        match *metric {
            Metric::Energy => Ok(energy_from(&g(a, b), &g(a, a), &g(b, b))),
            Metric::LocalEnergy { k, terms } => {
                let cross =
                    self.knn_mean(matrix, a, b, k, false) + self.knn_mean(matrix, b, a, k, false);
                let within = match terms {
                    LocalTerms::CrossOnly => within_mean(&g(a, a)) + within_mean(&g(b, b)),
                    LocalTerms::All => {
                        self.knn_mean(matrix, a, a, k, true) + self.knn_mean(matrix, b, b, k, true)
                    }
                };
                Ok(cross - within)
            }
            Metric::Swp { slices, .. } => {
                let rips = metric.rips(seed).unwrap();
                let da = diagrams_from_distances(&matrix.gather(a, a), &rips)?;
                let db = diagrams_from_distances(&matrix.gather(b, b), &rips)?;
                swp_from_diagrams(&da, &db, slices)
            }
        }
    }

    /// Mean over `from` rows of the mean distance to their `k` nearest rows
    /// of `to` (`k` clamped to what is available).
    fn knn_mean(
        &self,
        matrix: &DistanceMatrix,
        from: &[usize],
        to: &[usize],
        k: usize,
        skip_self: bool,
    ) -> f64 {
        let k = k.min(to.len() - usize::from(skip_self));
        if k == 0 {
            return 0.0;
        }
        let mut member = vec![false; matrix.rows()];
        for &q in to {
            member[q] = true;
        }
        let lists = &self.neighbors[usize::from(to[0] >= self.x.len())];
        let mut found = Vec::with_capacity(k);
        let mut scratch = Vec::new();
        let per_row = from.iter().map(|&p| {
            let row = matrix.row(p);
            found.clear();
            for &q in lists.of(p) {
                if member[q as usize] {
                    found.push(row[q as usize]);
                    if found.len() == k {
                        break;
                    }
                }
            }
            if found.len() < k {
                // the truncated list ran out; scan the whole row
                scratch.clear();
                scratch.extend(
                    to.iter()
                        .filter(|&&q| !(skip_self && q == p))
                        .map(|&q| row[q]),
                );
                scratch.select_nth_unstable_by(k - 1, f64::total_cmp);
                found.clear();
                found.extend_from_slice(&scratch[..k]);
            }
            compensated_sum(found.iter().copied()) / k as f64
        });
        compensated_sum(per_row) / from.len() as f64
    }
}

/// For every pool row, the `len` nearest rows of `range` other than itself.
fn nearest_lists(
    matrix: &DistanceMatrix,
    range: std::ops::Range<usize>,
    len: usize,
) -> NeighborLists {
    let lists: Vec<Vec<u32>> = (0..matrix.rows())
        .into_par_iter()
        .map_init(Vec::new, |scratch: &mut Vec<(f64, u32)>, p| {
            scratch.clear();
            let row = &matrix.row(p)[range.clone()];
            scratch.extend(
                row.iter()
                    .zip(range.clone())
                    .filter(|&(_, q)| q != p)
                    .map(|(&d, q)| (d, q as u32)),
            );
            let by_key = |a: &(f64, u32), b: &(f64, u32)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if len < scratch.len() {
                scratch.select_nth_unstable_by(len, by_key);
            }
            scratch.truncate(len);
            scratch.sort_unstable_by(by_key);
            scratch.iter().map(|&(_, q)| q).collect()
        })
        .collect();
    NeighborLists {
        len,
        indices: lists.concat(),
    }
}

/// Subsample shift test.
///
/// Each run draws `samples_per_run` disjoint pairs of reference subsamples
/// and as many independent (reference, candidate) subsample pairs, all of
/// size `subsample_size`, and compares the two distance samples with a Welch
/// t-test. A run reports a shift when `p < alpha` and the cross distances
/// are larger on average. The overall decision is the majority over runs,
/// ties counting as a shift.
pub fn subsample_shift_test(
    x: &EmbeddingSet,
    y: &EmbeddingSet,
    cfg: &DetectorConfig,
) -> Result<ShiftReport> {
    cfg.validate()?;
    check_dims(x, y)?;
    let m = cfg.subsample_size;
    if x.len() < 2 * m {
        return Err(Error::SampleTooLarge {
            requested: 2 * m,
            available: x.len(),
        });
    }
    if y.len() < m {
        return Err(Error::SampleTooLarge {
            requested: m,
            available: y.len(),
        });
    }
    let start = Instant::now();
    let pool = Pool::new(x, y, &cfg.metric, m);
    let nx = x.len();

    let run = |r: usize| -> Result<(RunOutcome, f64)> {
        let run_start = Instant::now();
        let run_seed = cfg.seed.derive(r as u64);
        let mut d_xx = Vec::with_capacity(cfg.samples_per_run);
        let mut d_xy = Vec::with_capacity(cfg.samples_per_run);
        for s in 0..cfg.samples_per_run as u64 {
            let seed = run_seed.derive(2 * s);
            let (a, b) = disjoint_pair_indices(nx, m, seed.derive(0))?;
            d_xx.push(pool.distance(&cfg.metric, &a, &b, seed.derive(1))?);

            let seed = run_seed.derive(2 * s + 1);
            let a = subsample_indices(nx, m, seed.derive(0))?;
            let b: Vec<usize> = subsample_indices(y.len(), m, seed.derive(1))?
                .into_iter()
                .map(|i| i + nx)
                .collect();
            d_xy.push(pool.distance(&cfg.metric, &a, &b, seed.derive(2))?);
        }
        let p_value = welch_t_test(&d_xx, &d_xy)?;
        let shift = p_value < cfg.alpha && mean(&d_xy) > mean(&d_xx);
        let outcome = RunOutcome {
            p_value,
            decision: Decision::from_shift(shift),
            samples: DistanceSamples { d_xx, d_xy },
        };
        Ok((outcome, run_start.elapsed().as_secs_f64()))
    };
    let results: Vec<(RunOutcome, f64)> = (0..cfg.runs)
        .into_par_iter()
        .map(run)
        .collect::<Result<_>>()?;

    let per_run = results.iter().map(|r| r.1).sum::<f64>() / cfg.runs as f64;
    let runs: Vec<RunOutcome> = results.into_iter().map(|r| r.0).collect();
    let decisions: Vec<bool> = runs.iter().map(|r| r.decision.is_shift()).collect();
    let fit = fit_score(&decisions)?;
    let p_values: Vec<f64> = runs.iter().map(|r| r.p_value).collect();
    let all_xx: Vec<f64> = runs
        .iter()
        .flat_map(|r| r.samples.d_xx.iter().copied())
        .collect();
    let all_xy: Vec<f64> = runs
        .iter()
        .flat_map(|r| r.samples.d_xy.iter().copied())
        .collect();
    Ok(ShiftReport {
        test: "subsample".into(),
        decision: Decision::from_shift(fit.shift),
        fit_score: fit.score,
        yes_count: fit.yes_count,
        no_count: fit.no_count,
        p5_p: percentile(&p_values, 5.0)?,
        p95_p: percentile(&p_values, 95.0)?,
        d_xx_p5: percentile(&all_xx, 5.0)?,
        d_xx_p95: percentile(&all_xx, 95.0)?,
        d_xy_p5: percentile(&all_xy, 5.0)?,
        d_xy_p95: percentile(&all_xy, 95.0)?,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        elapsed_seconds_per_run: per_run,
        runs,
        config: *cfg,
    })
}

/// How the threshold distances at the chosen noise level are combined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    #[default]
    Median,
    Mean,
}

impl Aggregator {
    pub fn apply(self, values: &[f64]) -> Result<f64> {
        match self {
            Aggregator::Median => percentile(values, 50.0),
            Aggregator::Mean if values.is_empty() => {
                Err(Error::InsufficientSamples { needed: 1, got: 0 })
            }
            Aggregator::Mean => Ok(mean(values)),
        }
    }
}

/// `size` values log-spaced from `lo` to `hi`, both included.
pub fn log_grid(lo: f64, hi: f64, size: usize) -> Vec<f64> {
    match size {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..size)
                .map(|i| {
                    if i == size - 1 {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (size - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbConfig {
    /// Gaussian noise standard deviations, strictly ascending.
    pub grid: Vec<f64>,
    /// Neighborhood size of the kNN recall criterion.
    pub criterion_k: usize,
    pub threshold: f64,
    pub samples_per_level: usize,
    pub aggregator: Aggregator,
    pub seed: RngSeed,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            grid: log_grid(0.01, 1.0, 10),
            criterion_k: 10,
            threshold: 0.80,
            samples_per_level: 3,
            aggregator: Aggregator::Median,
            seed: RngSeed::new(0),
        }
    }
}

impl PerturbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("perturbation grid is empty".into()));
        }
        if self.grid.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
            return Err(Error::Config("grid levels must be positive".into()));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("grid must be strictly ascending".into()));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::Config(format!(
                "threshold must be in (0, 1], got {}",
                self.threshold
            )));
        }
        if self.samples_per_level == 0 {
            return Err(Error::Config("need at least one sample per level".into()));
        }
        if self.criterion_k == 0 {
            return Err(Error::Config("criterion k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Criterion values at one noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub level: f64,
    /// Median over draws.
    pub criterion: f64,
    pub draws: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfigEcho {
    pub metric: Metric,
    pub perturb: PerturbConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub test: String,
    pub decision: Decision,
    /// Last noise level whose criterion met the threshold; absent when the
    /// first level already failed.
    pub p_star_level: Option<f64>,
    pub criteria_curve: Vec<CurvePoint>,
    pub d_star: f64,
    pub d_star_samples: Vec<f64>,
    pub d_xy: f64,
    pub elapsed_seconds: f64,
    pub config: PerturbationConfigEcho,
}

/// Median kNN recall of perturbed copies of `x` at each grid level, in
/// ascending order. Draw `j` reuses one noise pattern scaled to each level.
/// With `stop_at_failure` the curve ends at the first level below the
/// threshold.
pub fn criterion_curve(
    x: &EmbeddingSet,
    pcfg: &PerturbConfig,
    stop_at_failure: bool,
) -> Result<Vec<CurvePoint>> {
    pcfg.validate()?;
    let reference = self_neighbors(x, pcfg.criterion_k)?;
    let mut curve = Vec::new();
    for &level in &pcfg.grid {
        let draws = (0..pcfg.samples_per_level as u64)
            .map(|j| {
                let noisy = gaussian_perturb(x, level, pcfg.seed.derive(0).derive(j))?;
                knn_recall_against(&reference, &noisy)
            })
            .collect::<Result<Vec<f64>>>()?;
        let criterion = percentile(&draws, 50.0)?;
        curve.push(CurvePoint {
            level,
            criterion,
            draws,
        });
        if stop_at_failure && criterion < pcfg.threshold {
            break;
        }
    }
    Ok(curve)
}

/// Perturbation shift test.
///
/// Ascends the noise grid until the kNN recall of perturbed reference copies
/// drops below the threshold. The last passing level `p*` fixes the
/// threshold distance `D*` (aggregate of the metric between the reference
/// and fresh perturbations at `p*`), or `D* = 0` when no level passes. A
/// shift is reported when `metric(x, y) > D*`.
pub fn perturbation_shift_test(
    x: &EmbeddingSet,
    y: &EmbeddingSet,
    metric: &Metric,
    pcfg: &PerturbConfig,
) -> Result<PerturbationReport> {
    pcfg.validate()?;
    metric.validate()?;
    check_dims(x, y)?;
    if x.len() >= 10_000 {
        log::warn!(
            "perturbation test on {} reference points is slow; consider subsampling",
            x.len()
        );
    }
    let start = Instant::now();
    let curve = criterion_curve(x, pcfg, true)?;
    let p_star = curve
        .iter()
        .take_while(|c| c.criterion >= pcfg.threshold)
        .last()
        .map(|c| c.level);
    let metric_seed = pcfg.seed.derive(2);
    let (d_star, d_star_samples) = match p_star {
        None => {
            log::warn!(
                "kNN recall is below {} already at noise level {}; using D* = 0",
                pcfg.threshold,
                pcfg.grid[0]
            );
            (0.0, Vec::new())
        }
        Some(level) => {
            let samples = (0..pcfg.samples_per_level as u64)
                .map(|j| {
                    let noisy = gaussian_perturb(x, level, pcfg.seed.derive(1).derive(j))?;
                    metric_distance(metric, x, &noisy, metric_seed)
                })
                .collect::<Result<Vec<f64>>>()?;
            (pcfg.aggregator.apply(&samples)?, samples)
        }
    };
    let d_xy = metric_distance(metric, x, y, metric_seed)?;
    Ok(PerturbationReport {
        test: "perturbation".into(),
        decision: Decision::from_shift(d_xy > d_star),
        p_star_level: p_star,
        criteria_curve: curve,
        d_star,
        d_star_samples,
        d_xy,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        config: PerturbationConfigEcho {
            metric: *metric,
            perturb: pcfg.clone(),
        },
    })
}

const TABLE_HEADER: [&str; 7] = [
    "Shift Test",
    "Time (sec)",
    "Metric Ranges [D_xx]:[D_xy]",
    "P-Val Range",
    "Fit Score (Y:N)",
    "Shift Dec.",
    "",
];

fn render_table(cells: [String; 6]) -> String {
    let widths: Vec<usize> = (0..6)
        .map(|i| TABLE_HEADER[i].len().max(cells[i].len()))
        .collect();
    let mut out = String::new();
    for (i, h) in TABLE_HEADER[..6].iter().enumerate() {
        let _ = write!(out, "{h:<w$}  ", w = widths[i]);
    }
    out = out.trim_end().to_string();
    out.push('\n');
    for (i, c) in cells.iter().enumerate() {
        let _ = write!(out, "{c:<w$}  ", w = widths[i]);
    }
    let mut out = out.trim_end().to_string();
    out.push('\n');
    out
}

impl ShiftReport {
    /// One-row table in the layout of the usual results tables.
    pub fn to_table(&self) -> String {
        render_table([
            format!("S-{}", self.config.metric.abbreviation()),
            format!("{:.2}", self.elapsed_seconds_per_run),
            format!(
                "[{:.2} {:.2}]:[{:.2} {:.2}]",
                self.d_xx_p5, self.d_xx_p95, self.d_xy_p5, self.d_xy_p95
            ),
            format!("[{:.2} {:.2}]", self.p5_p, self.p95_p),
            format!(
                "{:.2} ({}:{})",
                self.fit_score, self.yes_count, self.no_count
            ),
            self.decision.as_str().to_string(),
        ])
    }

    pub fn csv_header() -> &'static str {
        "test,metric,decision,fit_score,yes_count,no_count,p5_p,p95_p,\
         d_xx_p5,d_xx_p95,d_xy_p5,d_xy_p95,elapsed_seconds,elapsed_seconds_per_run"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.test,
            self.config.metric.abbreviation(),
            self.decision.as_str(),
            self.fit_score,
            self.yes_count,
            self.no_count,
            self.p5_p,
            self.p95_p,
            self.d_xx_p5,
            self.d_xx_p95,
            self.d_xy_p5,
            self.d_xy_p95,
            self.elapsed_seconds,
            self.elapsed_seconds_per_run
        )
    }
}

impl PerturbationReport {
    pub fn to_table(&self) -> String {
        render_table([
            format!("P-{}", self.config.metric.abbreviation()),
            format!("{:.2}", self.elapsed_seconds),
            format!("[{:.2}]:[{:.2}]", self.d_star, self.d_xy),
            "-".into(),
            "-".into(),
            self.decision.as_str().to_string(),
        ])
    }

    pub fn csv_header() -> &'static str {
        "test,metric,decision,p_star_level,d_star,d_xy,elapsed_seconds"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.test,
            self.config.metric.abbreviation(),
            self.decision.as_str(),
            self.p_star_level.map_or(String::new(), |l| l.to_string()),
            self.d_star,
            self.d_xy,
            self.elapsed_seconds
        )
    }
}
