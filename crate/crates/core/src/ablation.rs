//! Sensitivity sweeps: positive rate of single subsample-test runs as the
//! candidate's class mixture moves away from the reference's.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{metric_distance, Metric};
use crate::distances::euclidean;
use crate::embedio::EmbeddingSet;
use crate::error::{Error, Result};
use crate::sampling::{
    apply_class_mixture, class_proportions, dirichlet_mixture, disjoint_pair, subsample,
    ClassMixture, RngSeed,
};
use crate::stats::{mean, welch_t_test};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub metric: Metric,
    pub sample_sizes: Vec<usize>,
    /// Blend weights in [0, 1] between the base mixture (0, no shift) and a
    /// Dirichlet draw (1).
    pub magnitudes: Vec<f64>,
    pub concentration: f64,
    pub reps: usize,
    pub samples_per_run: usize,
    pub alpha: f64,
    /// Mixture applied to the candidate pool at magnitude 0; all-ones when
    /// absent.
    pub base: Option<ClassMixture>,
    pub seed: RngSeed,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            metric: Metric::local_energy(Metric::DEFAULT_LOCAL_K),
            sample_sizes: vec![25, 50, 100],
            magnitudes: (0..=10).map(|i| i as f64 / 10.0).collect(),
            concentration: 1.0,
            reps: 100,
            samples_per_run: 20,
            alpha: 0.05,
            base: None,
            seed: RngSeed::new(0),
        }
    }
}

impl AblationConfig {
    pub fn validate(&self) -> Result<()> {
        self.metric.validate()?;
        if self.sample_sizes.is_empty() || self.sample_sizes.iter().any(|&m| m < 2) {
            return Err(Error::Config("sample sizes must be at least 2".into()));
        }
        if self.magnitudes.is_empty() || self.magnitudes.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::Config("magnitudes must lie in [0, 1]".into()));
        }
        if self.concentration.is_nan() || self.concentration <= 0.0 {
            return Err(Error::Config("concentration must be positive".into()));
        }
        if self.reps == 0 || self.samples_per_run < 2 {
            return Err(Error::Config(
                "need at least one rep and two samples per run".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// One (sample size, magnitude) cell, averaged over reps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub sample_size: usize,
    pub magnitude: f64,
    /// Mean L2 distance between reference and candidate class proportions.
    pub label_dist_l2: f64,
    pub positive_rate: f64,
    /// Mean reference-candidate distance.
    pub mean_metric: f64,
    /// Mean accuracy on the candidate of a nearest-centroid model fit to the
    /// reference.
    pub accuracy: f64,
}

struct RepResult {
    l2: f64,
    accuracy: f64,
    /// Per sample size: (shift, mean d_xy).
    runs: Vec<(bool, f64)>,
}

/// Sweeps magnitudes x reps x sample sizes. Each rep draws a fresh Dirichlet
/// target, builds the candidate by applying the blended mixture to
/// `candidate_pool`, and runs one subsample-test run per sample size against
/// `reference`.
pub fn ablation_sweep(
    reference: &EmbeddingSet,
    candidate_pool: &EmbeddingSet,
    cfg: &AblationConfig,
) -> Result<Vec<AblationRow>> {
    cfg.validate()?;
    let ref_labels = reference.labels().ok_or(Error::LabelsRequired)?;
    let pool_labels = candidate_pool.labels().ok_or(Error::LabelsRequired)?;
    let num_classes = ref_labels
        .iter()
        .chain(pool_labels)
        .max()
        .map_or(0, |&c| c as usize + 1);
    if num_classes < 2 {
        return Err(Error::Config("ablation needs at least two classes".into()));
    }
    let base = match &cfg.base {
        Some(b) if b.len() != num_classes => {
            return Err(Error::Config(format!(
                "base mixture has {} classes, data has {num_classes}",
                b.len()
            )))
        }
        Some(b) => b.clone(),
        None => ClassMixture::identity(num_classes),
    };
    let ref_props = class_proportions(reference, num_classes)?;
    let model = NearestCentroid::fit(reference)?;

    let jobs: Vec<(usize, usize)> = (0..cfg.magnitudes.len())
        .flat_map(|t| (0..cfg.reps).map(move |r| (t, r)))
        .collect();
    let results: Vec<RepResult> = jobs
        .par_iter()
        .map(|&(t, r)| {
            let seed = cfg.seed.derive(t as u64).derive(r as u64);
            let target = dirichlet_mixture(num_classes, cfg.concentration, seed.derive(0))?;
            let mix = base.blend(&target, cfg.magnitudes[t])?;
            let candidate = apply_class_mixture(candidate_pool, &mix, seed.derive(1))?;
            let props = class_proportions(&candidate, num_classes)?;
            let l2 = euclidean(&ref_props, &props);
            let accuracy = model.accuracy(&candidate)?;
            let runs = cfg
                .sample_sizes
                .iter()
                .enumerate()
                .map(|(s, &m)| single_run(reference, &candidate, cfg, m, seed.derive(2 + s as u64)))
                .collect::<Result<_>>()?;
            Ok(RepResult { l2, accuracy, runs })
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(cfg.magnitudes.len() * cfg.sample_sizes.len());
    for (t, &magnitude) in cfg.magnitudes.iter().enumerate() {
        let reps = &results[t * cfg.reps..(t + 1) * cfg.reps];
        let l2: Vec<f64> = reps.iter().map(|r| r.l2).collect();
        let acc: Vec<f64> = reps.iter().map(|r| r.accuracy).collect();
        for (s, &sample_size) in cfg.sample_sizes.iter().enumerate() {
            let positives = reps.iter().filter(|r| r.runs[s].0).count();
            let metric: Vec<f64> = reps.iter().map(|r| r.runs[s].1).collect();
            rows.push(AblationRow {
                sample_size,
                magnitude,
                label_dist_l2: mean(&l2),
                positive_rate: positives as f64 / cfg.reps as f64,
                mean_metric: mean(&metric),
                accuracy: mean(&acc),
            });
        }
    }
    Ok(rows)
}

/// One subsample-test run on materialized subsamples: returns the run
/// decision and the mean reference-candidate distance.
fn single_run(
    x: &EmbeddingSet,
    y: &EmbeddingSet,
    cfg: &AblationConfig,
    m: usize,
    seed: RngSeed,
) -> Result<(bool, f64)> {
    let mut d_xx = Vec::with_capacity(cfg.samples_per_run);
    let mut d_xy = Vec::with_capacity(cfg.samples_per_run);
    for s in 0..cfg.samples_per_run as u64 {
        let pair_seed = seed.derive(2 * s);
        let (a, b) = disjoint_pair(x, m, pair_seed.derive(0))?;
        d_xx.push(metric_distance(&cfg.metric, &a, &b, pair_seed.derive(1))?);
        let cross_seed = seed.derive(2 * s + 1);
        let a = subsample(x, m, cross_seed.derive(0))?;
        let b = subsample(y, m, cross_seed.derive(1))?;
        d_xy.push(metric_distance(&cfg.metric, &a, &b, cross_seed.derive(2))?);
    }
    let p = welch_t_test(&d_xx, &d_xy)?;
    let (mxx, mxy) = (mean(&d_xx), mean(&d_xy));
    Ok((p < cfg.alpha && mxy > mxx, mxy))
}

pub fn ablation_csv_header() -> &'static str {
    "sample_size,label_dist_l2,positive_rate,mean_metric"
}

pub fn ablation_csv_row(row: &AblationRow) -> String {
    format!(
        "{},{},{},{}",
        row.sample_size, row.label_dist_l2, row.positive_rate, row.mean_metric
    )
}

/// Gaussian class-conditional model with a shared isotropic variance:
/// predicts `argmax_c log prior_c - |x - mu_c|^2 / (2 var)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NearestCentroid {
    centroids: Vec<Vec<f64>>,
    log_priors: Vec<f64>,
    variance: f64,
}

impl NearestCentroid {
    pub fn fit(set: &EmbeddingSet) -> Result<Self> {
        let labels = set.labels().ok_or(Error::LabelsRequired)?;
        let classes = labels.iter().max().map_or(0, |&c| c as usize + 1);
        let d = set.dim();
        let mut sums = vec![vec![0.0; d]; classes];
        let mut counts = vec![0usize; classes];
        for (row, &l) in set.rows().zip(labels) {
            counts[l as usize] += 1;
            for (s, v) in sums[l as usize].iter_mut().zip(row) {
                *s += v;
            }
        }
        let centroids: Vec<Vec<f64>> = sums
            .into_iter()
            .zip(&counts)
            .map(|(s, &c)| s.into_iter().map(|v| v / c.max(1) as f64).collect())
            .collect();
        let sq: f64 = set
            .rows()
            .zip(labels)
            .map(|(row, &l)| euclidean(row, &centroids[l as usize]).powi(2))
            .sum();
        let variance = (sq / (set.len() * d) as f64).max(f64::MIN_POSITIVE);
        let log_priors = counts
            .iter()
            .map(|&c| {
                if c == 0 {
                    f64::NEG_INFINITY
                } else {
                    (c as f64 / set.len() as f64).ln()
                }
            })
            .collect();
        Ok(Self {
            centroids,
            log_priors,
            variance,
        })
    }

    pub fn predict(&self, row: &[f64]) -> u32 {
        let mut best = (f64::NEG_INFINITY, 0);
        for (c, mu) in self.centroids.iter().enumerate() {
            let score = self.log_priors[c] - euclidean(row, mu).powi(2) / (2.0 * self.variance);
            if score > best.0 {
                best = (score, c as u32);
            }
        }
        best.1
    }

    pub fn accuracy(&self, set: &EmbeddingSet) -> Result<f64> {
        let labels = set.labels().ok_or(Error::LabelsRequired)?;
        let hits = set
            .rows()
            .zip(labels)
            .filter(|(row, &l)| self.predict(row) == l)
            .count();
        Ok(hits as f64 / set.len() as f64)
    }
}
