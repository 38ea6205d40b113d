//! Seeded subsampling, synthetic class shifts, synthetic clusters and
//! Gaussian perturbation.
//!
//! Every function here is a pure function of its inputs and an [`RngSeed`].
//! Seeds are split into independent sub-streams with [`RngSeed::derive`], so
//! work fanned out across threads draws the same numbers as a serial loop.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::embedio::EmbeddingSet;
use crate::error::{Error, Result};

/// A ChaCha key plus a stream id. Two seeds that differ only in `stream`
/// produce unrelated sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub const fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    /// A child seed for sub-task `tag`. Derivation is deterministic and
    /// chains: `s.derive(a).derive(b)` names one fixed stream.
    pub fn derive(self, tag: u64) -> Self {
        Self {
            seed: self.seed,
            stream: splitmix64(self.stream ^ splitmix64(tag.wrapping_add(0x9E37_79B9_7F4A_7C15))),
        }
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-class keep fractions, indexed by label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMixture {
    proportions: Vec<f64>,
}

impl ClassMixture {
    pub fn new(proportions: Vec<f64>) -> Result<Self> {
        if let Some(bad) = proportions.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Config(format!(
                "class fraction {bad} is outside [0, 1]"
            )));
        }
        if !proportions.iter().any(|&p| p > 0.0) {
            return Err(Error::Config("every class fraction is zero".into()));
        }
        Ok(Self { proportions })
    }

    /// Every class kept in full.
    pub fn identity(num_classes: usize) -> Self {
        Self {
            proportions: vec![1.0; num_classes],
        }
    }

    pub fn proportions(&self) -> &[f64] {
        &self.proportions
    }

    pub fn len(&self) -> usize {
        self.proportions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proportions.is_empty()
    }

    /// Linear blend `(1 - t) * self + t * other`, `t` in `[0, 1]`.
    pub fn blend(&self, other: &ClassMixture, t: f64) -> Result<ClassMixture> {
        if self.len() != other.len() {
            return Err(Error::Config(format!(
                "cannot blend mixtures over {} and {} classes",
                self.len(),
                other.len()
            )));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Config(format!("blend weight {t} is outside [0, 1]")));
        }
        let proportions = self
            .proportions
            .iter()
            .zip(&other.proportions)
            .map(|(a, b)| ((1.0 - t) * a + t * b).clamp(0.0, 1.0))
            .collect();
        ClassMixture::new(proportions)
    }
}

/// Indices of `m` distinct rows out of `n`, uniformly at random.
pub fn subsample_indices(n: usize, m: usize, rng: RngSeed) -> Result<Vec<usize>> {
    if m > n {
        return Err(Error::SampleTooLarge {
            requested: m,
            available: n,
        });
    }
    if m == 0 {
        return Err(Error::Config("subsample size must be at least 1".into()));
    }
    Ok(index::sample(&mut rng.rng(), n, m).into_vec())
}

/// `m` distinct rows drawn uniformly without replacement, labels attached.
pub fn subsample(set: &EmbeddingSet, m: usize, rng: RngSeed) -> Result<EmbeddingSet> {
    let idx = subsample_indices(set.len(), m, rng)?;
    Ok(set.select(&idx))
}

/// Two index sets of size `m` with no index in common.
pub fn disjoint_pair_indices(n: usize, m: usize, rng: RngSeed) -> Result<(Vec<usize>, Vec<usize>)> {
    let total = m.saturating_mul(2);
    if total > n {
        return Err(Error::SampleTooLarge {
            requested: total,
            available: n,
        });
    }
    let mut idx = subsample_indices(n, total, rng)?;
    let second = idx.split_off(m);
    Ok((idx, second))
}

/// Two size-`m` subsamples of `set` that share no row.
pub fn disjoint_pair(
    set: &EmbeddingSet,
    m: usize,
    rng: RngSeed,
) -> Result<(EmbeddingSet, EmbeddingSet)> {
    let (a, b) = disjoint_pair_indices(set.len(), m, rng)?;
    Ok((set.select(&a), set.select(&b)))
}

/// Splits `set` into two random disjoint halves (the first gets the extra
/// row when `n` is odd). Row order inside each half follows the input.
///
/// Labeled sets are split within each class, so class counts of the two
/// halves differ by at most one.
pub fn split_halves(set: &EmbeddingSet, rng: RngSeed) -> Result<(EmbeddingSet, EmbeddingSet)> {
    if set.len() < 2 {
        return Err(Error::SampleTooLarge {
            requested: 2,
            available: set.len(),
        });
    }
    let mut perm = index::sample(&mut rng.rng(), set.len(), set.len()).into_vec();
    if let Some(labels) = set.labels() {
        perm.sort_by_key(|&i| labels[i]);
    }
    let (mut first, mut second): (Vec<usize>, Vec<usize>) = (Vec::new(), Vec::new());
    for (pos, i) in perm.into_iter().enumerate() {
        if pos % 2 == 0 {
            first.push(i);
        } else {
            second.push(i);
        }
    }
    first.sort_unstable();
    second.sort_unstable();
    Ok((set.select(&first), set.select(&second)))
}

/// Number of rows a class of `count` points keeps under `fraction`.
///
/// `fraction * count` is rounded up, with a small slack so that products such
/// as `0.1 * 70` that land a rounding error above an integer do not gain a
/// point.
pub fn kept_count(fraction: f64, count: usize) -> usize {
    let exact = fraction * count as f64;
    ((exact - 1e-9).ceil().max(0.0) as usize).min(count)
}

/// Keeps `ceil(fraction_c * count_c)` uniformly chosen rows of each class.
/// Surviving rows keep their original relative order.
pub fn apply_class_mixture(
    set: &EmbeddingSet,
    mix: &ClassMixture,
    rng: RngSeed,
) -> Result<EmbeddingSet> {
    let labels = set.labels().ok_or(Error::LabelsRequired)?;
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= mix.len()) {
        return Err(Error::Config(format!(
            "label {bad} has no entry in a mixture over {} classes",
            mix.len()
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); mix.len()];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    let mut keep = Vec::new();
    for (c, members) in by_class.iter().enumerate() {
        let k = kept_count(mix.proportions()[c], members.len());
        if k == 0 {
            continue;
        }
        let chosen = index::sample(&mut rng.derive(c as u64).rng(), members.len(), k);
        keep.extend(chosen.iter().map(|j| members[j]));
    }
    if keep.is_empty() {
        return Err(Error::InvalidSplit(
            "class mixture removes every row".into(),
        ));
    }
    keep.sort_unstable();
    Ok(set.select(&keep))
}

/// Rows whose label is in `classes_a`, and rows whose label is in
/// `classes_b`. The class sets must be disjoint and both sides non-empty.
pub fn domain_split(
    set: &EmbeddingSet,
    classes_a: &[u32],
    classes_b: &[u32],
) -> Result<(EmbeddingSet, EmbeddingSet)> {
    let labels = set.labels().ok_or(Error::LabelsRequired)?;
    if let Some(c) = classes_a.iter().find(|c| classes_b.contains(c)) {
        return Err(Error::InvalidSplit(format!("class {c} is on both sides")));
    }
    let a: Vec<usize> = (0..set.len())
        .filter(|&i| classes_a.contains(&labels[i]))
        .collect();
    let b: Vec<usize> = (0..set.len())
        .filter(|&i| classes_b.contains(&labels[i]))
        .collect();
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidSplit(format!(
            "split leaves {} and {} rows; both sides need data",
            a.len(),
            b.len()
        )));
    }
    Ok((set.select(&a), set.select(&b)))
}

/// Randomly divides `classes` into a group of `group_a_size` labels and the
/// remainder. Both groups come back sorted.
pub fn random_label_groups(
    classes: &[u32],
    group_a_size: usize,
    rng: RngSeed,
) -> Result<(Vec<u32>, Vec<u32>)> {
    if group_a_size == 0 || group_a_size >= classes.len() {
        return Err(Error::InvalidSplit(format!(
            "group of {group_a_size} out of {} classes leaves an empty side",
            classes.len()
        )));
    }
    let chosen = index::sample(&mut rng.rng(), classes.len(), group_a_size);
    let mut a: Vec<u32> = chosen.iter().map(|i| classes[i]).collect();
    let mut b: Vec<u32> = classes.iter().copied().filter(|c| !a.contains(c)).collect();
    a.sort_unstable();
    b.sort_unstable();
    Ok((a, b))
}

/// Subpopulation shift: the reference keeps `fraction` of each class in
/// `group_a`, the candidate keeps `fraction` of each class outside it; all
/// other classes stay whole.
pub fn subpopulation_shift(
    reference: &EmbeddingSet,
    candidate: &EmbeddingSet,
    group_a: &[u32],
    fraction: f64,
    rng: RngSeed,
) -> Result<(EmbeddingSet, EmbeddingSet)> {
    let num_classes = reference
        .labels()
        .ok_or(Error::LabelsRequired)?
        .iter()
        .chain(candidate.labels().ok_or(Error::LabelsRequired)?)
        .max()
        .map_or(0, |&m| m as usize + 1);
    let mix_for = |in_a: bool| {
        let p = (0..num_classes)
            .map(|c| {
                if group_a.contains(&(c as u32)) == in_a {
                    fraction
                } else {
                    1.0
                }
            })
            .collect();
        ClassMixture::new(p)
    };
    let reference = apply_class_mixture(reference, &mix_for(true)?, rng.derive(0))?;
    let candidate = apply_class_mixture(candidate, &mix_for(false)?, rng.derive(1))?;
    Ok((reference, candidate))
}

/// Symmetric Dirichlet draw rescaled so the largest fraction is exactly 1.
pub fn dirichlet_mixture(
    num_classes: usize,
    concentration: f64,
    rng: RngSeed,
) -> Result<ClassMixture> {
    if num_classes < 2 {
        return Err(Error::Config("a mixture needs at least two classes".into()));
    }
    if !(concentration > 0.0 && concentration.is_finite()) {
        return Err(Error::Config(format!(
            "concentration must be positive, got {concentration}"
        )));
    }
    let gamma = Gamma::new(concentration, 1.0)
        .map_err(|e| Error::Config(format!("gamma({concentration}): {e}")))?;
    let mut rng = rng.rng();
    let mut draws: Vec<f64> = (0..num_classes).map(|_| gamma.sample(&mut rng)).collect();
    let max = draws.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        for v in &mut draws {
            *v /= max;
        }
        // division can leave the arg-max a hair below 1
        if let Some(top) = draws.iter_mut().max_by(|a, b| a.total_cmp(b)) {
            *top = 1.0;
        }
    } else {
        // tiny concentrations can underflow every gamma draw
        draws.iter_mut().for_each(|v| *v = 0.0);
        draws[rng.random_range(0..num_classes)] = 1.0;
    }
    ClassMixture::new(draws)
}

/// Class-proportion vector (summing to 1) of a labeled set over
/// `num_classes` classes.
pub fn class_proportions(set: &EmbeddingSet, num_classes: usize) -> Result<Vec<f64>> {
    let labels = set.labels().ok_or(Error::LabelsRequired)?;
    let mut counts = vec![0.0; num_classes];
    for &l in labels {
        let slot = counts
            .get_mut(l as usize)
            .ok_or_else(|| Error::Config(format!("label {l} exceeds {num_classes} classes")))?;
        *slot += 1.0;
    }
    let n = labels.len() as f64;
    Ok(counts.into_iter().map(|c| c / n).collect())
}

/// `num_classes * per_class` points; class `c` is a unit-variance isotropic
/// Gaussian centred at `separation * e_(c mod d)`. Rows are grouped by class.
pub fn gaussian_clusters(
    num_classes: usize,
    per_class: usize,
    d: usize,
    separation: f64,
    rng: RngSeed,
) -> Result<EmbeddingSet> {
    if num_classes == 0 || per_class == 0 || d == 0 {
        return Err(Error::Config(
            "classes, points per class and dimension must all be at least 1".into(),
        ));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::Config(format!(
            "separation must be non-negative, got {separation}"
        )));
    }
    let n = num_classes * per_class;
    let mut rng = rng.rng();
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for c in 0..num_classes {
        for _ in 0..per_class {
            let start = data.len();
            data.extend((0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
            data[start + c % d] += separation;
            labels.push(c as u32);
        }
    }
    EmbeddingSet::new("clusters", n, d, data, Some(labels))
}

/// Adds i.i.d. `N(0, sigma^2)` noise to every coordinate. Row `i` of the
/// output is the perturbed row `i`; rows are not re-normalized.
///
/// For a fixed `rng` the noise directions do not depend on `sigma`, so a
/// sweep over noise levels with one seed scales a single noise draw.
pub fn gaussian_perturb(set: &EmbeddingSet, sigma: f64, rng: RngSeed) -> Result<EmbeddingSet> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!(
            "noise level must be non-negative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(set.clone());
    }
    let mut rng = rng.rng();
    let data = set
        .data()
        .iter()
        .map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let out = EmbeddingSet::new(
        set.name(),
        set.len(),
        set.dim(),
        data,
        set.labels().map(<[u32]>::to_vec),
    )?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> EmbeddingSet {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        EmbeddingSet::from_rows("line", &rows)
            .unwrap()
            .with_labels((0..n as u32).map(|i| i % 3).collect())
            .unwrap()
    }

    #[test]
    fn derived_streams_differ_and_repeat() {
        let s = RngSeed::new(7);
        assert_eq!(s.derive(1), s.derive(1));
        assert_ne!(s.derive(1), s.derive(2));
        assert_ne!(s.derive(1).derive(2), s.derive(2).derive(1));
        let a: u64 = s.derive(3).rng().random();
        let b: u64 = s.derive(3).rng().random();
        assert_eq!(a, b);
    }

    #[test]
    fn full_draw_is_a_permutation() {
        let set = line(9);
        let sub = subsample(&set, 9, RngSeed::new(1)).unwrap();
        let mut vals: Vec<f64> = sub.data().to_vec();
        vals.sort_by(f64::total_cmp);
        assert_eq!(vals, set.data());
    }

    #[test]
    fn labeled_halves_keep_class_counts() {
        let set = line(61);
        let (a, b) = split_halves(&set, RngSeed::new(5)).unwrap();
        assert_eq!((a.len(), b.len()), (31, 30));
        for class in 0..3 {
            let count =
                |s: &EmbeddingSet| s.labels().unwrap().iter().filter(|&&l| l == class).count();
            assert!(count(&a).abs_diff(count(&b)) <= 1);
        }
        let mut all: Vec<f64> = a.data().iter().chain(b.data()).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, set.data());
    }

    #[test]
    fn subsample_is_deterministic() {
        let set = line(50);
        let a = subsample(&set, 10, RngSeed::new(3)).unwrap();
        let b = subsample(&set, 10, RngSeed::new(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oversized_subsample_fails() {
        let err = subsample(&line(3), 4, RngSeed::new(0)).unwrap_err();
        assert!(matches!(err, Error::SampleTooLarge { .. }));
    }

    #[test]
    fn subsample_keeps_point_label_pairs() {
        let set = line(30);
        let sub = subsample(&set, 12, RngSeed::new(5)).unwrap();
        for (row, &label) in sub.rows().zip(sub.labels().unwrap()) {
            assert_eq!(row[0] as u32 % 3, label);
        }
    }

    #[test]
    fn single_draws_are_uniform() {
        // chi-square oracle: each of 4 rows expected 2500 times in 10_000
        let mut counts = [0usize; 4];
        let base = RngSeed::new(11);
        for t in 0..10_000 {
            let idx = subsample_indices(4, 1, base.derive(t)).unwrap();
            counts[idx[0]] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - 2500.0).powi(2) / 2500.0)
            .sum();
        // 3 degrees of freedom, p = 0.001 critical value
        assert!(chi2 < 16.27, "chi2 = {chi2}, counts = {counts:?}");
        for c in counts {
            let f = c as f64 / 10_000.0;
            assert!((0.22..=0.28).contains(&f), "frequency {f}");
        }
    }

    #[test]
    fn disjoint_pair_partitions_when_exact() {
        let (a, b) = disjoint_pair_indices(10, 5, RngSeed::new(2)).unwrap();
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn disjoint_pairs_never_overlap_and_cover() {
        let mut seen = [false; 100];
        let base = RngSeed::new(4);
        for t in 0..200 {
            let (a, b) = disjoint_pair_indices(100, 10, base.derive(t)).unwrap();
            assert!(a.iter().all(|i| !b.contains(i)));
            for i in a.into_iter().chain(b) {
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn disjoint_pair_needs_two_m_rows() {
        assert!(matches!(
            disjoint_pair_indices(9, 5, RngSeed::new(0)),
            Err(Error::SampleTooLarge { .. })
        ));
    }

    #[test]
    fn kept_count_rounds_up_without_float_creep() {
        assert_eq!(kept_count(0.1, 100), 10);
        assert_eq!(kept_count(0.1, 70), 7);
        assert_eq!(kept_count(0.1, 71), 8);
        assert_eq!(kept_count(0.0, 50), 0);
        assert_eq!(kept_count(1.0, 50), 50);
    }

    #[test]
    fn class_mixture_counts_are_exact() {
        let rows: Vec<Vec<f64>> = (0..300).map(|i| vec![i as f64]).collect();
        let set = EmbeddingSet::from_rows("s", &rows)
            .unwrap()
            .with_labels((0..300).map(|i| (i / 100) as u32).collect())
            .unwrap();
        let mix = ClassMixture::new(vec![0.1, 1.0, 0.0]).unwrap();
        let out = apply_class_mixture(&set, &mix, RngSeed::new(9)).unwrap();
        let labels = out.labels().unwrap();
        assert_eq!(labels.iter().filter(|&&l| l == 0).count(), 10);
        assert_eq!(labels.iter().filter(|&&l| l == 1).count(), 100);
        assert_eq!(labels.iter().filter(|&&l| l == 2).count(), 0);
    }

    #[test]
    fn identity_mixture_keeps_everything() {
        let set = line(20);
        let out = apply_class_mixture(&set, &ClassMixture::identity(3), RngSeed::new(1)).unwrap();
        assert_eq!(out, set);
    }

    #[test]
    fn mixture_requires_labels() {
        let set = EmbeddingSet::from_rows("s", &[vec![0.0]]).unwrap();
        let err = apply_class_mixture(&set, &ClassMixture::identity(1), RngSeed::new(0));
        assert!(matches!(err, Err(Error::LabelsRequired)));
    }

    #[test]
    fn domain_split_separates_labels() {
        let set = gaussian_clusters(10, 5, 4, 1.0, RngSeed::new(0)).unwrap();
        let (a, b) = domain_split(&set, &[0, 1, 2, 3, 4], &[5, 6, 7, 8, 9]).unwrap();
        assert!(a.labels().unwrap().iter().all(|&l| l < 5));
        assert!(b.labels().unwrap().iter().all(|&l| l >= 5));
        assert!(a.len() + b.len() <= set.len());
    }

    #[test]
    fn domain_split_rejects_overlap_and_empty_side() {
        let set = gaussian_clusters(4, 3, 2, 1.0, RngSeed::new(0)).unwrap();
        assert!(matches!(
            domain_split(&set, &[0, 1], &[1, 2]),
            Err(Error::InvalidSplit(_))
        ));
        assert!(matches!(
            domain_split(&set, &[0, 1, 2, 3], &[]),
            Err(Error::InvalidSplit(_))
        ));
    }

    #[test]
    fn label_groups_partition_classes() {
        let classes: Vec<u32> = (0..10).collect();
        let (a, b) = random_label_groups(&classes, 4, RngSeed::new(8)).unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(b.len(), 6);
        let mut all: Vec<u32> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        assert_eq!(all, classes);
    }

    #[test]
    fn dirichlet_max_is_one_and_repeatable() {
        for t in 0..20 {
            let seed = RngSeed::new(t);
            let mix = dirichlet_mixture(10, 0.5, seed).unwrap();
            assert_eq!(mix.proportions().iter().copied().fold(0.0, f64::max), 1.0);
            assert_eq!(mix, dirichlet_mixture(10, 0.5, seed).unwrap());
        }
    }

    #[test]
    fn dirichlet_concentrates_for_large_alpha() {
        for t in 0..100 {
            let mix = dirichlet_mixture(10, 1e6, RngSeed::new(1000 + t)).unwrap();
            let min = mix.proportions().iter().copied().fold(1.0, f64::min);
            assert!(1.0 - min < 0.05, "spread {}", 1.0 - min);
        }
    }

    #[test]
    fn tiny_concentration_still_yields_a_mixture() {
        let mix = dirichlet_mixture(5, 1e-300, RngSeed::new(0)).unwrap();
        assert_eq!(mix.proportions().iter().copied().fold(0.0, f64::max), 1.0);
    }

    #[test]
    fn clusters_have_expected_shape() {
        let set = gaussian_clusters(3, 7, 5, 2.0, RngSeed::new(0)).unwrap();
        assert_eq!(set.len(), 21);
        assert_eq!(set.dim(), 5);
        assert_eq!(set.classes().unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn well_separated_clusters_are_one_nn_separable() {
        let train = gaussian_clusters(5, 40, 16, 10.0, RngSeed::new(1)).unwrap();
        let test = gaussian_clusters(5, 40, 16, 10.0, RngSeed::new(2)).unwrap();
        let tl = train.labels().unwrap();
        let mut correct = 0;
        for (row, &label) in test.rows().zip(test.labels().unwrap()) {
            let nearest = (0..train.len())
                .min_by(|&a, &b| {
                    let da: f64 = train
                        .row(a)
                        .iter()
                        .zip(row)
                        .map(|(x, y)| (x - y).powi(2))
                        .sum();
                    let db: f64 = train
                        .row(b)
                        .iter()
                        .zip(row)
                        .map(|(x, y)| (x - y).powi(2))
                        .sum();
                    da.total_cmp(&db)
                })
                .unwrap();
            correct += usize::from(tl[nearest] == label);
        }
        assert!(correct as f64 / test.len() as f64 > 0.99);
    }

    #[test]
    fn zero_noise_is_identity() {
        let set = line(5);
        assert_eq!(gaussian_perturb(&set, 0.0, RngSeed::new(0)).unwrap(), set);
    }

    #[test]
    fn perturbation_displacement_matches_chi_mean() {
        let n = 10_000;
        let d = 128;
        let sigma = 0.3;
        let set = EmbeddingSet::new("z", n, d, vec![0.0; n * d], None).unwrap();
        let noisy = gaussian_perturb(&set, sigma, RngSeed::new(6)).unwrap();
        let mean_norm = noisy
            .rows()
            .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
            .sum::<f64>()
            / n as f64;
        // E||sigma Z|| = sigma * sqrt(2) * Gamma((d+1)/2) / Gamma(d/2)
        let ln_ratio = statrs::function::gamma::ln_gamma((d as f64 + 1.0) / 2.0)
            - statrs::function::gamma::ln_gamma(d as f64 / 2.0);
        let chi_mean = sigma * 2f64.sqrt() * ln_ratio.exp();
        assert!((mean_norm - chi_mean).abs() / chi_mean < 0.05);
        assert!((mean_norm - sigma * (d as f64).sqrt()).abs() / (sigma * (d as f64).sqrt()) < 0.05);
    }

    #[test]
    fn perturbation_keeps_labels_and_order() {
        let set = line(6);
        let noisy = gaussian_perturb(&set, 1e-9, RngSeed::new(0)).unwrap();
        assert_eq!(noisy.labels(), set.labels());
        for (a, b) in noisy.rows().zip(set.rows()) {
            assert!((a[0] - b[0]).abs() < 1e-6);
        }
    }

    #[test]
    fn one_seed_scales_one_noise_draw() {
        let set = line(4);
        let seed = RngSeed::new(12);
        let small = gaussian_perturb(&set, 0.1, seed).unwrap();
        let large = gaussian_perturb(&set, 0.2, seed).unwrap();
        for i in 0..4 {
            let ds = small.row(i)[0] - set.row(i)[0];
            let dl = large.row(i)[0] - set.row(i)[0];
            assert!((2.0 * ds - dl).abs() < 1e-12);
        }
    }
}
