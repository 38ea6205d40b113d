//! Small statistics used by the decision rules.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::distances::compensated_sum;
use crate::error::{Error, Result};

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = compensated_sum(v.iter().copied()) / n;
    let var = compensated_sum(v.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0);
    (mean, var)
}

/// Two-sided Welch t-test p-value with Welch-Satterthwaite degrees of
/// freedom.
///
/// When both samples have zero variance the p-value is 1 for equal means and
/// 0 otherwise.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<f64> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                got: s.len(),
            });
        }
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        return Ok(if ma == mb { 1.0 } else { 0.0 });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::Config(format!("t distribution with df {df}: {e}")))?;
    Ok((2.0 * dist.sf(t.abs())).clamp(0.0, 1.0))
}

/// Linear-interpolation percentile: position `q/100 * (n-1)` between sorted
/// order statistics.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(Error::Config(format!("percentile {q} is outside [0, 100]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Agreement of run decisions with the majority.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitScore {
    pub score: f64,
    pub yes_count: usize,
    pub no_count: usize,
    /// Majority decision; an exact tie counts as a shift.
    pub shift: bool,
}

pub fn fit_score(decisions: &[bool]) -> Result<FitScore> {
    if decisions.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let yes_count = decisions.iter().filter(|&&d| d).count();
    let no_count = decisions.len() - yes_count;
    Ok(FitScore {
        score: yes_count.max(no_count) as f64 / decisions.len() as f64,
        yes_count,
        no_count,
        shift: yes_count >= no_count,
    })
}

pub fn mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Pearson correlation; NaN when either input is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let (ma, mb) = (mean(a), mean(b));
    let cov = compensated_sum(a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)));
    let va = compensated_sum(a.iter().map(|x| (x - ma) * (x - ma)));
    let vb = compensated_sum(b.iter().map(|y| (y - mb) * (y - mb)));
    cov / (va * vb).sqrt()
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut out = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            out[i] = rank;
        }
        start = end;
    }
    out
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&ranks(a), &ranks(b))
}
