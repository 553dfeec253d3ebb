use std::cmp::Ordering;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::mask::MaskSpec;
use crate::error::{Error, Result};

fn check(scores: &Array2<f64>, spec: &MaskSpec, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::argument("k must be at least 1"));
    }
    if spec.positives.is_empty() {
        return Err(Error::domain("mask has no positives"));
    }
    let (n, m) = scores.dim();
    if spec.cells().any(|(i, j)| i >= n || j >= m) {
        return Err(Error::argument("masked cell outside the score matrix"));
    }
    Ok(())
}

/// Descending score, then ascending `(row, col)`.
fn rank_order(a: &(f64, (usize, usize)), b: &(f64, (usize, usize))) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Fraction of positives among the top `k` of all masked cells ranked
/// together.
pub fn hit_at_k(scores: &Array2<f64>, spec: &MaskSpec, k: usize) -> Result<f64> {
    check(scores, spec, k)?;
    let mut cells: Vec<(f64, (usize, usize))> =
        spec.cells().map(|(i, j)| (scores[[i, j]], (i, j))).collect();
    cells.sort_by(rank_order);
    let top = &cells[..k.min(cells.len())];
    let hits = spec
        .positives
        .iter()
        .filter(|p| top.iter().any(|c| c.1 == **p))
        .count();
    Ok(hits as f64 / spec.positives.len() as f64)
}

/// Fraction of positives that rank within the top `k` when each one is
/// ranked alone against all negatives.
pub fn per_positive_hit_at_k(scores: &Array2<f64>, spec: &MaskSpec, k: usize) -> Result<f64> {
    check(scores, spec, k)?;
    let pick = |cells: &[(usize, usize)]| -> Vec<(usize, usize, f64)> {
        cells.iter().map(|&(i, j)| (i, j, scores[[i, j]])).collect()
    };
    let hits = positives_in_top_k(&pick(&spec.positives), &pick(&spec.negatives), k);
    Ok(hits as f64 / spec.positives.len() as f64)
}

/// Number of `(row, col, score)` positives outranked by fewer than `k`
/// negatives.
pub(crate) fn positives_in_top_k(
    positives: &[(usize, usize, f64)],
    negatives: &[(usize, usize, f64)],
    k: usize,
) -> usize {
    positives
        .iter()
        .filter(|&&(i, j, s)| {
            let me = (s, (i, j));
            let above = negatives
                .iter()
                .filter(|&&(a, b, t)| rank_order(&(t, (a, b)), &me) == Ordering::Less)
                .count();
            above < k
        })
        .count()
}

/// Quantile of sorted data by linear interpolation between order
/// statistics at position `p·(n−1)`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub count: usize,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    /// Scores at or below q25, the median and q75.
    pub cumulative: [usize; 3],
    /// Scores in ascending order.
    pub scores: Vec<f64>,
}

impl ClassStats {
    fn new(mut scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::domain("cannot summarize an empty score list"));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::domain("scores must be finite"));
        }
        scores.sort_by(f64::total_cmp);
        let q = [quantile(&scores, 0.25), quantile(&scores, 0.5), quantile(&scores, 0.75)];
        let cumulative = q.map(|b| scores.iter().filter(|&&s| s <= b).count());
        Ok(ClassStats {
            count: scores.len(),
            q25: q[0],
            median: q[1],
            q75: q[2],
            cumulative,
            scores,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationStats {
    pub positive: ClassStats,
    pub negative: ClassStats,
}

impl SeparationStats {
    pub fn median_gap(&self) -> f64 {
        self.positive.median - self.negative.median
    }
}

pub fn separation_stats(scores: &Array2<f64>, spec: &MaskSpec) -> Result<SeparationStats> {
    check(scores, spec, 1)?;
    separation_from_scores(
        spec.positives.iter().map(|&c| scores[c]).collect(),
        spec.negatives.iter().map(|&c| scores[c]).collect(),
    )
}

pub fn separation_from_scores(positive: Vec<f64>, negative: Vec<f64>) -> Result<SeparationStats> {
    Ok(SeparationStats {
        positive: ClassStats::new(positive)?,
        negative: ClassStats::new(negative)?,
    })
}
