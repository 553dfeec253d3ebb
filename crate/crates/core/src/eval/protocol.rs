use std::collections::BTreeMap;
use std::io::Write;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mask::mask_cells;
use super::metrics::{positives_in_top_k, separation_from_scores, SeparationStats};
use crate::binary::{ensemble_fit, EnsembleConfig};
use crate::error::{Error, Result};
use crate::matrix::{Cell, MaskedBinaryMatrix};
use crate::seed;

/// Anything that scores every cell of a partially observed matrix.
pub trait LinkPredictor: Sync {
    fn predict(&self, masked: &MaskedBinaryMatrix, seed: u64) -> Result<Array2<f64>>;
}

impl LinkPredictor for EnsembleConfig {
    fn predict(&self, masked: &MaskedBinaryMatrix, seed: u64) -> Result<Array2<f64>> {
        Ok(ensemble_fit(masked, self, seed)?.scores.into_inner())
    }
}

impl<F> LinkPredictor for F
where
    F: Fn(&MaskedBinaryMatrix, u64) -> Result<Array2<f64>> + Sync,
{
    fn predict(&self, masked: &MaskedBinaryMatrix, seed: u64) -> Result<Array2<f64>> {
        self(masked, seed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvOptions {
    pub folds: usize,
    pub ks: Vec<usize>,
    /// Negatives sampled per positive.
    pub negative_ratio: usize,
    /// Mask one target column at a time instead of all of them together.
    pub per_target: bool,
    pub negative_pool: NegativePool,
}

/// Where negatives are sampled from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativePool {
    /// Zero-cells of the target rows.
    #[default]
    TargetRows,
    /// Zero-cells anywhere in the matrix.
    All,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            folds: 3,
            ks: vec![1, 3],
            negative_ratio: 1,
            per_target: true,
            negative_pool: NegativePool::TargetRows,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub hit_at: BTreeMap<usize, f64>,
    /// `(row, col, score)` of every masked positive.
    pub positives: Vec<(usize, usize, f64)>,
    pub negatives: Vec<(usize, usize, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub folds: usize,
    pub seed: u64,
    pub negative_ratio: usize,
    pub per_target: bool,
    pub negative_pool: NegativePool,
    pub target_rows: Vec<String>,
    pub target_cols: Vec<String>,
    /// Mean over folds.
    pub hit_at: BTreeMap<usize, f64>,
    /// `mean ± 1.96·sd/√folds`, clipped to [0, 1].
    pub ci95: BTreeMap<usize, (f64, f64)>,
    pub per_fold: BTreeMap<usize, Vec<f64>>,
    pub fold_results: Vec<FoldResult>,
    /// Scores of all masked cells pooled over folds.
    pub separation: SeparationStats,
}

/// Repeated masked-link evaluation. In every fold the known links of the
/// target columns within the target rows are hidden together with freshly
/// sampled zero-cells, the predictor is refitted, and each hidden link is
/// ranked against the hidden zero-cells.
pub fn cross_validate(
    t: &MaskedBinaryMatrix,
    target_rows: &[usize],
    target_cols: &[usize],
    predictor: &impl LinkPredictor,
    opts: &CvOptions,
    seed: u64,
) -> Result<EvalReport> {
    if opts.folds < 2 {
        return Err(Error::argument("folds must be at least 2"));
    }
    if opts.ks.is_empty() || opts.ks.contains(&0) {
        return Err(Error::argument("ks must be non-empty and positive"));
    }
    if opts.negative_ratio == 0 {
        return Err(Error::argument("negative_ratio must be at least 1"));
    }
    check_indices(t, target_rows, target_cols)?;
    let positives_for = |cols: &[usize]| -> Vec<(usize, usize)> {
        let mut cells: Vec<(usize, usize)> = target_rows
            .iter()
            .flat_map(|&i| cols.iter().map(move |&j| (i, j)))
            .filter(|&(i, j)| t.get(i, j) == Cell::One)
            .collect();
        cells.sort_unstable();
        cells.dedup();
        cells
    };
    let groups: Vec<Vec<(usize, usize)>> = if opts.per_target {
        target_cols.iter().map(|&j| positives_for(&[j])).filter(|g| !g.is_empty()).collect()
    } else {
        vec![positives_for(target_cols)]
    };
    if groups.iter().all(|g| g.is_empty()) {
        return Err(Error::domain("no known links in the target rows and columns"));
    }

    let jobs: Vec<(usize, usize)> = (0..opts.folds)
        .flat_map(|f| (0..groups.len()).map(move |g| (f, g)))
        .collect();
    type Scored = (Vec<(usize, usize, f64)>, Vec<(usize, usize, f64)>);
    let scored: Vec<Scored> = jobs
        .par_iter()
        .map(|&(f, g)| -> Result<Scored> {
            let group_seed = seed::derive(seed, &[f as u64, g as u64]);
            let (masked, spec) = mask_cells(
                t,
                &groups[g],
                opts.negative_ratio,
                match opts.negative_pool {
                    NegativePool::TargetRows => Some(target_rows),
                    NegativePool::All => None,
                },
                seed::derive(group_seed, &[0]),
            )?;
            let scores = predictor.predict(&masked, seed::derive(group_seed, &[1]))?;
            if scores.dim() != (t.rows(), t.cols()) {
                return Err(Error::argument("predictor returned scores of the wrong shape"));
            }
            let pick = |cells: &[(usize, usize)]| {
                cells.iter().map(|&(i, j)| (i, j, scores[[i, j]])).collect::<Vec<_>>()
            };
            Ok((pick(&spec.positives), pick(&spec.negatives)))
        })
        .collect::<Result<_>>()?;

    let mut fold_results = Vec::with_capacity(opts.folds);
    for f in 0..opts.folds {
        let parts = &scored[f * groups.len()..(f + 1) * groups.len()];
        let mut hit_at = BTreeMap::new();
        for &k in &opts.ks {
            let mut hits = 0;
            let mut total = 0usize;
            for (pos, neg) in parts {
                hits += positives_in_top_k(pos, neg, k);
                total += pos.len();
            }
            hit_at.insert(k, hits as f64 / total as f64);
        }
        fold_results.push(FoldResult {
            fold: f,
            hit_at,
            positives: parts.iter().flat_map(|p| p.0.iter().copied()).collect(),
            negatives: parts.iter().flat_map(|p| p.1.iter().copied()).collect(),
        });
    }

    let mut hit_at = BTreeMap::new();
    let mut ci95 = BTreeMap::new();
    let mut per_fold = BTreeMap::new();
    for &k in &opts.ks {
        let values: Vec<f64> = fold_results.iter().map(|r| r.hit_at[&k]).collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let half = 1.96 * var.sqrt() / n.sqrt();
        hit_at.insert(k, mean);
        ci95.insert(k, ((mean - half).max(0.0), (mean + half).min(1.0)));
        per_fold.insert(k, values);
    }
    let separation = separation_from_scores(
        fold_results.iter().flat_map(|r| r.positives.iter().map(|c| c.2)).collect(),
        fold_results.iter().flat_map(|r| r.negatives.iter().map(|c| c.2)).collect(),
    )?;
    Ok(EvalReport {
        folds: opts.folds,
        seed,
        negative_ratio: opts.negative_ratio,
        per_target: opts.per_target,
        negative_pool: opts.negative_pool,
        target_rows: target_rows.iter().map(|&i| t.row_labels()[i].clone()).collect(),
        target_cols: target_cols.iter().map(|&j| t.col_labels()[j].clone()).collect(),
        hit_at,
        ci95,
        per_fold,
        fold_results,
        separation,
    })
}

fn check_indices(t: &MaskedBinaryMatrix, rows: &[usize], cols: &[usize]) -> Result<()> {
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::argument("target rows and columns must be non-empty"));
    }
    if rows.iter().any(|&i| i >= t.rows()) || cols.iter().any(|&j| j >= t.cols()) {
        return Err(Error::argument("target index out of range"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub material: String,
    /// Caller-assigned group, e.g. known versus decoy.
    pub set: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingTable {
    pub rows: Vec<RankingRow>,
}

/// Hides every known link of the held-out columns inside the target rows,
/// refits, and ranks the held-out columns by their mean score over the
/// target rows. Ties are ordered by material label.
pub fn rank_candidates(
    t: &MaskedBinaryMatrix,
    target_rows: &[usize],
    held_out: &[(usize, String)],
    predictor: &impl LinkPredictor,
    seed: u64,
) -> Result<RankingTable> {
    let cols: Vec<usize> = held_out.iter().map(|h| h.0).collect();
    check_indices(t, target_rows, &cols)?;
    let hidden: Vec<(usize, usize)> = target_rows
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| (i, j)))
        .filter(|&(i, j)| t.get(i, j) == Cell::One)
        .collect();
    let masked = t.with_cells(&hidden, Cell::Unknown)?;
    let scores = predictor.predict(&masked, seed)?;
    if scores.dim() != (t.rows(), t.cols()) {
        return Err(Error::argument("predictor returned scores of the wrong shape"));
    }
    let mut rows: Vec<RankingRow> = held_out
        .iter()
        .map(|(j, set)| RankingRow {
            material: t.col_labels()[*j].clone(),
            set: set.clone(),
            score: target_rows.iter().map(|&i| scores[[i, *j]]).sum::<f64>()
                / target_rows.len() as f64,
        })
        .collect();
    rows.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.material.cmp(&b.material)));
    Ok(RankingTable { rows })
}

/// Hit@k bar data: one row per k with mean, interval, and fold values.
pub fn write_hit_tsv(report: &EvalReport, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "k\tmean\tci_low\tci_high\tfold_values")?;
    for (k, mean) in &report.hit_at {
        let (lo, hi) = report.ci95[k];
        let folds: Vec<String> = report.per_fold[k].iter().map(|v| format!("{v:.6}")).collect();
        writeln!(out, "{k}\t{mean:.6}\t{lo:.6}\t{hi:.6}\t{}", folds.join(","))?;
    }
    Ok(())
}

/// Violin summary: quartiles and cumulative counts per class.
pub fn write_violin_tsv(sep: &SeparationStats, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "class\tcount\tq25\tmedian\tq75\tcum_q25\tcum_median\tcum_q75")?;
    for (name, c) in [("positive", &sep.positive), ("negative", &sep.negative)] {
        writeln!(
            out,
            "{name}\t{}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}\t{}",
            c.count, c.q25, c.median, c.q75, c.cumulative[0], c.cumulative[1], c.cumulative[2]
        )?;
    }
    Ok(())
}
