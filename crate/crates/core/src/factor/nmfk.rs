//! Automatic rank selection by ensemble stability (NMFk).
//!
//! For each candidate rank an ensemble of factorizations is fitted to
//! multiplicatively perturbed copies of the input. The `W` columns of all
//! members are clustered into `k` groups by cosine similarity and the mean
//! silhouette of that clustering is the rank's stability. The selected rank
//! is the largest candidate whose stability clears the threshold; if none
//! does, the most stable candidate wins (smaller rank on ties).

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cluster::{match_columns, mean_silhouette};
use super::nmf::{frob, random_init, run_multiplicative, NmfOptions};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RankSelectionOptions {
    pub ensemble_size: usize,
    /// Half-width of the multiplicative uniform noise, `X ⊙ U[1−δ, 1+δ]`.
    pub perturbation: f64,
    pub stability_threshold: f64,
    /// Random starts per ensemble member; the lowest-error start is kept.
    pub restarts: usize,
    pub nmf: NmfOptions,
}

impl Default for RankSelectionOptions {
    fn default() -> Self {
        RankSelectionOptions {
            ensemble_size: 10,
            perturbation: 0.03,
            stability_threshold: 0.7,
            restarts: 3,
            nmf: NmfOptions {
                max_iters: 400,
                tol: 1e-5,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankSelectionReport {
    pub candidate_ranks: Vec<usize>,
    pub stability_score: Vec<f64>,
    /// Mean Frobenius error of the ensemble members against the unperturbed input.
    pub reconstruction_error: Vec<f64>,
    pub selected_rank: usize,
    pub ensemble_size: usize,
}

impl RankSelectionReport {
    pub fn stability_of(&self, k: usize) -> Option<f64> {
        self.candidate_ranks
            .iter()
            .position(|&c| c == k)
            .map(|i| self.stability_score[i])
    }
}

pub fn select_rank(
    x: &DenseMatrix,
    candidates: &[usize],
    opts: &RankSelectionOptions,
    seed: u64,
) -> Result<RankSelectionReport> {
    if !x.is_nonnegative() {
        return Err(Error::domain(
            "rank selection input contains a negative entry",
        ));
    }
    select_rank_array(x.view(), candidates, opts, seed)
}

pub(crate) fn select_rank_array(
    x: &Array2<f64>,
    candidates: &[usize],
    opts: &RankSelectionOptions,
    seed: u64,
) -> Result<RankSelectionReport> {
    let mut ranks: Vec<usize> = candidates.to_vec();
    ranks.sort_unstable();
    ranks.dedup();
    if ranks.is_empty() {
        return Err(Error::argument("candidate rank set is empty"));
    }
    let max_rank = x.nrows().min(x.ncols());
    if let Some(&bad) = ranks.iter().find(|&&k| k == 0 || k > max_rank) {
        return Err(Error::argument(format!(
            "candidate rank {bad} outside [1, {max_rank}]"
        )));
    }
    if opts.ensemble_size < 2 {
        return Err(Error::argument("ensemble_size must be at least 2"));
    }
    if !(0.0..1.0).contains(&opts.perturbation) {
        return Err(Error::argument("perturbation must lie in [0, 1)"));
    }
    if x.iter().all(|&v| v == 0.0) {
        return Err(Error::domain("rank selection input is all zeros"));
    }

    let jobs: Vec<(usize, usize)> = ranks
        .iter()
        .flat_map(|&k| (0..opts.ensemble_size).map(move |e| (k, e)))
        .collect();
    let fits: Vec<(Array2<f64>, f64)> = jobs
        .par_iter()
        .map(|&(k, e)| {
            let member_seed = seed::derive(seed, &[k as u64, e as u64]);
            let xp = perturb(x, opts.perturbation, member_seed);
            let fit = (0..opts.restarts.max(1))
                .map(|r| {
                    let (w0, h0) = random_init(&xp, k, seed::derive(member_seed, &[1, r as u64]));
                    run_multiplicative(&xp, w0, h0, opts.nmf, None)
                })
                .min_by(|a, b| a.error.total_cmp(&b.error))
                .expect("at least one start");
            let err = frob(x, &fit.w, &fit.h);
            (fit.w, err)
        })
        .collect();

    let mut stability = Vec::with_capacity(ranks.len());
    let mut errors = Vec::with_capacity(ranks.len());
    for (ci, &k) in ranks.iter().enumerate() {
        let members = &fits[ci * opts.ensemble_size..(ci + 1) * opts.ensemble_size];
        let err = members.iter().map(|(_, e)| e).sum::<f64>() / members.len() as f64;
        errors.push(err);
        if k == 1 {
            stability.push(1.0);
            continue;
        }
        let ws: Vec<Array2<f64>> = members.iter().map(|(w, _)| w.clone()).collect();
        let (points, labels) = match_columns(&ws);
        stability.push(mean_silhouette(&points, &labels, k));
    }

    let selected_rank = choose(&ranks, &stability, opts.stability_threshold);
    Ok(RankSelectionReport {
        candidate_ranks: ranks,
        stability_score: stability,
        reconstruction_error: errors,
        selected_rank,
        ensemble_size: opts.ensemble_size,
    })
}

fn choose(ranks: &[usize], stability: &[f64], threshold: f64) -> usize {
    if let Some(i) = (0..ranks.len()).rev().find(|&i| stability[i] >= threshold) {
        return ranks[i];
    }
    let mut best = 0;
    for i in 1..ranks.len() {
        if stability[i] > stability[best] {
            best = i;
        }
    }
    ranks[best]
}

fn perturb(x: &Array2<f64>, delta: f64, seed: u64) -> Array2<f64> {
    if delta == 0.0 {
        return x.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    x.mapv(|v| v * rng.random_range((1.0 - delta)..=(1.0 + delta)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn choose_prefers_largest_stable_then_most_stable() {
        assert_eq!(choose(&[1, 2, 3, 4], &[1.0, 0.9, 0.75, 0.2], 0.7), 3);
        assert_eq!(choose(&[2, 3, 4], &[0.5, 0.6, 0.6], 0.7), 3);
    }

    #[test]
    fn rejects_bad_candidates() {
        let x = DenseMatrix::from_row_major(3, 3, vec![1.0; 9]).unwrap();
        let opts = RankSelectionOptions::default();
        assert!(matches!(
            select_rank(&x, &[], &opts, 0),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            select_rank(&x, &[4], &opts, 0),
            Err(Error::Argument(_))
        ));
        let zero = DenseMatrix::from_row_major(3, 3, vec![0.0; 9]).unwrap();
        assert!(matches!(
            select_rank(&zero, &[1], &opts, 0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn constant_matrix_selects_rank_one() {
        let x = DenseMatrix::from_row_major(10, 8, vec![1.0; 80]).unwrap();
        let report = select_rank(&x, &[1, 2, 3], &RankSelectionOptions::default(), 5).unwrap();
        assert_eq!(report.selected_rank, 1, "{report:?}");
    }
}
