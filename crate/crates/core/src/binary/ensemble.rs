use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::boolean::{bnmfk_fit, BnmfModel, BnmfOptions, BoolMatrix};
use super::lmf::{lmf_fit, LmfOptions};
use super::sigmoid;
use crate::error::{Error, Result};
use crate::factor::RankSelectionOptions;
use crate::matrix::{DenseMatrix, MaskedBinaryMatrix};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub candidates: Vec<usize>,
    pub selection: RankSelectionOptions,
    pub bnmf: BnmfOptions,
    pub lmf: LmfOptions,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            candidates: (1..=6).collect(),
            selection: RankSelectionOptions::default(),
            bnmf: BnmfOptions::default(),
            lmf: LmfOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub bnmf: BnmfModel,
    pub b_r: Vec<f64>,
    pub b_c: Vec<f64>,
    /// Final value of the logistic model's training loss.
    pub lmf_loss: f64,
    /// `σ(T̂ + b_r + b_c)` per cell.
    pub scores: DenseMatrix,
}

/// `σ(T̂_ij + b_r[i] + b_c[j])` for every cell.
pub fn ensemble_scores(t_hat: &BoolMatrix, b_r: &[f64], b_c: &[f64]) -> Result<Array2<f64>> {
    if b_r.len() != t_hat.rows() || b_c.len() != t_hat.cols() {
        return Err(Error::argument("bias lengths do not match the reconstruction"));
    }
    Ok(Array2::from_shape_fn((t_hat.rows(), t_hat.cols()), |(i, j)| {
        let t = if t_hat.get(i, j) { 1.0 } else { 0.0 };
        sigmoid(t + b_r[i] + b_c[j])
    }))
}

/// Boolean factorization at a stability-selected rank, a logistic model at
/// the same rank for the biases, and the sigmoid of their sum.
pub fn ensemble_fit(
    t: &MaskedBinaryMatrix,
    config: &EnsembleConfig,
    seed: u64,
) -> Result<EnsembleModel> {
    let bnmf = bnmfk_fit(
        t,
        &config.candidates,
        &config.selection,
        &config.bnmf,
        seed::derive(seed, &[0]),
    )?;
    let (lmf, trace) = lmf_fit(t, bnmf.rank, &config.lmf, seed::derive(seed, &[1]))?;
    let scores = ensemble_scores(&bnmf.reconstruction(), &lmf.b_r, &lmf.b_c)?;
    Ok(EnsembleModel {
        bnmf,
        b_r: lmf.b_r,
        b_c: lmf.b_c,
        lmf_loss: *trace.last().expect("trace starts with the initial loss"),
        scores: DenseMatrix::new(scores)?,
    })
}
