//! Logistic matrix factorization: `P = σ(W·H + b_r + b_c)` fitted by full-batch
//! gradient descent on the masked, L2-regularized negative log-likelihood.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sigmoid;
use crate::error::{Error, Result};
use crate::matrix::{Cell, DenseMatrix, MaskedBinaryMatrix};

/// Probabilities are clamped to `[PROB_CLAMP, 1 − PROB_CLAMP]` inside logs.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmfOptions {
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for LmfOptions {
    fn default() -> Self {
        LmfOptions {
            lambda: 0.01,
            learning_rate: 0.05,
            epochs: 500,
        }
    }
}

impl LmfOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::argument("lambda must be finite and nonnegative"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::argument("learning_rate must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::argument("epochs must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmfModel {
    pub w: DenseMatrix,
    pub h: DenseMatrix,
    pub b_r: Vec<f64>,
    pub b_c: Vec<f64>,
    pub lambda: f64,
    pub rank: usize,
}

impl LmfModel {
    pub fn new(
        w: DenseMatrix,
        h: DenseMatrix,
        b_r: Vec<f64>,
        b_c: Vec<f64>,
        lambda: f64,
    ) -> Result<Self> {
        if w.cols() != h.rows() || b_r.len() != w.rows() || b_c.len() != h.cols() {
            return Err(Error::argument("inconsistent LMF parameter shapes"));
        }
        if b_r.iter().chain(&b_c).any(|v| !v.is_finite()) || !(lambda >= 0.0) {
            return Err(Error::domain("LMF biases must be finite and lambda nonnegative"));
        }
        let rank = w.cols();
        Ok(LmfModel {
            w,
            h,
            b_r,
            b_c,
            lambda,
            rank,
        })
    }

    pub fn rows(&self) -> usize {
        self.w.rows()
    }

    pub fn cols(&self) -> usize {
        self.h.cols()
    }

    fn params(&self) -> Params {
        Params {
            w: self.w.view().clone(),
            h: self.h.view().clone(),
            b_r: Array1::from(self.b_r.clone()),
            b_c: Array1::from(self.b_c.clone()),
        }
    }
}

/// Gradient of the loss with respect to each parameter block.
#[derive(Clone, Debug, PartialEq)]
pub struct LmfGradients {
    pub w: Array2<f64>,
    pub h: Array2<f64>,
    pub b_r: Array1<f64>,
    pub b_c: Array1<f64>,
}

#[derive(Clone)]
struct Params {
    w: Array2<f64>,
    h: Array2<f64>,
    b_r: Array1<f64>,
    b_c: Array1<f64>,
}

impl Params {
    fn logits(&self) -> Array2<f64> {
        let mut z = self.w.dot(&self.h);
        z += &self.b_r.view().insert_axis(Axis(1));
        z += &self.b_c.view().insert_axis(Axis(0));
        z
    }

    fn penalty(&self) -> f64 {
        let sq = |a: &Array2<f64>| a.iter().map(|v| v * v).sum::<f64>();
        sq(&self.w) + sq(&self.h) + self.b_r.dot(&self.b_r) + self.b_c.dot(&self.b_c)
    }

    fn loss(&self, data: &Observed, lambda: f64) -> f64 {
        let z = self.logits();
        let mut nll = 0.0;
        for &(i, j, y) in &data.cells {
            let p = sigmoid(z[[i, j]]).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            nll -= if y { p.ln() } else { (1.0 - p).ln() };
        }
        nll + lambda * self.penalty()
    }

    fn gradients(&self, data: &Observed, lambda: f64) -> LmfGradients {
        let z = self.logits();
        let mut g = Array2::<f64>::zeros(z.dim());
        for &(i, j, y) in &data.cells {
            g[[i, j]] = sigmoid(z[[i, j]]) - if y { 1.0 } else { 0.0 };
        }
        LmfGradients {
            w: g.dot(&self.h.t()) + &(2.0 * lambda * &self.w),
            h: self.w.t().dot(&g) + &(2.0 * lambda * &self.h),
            b_r: g.sum_axis(Axis(1)) + &(2.0 * lambda * &self.b_r),
            b_c: g.sum_axis(Axis(0)) + &(2.0 * lambda * &self.b_c),
        }
    }

    fn step(&self, g: &LmfGradients, lr: f64) -> Params {
        Params {
            w: &self.w - &(lr * &g.w),
            h: &self.h - &(lr * &g.h),
            b_r: &self.b_r - &(lr * &g.b_r),
            b_c: &self.b_c - &(lr * &g.b_c),
        }
    }

    fn into_model(self, lambda: f64) -> Result<LmfModel> {
        LmfModel::new(
            DenseMatrix::new(self.w)?,
            DenseMatrix::new(self.h)?,
            self.b_r.to_vec(),
            self.b_c.to_vec(),
            lambda,
        )
    }
}

/// Observed cells as `(row, col, is_one)`.
struct Observed {
    cells: Vec<(usize, usize, bool)>,
}

impl Observed {
    fn new(model_shape: (usize, usize), x: &MaskedBinaryMatrix) -> Result<Self> {
        if (x.rows(), x.cols()) != model_shape {
            return Err(Error::argument(format!(
                "matrix is {}x{} but the model is {}x{}",
                x.rows(),
                x.cols(),
                model_shape.0,
                model_shape.1
            )));
        }
        let cells = x
            .iter()
            .filter(|&(_, _, c)| c.is_observed())
            .map(|(i, j, c)| (i, j, c == Cell::One))
            .collect();
        Ok(Observed { cells })
    }
}

/// Link probabilities `σ(W·H + b_r + b_c)`.
pub fn lmf_predict(model: &LmfModel) -> Array2<f64> {
    model.params().logits().mapv(sigmoid)
}

/// Masked negative log-likelihood plus `λ(‖W‖² + ‖H‖² + ‖b_r‖² + ‖b_c‖²)`.
pub fn lmf_loss(model: &LmfModel, x: &MaskedBinaryMatrix) -> Result<f64> {
    let data = Observed::new((model.rows(), model.cols()), x)?;
    Ok(model.params().loss(&data, model.lambda))
}

/// Analytic gradient of [`lmf_loss`], ignoring the probability clamp.
pub fn lmf_gradients(model: &LmfModel, x: &MaskedBinaryMatrix) -> Result<LmfGradients> {
    let data = Observed::new((model.rows(), model.cols()), x)?;
    Ok(model.params().gradients(&data, model.lambda))
}

/// Fits a rank-`k` model. Returns the model and the loss before the first
/// epoch followed by the loss after every epoch.
///
/// Each epoch is one full-batch gradient step. The step starts at
/// `learning_rate` and is halved until the loss decreases sufficiently, so
/// the trace never increases; if no step helps the parameters are kept.
pub fn lmf_fit(
    x: &MaskedBinaryMatrix,
    k: usize,
    opts: &LmfOptions,
    seed: u64,
) -> Result<(LmfModel, Vec<f64>)> {
    opts.validate()?;
    if k == 0 {
        return Err(Error::argument("rank must be at least 1"));
    }
    let (n, m) = (x.rows(), x.cols());
    let data = Observed::new((n, m), x)?;
    if data.cells.is_empty() {
        return Err(Error::domain("matrix has no observed cells to fit"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Params {
        w: Array2::from_shape_simple_fn((n, k), || rng.random_range(-0.1..0.1)),
        h: Array2::from_shape_simple_fn((k, m), || rng.random_range(-0.1..0.1)),
        b_r: Array1::zeros(n),
        b_c: Array1::zeros(m),
    };
    let lambda = opts.lambda;
    let mut loss = params.loss(&data, lambda);
    let mut trace = Vec::with_capacity(opts.epochs + 1);
    trace.push(loss);
    for _ in 0..opts.epochs {
        let g = params.gradients(&data, lambda);
        let g_sq = g.w.iter().chain(&g.h).chain(&g.b_r).chain(&g.b_c).map(|v| v * v).sum::<f64>();
        let mut lr = opts.learning_rate;
        for _ in 0..40 {
            let trial = params.step(&g, lr);
            let trial_loss = trial.loss(&data, lambda);
            if trial_loss <= loss - 1e-4 * lr * g_sq {
                params = trial;
                loss = trial_loss;
                break;
            }
            lr *= 0.5;
        }
        trace.push(loss);
    }
    Ok((params.into_model(lambda)?, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_model(n: usize, m: usize, k: usize, lambda: f64) -> LmfModel {
        LmfModel::new(
            DenseMatrix::from_row_major(n, k, vec![0.0; n * k]).unwrap(),
            DenseMatrix::from_row_major(k, m, vec![0.0; k * m]).unwrap(),
            vec![0.0; n],
            vec![0.0; m],
            lambda,
        )
        .unwrap()
    }

    #[test]
    fn predict_zero_and_bias_cases() {
        let p = lmf_predict(&zero_model(2, 3, 1, 0.0));
        assert!(p.iter().all(|&v| v == 0.5));
        let mut m = zero_model(2, 3, 1, 0.0);
        m.b_r[1] = 10.0;
        let p = lmf_predict(&m);
        assert!(p.row(1).iter().all(|&v| v > 0.9999));
        assert!(p.row(0).iter().all(|&v| v == 0.5));
    }

    #[test]
    fn predict_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut r = || rng.random_range(-1.0..1.0);
        let w: Vec<f64> = (0..8).map(|_| r()).collect();
        let h: Vec<f64> = (0..6).map(|_| r()).collect();
        let b_r: Vec<f64> = (0..4).map(|_| r()).collect();
        let b_c: Vec<f64> = (0..3).map(|_| r()).collect();
        let model = LmfModel::new(
            DenseMatrix::from_row_major(4, 2, w.clone()).unwrap(),
            DenseMatrix::from_row_major(2, 3, h.clone()).unwrap(),
            b_r.clone(),
            b_c.clone(),
            0.0,
        )
        .unwrap();
        let p = lmf_predict(&model);
        for i in 0..4 {
            for j in 0..3 {
                let mut z = b_r[i] + b_c[j];
                for r in 0..2 {
                    z += w[i * 2 + r] * h[r * 3 + j];
                }
                assert!((p[[i, j]] - 1.0 / (1.0 + (-z).exp())).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn loss_analytic_cases() {
        let mut cells = vec![Cell::Unknown; 1];
        let x = MaskedBinaryMatrix::from_cells(1, 1, vec![Cell::One]).unwrap();
        // single observed one at logit 0
        let loss = lmf_loss(&zero_model(1, 1, 1, 0.0), &x).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);

        // an all-unknown matrix cannot be built, so exercise the mask with
        // a 1x2 matrix whose only observed cell is scored exactly.
        cells.push(Cell::Zero);
        let x = MaskedBinaryMatrix::from_cells(1, 2, cells).unwrap();
        let mut m = zero_model(1, 2, 1, 0.5);
        m.w = DenseMatrix::from_row_major(1, 1, vec![2.0]).unwrap();
        // data term ln 2 from the observed zero, penalty 0.5 * 4
        let loss = lmf_loss(&m, &x).unwrap();
        assert!((loss - (std::f64::consts::LN_2 + 2.0)).abs() < 1e-12);

        assert!(lmf_loss(&zero_model(2, 2, 1, 0.0), &x).is_err());
    }

    #[test]
    fn identity_pattern_is_learned() {
        let bools: Vec<bool> = (0..36).map(|i| i / 6 == i % 6).collect();
        let x = MaskedBinaryMatrix::from_bools(6, 6, &bools).unwrap();
        let (model, trace) = lmf_fit(&x, 3, &LmfOptions::default(), 1).unwrap();
        assert!(trace.last().unwrap() <= &trace[0]);
        let p = lmf_predict(&model);
        let min_diag = (0..6).map(|i| p[[i, i]]).fold(f64::INFINITY, f64::min);
        let separated = (0..36)
            .filter(|&c| {
                let (i, j) = (c / 6, c % 6);
                i == j || p[[i, j]] < min_diag
            })
            .count();
        assert!(separated >= 34, "{separated}/36");
    }

    #[test]
    fn single_epoch_does_not_increase_loss() {
        let x = MaskedBinaryMatrix::from_bools(3, 2, &[true, false, false, true, true, true]).unwrap();
        let opts = LmfOptions {
            epochs: 1,
            ..Default::default()
        };
        let (_, trace) = lmf_fit(&x, 1, &opts, 0).unwrap();
        assert_eq!(trace.len(), 2);
        assert!(trace[1] <= trace[0]);
    }
}
