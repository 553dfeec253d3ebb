//! Nonnegative matrix factorization with Lee–Seung multiplicative updates.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Added to every update denominator.
pub const UPDATE_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NmfOptions {
    pub max_iters: usize,
    /// Stop once the relative improvement of the Frobenius error drops below this.
    pub tol: f64,
}

impl Default for NmfOptions {
    fn default() -> Self {
        NmfOptions {
            max_iters: 1000,
            tol: 1e-6,
        }
    }
}

impl NmfOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::argument("max_iters must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::argument("tol must be positive"));
        }
        Ok(())
    }
}

/// Nonnegative factors `W` (n×k) and `H` (k×m) with fit diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorPair {
    pub w: DenseMatrix,
    pub h: DenseMatrix,
    pub rank: usize,
    pub reconstruction_error: f64,
    pub iterations_run: usize,
    /// `None` when the factorization started from caller-supplied factors.
    pub seed: Option<u64>,
}

/// Seeded starting factors: uniform[0,1) scaled by `sqrt(mean(X)/k)`.
pub fn random_init(x: &Array2<f64>, k: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
    let (n, m) = x.dim();
    let mean = if x.is_empty() {
        0.0
    } else {
        x.sum() / x.len() as f64
    };
    let scale = (mean / k as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Array2::from_shape_simple_fn((n, k), || rng.random::<f64>() * scale);
    let h = Array2::from_shape_simple_fn((k, m), || rng.random::<f64>() * scale);
    (w, h)
}

/// Factorizes `x ≈ W·H` with rank `k`.
pub fn nmf(x: &DenseMatrix, k: usize, seed: u64, opts: NmfOptions) -> Result<FactorPair> {
    check_input(x, k)?;
    opts.validate()?;
    let (w0, h0) = random_init(x.view(), k, seed);
    let fit = run_multiplicative(x.view(), w0, h0, opts, None);
    fit.into_pair(Some(seed))
}

/// Runs the updates from caller-supplied starting factors and also returns
/// the Frobenius error after every iteration.
pub fn nmf_from(
    x: &DenseMatrix,
    w0: Array2<f64>,
    h0: Array2<f64>,
    opts: NmfOptions,
) -> Result<(FactorPair, Vec<f64>)> {
    let k = w0.ncols();
    check_input(x, k)?;
    opts.validate()?;
    if w0.nrows() != x.rows() || h0.dim() != (k, x.cols()) {
        return Err(Error::argument("starting factors do not match X and rank"));
    }
    if w0.iter().chain(h0.iter()).any(|&v| !(v >= 0.0)) {
        return Err(Error::domain("starting factors must be nonnegative"));
    }
    let mut trace = Vec::new();
    let fit = run_multiplicative(x.view(), w0, h0, opts, Some(&mut trace));
    Ok((fit.into_pair(None)?, trace))
}

fn check_input(x: &DenseMatrix, k: usize) -> Result<()> {
    if !x.is_nonnegative() {
        return Err(Error::domain("NMF input contains a negative entry"));
    }
    let max_rank = x.rows().min(x.cols());
    if k == 0 || k > max_rank {
        return Err(Error::argument(format!(
            "rank {k} outside [1, {max_rank}] for a {}x{} matrix",
            x.rows(),
            x.cols()
        )));
    }
    Ok(())
}

pub(crate) struct RawFit {
    pub w: Array2<f64>,
    pub h: Array2<f64>,
    pub error: f64,
    pub iterations: usize,
}

impl RawFit {
    fn into_pair(self, seed: Option<u64>) -> Result<FactorPair> {
        let rank = self.w.ncols();
        Ok(FactorPair {
            w: DenseMatrix::new(self.w)?,
            h: DenseMatrix::new(self.h)?,
            rank,
            reconstruction_error: self.error,
            iterations_run: self.iterations,
            seed,
        })
    }
}

/// Unchecked core loop shared by every factorization in the crate.
pub(crate) fn run_multiplicative(
    x: &Array2<f64>,
    mut w: Array2<f64>,
    mut h: Array2<f64>,
    opts: NmfOptions,
    mut trace: Option<&mut Vec<f64>>,
) -> RawFit {
    let mut prev = frob(x, &w, &h);
    let mut iterations = 0;
    let mut error = prev;
    if prev == 0.0 {
        return RawFit {
            w,
            h,
            error,
            iterations,
        };
    }
    for _ in 0..opts.max_iters {
        // H <- H * (W^T X) / (W^T W H)
        let numer = w.t().dot(x);
        let denom = w.t().dot(&w).dot(&h);
        ndarray::Zip::from(&mut h)
            .and(&numer)
            .and(&denom)
            .for_each(|hv, &n, &d| *hv *= n / (d + UPDATE_EPS));

        // W <- W * (X H^T) / (W H H^T)
        let numer = x.dot(&h.t());
        let denom = w.dot(&h.dot(&h.t()));
        ndarray::Zip::from(&mut w)
            .and(&numer)
            .and(&denom)
            .for_each(|wv, &n, &d| *wv *= n / (d + UPDATE_EPS));

        iterations += 1;
        error = frob(x, &w, &h);
        if let Some(t) = trace.as_deref_mut() {
            t.push(error);
        }
        let improvement = (prev - error) / prev;
        if error == 0.0 || improvement < opts.tol {
            break;
        }
        prev = error;
    }
    RawFit {
        w,
        h,
        error,
        iterations,
    }
}

pub(crate) fn frob(x: &Array2<f64>, w: &Array2<f64>, h: &Array2<f64>) -> f64 {
    let wh = w.dot(h);
    x.iter()
        .zip(wh.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// `‖X − W·H‖_F`.
pub fn frobenius_error(x: &DenseMatrix, w: &DenseMatrix, h: &DenseMatrix) -> Result<f64> {
    if w.rows() != x.rows() || h.cols() != x.cols() || w.cols() != h.rows() {
        return Err(Error::argument(format!(
            "shape mismatch: X {}x{}, W {}x{}, H {}x{}",
            x.rows(),
            x.cols(),
            w.rows(),
            w.cols(),
            h.rows(),
            h.cols()
        )));
    }
    Ok(frob(x.view(), w.view(), h.view()))
}
