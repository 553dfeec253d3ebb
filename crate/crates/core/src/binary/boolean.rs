//! Boolean matrix factorization: real NMF, thresholded to binary factors,
//! then refined by exact alternating updates.

use std::fmt;

use ndarray::Array2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::factor::nmf::{random_init, run_multiplicative};
use crate::factor::nmfk::select_rank_array;
use crate::factor::{NmfOptions, RankSelectionOptions, RankSelectionReport};
use crate::matrix::{Cell, MaskedBinaryMatrix};
use crate::seed;

/// Largest rank for which the exact row and column updates are attempted.
const MAX_REFINE_RANK: usize = 16;

/// Dense matrix of booleans.
#[derive(Clone, PartialEq, Eq)]
pub struct BoolMatrix {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl BoolMatrix {
    pub fn new(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::argument(format!(
                "expected {} bits for {rows}x{cols}, got {}",
                rows * cols,
                bits.len()
            )));
        }
        Ok(BoolMatrix { rows, cols, bits })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let bits = (0..rows * cols).map(|idx| f(idx / cols, idx % cols)).collect();
        BoolMatrix { rows, cols, bits }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        BoolMatrix {
            rows,
            cols,
            bits: vec![false; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.bits[i * self.cols + j] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    fn row_strings(&self) -> Vec<String> {
        (0..self.rows)
            .map(|i| {
                (0..self.cols)
                    .map(|j| if self.get(i, j) { '1' } else { '0' })
                    .collect()
            })
            .collect()
    }
}

impl fmt::Debug for BoolMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BoolMatrix{:?}", self.row_strings())
    }
}

#[derive(Serialize, Deserialize)]
struct BoolRepr {
    rows: usize,
    cols: usize,
    bits: Vec<String>,
}

impl Serialize for BoolMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BoolRepr {
            rows: self.rows,
            cols: self.cols,
            bits: self.row_strings(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BoolMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = BoolRepr::deserialize(d)?;
        if repr.bits.len() != repr.rows {
            return Err(D::Error::custom("bit row count does not match rows"));
        }
        let mut bits = Vec::with_capacity(repr.rows * repr.cols);
        for line in &repr.bits {
            if line.len() != repr.cols {
                return Err(D::Error::custom("bit row length does not match cols"));
            }
            for c in line.chars() {
                bits.push(match c {
                    '1' => true,
                    '0' => false,
                    _ => return Err(D::Error::custom(format!("bad bit `{c}`"))),
                });
            }
        }
        BoolMatrix::new(repr.rows, repr.cols, bits).map_err(D::Error::custom)
    }
}

/// `out[i][j] = OR_r (W[i][r] AND H[r][j])`.
pub fn boolean_product(w: &BoolMatrix, h: &BoolMatrix) -> Result<BoolMatrix> {
    if w.cols != h.rows {
        return Err(Error::argument(format!(
            "cannot multiply {}x{} by {}x{}",
            w.rows, w.cols, h.rows, h.cols
        )));
    }
    Ok(BoolMatrix::from_fn(w.rows, h.cols, |i, j| {
        (0..w.cols).any(|r| w.get(i, r) && h.get(r, j))
    }))
}

/// Mismatches between `approx` and the observed cells of `t`.
pub fn hamming_error(t: &MaskedBinaryMatrix, approx: &BoolMatrix) -> Result<usize> {
    if (t.rows(), t.cols()) != (approx.rows, approx.cols) {
        return Err(Error::argument("shape mismatch in Hamming error"));
    }
    Ok(t.iter()
        .filter(|&(i, j, c)| match c {
            Cell::One => !approx.get(i, j),
            Cell::Zero => approx.get(i, j),
            Cell::Unknown => false,
        })
        .count())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BnmfOptions {
    /// Spacing of the threshold grid over (0, 1).
    pub grid_step: f64,
    pub nmf: NmfOptions,
    /// Run exact alternating refinement after thresholding.
    pub refine: bool,
    /// Upper bound on data-seeded refinement starts per side.
    pub refine_starts: usize,
}

impl Default for BnmfOptions {
    fn default() -> Self {
        BnmfOptions {
            grid_step: 0.05,
            nmf: NmfOptions::default(),
            refine: true,
            refine_starts: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BnmfModel {
    pub w: BoolMatrix,
    pub h: BoolMatrix,
    pub rank: usize,
    pub threshold_w: f64,
    pub threshold_h: f64,
    pub hamming_error: usize,
    /// Present when the rank was chosen by stability.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<RankSelectionReport>,
}

impl BnmfModel {
    pub fn reconstruction(&self) -> BoolMatrix {
        boolean_product(&self.w, &self.h).expect("factor shapes agree")
    }
}

fn threshold_grid(step: f64) -> Vec<f64> {
    (1..)
        .map(|i| i as f64 * step)
        .take_while(|&t| t < 1.0 - 1e-9)
        .map(|t| (t * 1e9).round() / 1e9)
        .collect()
}

/// Fixed-rank Boolean factorization of the observed cells of `t`.
pub fn bnmf(t: &MaskedBinaryMatrix, k: usize, seed: u64, opts: &BnmfOptions) -> Result<BnmfModel> {
    let (n, m) = (t.rows(), t.cols());
    if k == 0 || k > n.min(m) {
        return Err(Error::argument(format!(
            "rank {k} outside [1, {}] for a {n}x{m} matrix",
            n.min(m)
        )));
    }
    if !(opts.grid_step > 0.0 && opts.grid_step < 1.0) {
        return Err(Error::argument("grid_step must lie in (0, 1)"));
    }
    if t.observed_count() == 0 {
        return Err(Error::domain("matrix has no observed cells"));
    }
    let x = t.imputed();
    let (w0, h0) = random_init(&x, k, seed);
    let fit = run_multiplicative(&x, w0, h0, opts.nmf, None);
    let (w, h) = normalize(fit.w, fit.h);

    let target = Target::new(t);
    let mut best: Option<(usize, f64, f64, Factors)> = None;
    for &tw in &threshold_grid(opts.grid_step) {
        for &th in &threshold_grid(opts.grid_step) {
            let f = Factors::threshold(&w, &h, tw, th);
            let err = target.error(&f);
            if best.as_ref().is_none_or(|b| err < b.0) {
                best = Some((err, tw, th, f));
            }
        }
    }
    let (mut err, tw, th, mut factors) = best.expect("threshold grid is non-empty");

    if opts.refine && k <= MAX_REFINE_RANK && err > 0 {
        let (e, f) = target.refine(factors.clone());
        if e < err {
            err = e;
            factors = f;
        }
        for start in target.data_starts(k, opts.refine_starts, seed) {
            if err == 0 {
                break;
            }
            let (e, f) = target.refine(start);
            if e < err {
                err = e;
                factors = f;
            }
        }
    }
    Ok(BnmfModel {
        w: factors.w_matrix(n),
        h: factors.h_matrix(m),
        rank: k,
        threshold_w: tw,
        threshold_h: th,
        hamming_error: err,
        selection: None,
    })
}

/// Chooses the rank by NMF stability on the zero-imputed matrix, then fits
/// [`bnmf`] at that rank.
pub fn bnmfk_fit(
    t: &MaskedBinaryMatrix,
    candidates: &[usize],
    selection: &RankSelectionOptions,
    opts: &BnmfOptions,
    seed: u64,
) -> Result<BnmfModel> {
    let x = t.imputed();
    let report = select_rank_array(&x, candidates, selection, seed::derive(seed, &[0]))?;
    let mut model = bnmf(t, report.selected_rank, seed::derive(seed, &[1]), opts)?;
    model.selection = Some(report);
    Ok(model)
}

/// Scales each `W` column and matching `H` row to a maximum of one.
fn normalize(mut w: Array2<f64>, mut h: Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    for mut col in w.columns_mut() {
        let max = col.fold(0.0f64, |a, &b| a.max(b));
        if max > 0.0 {
            col /= max;
        }
    }
    for mut row in h.rows_mut() {
        let max = row.fold(0.0f64, |a, &b| a.max(b));
        if max > 0.0 {
            row /= max;
        }
    }
    (w, h)
}

/// Fixed-width bitset.
#[derive(Clone, PartialEq, Eq, Debug)]
struct Bits(Vec<u64>);

impl Bits {
    fn zeros(len: usize) -> Self {
        Bits(vec![0; len.div_ceil(64)])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    fn or_assign(&mut self, other: &Bits) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a |= b;
        }
    }

    /// Set bits of `(self ^ target) & mask`.
    fn mismatches(&self, target: &Bits, mask: &Bits) -> usize {
        self.0
            .iter()
            .zip(&target.0)
            .zip(&mask.0)
            .map(|((a, t), m)| ((a ^ t) & m).count_ones() as usize)
            .sum()
    }
}

/// Binary factors held as rank-bit patterns: `w[i]` is row `i` of `W` and
/// `h[j]` is column `j` of `H`, bit `r` meaning factor `r` is on.
#[derive(Clone, Debug)]
struct Factors {
    k: usize,
    w: Vec<u32>,
    h: Vec<u32>,
}

impl Factors {
    fn threshold(w: &Array2<f64>, h: &Array2<f64>, tw: f64, th: f64) -> Self {
        let k = w.ncols();
        let pack = |vals: Vec<bool>| vals.iter().enumerate().fold(0u32, |p, (r, &b)| p | (b as u32) << r);
        Factors {
            k,
            w: w.rows()
                .into_iter()
                .map(|row| pack(row.iter().map(|&v| v >= tw).collect()))
                .collect(),
            h: h.columns()
                .into_iter()
                .map(|col| pack(col.iter().map(|&v| v >= th).collect()))
                .collect(),
        }
    }

    fn w_matrix(&self, n: usize) -> BoolMatrix {
        BoolMatrix::from_fn(n, self.k, |i, r| self.w[i] >> r & 1 == 1)
    }

    fn h_matrix(&self, m: usize) -> BoolMatrix {
        BoolMatrix::from_fn(self.k, m, |r, j| self.h[j] >> r & 1 == 1)
    }
}

/// Observed cells of the training matrix as row and column bitsets.
struct Target {
    n: usize,
    m: usize,
    row_ones: Vec<Bits>,
    row_mask: Vec<Bits>,
    col_ones: Vec<Bits>,
    col_mask: Vec<Bits>,
}

impl Target {
    fn new(t: &MaskedBinaryMatrix) -> Self {
        let (n, m) = (t.rows(), t.cols());
        let mut row_ones = vec![Bits::zeros(m); n];
        let mut row_mask = vec![Bits::zeros(m); n];
        let mut col_ones = vec![Bits::zeros(n); m];
        let mut col_mask = vec![Bits::zeros(n); m];
        for (i, j, c) in t.iter() {
            if c.is_observed() {
                row_mask[i].set(j);
                col_mask[j].set(i);
            }
            if c == Cell::One {
                row_ones[i].set(j);
                col_ones[j].set(i);
            }
        }
        Target {
            n,
            m,
            row_ones,
            row_mask,
            col_ones,
            col_mask,
        }
    }

    /// Reconstructed row `i` is `table[w[i]]` where `table[p]` ORs the
    /// factor lines selected by pattern `p`.
    fn pattern_table(lines: &[Bits], width: usize) -> Vec<Bits> {
        let k = lines.len();
        let mut table = vec![Bits::zeros(width); 1 << k];
        for p in 1usize..(1 << k) {
            let low = p.trailing_zeros() as usize;
            let mut b = table[p & (p - 1)].clone();
            b.or_assign(&lines[low]);
            table[p] = b;
        }
        table
    }

    /// Factor `r` as a bitset over columns (from `h`) or rows (from `w`).
    fn lines(patterns: &[u32], k: usize, width: usize) -> Vec<Bits> {
        let mut lines = vec![Bits::zeros(width); k];
        for (idx, &p) in patterns.iter().enumerate() {
            for (r, line) in lines.iter_mut().enumerate() {
                if p >> r & 1 == 1 {
                    line.set(idx);
                }
            }
        }
        lines
    }

    fn error(&self, f: &Factors) -> usize {
        let table = Self::pattern_table(&Self::lines(&f.h, f.k, self.m), self.m);
        (0..self.n)
            .map(|i| table[f.w[i] as usize].mismatches(&self.row_ones[i], &self.row_mask[i]))
            .sum()
    }

    /// Replaces each pattern by the best one given the fixed other side.
    /// A pattern only changes on strict improvement.
    fn best_patterns(
        patterns: &mut [u32],
        table: &[Bits],
        ones: &[Bits],
        mask: &[Bits],
    ) -> bool {
        let mut changed = false;
        for (idx, p) in patterns.iter_mut().enumerate() {
            let mut best = table[*p as usize].mismatches(&ones[idx], &mask[idx]);
            for (q, recon) in table.iter().enumerate() {
                if best == 0 {
                    break;
                }
                let e = recon.mismatches(&ones[idx], &mask[idx]);
                if e < best {
                    best = e;
                    *p = q as u32;
                    changed = true;
                }
            }
        }
        changed
    }

    /// Alternates exact `W` and `H` updates until neither changes.
    fn refine(&self, mut f: Factors) -> (usize, Factors) {
        for _ in 0..100 {
            let h_table = Self::pattern_table(&Self::lines(&f.h, f.k, self.m), self.m);
            let a = Self::best_patterns(&mut f.w, &h_table, &self.row_ones, &self.row_mask);
            let w_table = Self::pattern_table(&Self::lines(&f.w, f.k, self.n), self.n);
            let b = Self::best_patterns(&mut f.h, &w_table, &self.col_ones, &self.col_mask);
            if !a && !b {
                break;
            }
        }
        (self.error(&f), f)
    }

    /// Starts whose `H` rows are `k` distinct observed rows of the data, or
    /// whose `W` columns are `k` distinct observed columns. All subsets are
    /// used when there are at most `limit`, otherwise a seeded sample.
    fn data_starts(&self, k: usize, limit: usize, seed: u64) -> Vec<Factors> {
        let mut starts = Vec::new();
        let row_lines = distinct_nonzero(&self.row_ones);
        for subset in subsets(row_lines.len(), k, limit, seed::derive(seed, &[2])) {
            // H row r is data row subset[r]; W starts empty and is solved first.
            let mut h = vec![0u32; self.m];
            for (r, &s) in subset.iter().enumerate() {
                for (j, hj) in h.iter_mut().enumerate() {
                    if row_lines[s].get(j) {
                        *hj |= 1 << r;
                    }
                }
            }
            starts.push(Factors {
                k,
                w: vec![0; self.n],
                h,
            });
        }
        let col_lines = distinct_nonzero(&self.col_ones);
        for subset in subsets(col_lines.len(), k, limit, seed::derive(seed, &[3])) {
            let mut w = vec![0u32; self.n];
            for (r, &s) in subset.iter().enumerate() {
                for (i, wi) in w.iter_mut().enumerate() {
                    if col_lines[s].get(i) {
                        *wi |= 1 << r;
                    }
                }
            }
            // Solve H first by refining from the transposed view.
            let w_table = Self::pattern_table(&Self::lines(&w, k, self.n), self.n);
            let mut h = vec![0u32; self.m];
            Self::best_patterns(&mut h, &w_table, &self.col_ones, &self.col_mask);
            starts.push(Factors { k, w, h });
        }
        starts
    }
}

fn distinct_nonzero(lines: &[Bits]) -> Vec<Bits> {
    let mut out: Vec<Bits> = Vec::new();
    for l in lines {
        if l.0.iter().any(|&w| w != 0) && !out.contains(l) {
            out.push(l.clone());
        }
    }
    out
}

/// `k`-subsets of `0..n` (fewer than `k` items when `n < k`), every one of
/// them if there are at most `limit`, else `limit` seeded samples.
fn subsets(n: usize, k: usize, limit: usize, seed: u64) -> Vec<Vec<usize>> {
    if n == 0 || limit == 0 {
        return Vec::new();
    }
    let k = k.min(n);
    let mut all = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        all.push(cur.clone());
        if all.len() > limit {
            break;
        }
        // next combination in lexicographic order
        let mut i = k;
        while i > 0 && cur[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return all;
        }
        cur[i - 1] += 1;
        for j in i..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..limit)
        .map(|_| {
            let mut s = sample(&mut rng, n, k).into_vec();
            s.sort_unstable();
            s
        })
        .collect()
}
