use std::collections::{BTreeMap, HashMap};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::document::Document;
use super::tokenize::Tokenizer;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TfidfOptions {
    pub min_df: usize,
    /// Terms in more than this fraction of documents are dropped.
    pub max_df_fraction: f64,
}

impl Default for TfidfOptions {
    fn default() -> Self {
        TfidfOptions {
            min_df: 2,
            max_df_fraction: 0.95,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub terms: Vec<String>,
    pub document_frequency: Vec<usize>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.terms.binary_search_by(|t| t.as_str().cmp(term)).ok()
    }
}

pub fn build_tfidf(
    docs: &[Document],
    tokenizer: &Tokenizer,
    opts: &TfidfOptions,
) -> Result<(DenseMatrix, Vocabulary)> {
    let tokens: Vec<Vec<String>> = docs.par_iter().map(|d| tokenizer.tokenize(&d.text())).collect();
    build_tfidf_tokens(&tokens, opts)
}

/// TF–IDF over pre-tokenized documents: raw counts times
/// `ln((1+N)/(1+df)) + 1`, rows scaled to unit L2 norm. Terms are sorted,
/// so the result does not depend on document order.
pub fn build_tfidf_tokens(
    docs: &[Vec<String>],
    opts: &TfidfOptions,
) -> Result<(DenseMatrix, Vocabulary)> {
    let n = docs.len();
    if n < 2 {
        return Err(Error::argument(format!("need at least 2 documents, got {n}")));
    }
    if opts.min_df < 1 {
        return Err(Error::argument("min_df must be at least 1"));
    }
    if !(opts.max_df_fraction > 0.0 && opts.max_df_fraction <= 1.0) {
        return Err(Error::argument("max_df_fraction must lie in (0, 1]"));
    }

    let counts: Vec<HashMap<&str, usize>> = docs
        .par_iter()
        .map(|toks| {
            let mut c = HashMap::new();
            for t in toks {
                *c.entry(t.as_str()).or_insert(0) += 1;
            }
            c
        })
        .collect();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for c in &counts {
        for &t in c.keys() {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let max_df = opts.max_df_fraction * n as f64;
    let (terms, document_frequency): (Vec<String>, Vec<usize>) = df
        .into_iter()
        .filter(|&(_, d)| d >= opts.min_df && d as f64 <= max_df)
        .map(|(t, d)| (t.to_string(), d))
        .unzip();
    if terms.is_empty() {
        return Err(Error::domain("vocabulary is empty after document-frequency filtering"));
    }
    let vocab = Vocabulary {
        terms,
        document_frequency,
    };
    let idf: Vec<f64> = vocab
        .document_frequency
        .iter()
        .map(|&d| ((1.0 + n as f64) / (1.0 + d as f64)).ln() + 1.0)
        .collect();

    let rows: Vec<Vec<f64>> = counts
        .par_iter()
        .map(|c| {
            let mut row = vec![0.0; vocab.len()];
            for (&t, &tf) in c {
                if let Some(j) = vocab.index_of(t) {
                    row[j] = tf as f64 * idf[j];
                }
            }
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
            row
        })
        .collect();
    let m = vocab.len();
    let x = Array2::from_shape_vec((n, m), rows.into_iter().flatten().collect())
        .expect("row lengths equal vocabulary size");
    Ok((DenseMatrix::new(x)?, vocab))
}
