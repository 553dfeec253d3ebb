//! Dense nonnegative factorization and stability-based rank selection.

pub mod cluster;
pub mod nmf;
pub mod nmfk;

pub use nmf::{frobenius_error, nmf, nmf_from, random_init, FactorPair, NmfOptions};
pub use nmfk::{select_rank, RankSelectionOptions, RankSelectionReport};
