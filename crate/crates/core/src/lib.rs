//! Hierarchical topic factorization over document corpora and link
//! prediction on the resulting topic×material matrix.
//!
//! The usual flow is [`corpus`] (documents to TF–IDF) → [`hnmfk`] (topic
//! tree) → [`corpus::build_property_matrix`] → [`binary`] (Boolean plus
//! logistic ensemble) → [`eval`]. [`pipeline`] runs those stages against a
//! [`store::Bundle`] directory and [`service`] serves a finished bundle.

pub mod binary;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod factor;
pub mod hnmfk;
pub mod matrix;
pub mod pipeline;
pub mod search;
pub mod seed;
pub mod service;
pub mod store;

pub use error::{Error, Result};
pub use matrix::{Cell, DenseMatrix, MaskedBinaryMatrix};
