//! Corpus ingestion: documents, tokenization, TF–IDF, and the topic×material
//! property matrix.

mod document;
mod property;
pub mod synth;
mod tfidf;
mod tokenize;

pub use document::{parse_corpus, read_corpus, write_corpus, Document};
pub use property::{
    build_property_matrix, facet_distribution, read_property_tsv, write_property_tsv,
    FacetShare, MaterialsPropertyMatrix, PropertyOptions,
};
pub use tfidf::{build_tfidf, build_tfidf_tokens, TfidfOptions, Vocabulary};
pub use tokenize::{tokenize, Tokenizer, DEFAULT_STOPWORDS};
