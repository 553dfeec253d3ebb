//! Generates the planted corpus and prints its material and facet mix.
//!
//!     cargo run --example synthetic_corpus [out.jsonl]

use std::collections::BTreeMap;

use topiclink::corpus::{synth, write_corpus};

fn main() -> topiclink::Result<()> {
    let config = synth::SynthConfig::preset(synth::PLANTED_TMD)?;
    let corpus = synth::generate(&config)?;
    println!("{} documents, {} with a noisy tag", corpus.docs.len(), corpus.noisy.len());

    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in &corpus.docs {
        for m in doc.facet("material") {
            *counts.entry(m.as_str()).or_default() += 1;
        }
    }
    for (m, n) in &counts {
        let mark = if synth::SUPERCONDUCTORS.contains(m) { " *" } else { "" };
        println!("{m:>8} {n:>4}{mark}");
    }
    let first = &corpus.docs[0];
    println!("\n{}: {}\n{}", first.id, first.title, first.abstract_text);

    if let Some(path) = std::env::args().nth(1) {
        write_corpus(path.as_ref(), &corpus.docs)?;
        println!("wrote {path}");
    }
    Ok(())
}
