//! Keyword and full-text search over a topic tree with facet filters.

use std::collections::BTreeMap;

use topiclink::corpus::{build_tfidf, facet_distribution, synth, TfidfOptions, Tokenizer};
use topiclink::hnmfk::{build_hierarchy, HnmfkConfig};
use topiclink::search::{search, Logic, SearchMode, SearchQuery};

fn main() -> topiclink::Result<()> {
    let corpus = synth::generate(&synth::SynthConfig::preset(synth::PLANTED_TMD)?)?;
    let (x, vocab) = build_tfidf(&corpus.docs, &Tokenizer::default(), &TfidfOptions::default())?;
    let ids: Vec<usize> = (0..x.rows()).collect();
    let tree = build_hierarchy(&x, &ids, &vocab.terms, &HnmfkConfig { d_max: 2, ..Default::default() })?;

    let hits = search(&SearchQuery::keywords(&["superconduct"]), &tree, &corpus.docs)?;
    println!("keyword: {} topics {:?}", hits.nodes.len(), hits.nodes);
    if let Some(first) = hits.nodes.first() {
        for share in facet_distribution(tree.get(first).unwrap(), &corpus.docs, "material") {
            println!("  {:>8} {:>3} {:5.1}%", share.value, share.count, share.percentage);
        }
    }

    let both = SearchQuery { logic: Logic::And, ..SearchQuery::keywords(&["superconduct", "magnet"]) };
    println!("and-logic: {} topics", search(&both, &tree, &corpus.docs)?.nodes.len());

    let mut facet_filters = BTreeMap::new();
    facet_filters.insert("material".to_string(), vec!["NbSe2".to_string()]);
    let text = SearchQuery { mode: SearchMode::Denovo, facet_filters, ..SearchQuery::keywords(&["transition"]) };
    let found = search(&text, &tree, &corpus.docs)?;
    println!("full text + NbSe2 filter: {} documents in {} topics", found.documents.len(), found.nodes.len());
    Ok(())
}
