//! Builds the topic tree over the synthetic corpus and prints it.

use topiclink::corpus::{build_tfidf, synth, TfidfOptions, Tokenizer};
use topiclink::hnmfk::{build_hierarchy, HnmfkConfig, TopicNode};

fn show(node: &TopicNode) {
    let tokens: Vec<&str> = node.top_tokens.iter().take(4).map(|t| t.token.as_str()).collect();
    println!(
        "{:indent$}{} ({} docs, rank {:?}, {:?}) {}",
        "",
        node.path_id,
        node.member_ids.len(),
        node.local_rank,
        node.stop_reason,
        tokens.join(" "),
        indent = node.depth * 2
    );
    node.children.iter().for_each(show);
}

fn main() -> topiclink::Result<()> {
    let corpus = synth::generate(&synth::SynthConfig::preset(synth::PLANTED_TMD)?)?;
    let (x, vocab) = build_tfidf(&corpus.docs, &Tokenizer::default(), &TfidfOptions::default())?;
    println!("tf-idf {}x{}", x.rows(), x.cols());
    let config = HnmfkConfig { d_max: 2, ..HnmfkConfig::default() };
    let ids: Vec<usize> = (0..x.rows()).collect();
    let tree = build_hierarchy(&x, &ids, &vocab.terms, &config)?;
    println!("nodes per depth {:?}", tree.nodes_per_depth());
    show(tree.root());
    Ok(())
}
