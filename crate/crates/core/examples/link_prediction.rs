//! The planted superconductor experiment: cross-validated hit@k, score
//! separation and candidate ranking.

use topiclink::binary::EnsembleConfig;
use topiclink::corpus::{build_property_matrix, build_tfidf, synth, PropertyOptions, TfidfOptions, Tokenizer};
use topiclink::eval::{cross_validate, rank_candidates, CvOptions};
use topiclink::hnmfk::{build_hierarchy, HnmfkConfig};
use topiclink::search::{match_topics, Logic, TopN};

fn main() -> topiclink::Result<()> {
    let corpus = synth::generate(&synth::SynthConfig::preset(synth::PLANTED_TMD)?)?;
    let (x, vocab) = build_tfidf(&corpus.docs, &Tokenizer::default(), &TfidfOptions::default())?;
    let ids: Vec<usize> = (0..x.rows()).collect();
    let tree = build_hierarchy(&x, &ids, &vocab.terms, &HnmfkConfig::default())?;
    let t = build_property_matrix(&tree, &corpus.docs, &PropertyOptions::default())?.matrix;
    println!("property matrix {}x{}", t.rows(), t.cols());

    let topics = match_topics(&tree, &[synth::TARGET_QUERY.into()], Logic::Or, TopN::Count(10));
    let rows: Vec<usize> = topics.iter().filter_map(|id| t.row_index(id)).collect();
    let cols: Vec<usize> = synth::SUPERCONDUCTORS.iter().filter_map(|m| t.col_index(m)).collect();
    println!("target topics {topics:?}");

    let ensemble = EnsembleConfig::default();
    let report = cross_validate(&t, &rows, &cols, &ensemble, &CvOptions::default(), 7)?;
    for (k, v) in &report.hit_at {
        println!("hit@{k} {v:.3} ci {:?} folds {:?}", report.ci95[k], report.per_fold[k]);
    }
    let sep = &report.separation;
    println!(
        "positives median {:.3} (n={}), negatives median {:.3} (n={})",
        sep.positive.median, sep.positive.count, sep.negative.median, sep.negative.count
    );

    let mut held: Vec<(usize, String)> = cols.iter().map(|&j| (j, "superconductor".into())).collect();
    held.extend(synth::DECOYS.iter().filter_map(|m| t.col_index(m)).map(|j| (j, "decoy".into())));
    for row in rank_candidates(&t, &rows, &held, &ensemble, 0)?.rows {
        println!("{:>8} {:.3} {}", row.material, row.score, row.set);
    }
    Ok(())
}
