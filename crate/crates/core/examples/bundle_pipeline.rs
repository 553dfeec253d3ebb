//! Runs every pipeline stage into a bundle directory and reads it back.
//!
//!     cargo run --release --example bundle_pipeline [dir]

use topiclink::config::RunConfig;
use topiclink::corpus::{synth, write_corpus};
use topiclink::pipeline::{self, CellStatus, EvalArtifact};
use topiclink::store::{artifact, Bundle};

fn main() -> topiclink::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "target/example-bundle".into());
    let dir = std::path::Path::new(&dir);
    std::fs::create_dir_all(dir).map_err(|e| topiclink::Error::io("creating output dir", e))?;
    let corpus = synth::generate(&synth::SynthConfig::preset(synth::PLANTED_TMD)?)?;
    let corpus_path = dir.join("corpus.jsonl");
    write_corpus(&corpus_path, &corpus.docs)?;

    let bundle = dir.join("bundle");
    let mut config = RunConfig::default();
    config.set("evaluate.cv.negative_ratio=2")?;
    println!("{:?}", pipeline::run_ingest(&corpus_path, &bundle, &config)?);
    println!("{:?}", pipeline::run_hierarchy(&bundle, &config)?);
    println!("{:?}", pipeline::run_propmatrix(&bundle, &config)?);
    println!("{:?}", pipeline::run_fit(&bundle, &config)?);
    let eval = pipeline::run_evaluate(&bundle, &config)?;
    println!("hit@k {:?}", eval.report.hit_at);

    let opened = Bundle::open(&bundle)?;
    println!("checksum {}", opened.checksum());
    let stored: EvalArtifact = opened.read_json(artifact::EVAL)?;
    assert_eq!(stored.report.hit_at, eval.report.hit_at);
    for p in pipeline::run_predict(&bundle, CellStatus::Unknown, 5)? {
        println!("{:>8} {:>8} {:.3} support {}", p.topic, p.material, p.score, p.provenance);
    }
    Ok(())
}
