#![allow(dead_code)]

use std::collections::BTreeSet;

use topiclink::hnmfk::{child_candidate_ranks, HnmfkConfig, TopicNode, TopicTree};
use topiclink::DenseMatrix;

/// 60 documents × 30 tokens in three disjoint communities of 20 documents
/// and 10 tokens each; every in-community entry is 1.0.
pub fn three_communities() -> (DenseMatrix, Vec<BTreeSet<usize>>) {
    let x = DenseMatrix::from_fn(60, 30, |(i, j)| if i / 20 == j / 10 { 1.0 } else { 0.0 }).unwrap();
    let groups = (0..3).map(|c| (c * 20..(c + 1) * 20).collect()).collect();
    (x, groups)
}

pub fn token_names(n: usize) -> Vec<String> {
    (0..n).map(|j| format!("t{j:02}")).collect()
}

/// `n×n` block-diagonal matrix with `b` constant blocks of near-equal size.
pub fn block_diagonal(n: usize, b: usize) -> DenseMatrix {
    let block = |i: usize| i * b / n;
    DenseMatrix::from_fn(n, n, |(i, j)| if block(i) == block(j) { 1.0 } else { 0.0 }).unwrap()
}

/// Checks the partition, depth, size and rank bounds over the whole tree.
pub fn structural_violations(tree: &TopicTree, row_ids: &[usize], config: &HnmfkConfig) -> Vec<String> {
    let mut out = Vec::new();
    let root = tree.root();
    let all: BTreeSet<usize> = row_ids.iter().copied().collect();
    if root.member_ids.iter().copied().collect::<BTreeSet<_>>() != all {
        out.push("root members differ from the input rows".to_string());
    }
    if let Some(k) = root.local_rank {
        if !(config.k_min..=config.k_max).contains(&k) {
            out.push(format!("root rank {k} outside [{}, {}]", config.k_min, config.k_max));
        }
    }
    visit(root, config, &mut out);
    let mut leaves = BTreeSet::new();
    for leaf in tree.leaves() {
        for &m in &leaf.member_ids {
            if !leaves.insert(m) {
                out.push(format!("row {m} is in two leaves"));
            }
        }
    }
    if leaves != all {
        out.push("leaf members do not cover the input rows".to_string());
    }
    out
}

fn visit(node: &TopicNode, config: &HnmfkConfig, out: &mut Vec<String>) {
    if node.depth > config.d_max {
        out.push(format!("{} has depth {} > d_max", node.path_id, node.depth));
    }
    if node.children.is_empty() {
        return;
    }
    if node.member_ids.len() <= config.s_min {
        out.push(format!("internal node {} has only {} members", node.path_id, node.member_ids.len()));
    }
    let mut union = BTreeSet::new();
    let mut total = 0;
    for child in &node.children {
        total += child.member_ids.len();
        union.extend(child.member_ids.iter().copied());
        if child.depth != node.depth + 1 {
            out.push(format!("{} has depth {}", child.path_id, child.depth));
        }
        if let (Some(kd), Some(kc)) = (node.local_rank, child.local_rank) {
            if !child_candidate_ranks(kd, config).contains(&kc) {
                out.push(format!("{} rank {kc} not a candidate under parent rank {kd}", child.path_id));
            }
        }
        visit(child, config, out);
    }
    if total != union.len() {
        out.push(format!("children of {} overlap", node.path_id));
    }
    if union != node.member_ids.iter().copied().collect() {
        out.push(format!("children of {} do not cover it", node.path_id));
    }
}

/// `(path id, member set)` for every node, in preorder.
pub fn shape(tree: &TopicTree) -> Vec<(String, Vec<usize>)> {
    tree.nodes()
        .into_iter()
        .map(|n| (n.path_id.clone(), n.member_ids.clone()))
        .collect()
}

/// A complete bundle over a reduced synthetic corpus, built once per test
/// binary. Returns the bundle directory.
pub fn small_bundle() -> &'static std::path::Path {
    use topiclink::config::RunConfig;
    use topiclink::corpus::{synth, write_corpus};
    use topiclink::pipeline;

    static DIR: std::sync::OnceLock<tempfile::TempDir> = std::sync::OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let synth_config = synth::SynthConfig {
            docs_per_theme: 8,
            ..synth::SynthConfig::preset(synth::PLANTED_TMD).unwrap()
        };
        let corpus = synth::generate(&synth_config).unwrap();
        let corpus_path = dir.path().join("corpus.jsonl");
        write_corpus(&corpus_path, &corpus.docs).unwrap();
        let bundle = dir.path().join("bundle");
        let mut config = RunConfig::default();
        config.hierarchy.d_max = 2;
        pipeline::run_ingest(&corpus_path, &bundle, &config).unwrap();
        pipeline::run_hierarchy(&bundle, &config).unwrap();
        pipeline::run_propmatrix(&bundle, &config).unwrap();
        pipeline::run_fit(&bundle, &config).unwrap();
        pipeline::run_evaluate(&bundle, &config).unwrap();
        dir
    })
    .path()
    .join("bundle")
    .leak()
}
