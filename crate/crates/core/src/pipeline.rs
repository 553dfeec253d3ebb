//! Stage functions and their bundle-backed runners.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binary::{ensemble_fit, BnmfModel, EnsembleModel};
use crate::config::RunConfig;
use crate::corpus::{
    build_property_matrix, build_tfidf, parse_corpus, read_corpus, write_property_tsv, Document,
    MaterialsPropertyMatrix, Vocabulary,
};
use crate::error::{Error, Result};
use crate::eval::{
    cross_validate, rank_candidates, write_hit_tsv, write_violin_tsv, EvalReport, RankingTable,
};
use crate::hnmfk::{build_hierarchy, TopicTree};
use crate::matrix::{Cell, DenseMatrix, MaskedBinaryMatrix};
use crate::search::{match_topics, Logic};
use crate::store::{artifact, Bundle, Stage};

/// Stored result of the evaluate stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalArtifact {
    pub query: String,
    pub target_topics: Vec<String>,
    pub target_materials: Vec<String>,
    pub decoy_materials: Vec<String>,
    pub report: EvalReport,
    pub ranking: RankingTable,
}

/// The ensemble minus its score matrix, which is stored separately.
#[derive(Serialize, Deserialize)]
struct EnsembleRecord {
    bnmf: BnmfModel,
    b_r: Vec<f64>,
    b_c: Vec<f64>,
    lmf_loss: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    #[default]
    Unknown,
    Zero,
    One,
    All,
}

impl CellStatus {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "unknown" => Ok(CellStatus::Unknown),
            "zero" => Ok(CellStatus::Zero),
            "one" => Ok(CellStatus::One),
            "all" => Ok(CellStatus::All),
            _ => Err(Error::argument(format!(
                "status must be one of unknown, zero, one, all; got `{s}`"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CellStatus::Unknown => "unknown",
            CellStatus::Zero => "zero",
            CellStatus::One => "one",
            CellStatus::All => "all",
        }
    }

    fn admits(self, c: Cell) -> bool {
        match self {
            CellStatus::Unknown => c == Cell::Unknown,
            CellStatus::Zero => c == Cell::Zero,
            CellStatus::One => c == Cell::One,
            CellStatus::All => true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub topic: String,
    pub material: String,
    pub score: f64,
    pub status: CellStatus,
    /// Member documents of the topic tagged with the material.
    pub provenance: usize,
}

pub fn ingest(docs: &[Document], config: &RunConfig) -> Result<(Vocabulary, DenseMatrix)> {
    let (x, vocab) = build_tfidf(docs, &config.tokenizer, &config.tfidf)?;
    Ok((vocab, x))
}

pub fn hierarchy(x: &DenseMatrix, vocab: &Vocabulary, config: &RunConfig) -> Result<TopicTree> {
    if x.cols() != vocab.len() {
        return Err(Error::argument("TF-IDF columns do not match the vocabulary"));
    }
    let ids: Vec<usize> = (0..x.rows()).collect();
    build_hierarchy(x, &ids, &vocab.terms, &config.hierarchy)
}

/// Row indices of the topics whose ranked tokens match the target query.
pub fn target_topics(tree: &TopicTree, t: &MaskedBinaryMatrix, config: &RunConfig) -> Result<Vec<usize>> {
    let ev = &config.evaluate;
    let ids = match_topics(tree, std::slice::from_ref(&ev.target_query), Logic::Or, ev.query_top_n);
    if ids.is_empty() {
        return Err(Error::domain(format!(
            "no topic matches the target query `{}`",
            ev.target_query
        )));
    }
    ids.iter()
        .map(|id| {
            t.row_index(id)
                .ok_or_else(|| Error::argument(format!("topic `{id}` is not a property-matrix row")))
        })
        .collect()
}

/// Column indices of the target materials: the configured list, or every
/// material linked to at least half of the target rows.
pub fn target_materials(t: &MaskedBinaryMatrix, rows: &[usize], config: &RunConfig) -> Result<Vec<usize>> {
    let listed = &config.evaluate.target_materials;
    let cols: Vec<usize> = if listed.is_empty() {
        (0..t.cols())
            .filter(|&j| 2 * rows.iter().filter(|&&i| t.get(i, j) == Cell::One).count() >= rows.len())
            .collect()
    } else {
        columns(t, listed)?
    };
    if cols.is_empty() {
        return Err(Error::domain("no material is linked to half of the target topics"));
    }
    Ok(cols)
}

fn columns(t: &MaskedBinaryMatrix, names: &[String]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|m| t.col_index(m).ok_or_else(|| Error::NotFound(format!("material `{m}`"))))
        .collect()
}

pub fn evaluate(
    mpm: &MaterialsPropertyMatrix,
    tree: &TopicTree,
    config: &RunConfig,
) -> Result<EvalArtifact> {
    let t = &mpm.matrix;
    let rows = target_topics(tree, t, config)?;
    let cols = target_materials(t, &rows, config)?;
    let decoys: Vec<usize> = if config.evaluate.decoy_materials.is_empty() {
        (0..t.cols()).filter(|j| !cols.contains(j)).collect()
    } else {
        columns(t, &config.evaluate.decoy_materials)?
    };
    let ens = &config.ensemble;
    let seed = config.evaluate.seed;
    let report = cross_validate(t, &rows, &cols, ens, &config.evaluate.cv, seed)?;
    let mut held_out: Vec<(usize, String)> = cols.iter().map(|&j| (j, "target".to_string())).collect();
    held_out.extend(decoys.iter().map(|&j| (j, "decoy".to_string())));
    let ranking = rank_candidates(t, &rows, &held_out, ens, seed)?;
    let label = |js: &[usize]| js.iter().map(|&j| t.col_labels()[j].clone()).collect();
    Ok(EvalArtifact {
        query: config.evaluate.target_query.clone(),
        target_topics: rows.iter().map(|&i| t.row_labels()[i].clone()).collect(),
        target_materials: label(&cols),
        decoy_materials: label(&decoys),
        report,
        ranking,
    })
}

/// Top `top` cells with the given status, by score descending then
/// (row, col) ascending.
pub fn predictions(
    mpm: &MaterialsPropertyMatrix,
    scores: &DenseMatrix,
    status: CellStatus,
    top: usize,
) -> Result<Vec<Prediction>> {
    let t = &mpm.matrix;
    if scores.rows() != t.rows() || scores.cols() != t.cols() {
        return Err(Error::argument("score matrix does not match the property matrix"));
    }
    let mut cells: Vec<(usize, usize, Cell)> = t.iter().filter(|&(_, _, c)| status.admits(c)).collect();
    cells.sort_by(|a, b| {
        scores
            .get(b.0, b.1)
            .total_cmp(&scores.get(a.0, a.1))
            .then((a.0, a.1).cmp(&(b.0, b.1)))
    });
    Ok(cells
        .into_iter()
        .take(top)
        .map(|(i, j, c)| Prediction {
            topic: t.row_labels()[i].clone(),
            material: t.col_labels()[j].clone(),
            score: scores.get(i, j),
            status: match c {
                Cell::One => CellStatus::One,
                Cell::Zero => CellStatus::Zero,
                Cell::Unknown => CellStatus::Unknown,
            },
            provenance: mpm.support(i, j),
        })
        .collect())
}

// ---- bundle runners ----

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IngestSummary {
    pub documents: usize,
    pub vocabulary: usize,
    pub nonzeros: usize,
    pub facets: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HierarchySummary {
    pub nodes_per_depth: Vec<usize>,
    pub total_topics: usize,
    pub leaves: usize,
    pub root_rank: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertySummary {
    pub topics: usize,
    pub materials: usize,
    pub ones: usize,
    pub zeros: usize,
    pub unknown: usize,
    /// Ones over observed cells.
    pub density: f64,
    pub unknown_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitSummary {
    pub rank: usize,
    pub hamming_error: usize,
    pub lmf_loss: f64,
}

fn stage_write<T>(
    dir: &Path,
    config: &RunConfig,
    stage: Stage,
    needs: &[&str],
    body: impl FnOnce(&Bundle) -> Result<(T, Vec<(&'static str, Vec<u8>)>)>,
) -> Result<T> {
    let mut bundle = if stage == Stage::Ingest {
        Bundle::open_or_create(dir, config)?
    } else {
        Bundle::open(dir)?
    };
    bundle.require(needs)?;
    let _lock = bundle.lock()?;
    let (out, files) = body(&bundle)?;
    bundle.invalidate_from(stage)?;
    for (name, bytes) in files {
        bundle.put_bytes(name, &bytes)?;
    }
    bundle.commit(config)?;
    Ok(out)
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn corpus_bytes(docs: &[Document]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for d in docs {
        serde_json::to_writer(&mut out, d)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn run_ingest(corpus: &Path, dir: &Path, config: &RunConfig) -> Result<IngestSummary> {
    let docs = read_corpus(corpus)?;
    let (vocab, x) = ingest(&docs, config)?;
    let mut facets: Vec<String> = docs.iter().flat_map(|d| d.attributes.keys().cloned()).collect();
    facets.sort();
    facets.dedup();
    let summary = IngestSummary {
        documents: docs.len(),
        vocabulary: vocab.len(),
        nonzeros: x.view().iter().filter(|&&v| v != 0.0).count(),
        facets,
    };
    stage_write(dir, config, Stage::Ingest, &[], |_| {
        Ok((
            summary,
            vec![
                (artifact::CORPUS, corpus_bytes(&docs)?),
                (artifact::VOCABULARY, json(&vocab)?),
                (artifact::TFIDF, crate::store::encode_matrix(&x)),
            ],
        ))
    })
}

pub fn load_corpus(bundle: &Bundle) -> Result<Vec<Document>> {
    let bytes = bundle.read_bytes(artifact::CORPUS)?;
    parse_corpus(bytes.as_slice(), &bundle.dir().join("corpus.jsonl"))
}

pub fn load_ensemble(bundle: &Bundle) -> Result<EnsembleModel> {
    let rec: EnsembleRecord = bundle.read_json(artifact::ENSEMBLE)?;
    Ok(EnsembleModel {
        bnmf: rec.bnmf,
        b_r: rec.b_r,
        b_c: rec.b_c,
        lmf_loss: rec.lmf_loss,
        scores: bundle.read_matrix(artifact::SCORES)?,
    })
}

pub fn run_hierarchy(dir: &Path, config: &RunConfig) -> Result<HierarchySummary> {
    stage_write(dir, config, Stage::Hierarchy, &[artifact::VOCABULARY, artifact::TFIDF], |b| {
        let vocab: Vocabulary = b.read_json(artifact::VOCABULARY)?;
        let x = b.read_matrix(artifact::TFIDF)?;
        let tree = hierarchy(&x, &vocab, config)?;
        let summary = HierarchySummary {
            nodes_per_depth: tree.nodes_per_depth(),
            total_topics: tree.total_topics(),
            leaves: tree.leaves().len(),
            root_rank: tree.root().local_rank,
        };
        Ok((summary, vec![(artifact::TREE, json(&tree)?)]))
    })
}

pub fn run_propmatrix(dir: &Path, config: &RunConfig) -> Result<PropertySummary> {
    stage_write(dir, config, Stage::Propmatrix, &[artifact::CORPUS, artifact::TREE], |b| {
        let docs = load_corpus(b)?;
        let tree: TopicTree = b.read_json(artifact::TREE)?;
        let mpm = build_property_matrix(&tree, &docs, &config.property)?;
        let m = &mpm.matrix;
        let (ones, zeros, unknown) = (m.count(Cell::One), m.count(Cell::Zero), m.count(Cell::Unknown));
        let summary = PropertySummary {
            topics: m.rows(),
            materials: m.cols(),
            ones,
            zeros,
            unknown,
            density: ones as f64 / (ones + zeros).max(1) as f64,
            unknown_fraction: unknown as f64 / (m.rows() * m.cols()) as f64,
        };
        let mut tsv = Vec::new();
        write_property_tsv(m, &mut tsv).map_err(|e| Error::io("formatting property.tsv", e))?;
        Ok((
            summary,
            vec![(artifact::PROPERTY, json(&mpm)?), (artifact::PROPERTY_TSV, tsv)],
        ))
    })
}

pub fn run_fit(dir: &Path, config: &RunConfig) -> Result<FitSummary> {
    stage_write(dir, config, Stage::Fit, &[artifact::PROPERTY], |b| {
        let mpm: MaterialsPropertyMatrix = b.read_json(artifact::PROPERTY)?;
        let model = ensemble_fit(&mpm.matrix, &config.ensemble, config.fit_seed)?;
        let summary = FitSummary {
            rank: model.bnmf.rank,
            hamming_error: model.bnmf.hamming_error,
            lmf_loss: model.lmf_loss,
        };
        let rec = EnsembleRecord {
            bnmf: model.bnmf,
            b_r: model.b_r,
            b_c: model.b_c,
            lmf_loss: model.lmf_loss,
        };
        Ok((
            summary,
            vec![
                (artifact::ENSEMBLE, json(&rec)?),
                (artifact::SCORES, crate::store::encode_matrix(&model.scores)),
            ],
        ))
    })
}

pub fn run_evaluate(dir: &Path, config: &RunConfig) -> Result<EvalArtifact> {
    stage_write(dir, config, Stage::Evaluate, &[artifact::TREE, artifact::PROPERTY], |b| {
        let mpm: MaterialsPropertyMatrix = b.read_json(artifact::PROPERTY)?;
        let tree: TopicTree = b.read_json(artifact::TREE)?;
        let art = evaluate(&mpm, &tree, config)?;
        let mut hit = Vec::new();
        write_hit_tsv(&art.report, &mut hit).map_err(|e| Error::io("formatting hit_at_k.tsv", e))?;
        let mut violin = Vec::new();
        write_violin_tsv(&art.report.separation, &mut violin)
            .map_err(|e| Error::io("formatting violin.tsv", e))?;
        let files = vec![
            (artifact::EVAL, json(&art)?),
            (artifact::HIT_TSV, hit),
            (artifact::VIOLIN_TSV, violin),
        ];
        Ok((art, files))
    })
}

pub fn run_predict(dir: &Path, status: CellStatus, top: usize) -> Result<Vec<Prediction>> {
    let bundle = Bundle::open(dir)?;
    bundle.require(&[artifact::PROPERTY, artifact::ENSEMBLE, artifact::SCORES])?;
    let mpm: MaterialsPropertyMatrix = bundle.read_json(artifact::PROPERTY)?;
    let scores = bundle.read_matrix(artifact::SCORES)?;
    predictions(&mpm, &scores, status, top)
}

/// Defaults, then the bundle's recorded config when one exists, then the
/// config file, then `key=value` overrides.
pub fn resolve_config(
    bundle: Option<&Path>,
    file: Option<&Path>,
    overrides: &[String],
) -> Result<RunConfig> {
    let mut config = match file {
        Some(path) => RunConfig::load(path)?,
        None => match bundle {
            Some(dir) if dir.join(crate::store::MANIFEST).exists() => {
                Bundle::open(dir)?.manifest().config.clone()
            }
            _ => RunConfig::default(),
        },
    };
    for o in overrides {
        config.set(o)?;
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mpm() -> MaterialsPropertyMatrix {
        let cells = vec![Cell::One, Cell::Unknown, Cell::Zero, Cell::Unknown];
        let matrix = MaskedBinaryMatrix::from_cells(2, 2, cells).unwrap();
        MaterialsPropertyMatrix {
            matrix,
            provenance: vec![3, 1, 0, 0],
            coverage: vec![5, 5],
        }
    }

    #[test]
    fn predictions_filter_sort_and_truncate() {
        let scores = DenseMatrix::from_row_major(2, 2, vec![0.9, 0.4, 0.1, 0.4]).unwrap();
        let p = predictions(&mpm(), &scores, CellStatus::Unknown, 5).unwrap();
        let got: Vec<(&str, &str)> = p.iter().map(|p| (p.topic.as_str(), p.material.as_str())).collect();
        assert_eq!(got, [("r0", "c1"), ("r1", "c1")]);
        assert_eq!(p[0].provenance, 1);
        let all = predictions(&mpm(), &scores, CellStatus::All, 1).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].status, CellStatus::One);
        assert!(CellStatus::parse("maybe").is_err());
    }

    #[test]
    fn auto_target_materials_need_half_the_rows() {
        let bits = [true, true, false, true, false, false, true, false, true];
        let t = MaskedBinaryMatrix::from_bools(3, 3, &bits).unwrap();
        let config = RunConfig::default();
        assert_eq!(target_materials(&t, &[0, 1, 2], &config).unwrap(), [0]);
        assert_eq!(target_materials(&t, &[0, 1], &config).unwrap(), [0, 1]);
        let mut named = config.clone();
        named.evaluate.target_materials = vec!["c2".into()];
        assert_eq!(target_materials(&t, &[0], &named).unwrap(), [2]);
        named.evaluate.target_materials = vec!["zz".into()];
        assert!(matches!(target_materials(&t, &[0], &named), Err(Error::NotFound(_))));
    }

    #[test]
    fn later_stage_needs_a_bundle() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(run_fit(dir.path(), &RunConfig::default()), Err(Error::NotFound(_))));
    }
}
