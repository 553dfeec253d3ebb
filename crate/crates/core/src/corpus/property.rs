use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::document::Document;
use crate::error::{Error, Result};
use crate::hnmfk::{TopicNode, TopicTree};
use crate::matrix::{Cell, MaskedBinaryMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropertyOptions {
    pub facet: String,
    /// Supporting documents needed to mark a link present.
    pub assoc_min: usize,
    /// Tagged member documents a topic needs before an absent material
    /// counts as a known zero.
    pub coverage_floor: usize,
}

impl Default for PropertyOptions {
    fn default() -> Self {
        PropertyOptions {
            facet: "material".into(),
            assoc_min: 2,
            coverage_floor: 5,
        }
    }
}

/// Topic×material links. Rows are every tree node in preorder, labelled by
/// path id; columns are the sorted material values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialsPropertyMatrix {
    pub matrix: MaskedBinaryMatrix,
    /// Supporting document count per cell, row-major.
    pub provenance: Vec<usize>,
    /// Member documents with at least one value of the facet, per row.
    pub coverage: Vec<usize>,
}

impl MaterialsPropertyMatrix {
    pub fn support(&self, i: usize, j: usize) -> usize {
        self.provenance[i * self.matrix.cols() + j]
    }
}

pub fn build_property_matrix(
    tree: &TopicTree,
    docs: &[Document],
    opts: &PropertyOptions,
) -> Result<MaterialsPropertyMatrix> {
    if opts.assoc_min < 1 || opts.coverage_floor < 1 {
        return Err(Error::argument("assoc_min and coverage_floor must be at least 1"));
    }
    let materials: Vec<String> = docs
        .iter()
        .flat_map(|d| d.facet(&opts.facet).iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if materials.is_empty() {
        return Err(Error::domain(format!(
            "facet `{}` does not occur in any document",
            opts.facet
        )));
    }
    let col_of: BTreeMap<&str, usize> = materials
        .iter()
        .enumerate()
        .map(|(j, m)| (m.as_str(), j))
        .collect();

    let nodes = tree.nodes();
    let m = materials.len();
    let mut provenance = vec![0usize; nodes.len() * m];
    let mut coverage = vec![0usize; nodes.len()];
    let mut cells = Vec::with_capacity(nodes.len() * m);
    for (i, node) in nodes.iter().enumerate() {
        for &id in &node.member_ids {
            let doc = docs.get(id).ok_or_else(|| {
                Error::argument(format!(
                    "node `{}` member {id} is outside the corpus of {} documents",
                    node.path_id,
                    docs.len()
                ))
            })?;
            let tags: BTreeSet<usize> = doc.facet(&opts.facet).iter().map(|t| col_of[t.as_str()]).collect();
            if !tags.is_empty() {
                coverage[i] += 1;
            }
            for j in tags {
                provenance[i * m + j] += 1;
            }
        }
        for j in 0..m {
            let count = provenance[i * m + j];
            cells.push(if count >= opts.assoc_min {
                Cell::One
            } else if count == 0 && coverage[i] >= opts.coverage_floor {
                Cell::Zero
            } else {
                Cell::Unknown
            });
        }
    }
    let row_labels = nodes.iter().map(|n| n.path_id.clone()).collect();
    let matrix = MaskedBinaryMatrix::new(nodes.len(), m, cells, row_labels, materials)?;
    Ok(MaterialsPropertyMatrix {
        matrix,
        provenance,
        coverage,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FacetShare {
    pub value: String,
    pub count: usize,
    pub percentage: f64,
}

/// Facet values among a node's members, most frequent first (ties by
/// value). Percentages are over all value occurrences, so a document with
/// two values contributes to both.
pub fn facet_distribution(node: &TopicNode, docs: &[Document], facet: &str) -> Vec<FacetShare> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for &id in &node.member_ids {
        if let Some(doc) = docs.get(id) {
            for v in doc.facet(facet) {
                *counts.entry(v.as_str()).or_insert(0) += 1;
            }
        }
    }
    let total: usize = counts.values().sum();
    let mut out: Vec<FacetShare> = counts
        .into_iter()
        .map(|(value, count)| FacetShare {
            value: value.to_string(),
            count,
            percentage: 100.0 * count as f64 / total as f64,
        })
        .collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.value.cmp(&b.value)));
    out
}

/// Tab-separated export: a header of material labels after a `topic`
/// column, then one row per topic with cells `1`, `0` or `NA`.
pub fn write_property_tsv(matrix: &MaskedBinaryMatrix, mut out: impl Write) -> std::io::Result<()> {
    write!(out, "topic")?;
    for c in matrix.col_labels() {
        write!(out, "\t{c}")?;
    }
    writeln!(out)?;
    for (i, label) in matrix.row_labels().iter().enumerate() {
        write!(out, "{label}")?;
        for j in 0..matrix.cols() {
            let cell = match matrix.get(i, j) {
                Cell::One => "1",
                Cell::Zero => "0",
                Cell::Unknown => "NA",
            };
            write!(out, "\t{cell}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_property_tsv(reader: impl BufRead, source: &Path) -> Result<MaskedBinaryMatrix> {
    let err = |line: usize, message: String| Error::Parse {
        path: source.to_path_buf(),
        line,
        message,
    };
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| err(1, "missing header".into()))?
        .map_err(|e| err(1, e.to_string()))?;
    let mut fields = header.split('\t');
    if fields.next() != Some("topic") {
        return Err(err(1, "header must start with `topic`".into()));
    }
    let cols: Vec<String> = fields.map(String::from).collect();
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line.map_err(|e| err(line_no, e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        rows.push(fields.next().unwrap_or_default().to_string());
        let before = cells.len();
        for f in fields {
            cells.push(match f {
                "1" => Cell::One,
                "0" => Cell::Zero,
                "NA" => Cell::Unknown,
                other => return Err(err(line_no, format!("bad cell `{other}`"))),
            });
        }
        if cells.len() - before != cols.len() {
            return Err(err(line_no, format!("expected {} cells", cols.len())));
        }
    }
    MaskedBinaryMatrix::new(rows.len(), cols.len(), cells, rows, cols)
}
