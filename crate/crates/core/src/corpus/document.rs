use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One corpus record. `attributes` maps a facet name (country, author,
/// material, ...) to its values.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, Vec<String>>,
}

impl Document {
    /// Title and abstract joined by a space.
    pub fn text(&self) -> String {
        format!("{} {}", self.title, self.abstract_text)
    }

    pub fn facet(&self, name: &str) -> &[String] {
        self.attributes.get(name).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Parses newline-delimited JSON records. Blank lines are skipped; `source`
/// only labels error messages.
pub fn parse_corpus(reader: impl BufRead, source: &Path) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let parse_err = |message: String| Error::Parse {
            path: source.to_path_buf(),
            line: line_no,
            message,
        };
        let line = line.map_err(|e| parse_err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        if doc.id.is_empty() {
            return Err(parse_err("empty id".into()));
        }
        if doc.title.trim().is_empty() && doc.abstract_text.trim().is_empty() {
            return Err(parse_err(format!("document `{}` has no title or abstract", doc.id)));
        }
        if !seen.insert(doc.id.clone()) {
            return Err(parse_err(format!("duplicate id `{}`", doc.id)));
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn read_corpus(path: &Path) -> Result<Vec<Document>> {
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    parse_corpus(BufReader::new(file), path)
}

pub fn write_corpus(path: &Path, docs: &[Document]) -> Result<()> {
    let file =
        File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut out = BufWriter::new(file);
    for doc in docs {
        serde_json::to_writer(&mut out, doc)?;
        out.write_all(b"\n")
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    }
    out.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<Document>> {
        parse_corpus(text.as_bytes(), Path::new("mem.jsonl"))
    }

    #[test]
    fn parses_records_and_skips_blank_lines() {
        let docs = parse(
            r#"{"id":"a","title":"T","abstract":"A","attributes":{"material":["NbSe2"]}}

{"id":"b","title":"","abstract":"only abstract"}"#,
        )
        .unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].facet("material"), ["NbSe2".to_string()]);
        assert!(docs[1].facet("material").is_empty());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse("{\"id\":\"a\",\"title\":\"x\"}\n{not json}\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");

        let err = parse("{\"id\":\"a\",\"title\":\"x\"}\n{\"id\":\"a\",\"title\":\"y\"}").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));

        let err = parse("{\"id\":\"a\",\"title\":\" \",\"abstract\":\"\"}").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));

        let err = parse("{\"id\":\"a\",\"title\":\"x\",\"extra\":1}").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }
}
