//! Token and facet search over a topic tree and its corpus.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::hnmfk::{TopicNode, TopicTree};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// Match against each node's ranked tokens.
    #[default]
    Keywords,
    /// Match against raw document text.
    Denovo,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Logic {
    And,
    #[default]
    Or,
}

/// How many ranked tokens per node are searched. Serialized as a number or
/// the string `"all"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TopN {
    Count(usize),
    All,
}

impl Default for TopN {
    fn default() -> Self {
        TopN::Count(10)
    }
}

impl TopN {
    fn take(self, len: usize) -> usize {
        match self {
            TopN::Count(n) => n.min(len),
            TopN::All => len,
        }
    }
}

impl Serialize for TopN {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TopN::Count(n) => s.serialize_u64(*n as u64),
            TopN::All => s.serialize_str("all"),
        }
    }
}

impl<'de> Deserialize<'de> for TopN {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = TopN;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a token count or \"all\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<TopN, E> {
                Ok(TopN::Count(v as usize))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<TopN, E> {
                usize::try_from(v)
                    .map(TopN::Count)
                    .map_err(|_| E::custom("top_n must be nonnegative"))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<TopN, E> {
                match v {
                    "all" => Ok(TopN::All),
                    _ => Err(E::custom(format!("expected a count or \"all\", got `{v}`"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchQuery {
    pub tokens: Vec<String>,
    pub mode: SearchMode,
    pub logic: Logic,
    pub top_n: TopN,
    pub facet_filters: BTreeMap<String, Vec<String>>,
    pub selected_clusters: Vec<String>,
}

impl SearchQuery {
    pub fn keywords(tokens: &[&str]) -> Self {
        SearchQuery {
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
            ..Default::default()
        }
    }

    /// Field-level problems, empty when the query is valid.
    pub fn problems(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if self.tokens.is_empty() && self.facet_filters.is_empty() && self.selected_clusters.is_empty()
        {
            out.push((
                "tokens".into(),
                "at least one of tokens, facet_filters, selected_clusters is required".into(),
            ));
        }
        if self.tokens.iter().any(|t| t.trim().is_empty()) {
            out.push(("tokens".into(), "tokens must be non-empty".into()));
        }
        if self.top_n == TopN::Count(0) {
            out.push(("top_n".into(), "top_n must be positive or \"all\"".into()));
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    /// Matching path ids in preorder.
    pub nodes: Vec<String>,
    /// Matching document indices, ascending.
    pub documents: Vec<usize>,
}

/// Whether the node's first `top_n` tokens satisfy the token predicate.
/// Each query token matches any ranked token it is a prefix of.
pub fn node_matches(node: &TopicNode, tokens: &[String], logic: Logic, top_n: TopN) -> bool {
    let ranked = &node.top_tokens[..top_n.take(node.top_tokens.len())];
    let hit = |q: &String| {
        let q = q.to_lowercase();
        ranked.iter().any(|t| t.token.starts_with(&q))
    };
    match logic {
        Logic::And => tokens.iter().all(hit),
        Logic::Or => tokens.iter().any(hit),
    }
}

/// Path ids of nodes whose ranked tokens match the query tokens.
pub fn match_topics(tree: &TopicTree, tokens: &[String], logic: Logic, top_n: TopN) -> Vec<String> {
    tree.nodes()
        .into_iter()
        .filter(|n| node_matches(n, tokens, logic, top_n))
        .map(|n| n.path_id.clone())
        .collect()
}

pub fn search(query: &SearchQuery, tree: &TopicTree, docs: &[Document]) -> Result<SearchResult> {
    if let Some((field, msg)) = query.problems().into_iter().next() {
        return Err(Error::argument(format!("{field}: {msg}")));
    }
    let facets: BTreeSet<&str> = docs
        .iter()
        .flat_map(|d| d.attributes.keys().map(String::as_str))
        .collect();
    if let Some(bad) = query.facet_filters.keys().find(|f| !facets.contains(f.as_str())) {
        return Err(Error::argument(format!("unknown facet `{bad}`")));
    }

    let nodes = tree.nodes();
    let mut allowed_nodes: Option<BTreeSet<String>> = None;
    let mut allowed_docs: Option<BTreeSet<usize>> = None;
    if !query.selected_clusters.is_empty() {
        let mut ids = BTreeSet::new();
        let mut members = BTreeSet::new();
        for c in &query.selected_clusters {
            let node = tree
                .get(c)
                .ok_or_else(|| Error::NotFound(format!("topic `{c}`")))?;
            ids.extend(tree.subtree_ids(c).unwrap_or_default());
            members.extend(node.member_ids.iter().copied());
        }
        allowed_nodes = Some(ids);
        allowed_docs = Some(members);
    }

    let mut doc_hits: BTreeSet<usize> = (0..docs.len()).collect();
    let mut node_hits: Vec<&TopicNode> = nodes.clone();
    if !query.tokens.is_empty() {
        match query.mode {
            SearchMode::Keywords => {
                node_hits.retain(|n| node_matches(n, &query.tokens, query.logic, query.top_n));
                doc_hits = node_hits.iter().flat_map(|n| n.member_ids.iter().copied()).collect();
            }
            SearchMode::Denovo => {
                let needles: Vec<String> = query.tokens.iter().map(|t| t.to_lowercase()).collect();
                doc_hits.retain(|&i| {
                    let text = docs[i].text().to_lowercase();
                    match query.logic {
                        Logic::And => needles.iter().all(|q| text.contains(q.as_str())),
                        Logic::Or => needles.iter().any(|q| text.contains(q.as_str())),
                    }
                });
                node_hits.retain(|n| n.member_ids.iter().any(|i| doc_hits.contains(i)));
            }
        }
    }
    if let Some(allowed) = &allowed_docs {
        doc_hits.retain(|i| allowed.contains(i));
    }
    if !query.facet_filters.is_empty() {
        doc_hits.retain(|&i| {
            query.facet_filters.iter().all(|(facet, values)| {
                docs[i].facet(facet).iter().any(|v| values.contains(v))
            })
        });
    }
    if let Some(allowed) = &allowed_nodes {
        node_hits.retain(|n| allowed.contains(&n.path_id));
    }
    if !query.facet_filters.is_empty() {
        node_hits.retain(|n| n.member_ids.iter().any(|i| doc_hits.contains(i)));
    }
    Ok(SearchResult {
        nodes: node_hits.iter().map(|n| n.path_id.clone()).collect(),
        documents: doc_hits.into_iter().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hnmfk::{StopReason, TokenWeight};

    fn node(path: &str, tokens: &[&str], members: Vec<usize>, children: Vec<TopicNode>) -> TopicNode {
        TopicNode {
            path_id: path.into(),
            depth: path.matches('_').count() + usize::from(path != "root"),
            member_ids: members,
            local_rank: None,
            stability: None,
            top_tokens: tokens
                .iter()
                .map(|t| TokenWeight {
                    token: t.to_string(),
                    weight: 1.0,
                })
                .collect(),
            stop_reason: if children.is_empty() {
                StopReason::MinSize
            } else {
                StopReason::None
            },
            zero_rows: vec![],
            children,
        }
    }

    fn fixture() -> (TopicTree, Vec<Document>) {
        let tree = TopicTree::new(node(
            "root",
            &["layer"],
            vec![0, 1, 2],
            vec![
                node("0", &["superconductivity", "gap"], vec![0, 1], vec![]),
                node("1", &["battery", "anode"], vec![2], vec![]),
            ],
        ))
        .unwrap();
        let doc = |id: &str, text: &str, m: &str| Document {
            id: id.into(),
            title: text.into(),
            abstract_text: String::new(),
            attributes: BTreeMap::from([("material".to_string(), vec![m.to_string()])]),
        };
        let docs = vec![
            doc("a", "Superconducting gap in NbSe2", "NbSe2"),
            doc("b", "Pairing gap", "S2Ta"),
            doc("c", "Battery anode", "FeS2"),
        ];
        (tree, docs)
    }

    #[test]
    fn prefix_keyword_match() {
        let (tree, docs) = fixture();
        let r = search(&SearchQuery::keywords(&["superconduct"]), &tree, &docs).unwrap();
        assert_eq!(r.nodes, ["0"]);
        assert_eq!(r.documents, [0, 1]);
    }

    #[test]
    fn and_logic_across_nodes_is_empty() {
        let (tree, docs) = fixture();
        let mut q = SearchQuery::keywords(&["gap", "battery"]);
        q.logic = Logic::And;
        let r = search(&q, &tree, &docs).unwrap();
        assert!(r.nodes.is_empty());
        assert!(r.documents.is_empty());
    }

    #[test]
    fn top_n_limits_tokens() {
        let (tree, docs) = fixture();
        let mut q = SearchQuery::keywords(&["gap"]);
        q.top_n = TopN::Count(1);
        assert!(search(&q, &tree, &docs).unwrap().nodes.is_empty());
        q.top_n = TopN::All;
        assert_eq!(search(&q, &tree, &docs).unwrap().nodes, ["0"]);
    }

    #[test]
    fn denovo_facets_and_clusters() {
        let (tree, docs) = fixture();
        let q = SearchQuery {
            tokens: vec!["gap".into()],
            mode: SearchMode::Denovo,
            ..Default::default()
        };
        let r = search(&q, &tree, &docs).unwrap();
        assert_eq!(r.documents, [0, 1]);
        assert_eq!(r.nodes, ["root", "0"]);

        let q = SearchQuery {
            facet_filters: BTreeMap::from([("material".to_string(), vec!["S2Ta".to_string()])]),
            ..Default::default()
        };
        assert_eq!(search(&q, &tree, &docs).unwrap().documents, [1]);

        let q = SearchQuery {
            selected_clusters: vec!["1".into()],
            ..Default::default()
        };
        let r = search(&q, &tree, &docs).unwrap();
        assert_eq!(r.nodes, ["1"]);
        assert_eq!(r.documents, [2]);

        let q = SearchQuery {
            tokens: vec!["gap".into()],
            facet_filters: BTreeMap::new(),
            ..Default::default()
        };
        assert_eq!(search(&q, &tree, &docs).unwrap().documents, [0, 1]);
    }

    #[test]
    fn errors() {
        let (tree, docs) = fixture();
        let q = SearchQuery {
            facet_filters: BTreeMap::from([("colour".to_string(), vec![])]),
            ..Default::default()
        };
        assert!(matches!(search(&q, &tree, &docs), Err(Error::Argument(_))));
        assert!(search(&SearchQuery::default(), &tree, &docs).is_err());
        let q = SearchQuery {
            selected_clusters: vec!["9".into()],
            ..Default::default()
        };
        assert!(matches!(search(&q, &tree, &docs), Err(Error::NotFound(_))));
    }

    #[test]
    fn top_n_serde() {
        let q: SearchQuery = serde_json::from_str(r#"{"tokens":["a"],"top_n":"all"}"#).unwrap();
        assert_eq!(q.top_n, TopN::All);
        let q: SearchQuery = serde_json::from_str(r#"{"tokens":["a"],"top_n":5}"#).unwrap();
        assert_eq!(q.top_n, TopN::Count(5));
        assert!(serde_json::from_str::<SearchQuery>(r#"{"top_n":"many"}"#).is_err());
        assert!(serde_json::from_str::<SearchQuery>(r#"{"bogus":1}"#).is_err());
    }
}
