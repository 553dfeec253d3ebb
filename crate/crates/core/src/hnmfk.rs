//! Hierarchical NMFk: recursive rank-selected factorization of ever smaller
//! row submatrices, producing a topic tree.
//!
//! At every node the stable rank `k_d` is chosen from the node's candidate
//! set, the node's submatrix is factorized at that rank, and each row is
//! assigned to the column of `W` where it loads most. The node stops when
//! the submatrix is degenerate, too small, rank one, unsplit, or at the
//! depth cap; otherwise every non-empty cluster becomes a child whose
//! candidate set is `{k_min, …, min(k_max, k_d + 1)}`.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::factor::nmf::{random_init, run_multiplicative};
use crate::factor::nmfk::select_rank_array;
use crate::factor::{NmfOptions, RankSelectionOptions};
use crate::matrix::DenseMatrix;
use crate::seed;

pub const ROOT_PATH: &str = "root";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HnmfkConfig {
    pub k_min: usize,
    pub k_max: usize,
    /// Nodes with at most this many members are not split.
    pub s_min: usize,
    pub d_max: usize,
    pub seed: u64,
    pub selection: RankSelectionOptions,
    /// Options for the single factorization at the selected rank.
    pub factor: NmfOptions,
    /// Number of ranked tokens kept per node.
    pub token_limit: usize,
}

impl Default for HnmfkConfig {
    fn default() -> Self {
        HnmfkConfig {
            k_min: 1,
            k_max: 6,
            s_min: 5,
            d_max: 3,
            seed: 0,
            selection: RankSelectionOptions::default(),
            factor: NmfOptions::default(),
            token_limit: 100,
        }
    }
}

impl HnmfkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_min < 1 || self.k_min > self.k_max {
            return Err(Error::argument("require 1 <= k_min <= k_max"));
        }
        if self.s_min < 1 {
            return Err(Error::argument("s_min must be at least 1"));
        }
        if self.d_max < 1 {
            return Err(Error::argument("d_max must be at least 1"));
        }
        Ok(())
    }

    pub fn root_candidates(&self) -> Vec<usize> {
        (self.k_min..=self.k_max).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MinDim,
    MinSize,
    RankOne,
    UniformLabels,
    MaxDepth,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenWeight {
    pub token: String,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicNode {
    pub path_id: String,
    pub depth: usize,
    pub member_ids: Vec<usize>,
    /// `None` when the node stopped before it could be factorized.
    pub local_rank: Option<usize>,
    pub stability: Option<f64>,
    pub top_tokens: Vec<TokenWeight>,
    pub stop_reason: StopReason,
    /// Members whose feature rows are entirely zero; they were routed to
    /// the largest cluster.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub zero_rows: Vec<usize>,
    pub children: Vec<TopicNode>,
}

impl TopicNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// A topic hierarchy with a path-id index over every node.
#[derive(Clone, Debug, PartialEq)]
pub struct TopicTree {
    root: TopicNode,
    index: BTreeMap<String, Vec<usize>>,
}

impl TopicTree {
    pub fn new(root: TopicNode) -> Result<Self> {
        let mut index = BTreeMap::new();
        let mut stack = vec![(&root, Vec::new())];
        while let Some((node, route)) = stack.pop() {
            for (i, child) in node.children.iter().enumerate().rev() {
                let mut r = route.clone();
                r.push(i);
                stack.push((child, r));
            }
            if index.insert(node.path_id.clone(), route).is_some() {
                return Err(Error::domain(format!(
                    "duplicate path id `{}`",
                    node.path_id
                )));
            }
        }
        Ok(TopicTree { root, index })
    }

    pub fn root(&self) -> &TopicNode {
        &self.root
    }

    pub fn get(&self, path_id: &str) -> Option<&TopicNode> {
        let route = self.index.get(path_id)?;
        Some(route.iter().fold(&self.root, |n, &i| &n.children[i]))
    }

    pub fn total_topics(&self) -> usize {
        self.index.len()
    }

    /// All nodes in preorder.
    pub fn nodes(&self) -> Vec<&TopicNode> {
        let mut out = Vec::with_capacity(self.index.len());
        let mut stack = vec![&self.root];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(n.children.iter().rev());
        }
        out
    }

    pub fn leaves(&self) -> Vec<&TopicNode> {
        self.nodes().into_iter().filter(|n| n.is_leaf()).collect()
    }

    pub fn max_depth(&self) -> usize {
        self.nodes().iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Node count per depth, index = depth.
    pub fn nodes_per_depth(&self) -> Vec<usize> {
        let mut counts = vec![0; self.max_depth() + 1];
        for n in self.nodes() {
            counts[n.depth] += 1;
        }
        counts
    }

    /// Path ids of the node and all of its descendants.
    pub fn subtree_ids(&self, path_id: &str) -> Option<Vec<String>> {
        let node = self.get(path_id)?;
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            out.push(n.path_id.clone());
            stack.extend(n.children.iter().rev());
        }
        Some(out)
    }
}

impl Serialize for TopicTree {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.root.serialize(s)
    }
}

impl<'de> Deserialize<'de> for TopicTree {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let root = TopicNode::deserialize(d)?;
        TopicTree::new(root).map_err(serde::de::Error::custom)
    }
}

/// Row-wise argmax of `W`; ties go to the lowest column.
pub fn assign_clusters(w: ArrayView2<f64>) -> Result<Vec<usize>> {
    if w.nrows() == 0 || w.ncols() == 0 {
        return Err(Error::argument("cannot assign clusters from an empty W"));
    }
    Ok(w.rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (r, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = r;
                }
            }
            best
        })
        .collect())
}

/// First matching stop condition in fixed order.
pub fn stopping_test(
    node_rows: usize,
    node_cols: usize,
    member_count: usize,
    k_d: usize,
    labels: &[usize],
    depth: usize,
    config: &HnmfkConfig,
) -> StopReason {
    if node_rows.min(node_cols) <= 1 {
        StopReason::MinDim
    } else if member_count <= config.s_min {
        StopReason::MinSize
    } else if k_d == 1 {
        StopReason::RankOne
    } else if labels.windows(2).all(|p| p[0] == p[1]) {
        StopReason::UniformLabels
    } else if depth >= config.d_max {
        StopReason::MaxDepth
    } else {
        StopReason::None
    }
}

/// `{k_min, …, min(k_max, k_d + 1)}`; empty when `k_min` exceeds the cap.
pub fn child_candidate_ranks(k_d: usize, config: &HnmfkConfig) -> Vec<usize> {
    let cap = config.k_max.min(k_d + 1);
    (config.k_min..=cap).collect()
}

/// The `n` heaviest tokens, descending; equal weights in lexicographic order.
pub fn top_tokens(weights: &[f64], vocabulary: &[String], n: usize) -> Result<Vec<TokenWeight>> {
    if weights.len() != vocabulary.len() {
        return Err(Error::argument(format!(
            "{} weights for {} tokens",
            weights.len(),
            vocabulary.len()
        )));
    }
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        weights[b]
            .total_cmp(&weights[a])
            .then_with(|| vocabulary[a].cmp(&vocabulary[b]))
    });
    Ok(order
        .into_iter()
        .take(n)
        .map(|i| TokenWeight {
            token: vocabulary[i].clone(),
            weight: weights[i],
        })
        .collect())
}

/// Builds the topic tree over the rows of `x`, identified by `row_ids`.
/// `features` names the columns of `x`.
pub fn build_hierarchy(
    x: &DenseMatrix,
    row_ids: &[usize],
    features: &[String],
    config: &HnmfkConfig,
) -> Result<TopicTree> {
    config.validate()?;
    if !x.is_nonnegative() {
        return Err(Error::domain("hierarchy input contains a negative entry"));
    }
    if row_ids.len() != x.rows() {
        return Err(Error::argument("row_ids length differs from matrix rows"));
    }
    if features.len() != x.cols() {
        return Err(Error::argument(
            "feature label count differs from matrix columns",
        ));
    }
    let ctx = Context {
        x: x.view(),
        row_ids,
        features,
        config,
    };
    let members: Vec<usize> = (0..x.rows()).collect();
    let centroid = x.view().mean_axis(Axis(0)).expect("non-empty matrix");
    let tokens = ctx.tokens(&centroid.to_vec())?;
    let root = ctx.build(
        members,
        config.root_candidates(),
        0,
        ROOT_PATH.to_string(),
        config.seed,
        tokens,
    )?;
    TopicTree::new(root)
}

struct Context<'a> {
    x: &'a Array2<f64>,
    row_ids: &'a [usize],
    features: &'a [String],
    config: &'a HnmfkConfig,
}

impl Context<'_> {
    fn tokens(&self, weights: &[f64]) -> Result<Vec<TokenWeight>> {
        let mut t = top_tokens(weights, self.features, self.config.token_limit)?;
        t.retain(|tw| tw.weight > 0.0);
        Ok(t)
    }

    fn build(
        &self,
        members: Vec<usize>,
        candidates: Vec<usize>,
        depth: usize,
        path_id: String,
        node_seed: u64,
        top_tokens: Vec<TokenWeight>,
    ) -> Result<TopicNode> {
        let member_ids: Vec<usize> = members.iter().map(|&r| self.row_ids[r]).collect();
        let leaf =
            |reason: StopReason, local_rank: Option<usize>, stability: Option<f64>| TopicNode {
                path_id: path_id.clone(),
                depth,
                member_ids: member_ids.clone(),
                local_rank,
                stability,
                top_tokens: top_tokens.clone(),
                stop_reason: reason,
                zero_rows: Vec::new(),
                children: Vec::new(),
            };

        let cols: Vec<usize> = (0..self.x.ncols())
            .filter(|&j| members.iter().any(|&r| self.x[[r, j]] != 0.0))
            .collect();
        let (n, m) = (members.len(), cols.len());
        // Conditions that hold regardless of the factorization.
        if n.min(m) <= 1 {
            return Ok(leaf(StopReason::MinDim, None, None));
        }
        if n <= self.config.s_min {
            return Ok(leaf(StopReason::MinSize, None, None));
        }
        let feasible: Vec<usize> = candidates.into_iter().filter(|&k| k <= n.min(m)).collect();
        if feasible.is_empty() {
            return Ok(leaf(StopReason::MinDim, None, None));
        }

        let sub = Array2::from_shape_fn((n, m), |(i, j)| self.x[[members[i], cols[j]]]);
        let report = select_rank_array(&sub, &feasible, &self.config.selection, node_seed)?;
        let k = report.selected_rank;
        let stability = report.stability_of(k);
        let (w0, h0) = random_init(&sub, k, seed::derive(node_seed, &[u64::MAX]));
        let fit = run_multiplicative(&sub, w0, h0, self.config.factor, None);

        let zero: Vec<bool> = sub
            .rows()
            .into_iter()
            .map(|r| r.iter().all(|&v| v == 0.0))
            .collect();
        let mut labels = assign_clusters(fit.w.view())?;
        let mut zero_rows = Vec::new();
        if zero.iter().any(|&z| z) {
            let mut sizes = vec![0usize; k];
            for (i, &l) in labels.iter().enumerate() {
                if !zero[i] {
                    sizes[l] += 1;
                }
            }
            let largest = (0..k).fold(0, |b, c| if sizes[c] > sizes[b] { c } else { b });
            for (i, l) in labels.iter_mut().enumerate() {
                if zero[i] {
                    *l = largest;
                    zero_rows.push(member_ids[i]);
                }
            }
        }

        let reason = stopping_test(n, m, n, k, &labels, depth, self.config);
        if reason != StopReason::None {
            let mut node = leaf(reason, Some(k), stability);
            node.zero_rows = zero_rows;
            return Ok(node);
        }

        let child_candidates = child_candidate_ranks(k, self.config);
        let mut specs = Vec::new();
        for c in 0..k {
            let child_members: Vec<usize> = labels
                .iter()
                .enumerate()
                .filter(|&(_, &l)| l == c)
                .map(|(i, _)| members[i])
                .collect();
            if child_members.is_empty() {
                continue;
            }
            let mut weights = vec![0.0; self.x.ncols()];
            for (j, &col) in cols.iter().enumerate() {
                weights[col] = fit.h[[c, j]];
            }
            let child_path = if depth == 0 {
                c.to_string()
            } else {
                format!("{path_id}_{c}")
            };
            specs.push((
                child_members,
                weights,
                child_path,
                seed::derive(node_seed, &[c as u64]),
            ));
        }

        let children = specs
            .into_par_iter()
            .map(|(child_members, weights, child_path, child_seed)| {
                let tokens = self.tokens(&weights)?;
                self.build(
                    child_members,
                    child_candidates.clone(),
                    depth + 1,
                    child_path,
                    child_seed,
                    tokens,
                )
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(TopicNode {
            path_id: path_id.clone(),
            depth,
            member_ids,
            local_rank: Some(k),
            stability,
            top_tokens,
            stop_reason: StopReason::None,
            zero_rows,
            children,
        })
    }
}
