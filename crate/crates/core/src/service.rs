//! Read-only HTTP API over a loaded bundle.
//!
//! | method | path | body |
//! |---|---|---|
//! | GET | `/api/meta` | counts, facet names, materials, available artifacts |
//! | GET | `/api/tree?tokens=N` | nested node summaries with `N` tokens each (default 10, or `all`) |
//! | GET | `/api/node/{id}` | one node with all ranked tokens, parent and child ids |
//! | GET | `/api/node/{id}/documents?offset=&limit=` | a page of member documents |
//! | GET | `/api/node/{id}/facets/{facet}` | value counts and percentages |
//! | POST | `/api/search` | a `SearchQuery`; returns matching node ids and document indices |
//! | GET | `/api/predictions?top=&status=&topics=` | highest-scoring cells |
//! | GET | `/api/eval` | the stored evaluation |
//!
//! Errors are `{"error": {"class", "message", "fields": [{"field", "message"}]}}`
//! with status 400 for bad input and 404 for unknown ids or absent artifacts.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::{json, Value};
use tower_http::cors::{Any, CorsLayer};

use crate::config::ServeConfig;
use crate::corpus::{facet_distribution, Document, FacetShare, MaterialsPropertyMatrix};
use crate::error::{Error, Result};
use crate::hnmfk::{StopReason, TokenWeight, TopicNode, TopicTree};
use crate::matrix::DenseMatrix;
use crate::pipeline::{load_corpus, predictions, CellStatus, EvalArtifact, Prediction};
use crate::search::{search, SearchQuery, SearchResult, TopN};
use crate::store::{artifact, Bundle};

pub const DEFAULT_PAGE: usize = 20;
pub const MAX_PAGE: usize = 1000;

/// Everything the service reads. Immutable once built.
#[derive(Debug)]
pub struct ServiceState {
    pub checksum: String,
    pub docs: Vec<Document>,
    pub tree: TopicTree,
    pub property: Option<MaterialsPropertyMatrix>,
    pub scores: Option<DenseMatrix>,
    pub eval: Option<EvalArtifact>,
    facets: BTreeSet<String>,
}

impl ServiceState {
    pub fn new(
        docs: Vec<Document>,
        tree: TopicTree,
        property: Option<MaterialsPropertyMatrix>,
        scores: Option<DenseMatrix>,
        eval: Option<EvalArtifact>,
    ) -> Self {
        let facets = docs.iter().flat_map(|d| d.attributes.keys().cloned()).collect();
        ServiceState {
            checksum: String::new(),
            docs,
            tree,
            property,
            scores,
            eval,
            facets,
        }
    }

    /// Loads the corpus and tree, plus whichever later artifacts exist.
    pub fn from_bundle(bundle: &Bundle) -> Result<Self> {
        bundle.require(&[artifact::CORPUS, artifact::TREE])?;
        let docs = load_corpus(bundle)?;
        let tree: TopicTree = bundle.read_json(artifact::TREE)?;
        let property = match bundle.has(artifact::PROPERTY) {
            true => Some(bundle.read_json(artifact::PROPERTY)?),
            false => None,
        };
        let scores = match bundle.has(artifact::SCORES) {
            true => Some(bundle.read_matrix(artifact::SCORES)?),
            false => None,
        };
        let eval = match bundle.has(artifact::EVAL) {
            true => Some(bundle.read_json(artifact::EVAL)?),
            false => None,
        };
        let mut state = Self::new(docs, tree, property, scores, eval);
        state.checksum = bundle.checksum().to_string();
        Ok(state)
    }
}

#[derive(Debug, Serialize)]
struct FieldError {
    field: String,
    message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    class: &'static str,
    message: String,
    fields: Vec<FieldError>,
}

impl ApiError {
    fn bad_request(fields: Vec<(String, String)>) -> Self {
        let message = fields
            .iter()
            .map(|(f, m)| format!("{f}: {m}"))
            .collect::<Vec<_>>()
            .join("; ");
        ApiError {
            status: StatusCode::BAD_REQUEST,
            class: "bad_request",
            message,
            fields: fields
                .into_iter()
                .map(|(field, message)| FieldError { field, message })
                .collect(),
        }
    }

    fn field(field: &str, message: impl Into<String>) -> Self {
        Self::bad_request(vec![(field.to_string(), message.into())])
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            class: "not_found",
            message: message.into(),
            fields: Vec::new(),
        }
    }

    fn unknown_node(id: &str) -> Self {
        Self::not_found(format!("no topic with path id `{id}`"))
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::NotFound(_) | Error::Dependency { .. } => StatusCode::NOT_FOUND,
            Error::Argument(_) | Error::Domain(_) | Error::Json(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError {
            status,
            class: e.class(),
            message: e.to_string(),
            fields: Vec::new(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "error": {"class": self.class, "message": self.message, "fields": self.fields}
        });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;
type Params = Query<BTreeMap<String, String>>;
type Shared = State<Arc<ServiceState>>;

/// Builds the router. `cors_origin` is an exact origin or `*`.
pub fn router(state: Arc<ServiceState>, cors_origin: &str) -> Result<Router> {
    let cors = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([axum::http::header::CONTENT_TYPE]);
    let cors = if cors_origin == "*" {
        cors.allow_origin(Any)
    } else {
        let origin = HeaderValue::from_str(cors_origin)
            .map_err(|_| Error::Config(format!("invalid CORS origin `{cors_origin}`")))?;
        cors.allow_origin(origin)
    };
    Ok(Router::new()
        .route("/api/meta", get(meta))
        .route("/api/tree", get(tree))
        .route("/api/node/{id}", get(node))
        .route("/api/node/{id}/documents", get(documents))
        .route("/api/node/{id}/facets/{facet}", get(facets))
        .route("/api/search", post(search_handler))
        .route("/api/predictions", get(predictions_handler))
        .route("/api/eval", get(eval))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .layer(cors)
        .with_state(state))
}

/// Serves until Ctrl-C.
pub async fn serve(state: ServiceState, config: &ServeConfig) -> Result<()> {
    let app = router(Arc::new(state), &config.cors_origin)?;
    let addr = format!("{}:{}", config.host, config.port);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|e| Error::io(format!("binding {addr}"), e))?;
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::io("serving", e))
}

fn parse_count(params: &BTreeMap<String, String>, key: &str, default: usize) -> std::result::Result<usize, ApiError> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| ApiError::field(key, format!("expected a nonnegative integer, got `{v}`"))),
    }
}

fn lookup<'a>(state: &'a ServiceState, id: &str) -> std::result::Result<&'a TopicNode, ApiError> {
    state.tree.get(id).ok_or_else(|| ApiError::unknown_node(id))
}

#[derive(Serialize)]
struct TreeNode {
    path_id: String,
    depth: usize,
    size: usize,
    local_rank: Option<usize>,
    stability: Option<f64>,
    stop_reason: StopReason,
    top_tokens: Vec<TokenWeight>,
    children: Vec<TreeNode>,
}

fn tree_node(n: &TopicNode, tokens: TopN) -> TreeNode {
    let take = match tokens {
        TopN::Count(c) => c.min(n.top_tokens.len()),
        TopN::All => n.top_tokens.len(),
    };
    TreeNode {
        path_id: n.path_id.clone(),
        depth: n.depth,
        size: n.member_ids.len(),
        local_rank: n.local_rank,
        stability: n.stability,
        stop_reason: n.stop_reason,
        top_tokens: n.top_tokens[..take].to_vec(),
        children: n.children.iter().map(|c| tree_node(c, tokens)).collect(),
    }
}

async fn meta(State(s): Shared) -> Json<Value> {
    Json(json!({
        "checksum": s.checksum,
        "documents": s.docs.len(),
        "topics": s.tree.total_topics(),
        "max_depth": s.tree.max_depth(),
        "facets": s.facets,
        "materials": s.property.as_ref().map(|p| p.matrix.col_labels().to_vec()),
        "has_predictions": s.scores.is_some() && s.property.is_some(),
        "has_eval": s.eval.is_some(),
    }))
}

async fn tree(State(s): Shared, Query(q): Params) -> ApiResult<TreeNode> {
    let tokens = match q.get("tokens").map(String::as_str) {
        None => TopN::Count(10),
        Some("all") => TopN::All,
        Some(v) => TopN::Count(v.parse().map_err(|_| {
            ApiError::field("tokens", format!("expected a count or `all`, got `{v}`"))
        })?),
    };
    Ok(Json(tree_node(s.tree.root(), tokens)))
}

#[derive(Serialize)]
struct NodeView {
    path_id: String,
    depth: usize,
    size: usize,
    local_rank: Option<usize>,
    stability: Option<f64>,
    stop_reason: StopReason,
    parent: Option<String>,
    children: Vec<String>,
    top_tokens: Vec<TokenWeight>,
}

fn parent_id(id: &str) -> Option<String> {
    match id {
        "root" => None,
        _ => Some(id.rsplit_once('_').map_or("root".to_string(), |(p, _)| p.to_string())),
    }
}

async fn node(State(s): Shared, Path(id): Path<String>) -> ApiResult<NodeView> {
    let n = lookup(&s, &id)?;
    Ok(Json(NodeView {
        path_id: n.path_id.clone(),
        depth: n.depth,
        size: n.member_ids.len(),
        local_rank: n.local_rank,
        stability: n.stability,
        stop_reason: n.stop_reason,
        parent: parent_id(&n.path_id),
        children: n.children.iter().map(|c| c.path_id.clone()).collect(),
        top_tokens: n.top_tokens.clone(),
    }))
}

#[derive(Serialize)]
struct DocView<'a> {
    index: usize,
    id: &'a str,
    title: &'a str,
    attributes: &'a BTreeMap<String, Vec<String>>,
}

#[derive(Serialize)]
struct DocPage<'a> {
    node: String,
    total: usize,
    offset: usize,
    limit: usize,
    documents: Vec<DocView<'a>>,
}

async fn documents(State(s): Shared, Path(id): Path<String>, Query(q): Params) -> Response {
    let page = || -> std::result::Result<Value, ApiError> {
        let n = lookup(&s, &id)?;
        let offset = parse_count(&q, "offset", 0)?;
        let limit = parse_count(&q, "limit", DEFAULT_PAGE)?;
        if limit == 0 || limit > MAX_PAGE {
            return Err(ApiError::field("limit", format!("must lie in [1, {MAX_PAGE}]")));
        }
        let docs = n
            .member_ids
            .iter()
            .skip(offset)
            .take(limit)
            .map(|&i| DocView {
                index: i,
                id: &s.docs[i].id,
                title: &s.docs[i].title,
                attributes: &s.docs[i].attributes,
            })
            .collect();
        Ok(serde_json::to_value(DocPage {
            node: n.path_id.clone(),
            total: n.member_ids.len(),
            offset,
            limit,
            documents: docs,
        })
        .expect("page serializes"))
    };
    match page() {
        Ok(v) => Json(v).into_response(),
        Err(e) => e.into_response(),
    }
}

#[derive(Serialize)]
struct FacetView {
    node: String,
    facet: String,
    total: usize,
    shares: Vec<FacetShare>,
}

async fn facets(State(s): Shared, Path((id, facet)): Path<(String, String)>) -> ApiResult<FacetView> {
    let n = lookup(&s, &id)?;
    if !s.facets.contains(&facet) {
        return Err(ApiError::field("facet", format!("unknown facet `{facet}`")));
    }
    let shares = facet_distribution(n, &s.docs, &facet);
    Ok(Json(FacetView {
        node: n.path_id.clone(),
        facet,
        total: shares.iter().map(|f| f.count).sum(),
        shares,
    }))
}

#[derive(Serialize)]
struct SearchView {
    node_count: usize,
    document_count: usize,
    #[serde(flatten)]
    result: SearchResult,
}

async fn search_handler(State(s): Shared, body: Bytes) -> ApiResult<SearchView> {
    let query: SearchQuery = serde_json::from_slice(&body).map_err(|e| {
        let msg = e.to_string();
        let field = msg
            .split('`')
            .nth(1)
            .filter(|_| msg.starts_with("unknown field") || msg.starts_with("missing field"))
            .unwrap_or("body");
        ApiError::field(field, msg.clone())
    })?;
    let problems = query.problems();
    if !problems.is_empty() {
        return Err(ApiError::bad_request(problems));
    }
    if let Some(bad) = query.facet_filters.keys().find(|f| !s.facets.contains(*f)) {
        return Err(ApiError::field("facet_filters", format!("unknown facet `{bad}`")));
    }
    if let Some(bad) = query.selected_clusters.iter().find(|c| s.tree.get(c).is_none()) {
        return Err(ApiError::unknown_node(bad));
    }
    let result = search(&query, &s.tree, &s.docs)?;
    Ok(Json(SearchView {
        node_count: result.nodes.len(),
        document_count: result.documents.len(),
        result,
    }))
}

async fn predictions_handler(State(s): Shared, Query(q): Params) -> ApiResult<Vec<Prediction>> {
    let (Some(property), Some(scores)) = (&s.property, &s.scores) else {
        return Err(ApiError::not_found("bundle has no fitted ensemble"));
    };
    let top = parse_count(&q, "top", 20)?;
    let status = match q.get("status") {
        None => CellStatus::Unknown,
        Some(v) => CellStatus::parse(v).map_err(|e| ApiError::field("status", e.to_string()))?,
    };
    let rows = match q.get("topics") {
        None => predictions(property, scores, status, top)?,
        Some(list) => {
            let wanted: BTreeSet<&str> = list.split(',').filter(|t| !t.is_empty()).collect();
            if let Some(bad) = wanted.iter().find(|t| s.tree.get(t).is_none()) {
                return Err(ApiError::unknown_node(bad));
            }
            let all = predictions(property, scores, status, usize::MAX)?;
            all.into_iter()
                .filter(|p| wanted.contains(p.topic.as_str()))
                .take(top)
                .collect()
        }
    };
    Ok(Json(rows))
}

async fn eval(State(s): Shared) -> ApiResult<EvalArtifact> {
    s.eval
        .clone()
        .map(Json)
        .ok_or_else(|| ApiError::not_found("bundle has no evaluation report"))
}
