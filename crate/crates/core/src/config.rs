//! Fully resolved run configuration.
//!
//! Values come from defaults, then an optional TOML file, then `key=value`
//! overrides addressed by dotted path (`hierarchy.k_max=4`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::binary::EnsembleConfig;
use crate::corpus::{PropertyOptions, TfidfOptions, Tokenizer};
use crate::error::{Error, Result};
use crate::eval::CvOptions;
use crate::hnmfk::HnmfkConfig;
use crate::search::TopN;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub tokenizer: Tokenizer,
    pub tfidf: TfidfOptions,
    pub hierarchy: HnmfkConfig,
    pub property: PropertyOptions,
    pub ensemble: EnsembleConfig,
    pub fit_seed: u64,
    pub evaluate: EvaluateConfig,
    pub paths: PathsConfig,
    pub serve: ServeConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    /// Token prefix that selects the target topics.
    pub target_query: String,
    /// Ranked tokens per topic searched for the query.
    pub query_top_n: TopN,
    /// Target materials. Empty means every material linked to at least
    /// half of the target topics.
    pub target_materials: Vec<String>,
    /// Materials ranked against the targets. Empty means all others.
    pub decoy_materials: Vec<String>,
    pub cv: CvOptions,
    pub seed: u64,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            target_query: "superconduct".into(),
            query_top_n: TopN::Count(10),
            target_materials: Vec::new(),
            decoy_materials: Vec::new(),
            cv: CvOptions::default(),
            seed: 7,
        }
    }
}

/// Input and output locations. Not part of the bundle checksum.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub corpus: Option<PathBuf>,
    pub bundle: Option<PathBuf>,
}

/// Service settings. Not part of the bundle checksum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServeConfig {
    pub host: String,
    pub port: u16,
    /// Allowed browser origin; `*` allows any.
    pub cors_origin: String,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            host: "127.0.0.1".into(),
            port: 8080,
            cors_origin: "http://localhost:5173".into(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Applies one `dotted.key=value` override. The value is read as a TOML
    /// literal when it parses as one, otherwise as a bare string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{assignment}`")))?;
        let key = key.trim();
        let value = parse_value(raw.trim());
        let mut root = toml::Value::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let mut slot = &mut root;
        let parts: Vec<&str> = key.split('.').collect();
        for (depth, part) in parts.iter().enumerate() {
            let table = slot
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("`{key}` is not a table path")))?;
            if depth + 1 == parts.len() {
                table.insert(part.to_string(), value.clone());
                break;
            }
            // optional sections are absent from the serialized form
            slot = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(Default::default()));
        }
        let updated: RunConfig = root
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("{key}: {}", e.message())))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        self.hierarchy
            .validate()
            .map_err(|e| Error::Config(format!("hierarchy: {e}")))?;
        self.ensemble
            .lmf
            .validate()
            .map_err(|e| Error::Config(format!("ensemble.lmf: {e}")))?;
        let sel = &self.ensemble.selection;
        if sel.ensemble_size < 2 {
            return bad("ensemble.selection.ensemble_size must be at least 2".into());
        }
        if !(0.0..1.0).contains(&sel.perturbation) {
            return bad("ensemble.selection.perturbation must lie in [0, 1)".into());
        }
        if !(0.0..=1.0).contains(&sel.stability_threshold) {
            return bad("ensemble.selection.stability_threshold must lie in [0, 1]".into());
        }
        if self.ensemble.candidates.is_empty() || self.ensemble.candidates.contains(&0) {
            return bad("ensemble.candidates must be non-empty and positive".into());
        }
        if !(self.ensemble.bnmf.grid_step > 0.0 && self.ensemble.bnmf.grid_step < 1.0) {
            return bad("ensemble.bnmf.grid_step must lie in (0, 1)".into());
        }
        if self.property.assoc_min < 1 || self.property.coverage_floor < 1 {
            return bad("property.assoc_min and property.coverage_floor must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.tfidf.max_df_fraction) || self.tfidf.min_df < 1 {
            return bad("tfidf.min_df must be ≥ 1 and tfidf.max_df_fraction in [0, 1]".into());
        }
        let cv = &self.evaluate.cv;
        if cv.folds < 2 {
            return bad("evaluate.cv.folds must be at least 2".into());
        }
        if cv.negative_ratio < 1 || cv.ks.is_empty() || cv.ks.contains(&0) {
            return bad("evaluate.cv.negative_ratio and ks must be positive".into());
        }
        if self.evaluate.target_query.trim().is_empty() {
            return bad("evaluate.target_query must be non-empty".into());
        }
        Ok(())
    }

    /// Canonical JSON of everything that influences artifacts.
    pub fn fingerprint(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("paths");
            obj.remove("serve");
        }
        v.to_string()
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
