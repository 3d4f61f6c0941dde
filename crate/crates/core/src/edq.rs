//! `.edq` stage files: a versioned JSON envelope around one pipeline stage.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eat::EatSweepResult;
use crate::ingest::{parse_data_config, DataConfig, EberData};
use crate::tradeoff::{MinTradeoffInfo, MinTradeoffRequest};

pub const EDQ_VERSION: u32 = 1;

pub const KINDS: [&str; 5] = ["data-config", "eber-data", "certificate", "min-tradeoff", "sweep-result"];

#[derive(Debug, Error)]
pub enum EdqError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown .edq kind '{0}'")]
    UnknownKind(String),
    #[error("unsupported .edq version {0}")]
    Version(u32),
    #[error("malformed .edq document: {0}")]
    Schema(String),
    #[error("expected a {expected} document, found {found}")]
    WrongKind { expected: &'static str, found: &'static str },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "kebab-case")]
pub enum Stage {
    DataConfig(DataConfig),
    EberData(Box<EberData>),
    Certificate(MinTradeoffRequest),
    MinTradeoff(Box<MinTradeoffInfo>),
    SweepResult(Box<EatSweepResult>),
}

impl Stage {
    pub fn kind(&self) -> &'static str {
        match self {
            Stage::DataConfig(_) => "data-config",
            Stage::EberData(_) => "eber-data",
            Stage::Certificate(_) => "certificate",
            Stage::MinTradeoff(_) => "min-tradeoff",
            Stage::SweepResult(_) => "sweep-result",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdqDocument {
    pub version: u32,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub setup_nickname: String,
    #[serde(flatten)]
    pub stage: Stage,
}

impl EdqDocument {
    pub fn new(stage: Stage, setup_nickname: impl Into<String>) -> Self {
        Self {
            version: EDQ_VERSION,
            created_at: Utc::now(),
            setup_nickname: setup_nickname.into(),
            stage,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes")
    }

    /// Reads an envelope, or a bare data configuration as written by the GUI.
    pub fn from_json(text: &str) -> Result<Self, EdqError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| EdqError::Schema(e.to_string()))?;
        let Some(kind) = value.get("kind") else {
            let config = parse_data_config(text).map_err(|e| EdqError::Schema(e.to_string()))?;
            let nickname = config.setup_nickname.clone();
            return Ok(Self::new(Stage::DataConfig(config), nickname));
        };
        let kind = kind.as_str().unwrap_or_default();
        if !KINDS.contains(&kind) {
            return Err(EdqError::UnknownKind(kind.to_string()));
        }
        let doc: Self = serde_json::from_value(value).map_err(|e| EdqError::Schema(e.to_string()))?;
        if doc.version > EDQ_VERSION {
            return Err(EdqError::Version(doc.version));
        }
        if let Stage::DataConfig(c) = &doc.stage {
            c.validate().map_err(|e| EdqError::Schema(e.to_string()))?;
        }
        Ok(doc)
    }

    pub fn save(&self, path: &Path) -> Result<(), EdqError> {
        fs::write(path, self.to_json()).map_err(|source| EdqError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, EdqError> {
        let text = fs::read_to_string(path).map_err(|source| EdqError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    fn wrong(&self, expected: &'static str) -> EdqError {
        EdqError::WrongKind {
            expected,
            found: self.stage.kind(),
        }
    }

    pub fn into_data_config(self) -> Result<DataConfig, EdqError> {
        match self.stage {
            Stage::DataConfig(c) => Ok(c),
            Stage::EberData(e) => Ok(e.config),
            _ => Err(self.wrong("data-config")),
        }
    }

    pub fn into_eber_data(self) -> Result<EberData, EdqError> {
        match self.stage {
            Stage::EberData(e) => Ok(*e),
            _ => Err(self.wrong("eber-data")),
        }
    }

    pub fn into_certificate(self) -> Result<MinTradeoffRequest, EdqError> {
        match self.stage {
            Stage::Certificate(c) => Ok(c),
            _ => Err(self.wrong("certificate")),
        }
    }

    pub fn into_min_tradeoff(self) -> Result<MinTradeoffInfo, EdqError> {
        match self.stage {
            Stage::MinTradeoff(m) => Ok(*m),
            _ => Err(self.wrong("min-tradeoff")),
        }
    }

    pub fn into_sweep(self) -> Result<EatSweepResult, EdqError> {
        match self.stage {
            Stage::SweepResult(s) => Ok(*s),
            _ => Err(self.wrong("sweep-result")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_kind_is_named() {
        let err = EdqDocument::from_json(r#"{"kind": "bogus", "version": 1, "payload": {}}"#).unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn certificate_round_trip() {
        let req = MinTradeoffRequest::new(vec!["C(0,0)".into()], vec![0.5], vec![2, 2], vec![2, 2]);
        let doc = EdqDocument::new(Stage::Certificate(req.clone()), "x");
        let back = EdqDocument::from_json(&doc.to_json()).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.into_certificate().unwrap(), req);
    }
}
