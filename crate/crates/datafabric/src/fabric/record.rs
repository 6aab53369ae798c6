//! Records and registration. Registration is where a record's keyword set
//! is fixed; after that the keywords never change, only field values do.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::fabric::value::FieldValue;
use crate::fabric::FabricError;

/// Wire form of one dataset line: `{"id": .., "tags": [..], "fields": {..}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub fields: BTreeMap<String, FieldValue>,
}

/// How keywords are derived from a raw record at registration time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtractionPolicy {
    /// Lowercased explicit tags only.
    ExplicitTags,
    /// Tags plus whitespace-split tokens of every text field, all lowercased.
    TagsPlusTextTokens,
}

impl std::fmt::Display for ExtractionPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ExtractionPolicy::ExplicitTags => "tags",
            ExtractionPolicy::TagsPlusTextTokens => "tags+text",
        };
        write!(f, "{name}")
    }
}

impl std::str::FromStr for ExtractionPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tags" => Ok(ExtractionPolicy::ExplicitTags),
            "tags+text" => Ok(ExtractionPolicy::TagsPlusTextTokens),
            other => Err(format!(
                "unknown extraction policy {other:?} (expected tags or tags+text)"
            )),
        }
    }
}

/// A registered record: identifier, mutable typed fields, and the frozen
/// keyword set that carries the record's recognizable structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub fields: BTreeMap<String, FieldValue>,
    keywords: BTreeSet<String>,
}

impl Record {
    pub fn keywords(&self) -> &BTreeSet<String> {
        &self.keywords
    }

    /// Byte footprint used by the data-movement metrics:
    /// 16 header + 8 per numeric field + text field bytes + per-keyword
    /// bytes plus one separator each.
    pub fn serialized_size(&self) -> u64 {
        let mut size = 16u64;
        for value in self.fields.values() {
            match value {
                FieldValue::Int(_) | FieldValue::Real(_) => size += 8,
                FieldValue::Text(s) => size += s.len() as u64,
            }
        }
        for kw in &self.keywords {
            size += kw.len() as u64 + 1;
        }
        size
    }
}

/// Derives the keyword set and validates the raw record. Rejects records
/// whose extraction yields no keywords at all: without at least one keyword
/// the record is unaddressable noise to the fabric.
pub fn register_record(
    raw: &RawRecord,
    extraction: ExtractionPolicy,
) -> Result<Record, FabricError> {
    if raw.id.is_empty() {
        return Err(FabricError::MalformedRecord(
            "record id must be non-empty".into(),
        ));
    }
    let mut keywords: BTreeSet<String> =
        raw.tags.iter().map(|t| t.to_lowercase()).collect();
    keywords.remove("");
    if extraction == ExtractionPolicy::TagsPlusTextTokens {
        for value in raw.fields.values() {
            if let FieldValue::Text(s) = value {
                keywords.extend(s.split_whitespace().map(|t| t.to_lowercase()));
            }
        }
    }
    if keywords.is_empty() {
        return Err(FabricError::EmptyKeywordSet(raw.id.clone()));
    }
    Ok(Record {
        id: raw.id.clone(),
        fields: raw.fields.clone(),
        keywords,
    })
}

/// Reads a JSON Lines dataset and registers every record, enforcing
/// fabric-wide id uniqueness. Blank lines are skipped.
pub fn load_dataset<R: BufRead>(
    reader: R,
    extraction: ExtractionPolicy,
) -> Result<Vec<Record>, FabricError> {
    let mut seen = BTreeSet::new();
    let mut records = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| FabricError::MalformedRecord(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| {
            FabricError::MalformedRecord(format!("line {}: {e}", lineno + 1))
        })?;
        if !seen.insert(raw.id.clone()) {
            return Err(FabricError::DuplicateRecordId(raw.id));
        }
        records.push(register_record(&raw, extraction)?);
    }
    Ok(records)
}
