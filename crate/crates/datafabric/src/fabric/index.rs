//! Per-DPU knowledge index: keyword -> local record ids, plus the digest
//! (the DPU's full keyword set) that drives accept/reject decisions.

use std::collections::{BTreeMap, BTreeSet};

use crate::fabric::record::Record;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeIndex {
    by_keyword: BTreeMap<String, BTreeSet<String>>,
}

impl KnowledgeIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, record: &Record) {
        for kw in record.keywords() {
            self.by_keyword
                .entry(kw.clone())
                .or_default()
                .insert(record.id.clone());
        }
    }

    /// The DPU's full keyword set: the union of index keys.
    pub fn digest(&self) -> BTreeSet<String> {
        self.by_keyword.keys().cloned().collect()
    }

    pub fn contains_keyword(&self, keyword: &str) -> bool {
        self.by_keyword.contains_key(keyword)
    }

    pub fn records_for(&self, keyword: &str) -> Option<&BTreeSet<String>> {
        self.by_keyword.get(keyword)
    }

    pub fn is_empty(&self) -> bool {
        self.by_keyword.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BTreeSet<String>)> {
        self.by_keyword.iter()
    }

    /// Reconstructs the index from scratch over a local store. The
    /// incrementally maintained index must always equal this.
    pub fn rebuild<'a, I: IntoIterator<Item = &'a Record>>(records: I) -> Self {
        let mut idx = Self::new();
        for r in records {
            idx.insert(r);
        }
        idx
    }
}
