//! The universal retrieval result: an ordered list of scored session ids.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub id: String,
    pub score: f64,
}

/// Ordered (doc id, score) pairs. Ids are unique, scores non-increasing and
/// rank is the 1-based position.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub source: String,
    pub items: Vec<ScoredDoc>,
}

/// Descending score, then ascending id.
pub(crate) fn rank_order(a: &ScoredDoc, b: &ScoredDoc) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id))
}

impl RankedList {
    pub fn new(source: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            items: Vec::new(),
        }
    }

    /// Sorts `items` into rank order and keeps the first `k`.
    pub fn from_unsorted(source: impl Into<String>, mut items: Vec<ScoredDoc>, k: usize) -> Self {
        items.sort_by(rank_order);
        items.truncate(k);
        Self {
            source: source.into(),
            items,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|d| d.id.as_str())
    }

    /// 1-based rank of `id`, if present.
    pub fn rank_of(&self, id: &str) -> Option<usize> {
        self.items.iter().position(|d| d.id == id).map(|p| p + 1)
    }

    pub fn truncate(&mut self, k: usize) {
        self.items.truncate(k);
    }
}
